//! Comparison estimators: overlapped and latent trace-norm denoising,
//! ridge-regularised CP by alternating least squares, and the optimistic
//! error line.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{param, Error, Result};
use crate::math;
use crate::matrix::{kron_list, Matrix};
use crate::rng::Rng;
use crate::spectral::prox_nuclear;
use crate::synthetic::cp_tensor;
use crate::tensor::Tensor;

/// Settings shared by the two trace-norm solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceNormOptions {
    pub eta: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for TraceNormOptions {
    fn default() -> Self {
        Self { eta: 1.0, max_iter: 2000, tol: 1e-5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceNormDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    /// Largest residual at the final iterate, unscaled.
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct TraceNormSolution {
    pub estimate: Tensor,
    pub diagnostics: TraceNormDiagnostics,
}

fn check_inputs(y: &Tensor, lambda: f64, opts: &TraceNormOptions) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(param("lambda", "must be positive and finite"));
    }
    if !(opts.eta > 0.0) || !opts.eta.is_finite() {
        return Err(param("eta", "must be positive and finite"));
    }
    if !(opts.tol > 0.0) {
        return Err(param("tol", "must be positive"));
    }
    if !y.is_finite() {
        return Err(Error::NonFinite);
    }
    Ok(())
}

fn prox_mode(t: &Tensor, mode: usize, threshold: f64) -> Result<Tensor> {
    let p = prox_nuclear(&t.unfold(mode)?, threshold)?;
    Tensor::fold(&p, mode, t.shape())
}

fn sq(x: f64) -> f64 {
    x * x
}

/// Overlapped trace norm: `min_X ½‖Y - X‖² + λ sum_k ‖X_(k)‖_*`.
///
/// ADMM with one copy `Z[k] = X` per mode and scaled duals `U[k]`:
///
/// ```text
/// X    = (Y + η sum_k (Z[k] - U[k])) / (1 + ηK)
/// Z[k] = fold_k(prox_{λ/η}((X + U[k])_(k)))
/// U[k] = U[k] + X - Z[k]
/// ```
///
/// Stops when the consensus gap `sqrt(sum_k ‖X - Z[k]‖²)` and the dual
/// change `η sqrt(sum_k ‖ΔZ[k]‖²)` are both at most `tol ‖Y‖`.
pub fn overlapped_denoise(y: &Tensor, lambda: f64, opts: &TraceNormOptions) -> Result<TraceNormSolution> {
    check_inputs(y, lambda, opts)?;
    let order = y.order();
    let eta = opts.eta;
    let scale = opts.tol * y.fro_norm();
    let zero = Tensor::zeros(y.shape())?;
    let mut z = vec![zero.clone(); order];
    let mut u = vec![zero.clone(); order];
    let mut x = zero;
    let mut residual = f64::INFINITY;

    for it in 1..=opts.max_iter {
        let mut acc = y.clone();
        for (zk, uk) in z.iter().zip(&u) {
            acc.axpy(eta, zk)?;
            acc.axpy(-eta, uk)?;
        }
        x = acc.scale(1.0 / (1.0 + eta * order as f64));

        let mut gap2 = 0.0;
        let mut change2 = 0.0;
        for k in 0..order {
            let z_new = prox_mode(&x.add(&u[k])?, k, lambda / eta)?;
            let d = x.sub(&z_new)?;
            gap2 += sq(d.fro_norm());
            change2 += sq(z_new.sub(&z[k])?.fro_norm());
            u[k].axpy(1.0, &d)?;
            z[k] = z_new;
        }
        let gap = math::sqrt(gap2);
        let change = eta * math::sqrt(change2);
        residual = gap.max(change);
        if gap <= scale && change <= scale {
            let diagnostics = TraceNormDiagnostics { iterations: it, converged: true, residual };
            return Ok(TraceNormSolution { estimate: x, diagnostics });
        }
    }
    let diagnostics = TraceNormDiagnostics { iterations: opts.max_iter, converged: false, residual };
    Ok(TraceNormSolution { estimate: x, diagnostics })
}

/// Latent trace norm: `min ½‖Y - sum_k Z[k]‖² + λ sum_k ‖Z[k]_(k)‖_*`.
///
/// Solved on the dual `min_D λ/2‖D‖² - <D, Y>` s.t. `‖D_(k)‖ ≤ 1`, with one
/// full-size multiplier tensor per mode:
///
/// ```text
/// D    = (Y + KηD - sum_k (2 M[k] - M_prev[k])) / (λ + Kη)
/// M[k] = fold_k(prox_η((M[k] + η D)_(k)))
/// ```
///
/// The estimate is `sum_k M[k]`. Stops when the largest per-mode multiplier
/// change over `η` and the multiplier change are below `tol (1 + ‖Y‖)` and
/// the stationarity residual `‖Y - X̂ - λD‖` is below `tol ‖Y‖`.
pub fn latent_denoise(y: &Tensor, lambda: f64, opts: &TraceNormOptions) -> Result<TraceNormSolution> {
    check_inputs(y, lambda, opts)?;
    let order = y.order();
    let kf = order as f64;
    let eta = opts.eta;
    let y_norm = y.fro_norm();
    let zero = Tensor::zeros(y.shape())?;
    let mut dual = zero.clone();
    let mut m = vec![zero.clone(); order];
    let mut x = zero.clone();
    let mut x_prev = zero;
    let mut residual = f64::INFINITY;

    for it in 1..=opts.max_iter {
        let mut next_dual = y.clone();
        next_dual.axpy(kf * eta, &dual)?;
        next_dual.axpy(-2.0, &x)?;
        next_dual.axpy(1.0, &x_prev)?;
        dual = next_dual.scale(1.0 / (lambda + kf * eta));

        let mut change2 = 0.0;
        let mut max_change = 0.0f64;
        let mut x_new = Tensor::zeros(y.shape())?;
        for (k, mk) in m.iter_mut().enumerate() {
            let mut z = mk.clone();
            z.axpy(eta, &dual)?;
            let m_new = prox_mode(&z, k, eta)?;
            let c = m_new.sub(mk)?.fro_norm();
            change2 += c * c;
            max_change = max_change.max(c / eta);
            x_new.axpy(1.0, &m_new)?;
            *mk = m_new;
        }
        x_prev = core::mem::replace(&mut x, x_new);

        let mut kkt = y.sub(&x)?;
        kkt.axpy(-lambda, &dual)?;
        let kkt = kkt.fro_norm();
        let change = math::sqrt(change2);
        let scale = opts.tol * (1.0 + y_norm);
        residual = max_change.max(change).max(kkt);
        if max_change <= scale && change <= scale && kkt <= opts.tol * y_norm {
            let diagnostics = TraceNormDiagnostics { iterations: it, converged: true, residual };
            return Ok(TraceNormSolution { estimate: x, diagnostics });
        }
    }
    let diagnostics = TraceNormDiagnostics { iterations: opts.max_iter, converged: false, residual };
    Ok(TraceNormSolution { estimate: x, diagnostics })
}

/// `½‖Y - X‖² + λ sum_k ‖X_(k)‖_*`.
pub fn overlapped_objective(y: &Tensor, x: &Tensor, lambda: f64) -> Result<f64> {
    let mut pen = 0.0;
    for k in 0..x.order() {
        pen += crate::spectral::nuclear_norm(&x.unfold(k)?)?;
    }
    Ok(0.5 * sq(y.sub(x)?.fro_norm()) + lambda * pen)
}

/// A CP model `sum_r w_r a_r^(0) ∘ ... ∘ a_r^(K-1)` with unit-norm factor columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CpModel {
    pub factors: Vec<Matrix>,
    pub weights: Vec<f64>,
}

impl CpModel {
    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    pub fn to_tensor(&self) -> Result<Tensor> {
        cp_tensor(&self.weights, &self.factors)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpOptions {
    /// Weight of `sum_k ‖A_k‖_F²` in the objective.
    pub l2_reg: f64,
    pub max_sweeps: usize,
    /// Relative objective change that ends a restart.
    pub tol: f64,
}

impl Default for CpOptions {
    fn default() -> Self {
        Self { l2_reg: 0.0, max_sweeps: 500, tol: 1e-8 }
    }
}

/// Best restart of [`cp_als`].
#[derive(Debug, Clone)]
pub struct CpFit {
    pub model: CpModel,
    /// `½‖Y - X‖² + l2_reg sum_k ‖A_k‖_F²` at the returned factors.
    pub objective: f64,
    pub init_index: usize,
    pub sweeps: usize,
    /// Objective after initialisation and after every sweep of the winning restart.
    pub history: Vec<f64>,
}

const RIDGE_FLOOR: f64 = 1e-10;

/// Ridge-regularised CP by alternating least squares with random restarts.
///
/// Restart `i` draws Gaussian factors from the stream seeded with
/// `seed + i`. Each sweep solves every factor exactly given the others:
/// `A_k = Y_(k) KR_k (V_k + 2 l2_reg I)^{-1}`, with `KR_k` the Khatri-Rao
/// product of the other factors and `V_k` the Hadamard product of their
/// Gram matrices. The ridge never drops below `1e-10`. The restart with the
/// lowest final objective wins; ties go to the lowest index.
pub fn cp_als(y: &Tensor, rank: usize, n_inits: usize, seed: u64, opts: &CpOptions) -> Result<CpFit> {
    if rank == 0 {
        return Err(param("rank", "must be at least 1"));
    }
    if n_inits == 0 {
        return Err(param("n_inits", "must be at least 1"));
    }
    if !(opts.l2_reg >= 0.0) || !opts.l2_reg.is_finite() {
        return Err(param("l2_reg", "must be finite and non-negative"));
    }
    if !y.is_finite() {
        return Err(Error::NonFinite);
    }
    let unfoldings: Vec<Matrix> = (0..y.order()).map(|k| y.unfold(k)).collect::<Result<_>>()?;
    let mut best: Option<CpFit> = None;
    for init in 0..n_inits {
        let fit = cp_restart(y, &unfoldings, rank, seed.wrapping_add(init as u64), init, opts)?;
        if best.as_ref().is_none_or(|b| fit.objective < b.objective) {
            best = Some(fit);
        }
    }
    Ok(best.expect("n_inits >= 1"))
}

fn cp_restart(
    y: &Tensor,
    unfoldings: &[Matrix],
    rank: usize,
    seed: u64,
    init: usize,
    opts: &CpOptions,
) -> Result<CpFit> {
    let mut rng = Rng::new(seed);
    let mut factors: Vec<Matrix> = y
        .shape()
        .iter()
        .map(|&n| Matrix::from_col_major(n, rank, rng.gaussian_vec(n * rank)))
        .collect::<Result<_>>()?;
    let ridge = (2.0 * opts.l2_reg).max(RIDGE_FLOOR);
    let mut obj = cp_objective(y, &factors, opts.l2_reg)?;
    let mut history = vec![obj];
    let mut sweeps = 0;
    for _ in 0..opts.max_sweeps {
        for k in 0..factors.len() {
            let mut v = Matrix::from_fn(rank, rank, |_, _| 1.0);
            for (l, f) in factors.iter().enumerate() {
                if l != k {
                    let g = f.gram_t();
                    v.data_mut().iter_mut().zip(g.data()).for_each(|(a, b)| *a *= b);
                }
            }
            for r in 0..rank {
                v[(r, r)] += ridge;
            }
            let kr = khatri_rao_except(&factors, k);
            let rhs = unfoldings[k].matmul(&kr)?;
            factors[k] = solve_spd(&v, &rhs.transpose())?.transpose();
        }
        sweeps += 1;
        let next = cp_objective(y, &factors, opts.l2_reg)?;
        history.push(next);
        let done = (obj - next).abs() <= opts.tol * obj.abs().max(f64::MIN_POSITIVE);
        obj = next;
        if done {
            break;
        }
    }
    Ok(CpFit { model: normalise(factors), objective: obj, init_index: init, sweeps, history })
}

/// Column-wise Kronecker product of every factor except `skip`, in the same
/// mode order as [`crate::matrix::kron_except`].
pub fn khatri_rao_except(factors: &[Matrix], skip: usize) -> Matrix {
    let rank = factors[0].cols();
    let cols: Vec<Vec<f64>> = (0..rank)
        .map(|r| {
            let vs: Vec<Matrix> = factors
                .iter()
                .enumerate()
                .rev()
                .filter(|(l, _)| *l != skip)
                .map(|(_, f)| Matrix::from_col_major(f.rows(), 1, f.col(r).to_vec()).expect("column"))
                .collect();
            kron_list(vs.iter()).into_data()
        })
        .collect();
    Matrix::from_columns(&cols).expect("equal lengths")
}

fn cp_objective(y: &Tensor, factors: &[Matrix], l2: f64) -> Result<f64> {
    let ones = vec![1.0; factors[0].cols()];
    let x = cp_tensor(&ones, factors)?;
    let fit = 0.5 * sq(y.sub(&x)?.fro_norm());
    let reg: f64 = factors.iter().map(|f| sq(f.fro_norm())).sum();
    Ok(fit + l2 * reg)
}

fn normalise(mut factors: Vec<Matrix>) -> CpModel {
    let rank = factors[0].cols();
    let mut weights = vec![1.0; rank];
    for f in factors.iter_mut() {
        for r in 0..rank {
            let col = f.col_mut(r);
            let n = math::sqrt(col.iter().map(|x| x * x).sum());
            if n > 0.0 {
                col.iter_mut().for_each(|x| *x /= n);
            } else {
                col[0] = 1.0;
            }
            weights[r] *= n;
        }
    }
    CpModel { factors, weights }
}

/// Solves `a x = b` for symmetric positive definite `a` by Cholesky.
fn solve_spd(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for p in 0..j {
            d -= l[(j, p)] * l[(j, p)];
        }
        if !(d > 0.0) {
            return Err(param("gram", "matrix is not positive definite"));
        }
        let d = math::sqrt(d);
        l[(j, j)] = d;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for p in 0..j {
                s -= l[(i, p)] * l[(j, p)];
            }
            l[(i, j)] = s / d;
        }
    }
    let mut x = b.clone();
    for c in 0..b.cols() {
        let col = x.col_mut(c);
        for i in 0..n {
            let mut s = col[i];
            for p in 0..i {
                s -= l[(i, p)] * col[p];
            }
            col[i] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = col[i];
            for p in i + 1..n {
                s -= l[(p, i)] * col[p];
            }
            col[i] = s / l[(i, i)];
        }
    }
    Ok(x)
}

/// Optimistic relative error `σ sqrt(R sum_k n_k ln K) / ‖X*‖_F`.
pub fn optimistic_error(sigma: f64, rank: usize, dims: &[usize], signal_fro: f64) -> Result<f64> {
    if !(signal_fro > 0.0) {
        return Err(param("signal_fro", "must be positive"));
    }
    if !(sigma >= 0.0) {
        return Err(param("sigma", "must be non-negative"));
    }
    let total: usize = dims.iter().sum();
    let k = dims.len() as f64;
    Ok(sigma * math::sqrt(rank as f64 * total as f64 * math::ln(k)) / signal_fro)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::spectral_norm;
    use crate::synthetic::{gen_synthetic, SyntheticSpec};

    #[test]
    fn optimistic_line_values() {
        let dims = [20, 30, 40];
        let fro = 500f64.sqrt();
        assert_eq!(optimistic_error(0.0, 2, &dims, fro).unwrap(), 0.0);
        let slope = optimistic_error(1.0, 2, &dims, fro).unwrap();
        let expected = (2.0 * 90.0 * 3f64.ln()).sqrt() / fro;
        assert!((slope - expected).abs() < 1e-15);
        assert!((slope - 0.6289).abs() < 1e-4);
        assert!((optimistic_error(2.0, 2, &dims, fro).unwrap() - 2.0 * slope).abs() < 1e-15);
        assert!(optimistic_error(1.0, 3, &dims, fro).unwrap() > slope);
        assert!(optimistic_error(1.0, 2, &[21, 30, 40], fro).unwrap() > slope);
        assert!(optimistic_error(1.0, 2, &dims, 0.0).is_err());
    }

    #[test]
    fn cp_rejects_zero_rank() {
        let y = Tensor::zeros(&[2, 2, 2]).unwrap();
        assert!(cp_als(&y, 0, 1, 0, &CpOptions::default()).is_err());
        assert!(cp_als(&y, 1, 0, 0, &CpOptions::default()).is_err());
    }

    #[test]
    fn cp_recovers_rank_one() {
        let inst = gen_synthetic(&SyntheticSpec::new(&[5, 6, 7], &[3.0], 0.0, 21)).unwrap();
        let fit = cp_als(&inst.observed, 1, 3, 5, &CpOptions::default()).unwrap();
        let err = crate::synthetic::relative_error(&fit.model.to_tensor().unwrap(), &inst.truth).unwrap();
        assert!(err <= 1e-6, "err {err}");
        for f in &fit.model.factors {
            assert!((f.fro_norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cp_objective_never_increases() {
        let inst = gen_synthetic(&SyntheticSpec::new(&[6, 7, 8], &[4.0, 2.0], 0.3, 2)).unwrap();
        for l2 in [0.0, 0.1] {
            let opts = CpOptions { l2_reg: l2, ..CpOptions::default() };
            let fit = cp_als(&inst.observed, 3, 2, 9, &opts).unwrap();
            for w in fit.history.windows(2) {
                assert!(w[1] <= w[0] + 1e-9 * w[0].abs(), "{} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn khatri_rao_matches_unfolding_convention() {
        let inst = gen_synthetic(&SyntheticSpec::new(&[3, 4, 5], &[2.0, 1.0], 0.0, 6)).unwrap();
        for k in 0..3 {
            let kr = khatri_rao_except(&inst.factors, k);
            let w = Matrix::diag(2, 2, &[2.0, 1.0]);
            let recon = inst.factors[k].matmul(&w).unwrap().matmul_t(&kr).unwrap();
            assert!(recon.max_abs_diff(&inst.truth.unfold(k).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn trace_norms_zero_above_threshold() {
        let inst = gen_synthetic(&SyntheticSpec::new(&[4, 5, 6], &[3.0, 1.0], 0.2, 12)).unwrap();
        let y = &inst.observed;
        let norms: Vec<f64> = (0..3).map(|k| spectral_norm(&y.unfold(k).unwrap())).collect();
        let opts = TraceNormOptions::default();
        let lat = latent_denoise(y, norms.iter().cloned().fold(0.0, f64::max) * 1.01, &opts).unwrap();
        assert!(lat.estimate.fro_norm() == 0.0);
        let ov = overlapped_denoise(y, norms.iter().sum::<f64>() * 1.01, &opts).unwrap();
        assert!(ov.estimate.fro_norm() <= 1e-4 * y.fro_norm(), "{}", ov.estimate.fro_norm());
    }

    #[test]
    fn trace_norms_approach_identity_for_tiny_lambda() {
        let inst = gen_synthetic(&SyntheticSpec::new(&[4, 5, 6], &[3.0, 1.0], 0.2, 12)).unwrap();
        let y = &inst.observed;
        let lam = 1e-6 * y.fro_norm();
        let opts = TraceNormOptions::default();
        for x in [overlapped_denoise(y, lam, &opts).unwrap(), latent_denoise(y, lam, &opts).unwrap()] {
            assert!(x.estimate.sub(y).unwrap().fro_norm() <= 1e-3 * y.fro_norm());
        }
    }

    #[test]
    fn spd_solver() {
        let a = Matrix::from_rows(&[&[4.0, 1.0], &[1.0, 3.0]]).unwrap();
        let b = Matrix::from_rows(&[&[1.0], &[2.0]]).unwrap();
        let x = solve_spd(&a, &b).unwrap();
        assert!(a.matmul(&x).unwrap().max_abs_diff(&b) < 1e-14);
    }
}
