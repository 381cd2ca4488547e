//! The subspace norm and its ADMM solver.
//!
//! A tensor lies in the span of the bases when it can be written
//! `X = sum_k fold_k(M[k] S[k]^T)`, where `S[k]` is the Kronecker product of
//! the orthonormal per-mode factors `P[l]`, `l ≠ k`. The subspace norm of `X`
//! is the smallest `sum_k ‖M[k]‖_*` over such decompositions (infinite off the
//! span), and its dual is `max_k ‖X_(k) S[k]‖`.
//!
//! [`admm_denoise`] minimises `½‖Y - X‖_F² + λ‖X‖_s` by a primal-dual
//! iteration on the dual problem
//!
//! ```text
//! min_D  λ/2 ‖D‖² - <D, Y>   s.t.  ‖D_(k) S[k]‖ ≤ 1 for every k,
//! ```
//!
//! with one multiplier block `M[k]` per mode. The auxiliary `W[k]` variables
//! are eliminated analytically; at a fixed point `λ D = Y - X̂`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{param, Error, Result};
use crate::math;
use crate::matrix::{kron_except, Matrix};
use crate::spectral::{nuclear_norm, prox_nuclear, spectral_norm, top_left_singular};
use crate::tensor::Tensor;

/// Per-mode orthonormal factors and the Kronecker bases derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBases {
    h: usize,
    shape: Vec<usize>,
    factors: Vec<Matrix>,
    spans: Vec<Matrix>,
}

impl SubspaceBases {
    /// Wraps per-mode factors; each must be `n_k x H` with orthonormal columns.
    pub fn from_factors(factors: Vec<Matrix>) -> Result<Self> {
        let h = factors.first().map(Matrix::cols).ok_or_else(|| Error::InvalidShape(vec![]))?;
        let shape: Vec<usize> = factors.iter().map(Matrix::rows).collect();
        for f in &factors {
            if f.cols() != h {
                return Err(Error::ShapeMismatch { expected: vec![h], found: vec![f.cols()] });
            }
            if h == 0 || h > f.rows() {
                return Err(Error::RankOutOfRange { rank: h, max: f.rows() });
            }
            if f.gram_t().max_abs_diff(&Matrix::identity(h)) > 1e-8 {
                return Err(param("factors", "columns must be orthonormal"));
            }
        }
        let spans = (0..factors.len()).map(|k| kron_except(&factors, k)).collect();
        Ok(Self { h, shape, factors, spans })
    }

    /// Subspace dimension per mode.
    pub fn h(&self) -> usize {
        self.h
    }

    /// Tensor shape the bases belong to.
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    /// `P[k]`, `n_k x H`.
    pub fn factor(&self, k: usize) -> &Matrix {
        &self.factors[k]
    }

    pub fn factors(&self) -> &[Matrix] {
        &self.factors
    }

    /// `S[k]`, `prod_{l≠k} n_l x H^(K-1)`.
    pub fn span_basis(&self, k: usize) -> &Matrix {
        &self.spans[k]
    }

    /// Shape `(n_k, H^(K-1))` of block `k`.
    pub fn block_shape(&self, k: usize) -> (usize, usize) {
        (self.shape[k], self.spans[k].cols())
    }

    fn check_tensor(&self, x: &Tensor) -> Result<()> {
        if x.shape() != self.shape.as_slice() {
            return Err(Error::ShapeMismatch { expected: self.shape.clone(), found: x.shape().to_vec() });
        }
        Ok(())
    }
}

/// Top-`h` left singular vectors of every unfolding, and their Kronecker bases.
pub fn build_bases(y: &Tensor, h: usize) -> Result<SubspaceBases> {
    let min_dim = *y.shape().iter().min().expect("tensor order is at least 1");
    if h == 0 || h > min_dim {
        return Err(Error::RankOutOfRange { rank: h, max: min_dim });
    }
    let factors = (0..y.order())
        .map(|k| Ok(top_left_singular(&y.unfold(k)?, h)?.left_vectors))
        .collect::<Result<Vec<_>>>()?;
    SubspaceBases::from_factors(factors)
}

/// One `n_k x H^(K-1)` block per mode.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockFactors {
    blocks: Vec<Matrix>,
}

impl BlockFactors {
    pub fn new(blocks: Vec<Matrix>) -> Self {
        Self { blocks }
    }

    pub fn zeros(bases: &SubspaceBases) -> Self {
        let blocks = (0..bases.order())
            .map(|k| {
                let (r, c) = bases.block_shape(k);
                Matrix::zeros(r, c)
            })
            .collect();
        Self { blocks }
    }

    pub fn blocks(&self) -> &[Matrix] {
        &self.blocks
    }

    pub fn block(&self, k: usize) -> &Matrix {
        &self.blocks[k]
    }

    pub fn block_mut(&mut self, k: usize) -> &mut Matrix {
        &mut self.blocks[k]
    }

    pub fn into_blocks(self) -> Vec<Matrix> {
        self.blocks
    }

    fn check(&self, bases: &SubspaceBases) -> Result<()> {
        if self.blocks.len() != bases.order() {
            return Err(Error::ShapeMismatch { expected: vec![bases.order()], found: vec![self.blocks.len()] });
        }
        for (k, m) in self.blocks.iter().enumerate() {
            let (r, c) = bases.block_shape(k);
            if m.shape() != (r, c) {
                return Err(Error::ShapeMismatch { expected: vec![r, c], found: vec![m.rows(), m.cols()] });
            }
        }
        Ok(())
    }
}

/// Dual subspace norm `max_k ‖X_(k) S[k]‖`.
pub fn dual_norm(x: &Tensor, bases: &SubspaceBases) -> Result<f64> {
    bases.check_tensor(x)?;
    let mut best = 0.0f64;
    for k in 0..x.order() {
        let g = x.unfold(k)?.matmul(bases.span_basis(k))?;
        best = best.max(spectral_norm(&g));
    }
    Ok(best)
}

/// `sum_k ‖M[k]‖_*` for one particular decomposition.
pub fn subspace_norm_value(m: &BlockFactors) -> Result<f64> {
    m.blocks.iter().map(nuclear_norm).sum()
}

/// `sum_k fold_k(M[k] S[k]^T)`.
pub fn compose(m: &BlockFactors, bases: &SubspaceBases) -> Result<Tensor> {
    m.check(bases)?;
    let mut out = Tensor::zeros(bases.shape())?;
    for (k, block) in m.blocks.iter().enumerate() {
        let term = block.matmul_t(bases.span_basis(k))?;
        out.axpy(1.0, &Tensor::fold(&term, k, bases.shape())?)?;
    }
    Ok(out)
}

/// Orthogonal projection onto the span, with a decomposition realising it.
///
/// Splitting each mode into `range(P[l])` and its complement cuts the tensor
/// space into `2^K` orthogonal pieces; the span is exactly the sum of the
/// pieces with at most one mode in a complement. Piece `{k}` is carried by
/// block `k`, the all-in-range piece by block 0.
pub fn project_to_span(x: &Tensor, bases: &SubspaceBases) -> Result<(Tensor, BlockFactors)> {
    bases.check_tensor(x)?;
    let order = x.order();
    let proj: Vec<Matrix> = bases.factors.iter().map(|p| p.matmul_t(p)).collect::<Result<_>>()?;
    let comp: Vec<Matrix> =
        proj.iter().map(|pp| Matrix::identity(pp.rows()).sub(pp)).collect::<Result<_>>()?;

    let piece = |outside: Option<usize>| -> Result<Tensor> {
        let mut t = x.clone();
        for l in 0..order {
            let op = if Some(l) == outside { &comp[l] } else { &proj[l] };
            t = t.mode_product(op, l)?;
        }
        Ok(t)
    };

    let core = piece(None)?;
    let mut projection = core.clone();
    let mut blocks = Vec::with_capacity(order);
    for k in 0..order {
        let mut p = piece(Some(k))?;
        projection.axpy(1.0, &p)?;
        if k == 0 {
            p.axpy(1.0, &core)?;
        }
        blocks.push(p.unfold(k)?.matmul(bases.span_basis(k))?);
    }
    Ok((projection, BlockFactors::new(blocks)))
}

/// Incoherence diagnostic `ρ̂ = K max_{k≠l} ‖fold_k(M[k])_(l)‖ / (√n_k + √H^(K-1))`,
/// where `fold_k(M[k])` is read as an `H x ... x n_k x ... x H` tensor.
pub fn incoherence(m: &BlockFactors, bases: &SubspaceBases) -> Result<f64> {
    m.check(bases)?;
    let order = bases.order();
    if order < 2 {
        return Ok(0.0);
    }
    let h = bases.h();
    let mut rho = 0.0f64;
    for (k, block) in m.blocks.iter().enumerate() {
        let mut shape = vec![h; order];
        shape[k] = bases.shape()[k];
        let t = Tensor::fold(block, k, &shape)?;
        let denom = math::sqrt(shape[k] as f64) + math::sqrt(block.cols() as f64);
        for l in (0..order).filter(|&l| l != k) {
            rho = rho.max(spectral_norm(&t.unfold(l)?) / denom);
        }
    }
    Ok(order as f64 * rho)
}

/// `σ (max_k(√n_k + √H^(K-1)) + √(2 ln K))`.
pub fn theoretical_lambda(sigma: f64, dims: &[usize], h: usize) -> f64 {
    let k = dims.len();
    let hk = math::sqrt(libm::pow(h as f64, (k - 1) as f64));
    let widest = dims.iter().map(|&n| math::sqrt(n as f64) + hk).fold(0.0, f64::max);
    sigma * (widest + math::sqrt(2.0 * math::ln(k as f64)))
}

/// `½‖Y - X‖² + λ sum_k ‖M[k]‖_*` for an estimate and one decomposition of it.
pub fn objective(y: &Tensor, x: &Tensor, m: &BlockFactors, lambda: f64) -> Result<f64> {
    let r = y.sub(x)?.fro_norm();
    Ok(0.5 * r * r + lambda * subspace_norm_value(m)?)
}

/// Solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmOptions {
    /// Augmentation parameter (the starting value when `adaptive`).
    pub eta: f64,
    pub max_iter: usize,
    /// Relative stopping tolerance.
    pub tol: f64,
    /// Residual balancing: every [`ADAPT_EVERY`] iterations compare the
    /// stationarity residual `‖Y - X̂ - λD‖` with `λ max_k ‖ΔM[k]‖/η`; when one
    /// exceeds the other by more than 1.5x, scale `η` by `1 - α` (or its
    /// inverse) towards balance. `α` starts at 0.5 and shrinks by 0.95 per
    /// change, so the step size settles.
    pub adaptive: bool,
}

pub const ADAPT_EVERY: usize = 10;

impl Default for AdmmOptions {
    fn default() -> Self {
        Self { eta: 1.0, max_iter: 2000, tol: 1e-6, adaptive: true }
    }
}

/// `[unfold(x, k) S[k] for k in modes]`: the coordinates the solver works in.
///
/// Only the in-span part of a tensor is visible through these; the
/// out-of-span remainder is tracked separately.
pub fn span_coords(x: &Tensor, bases: &SubspaceBases) -> Result<Vec<Matrix>> {
    bases.check_tensor(x)?;
    (0..x.order()).map(|k| x.unfold(k)?.matmul(bases.span_basis(k))).collect()
}

// `unfold(fold_l(m S[l]^T), k) S[k]`, computed on the small `H x .. x n_l x .. x H` tensor.
fn cross_coords(m: &Matrix, l: usize, k: usize, bases: &SubspaceBases) -> Result<Matrix> {
    if l == k {
        return Ok(m.clone());
    }
    let mut shape = vec![bases.h(); bases.order()];
    shape[l] = bases.shape()[l];
    let t = Tensor::fold(m, l, &shape)?
        .mode_product(&bases.factor(l).transpose(), l)?
        .mode_product(bases.factor(k), k)?;
    t.unfold(k)
}

// Coordinates of `compose(m)`.
fn compose_coords(m: &BlockFactors, bases: &SubspaceBases) -> Result<Vec<Matrix>> {
    (0..bases.order())
        .map(|k| {
            let mut g = Matrix::zeros(bases.shape()[k], bases.span_basis(k).cols());
            for (l, block) in m.blocks.iter().enumerate() {
                g.axpy(1.0, &cross_coords(block, l, k, bases)?)?;
            }
            Ok(g)
        })
        .collect()
}

// Frobenius norm of the in-span tensor with coordinates `g`, from its
// orthogonal pieces: the all-in-range core plus one piece per mode.
fn coords_norm(g: &[Matrix], bases: &SubspaceBases) -> Result<f64> {
    let core = bases.factor(0).t_matmul(&g[0])?.fro_norm();
    let mut total = core * core;
    for (k, gk) in g.iter().enumerate() {
        let p = bases.factor(k);
        let outside = gk.sub(&p.matmul(&p.t_matmul(gk)?)?)?.fro_norm();
        total += outside * outside;
    }
    Ok(math::sqrt(total))
}

// The in-span tensor with coordinates `g`.
fn from_coords(g: &[Matrix], bases: &SubspaceBases) -> Result<Tensor> {
    let mut out = Tensor::zeros(bases.shape())?;
    for (k, gk) in g.iter().enumerate() {
        // Block 0 carries the core and piece {0} together, which is all of `g[0]`.
        let piece = if k == 0 {
            gk.clone()
        } else {
            let p = bases.factor(k);
            gk.sub(&p.matmul(&p.t_matmul(gk)?)?)?
        };
        out.axpy(1.0, &Tensor::fold(&piece.matmul_t(bases.span_basis(k))?, k, bases.shape())?)?;
    }
    Ok(out)
}

/// Iteration state.
///
/// The dual tensor splits into its in-span part, carried by its
/// [`span_coords`], and an out-of-span part that obeys the scalar recursion
/// `D⊥_{t+1} = (Y⊥ + KηD⊥_t)/(λ + Kη)` and so is kept in closed form. The
/// iterates are those of the full-tensor algorithm; only the storage differs.
#[derive(Debug, Clone)]
pub struct AdmmState {
    pub blocks: BlockFactors,
    pub prev_blocks: BlockFactors,
    pub eta: f64,
    pub lambda: f64,
    pub iteration: usize,
    /// `max_k ‖D_(k) S[k] - W[k]‖_F`.
    pub primal_residual: f64,
    /// Multiplier change `sqrt(sum_k ‖M_{t+1}[k] - M_t[k]‖²)`.
    pub dual_residual: f64,
    /// Stationarity `‖Y - X̂ - λ D‖_F`.
    pub kkt_residual: f64,
    /// The `η` of the previous step; the extrapolation `M_t + (η/η_prev)(M_t - M_{t-1})`
    /// keeps the iteration consistent when `η` changes.
    prev_eta: f64,
    y_coords: Vec<Matrix>,
    dual_coords: Vec<Matrix>,
    est_coords: Vec<Matrix>,
    prev_est_coords: Vec<Matrix>,
    /// `Y⊥` and `D⊥_0`; `D⊥_t = Y⊥/λ + c_t (D⊥_0 - Y⊥/λ)` with `c_t` the running
    /// product of `Kη/(λ + Kη)`, held in `decay`.
    y_perp: Arc<Tensor>,
    dual_perp0: Arc<Tensor>,
    decay: f64,
    perp_gap0: f64,
}

impl AdmmState {
    /// Zero start: `D_0 = 0`, `M_{-1} = M_0 = 0`.
    pub fn new(y: &Tensor, bases: &SubspaceBases, lambda: f64, eta: f64) -> Result<Self> {
        let dual = Tensor::zeros(bases.shape())?;
        Self::warm(y, bases, lambda, eta, &dual, BlockFactors::zeros(bases))
    }

    /// Starts from a given dual tensor and blocks (for example the solution at
    /// a neighbouring `λ`), with `M_{-1} = M_0`.
    pub fn warm(
        y: &Tensor,
        bases: &SubspaceBases,
        lambda: f64,
        eta: f64,
        dual: &Tensor,
        blocks: BlockFactors,
    ) -> Result<Self> {
        check_params(lambda, eta)?;
        bases.check_tensor(y)?;
        bases.check_tensor(dual)?;
        blocks.check(bases)?;
        if !y.is_finite() || !dual.is_finite() {
            return Err(Error::NonFinite);
        }
        let y_coords = span_coords(y, bases)?;
        let dual_coords = span_coords(dual, bases)?;
        let y_perp = y.sub(&from_coords(&y_coords, bases)?)?;
        let dual_perp0 = dual.sub(&from_coords(&dual_coords, bases)?)?;
        let mut gap = y_perp.clone();
        gap.axpy(-lambda, &dual_perp0)?;
        let est_coords = compose_coords(&blocks, bases)?;
        Ok(Self {
            prev_blocks: blocks.clone(),
            blocks,
            eta,
            lambda,
            iteration: 0,
            primal_residual: f64::INFINITY,
            dual_residual: f64::INFINITY,
            kkt_residual: f64::INFINITY,
            prev_eta: eta,
            y_coords,
            dual_coords,
            prev_est_coords: est_coords.clone(),
            est_coords,
            y_perp: Arc::new(y_perp),
            dual_perp0: Arc::new(dual_perp0),
            decay: 1.0,
            perp_gap0: gap.fro_norm(),
        })
    }

    /// Current estimate `sum_k fold_k(M[k] S[k]^T)`.
    pub fn estimate(&self, bases: &SubspaceBases) -> Result<Tensor> {
        compose(&self.blocks, bases)
    }

    /// Current dual tensor `D_t`.
    pub fn dual(&self, bases: &SubspaceBases) -> Result<Tensor> {
        let mut d = from_coords(&self.dual_coords, bases)?;
        let c = (1.0 - self.decay) / self.lambda;
        d.axpy(c, &self.y_perp)?;
        d.axpy(self.decay, &self.dual_perp0)?;
        Ok(d)
    }

    /// Dual objective `λ/2 ‖D‖² - <D, Y>`.
    pub fn dual_objective(&self, y: &Tensor, bases: &SubspaceBases) -> Result<f64> {
        let d = self.dual(bases)?;
        let n = d.fro_norm();
        Ok(0.5 * self.lambda * n * n - d.inner(y)?)
    }

    /// One iteration.
    pub fn step(&mut self, bases: &SubspaceBases) -> Result<()> {
        let order = bases.order();
        let kf = order as f64;
        let (eta, lambda) = (self.eta, self.lambda);
        let denom = lambda + eta * kf;
        let rho = eta / self.prev_eta;

        // sum_k fold_k((M_t + ρ(M_t - M_{t-1})) S^T) = X̂_t + ρ(X̂_t - X̂_{t-1}) by linearity.
        for k in 0..order {
            let d = &mut self.dual_coords[k];
            let it = d
                .data_mut()
                .iter_mut()
                .zip(self.y_coords[k].data())
                .zip(self.est_coords[k].data().iter().zip(self.prev_est_coords[k].data()));
            for ((dv, &yv), (&xt, &xp)) in it {
                *dv = (yv + kf * eta * *dv - (xt + rho * (xt - xp))) / denom;
            }
        }
        self.decay *= kf * eta / denom;

        let mut next = Vec::with_capacity(order);
        let mut primal = 0.0f64;
        let mut change2 = 0.0;
        for k in 0..order {
            let mut z = self.blocks.block(k).clone();
            z.axpy(eta, &self.dual_coords[k])?;
            let m_new = prox_nuclear(&z, eta)?;
            // W = clip(G + M_t/η) = (M_t + ηG - M_{t+1})/η, so G - W = (M_{t+1} - M_t)/η.
            let delta = m_new.sub(self.blocks.block(k))?.fro_norm();
            primal = primal.max(delta / eta);
            change2 += delta * delta;
            next.push(m_new);
        }
        let next = BlockFactors::new(next);
        let est = compose_coords(&next, bases)?;

        let resid: Vec<Matrix> = (0..order)
            .map(|k| {
                let mut r = self.y_coords[k].sub(&est[k])?;
                r.axpy(-lambda, &self.dual_coords[k])?;
                Ok(r)
            })
            .collect::<Result<_>>()?;
        let inside = coords_norm(&resid, bases)?;
        let outside = self.decay * self.perp_gap0;

        self.prev_blocks = core::mem::replace(&mut self.blocks, next);
        self.prev_est_coords = core::mem::replace(&mut self.est_coords, est);
        self.iteration += 1;
        self.primal_residual = primal;
        self.dual_residual = math::sqrt(change2);
        self.kkt_residual = math::hypot(inside, outside);
        self.prev_eta = eta;
        Ok(())
    }

    fn converged(&self, tol: f64, y_norm: f64) -> bool {
        let scale = tol * (1.0 + y_norm);
        self.primal_residual <= scale && self.dual_residual <= scale && self.kkt_residual <= tol * y_norm
    }

    fn merit(&self, y_norm: f64) -> f64 {
        let scale = 1.0 + y_norm;
        (self.primal_residual / scale).max(self.dual_residual / scale).max(self.kkt_residual / y_norm.max(f64::MIN_POSITIVE))
    }
}

fn check_params(lambda: f64, eta: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(param("lambda", "must be positive and finite"));
    }
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(param("eta", "must be positive and finite"));
    }
    Ok(())
}

/// Convergence report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub kkt_residual: f64,
    /// Step size at exit.
    pub eta: f64,
}

/// Result of [`admm_denoise`].
#[derive(Debug, Clone)]
pub struct AdmmSolution {
    pub estimate: Tensor,
    pub blocks: BlockFactors,
    /// Final dual tensor; `λ D ≈ Y - X̂`.
    pub dual: Tensor,
    pub diagnostics: AdmmDiagnostics,
}

/// Solves `min_X ½‖Y - X‖² + λ‖X‖_s` from the zero start.
///
/// Stops once the primal residual and the multiplier change are both below
/// `tol (1 + ‖Y‖)` and the stationarity residual `‖Y - X̂ - λD‖` is below
/// `tol ‖Y‖`. Without convergence the iterate with the smallest scaled
/// residual is returned with `converged == false`.
pub fn admm_denoise(y: &Tensor, bases: &SubspaceBases, lambda: f64, opts: &AdmmOptions) -> Result<AdmmSolution> {
    let state = AdmmState::new(y, bases, lambda, opts.eta)?;
    run_admm(y, bases, state, opts)
}

/// Like [`admm_denoise`] but continues from a given state, which must have
/// been built for the same `y`.
pub fn run_admm(y: &Tensor, bases: &SubspaceBases, mut state: AdmmState, opts: &AdmmOptions) -> Result<AdmmSolution> {
    bases.check_tensor(y)?;
    if !(opts.tol > 0.0) {
        return Err(param("tol", "must be positive"));
    }
    let y_norm = y.fro_norm();
    let mut best: Option<(f64, AdmmState)> = None;
    let mut alpha = 0.5;
    for _ in 0..opts.max_iter {
        state.step(bases)?;
        if state.converged(opts.tol, y_norm) {
            return finish(state, bases, true);
        }
        if opts.adaptive && state.iteration.is_multiple_of(ADAPT_EVERY) {
            let (p, d) = (state.kkt_residual, state.lambda * state.primal_residual);
            if p > 1.5 * d {
                state.eta *= 1.0 - alpha;
                alpha *= 0.95;
            } else if d > 1.5 * p {
                state.eta /= 1.0 - alpha;
                alpha *= 0.95;
            }
        }
        let merit = state.merit(y_norm);
        if best.as_ref().is_none_or(|(b, _)| merit < *b) {
            best = Some((merit, state.clone()));
        }
    }
    finish(best.map_or(state, |(_, s)| s), bases, false)
}

fn finish(state: AdmmState, bases: &SubspaceBases, converged: bool) -> Result<AdmmSolution> {
    Ok(AdmmSolution {
        diagnostics: AdmmDiagnostics {
            iterations: state.iteration,
            converged,
            primal_residual: state.primal_residual,
            dual_residual: state.dual_residual,
            kkt_residual: state.kkt_residual,
            eta: state.eta,
        },
        estimate: state.estimate(bases)?,
        dual: state.dual(bases)?,
        blocks: state.blocks,
    })
}
