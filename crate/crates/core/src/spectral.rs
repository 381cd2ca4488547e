//! Spectral kernels built on the Gram matrix.
//!
//! Every singular-value computation here goes through a symmetric
//! eigendecomposition of `M M^T` (or `M^T M` when that side is smaller),
//! solved by cyclic Jacobi. Unfoldings in this crate are short and wide, so
//! the Gram matrix is small.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{param, Error, Result};
use crate::math;
use crate::matrix::{axpy, dot, norm2, Matrix};

const JACOBI_REL_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

const POWER_REL_TOL: f64 = 1e-10;
const POWER_MAX_ITER: usize = 10_000;

/// Leading left singular subspace of a matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSvd {
    /// `n x H`, orthonormal columns.
    pub left_vectors: Matrix,
    /// Non-increasing, non-negative.
    pub singular_values: Vec<f64>,
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in non-increasing order (stable with respect to the
/// original diagonal position on ties) and the matching eigenvectors as
/// columns, each signed so its largest-magnitude entry is positive.
pub fn sym_eig(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::ShapeMismatch { expected: vec![n, n], found: vec![a.rows(), a.cols()] });
    }
    if !a.is_finite() {
        return Err(Error::NonFinite);
    }
    let mut w = a.clone();
    let mut v = Matrix::identity(n);
    let tol = JACOBI_REL_TOL * a.fro_norm();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for q in 0..n {
            for p in 0..q {
                off += 2.0 * w[(p, q)] * w[(p, q)];
            }
        }
        if math::sqrt(off) <= tol {
            break;
        }
        for q in 1..n {
            for p in 0..q {
                let apq = w[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (w[(q, q)] - w[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + math::hypot(theta, 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / math::hypot(t, 1.0);
                let s = t * c;
                rotate(&mut w, &mut v, p, q, c, s);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| w[(i, i)]).collect();
    // Stable sort keeps lower original index first on ties.
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).unwrap_or(core::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.col_mut(dst).copy_from_slice(v.col(src));
        fix_sign(vectors.col_mut(dst));
    }
    Ok((values, vectors))
}

// Applies the rotation J(p, q, c, s) as W <- J^T W J and V <- V J.
fn rotate(w: &mut Matrix, v: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let n = w.rows();
    for k in 0..n {
        let wkp = w[(k, p)];
        let wkq = w[(k, q)];
        w[(k, p)] = c * wkp - s * wkq;
        w[(k, q)] = s * wkp + c * wkq;
    }
    for k in 0..n {
        let wpk = w[(p, k)];
        let wqk = w[(q, k)];
        w[(p, k)] = c * wpk - s * wqk;
        w[(q, k)] = s * wpk + c * wqk;
    }
    w[(p, q)] = 0.0;
    w[(q, p)] = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// Flips `v` so its largest-magnitude entry is positive; ties go to the lowest index.
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Top-`h` left singular vectors and values of `m`, from the eigenvectors of `m m^T`.
pub fn top_left_singular(m: &Matrix, h: usize) -> Result<TruncatedSvd> {
    let max = m.rows().min(m.cols());
    if h == 0 || h > max {
        return Err(Error::RankOutOfRange { rank: h, max });
    }
    if !m.is_finite() {
        return Err(Error::NonFinite);
    }
    let (values, vectors) = sym_eig(&m.gram())?;
    Ok(TruncatedSvd {
        left_vectors: vectors.leading_cols(h),
        singular_values: values[..h].iter().map(|&l| math::sqrt(l.max(0.0))).collect(),
    })
}

/// All `min(rows, cols)` singular values, non-increasing.
pub fn singular_values(m: &Matrix) -> Result<Vec<f64>> {
    if !m.is_finite() {
        return Err(Error::NonFinite);
    }
    // sqrt of a Gram eigenvalue loses half the digits on small values;
    // `‖M^T p_j‖` does not.
    let wide = m.rows() <= m.cols();
    let (_, p) = sym_eig(&if wide { m.gram() } else { m.gram_t() })?;
    let mp = if wide { m.t_matmul(&p)? } else { m.matmul(&p)? };
    let mut s: Vec<f64> = (0..mp.cols()).map(|j| norm2(mp.col(j))).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Sum of singular values.
pub fn nuclear_norm(m: &Matrix) -> Result<f64> {
    Ok(singular_values(m)?.iter().sum())
}

/// Thin SVD `m = P diag(s) Q^T` with `r = min(rows, cols)` columns in `P` and `Q`.
///
/// The smaller Gram matrix supplies one side; the other side is recovered as
/// `Q = M^T P Σ^{-1}` for nonzero singular values and completed to an
/// orthonormal set for the rest.
pub fn thin_svd(m: &Matrix) -> Result<(Matrix, Vec<f64>, Matrix)> {
    if m.rows() > m.cols() {
        let (q, s, p) = thin_svd(&m.transpose())?;
        return Ok((p, s, q));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite);
    }
    let r = m.rows();
    let (values, p) = sym_eig(&m.gram())?;
    let s: Vec<f64> = values.iter().map(|&l| math::sqrt(l.max(0.0))).collect();
    let cutoff = s.first().copied().unwrap_or(0.0) * 1e-10;
    let mut q = m.t_matmul(&p)?;
    let mut filled = vec![false; r];
    for j in 0..r {
        if s[j] > cutoff && s[j] > 0.0 {
            q.col_mut(j).iter_mut().for_each(|x| *x /= s[j]);
            filled[j] = true;
        }
    }
    complete_orthonormal(&mut q, &filled);
    Ok((p, s, q))
}

// Replaces the columns not marked `filled` with unit vectors orthogonal to
// every other column, using Gram-Schmidt on the standard basis.
fn complete_orthonormal(q: &mut Matrix, filled: &[bool]) {
    let rows = q.rows();
    let mut candidate = 0;
    for j in 0..q.cols() {
        if filled[j] {
            continue;
        }
        loop {
            assert!(candidate < rows, "orthonormal completion ran out of candidates");
            let mut v = vec![0.0; rows];
            v[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for l in 0..q.cols() {
                    if l == j || (!filled[l] && l > j) {
                        continue;
                    }
                    let c = dot(q.col(l), &v);
                    axpy(-c, q.col(l), &mut v);
                }
            }
            let nv = norm2(&v);
            if nv > 1e-8 {
                v.iter_mut().for_each(|x| *x /= nv);
                q.col_mut(j).copy_from_slice(&v);
                break;
            }
        }
    }
}

/// Singular-value soft-thresholding: `P max(Σ - eta, 0) Q^T`.
///
/// Computed as `P diag(max(1 - eta/σ, 0)) P^T Z` on the smaller side, which
/// never divides by a singular value at or below the threshold.
pub fn prox_nuclear(z: &Matrix, eta: f64) -> Result<Matrix> {
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(param("eta", "must be finite and non-negative"));
    }
    if !z.is_finite() {
        return Err(Error::NonFinite);
    }
    if eta == 0.0 {
        return Ok(z.clone());
    }
    let wide = z.rows() <= z.cols();
    let g = if wide { z.gram() } else { z.gram_t() };
    let (values, p) = sym_eig(&g)?;
    let mut kept = Vec::new();
    for (j, &l) in values.iter().enumerate() {
        let s = math::sqrt(l.max(0.0));
        if s > eta {
            kept.push((j, 1.0 - eta / s));
        }
    }
    if kept.is_empty() {
        return Ok(Matrix::zeros(z.rows(), z.cols()));
    }
    // Weighted projector W = P_kept diag(f) P_kept^T.
    let n = p.rows();
    let mut w = Matrix::zeros(n, n);
    for &(j, f) in &kept {
        let pj = p.col(j);
        for (c, &pc) in pj.iter().enumerate() {
            axpy(f * pc, pj, w.col_mut(c));
        }
    }
    if wide {
        w.matmul(z)
    } else {
        z.matmul(&w)
    }
}

/// Largest singular value by power iteration on `M^T M`.
///
/// Starts from the normalised all-ones vector; a second deterministic start
/// (alternating signs with a ramp) guards against the all-ones vector being
/// orthogonal to the top right singular vector. The larger estimate wins.
pub fn spectral_norm(m: &Matrix) -> f64 {
    let n = m.cols();
    if n == 0 || m.rows() == 0 {
        return 0.0;
    }
    let ones = vec![1.0; n];
    let alt: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } * (1.0 + i as f64 / n as f64)).collect();
    power_iteration(m, ones).max(power_iteration(m, alt))
}

fn power_iteration(m: &Matrix, mut v: Vec<f64>) -> f64 {
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut mv = vec![0.0; m.rows()];
    let mut sigma = 0.0;
    for _ in 0..POWER_MAX_ITER {
        mv.iter_mut().for_each(|x| *x = 0.0);
        for (j, &vj) in v.iter().enumerate() {
            axpy(vj, m.col(j), &mut mv);
        }
        let next_sigma = norm2(&mv);
        if next_sigma == 0.0 {
            return sigma;
        }
        for (j, x) in v.iter_mut().enumerate() {
            *x = dot(m.col(j), &mv);
        }
        let nv = norm2(&v);
        if nv == 0.0 {
            return next_sigma;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        let done = (next_sigma - sigma).abs() <= POWER_REL_TOL * next_sigma;
        sigma = next_sigma;
        if done {
            break;
        }
    }
    sigma
}

const UNIT_TOL: f64 = 1e-8;

fn check_unit(u: &[f64]) -> Result<()> {
    let n = norm2(u);
    if (n - 1.0).abs() > UNIT_TOL {
        return Err(Error::NotUnitNorm(n));
    }
    Ok(())
}

/// `min(‖u - v‖, ‖u + v‖)` for unit vectors.
pub fn dist(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::ShapeMismatch { expected: vec![u.len()], found: vec![v.len()] });
    }
    check_unit(u)?;
    check_unit(v)?;
    let minus = math::sqrt(u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum());
    let plus = math::sqrt(u.iter().zip(v).map(|(a, b)| (a + b) * (a + b)).sum());
    Ok(minus.min(plus))
}

/// Cosine of the largest principal angle between two column spans: the
/// smallest singular value of `U^T V`.
pub fn principal_cos(u: &Matrix, v: &Matrix) -> Result<f64> {
    if u.shape() != v.shape() {
        return Err(Error::ShapeMismatch { expected: vec![u.rows(), u.cols()], found: vec![v.rows(), v.cols()] });
    }
    for m in [u, v] {
        let g = m.gram_t();
        if g.max_abs_diff(&Matrix::identity(m.cols())) > UNIT_TOL {
            return Err(param("basis", "columns must be orthonormal"));
        }
    }
    let c = u.t_matmul(v)?;
    let s = singular_values(&c)?;
    Ok(s.last().copied().unwrap_or(0.0).min(1.0))
}

/// Orthonormalises the columns in place by modified Gram-Schmidt, applied
/// twice. Fails if the columns are numerically dependent.
pub fn orthonormalize_columns(m: &mut Matrix) -> Result<()> {
    for j in 0..m.cols() {
        for _ in 0..2 {
            for l in 0..j {
                let rows = m.rows();
                let (prev, cur) = m.data_mut().split_at_mut(j * rows);
                let ql = &prev[l * rows..(l + 1) * rows];
                let qj = &mut cur[..rows];
                let c = dot(ql, qj);
                axpy(-c, ql, qj);
            }
        }
        let n = norm2(m.col(j));
        if n < 1e-12 {
            return Err(param("matrix", "columns are linearly dependent"));
        }
        m.col_mut(j).iter_mut().for_each(|x| *x /= n);
    }
    Ok(())
}
