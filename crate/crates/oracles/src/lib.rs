//! Slow, independent reference computations used by the test suites.
//!
//! Nothing here shares code with `subnorm-core`. Matrices are row-major
//! `Vec<Vec<f64>>`; tensors are flat with the first index fastest.

pub type Dense = Vec<Vec<f64>>;

pub fn zeros(r: usize, c: usize) -> Dense {
    vec![vec![0.0; c]; r]
}

pub fn transpose(a: &Dense) -> Dense {
    let (r, c) = (a.len(), a.first().map_or(0, Vec::len));
    (0..c).map(|j| (0..r).map(|i| a[i][j]).collect()).collect()
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let inner = b.len();
    let c = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| {
            assert_eq!(row.len(), inner);
            (0..c).map(|j| (0..inner).map(|p| row[p] * b[p][j]).sum()).collect()
        })
        .collect()
}

pub fn fro(a: &Dense) -> f64 {
    a.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn max_abs_diff(a: &Dense, b: &Dense) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Dense Kronecker product by the block definition.
pub fn kron(a: &Dense, b: &Dense) -> Dense {
    let (ra, ca) = (a.len(), a[0].len());
    let (rb, cb) = (b.len(), b[0].len());
    let mut out = zeros(ra * rb, ca * cb);
    for i in 0..ra {
        for j in 0..ca {
            for p in 0..rb {
                for q in 0..cb {
                    out[i * rb + p][j * cb + q] = a[i][j] * b[p][q];
                }
            }
        }
    }
    out
}

/// Flat offset of a multi-index, first index fastest.
pub fn offset(shape: &[usize], idx: &[usize]) -> usize {
    let mut off = 0;
    let mut stride = 1;
    for (&i, &n) in idx.iter().zip(shape) {
        off += i * stride;
        stride *= n;
    }
    off
}

/// Every multi-index of `shape` in flat order.
pub fn indices(shape: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = shape.iter().product();
    (0..total)
        .map(|mut t| {
            shape
                .iter()
                .map(|&n| {
                    let i = t % n;
                    t /= n;
                    i
                })
                .collect()
        })
        .collect()
}

/// Mode-`k` unfolding from the index formula: column `sum_{l != k} i_l J_l`,
/// `J_l` the product of the dimensions of the earlier non-`k` modes.
pub fn unfold(data: &[f64], shape: &[usize], k: usize) -> Dense {
    let cols: usize = shape.iter().enumerate().filter(|&(l, _)| l != k).map(|(_, n)| n).product();
    let mut out = zeros(shape[k], cols);
    for idx in indices(shape) {
        let mut j = 0;
        let mut stride = 1;
        for (l, (&i, &n)) in idx.iter().zip(shape).enumerate() {
            if l != k {
                j += i * stride;
                stride *= n;
            }
        }
        out[idx[k]][j] = data[offset(shape, &idx)];
    }
    out
}

/// Outer product of vectors, flat with the first index fastest.
pub fn outer(vs: &[&[f64]]) -> Vec<f64> {
    let shape: Vec<usize> = vs.iter().map(|v| v.len()).collect();
    indices(&shape).iter().map(|idx| idx.iter().zip(vs).map(|(&i, v)| v[i]).product()).collect()
}

/// Full SVD `a = U diag(s) V^T` by one-sided (Hestenes) Jacobi.
///
/// Returns `U` (`r x p`), `s` (`p`, non-increasing) and `V` (`c x p`) with
/// `p = min(r, c)`.
pub fn svd(a: &Dense) -> (Dense, Vec<f64>, Dense) {
    let (r, c) = (a.len(), a[0].len());
    if r < c {
        let (u, s, v) = svd(&transpose(a));
        return (v, s, u);
    }
    // Columns of `w` converge to U diag(s); `v` accumulates the rotations.
    let mut w: Dense = transpose(a);
    let mut v: Dense = (0..c).map(|i| (0..c).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for _ in 0..200 {
        let mut rotated = false;
        for p in 0..c {
            for q in p + 1..c {
                let alpha: f64 = w[p].iter().map(|x| x * x).sum();
                let beta: f64 = w[q].iter().map(|x| x * x).sum();
                let gamma: f64 = w[p].iter().zip(&w[q]).map(|(x, y)| x * y).sum();
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for m in [&mut w, &mut v] {
                    let (lo, hi) = m.split_at_mut(q);
                    for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                        let (a, b) = (*x, *y);
                        *x = cs * a - sn * b;
                        *y = sn * a + cs * b;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..c).collect();
    let norms: Vec<f64> = w.iter().map(|col| col.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let s: Vec<f64> = order.iter().map(|&i| norms[i]).collect();
    let u_cols: Vec<Vec<f64>> = order
        .iter()
        .map(|&i| if norms[i] > 0.0 { w[i].iter().map(|x| x / norms[i]).collect() } else { vec![0.0; r] })
        .collect();
    let v_cols: Vec<Vec<f64>> = order.iter().map(|&i| v[i].clone()).collect();
    (transpose(&u_cols), s, transpose(&v_cols))
}

fn solve(a: &Dense, b: &Dense) -> Dense {
    // Gaussian elimination with partial pivoting; `b` has many columns.
    let n = a.len();
    let mut m: Dense = a.iter().zip(b).map(|(ra, rb)| ra.iter().chain(rb).copied().collect()).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())).unwrap();
        m.swap(col, piv);
        for i in 0..n {
            if i != col {
                let f = m[i][col] / m[col][col];
                let (pivot_row, row) = if i < col {
                    let (lo, hi) = m.split_at_mut(col);
                    (&hi[0], &mut lo[i])
                } else {
                    let (lo, hi) = m.split_at_mut(i);
                    (&lo[col], &mut hi[0])
                };
                row.iter_mut().zip(pivot_row).for_each(|(x, p)| *x -= f * p);
            }
        }
    }
    m.iter().enumerate().map(|(i, row)| row[n..].iter().map(|x| x / row[i]).collect()).collect()
}

fn ridge_update(z: &Dense, other: &Dense, eta: f64) -> Dense {
    // argmin_A ½‖A other^T - z‖² + η/2 ‖A‖² = z other (other^T other + ηI)^{-1}
    let mut g = matmul(&transpose(other), other);
    for (i, row) in g.iter_mut().enumerate() {
        row[i] += eta;
    }
    transpose(&solve(&g, &transpose(&matmul(z, other))))
}

/// Proximal operator of `eta ‖.‖_*` from the variational form
/// `‖X‖_* = min_{X = A B^T} ½(‖A‖² + ‖B‖²)`, minimised by alternating ridge
/// regressions from `A = Z`, `B = I`. Makes no use of an SVD.
pub fn prox_factored(z: &Dense, eta: f64, iters: usize) -> Dense {
    let c = z[0].len();
    let mut a = z.clone();
    let mut b: Dense = (0..c).map(|i| (0..c).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let zt = transpose(z);
    let mut x = matmul(&a, &transpose(&b));
    for _ in 0..iters {
        b = ridge_update(&zt, &a, eta);
        a = ridge_update(z, &b, eta);
        let next = matmul(&a, &transpose(&b));
        let change = max_abs_diff(&next, &x);
        x = next;
        if change < 1e-15 {
            break;
        }
    }
    x
}

/// Orthogonal projection of `x` onto the span of `vectors`, by modified
/// Gram-Schmidt (twice) with dependent vectors dropped.
pub fn project_onto(vectors: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        let n0 = w.iter().map(|t| t * t).sum::<f64>().sqrt();
        for _ in 0..2 {
            for q in &basis {
                let c: f64 = q.iter().zip(&w).map(|(a, b)| a * b).sum();
                w.iter_mut().zip(q).for_each(|(t, qi)| *t -= c * qi);
            }
        }
        let n = w.iter().map(|t| t * t).sum::<f64>().sqrt();
        if n > 1e-9 * n0.max(1.0) {
            basis.push(w.into_iter().map(|t| t / n).collect());
        }
    }
    let mut out = vec![0.0; x.len()];
    for q in &basis {
        let c: f64 = q.iter().zip(x).map(|(a, b)| a * b).sum();
        out.iter_mut().zip(q).for_each(|(o, qi)| *o += c * qi);
    }
    out
}

/// Spanning set of the tensors `sum_k C_k x_{l != k} P_l`: for each mode `k`,
/// every outer product with a standard basis vector in mode `k` and a column
/// of `P_l` (given as `n_l x h` row-major) in every other mode.
pub fn span_vectors(shape: &[usize], factors: &[Dense]) -> Vec<Vec<f64>> {
    let order = shape.len();
    let mut out = Vec::new();
    for k in 0..order {
        let choice_shape: Vec<usize> =
            (0..order).map(|l| if l == k { shape[k] } else { factors[l][0].len() }).collect();
        for choice in indices(&choice_shape) {
            let vs: Vec<Vec<f64>> = (0..order)
                .map(|l| {
                    if l == k {
                        (0..shape[k]).map(|i| if i == choice[k] { 1.0 } else { 0.0 }).collect()
                    } else {
                        factors[l].iter().map(|row| row[choice[l]]).collect()
                    }
                })
                .collect();
            let refs: Vec<&[f64]> = vs.iter().map(Vec::as_slice).collect();
            out.push(outer(&refs));
        }
    }
    out
}
