//! Dense tensors in colexicographic order and the multilinear primitives.
//!
//! Entry `(i_0, ..., i_{K-1})` lives at flat offset `sum_l i_l * stride_l`
//! with `stride_l = prod_{m<l} n_m`, so the first index varies fastest. The
//! mode-`k` unfolding is `n_k x prod_{l≠k} n_l`; the fiber at the remaining
//! multi-index sits in column `sum_{l≠k} i_l * J_l` with
//! `J_l = prod_{m<l, m≠k} n_m`. Under this layout mode 0 unfolding is a
//! reinterpretation of the flat buffer.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::{self, kron_except, Matrix};

/// Largest supported tensor order.
pub const MAX_ORDER: usize = 8;

/// A dense real tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() || shape.len() > MAX_ORDER || shape.contains(&0) {
        return Err(Error::InvalidShape(shape.to_vec()));
    }
    Ok(shape.iter().product())
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let len = check_shape(&shape)?;
        if data.len() != len {
            return Err(Error::LengthMismatch { expected: len, found: data.len() });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        let len = check_shape(shape)?;
        Ok(Self { shape: shape.to_vec(), data: vec![0.0; len] })
    }

    /// Builds a tensor entry by entry; `f` receives the multi-index.
    pub fn from_fn(shape: &[usize], mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        let len = check_shape(shape)?;
        let mut idx = vec![0usize; shape.len()];
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(f(&idx));
            for (i, &n) in idx.iter_mut().zip(shape) {
                *i += 1;
                if *i < n {
                    break;
                }
                *i = 0;
            }
        }
        Ok(Self { shape: shape.to_vec(), data })
    }

    /// Rank-one tensor `v_0 ∘ v_1 ∘ ... ∘ v_{K-1}`.
    pub fn outer(vectors: &[&[f64]]) -> Result<Self> {
        let shape: Vec<usize> = vectors.iter().map(|v| v.len()).collect();
        check_shape(&shape)?;
        let mut data = vec![1.0];
        for v in vectors {
            let mut next = Vec::with_capacity(data.len() * v.len());
            for &x in v.iter() {
                next.extend(data.iter().map(|d| d * x));
            }
            data = next;
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        debug_assert_eq!(idx.len(), self.shape.len());
        let mut offset = 0;
        let mut stride = 1;
        for (&i, &n) in idx.iter().zip(&self.shape) {
            offset += i * stride;
            stride *= n;
        }
        self.data[offset]
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.order() {
            return Err(Error::ModeOutOfRange { mode, order: self.order() });
        }
        Ok(())
    }

    pub(crate) fn check_same_shape(&self, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch { expected: self.shape.clone(), found: other.shape.clone() });
        }
        Ok(())
    }

    /// Mode-`mode` unfolding.
    pub fn unfold(&self, mode: usize) -> Result<Matrix> {
        self.check_mode(mode)?;
        let (left, n, right) = split_dims(&self.shape, mode);
        let mut out = vec![0.0; self.data.len()];
        for r in 0..right {
            for i in 0..n {
                let src = &self.data[left * (i + n * r)..left * (i + n * r + 1)];
                for (l, &v) in src.iter().enumerate() {
                    out[i + n * (l + left * r)] = v;
                }
            }
        }
        Matrix::from_col_major(n, left * right, out)
    }

    /// Inverse of [`Tensor::unfold`].
    pub fn fold(m: &Matrix, mode: usize, shape: &[usize]) -> Result<Tensor> {
        let len = check_shape(shape)?;
        if mode >= shape.len() {
            return Err(Error::ModeOutOfRange { mode, order: shape.len() });
        }
        let (left, n, right) = split_dims(shape, mode);
        if m.rows() != n || m.cols() != left * right {
            return Err(Error::ShapeMismatch { expected: vec![n, left * right], found: vec![m.rows(), m.cols()] });
        }
        let src = m.data();
        let mut data = vec![0.0; len];
        for r in 0..right {
            for i in 0..n {
                let dst = &mut data[left * (i + n * r)..left * (i + n * r + 1)];
                for (l, d) in dst.iter_mut().enumerate() {
                    *d = src[i + n * (l + left * r)];
                }
            }
        }
        Ok(Tensor { shape: shape.to_vec(), data })
    }

    /// Sum of elementwise products.
    pub fn inner(&self, other: &Tensor) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(matrix::dot(&self.data, &other.data))
    }

    pub fn fro_norm(&self) -> f64 {
        math::sqrt(matrix::dot(&self.data, &self.data))
    }

    pub fn scale(&self, alpha: f64) -> Tensor {
        Tensor { shape: self.shape.clone(), data: self.data.iter().map(|v| alpha * v).collect() }
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Tensor { shape: self.shape.clone(), data })
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.check_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Tensor { shape: self.shape.clone(), data })
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Tensor) -> Result<()> {
        self.check_same_shape(other)?;
        matrix::axpy(alpha, &other.data, &mut self.data);
        Ok(())
    }

    /// Mode-`mode` product `self ×_mode a`; `a` must have `n_mode` columns.
    pub fn mode_product(&self, a: &Matrix, mode: usize) -> Result<Tensor> {
        let unf = self.unfold(mode)?;
        let prod = a.matmul(&unf)?;
        let mut shape = self.shape.clone();
        shape[mode] = a.rows();
        Tensor::fold(&prod, mode, &shape)
    }
}

/// `(prod of dims before mode, n_mode, prod of dims after mode)`.
fn split_dims(shape: &[usize], mode: usize) -> (usize, usize, usize) {
    let left = shape[..mode].iter().product();
    let right = shape[mode + 1..].iter().product();
    (left, shape[mode], right)
}

/// Composes a Tucker model `core ×_0 U_0 ×_1 U_1 ... ×_{K-1} U_{K-1}`.
///
/// `factors[k]` is `n_k x R_k` where `R_k` is the core's size along mode `k`.
pub fn tucker_compose(core: &Tensor, factors: &[Matrix]) -> Result<Tensor> {
    if factors.len() != core.order() {
        return Err(Error::ShapeMismatch { expected: vec![core.order()], found: vec![factors.len()] });
    }
    for (k, f) in factors.iter().enumerate() {
        if f.cols() != core.shape()[k] {
            return Err(Error::ShapeMismatch { expected: vec![core.shape()[k]], found: vec![f.cols()] });
        }
    }
    let mut out = core.clone();
    for (k, f) in factors.iter().enumerate() {
        out = out.mode_product(f, k)?;
    }
    Ok(out)
}

/// Mode-`mode` unfolding of a Tucker model computed in matrix form:
/// `U_k · C_(k) · (kron of the other factors)^T`.
pub fn tucker_unfolding(core: &Tensor, factors: &[Matrix], mode: usize) -> Result<Matrix> {
    let c = core.unfold(mode)?;
    let kr = kron_except(factors, mode);
    factors[mode].matmul(&c)?.matmul_t(&kr)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq_tensor(shape: &[usize]) -> Tensor {
        let len: usize = shape.iter().product();
        Tensor::new(shape.to_vec(), (1..=len).map(|v| v as f64).collect()).unwrap()
    }

    fn pseudo_random(shape: &[usize], seed: u64) -> Tensor {
        let mut s = seed;
        Tensor::from_fn(shape, |_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        })
        .unwrap()
    }

    #[test]
    fn unfold_mode0_of_2x2x2() {
        let x = seq_tensor(&[2, 2, 2]);
        let m = x.unfold(0).unwrap();
        let expected = Matrix::from_rows(&[&[1.0, 3.0, 5.0, 7.0], &[2.0, 4.0, 6.0, 8.0]]).unwrap();
        assert_eq!(m, expected);
    }

    #[test]
    fn unfold_other_modes_of_2x2x2() {
        // Enumerated by hand from the fiber definition.
        let x = seq_tensor(&[2, 2, 2]);
        let m1 = Matrix::from_rows(&[&[1.0, 2.0, 5.0, 6.0], &[3.0, 4.0, 7.0, 8.0]]).unwrap();
        let m2 = Matrix::from_rows(&[&[1.0, 2.0, 3.0, 4.0], &[5.0, 6.0, 7.0, 8.0]]).unwrap();
        assert_eq!(x.unfold(1).unwrap(), m1);
        assert_eq!(x.unfold(2).unwrap(), m2);
    }

    #[test]
    fn fold_inverts_the_worked_example() {
        let m = Matrix::from_rows(&[&[1.0, 3.0, 5.0, 7.0], &[2.0, 4.0, 6.0, 8.0]]).unwrap();
        assert_eq!(Tensor::fold(&m, 0, &[2, 2, 2]).unwrap(), seq_tensor(&[2, 2, 2]));
    }

    #[test]
    fn order_one_unfold_is_a_column() {
        let x = Tensor::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap();
        let m = x.unfold(0).unwrap();
        assert_eq!(m.shape(), (3, 1));
        assert_eq!(m.data(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn fold_of_zero_matrix_is_zero() {
        let t = Tensor::fold(&Matrix::zeros(3, 8), 1, &[2, 3, 4]).unwrap();
        assert!(t.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fold_roundtrip_mode1() {
        let x = pseudo_random(&[2, 3, 4], 11);
        assert_eq!(Tensor::fold(&x.unfold(1).unwrap(), 1, &[2, 3, 4]).unwrap(), x);
    }

    #[test]
    fn unfold_rejects_bad_mode_and_fold_bad_dims() {
        let x = seq_tensor(&[2, 2]);
        assert_eq!(x.unfold(2), Err(Error::ModeOutOfRange { mode: 2, order: 2 }));
        assert!(Tensor::fold(&Matrix::zeros(2, 3), 0, &[2, 2]).is_err());
        assert!(Tensor::zeros(&[2, 0]).is_err());
        assert!(Tensor::zeros(&[]).is_err());
    }

    #[test]
    fn inner_identities() {
        let x = pseudo_random(&[3, 4, 2], 3);
        let y = pseudo_random(&[3, 4, 2], 4);
        let n = x.fro_norm();
        assert!((x.inner(&x).unwrap() - n * n).abs() < 1e-12);
        assert_eq!(x.inner(&Tensor::zeros(&[3, 4, 2]).unwrap()).unwrap(), 0.0);
        for k in 0..3 {
            let a = x.unfold(k).unwrap();
            let b = y.unfold(k).unwrap();
            let via = crate::matrix::dot(a.data(), b.data());
            assert!((via - x.inner(&y).unwrap()).abs() < 1e-12);
        }
        assert!(x.inner(&Tensor::zeros(&[3, 4]).unwrap()).is_err());
    }

    #[test]
    fn outer_matches_definition() {
        let u = [1.0, 2.0];
        let v = [3.0, -1.0, 0.5];
        let w = [2.0, 4.0];
        let t = Tensor::outer(&[&u, &v, &w]).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                for k in 0..2 {
                    assert_eq!(t.get(&[i, j, k]), u[i] * v[j] * w[k]);
                }
            }
        }
    }

    #[test]
    fn tucker_identity_core() {
        let core = pseudo_random(&[3, 3, 3], 9);
        let f = [Matrix::identity(3), Matrix::identity(3), Matrix::identity(3)];
        assert_eq!(tucker_compose(&core, &f).unwrap(), core);
    }

    #[test]
    fn tucker_rejects_mismatched_factors() {
        let core = Tensor::zeros(&[2, 2]).unwrap();
        assert!(tucker_compose(&core, &[Matrix::zeros(3, 2)]).is_err());
        assert!(tucker_compose(&core, &[Matrix::zeros(3, 2), Matrix::zeros(3, 3)]).is_err());
    }
}
