//! Seeded synthetic instances and the relative-error metric.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{param, Error, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;
use crate::spectral::orthonormalize_columns;
use crate::tensor::Tensor;

/// Parameters of a CP signal plus Gaussian noise.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub dims: Vec<usize>,
    /// Component strengths, descending and positive.
    pub betas: Vec<f64>,
    pub sigma: f64,
    pub seed: u64,
    /// Draw each mode's factor matrix with orthonormal columns; otherwise
    /// columns are independent random unit vectors.
    pub orthonormal_factors: bool,
}

impl SyntheticSpec {
    pub fn new(dims: &[usize], betas: &[f64], sigma: f64, seed: u64) -> Self {
        Self { dims: dims.to_vec(), betas: betas.to_vec(), sigma, seed, orthonormal_factors: true }
    }

    fn validate(&self) -> Result<()> {
        if self.dims.is_empty() || self.dims.contains(&0) {
            return Err(Error::InvalidShape(self.dims.clone()));
        }
        if self.betas.is_empty() || self.betas.iter().any(|b| !(*b > 0.0) || !b.is_finite()) {
            return Err(param("betas", "must be non-empty, positive and finite"));
        }
        if self.betas.windows(2).any(|w| w[1] > w[0]) {
            return Err(param("betas", "must be in descending order"));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(param("sigma", "must be finite and non-negative"));
        }
        let min_dim = *self.dims.iter().min().unwrap();
        if self.orthonormal_factors && self.betas.len() > min_dim {
            return Err(Error::RankOutOfRange { rank: self.betas.len(), max: min_dim });
        }
        Ok(())
    }
}

/// A generated instance.
#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    pub truth: Tensor,
    pub observed: Tensor,
    /// Per-mode `n_k x R` factor matrices; column `r` is `u_r^(k)`.
    pub factors: Vec<Matrix>,
}

/// `n x r` matrix with orthonormal columns: a Gaussian matrix, orthonormalised.
pub fn random_orthonormal(n: usize, r: usize, rng: &mut Rng) -> Matrix {
    loop {
        let data = rng.gaussian_vec(n * r);
        let mut m = Matrix::from_col_major(n, r, data).expect("length matches");
        if orthonormalize_columns(&mut m).is_ok() {
            return m;
        }
    }
}

/// Draws `X* = sum_r beta_r u_r^(1) ∘ ... ∘ u_r^(K)` and `Y = X* + sigma E`.
///
/// Factors are drawn mode by mode, then the noise tensor, all from one stream
/// seeded by `spec.seed`.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<SyntheticInstance> {
    spec.validate()?;
    let mut rng = Rng::new(spec.seed);
    let rank = spec.betas.len();
    let factors: Vec<Matrix> = spec
        .dims
        .iter()
        .map(|&n| {
            if spec.orthonormal_factors {
                random_orthonormal(n, rank, &mut rng)
            } else {
                let cols: Vec<Vec<f64>> = (0..rank).map(|_| rng.unit_vector(n)).collect();
                Matrix::from_columns(&cols).expect("equal lengths")
            }
        })
        .collect();
    let truth = cp_tensor(&spec.betas, &factors)?;
    let mut observed = truth.clone();
    if spec.sigma > 0.0 {
        for v in observed.data_mut() {
            *v += spec.sigma * rng.gaussian();
        }
    } else {
        // Keep the stream position independent of sigma.
        for _ in 0..observed.len() {
            rng.gaussian();
        }
    }
    Ok(SyntheticInstance { truth, observed, factors })
}

/// `sum_r weights[r] * a_r^(0) ∘ ... ∘ a_r^(K-1)`.
pub fn cp_tensor(weights: &[f64], factors: &[Matrix]) -> Result<Tensor> {
    let shape: Vec<usize> = factors.iter().map(|f| f.rows()).collect();
    let mut out = Tensor::zeros(&shape)?;
    for (r, &w) in weights.iter().enumerate() {
        let cols: Vec<&[f64]> = factors.iter().map(|f| f.col(r)).collect();
        out.axpy(w, &Tensor::outer(&cols)?)?;
    }
    Ok(out)
}

/// Rank-one matrix plus noise: `beta u v^T + sigma E` with random unit `u`, `v`.
#[derive(Debug, Clone)]
pub struct InfoPlusNoise {
    pub observed: Matrix,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

pub fn gen_info_plus_noise(n: usize, m: usize, beta: f64, sigma: f64, rng: &mut Rng) -> InfoPlusNoise {
    let u = rng.unit_vector(n);
    let v = rng.unit_vector(m);
    let mut data = vec![0.0; n * m];
    for (j, &vj) in v.iter().enumerate() {
        for (i, &ui) in u.iter().enumerate() {
            data[i + n * j] = beta * ui * vj + sigma * rng.gaussian();
        }
    }
    let observed = Matrix::from_col_major(n, m, data).expect("length matches");
    InfoPlusNoise { observed, u, v }
}

/// `‖estimate - truth‖_F / ‖truth‖_F`.
pub fn relative_error(estimate: &Tensor, truth: &Tensor) -> Result<f64> {
    let denom = truth.fro_norm();
    if denom == 0.0 {
        return Err(param("truth", "relative error is undefined for a zero tensor"));
    }
    Ok(estimate.sub(truth)?.fro_norm() / denom)
}
