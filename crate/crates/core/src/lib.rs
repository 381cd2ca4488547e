//! Low-rank tensor denoising with the subspace norm.
//!
//! The estimator runs in three stages: per-mode truncated SVDs of the noisy
//! observation give orthonormal factors `P[k]`; Kronecker products of those
//! factors fix a subspace for each mode; an ADMM solver then minimises the
//! squared loss plus a sum of nuclear norms over that subspace.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, sweeps and the
//! command-line front end live in the `subnorm` crate.
//!
//! Modes are zero-based throughout the API: a tensor of order `K` has modes
//! `0..K`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod baselines;
mod error;
mod math;
pub mod matrix;
pub mod rng;
pub mod spectral;
pub mod subspace;
pub mod synthetic;
pub mod tensor;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use tensor::Tensor;
