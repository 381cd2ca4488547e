//! File formats, Monte-Carlo sweeps and the command-line front end for
//! [`subnorm_core`].

pub mod cli;
pub mod config;
pub mod record;
pub mod sweeps;
pub mod tenfile;

pub use subnorm_core;
