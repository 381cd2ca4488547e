//! Monte-Carlo sweeps and the small amount of curve analysis done on them.
//!
//! Every (grid point, trial) draws from its own random stream, derived from
//! the master seed and the indices, so a sweep is a pure function of its
//! configuration. Records come back sorted by grid index, then method, then
//! λ, then trial.

use std::collections::BTreeMap;
use std::str::FromStr;
use std::time::Instant;

use subnorm_core::baselines::{cp_als, latent_denoise, optimistic_error, overlapped_denoise, CpOptions, TraceNormOptions};
use subnorm_core::rng::{hash_path, Rng};
use subnorm_core::spectral::{dist, top_left_singular};
use subnorm_core::subspace::{
    admm_denoise, build_bases, incoherence, run_admm, theoretical_lambda, AdmmOptions, AdmmSolution, AdmmState,
};
use subnorm_core::synthetic::{gen_info_plus_noise, gen_synthetic, relative_error, SyntheticSpec};
use subnorm_core::{Result, Tensor};

use crate::record::{ExperimentRecord, LambdaRule, Sweep};

/// `n` points from `lo` to `hi`, evenly spaced in log scale.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
        }
    }
}

fn dims_root4(dims: &[usize]) -> f64 {
    (dims.iter().map(|&n| n as f64).product::<f64>()).powf(0.25)
}

fn timer(on: bool) -> Option<Instant> {
    on.then(Instant::now)
}

fn elapsed(t: Option<Instant>) -> Option<f64> {
    t.map(|t| t.elapsed().as_secs_f64())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPhaseConfig {
    pub n: usize,
    pub m: usize,
    /// β/σ values; σ is fixed at 1.
    pub snr_grid: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub timing: bool,
}

impl MatrixPhaseConfig {
    /// 24 log-spaced points over `[0.25, 8] (nm)^{1/4}`, 10 trials.
    pub fn new(n: usize, m: usize, seed: u64) -> Self {
        Self { n, m, snr_grid: default_snr_grid(n, m), trials: 10, seed, timing: false }
    }
}

pub fn default_snr_grid(n: usize, m: usize) -> Vec<f64> {
    let t = ((n * m) as f64).powf(0.25);
    logspace(0.25 * t, 8.0 * t, 24)
}

/// Leading left singular vector of `β u v^T + E` against `u`.
pub fn matrix_phase_sweep(cfg: &MatrixPhaseConfig) -> Result<Vec<ExperimentRecord>> {
    let dims = [cfg.n, cfg.m];
    let mut out = Vec::with_capacity(cfg.snr_grid.len() * cfg.trials);
    for (g, &snr) in cfg.snr_grid.iter().enumerate() {
        for t in 0..cfg.trials {
            let clock = timer(cfg.timing);
            let mut rng = Rng::substream(cfg.seed, &[g as u64, t as u64]);
            let inst = gen_info_plus_noise(cfg.n, cfg.m, snr, 1.0, &mut rng);
            let svd = top_left_singular(&inst.observed, 1)?;
            let u_hat = svd.left_vectors.col(0);
            let inner: f64 = u_hat.iter().zip(&inst.u).map(|(a, b)| a * b).sum::<f64>().abs().min(1.0);
            let mut r = ExperimentRecord::new(Sweep::MatrixPhase, "top_singular", &dims, &[snr], cfg.seed);
            r.grid_index = g;
            r.trial = t;
            r.sigma = 1.0;
            r.snr = Some(snr);
            r.component = Some(0);
            r.inner = Some(inner);
            r.one_minus_inner = Some(1.0 - inner);
            r.dist = Some(dist(u_hat, &inst.u)?);
            r.wall_time = elapsed(clock);
            out.push(r);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorPhaseConfig {
    pub dims: Vec<usize>,
    pub betas: Vec<f64>,
    pub sigma_grid: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub timing: bool,
}

impl TensorPhaseConfig {
    /// 30 σ values log-spaced so that `σ (∏ n_k)^{1/4}` covers
    /// `[0.1 min β, 3 max β]`, 10 trials.
    pub fn new(dims: &[usize], betas: &[f64], seed: u64) -> Self {
        let sigma_grid = default_tensor_sigma_grid(dims, betas, 30);
        Self { dims: dims.to_vec(), betas: betas.to_vec(), sigma_grid, trials: 10, seed, timing: false }
    }
}

pub fn default_tensor_sigma_grid(dims: &[usize], betas: &[f64], points: usize) -> Vec<f64> {
    let lo = betas.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = betas.iter().cloned().fold(0.0, f64::max);
    let scale = dims_root4(dims);
    logspace(0.1 * lo / scale, 3.0 * hi / scale, points)
}

/// Top-R left singular vectors of the mode-0 unfolding against the true
/// mode-0 factors; one record per component.
pub fn tensor_phase_sweep(cfg: &TensorPhaseConfig) -> Result<Vec<ExperimentRecord>> {
    let rank = cfg.betas.len();
    let scale = dims_root4(&cfg.dims);
    let mut out = Vec::new();
    for (g, &sigma) in cfg.sigma_grid.iter().enumerate() {
        for t in 0..cfg.trials {
            let clock = timer(cfg.timing);
            let spec = SyntheticSpec::new(&cfg.dims, &cfg.betas, sigma, hash_path(&[cfg.seed, g as u64, t as u64]));
            let inst = gen_synthetic(&spec)?;
            let svd = top_left_singular(&inst.observed.unfold(0)?, rank)?;
            let wall = elapsed(clock);
            for c in 0..rank {
                let u = inst.factors[0].col(c);
                let u_hat = svd.left_vectors.col(c);
                let inner: f64 = u.iter().zip(u_hat).map(|(a, b)| a * b).sum::<f64>().abs().min(1.0);
                let mut r = ExperimentRecord::new(Sweep::TensorPhase, "top_singular", &cfg.dims, &cfg.betas, cfg.seed);
                r.grid_index = g;
                r.trial = t;
                r.sigma = sigma;
                r.normalized_sigma = Some(sigma * scale);
                r.component = Some(c);
                r.inner = Some(inner);
                r.one_minus_inner = Some(1.0 - inner);
                r.dist = Some(dist(u_hat, u)?);
                r.wall_time = wall;
                out.push(r);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Subspace,
    Overlapped,
    Latent,
    Cp,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Subspace, Method::Overlapped, Method::Latent, Method::Cp];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Subspace => "subspace",
            Method::Overlapped => "overlapped",
            Method::Latent => "latent",
            Method::Cp => "cp",
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method {s:?} (expected subspace, overlapped, latent or cp)"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CpSettings {
    /// Defaults to the true rank.
    pub rank: Option<usize>,
    pub n_inits: usize,
    pub l2_grid: Vec<f64>,
    pub opts: CpOptions,
}

impl Default for CpSettings {
    fn default() -> Self {
        Self { rank: None, n_inits: 20, l2_grid: logspace(0.01, 10.0, 20), opts: CpOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseConfig {
    pub dims: Vec<usize>,
    pub betas: Vec<f64>,
    pub h: usize,
    pub methods: Vec<Method>,
    pub lambda_grid: Vec<f64>,
    pub sigma_grid: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    /// Adds one subspace row per (σ, trial) at the theoretical λ.
    pub theory_lambda: bool,
    pub admm: AdmmOptions,
    pub trace: TraceNormOptions,
    pub cp: CpSettings,
    pub timing: bool,
}

impl DenoiseConfig {
    /// 20×30×40, β = (20, 10), H = 2, subspace and overlapped, 20 λ over
    /// `[1, 100]`, 20 σ over `[0.05, 8]`, 10 trials.
    pub fn new(seed: u64) -> Self {
        Self {
            dims: vec![20, 30, 40],
            betas: vec![20.0, 10.0],
            h: 2,
            methods: vec![Method::Subspace, Method::Overlapped],
            lambda_grid: logspace(1.0, 100.0, 20),
            sigma_grid: logspace(0.05, 8.0, 20),
            trials: 10,
            seed,
            theory_lambda: true,
            admm: AdmmOptions::default(),
            trace: TraceNormOptions::default(),
            cp: CpSettings::default(),
            timing: false,
        }
    }
}

struct Trial<'a> {
    cfg: &'a DenoiseConfig,
    g: usize,
    t: usize,
    sigma: f64,
    truth: Tensor,
    observed: Tensor,
    optimistic: f64,
}

impl Trial<'_> {
    fn record(&self, method: Method, estimate: &Tensor) -> Result<ExperimentRecord> {
        let cfg = self.cfg;
        let mut r = ExperimentRecord::new(Sweep::Denoise, method.as_str(), &cfg.dims, &cfg.betas, cfg.seed);
        r.grid_index = self.g;
        r.trial = self.t;
        r.sigma = self.sigma;
        r.optimistic_error = Some(self.optimistic);
        r.relative_error = Some(relative_error(estimate, &self.truth)?);
        Ok(r)
    }
}

/// Relative error of every method over the λ grid (CP: the ℓ2 grid) at
/// every σ and trial. Solver non-convergence is recorded, not fatal.
///
/// The subspace path is solved from the largest λ down, each solve starting
/// from the previous solution.
pub fn denoise_sweep(cfg: &DenoiseConfig) -> Result<Vec<ExperimentRecord>> {
    let mut out = Vec::new();
    for (g, &sigma) in cfg.sigma_grid.iter().enumerate() {
        for t in 0..cfg.trials {
            let spec = SyntheticSpec::new(&cfg.dims, &cfg.betas, sigma, hash_path(&[cfg.seed, g as u64, t as u64]));
            let inst = gen_synthetic(&spec)?;
            let optimistic = optimistic_error(sigma, cfg.betas.len(), &cfg.dims, inst.truth.fro_norm())?;
            let trial = Trial { cfg, g, t, sigma, truth: inst.truth, observed: inst.observed, optimistic };
            for &method in &cfg.methods {
                match method {
                    Method::Subspace => subspace_rows(&trial, &mut out)?,
                    Method::Overlapped | Method::Latent => trace_rows(&trial, method, &mut out)?,
                    Method::Cp => cp_rows(&trial, &mut out)?,
                }
            }
        }
    }
    out.sort_by_key(|r| {
        let method = Method::from_str(r.method).expect("records carry known methods");
        let theory = r.lambda_rule == Some(LambdaRule::Theory);
        (r.grid_index, method, theory, r.lambda_index, r.trial)
    });
    Ok(out)
}

fn subspace_rows(trial: &Trial, out: &mut Vec<ExperimentRecord>) -> Result<()> {
    let cfg = trial.cfg;
    let y = &trial.observed;
    let bases = build_bases(y, cfg.h)?;
    let mut order: Vec<usize> = (0..cfg.lambda_grid.len()).collect();
    order.sort_by(|&a, &b| cfg.lambda_grid[b].total_cmp(&cfg.lambda_grid[a]));

    let mut prev: Option<AdmmSolution> = None;
    for i in order {
        let lambda = cfg.lambda_grid[i];
        let clock = timer(cfg.timing);
        let sol = match &prev {
            None => admm_denoise(y, &bases, lambda, &cfg.admm)?,
            Some(p) => {
                let state = AdmmState::warm(y, &bases, lambda, cfg.admm.eta, &p.dual, p.blocks.clone())?;
                run_admm(y, &bases, state, &cfg.admm)?
            }
        };
        let mut r = subspace_record(trial, &sol, &bases, lambda)?;
        r.wall_time = elapsed(clock);
        r.lambda_rule = Some(LambdaRule::Grid);
        r.lambda_index = Some(i);
        out.push(r);
        prev = Some(sol);
    }

    let lambda = theoretical_lambda(trial.sigma, &cfg.dims, cfg.h);
    if cfg.theory_lambda && lambda > 0.0 {
        let clock = timer(cfg.timing);
        let sol = admm_denoise(y, &bases, lambda, &cfg.admm)?;
        let mut r = subspace_record(trial, &sol, &bases, lambda)?;
        r.wall_time = elapsed(clock);
        r.lambda_rule = Some(LambdaRule::Theory);
        out.push(r);
    }
    Ok(())
}

fn subspace_record(
    trial: &Trial,
    sol: &AdmmSolution,
    bases: &subnorm_core::subspace::SubspaceBases,
    lambda: f64,
) -> Result<ExperimentRecord> {
    let mut r = trial.record(Method::Subspace, &sol.estimate)?;
    r.h = Some(trial.cfg.h);
    r.lambda = Some(lambda);
    r.incoherence = Some(incoherence(&sol.blocks, bases)?);
    r.iterations = Some(sol.diagnostics.iterations);
    r.converged = Some(sol.diagnostics.converged);
    Ok(r)
}

fn trace_rows(trial: &Trial, method: Method, out: &mut Vec<ExperimentRecord>) -> Result<()> {
    let cfg = trial.cfg;
    for (i, &lambda) in cfg.lambda_grid.iter().enumerate() {
        let clock = timer(cfg.timing);
        let sol = match method {
            Method::Overlapped => overlapped_denoise(&trial.observed, lambda, &cfg.trace)?,
            _ => latent_denoise(&trial.observed, lambda, &cfg.trace)?,
        };
        let mut r = trial.record(method, &sol.estimate)?;
        r.wall_time = elapsed(clock);
        r.lambda_rule = Some(LambdaRule::Grid);
        r.lambda_index = Some(i);
        r.lambda = Some(lambda);
        r.iterations = Some(sol.diagnostics.iterations);
        r.converged = Some(sol.diagnostics.converged);
        out.push(r);
    }
    Ok(())
}

fn cp_rows(trial: &Trial, out: &mut Vec<ExperimentRecord>) -> Result<()> {
    let cfg = trial.cfg;
    let rank = cfg.cp.rank.unwrap_or(cfg.betas.len());
    let seed = hash_path(&[cfg.seed, trial.g as u64, trial.t as u64, 1]);
    for (i, &l2) in cfg.cp.l2_grid.iter().enumerate() {
        let clock = timer(cfg.timing);
        let opts = CpOptions { l2_reg: l2, ..cfg.cp.opts };
        let fit = cp_als(&trial.observed, rank, cfg.cp.n_inits, seed, &opts)?;
        let mut r = trial.record(Method::Cp, &fit.model.to_tensor()?)?;
        r.wall_time = elapsed(clock);
        r.h = Some(rank);
        r.lambda_rule = Some(LambdaRule::Grid);
        r.lambda_index = Some(i);
        r.lambda = Some(l2);
        r.iterations = Some(fit.sweeps);
        r.converged = Some(fit.sweeps < opts.max_sweeps);
        out.push(r);
    }
    Ok(())
}

/// Mean of `value` over records grouped by `key`, for keys where `value` is defined.
pub fn group_mean<K: Ord>(
    records: &[ExperimentRecord],
    key: impl Fn(&ExperimentRecord) -> Option<K>,
    value: impl Fn(&ExperimentRecord) -> Option<f64>,
) -> BTreeMap<K, f64> {
    let mut acc: BTreeMap<K, (f64, usize)> = BTreeMap::new();
    for r in records {
        if let (Some(k), Some(v)) = (key(r), value(r)) {
            let e = acc.entry(k).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

/// First abscissa at which the piecewise-linear curve (linear in `ln x`)
/// through `(xs, ys)` reaches `level`. `xs` must be positive and increasing.
pub fn crossing(xs: &[f64], ys: &[f64], level: f64) -> Option<f64> {
    for i in 0..xs.len().saturating_sub(1) {
        let (a, b) = (ys[i] - level, ys[i + 1] - level);
        if a == 0.0 {
            return Some(xs[i]);
        }
        if a * b < 0.0 || b == 0.0 {
            let f = a / (a - b);
            let (la, lb) = (xs[i].ln(), xs[i + 1].ln());
            return Some((la + f * (lb - la)).exp());
        }
    }
    None
}

/// Least-squares slope of `ln y` against `ln x`; `None` with fewer than two
/// usable points.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logspace_endpoints() {
        let v = logspace(1.0, 100.0, 3);
        assert!((v[0] - 1.0).abs() < 1e-12 && (v[1] - 10.0).abs() < 1e-12 && (v[2] - 100.0).abs() < 1e-12);
        assert_eq!(logspace(2.0, 3.0, 1), vec![2.0]);
        assert!(logspace(1.0, 2.0, 0).is_empty());
    }

    #[test]
    fn crossing_interpolates_in_log_x() {
        let xs = [1.0, 4.0];
        assert!((crossing(&xs, &[0.0, 1.0], 0.5).unwrap() - 2.0).abs() < 1e-12);
        assert!((crossing(&xs, &[1.0, 0.0], 0.5).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(crossing(&xs, &[0.7, 0.9], 0.5), None);
        assert_eq!(crossing(&[1.0, 2.0, 3.0], &[0.2, 0.5, 0.9], 0.5), Some(2.0));
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = (1..6).map(|i| (i as f64, 3.0 * (i as f64).powi(-4))).collect();
        assert!((loglog_slope(&pts).unwrap() + 4.0).abs() < 1e-12);
        assert_eq!(loglog_slope(&pts[..1]), None);
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("tucker".parse::<Method>().is_err());
    }

    #[test]
    fn small_denoise_sweep_is_sorted_and_complete() {
        let mut cfg = DenoiseConfig::new(3);
        cfg.dims = vec![5, 6, 7];
        cfg.methods = vec![Method::Subspace, Method::Overlapped, Method::Latent, Method::Cp];
        cfg.lambda_grid = logspace(0.5, 20.0, 3);
        cfg.sigma_grid = vec![0.0, 0.3];
        cfg.trials = 2;
        cfg.cp = CpSettings { n_inits: 2, l2_grid: vec![0.01, 1.0], ..CpSettings::default() };
        let recs = denoise_sweep(&cfg).unwrap();
        // Per (σ, trial): 3 subspace + 3 overlapped + 3 latent + 2 cp, plus a
        // theory row when σ > 0.
        assert_eq!(recs.len(), 2 * 2 * 11 + 2);
        let keys: Vec<_> = recs.iter().map(|r| (r.grid_index, r.method, r.lambda_index, r.trial)).collect();
        assert_eq!(keys[0], (0, "subspace", Some(0), 0));
        assert_eq!(keys[1], (0, "subspace", Some(0), 1));
        let theory = recs.iter().filter(|r| r.lambda_rule == Some(LambdaRule::Theory)).count();
        assert_eq!(theory, 2);
        assert!(recs.iter().all(|r| r.relative_error.unwrap().is_finite()));
    }
}
