//! The `subnorm` command line.
//!
//! Exit status: 0 on success, 1 on runtime errors, 2 on usage errors and 3
//! when `--strict` is given and a solver stopped before converging.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use subnorm_core::baselines::{cp_als, latent_denoise, overlapped_denoise, CpOptions, TraceNormOptions};
use subnorm_core::subspace::{admm_denoise, build_bases, AdmmOptions};
use subnorm_core::synthetic::{gen_synthetic, SyntheticSpec};
use subnorm_core::Tensor;

use crate::config::read_config;
use crate::record::{write_csv, ExperimentRecord};
use crate::sweeps::{
    default_snr_grid, default_tensor_sigma_grid, denoise_sweep, logspace, matrix_phase_sweep, tensor_phase_sweep,
    CpSettings, DenoiseConfig, MatrixPhaseConfig, Method, TensorPhaseConfig,
};
use crate::tenfile::{format_tensor, read_tensor, write_tensor};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "subnorm", version, about = "Low-rank tensor denoising with the subspace norm")]
struct Cli {
    /// File of `key = value` lines supplying default flags.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Add a `wall_time` column to CSV output.
    #[arg(long, global = true)]
    timing: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a synthetic low-rank tensor plus Gaussian noise.
    #[command(args_override_self = true)]
    Gen(GenArgs),
    /// Denoise a tensor read from a .ten file.
    #[command(args_override_self = true)]
    Denoise(DenoiseArgs),
    /// Rank-one matrix phase transition.
    #[command(name = "phase-matrix", args_override_self = true)]
    PhaseMatrix(PhaseMatrixArgs),
    /// Unfolding phase transition for a low-rank tensor.
    #[command(name = "phase-tensor", args_override_self = true)]
    PhaseTensor(PhaseTensorArgs),
    /// Relative error of denoising methods over λ and σ grids.
    #[command(args_override_self = true)]
    Sweep(SweepArgs),
}

// Aliases keep clap from treating these as repeated single-value flags.
type Grid = Vec<f64>;
type Dims = Vec<usize>;
type Methods = Vec<Method>;

/// A list `a,b,c` or a log-spaced grid `lo:hi:n`.
fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| format!("invalid number {t:?}"));
    let grid = match parts.as_slice() {
        [lo, hi, n] => {
            let (lo, hi) = (num(lo)?, num(hi)?);
            let n: usize = n.trim().parse().map_err(|_| format!("invalid point count {n:?}"))?;
            if !(lo > 0.0 && hi > 0.0) || n == 0 {
                return Err("log grid needs positive bounds and at least one point".into());
            }
            logspace(lo, hi, n)
        }
        [list] => list.split(',').map(num).collect::<Result<_, _>>()?,
        _ => return Err(format!("expected `a,b,c` or `lo:hi:n`, found {s:?}")),
    };
    if grid.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err("grid values must be finite and non-negative".into());
    }
    Ok(grid)
}

fn parse_dims(s: &str) -> Result<Vec<usize>, String> {
    let dims: Vec<usize> =
        s.split(',').map(|t| t.trim().parse().map_err(|_| format!("invalid dimension {t:?}"))).collect::<Result<_, _>>()?;
    if dims.contains(&0) {
        return Err("dimensions must be positive".into());
    }
    Ok(dims)
}

fn parse_betas(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|t| t.trim().parse().map_err(|_| format!("invalid number {t:?}"))).collect()
}

fn parse_methods(s: &str) -> Result<Vec<Method>, String> {
    s.split(',').map(|t| t.trim().parse()).collect()
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, value_parser = parse_dims, default_value = "20,30,40")]
    dims: Dims,
    /// Component strengths, descending.
    #[arg(long, value_parser = parse_betas, default_value = "20,10")]
    betas: Grid,
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Draw factor columns as independent unit vectors instead of orthonormal sets.
    #[arg(long)]
    unit_factors: bool,
    /// Noisy tensor; stdout when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Also write the noiseless tensor here.
    #[arg(long, value_name = "PATH")]
    truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DenoiseArgs {
    #[arg(long = "in", value_name = "PATH")]
    input: PathBuf,
    /// Estimate; stdout when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, default_value = "subspace")]
    method: Method,
    /// Regularisation weight (norm-based methods).
    #[arg(long)]
    lambda: Option<f64>,
    /// Subspace dimension per mode.
    #[arg(long = "H", alias = "h", default_value_t = 2)]
    h: usize,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Keep the subspace solver's step size at --eta instead of adapting it.
    #[arg(long)]
    fixed_eta: bool,
    /// CP rank.
    #[arg(long)]
    rank: Option<usize>,
    /// CP ridge weight.
    #[arg(long, default_value_t = 0.0)]
    l2: f64,
    /// CP random restarts.
    #[arg(long, default_value_t = 20)]
    inits: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Exit with status 3 if the solver does not converge.
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args)]
struct PhaseMatrixArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 10_000)]
    m: usize,
    /// β/σ grid; 24 log-spaced points over [0.25, 8] (nm)^{1/4} by default.
    #[arg(long, value_parser = parse_grid)]
    snr: Option<Grid>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PhaseTensorArgs {
    #[arg(long, value_parser = parse_dims, default_value = "20,40,60")]
    dims: Dims,
    #[arg(long, value_parser = parse_betas, default_value = "20,10")]
    betas: Grid,
    /// σ grid; by default log-spaced so σ (∏ n_k)^{1/4} covers [0.1 min β, 3 max β].
    #[arg(long, value_parser = parse_grid)]
    sigmas: Option<Grid>,
    /// Size of the default σ grid.
    #[arg(long, default_value_t = 30)]
    points: usize,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, value_parser = parse_dims, default_value = "20,30,40")]
    dims: Dims,
    #[arg(long, value_parser = parse_betas, default_value = "20,10")]
    betas: Grid,
    #[arg(long = "H", alias = "h", default_value_t = 2)]
    h: usize,
    #[arg(long, value_parser = parse_methods, default_value = "subspace,overlapped")]
    methods: Methods,
    #[arg(long, value_parser = parse_grid, default_value = "1:100:20")]
    lambdas: Grid,
    #[arg(long, value_parser = parse_grid, default_value = "0.05:8:20")]
    sigmas: Grid,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Skip the extra subspace row at the theoretical λ.
    #[arg(long)]
    no_theory: bool,
    #[arg(long, default_value_t = 1.0)]
    eta: f64,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 2000)]
    max_iter: usize,
    /// Keep the subspace solver's step size at --eta instead of adapting it.
    #[arg(long)]
    fixed_eta: bool,
    /// Tolerance of the overlapped and latent solvers.
    #[arg(long, default_value_t = 1e-5)]
    trace_tol: f64,
    #[arg(long, default_value_t = 2000)]
    trace_max_iter: usize,
    /// CP rank; the number of betas by default.
    #[arg(long)]
    cp_rank: Option<usize>,
    #[arg(long, default_value_t = 20)]
    cp_inits: usize,
    #[arg(long, value_parser = parse_grid, default_value = "0.01:10:20")]
    cp_l2: Grid,
    #[arg(long, default_value_t = 500)]
    cp_max_sweeps: usize,
    /// Exit with status 3 if any solve does not converge.
    #[arg(long)]
    strict: bool,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    NotConverged(String),
    Runtime(String),
}

impl Failure {
    fn runtime(e: impl std::fmt::Display) -> Self {
        Failure::Runtime(e.to_string())
    }
}

/// Runs the tool on `args` (program name first) and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let args = match with_config(args) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::NotConverged(msg)) => {
            eprintln!("error: {msg}");
            EXIT_NOT_CONVERGED
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            EXIT_FAILURE
        }
    }
}

/// Splices the flags from `--config PATH` in right after the subcommand name.
fn with_config(mut args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let mut path = None;
    let mut sub_pos = None;
    let mut i = 1;
    while i < args.len() {
        let a = args[i].to_string_lossy();
        if a == "--" {
            break;
        } else if a == "--config" {
            path = args.get(i + 1).map(PathBuf::from);
            i += 1;
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        } else if sub_pos.is_none() && !a.starts_with('-') {
            sub_pos = Some(i);
        }
        i += 1;
    }
    let (Some(path), Some(pos)) = (path, sub_pos) else {
        return Ok(args);
    };
    let extra = read_config(&path).map_err(|e| e.to_string())?;
    args.splice(pos + 1..pos + 1, extra.into_iter().map(OsString::from));
    Ok(args)
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    let timing = cli.timing;
    match cli.command {
        Command::Gen(a) => gen(a),
        Command::Denoise(a) => denoise(a),
        Command::PhaseMatrix(a) => {
            let mut cfg = MatrixPhaseConfig::new(a.n, a.m, a.seed);
            if a.n > a.m {
                return Err(Failure::Usage(format!("--n ({}) must not exceed --m ({})", a.n, a.m)));
            }
            cfg.snr_grid = a.snr.unwrap_or_else(|| default_snr_grid(a.n, a.m));
            cfg.trials = a.trials;
            cfg.timing = timing;
            let recs = matrix_phase_sweep(&cfg).map_err(Failure::runtime)?;
            emit_csv(&recs, a.out.as_deref(), timing)
        }
        Command::PhaseTensor(a) => {
            let mut cfg = TensorPhaseConfig::new(&a.dims, &a.betas, a.seed);
            cfg.sigma_grid = a.sigmas.unwrap_or_else(|| default_tensor_sigma_grid(&a.dims, &a.betas, a.points));
            cfg.trials = a.trials;
            cfg.timing = timing;
            let recs = tensor_phase_sweep(&cfg).map_err(Failure::runtime)?;
            emit_csv(&recs, a.out.as_deref(), timing)
        }
        Command::Sweep(a) => sweep(a, timing),
    }
}

fn gen(a: GenArgs) -> Result<(), Failure> {
    let mut spec = SyntheticSpec::new(&a.dims, &a.betas, a.sigma, a.seed);
    spec.orthonormal_factors = !a.unit_factors;
    let inst = gen_synthetic(&spec).map_err(|e| Failure::Usage(e.to_string()))?;
    if let Some(path) = &a.truth {
        write_tensor(&inst.truth, path).map_err(Failure::runtime)?;
    }
    emit_tensor(&inst.observed, a.out.as_deref())
}

fn denoise(a: DenoiseArgs) -> Result<(), Failure> {
    let y = read_tensor(&a.input).map_err(Failure::runtime)?;
    let lambda = || a.lambda.ok_or_else(|| Failure::Usage(format!("--lambda is required for --method {}", a.method.as_str())));
    let (estimate, iterations, converged) = match a.method {
        Method::Subspace => {
            let d = AdmmOptions::default();
            let opts = AdmmOptions {
                eta: a.eta.unwrap_or(d.eta),
                tol: a.tol.unwrap_or(d.tol),
                max_iter: a.max_iter.unwrap_or(d.max_iter),
                adaptive: !a.fixed_eta,
            };
            let bases = build_bases(&y, a.h).map_err(|e| Failure::Usage(e.to_string()))?;
            let sol = admm_denoise(&y, &bases, lambda()?, &opts).map_err(Failure::runtime)?;
            (sol.estimate, sol.diagnostics.iterations, sol.diagnostics.converged)
        }
        Method::Overlapped | Method::Latent => {
            let d = TraceNormOptions::default();
            let opts = TraceNormOptions {
                eta: a.eta.unwrap_or(d.eta),
                tol: a.tol.unwrap_or(d.tol),
                max_iter: a.max_iter.unwrap_or(d.max_iter),
            };
            let sol = if a.method == Method::Overlapped {
                overlapped_denoise(&y, lambda()?, &opts)
            } else {
                latent_denoise(&y, lambda()?, &opts)
            }
            .map_err(Failure::runtime)?;
            (sol.estimate, sol.diagnostics.iterations, sol.diagnostics.converged)
        }
        Method::Cp => {
            let rank = a.rank.ok_or_else(|| Failure::Usage("--rank is required for --method cp".into()))?;
            let d = CpOptions::default();
            let opts = CpOptions {
                l2_reg: a.l2,
                tol: a.tol.unwrap_or(d.tol),
                max_sweeps: a.max_iter.unwrap_or(d.max_sweeps),
            };
            let fit = cp_als(&y, rank, a.inits, a.seed, &opts).map_err(|e| Failure::Usage(e.to_string()))?;
            let converged = fit.sweeps < opts.max_sweeps;
            (fit.model.to_tensor().map_err(Failure::runtime)?, fit.sweeps, converged)
        }
    };
    emit_tensor(&estimate, a.out.as_deref())?;
    eprintln!("method={} iterations={iterations} converged={converged}", a.method.as_str());
    if a.strict && !converged {
        return Err(Failure::NotConverged(format!("{} solver did not converge in {iterations} iterations", a.method.as_str())));
    }
    Ok(())
}

fn sweep(a: SweepArgs, timing: bool) -> Result<(), Failure> {
    let mut cfg = DenoiseConfig::new(a.seed);
    cfg.dims = a.dims;
    cfg.betas = a.betas;
    cfg.h = a.h;
    cfg.methods = a.methods;
    cfg.lambda_grid = a.lambdas;
    cfg.sigma_grid = a.sigmas;
    cfg.trials = a.trials;
    cfg.theory_lambda = !a.no_theory;
    cfg.admm = AdmmOptions { eta: a.eta, tol: a.tol, max_iter: a.max_iter, adaptive: !a.fixed_eta };
    cfg.trace = TraceNormOptions { eta: a.eta, tol: a.trace_tol, max_iter: a.trace_max_iter };
    cfg.cp = CpSettings {
        rank: a.cp_rank,
        n_inits: a.cp_inits,
        l2_grid: a.cp_l2,
        opts: CpOptions { max_sweeps: a.cp_max_sweeps, ..CpOptions::default() },
    };
    cfg.timing = timing;
    let recs = denoise_sweep(&cfg).map_err(|e| Failure::Usage(e.to_string()))?;
    emit_csv(&recs, a.out.as_deref(), timing)?;
    let stalled = recs.iter().filter(|r| r.converged == Some(false)).count();
    if a.strict && stalled > 0 {
        return Err(Failure::NotConverged(format!("{stalled} of {} solves did not converge", recs.len())));
    }
    Ok(())
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit_csv(records: &[ExperimentRecord], out: Option<&Path>, timing: bool) -> Result<(), Failure> {
    write_csv(records, open_out(out)?, timing).map_err(Failure::runtime)
}

fn emit_tensor(x: &Tensor, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(p) => write_tensor(x, p).map_err(Failure::runtime),
        None => {
            let mut w = open_out(None)?;
            w.write_all(format_tensor(x).as_bytes()).and_then(|_| w.flush()).map_err(Failure::runtime)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("1,2.5").unwrap(), vec![1.0, 2.5]);
        let g = parse_grid("1:100:3").unwrap();
        assert!((g[1] - 10.0).abs() < 1e-12);
        assert!(parse_grid("0:1:3").is_err());
        assert!(parse_grid("1:2").is_err());
        assert!(parse_grid("a").is_err());
    }

    #[test]
    fn config_goes_after_the_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.cfg");
        std::fs::write(&path, "trials = 3\n").unwrap();
        let args: Vec<OsString> =
            ["subnorm", "--config", path.to_str().unwrap(), "sweep", "--trials", "4"].iter().map(OsString::from).collect();
        let out = with_config(args).unwrap();
        let out: Vec<String> = out.iter().map(|a| a.to_string_lossy().into_owned()).collect();
        assert_eq!(&out[3..], ["sweep", "--trials", "3", "--trials", "4"]);
        let cli = Cli::try_parse_from(out).unwrap();
        match cli.command {
            Command::Sweep(a) => assert_eq!(a.trials, 4),
            other => panic!("unexpected {other:?}"),
        }
    }
}
