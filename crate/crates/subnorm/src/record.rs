//! One row per (grid point, trial[, method, λ, component]) and its CSV form.
//!
//! Columns, in order (empty cell = not applicable):
//!
//! | column | meaning |
//! |---|---|
//! | `sweep` | `matrix_phase`, `tensor_phase` or `denoise` |
//! | `dims` | dimensions joined by `;` |
//! | `betas` | signal strengths joined by `;` |
//! | `h` | subspace dimension (subspace method) or CP rank (cp method) |
//! | `method` | `top_singular`, `subspace`, `overlapped`, `latent` or `cp` |
//! | `lambda_rule` | `grid` or `theory` |
//! | `grid_index` | index into the SNR or σ grid |
//! | `lambda_index` | index into the λ grid (CP: the ℓ2 grid) |
//! | `trial` | trial number |
//! | `seed` | master seed of the sweep |
//! | `sigma` | noise standard deviation |
//! | `snr` | β/σ (matrix sweep) |
//! | `normalized_sigma` | σ (∏ n_k)^{1/4} (tensor sweep) |
//! | `lambda` | regularisation (CP: ℓ2 weight) |
//! | `component` | index r of the factor compared |
//! | `inner` | \|⟨u_r, û_r⟩\| |
//! | `one_minus_inner` | 1 − `inner` |
//! | `dist` | min(‖û − u‖, ‖û + u‖) |
//! | `relative_error` | ‖X̂ − X*‖_F / ‖X*‖_F |
//! | `optimistic_error` | σ √(R Σ n_k ln K) / ‖X*‖_F |
//! | `incoherence` | ρ̂ of the subspace solution |
//! | `iterations` | solver iterations (CP: sweeps) |
//! | `converged` | `true` or `false` |
//! | `wall_time` | seconds; only written when timing is enabled |
//!
//! Floats are written with 17 significant digits, list entries in shortest
//! round-trip form.

use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sweep {
    MatrixPhase,
    TensorPhase,
    Denoise,
}

impl Sweep {
    pub fn as_str(self) -> &'static str {
        match self {
            Sweep::MatrixPhase => "matrix_phase",
            Sweep::TensorPhase => "tensor_phase",
            Sweep::Denoise => "denoise",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaRule {
    Grid,
    Theory,
}

impl LambdaRule {
    pub fn as_str(self) -> &'static str {
        match self {
            LambdaRule::Grid => "grid",
            LambdaRule::Theory => "theory",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub sweep: Sweep,
    pub dims: Vec<usize>,
    pub betas: Vec<f64>,
    pub h: Option<usize>,
    pub method: &'static str,
    pub lambda_rule: Option<LambdaRule>,
    pub grid_index: usize,
    pub lambda_index: Option<usize>,
    pub trial: usize,
    pub seed: u64,
    pub sigma: f64,
    pub snr: Option<f64>,
    pub normalized_sigma: Option<f64>,
    pub lambda: Option<f64>,
    pub component: Option<usize>,
    pub inner: Option<f64>,
    pub one_minus_inner: Option<f64>,
    pub dist: Option<f64>,
    pub relative_error: Option<f64>,
    pub optimistic_error: Option<f64>,
    pub incoherence: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub wall_time: Option<f64>,
}

impl ExperimentRecord {
    pub fn new(sweep: Sweep, method: &'static str, dims: &[usize], betas: &[f64], seed: u64) -> Self {
        Self {
            sweep,
            dims: dims.to_vec(),
            betas: betas.to_vec(),
            h: None,
            method,
            lambda_rule: None,
            grid_index: 0,
            lambda_index: None,
            trial: 0,
            seed,
            sigma: 0.0,
            snr: None,
            normalized_sigma: None,
            lambda: None,
            component: None,
            inner: None,
            one_minus_inner: None,
            dist: None,
            relative_error: None,
            optimistic_error: None,
            incoherence: None,
            iterations: None,
            converged: None,
            wall_time: None,
        }
    }
}

pub const COLUMNS: [&str; 23] = [
    "sweep",
    "dims",
    "betas",
    "h",
    "method",
    "lambda_rule",
    "grid_index",
    "lambda_index",
    "trial",
    "seed",
    "sigma",
    "snr",
    "normalized_sigma",
    "lambda",
    "component",
    "inner",
    "one_minus_inner",
    "dist",
    "relative_error",
    "optimistic_error",
    "incoherence",
    "iterations",
    "converged",
];

pub const TIMING_COLUMN: &str = "wall_time";

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt<T>(v: Option<T>, f: impl FnOnce(T) -> String) -> String {
    v.map(f).unwrap_or_default()
}

fn list<T: ToString>(v: &[T]) -> String {
    v.iter().map(T::to_string).collect::<Vec<_>>().join(";")
}

fn fields(r: &ExperimentRecord, timing: bool) -> Vec<String> {
    let mut out = vec![
        r.sweep.as_str().to_string(),
        list(&r.dims),
        list(&r.betas),
        opt(r.h, |v| v.to_string()),
        r.method.to_string(),
        opt(r.lambda_rule, |v| v.as_str().to_string()),
        r.grid_index.to_string(),
        opt(r.lambda_index, |v| v.to_string()),
        r.trial.to_string(),
        r.seed.to_string(),
        float(r.sigma),
        opt(r.snr, float),
        opt(r.normalized_sigma, float),
        opt(r.lambda, float),
        opt(r.component, |v| v.to_string()),
        opt(r.inner, float),
        opt(r.one_minus_inner, float),
        opt(r.dist, float),
        opt(r.relative_error, float),
        opt(r.optimistic_error, float),
        opt(r.incoherence, float),
        opt(r.iterations, |v| v.to_string()),
        opt(r.converged, |v| v.to_string()),
    ];
    if timing {
        out.push(opt(r.wall_time, float));
    }
    out
}

/// Writes a header row and one row per record. `timing` adds the
/// `wall_time` column.
pub fn write_csv<W: Write>(records: &[ExperimentRecord], out: W, timing: bool) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = COLUMNS.to_vec();
    if timing {
        header.push(TIMING_COLUMN);
    }
    w.write_record(&header)?;
    for r in records {
        w.write_record(fields(r, timing))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_and_empty_cells() {
        let mut r = ExperimentRecord::new(Sweep::Denoise, "subspace", &[20, 30, 40], &[20.0, 10.0], 7);
        r.lambda = Some(1.5);
        r.converged = Some(true);
        let mut buf = Vec::new();
        write_csv(&[r.clone()], &mut buf, false).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), COLUMNS.join(","));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), COLUMNS.len());
        assert_eq!(&row[..6], &["denoise", "20;30;40", "20;10", "", "subspace", ""]);
        assert_eq!(row[13], "1.5000000000000000e0");
        assert_eq!(row[22], "true");

        let mut buf = Vec::new();
        write_csv(&[r], &mut buf, true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().next().unwrap().ends_with(",wall_time"));
        assert!(text.lines().nth(1).unwrap().ends_with(','));
    }
}
