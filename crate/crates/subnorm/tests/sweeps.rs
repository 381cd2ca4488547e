use subnorm::record::{ExperimentRecord, LambdaRule};
use subnorm::sweeps::{denoise_sweep, logspace, tensor_phase_sweep, DenoiseConfig, Method, TensorPhaseConfig};

fn grid_errors(records: &[ExperimentRecord]) -> Vec<f64> {
    records
        .iter()
        .filter(|r| r.lambda_rule == Some(LambdaRule::Grid))
        .map(|r| r.relative_error.unwrap())
        .collect()
}

fn subspace_config(h: usize, lambdas: Vec<f64>, sigma: f64) -> DenoiseConfig {
    let mut cfg = DenoiseConfig::new(5);
    cfg.h = h;
    cfg.methods = vec![Method::Subspace];
    cfg.lambda_grid = lambdas;
    cfg.sigma_grid = vec![sigma];
    cfg.trials = 1;
    cfg.theory_lambda = false;
    cfg
}

#[test]
fn noiseless_tensor_phase_recovers_components() {
    let mut cfg = TensorPhaseConfig::new(&[20, 40, 60], &[20.0, 10.0], 3);
    cfg.sigma_grid = vec![0.0];
    cfg.trials = 2;
    let records = tensor_phase_sweep(&cfg).unwrap();
    assert_eq!(records.len(), 4);
    for r in &records {
        assert!(r.inner.unwrap() >= 1.0 - 1e-8, "{:?}", r.inner);
    }
}

#[test]
fn noiseless_subspace_shrinks_each_component_by_lambda() {
    // Orthogonal-ish rank-2 signal: each singular value drops by lambda.
    let lambda = 1.0;
    let records = denoise_sweep(&subspace_config(2, vec![lambda], 0.0)).unwrap();
    let err = grid_errors(&records)[0];
    let expected = lambda * 2f64.sqrt() / (20f64.powi(2) + 10f64.powi(2)).sqrt();
    assert!((err - expected).abs() <= 0.05 * expected, "{err} vs {expected}");
}

fn best_mean_error(h: usize, lambdas: Vec<f64>, sigma: f64, trials: usize) -> f64 {
    let mut cfg = subspace_config(h, lambdas, sigma);
    cfg.trials = trials;
    let mut means = vec![0.0; cfg.lambda_grid.len()];
    for r in denoise_sweep(&cfg).unwrap().iter().filter(|r| r.lambda_rule == Some(LambdaRule::Grid)) {
        means[r.lambda_index.unwrap()] += r.relative_error.unwrap() / trials as f64;
    }
    means.into_iter().fold(f64::INFINITY, f64::min)
}

#[test]
fn over_specified_h_stays_close_with_tuned_lambda() {
    for sigma in [0.1, 0.3, 0.5] {
        let h2 = best_mean_error(2, logspace(1.0, 100.0, 20), sigma, 2);
        let h8 = best_mean_error(8, logspace(1.0, 1000.0, 20), sigma, 2);
        assert!(h8 <= 2.0 * h2 && h8 < 0.75, "sigma {sigma}: H=8 {h8} vs H=2 {h2}");
    }
}
