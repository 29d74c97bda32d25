//! Predictor robustness to model error: the compensators run on a perturbed
//! nominal model while the true plant stays fixed, and circular tracking must
//! still converge with steady contour RMS under 5 cm.

use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use delaydrive::config::{PlantConfig, ScenarioConfig};
use delaydrive::metrics::compute_metrics;
use delaydrive::runner;

fn circle_cfg() -> ScenarioConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/circle_sp.toml");
    ScenarioConfig::from_path(&path).unwrap()
}

fn run_with_nominal(nominal: PlantConfig) -> (Option<f64>, Option<f64>) {
    let mut cfg = circle_cfg();
    cfg.nominal = Some(nominal);
    let trace = runner::run(&cfg).unwrap();
    let m = compute_metrics(&trace, &cfg.trajectory());
    (m.settling_time_s, m.contour_rms_m)
}

#[test]
fn random_ten_percent_model_error_still_converges() {
    let truth = circle_cfg().plant;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for trial in 0..6 {
        let mut d = || 1.0 + rng.random_range(-0.10..=0.10);
        let nominal = PlantConfig {
            num1: truth.num1 * d(),
            num0: truth.num0 * d(),
            den1: truth.den1 * d(),
            den0: truth.den0 * d(),
            tau_s: truth.tau_s,
        };
        let (settle, rms) = run_with_nominal(nominal);
        let settle = settle.unwrap_or(f64::INFINITY);
        let rms = rms.unwrap_or(f64::INFINITY);
        assert!(
            settle.is_finite() && rms < 0.05,
            "trial {trial}: settle {settle} s, steady rms {rms} m with nominal {nominal:?}"
        );
    }
}

#[test]
fn extreme_corners_of_the_error_box_still_converge() {
    let truth = circle_cfg().plant;
    // All-high and all-low corners bound the per-coefficient error box.
    for scale in [0.9, 1.1] {
        let nominal = PlantConfig {
            num1: truth.num1 * scale,
            num0: truth.num0 * scale,
            den1: truth.den1 * scale,
            den0: truth.den0 * scale,
            tau_s: truth.tau_s,
        };
        let (settle, rms) = run_with_nominal(nominal);
        let settle = settle.unwrap_or(f64::INFINITY);
        let rms = rms.unwrap_or(f64::INFINITY);
        assert!(
            settle.is_finite() && rms < 0.05,
            "scale {scale}: settle {settle} s, steady rms {rms} m"
        );
    }
}
