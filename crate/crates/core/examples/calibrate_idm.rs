//! Fit IDM parameters to recorded accelerations by minimising the mean
//! absolute error, starting from deliberately wrong parameters.
//!
//! ```text
//! cargo run --release --example calibrate_idm
//! ```

use adaptive_autopilot::baselines::{calibrate_idm_mae, idm_mae, idm_samples, CalibrationConfig, IdmBounds, IdmParams};
use adaptive_autopilot::trajectory::{generate_synthetic_episode_with, synthetic_time_gap, SyntheticConfig};
use adaptive_autopilot::DrivingStyle;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let style = DrivingStyle::Aggressive;
    for noise_std in [0.0, 0.05] {
        let cfg = SyntheticConfig {
            noise_std,
            ..SyntheticConfig::default()
        };
        let mut samples = Vec::new();
        for seed in 0..15 {
            samples.extend(idm_samples(&generate_synthetic_episode_with(&cfg, style, seed, 20.0)?));
        }
        let init = IdmParams::default();
        let fit = calibrate_idm_mae(&samples, &init, &IdmBounds::default(), &CalibrationConfig::default())?;
        println!("noise {noise_std}: {} samples", samples.len());
        println!("  initial MAE    {:.4}", idm_mae(&init, &samples));
        println!("  calibrated MAE {:.4} after {} evaluations", fit.mae, fit.n_evals);
        println!(
            "  time gap {:.3} s (generator {}), v0 {:.1}, s0 {:.2}, a {:.2}, b {:.2}",
            fit.params.time_gap,
            synthetic_time_gap(style),
            fit.params.v0,
            fit.params.s0,
            fit.params.a_max,
            fit.params.b_comf
        );
    }
    Ok(())
}
