//! Drive the CMDP environment with a fixed policy and print rewards,
//! costs and headway along the way.
//!
//! The predictor here is a calibrated-by-hand IDM; the policy simply
//! follows it, which is what a perfectly human-like agent would do.
//!
//! ```text
//! cargo run --release --example env_rollout
//! ```

use adaptive_autopilot::baselines::IdmParams;
use adaptive_autopilot::env::{rollout_csv, CarFollowingEnv, EnvConfig, RolloutRow};
use adaptive_autopilot::trajectory::generate_synthetic_episode;
use adaptive_autopilot::DrivingStyle;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trace = generate_synthetic_episode(DrivingStyle::Aggressive, 3, 20.0)?;
    let predictor = IdmParams::for_style(DrivingStyle::Aggressive);
    let cfg = EnvConfig::default().with_rate_limit(true);
    let mut env = CarFollowingEnv::new(cfg, &predictor)?;

    let mut state = env.reset(&trace)?;
    let mut rows = Vec::new();
    let (mut ret, mut cost, mut t) = (0.0, 0.0, 0.0);
    while !env.is_done() {
        // Follow the predictor, with a small offset to make r_h visible.
        let action = env.predicted_accel() + 0.1;
        let r = env.step(action)?;
        t += env.config().dt;
        rows.push(RolloutRow::from_step(t, &state, &r));
        ret += r.reward.total;
        cost += r.cost;
        state = r.state;
        if r.info.collision {
            println!("collision at t = {t:.2} s");
        }
    }
    for row in rows.iter().step_by(25) {
        println!(
            "t {:>5.2}  headway {:>5.2} s  applied {:+.2}  r_h {:+.3}  r_c {:+.3}  cost {}",
            row.t, row.headway, row.ego_accel_applied, row.r_h, row.r_c, row.cost
        );
    }
    println!("{} steps, return {ret:.2}, violations {cost}", rows.len());
    let csv = rollout_csv(&rows, &[]);
    println!("csv header: {}", csv.lines().next().unwrap_or_default());
    Ok(())
}
