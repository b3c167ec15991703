//! Constant-acceleration stepping, headway and the action rate limit.
//!
//! ```text
//! cargo run --example kinematics
//! ```

use adaptive_autopilot::kinematics::{clamp_action, headway, jerk, relative_velocity, step_motion, ActionLimits, VehiclePoint};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dt = 0.08;
    let mut lead = VehiclePoint::new(30.0, 20.0, 0.0);
    let mut ego = VehiclePoint::new(0.0, 22.0, 0.0);
    let limits = ActionLimits::default().with_delta(true);

    println!("{:>5} {:>8} {:>8} {:>8} {:>7}", "t", "gap", "headway", "accel", "jerk");
    let mut prev = ego.accel;
    for k in 0..40 {
        // Brake hard on request; the rate limit spreads it over several steps.
        let wanted = if k < 5 { 0.0 } else { -3.0 };
        let a = clamp_action(prev, wanted, &limits);
        lead = step_motion(lead, 0.0, dt);
        ego = step_motion(ego, a, dt);
        let gap = lead.pos - ego.pos;
        if k % 5 == 4 {
            println!(
                "{:>5.2} {:>8.2} {:>8.3} {:>8.2} {:>7.2}",
                (k + 1) as f64 * dt,
                gap,
                headway(gap, ego.speed)?,
                a,
                jerk(a, prev, dt)
            );
        }
        prev = a;
    }
    println!("relative velocity at the end: {:+.2} m/s", relative_velocity(lead.speed, ego.speed));

    // A vehicle that would stop mid-step stops exactly at v^2 / (2|a|).
    let stopped = step_motion(VehiclePoint::new(0.0, 1.0, 0.0), -4.0, 1.0);
    println!("stop test: pos {:.4} m, speed {}", stopped.pos, stopped.speed);
    Ok(())
}
