//! Point-mass longitudinal kinematics: headway, relative velocity, jerk,
//! the constant-acceleration motion update and action-rate limiting.

use thiserror::Error;

/// Ego speeds at or below this are treated as standstill by [`headway`].
pub const MIN_EGO_SPEED: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("ego speed {0} m/s is too small to define a time headway")]
    ZeroEgoSpeed(f64),
}

/// Position, speed and acceleration of one vehicle along the lane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehiclePoint {
    pub pos: f64,
    pub speed: f64,
    pub accel: f64,
}

impl VehiclePoint {
    pub fn new(pos: f64, speed: f64, accel: f64) -> Self {
        Self { pos, speed, accel }
    }

    /// Sanity check used for recorded data: non-negative speed and
    /// `|accel| <= 10`.
    pub fn is_plausible(&self) -> bool {
        self.pos.is_finite()
            && self.speed.is_finite()
            && self.speed >= 0.0
            && self.accel.is_finite()
            && self.accel.abs() <= 10.0
    }
}

/// Admissible acceleration range and per-step change limit.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct ActionLimits {
    pub min_accel: f64,
    pub max_accel: f64,
    pub max_delta: f64,
    pub delta_enabled: bool,
}

impl Default for ActionLimits {
    fn default() -> Self {
        Self {
            min_accel: -4.0,
            max_accel: 4.0,
            max_delta: 0.24,
            delta_enabled: true,
        }
    }
}

impl ActionLimits {
    pub fn is_valid(&self) -> bool {
        self.min_accel < self.max_accel && self.max_delta > 0.0
    }

    pub fn with_delta(mut self, enabled: bool) -> Self {
        self.delta_enabled = enabled;
        self
    }
}

/// Time headway `gap / ego_speed` in seconds.
pub fn headway(gap: f64, ego_speed: f64) -> Result<f64, KinematicsError> {
    if ego_speed <= MIN_EGO_SPEED {
        return Err(KinematicsError::ZeroEgoSpeed(ego_speed));
    }
    Ok(gap / ego_speed)
}

/// Lead speed minus ego speed; positive when the gap is opening.
pub fn relative_velocity(lead_speed: f64, ego_speed: f64) -> f64 {
    lead_speed - ego_speed
}

pub fn jerk(accel_now: f64, accel_prev: f64, dt: f64) -> f64 {
    debug_assert!(dt > 0.0);
    (accel_now - accel_prev) / dt
}

/// Advance a vehicle by `dt` under constant acceleration.
///
/// Speed is floored at zero. When the vehicle would stop inside the step the
/// displacement is the exact stopping distance `v² / (2|a|)` rather than the
/// (reversing) quadratic.
pub fn step_motion(p: VehiclePoint, accel: f64, dt: f64) -> VehiclePoint {
    debug_assert!(dt > 0.0);
    let speed = p.speed + accel * dt;
    if speed >= 0.0 {
        VehiclePoint {
            pos: p.pos + p.speed * dt + 0.5 * accel * dt * dt,
            speed,
            accel,
        }
    } else {
        // accel < 0 here because p.speed >= 0.
        VehiclePoint {
            pos: p.pos + p.speed * p.speed / (2.0 * -accel),
            speed: 0.0,
            accel,
        }
    }
}

/// Closest admissible acceleration to `proposed` given the previous applied
/// acceleration.
pub fn clamp_action(prev: f64, proposed: f64, lim: &ActionLimits) -> f64 {
    let (mut lo, mut hi) = (lim.min_accel, lim.max_accel);
    if lim.delta_enabled {
        lo = lo.max(prev - lim.max_delta);
        hi = hi.min(prev + lim.max_delta);
    }
    if lo > hi {
        // prev outside the range; fall back to the nearest range bound
        return prev.clamp(lim.min_accel, lim.max_accel);
    }
    proposed.clamp(lo, hi)
}
