//! The observation window shared by every acceleration predictor.

/// Lead history over the three most recent samples (`[t-2dt, t-dt, t]`)
/// and the current ego state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FollowWindow {
    pub lead_accel: [f64; 3],
    pub lead_speed: [f64; 3],
    pub ego_speed: f64,
    pub gap: f64,
}

impl FollowWindow {
    pub fn lead_speed_now(&self) -> f64 {
        self.lead_speed[2]
    }

    /// `v_ego - v_lead`, the closing rate used by IDM.
    pub fn approach_rate(&self) -> f64 {
        self.ego_speed - self.lead_speed[2]
    }
}

/// Anything that maps a car-following window to an ego acceleration.
pub trait AccelPredictor {
    fn predict(&self, window: &FollowWindow) -> f64;
}

impl<F> AccelPredictor for F
where
    F: Fn(&FollowWindow) -> f64,
{
    fn predict(&self, window: &FollowWindow) -> f64 {
        self(window)
    }
}
