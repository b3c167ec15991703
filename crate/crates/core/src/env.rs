//! The car-following CMDP: the lead vehicle is replayed from a trace, the
//! ego vehicle follows the agent's clamped accelerations, the reward mixes
//! similarity to a frozen acceleration predictor with ride comfort, and the
//! cost flags headway violations.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{self, ActionLimits, VehiclePoint};
use crate::predictor::{AccelPredictor, FollowWindow};
use crate::trajectory::{min_steps, EpisodeTrace, MIN_EPISODE_SECONDS, TRAINING_DT};

pub const STATE_DIM: usize = 6;
/// Ego speed floor used when forming the state headway, so the state stays
/// finite when the ego vehicle stops.
pub const STATE_SPEED_FLOOR: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("trace has {got} steps, need at least {min}")]
    TraceTooShort { got: usize, min: usize },
    #[error("trace dt {trace} s does not match environment dt {env} s")]
    DtMismatch { trace: f64, env: f64 },
    #[error("step called on a finished episode")]
    StepAfterDone,
    #[error("step called before reset")]
    NotReset,
    #[error("action {0} is not finite")]
    NonFiniteAction(f64),
    #[error("invalid environment configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SafetyConfig {
    /// Minimum safe headway, s.
    pub omega: f64,
    /// Cost marks headways below `omega`; `false` flips to above.
    pub violation_is_below: bool,
}

impl Default for SafetyConfig {
    fn default() -> Self {
        Self {
            omega: 1.0,
            violation_is_below: true,
        }
    }
}

/// Four-parameter-logistic comfort penalty shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ComfortShape {
    /// Jerk at half penalty, m/s³.
    pub c: f64,
    pub b: f64,
}

impl Default for ComfortShape {
    fn default() -> Self {
        Self { c: 0.9, b: 2.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub dt: f64,
    pub limits: ActionLimits,
    pub safety: SafetyConfig,
    pub comfort: ComfortShape,
    /// Trace index the episode starts at; at least 2 for predictor history.
    pub start_index: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            dt: TRAINING_DT,
            limits: ActionLimits::default(),
            safety: SafetyConfig::default(),
            comfort: ComfortShape::default(),
            start_index: 2,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: &str| Err(EnvError::InvalidConfig(m.to_string()));
        if !(self.dt > 0.0) {
            return bad("dt must be positive");
        }
        if !self.limits.is_valid() {
            return bad("invalid action limits");
        }
        if !(self.safety.omega > 0.0) {
            return bad("omega must be positive");
        }
        if !(self.comfort.c > 0.0 && self.comfort.b > 0.0) {
            return bad("comfort shape parameters must be positive");
        }
        if self.start_index < 2 {
            return bad("start_index must be at least 2");
        }
        Ok(())
    }

    pub fn with_rate_limit(mut self, on: bool) -> Self {
        self.limits.delta_enabled = on;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CmdpState {
    pub lead_accel: f64,
    pub headway: f64,
    pub ego_speed: f64,
    pub rel_velocity: f64,
    pub prev_action: f64,
    pub cost_indicator: f64,
}

impl CmdpState {
    pub fn to_array(&self) -> [f64; STATE_DIM] {
        [
            self.lead_accel,
            self.headway,
            self.ego_speed,
            self.rel_velocity,
            self.prev_action,
            self.cost_indicator,
        ]
    }

    pub fn from_array(a: [f64; STATE_DIM]) -> Self {
        Self {
            lead_accel: a[0],
            headway: a[1],
            ego_speed: a[2],
            rel_velocity: a[3],
            prev_action: a[4],
            cost_indicator: a[5],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_h: f64,
    pub r_c: f64,
    pub total: f64,
}

/// Similarity reward: 1 at zero error, falling towards -1.
pub fn reward_human(action: f64, predicted: f64) -> f64 {
    let xi = (action - predicted).abs();
    2.0 * (-2.0 * xi).tanh() + 1.0
}

/// Comfort penalty: 0 at zero jerk, -0.5 at `|jerk| = c`, towards -1.
pub fn reward_comfort(jerk: f64, shape: &ComfortShape) -> f64 {
    -1.0 + 1.0 / (1.0 + (jerk.abs() / shape.c).powf(shape.b))
}

/// 1 when the headway violates the safety threshold. The boundary is safe.
pub fn cost_indicator(headway: f64, cfg: &SafetyConfig) -> f64 {
    let violated = if cfg.violation_is_below {
        headway < cfg.omega
    } else {
        headway > cfg.omega
    };
    if violated {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepInfo {
    pub collision: bool,
    /// Trace ended without a collision.
    pub truncated: bool,
    /// Predictor output for the returned state.
    pub predicted_accel: f64,
    /// Predictor output the reward compared the action against.
    pub target_accel: f64,
    pub applied_action: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub state: CmdpState,
    pub reward: RewardBreakdown,
    pub cost: f64,
    pub done: bool,
    pub info: StepInfo,
}

/// One row of an exported rollout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RolloutRow {
    pub t: f64,
    pub lead_accel: f64,
    pub ego_accel_applied: f64,
    pub predicted_accel: f64,
    pub headway: f64,
    pub ego_speed: f64,
    pub rel_velocity: f64,
    pub r_h: f64,
    pub r_c: f64,
    pub cost: f64,
}

impl RolloutRow {
    pub fn from_step(t: f64, prev_state: &CmdpState, r: &StepResult) -> Self {
        Self {
            t,
            lead_accel: prev_state.lead_accel,
            ego_accel_applied: r.info.applied_action,
            predicted_accel: r.info.target_accel,
            headway: r.state.headway,
            ego_speed: r.state.ego_speed,
            rel_velocity: r.state.rel_velocity,
            r_h: r.reward.r_h,
            r_c: r.reward.r_c,
            cost: r.cost,
        }
    }
}

pub fn rollout_csv(rows: &[RolloutRow], preamble: &[String]) -> String {
    let mut out = String::new();
    for l in preamble {
        let _ = writeln!(out, "# {l}");
    }
    out.push_str("t,lead_accel,ego_accel_applied,predicted_accel,headway,ego_speed,rel_velocity,r_h,r_c,cost\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.t, r.lead_accel, r.ego_accel_applied, r.predicted_accel, r.headway, r.ego_speed, r.rel_velocity, r.r_h, r.r_c, r.cost
        );
    }
    out
}

/// Fewest trace steps an episode may have, whatever the sampling interval.
pub const MIN_ENV_STEPS: usize = 125;

/// Minimum number of trace steps an episode needs.
pub fn min_env_steps(dt: f64) -> usize {
    min_steps(MIN_EPISODE_SECONDS, dt).max(MIN_ENV_STEPS)
}

/// Single-episode simulator over one trace.
pub struct CarFollowingEnv<'a> {
    cfg: EnvConfig,
    predictor: &'a dyn AccelPredictor,
    trace: Option<&'a EpisodeTrace>,
    cursor: usize,
    ego: VehiclePoint,
    prev_action: f64,
    predicted: f64,
    state: CmdpState,
    done: bool,
}

impl<'a> CarFollowingEnv<'a> {
    pub fn new(cfg: EnvConfig, predictor: &'a dyn AccelPredictor) -> Result<Self, EnvError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            predictor,
            trace: None,
            cursor: 0,
            ego: VehiclePoint::new(0.0, 0.0, 0.0),
            prev_action: 0.0,
            predicted: 0.0,
            state: CmdpState::from_array([0.0; STATE_DIM]),
            done: true,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn set_rate_limit(&mut self, on: bool) {
        self.cfg.limits.delta_enabled = on;
    }

    pub fn state(&self) -> CmdpState {
        self.state
    }

    /// Predictor output for the current state.
    pub fn predicted_accel(&self) -> f64 {
        self.predicted
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn ego(&self) -> VehiclePoint {
        self.ego
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Steps left before the trace ends.
    pub fn remaining(&self) -> usize {
        self.trace.map_or(0, |t| t.len() - 1 - self.cursor)
    }

    pub fn reset(&mut self, trace: &'a EpisodeTrace) -> Result<CmdpState, EnvError> {
        if (trace.dt() - self.cfg.dt).abs() > 1e-12 {
            return Err(EnvError::DtMismatch {
                trace: trace.dt(),
                env: self.cfg.dt,
            });
        }
        let min = min_env_steps(self.cfg.dt).max(self.cfg.start_index + 2);
        if trace.len() < min {
            return Err(EnvError::TraceTooShort { got: trace.len(), min });
        }
        let i = self.cfg.start_index;
        let s = trace.steps()[i];
        self.trace = Some(trace);
        self.cursor = i;
        self.ego = s.ego();
        self.prev_action = s.ego_accel;
        self.done = false;
        self.refresh();
        Ok(self.state)
    }

    fn gap(&self) -> f64 {
        self.trace.expect("reset").steps()[self.cursor].lead_pos - self.ego.pos
    }

    fn refresh(&mut self) {
        let steps = self.trace.expect("reset").steps();
        let i = self.cursor;
        let s = &steps[i];
        let gap = self.gap();
        let headway = gap.max(0.0) / self.ego.speed.max(STATE_SPEED_FLOOR);
        self.state = CmdpState {
            lead_accel: s.lead_accel,
            headway,
            ego_speed: self.ego.speed,
            rel_velocity: kinematics::relative_velocity(s.lead_speed, self.ego.speed),
            prev_action: self.prev_action,
            cost_indicator: cost_indicator(headway, &self.cfg.safety),
        };
        let window = FollowWindow {
            lead_accel: [steps[i - 2].lead_accel, steps[i - 1].lead_accel, s.lead_accel],
            lead_speed: [steps[i - 2].lead_speed, steps[i - 1].lead_speed, s.lead_speed],
            ego_speed: self.ego.speed.max(STATE_SPEED_FLOOR),
            gap: gap.max(1e-6),
        };
        self.predicted = self.predictor.predict(&window);
    }

    pub fn step(&mut self, action_raw: f64) -> Result<StepResult, EnvError> {
        if self.trace.is_none() {
            return Err(EnvError::NotReset);
        }
        if self.done {
            return Err(EnvError::StepAfterDone);
        }
        if !action_raw.is_finite() {
            return Err(EnvError::NonFiniteAction(action_raw));
        }
        let dt = self.cfg.dt;
        let action = kinematics::clamp_action(self.prev_action, action_raw, &self.cfg.limits);
        let target = self.predicted;
        let r_h = reward_human(action, target);
        let r_c = reward_comfort(kinematics::jerk(action, self.prev_action, dt), &self.cfg.comfort);

        self.ego = kinematics::step_motion(self.ego, action, dt);
        self.prev_action = action;
        self.cursor += 1;
        self.refresh();

        let gap = self.gap();
        let collision = gap <= 0.0;
        let at_end = self.cursor + 1 >= self.trace.expect("reset").len();
        self.done = collision || at_end;
        let cost = if collision { 1.0 } else { self.state.cost_indicator };
        Ok(StepResult {
            state: self.state,
            reward: RewardBreakdown {
                r_h,
                r_c,
                total: r_h + r_c,
            },
            cost,
            done: self.done,
            info: StepInfo {
                collision,
                truncated: at_end && !collision,
                predicted_accel: self.predicted,
                target_accel: target,
                applied_action: action,
                gap,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::style::DrivingStyle;
    use crate::trajectory::{generate_synthetic_episode, EpisodeSource, TraceStep};
    use proptest::prelude::*;

    fn constant_trace(gap: f64, n: usize) -> EpisodeTrace {
        let steps = (0..n)
            .map(|i| {
                let x = 20.0 * 0.08 * i as f64;
                TraceStep {
                    lead_pos: x + gap,
                    lead_speed: 20.0,
                    lead_accel: 0.0,
                    ego_pos: x,
                    ego_speed: 20.0,
                    ego_accel: 0.0,
                }
            })
            .collect();
        EpisodeTrace::new(0.08, steps, 1, EpisodeSource::Recorded).unwrap()
    }

    #[test]
    fn reward_human_examples() {
        assert_eq!(reward_human(0.3, 0.3), 1.0);
        assert!((reward_human(1e6, 0.0) + 1.0).abs() < 1e-12);
        assert!((reward_human(0.5, 0.0) + 0.5231883119115297).abs() < 1e-12);
    }

    #[test]
    fn reward_comfort_examples() {
        let s = ComfortShape::default();
        assert_eq!(reward_comfort(0.0, &s), 0.0);
        assert!((reward_comfort(0.9, &s) + 0.5).abs() < 1e-12);
        assert!((reward_comfort(-1e9, &s) + 1.0).abs() < 1e-12);
        // (3/0.9)^2.5 = 20.2860...; -1 + 1/21.2860... = -0.953021
        let j = 0.24 / 0.08;
        assert!((reward_comfort(j, &s) + 0.953_020_810).abs() < 1e-8);
    }

    #[test]
    fn cost_examples() {
        let c = SafetyConfig::default();
        assert_eq!(cost_indicator(0.9, &c), 1.0);
        assert_eq!(cost_indicator(1.2, &c), 0.0);
        assert_eq!(cost_indicator(1.0, &c), 0.0);
        let flipped = SafetyConfig { violation_is_below: false, ..c };
        assert_eq!(cost_indicator(1.2, &flipped), 1.0);
    }

    #[test]
    fn reset_examples() {
        let zero = |_: &FollowWindow| 0.0;
        let mut env = CarFollowingEnv::new(EnvConfig::default(), &zero).unwrap();
        let tr = constant_trace(30.0, 130);
        let s = env.reset(&tr).unwrap().to_array();
        let want = [0.0, 1.5, 20.0, 0.0, 0.0, 0.0];
        assert!(s.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-12), "{s:?}");
        let tight = constant_trace(15.0, 130);
        assert_eq!(env.reset(&tight).unwrap().cost_indicator, 1.0);

        let steps = constant_trace(30.0, 130).steps()[..100].to_vec();
        let short = EpisodeTrace::new(0.1, steps, 1, EpisodeSource::Recorded).unwrap();
        let mut env10 = CarFollowingEnv::new(EnvConfig { dt: 0.1, ..EnvConfig::default() }, &zero).unwrap();
        assert!(matches!(env10.reset(&short), Err(EnvError::TraceTooShort { got: 100, .. })));
        assert!(matches!(env.reset(&short), Err(EnvError::DtMismatch { .. })));
    }

    #[test]
    fn step_examples() {
        let zero = |_: &FollowWindow| 0.0;
        let mut env = CarFollowingEnv::new(EnvConfig::default(), &zero).unwrap();
        let tr = constant_trace(30.0, 130);
        env.reset(&tr).unwrap();
        let r = env.step(0.0).unwrap();
        assert_eq!((r.reward.r_h, r.reward.r_c), (1.0, 0.0));
        assert!((r.state.headway - 1.5).abs() < 1e-12);

        let r = env.step(1.0).unwrap();
        assert!((r.info.applied_action - 0.24).abs() < 1e-15);
        assert!((r.reward.r_c + 0.953_020_810).abs() < 1e-8);

        let mut steps = 2;
        while !env.is_done() {
            env.step(0.0).unwrap();
            steps += 1;
        }
        assert_eq!(steps, 130 - 1 - 2);
        assert_eq!(env.step(0.0), Err(EnvError::StepAfterDone));
    }

    #[test]
    fn collision_terminates_with_cost() {
        let zero = |_: &FollowWindow| 4.0;
        let mut env = CarFollowingEnv::new(EnvConfig::default().with_rate_limit(false), &zero).unwrap();
        let tr = constant_trace(3.0, 130);
        env.reset(&tr).unwrap();
        let mut last = None;
        while !env.is_done() {
            last = Some(env.step(4.0).unwrap());
        }
        let last = last.unwrap();
        assert!(last.info.collision && !last.info.truncated);
        assert_eq!(last.cost, 1.0);
        assert_eq!(last.state.headway, 0.0);
    }

    #[test]
    fn replaying_recorded_accels_reproduces_positions() {
        let zero = |_: &FollowWindow| 0.0;
        for style in DrivingStyle::ALL {
            let ep = generate_synthetic_episode(style, 13, 10.0).unwrap();
            let mut env = CarFollowingEnv::new(EnvConfig::default().with_rate_limit(false), &zero).unwrap();
            env.reset(&ep).unwrap();
            let mut i = 2;
            while !env.is_done() {
                env.step(ep.steps()[i].ego_accel).unwrap();
                i += 1;
                assert!((env.ego().pos - ep.steps()[i].ego_pos).abs() <= 1e-6);
            }
            assert_eq!(i, ep.len() - 1);
        }
    }

    #[test]
    fn rollout_csv_has_one_row_per_step() {
        let zero = |_: &FollowWindow| 0.0;
        let mut env = CarFollowingEnv::new(EnvConfig::default(), &zero).unwrap();
        let tr = constant_trace(30.0, 130);
        let mut s = env.reset(&tr).unwrap();
        let mut rows = Vec::new();
        while !env.is_done() {
            let r = env.step(0.1).unwrap();
            rows.push(RolloutRow::from_step(env.cursor() as f64 * 0.08, &s, &r));
            s = r.state;
        }
        let csv = rollout_csv(&rows, &["seed=1".into()]);
        assert_eq!(csv.lines().count(), rows.len() + 2);
    }

    proptest! {
        #[test]
        fn reward_shapes(a in 0.0..8.0f64, b in 0.0..8.0f64, j in -50.0..50.0f64) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(hi - lo > 1e-9);
            prop_assert!(reward_human(lo, 0.0) > reward_human(hi, 0.0));
            let rh = reward_human(a, 0.0);
            prop_assert!(rh > -1.0 - 1e-15 && rh <= 1.0);
            let s = ComfortShape::default();
            prop_assert_eq!(reward_comfort(j, &s), reward_comfort(-j, &s));
            let rc = reward_comfort(j, &s);
            prop_assert!((-1.0..=0.0).contains(&rc));
            prop_assert!(reward_comfort(lo, &s) >= reward_comfort(hi, &s));
        }

        #[test]
        fn cost_is_monotone(h1 in 0.0..3.0f64, h2 in 0.0..3.0f64) {
            let c = SafetyConfig::default();
            let (lo, hi) = if h1 <= h2 { (h1, h2) } else { (h2, h1) };
            prop_assert!(cost_indicator(lo, &c) >= cost_indicator(hi, &c));
        }

        #[test]
        fn applied_actions_respect_limits(actions in proptest::collection::vec(-10.0..10.0f64, 1..120)) {
            let zero = |_: &FollowWindow| 0.0;
            let mut env = CarFollowingEnv::new(EnvConfig::default(), &zero).unwrap();
            let tr = constant_trace(40.0, 130);
            env.reset(&tr).unwrap();
            let mut prev = 0.0;
            let mut total = 0.0;
            let mut n = 0.0;
            for a in actions {
                if env.is_done() { break; }
                let r = env.step(a).unwrap();
                let u = r.info.applied_action;
                prop_assert!((-4.0..=4.0).contains(&u));
                prop_assert!((u - prev).abs() <= 0.24 + 1e-12);
                prev = u;
                total += r.reward.total;
                n += 1.0;
            }
            prop_assert!(total > -2.0 * n && total <= n);
        }
    }
}
