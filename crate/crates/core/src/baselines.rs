//! Intelligent Driver Model baselines: closed-form acceleration, per-style
//! default parameters, MAE calibration and open-loop predictor rollouts.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{self, VehiclePoint};
use crate::kv::{self, KvError, KvMap};
use crate::predictor::{AccelPredictor, FollowWindow};
use crate::style::DrivingStyle;
use crate::trajectory::EpisodeTrace;

/// Predictor outputs are clamped to this magnitude.
pub const ACCEL_CLAMP: f64 = 4.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("gap must be positive, got {0} m")]
    NonPositiveGap(f64),
    #[error("calibration needs at least {min} samples, got {got}")]
    TooFewSamples { got: usize, min: usize },
    #[error("invalid IDM parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Kv(#[from] KvError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdmParams {
    /// Desired speed, m/s.
    pub v0: f64,
    /// Desired time gap, s.
    pub time_gap: f64,
    /// Standstill gap, m.
    pub s0: f64,
    pub a_max: f64,
    pub b_comf: f64,
    pub delta: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self::for_style(DrivingStyle::Normal)
    }
}

impl IdmParams {
    /// Library defaults per style; only the time gap differs.
    pub fn for_style(style: DrivingStyle) -> Self {
        let time_gap = match style {
            DrivingStyle::Aggressive => 0.9,
            DrivingStyle::Normal => 1.5,
            DrivingStyle::Conservative => 2.0,
        };
        Self {
            v0: 33.0,
            time_gap,
            s0: 2.0,
            a_max: 1.5,
            b_comf: 1.67,
            delta: 4.0,
        }
    }

    pub fn validate(&self) -> Result<(), BaselineError> {
        let all_positive = [self.v0, self.time_gap, self.s0, self.a_max, self.b_comf, self.delta]
            .iter()
            .all(|x| x.is_finite() && *x > 0.0);
        if !all_positive {
            return Err(BaselineError::InvalidParams("all parameters must be positive".into()));
        }
        if self.time_gap < 0.1 {
            return Err(BaselineError::InvalidParams("time_gap must be >= 0.1 s".into()));
        }
        if self.v0 < 1.0 {
            return Err(BaselineError::InvalidParams("v0 must be >= 1 m/s".into()));
        }
        Ok(())
    }

    fn to_vec(self) -> [f64; 5] {
        [self.v0, self.time_gap, self.s0, self.a_max, self.b_comf]
    }

    fn from_vec(x: [f64; 5], delta: f64) -> Self {
        Self {
            v0: x[0],
            time_gap: x[1],
            s0: x[2],
            a_max: x[3],
            b_comf: x[4],
            delta,
        }
    }

    pub const KEYS: [&'static str; 6] = ["v0", "time_gap", "s0", "a_max", "b_comf", "delta"];

    /// Parse a `key=value` params file; missing keys keep `base` values.
    pub fn from_kv(text: &str, base: IdmParams) -> Result<Self, BaselineError> {
        let m = KvMap::parse(text)?;
        m.check_keys(&Self::KEYS)?;
        let p = IdmParams {
            v0: m.parse_opt("v0")?.unwrap_or(base.v0),
            time_gap: m.parse_opt("time_gap")?.unwrap_or(base.time_gap),
            s0: m.parse_opt("s0")?.unwrap_or(base.s0),
            a_max: m.parse_opt("a_max")?.unwrap_or(base.a_max),
            b_comf: m.parse_opt("b_comf")?.unwrap_or(base.b_comf),
            delta: m.parse_opt("delta")?.unwrap_or(base.delta),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn to_kv(&self) -> String {
        kv::render([
            ("v0", self.v0),
            ("time_gap", self.time_gap),
            ("s0", self.s0),
            ("a_max", self.a_max),
            ("b_comf", self.b_comf),
            ("delta", self.delta),
        ])
    }
}

/// IDM acceleration for ego speed `v`, closing rate `delta_v = v_ego - v_lead`
/// and bumper gap `gap`, clamped to `[-4, 4]`.
pub fn idm_accel(p: &IdmParams, v: f64, delta_v: f64, gap: f64) -> Result<f64, BaselineError> {
    if !(gap > 0.0) {
        return Err(BaselineError::NonPositiveGap(gap));
    }
    Ok(idm_accel_unchecked(p, v, delta_v, gap))
}

#[inline]
fn idm_accel_unchecked(p: &IdmParams, v: f64, delta_v: f64, gap: f64) -> f64 {
    let v = v.max(0.0);
    let desired_gap = p.s0 + v * p.time_gap + v * delta_v / (2.0 * (p.a_max * p.b_comf).sqrt());
    let free = (v / p.v0).powf(p.delta);
    let interaction = (desired_gap / gap).powi(2);
    (p.a_max * (1.0 - free - interaction)).clamp(-ACCEL_CLAMP, ACCEL_CLAMP)
}

impl AccelPredictor for IdmParams {
    fn predict(&self, w: &FollowWindow) -> f64 {
        if w.gap > 0.0 {
            idm_accel_unchecked(self, w.ego_speed, w.approach_rate(), w.gap)
        } else {
            -ACCEL_CLAMP
        }
    }
}

/// One calibration observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdmSample {
    pub speed: f64,
    pub approach_rate: f64,
    pub gap: f64,
    pub target: f64,
}

/// Search box for the five calibrated parameters; `delta` is held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdmBounds {
    pub lower: IdmParams,
    pub upper: IdmParams,
}

impl Default for IdmBounds {
    fn default() -> Self {
        Self {
            lower: IdmParams {
                v0: 15.0,
                time_gap: 0.5,
                s0: 0.5,
                a_max: 0.5,
                b_comf: 0.5,
                delta: 4.0,
            },
            upper: IdmParams {
                v0: 60.0,
                time_gap: 3.0,
                s0: 5.0,
                a_max: 3.0,
                b_comf: 3.0,
                delta: 4.0,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    pub grid_points: usize,
    /// Iteration cap of one Nelder-Mead run.
    pub simplex_iterations: usize,
    /// Number of best grid points refined (the initial guess is always one
    /// of the starts).
    pub starts: usize,
    /// Fresh-simplex restarts per start while the MAE keeps improving.
    pub restarts: usize,
    pub min_samples: usize,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            grid_points: 5,
            simplex_iterations: 400,
            starts: 5,
            restarts: 8,
            min_samples: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdmCalibration {
    pub params: IdmParams,
    pub mae: f64,
    /// Best MAE among the grid points and the initial guess.
    pub start_mae: f64,
    pub n_evals: usize,
}

pub fn idm_mae(p: &IdmParams, samples: &[IdmSample]) -> f64 {
    let total: f64 = samples
        .iter()
        .map(|s| (idm_accel_unchecked(p, s.speed, s.approach_rate, s.gap) - s.target).abs())
        .sum();
    total / samples.len() as f64
}

struct Objective<'a> {
    samples: &'a [IdmSample],
    lo: [f64; 5],
    hi: [f64; 5],
    delta: f64,
    evals: usize,
}

impl Objective<'_> {
    fn params(&self, u: &[f64; 5]) -> IdmParams {
        let mut x = [0.0; 5];
        for i in 0..5 {
            x[i] = self.lo[i] + u[i].clamp(0.0, 1.0) * (self.hi[i] - self.lo[i]);
        }
        IdmParams::from_vec(x, self.delta)
    }

    fn eval(&mut self, u: &[f64; 5]) -> f64 {
        self.evals += 1;
        idm_mae(&self.params(u), self.samples)
    }
}

/// Fit IDM parameters minimizing MAE: a full grid over the bounds box, then
/// Nelder-Mead refinement from the best of grid points and `init`.
pub fn calibrate_idm_mae(
    samples: &[IdmSample],
    init: &IdmParams,
    bounds: &IdmBounds,
    cfg: &CalibrationConfig,
) -> Result<IdmCalibration, BaselineError> {
    if samples.len() < cfg.min_samples {
        return Err(BaselineError::TooFewSamples {
            got: samples.len(),
            min: cfg.min_samples,
        });
    }
    bounds.lower.validate()?;
    bounds.upper.validate()?;
    let lo = bounds.lower.to_vec();
    let hi = bounds.upper.to_vec();
    if lo.iter().zip(&hi).any(|(l, h)| l > h) {
        return Err(BaselineError::InvalidParams("lower bound above upper bound".into()));
    }
    let mut obj = Objective {
        samples,
        lo,
        hi,
        delta: init.delta,
        evals: 0,
    };

    let to_unit = |x: [f64; 5]| {
        let mut u = [0.0; 5];
        for i in 0..5 {
            let span = hi[i] - lo[i];
            u[i] = if span > 0.0 { ((x[i] - lo[i]) / span).clamp(0.0, 1.0) } else { 0.0 };
        }
        u
    };

    let init_u = to_unit(init.to_vec());
    let init_f = obj.eval(&init_u);

    let n = cfg.grid_points.max(1);
    let axis = |k: usize| if n == 1 { 0.5 } else { k as f64 / (n - 1) as f64 };
    let total = n.pow(5);
    let mut grid: Vec<([f64; 5], f64)> = Vec::with_capacity(total);
    for idx in 0..total {
        let mut u = [0.0; 5];
        let mut rem = idx;
        for d in (0..5).rev() {
            u[d] = axis(rem % n);
            rem /= n;
        }
        let f = obj.eval(&u);
        grid.push((u, f));
    }
    // Stable sort keeps grid order among ties, so the result is reproducible.
    grid.sort_by(|a, b| a.1.total_cmp(&b.1));
    let start_mae = grid.first().map_or(init_f, |g| g.1.min(init_f));

    let mut starts = vec![(init_u, init_f)];
    starts.extend(grid.into_iter().take(cfg.starts));
    let (mut best_u, mut best) = (init_u, init_f);
    for (u0, f0) in starts {
        let (mut u, mut f) = (u0, f0);
        for _ in 0..=cfg.restarts {
            let (nu, nf) = nelder_mead(&mut obj, u, f, cfg.simplex_iterations);
            if !(nf < f) {
                break;
            }
            (u, f) = (nu, nf);
        }
        if f < best {
            (best_u, best) = (u, f);
        }
    }
    Ok(IdmCalibration {
        params: obj.params(&best_u),
        mae: best,
        start_mae,
        n_evals: obj.evals,
    })
}

/// Plain Nelder-Mead in the unit box; points are clamped on evaluation and
/// stored clamped.
fn nelder_mead(obj: &mut Objective<'_>, x0: [f64; 5], f0: f64, iterations: usize) -> ([f64; 5], f64) {
    const DIM: usize = 5;
    let clamp = |mut u: [f64; 5]| {
        for v in u.iter_mut() {
            *v = v.clamp(0.0, 1.0);
        }
        u
    };
    let mut simplex: Vec<([f64; 5], f64)> = vec![(x0, f0)];
    for i in 0..DIM {
        let mut u = x0;
        let step = 0.1;
        u[i] = if u[i] + step <= 1.0 { u[i] + step } else { u[i] - step };
        let u = clamp(u);
        let f = obj.eval(&u);
        simplex.push((u, f));
    }

    for _ in 0..iterations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[DIM].1 - simplex[0].1 <= 1e-14 * simplex[0].1.abs().max(1e-300) {
            break;
        }
        let worst = simplex[DIM];
        let mut centroid = [0.0; DIM];
        for (u, _) in &simplex[..DIM] {
            for d in 0..DIM {
                centroid[d] += u[d] / DIM as f64;
            }
        }
        let along = |t: f64| {
            let mut u = [0.0; DIM];
            for d in 0..DIM {
                u[d] = centroid[d] + t * (worst.0[d] - centroid[d]);
            }
            clamp(u)
        };

        let xr = along(-1.0);
        let fr = obj.eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = obj.eval(&xe);
            simplex[DIM] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[DIM - 1].1 {
            simplex[DIM] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let xc = along(-0.5);
                (xc, obj.eval(&xc))
            } else {
                let xc = along(0.5);
                (xc, obj.eval(&xc))
            };
            if fc < worst.1.min(fr) {
                simplex[DIM] = (xc, fc);
            } else {
                let best = simplex[0].0;
                for entry in simplex.iter_mut().skip(1) {
                    let mut u = [0.0; DIM];
                    for d in 0..DIM {
                        u[d] = best[d] + 0.5 * (entry.0[d] - best[d]);
                    }
                    let u = clamp(u);
                    *entry = (u, obj.eval(&u));
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex[0]
}

/// Extract calibration samples from an episode (every step with a
/// positive gap).
pub fn idm_samples(ep: &EpisodeTrace) -> Vec<IdmSample> {
    ep.steps()
        .iter()
        .filter(|s| s.gap() > 0.0)
        .map(|s| IdmSample {
            speed: s.ego_speed,
            approach_rate: s.ego_speed - s.lead_speed,
            gap: s.gap(),
            target: s.ego_accel,
        })
        .collect()
}

/// Per-step record of an open-loop rollout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutStep {
    pub t: f64,
    pub lead: VehiclePoint,
    /// Ego state at this step; `accel` is the acceleration applied over the
    /// following interval.
    pub ego: VehiclePoint,
    pub gap: f64,
    pub headway: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub steps: Vec<RolloutStep>,
    /// Index into `steps` of the first step with a non-positive gap.
    pub collision: Option<usize>,
}

/// Replay the lead vehicle from `ep` and drive the ego with `predictor`,
/// starting at trace index `start` (>= 2) from `ego0`.
pub fn rollout_predictor(
    ep: &EpisodeTrace,
    start: usize,
    ego0: VehiclePoint,
    predictor: &dyn AccelPredictor,
) -> Rollout {
    assert!(start >= 2, "rollout needs two samples of lead history");
    let steps = ep.steps();
    let dt = ep.dt();
    let mut ego = ego0;
    let mut out = Vec::with_capacity(steps.len().saturating_sub(start));
    let mut collision = None;
    for i in start..steps.len() {
        let s = &steps[i];
        let lead = VehiclePoint::new(s.lead_pos, s.lead_speed, s.lead_accel);
        let gap = lead.pos - ego.pos;
        let headway = kinematics::headway(gap, ego.speed).ok();
        if gap <= 0.0 {
            out.push(RolloutStep {
                t: i as f64 * dt,
                lead,
                ego,
                gap,
                headway,
            });
            collision = Some(out.len() - 1);
            break;
        }
        let window = FollowWindow {
            lead_accel: [steps[i - 2].lead_accel, steps[i - 1].lead_accel, s.lead_accel],
            lead_speed: [steps[i - 2].lead_speed, steps[i - 1].lead_speed, s.lead_speed],
            ego_speed: ego.speed,
            gap,
        };
        let accel = predictor.predict(&window).clamp(-ACCEL_CLAMP, ACCEL_CLAMP);
        ego.accel = accel;
        out.push(RolloutStep {
            t: i as f64 * dt,
            lead,
            ego,
            gap,
            headway,
        });
        ego = kinematics::step_motion(ego, accel, dt);
    }
    Rollout {
        steps: out,
        collision,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn idm_limits() {
        let p = IdmParams::for_style(DrivingStyle::Normal);
        let free = idm_accel(&p, 0.0, 0.0, 1e9).unwrap();
        assert!((free - p.a_max).abs() < 1e-9);
        let stand = idm_accel(&p, 0.0, 0.0, p.s0).unwrap();
        assert!(stand.abs() < 1e-12);
        let cruise = idm_accel(&p, p.v0, 0.0, 1e9).unwrap();
        assert!(cruise.abs() < 1e-9);
        assert!(matches!(idm_accel(&p, 10.0, 0.0, 0.0), Err(BaselineError::NonPositiveGap(_))));
    }

    #[test]
    fn params_kv_round_trip() {
        let p = IdmParams::for_style(DrivingStyle::Aggressive);
        let q = IdmParams::from_kv(&p.to_kv(), IdmParams::default()).unwrap();
        assert_eq!(p, q);
        assert!(IdmParams::from_kv("v0=-1", p).is_err());
        assert!(IdmParams::from_kv("speed=3", p).is_err());
    }

    proptest! {
        #[test]
        fn decreasing_in_closing_rate(v in 0.0..35.0f64, dv in -5.0..5.0f64, d in 0.01..3.0f64, gap in 1.0..120.0f64) {
            let p = IdmParams::default();
            let a1 = idm_accel(&p, v, dv, gap).unwrap();
            let a2 = idm_accel(&p, v, dv + d, gap).unwrap();
            prop_assert!(a2 <= a1 + 1e-12);
        }

        #[test]
        fn increasing_in_gap(v in 0.0..35.0f64, dv in -5.0..5.0f64, gap in 1.0..120.0f64, d in 0.01..50.0f64) {
            let p = IdmParams::default();
            let a1 = idm_accel(&p, v, dv, gap).unwrap();
            let a2 = idm_accel(&p, v, dv, gap + d).unwrap();
            // the interaction term only grows the acceleration while s* > 0
            let desired = p.s0 + v * p.time_gap + v * dv / (2.0 * (p.a_max * p.b_comf).sqrt());
            if desired >= 0.0 {
                prop_assert!(a2 >= a1 - 1e-12);
            }
        }
    }

    fn idm_corpus(p: &IdmParams, n: usize) -> Vec<IdmSample> {
        // deterministic sweep over speed, closing rate and gap
        (0..n)
            .map(|i| {
                let f = i as f64 / n as f64;
                let speed = 12.0 + 14.0 * ((f * 7.3).sin() * 0.5 + 0.5);
                let approach_rate = 2.0 * (f * 13.1).cos();
                let gap = 2.0 + speed * (0.8 + 1.4 * ((f * 5.7).sin() * 0.5 + 0.5));
                let target = idm_accel(p, speed, approach_rate, gap).unwrap();
                IdmSample { speed, approach_rate, gap, target }
            })
            .collect()
    }

    #[test]
    fn calibration_never_worse_than_start() {
        let truth = IdmParams { v0: 40.0, time_gap: 1.2, s0: 1.5, a_max: 1.2, b_comf: 2.0, delta: 4.0 };
        let samples = idm_corpus(&truth, 400);
        let init = IdmParams::for_style(DrivingStyle::Conservative);
        let cal = calibrate_idm_mae(&samples, &init, &IdmBounds::default(), &CalibrationConfig::default()).unwrap();
        assert!(cal.mae <= cal.start_mae);
        assert!(cal.mae <= idm_mae(&init, &samples));
        assert!(cal.n_evals > 5usize.pow(5));
        // Noise-free data: the restarted simplex reaches the generating law.
        assert!(cal.mae < 1e-6, "{}", cal.mae);
    }

    #[test]
    fn calibration_from_optimum_does_not_regress() {
        let truth = IdmParams::for_style(DrivingStyle::Normal);
        let samples = idm_corpus(&truth, 300);
        let cfg = CalibrationConfig { grid_points: 2, simplex_iterations: 20, ..CalibrationConfig::default() };
        let cal = calibrate_idm_mae(&samples, &truth, &IdmBounds::default(), &cfg).unwrap();
        assert_eq!(cal.start_mae, 0.0);
        assert_eq!(cal.mae, 0.0);
    }

    #[test]
    fn calibration_rejects_small_datasets() {
        let samples = idm_corpus(&IdmParams::default(), 50);
        let err = calibrate_idm_mae(&samples, &IdmParams::default(), &IdmBounds::default(), &CalibrationConfig::default());
        assert_eq!(err.unwrap_err(), BaselineError::TooFewSamples { got: 50, min: 100 });
    }
}
