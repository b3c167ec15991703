//! Rule-based driving-style tagging.
//!
//! Each timestep is tagged by projecting both vehicles forward at constant
//! acceleration and reading off which goal headway the current action leads
//! to. Tags are aggregated into per-driver profiles and per-style statistics.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kv::{self, KvError, KvMap};
use crate::style::DrivingStyle;
use crate::trajectory::{EpisodeTrace, TraceStep};

/// Speeds are floored here during projection.
pub const PROJECTION_SPEED_FLOOR: f64 = 0.1;
pub const ACCEL_BIN_WIDTH: f64 = 0.1;
pub const HEADWAY_BIN_WIDTH: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClassifierError {
    #[error("no tagged steps in dataset")]
    EmptyDataset,
    #[error("invalid rule configuration: {0}")]
    InvalidRules(String),
    #[error(transparent)]
    Kv(#[from] KvError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuleConfig {
    pub horizon_s: f64,
    pub boundary_low: f64,
    pub boundary_high: f64,
    pub double_band: f64,
    pub dead_band_v: f64,
    pub dead_band_a: f64,
}

impl Default for RuleConfig {
    fn default() -> Self {
        Self {
            horizon_s: 5.0,
            boundary_low: 1.25,
            boundary_high: 1.65,
            double_band: 0.10,
            dead_band_v: 0.05,
            dead_band_a: 0.05,
        }
    }
}

impl RuleConfig {
    pub const KEYS: [&'static str; 6] = [
        "horizon_s",
        "boundary_low",
        "boundary_high",
        "double_band",
        "dead_band_v",
        "dead_band_a",
    ];

    pub fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |m: &str| Err(ClassifierError::InvalidRules(m.to_string()));
        if !(self.horizon_s > 0.0) {
            return bad("horizon_s must be positive");
        }
        if !(0.0 < self.boundary_low && self.boundary_low < self.boundary_high) {
            return bad("need 0 < boundary_low < boundary_high");
        }
        if !(self.double_band >= 0.0 && 2.0 * self.double_band < self.boundary_high - self.boundary_low) {
            return bad("double bands must not overlap");
        }
        if !(self.dead_band_v >= 0.0 && self.dead_band_a >= 0.0) {
            return bad("dead bands must be non-negative");
        }
        Ok(())
    }

    /// Keys missing from `text` keep their default.
    pub fn from_kv(text: &str) -> Result<Self, ClassifierError> {
        let m = KvMap::parse(text)?;
        m.check_keys(&Self::KEYS)?;
        let mut r = Self::default();
        let fields = [
            &mut r.horizon_s,
            &mut r.boundary_low,
            &mut r.boundary_high,
            &mut r.double_band,
            &mut r.dead_band_v,
            &mut r.dead_band_a,
        ];
        for (key, field) in Self::KEYS.iter().zip(fields) {
            if let Some(v) = m.parse_opt(key)? {
                *field = v;
            }
        }
        r.validate()?;
        Ok(r)
    }

    pub fn to_kv(&self) -> String {
        let vals = [
            self.horizon_s,
            self.boundary_low,
            self.boundary_high,
            self.double_band,
            self.dead_band_v,
            self.dead_band_a,
        ];
        kv::render(Self::KEYS.iter().zip(vals))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierObservation {
    pub headway: f64,
    pub rel_velocity: f64,
    pub ego_accel: f64,
    pub lead_accel: f64,
    pub ego_speed: f64,
    pub gap: f64,
}

impl ClassifierObservation {
    /// `None` when the step has no defined headway.
    pub fn from_step(s: &TraceStep) -> Option<Self> {
        let gap = s.gap();
        if !(s.ego_speed > 0.0 && gap > 0.0) {
            return None;
        }
        Some(Self {
            headway: gap / s.ego_speed,
            rel_velocity: s.lead_speed - s.ego_speed,
            ego_accel: s.ego_accel,
            lead_accel: s.lead_accel,
            ego_speed: s.ego_speed,
            gap,
        })
    }
}

/// Position offset and speed of a vehicle after `t` seconds at constant
/// acceleration with speed floored at [`PROJECTION_SPEED_FLOOR`].
fn floored_motion(v0: f64, a: f64, t: f64) -> (f64, f64) {
    let floor = PROJECTION_SPEED_FLOOR;
    let v0f = v0.max(floor);
    if v0 >= floor {
        if a >= 0.0 {
            return (v0 * t + 0.5 * a * t * t, v0 + a * t);
        }
        let ts = (v0 - floor) / -a;
        if t <= ts {
            (v0 * t + 0.5 * a * t * t, v0 + a * t)
        } else {
            (v0 * ts + 0.5 * a * ts * ts + floor * (t - ts), floor)
        }
    } else {
        // starts below the floor: held at the floor until accelerating past it
        if a <= 0.0 {
            return (v0f * t, v0f);
        }
        let ts = (floor - v0) / a;
        if t <= ts {
            (floor * t, floor)
        } else {
            let dt = t - ts;
            (floor * ts + floor * dt + 0.5 * a * dt * dt, floor + a * dt)
        }
    }
}

/// Times in `(0, horizon)` at which a vehicle switches between accelerating
/// and floored motion.
fn floor_breakpoint(v0: f64, a: f64, horizon: f64) -> Option<f64> {
    if a == 0.0 {
        return None;
    }
    let ts = (PROJECTION_SPEED_FLOOR - v0) / a;
    (ts > 0.0 && ts < horizon).then_some(ts)
}

/// Projected headway after `horizon` seconds, or 0 when the projected gap
/// closes at any time within the horizon.
pub fn project_headway(obs: &ClassifierObservation, horizon: f64) -> f64 {
    debug_assert!(horizon > 0.0);
    let lead_speed = obs.ego_speed + obs.rel_velocity;
    let gap_at = |t: f64| {
        let (dl, _) = floored_motion(lead_speed, obs.lead_accel, t);
        let (de, _) = floored_motion(obs.ego_speed, obs.ego_accel, t);
        obs.gap + dl - de
    };

    // The gap is quadratic between breakpoints; its minimum on each piece is
    // at an endpoint or at the vertex.
    let mut knots = vec![0.0, horizon];
    knots.extend(floor_breakpoint(lead_speed, obs.lead_accel, horizon));
    knots.extend(floor_breakpoint(obs.ego_speed, obs.ego_accel, horizon));
    knots.sort_by(f64::total_cmp);
    for w in knots.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        if gap_at(t0) <= 0.0 || gap_at(t1) <= 0.0 {
            return 0.0;
        }
        let mid = 0.5 * (t0 + t1);
        let speed = |v: f64, a: f64, t: f64| floored_motion(v, a, t).1;
        let eff_accel = |v: f64, a: f64| {
            let h = 1e-3 * (t1 - t0);
            (speed(v, a, mid + h) - speed(v, a, mid - h)) / (2.0 * h)
        };
        let curvature = eff_accel(lead_speed, obs.lead_accel) - eff_accel(obs.ego_speed, obs.ego_accel);
        if curvature > 0.0 {
            let slope0 = speed(lead_speed, obs.lead_accel, t0) - speed(obs.ego_speed, obs.ego_accel, t0);
            let tv = t0 - slope0 / curvature;
            if tv > t0 && tv < t1 && gap_at(tv) <= 0.0 {
                return 0.0;
            }
        }
    }
    let (_, ve) = floored_motion(obs.ego_speed, obs.ego_accel, horizon);
    gap_at(horizon) / ve
}

/// One style or a pair of adjacent styles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StyleTag {
    mask: u8,
}

impl StyleTag {
    pub fn single(s: DrivingStyle) -> Self {
        Self { mask: 1 << s.index() }
    }

    /// `None` unless the two styles are adjacent.
    pub fn double(a: DrivingStyle, b: DrivingStyle) -> Option<Self> {
        (a.index().abs_diff(b.index()) == 1).then(|| Self {
            mask: (1 << a.index()) | (1 << b.index()),
        })
    }

    pub fn contains(&self, s: DrivingStyle) -> bool {
        self.mask & (1 << s.index()) != 0
    }

    pub fn styles(&self) -> impl Iterator<Item = DrivingStyle> + '_ {
        DrivingStyle::ALL.into_iter().filter(|s| self.contains(*s))
    }

    pub fn len(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_double(&self) -> bool {
        self.len() == 2
    }

    /// Mean style index; orders tags from aggressive to conservative.
    pub fn rank(&self) -> f64 {
        self.styles().map(|s| s.index() as f64).sum::<f64>() / self.len() as f64
    }
}

impl std::fmt::Display for StyleTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let names: Vec<&str> = self.styles().map(|s| s.as_str()).collect();
        f.write_str(&names.join("+"))
    }
}

/// Map a projected headway to a tag.
pub fn tag_projected(theta: f64, rules: &RuleConfig) -> StyleTag {
    use DrivingStyle::*;
    let band = rules.double_band;
    if (theta - rules.boundary_low).abs() <= band {
        return StyleTag::double(Aggressive, Normal).expect("adjacent");
    }
    if (theta - rules.boundary_high).abs() <= band {
        return StyleTag::double(Normal, Conservative).expect("adjacent");
    }
    if theta < rules.boundary_low {
        StyleTag::single(Aggressive)
    } else if theta < rules.boundary_high {
        StyleTag::single(Normal)
    } else {
        StyleTag::single(Conservative)
    }
}

/// Projected headway under the dead-band rule: near-zero relative motion
/// keeps the current headway.
pub fn projected_headway(obs: &ClassifierObservation, rules: &RuleConfig) -> f64 {
    let steady = obs.rel_velocity.abs() < rules.dead_band_v
        && (obs.lead_accel - obs.ego_accel).abs() < rules.dead_band_a;
    if steady {
        obs.headway
    } else {
        project_headway(obs, rules.horizon_s)
    }
}

pub fn tag_timestep(obs: &ClassifierObservation, rules: &RuleConfig) -> StyleTag {
    tag_projected(projected_headway(obs, rules), rules)
}

/// Tags for every step; `None` where the step has no defined headway.
pub fn tag_episode(ep: &EpisodeTrace, rules: &RuleConfig) -> Vec<Option<StyleTag>> {
    ep.steps()
        .iter()
        .map(|s| ClassifierObservation::from_step(s).map(|o| tag_timestep(&o, rules)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleProfile {
    pub ratios: BTreeMap<DrivingStyle, f64>,
    pub label: DrivingStyle,
    pub n_steps: usize,
}

impl StyleProfile {
    /// Aggregate tags; double tags count towards both styles. Any tie for
    /// the largest ratio is labelled Normal.
    pub fn from_tags<'a>(tags: impl IntoIterator<Item = &'a StyleTag>) -> Self {
        let mut counts = [0usize; 3];
        let mut n = 0usize;
        for t in tags {
            n += 1;
            for s in t.styles() {
                counts[s.index()] += 1;
            }
        }
        let ratios: BTreeMap<DrivingStyle, f64> = DrivingStyle::ALL
            .iter()
            .map(|s| (*s, if n == 0 { 0.0 } else { counts[s.index()] as f64 / n as f64 }))
            .collect();
        let max = counts.iter().copied().max().unwrap_or(0);
        let leaders = counts.iter().filter(|c| **c == max).count();
        let label = if leaders > 1 {
            DrivingStyle::Normal
        } else {
            DrivingStyle::ALL
                .into_iter()
                .find(|s| counts[s.index()] == max)
                .expect("some style attains the max")
        };
        Self {
            ratios,
            label,
            n_steps: n,
        }
    }
}

pub fn classify_driver(ep: &EpisodeTrace, rules: &RuleConfig) -> StyleProfile {
    let tags: Vec<StyleTag> = tag_episode(ep, rules).into_iter().flatten().collect();
    StyleProfile::from_tags(&tags)
}

#[derive(Debug, Clone, Default, PartialEq)]
struct Histogram {
    bins: BTreeMap<i64, u64>,
}

impl Histogram {
    fn add(&mut self, x: f64, width: f64) {
        *self.bins.entry((x / width).round() as i64).or_default() += 1;
    }

    fn merge(&mut self, other: &Histogram) {
        for (k, c) in &other.bins {
            *self.bins.entry(*k).or_default() += c;
        }
    }

    /// Center of the fullest bin; ties go to the lowest bin.
    fn mode(&self, width: f64) -> Option<f64> {
        let max = self.bins.values().copied().max()?;
        self.bins.iter().find(|(_, c)| **c == max).map(|(k, _)| *k as f64 * width)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct StyleAccumulator {
    count: u64,
    braking: u64,
    accelerating: u64,
    accel: Histogram,
    headway: Histogram,
}

/// Per-style tag statistics over a dataset. Merging is associative, so
/// per-episode accumulators can be combined in any grouping.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StyleStatistics {
    per_style: [StyleAccumulator; 3],
    driver_labels: [u64; 3],
    n_steps: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleSummary {
    pub count: u64,
    pub accel_mode: Option<f64>,
    pub headway_mode: Option<f64>,
    pub braking_fraction: f64,
    pub accelerating_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatisticsSummary {
    pub n_steps: u64,
    pub styles: BTreeMap<DrivingStyle, StyleSummary>,
    pub driver_labels: BTreeMap<DrivingStyle, u64>,
}

impl StyleStatistics {
    pub fn add_step(&mut self, obs: &ClassifierObservation, tag: &StyleTag) {
        self.n_steps += 1;
        for s in tag.styles() {
            let acc = &mut self.per_style[s.index()];
            acc.count += 1;
            if obs.ego_accel < 0.0 {
                acc.braking += 1;
            } else if obs.ego_accel > 0.0 {
                acc.accelerating += 1;
            }
            acc.accel.add(obs.ego_accel, ACCEL_BIN_WIDTH);
            acc.headway.add(obs.headway, HEADWAY_BIN_WIDTH);
        }
    }

    pub fn add_driver(&mut self, profile: &StyleProfile) {
        self.driver_labels[profile.label.index()] += 1;
    }

    pub fn add_episode(&mut self, ep: &EpisodeTrace, rules: &RuleConfig) -> StyleProfile {
        let mut tags = Vec::with_capacity(ep.len());
        for s in ep.steps() {
            if let Some(obs) = ClassifierObservation::from_step(s) {
                let tag = tag_timestep(&obs, rules);
                self.add_step(&obs, &tag);
                tags.push(tag);
            }
        }
        let profile = StyleProfile::from_tags(&tags);
        self.add_driver(&profile);
        profile
    }

    pub fn merge(&mut self, other: &StyleStatistics) {
        self.n_steps += other.n_steps;
        for i in 0..3 {
            let (a, b) = (&mut self.per_style[i], &other.per_style[i]);
            a.count += b.count;
            a.braking += b.braking;
            a.accelerating += b.accelerating;
            a.accel.merge(&b.accel);
            a.headway.merge(&b.headway);
            self.driver_labels[i] += other.driver_labels[i];
        }
    }

    pub fn summary(&self) -> Result<StatisticsSummary, ClassifierError> {
        if self.n_steps == 0 {
            return Err(ClassifierError::EmptyDataset);
        }
        let styles = DrivingStyle::ALL
            .iter()
            .map(|s| {
                let a = &self.per_style[s.index()];
                let frac = |x: u64| if a.count == 0 { 0.0 } else { x as f64 / a.count as f64 };
                let summary = StyleSummary {
                    count: a.count,
                    accel_mode: a.accel.mode(ACCEL_BIN_WIDTH),
                    headway_mode: a.headway.mode(HEADWAY_BIN_WIDTH),
                    braking_fraction: frac(a.braking),
                    accelerating_fraction: frac(a.accelerating),
                };
                (*s, summary)
            })
            .collect();
        let driver_labels = DrivingStyle::ALL
            .iter()
            .map(|s| (*s, self.driver_labels[s.index()]))
            .collect();
        Ok(StatisticsSummary {
            n_steps: self.n_steps,
            styles,
            driver_labels,
        })
    }

    /// Long-format histogram table: `style,quantity,bin_center,count`.
    pub fn histograms_csv(&self) -> String {
        let mut out = String::from("style,quantity,bin_center,count\n");
        for s in DrivingStyle::ALL {
            let a = &self.per_style[s.index()];
            for (name, hist, w) in [("accel", &a.accel, ACCEL_BIN_WIDTH), ("headway", &a.headway, HEADWAY_BIN_WIDTH)] {
                for (k, c) in &hist.bins {
                    let _ = writeln!(out, "{s},{name},{:.3},{c}", *k as f64 * w);
                }
            }
        }
        out
    }
}

/// Statistics over a set of episodes.
pub fn style_statistics(episodes: &[EpisodeTrace], rules: &RuleConfig) -> Result<StyleStatistics, ClassifierError> {
    let mut stats = StyleStatistics::default();
    for ep in episodes {
        let mut one = StyleStatistics::default();
        one.add_episode(ep, rules);
        stats.merge(&one);
    }
    if stats.n_steps == 0 {
        return Err(ClassifierError::EmptyDataset);
    }
    Ok(stats)
}
