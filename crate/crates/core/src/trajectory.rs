//! Trajectory ingestion: highD-style CSV parsing, car-following episode
//! extraction, decimation and a seeded IDM-driven synthetic generator.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{self, IdmParams};
use crate::kinematics::{self, VehiclePoint};
use crate::kv::{KvError, KvMap};
use crate::style::DrivingStyle;

/// highD tracks are recorded at 25 Hz.
pub const HIGHD_DT: f64 = 0.04;
/// Sampling interval used throughout training and simulation.
pub const TRAINING_DT: f64 = 0.08;
pub const MIN_EPISODE_SECONDS: f64 = 10.0;
pub const MIN_RECORDED_SPEED: f64 = 6.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("malformed row at line {0}")]
    MalformedRow(usize),
    #[error("empty trajectory file")]
    EmptyFile,
    #[error("target dt {target_dt} s is not an integer multiple of source dt {source_dt} s")]
    NonIntegerDecimation { source_dt: f64, target_dt: f64 },
    #[error("synthetic episodes need at least {MIN_EPISODE_SECONDS} s, got {0} s")]
    DurationTooShort(f64),
    #[error("invalid episode: {0}")]
    InvalidEpisode(String),
    #[error(transparent)]
    Kv(#[from] KvError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VehicleClass {
    Car,
    Truck,
}

impl std::str::FromStr for VehicleClass {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s.trim().to_ascii_lowercase().as_str() {
            "car" => Ok(VehicleClass::Car),
            "truck" => Ok(VehicleClass::Truck),
            _ => Err(()),
        }
    }
}

/// One row of a trajectory file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawFrame {
    pub frame_index: i64,
    pub vehicle_id: i64,
    /// Left edge of the bounding box along the road axis.
    pub position_x: f64,
    pub speed_x: f64,
    pub accel_x: f64,
    /// 0 when there is no preceding vehicle.
    pub preceding_id: i64,
    pub lane_id: i64,
    pub vehicle_class: VehicleClass,
    /// Bounding-box extent along the road axis; 0 when not provided.
    pub length: f64,
}

impl RawFrame {
    fn direction(&self) -> f64 {
        if self.speed_x < 0.0 {
            -1.0
        } else {
            1.0
        }
    }

    /// Front bumper in driving-direction coordinates.
    fn front(&self) -> f64 {
        if self.direction() > 0.0 {
            self.position_x + self.length
        } else {
            -self.position_x
        }
    }

    /// Rear bumper in driving-direction coordinates.
    fn rear(&self) -> f64 {
        self.front() - self.length
    }

    fn speed(&self) -> f64 {
        self.speed_x.abs()
    }

    fn accel(&self) -> f64 {
        self.direction() * self.accel_x
    }
}

/// Canonical field -> source column name.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaMap {
    columns: BTreeMap<String, String>,
}

impl SchemaMap {
    pub const REQUIRED: [&'static str; 8] = [
        "frame_index",
        "vehicle_id",
        "position_x",
        "speed_x",
        "accel_x",
        "preceding_id",
        "lane_id",
        "vehicle_class",
    ];
    pub const OPTIONAL: [&'static str; 1] = ["length"];

    /// Column names of highD `tracks.csv` with the class joined in from
    /// `tracksMeta.csv`.
    pub fn highd() -> Self {
        let pairs = [
            ("frame_index", "frame"),
            ("vehicle_id", "id"),
            ("position_x", "x"),
            ("speed_x", "xVelocity"),
            ("accel_x", "xAcceleration"),
            ("preceding_id", "precedingId"),
            ("lane_id", "laneId"),
            ("vehicle_class", "class"),
            ("length", "width"),
        ];
        Self {
            columns: pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    /// Parse `canonical_field=source_column` lines. Fields not mentioned keep
    /// their highD default; an empty value drops an optional column.
    pub fn from_kv(text: &str) -> Result<Self, TrajectoryError> {
        let m = KvMap::parse(text)?;
        let allowed: Vec<&str> = Self::REQUIRED.iter().chain(Self::OPTIONAL.iter()).copied().collect();
        m.check_keys(&allowed)?;
        let mut schema = Self::highd();
        for k in m.keys() {
            let v = m.get(k).unwrap_or_default();
            if v.is_empty() {
                schema.columns.remove(k);
            } else {
                schema.columns.insert(k.to_string(), v.to_string());
            }
        }
        Ok(schema)
    }

    /// Same mapping without the optional length column.
    pub fn without_length(mut self) -> Self {
        self.columns.remove("length");
        self
    }

    pub fn column(&self, field: &str) -> Option<&str> {
        self.columns.get(field).map(String::as_str)
    }
}

impl Default for SchemaMap {
    fn default() -> Self {
        Self::highd()
    }
}

/// Parse a comma-separated trajectory file with a header row.
pub fn parse_trace_file(bytes: &[u8], schema: &SchemaMap) -> Result<Vec<RawFrame>, TrajectoryError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(bytes);
    let headers = match reader.headers() {
        Ok(h) if !h.is_empty() && !(h.len() == 1 && h[0].is_empty()) => h.clone(),
        _ => return Err(TrajectoryError::EmptyFile),
    };
    let find = |field: &str| -> Result<Option<usize>, TrajectoryError> {
        match schema.column(field) {
            None => Ok(None),
            Some(col) => headers
                .iter()
                .position(|h| h == col)
                .map(Some)
                .ok_or_else(|| TrajectoryError::MissingColumn(col.to_string())),
        }
    };
    let mut idx = [0usize; 8];
    for (slot, field) in idx.iter_mut().zip(SchemaMap::REQUIRED) {
        *slot = find(field)?.ok_or_else(|| TrajectoryError::MissingColumn(field.to_string()))?;
    }
    let length_idx = find("length")?;

    let mut frames = Vec::new();
    let mut record = csv::StringRecord::new();
    let mut line = 1usize;
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(_) => return Err(TrajectoryError::MalformedRow(line + 1)),
        }
        line = record.position().map(|p| p.line() as usize).unwrap_or(line + 1);
        let bad = || TrajectoryError::MalformedRow(line);
        let get = |i: usize| record.get(i).ok_or_else(bad);
        let int = |i: usize| -> Result<i64, TrajectoryError> {
            let s = get(i)?;
            s.parse::<i64>()
                .or_else(|_| s.parse::<f64>().ok().filter(|x| x.fract() == 0.0).map(|x| x as i64).ok_or(()))
                .map_err(|_| bad())
        };
        let real = |i: usize| -> Result<f64, TrajectoryError> {
            get(i)?.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(bad)
        };
        let frame = RawFrame {
            frame_index: int(idx[0])?,
            vehicle_id: int(idx[1])?,
            position_x: real(idx[2])?,
            speed_x: real(idx[3])?,
            accel_x: real(idx[4])?,
            preceding_id: int(idx[5])?,
            lane_id: int(idx[6])?,
            vehicle_class: get(idx[7])?.parse().map_err(|_| bad())?,
            length: match length_idx {
                Some(i) => real(i)?,
                None => 0.0,
            },
        };
        if frame.frame_index < 0 {
            return Err(bad());
        }
        frames.push(frame);
    }
    if frames.is_empty() {
        return Err(TrajectoryError::EmptyFile);
    }
    Ok(frames)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "style")]
pub enum EpisodeSource {
    Recorded,
    Synthetic(DrivingStyle),
}

impl std::fmt::Display for EpisodeSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EpisodeSource::Recorded => f.write_str("recorded"),
            EpisodeSource::Synthetic(s) => write!(f, "synthetic:{s}"),
        }
    }
}

impl std::str::FromStr for EpisodeSource {
    type Err = TrajectoryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "recorded" {
            return Ok(EpisodeSource::Recorded);
        }
        s.strip_prefix("synthetic:")
            .and_then(|st| st.parse().ok())
            .map(EpisodeSource::Synthetic)
            .ok_or_else(|| TrajectoryError::InvalidEpisode(format!("unknown source `{s}`")))
    }
}

/// Lead and ego kinematics at one sample. Positions are bumper positions:
/// `lead_pos - ego_pos` is the net gap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceStep {
    pub lead_pos: f64,
    pub lead_speed: f64,
    pub lead_accel: f64,
    pub ego_pos: f64,
    pub ego_speed: f64,
    pub ego_accel: f64,
}

impl TraceStep {
    pub fn gap(&self) -> f64 {
        self.lead_pos - self.ego_pos
    }

    pub fn lead(&self) -> VehiclePoint {
        VehiclePoint::new(self.lead_pos, self.lead_speed, self.lead_accel)
    }

    pub fn ego(&self) -> VehiclePoint {
        VehiclePoint::new(self.ego_pos, self.ego_speed, self.ego_accel)
    }
}

/// A validated car-following record at a fixed sampling interval.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    dt: f64,
    steps: Vec<TraceStep>,
    driver_id: i64,
    source: EpisodeSource,
}

/// Minimum step count for an episode of at least `seconds` at `dt`.
pub fn min_steps(seconds: f64, dt: f64) -> usize {
    ((seconds / dt) - 1e-9).ceil().max(1.0) as usize
}

impl EpisodeTrace {
    pub fn new(
        dt: f64,
        steps: Vec<TraceStep>,
        driver_id: i64,
        source: EpisodeSource,
    ) -> Result<Self, TrajectoryError> {
        let invalid = |m: String| Err(TrajectoryError::InvalidEpisode(m));
        if !(dt > 0.0 && dt.is_finite()) {
            return invalid(format!("dt must be positive, got {dt}"));
        }
        let need = min_steps(MIN_EPISODE_SECONDS, dt);
        if steps.len() < need {
            return invalid(format!("{} steps, need at least {need}", steps.len()));
        }
        for (i, s) in steps.iter().enumerate() {
            let vals = [s.lead_pos, s.lead_speed, s.lead_accel, s.ego_pos, s.ego_speed, s.ego_accel];
            if vals.iter().any(|v| !v.is_finite()) {
                return invalid(format!("non-finite value at step {i}"));
            }
            if s.lead_pos <= s.ego_pos {
                return invalid(format!("non-positive gap at step {i}"));
            }
            if s.ego_speed < 0.0 || s.lead_speed < 0.0 {
                return invalid(format!("negative speed at step {i}"));
            }
            if source == EpisodeSource::Recorded && s.ego_speed < MIN_RECORDED_SPEED {
                return invalid(format!("ego speed {} below {MIN_RECORDED_SPEED} m/s at step {i}", s.ego_speed));
            }
        }
        Ok(Self {
            dt,
            steps,
            driver_id,
            source,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> &[TraceStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn driver_id(&self) -> i64 {
        self.driver_id
    }

    pub fn source(&self) -> EpisodeSource {
        self.source
    }

    pub fn duration(&self) -> f64 {
        self.steps.len() as f64 * self.dt
    }

    /// Serialize as CSV with the episode columns. `preamble` lines are written
    /// first as `#` comments.
    pub fn to_csv(&self, preamble: &[String]) -> String {
        let mut out = String::new();
        for line in preamble {
            let _ = writeln!(out, "# {line}");
        }
        let _ = writeln!(
            out,
            "# episode driver_id={} source={} dt={}",
            self.driver_id, self.source, self.dt
        );
        out.push_str("t,lead_pos,lead_speed,lead_accel,ego_pos,ego_speed,ego_accel\n");
        for (i, s) in self.steps.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                i as f64 * self.dt,
                s.lead_pos,
                s.lead_speed,
                s.lead_accel,
                s.ego_pos,
                s.ego_speed,
                s.ego_accel
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, TrajectoryError> {
        let mut meta: Option<(i64, EpisodeSource, f64)> = None;
        let mut steps = Vec::new();
        let mut header_seen = false;
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(c) = line.strip_prefix('#') {
                if let Some(rest) = c.trim().strip_prefix("episode ") {
                    let mut driver = None;
                    let mut source = None;
                    let mut dt = None;
                    for tok in rest.split_whitespace() {
                        match tok.split_once('=') {
                            Some(("driver_id", v)) => driver = v.parse().ok(),
                            Some(("source", v)) => source = v.parse().ok(),
                            Some(("dt", v)) => dt = v.parse().ok(),
                            _ => {}
                        }
                    }
                    match (driver, source, dt) {
                        (Some(a), Some(b), Some(c)) => meta = Some((a, b, c)),
                        _ => return Err(TrajectoryError::MalformedRow(line_no)),
                    }
                }
                continue;
            }
            if !header_seen {
                if !line.starts_with("t,") {
                    return Err(TrajectoryError::MissingColumn("t".into()));
                }
                header_seen = true;
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| TrajectoryError::MalformedRow(line_no))?;
            if vals.len() != 7 {
                return Err(TrajectoryError::MalformedRow(line_no));
            }
            steps.push(TraceStep {
                lead_pos: vals[1],
                lead_speed: vals[2],
                lead_accel: vals[3],
                ego_pos: vals[4],
                ego_speed: vals[5],
                ego_accel: vals[6],
            });
        }
        let (driver, source, dt) = meta.ok_or_else(|| TrajectoryError::InvalidEpisode("missing episode metadata line".into()))?;
        if steps.is_empty() {
            return Err(TrajectoryError::EmptyFile);
        }
        EpisodeTrace::new(dt, steps, driver, source)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub min_duration: f64,
    pub min_speed: f64,
    pub require_constant_lead: bool,
    pub require_no_lane_change: bool,
    pub allowed_classes: Vec<VehicleClass>,
    /// Frame interval of the input files.
    pub source_dt: f64,
    /// Interval of the emitted episodes.
    pub target_dt: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            min_duration: MIN_EPISODE_SECONDS,
            min_speed: MIN_RECORDED_SPEED,
            require_constant_lead: true,
            require_no_lane_change: true,
            allowed_classes: vec![VehicleClass::Car],
            source_dt: HIGHD_DT,
            target_dt: TRAINING_DT,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), TrajectoryError> {
        if !(self.min_duration > 0.0) || !(self.min_speed >= 0.0) || !(self.source_dt > 0.0) {
            return Err(TrajectoryError::InvalidEpisode("invalid filter configuration".into()));
        }
        decimation_factor(self.source_dt, self.target_dt).map(|_| ())
    }
}

/// Why frames were excluded from episodes; counted per frame.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionTally {
    pub no_leader: usize,
    pub leader_missing: usize,
    pub class: usize,
    pub low_speed: usize,
    pub non_positive_gap: usize,
    /// Frames in runs that ended below the minimum duration.
    pub too_short: usize,
    pub invalid: usize,
}

impl RejectionTally {
    pub fn merge(&mut self, other: &RejectionTally) {
        self.no_leader += other.no_leader;
        self.leader_missing += other.leader_missing;
        self.class += other.class;
        self.low_speed += other.low_speed;
        self.non_positive_gap += other.non_positive_gap;
        self.too_short += other.too_short;
        self.invalid += other.invalid;
    }
}

pub fn extract_follow_episodes(frames: &[RawFrame], cfg: &FilterConfig) -> Vec<EpisodeTrace> {
    extract_follow_episodes_with_tally(frames, cfg).0
}

/// Split each ego track into maximal runs satisfying every filter, keeping
/// runs of at least `min_duration`. Episodes are decimated to
/// `cfg.target_dt`.
pub fn extract_follow_episodes_with_tally(
    frames: &[RawFrame],
    cfg: &FilterConfig,
) -> (Vec<EpisodeTrace>, RejectionTally) {
    let mut tally = RejectionTally::default();
    let mut episodes = Vec::new();
    let Ok(k) = decimation_factor(cfg.source_dt, cfg.target_dt) else {
        return (episodes, tally);
    };
    let by_key: HashMap<(i64, i64), &RawFrame> =
        frames.iter().map(|f| ((f.vehicle_id, f.frame_index), f)).collect();
    let need = min_steps(cfg.min_duration, cfg.source_dt);

    struct Run {
        leader: i64,
        lane: i64,
        last_frame: i64,
        steps: Vec<TraceStep>,
    }

    let flush = |run: Option<Run>, ego: i64, tally: &mut RejectionTally, episodes: &mut Vec<EpisodeTrace>| {
        let Some(run) = run else { return };
        let n = run.steps.len();
        if n < need {
            tally.too_short += n;
            return;
        }
        let built = EpisodeTrace::new(cfg.source_dt, run.steps, ego, EpisodeSource::Recorded)
            .and_then(|ep| decimate(&ep, k));
        match built {
            Ok(ep) if ep.duration() + 1e-9 >= cfg.min_duration => episodes.push(ep),
            Ok(_) => tally.too_short += n,
            Err(_) => tally.invalid += n,
        }
    };

    let mut i = 0;
    while i < frames.len() {
        let ego_id = frames[i].vehicle_id;
        let mut j = i;
        while j < frames.len() && frames[j].vehicle_id == ego_id {
            j += 1;
        }
        let track = &frames[i..j];
        let mut run: Option<Run> = None;
        for f in track {
            let lead = if f.preceding_id == 0 {
                tally.no_leader += 1;
                None
            } else if let Some(l) = by_key.get(&(f.preceding_id, f.frame_index)) {
                Some(*l)
            } else {
                tally.leader_missing += 1;
                None
            };
            let ok = lead.and_then(|l| {
                if !cfg.allowed_classes.contains(&f.vehicle_class) || !cfg.allowed_classes.contains(&l.vehicle_class) {
                    tally.class += 1;
                    return None;
                }
                if f.speed() < cfg.min_speed {
                    tally.low_speed += 1;
                    return None;
                }
                let step = TraceStep {
                    lead_pos: l.rear(),
                    lead_speed: l.speed(),
                    lead_accel: l.accel(),
                    ego_pos: f.front(),
                    ego_speed: f.speed(),
                    ego_accel: f.accel(),
                };
                if step.gap() <= 0.0 {
                    tally.non_positive_gap += 1;
                    return None;
                }
                Some((l.vehicle_id, step))
            });
            match ok {
                None => flush(run.take(), ego_id, &mut tally, &mut episodes),
                Some((leader, step)) => {
                    let continues = run.as_ref().is_some_and(|r| {
                        r.last_frame + 1 == f.frame_index
                            && (!cfg.require_constant_lead || r.leader == leader)
                            && (!cfg.require_no_lane_change || r.lane == f.lane_id)
                    });
                    if !continues {
                        flush(run.take(), ego_id, &mut tally, &mut episodes);
                        run = Some(Run {
                            leader,
                            lane: f.lane_id,
                            last_frame: f.frame_index,
                            steps: Vec::new(),
                        });
                    }
                    let r = run.as_mut().expect("run started above");
                    r.last_frame = f.frame_index;
                    r.steps.push(step);
                }
            }
        }
        flush(run.take(), ego_id, &mut tally, &mut episodes);
        i = j;
    }
    (episodes, tally)
}

/// Turn an episode back into ego and lead frames (lengths zero, both cars,
/// one lane). Used to re-ingest exported episodes.
pub fn episode_to_frames(ep: &EpisodeTrace, ego_id: i64, lead_id: i64) -> Vec<RawFrame> {
    let frame = |i: usize, id: i64, pos: f64, speed: f64, accel: f64, preceding: i64| RawFrame {
        frame_index: i as i64,
        vehicle_id: id,
        position_x: pos,
        speed_x: speed,
        accel_x: accel,
        preceding_id: preceding,
        lane_id: 1,
        vehicle_class: VehicleClass::Car,
        length: 0.0,
    };
    let mut ego: Vec<RawFrame> = ep
        .steps()
        .iter()
        .enumerate()
        .map(|(i, s)| frame(i, ego_id, s.ego_pos, s.ego_speed, s.ego_accel, lead_id))
        .collect();
    let lead = ep
        .steps()
        .iter()
        .enumerate()
        .map(|(i, s)| frame(i, lead_id, s.lead_pos, s.lead_speed, s.lead_accel, 0));
    let mut all: Vec<RawFrame> = if ego_id < lead_id {
        ego.extend(lead);
        ego
    } else {
        let mut v: Vec<RawFrame> = lead.collect();
        v.append(&mut ego);
        v
    };
    all.sort_by_key(|f| (f.vehicle_id, f.frame_index));
    all
}

/// Render frames in the highD column layout read by [`SchemaMap::highd`].
pub fn frames_to_csv(frames: &[RawFrame]) -> String {
    let mut out = String::from("frame,id,x,width,xVelocity,xAcceleration,precedingId,laneId,class\n");
    for f in frames {
        let class = match f.vehicle_class {
            VehicleClass::Car => "Car",
            VehicleClass::Truck => "Truck",
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{class}",
            f.frame_index, f.vehicle_id, f.position_x, f.length, f.speed_x, f.accel_x, f.preceding_id, f.lane_id
        );
    }
    out
}

fn decimation_factor(source: f64, target: f64) -> Result<usize, TrajectoryError> {
    let err = TrajectoryError::NonIntegerDecimation { source_dt: source, target_dt: target };
    if !(source > 0.0 && target > 0.0) {
        return Err(err);
    }
    let ratio = target / source;
    let k = ratio.round();
    if k < 1.0 || (ratio - k).abs() > 1e-9 * ratio.max(1.0) {
        return Err(err);
    }
    Ok(k as usize)
}

fn decimate(ep: &EpisodeTrace, k: usize) -> Result<EpisodeTrace, TrajectoryError> {
    if k == 1 {
        return Ok(ep.clone());
    }
    let steps: Vec<TraceStep> = ep.steps.iter().step_by(k).copied().collect();
    EpisodeTrace::new(ep.dt * k as f64, steps, ep.driver_id, ep.source)
}

/// Keep every k-th step, `k = target_dt / dt`.
pub fn resample_episode(ep: &EpisodeTrace, target_dt: f64) -> Result<EpisodeTrace, TrajectoryError> {
    let k = decimation_factor(ep.dt, target_dt)?;
    decimate(ep, k)
}

/// Knobs of the synthetic corpus generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub dt: f64,
    /// Standard deviation of the white noise added to the ego IDM
    /// acceleration, m/s².
    pub noise_std: f64,
    /// Driver model; `time_gap` is replaced by the style's value.
    pub driver: IdmParams,
    pub initial_speed: (f64, f64),
    pub lead_speed_bounds: (f64, f64),
    /// Lead acceleration targets are drawn from `[-amp, amp]`.
    pub lead_accel_amplitude: f64,
    /// Segment length range for lead acceleration targets, s.
    pub lead_segment: (f64, f64),
    /// Max change of lead acceleration per step.
    pub lead_accel_slew: f64,
    /// Initial gap as a multiple of the driver's equilibrium gap.
    pub initial_gap_factor: (f64, f64),
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            dt: TRAINING_DT,
            noise_std: 0.05,
            driver: IdmParams {
                v0: 45.0,
                time_gap: 1.5,
                s0: 1.0,
                a_max: 1.5,
                b_comf: 1.67,
                delta: 4.0,
            },
            initial_speed: (15.0, 25.0),
            lead_speed_bounds: (12.0, 28.0),
            lead_accel_amplitude: 0.5,
            lead_segment: (2.0, 6.0),
            lead_accel_slew: 0.05,
            initial_gap_factor: (1.05, 1.25),
        }
    }
}

/// Time gap of the synthetic driver for each style.
pub fn synthetic_time_gap(style: DrivingStyle) -> f64 {
    match style {
        DrivingStyle::Aggressive => 0.9,
        DrivingStyle::Normal => 1.5,
        DrivingStyle::Conservative => 2.0,
    }
}

pub fn generate_synthetic_episode(
    style: DrivingStyle,
    seed: u64,
    duration: f64,
) -> Result<EpisodeTrace, TrajectoryError> {
    generate_synthetic_episode_with(&SyntheticConfig::default(), style, seed, duration)
}

/// Seeded synthetic episode: a smooth random lead profile and an IDM ego
/// with additive Gaussian acceleration noise. The lead profile depends only
/// on `seed`, so episodes of different styles with the same seed share it.
pub fn generate_synthetic_episode_with(
    cfg: &SyntheticConfig,
    style: DrivingStyle,
    seed: u64,
    duration: f64,
) -> Result<EpisodeTrace, TrajectoryError> {
    if !(duration >= MIN_EPISODE_SECONDS) {
        return Err(TrajectoryError::DurationTooShort(duration));
    }
    let dt = cfg.dt;
    let n = (duration / dt).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let v_init = rng.random_range(cfg.initial_speed.0..=cfg.initial_speed.1);
    let (v_lo, v_hi) = cfg.lead_speed_bounds;
    let mut lead_accel = Vec::with_capacity(n);
    {
        let mut v = v_init;
        let mut a = 0.0f64;
        let mut target = 0.0f64;
        let mut remaining = 0.0f64;
        for _ in 0..n {
            if remaining <= 0.0 {
                remaining = rng.random_range(cfg.lead_segment.0..=cfg.lead_segment.1);
                let amp = cfg.lead_accel_amplitude;
                target = if amp > 0.0 { rng.random_range(-amp..=amp) } else { 0.0 };
            }
            if v <= v_lo && target < 0.0 || v >= v_hi && target > 0.0 {
                target = -target;
            }
            a += (target - a).clamp(-cfg.lead_accel_slew, cfg.lead_accel_slew);
            a = a.clamp(-2.0, 2.0);
            lead_accel.push(a);
            v = (v + a * dt).max(0.0);
            remaining -= dt;
        }
    }

    let driver = IdmParams {
        time_gap: synthetic_time_gap(style),
        ..cfg.driver
    };
    let free = 1.0 - (v_init / driver.v0).powf(driver.delta);
    let equilibrium = (driver.s0 + v_init * driver.time_gap) / free.max(0.05).sqrt();
    let factor = rng.random_range(cfg.initial_gap_factor.0..=cfg.initial_gap_factor.1);
    let noise = Normal::new(0.0, cfg.noise_std.max(0.0)).map_err(|e| TrajectoryError::InvalidEpisode(e.to_string()))?;

    let mut lead = VehiclePoint::new(equilibrium * factor, v_init, 0.0);
    let mut ego = VehiclePoint::new(0.0, v_init, 0.0);
    let mut steps = Vec::with_capacity(n);
    for &la in &lead_accel {
        let gap = lead.pos - ego.pos;
        let base = baselines::idm_accel(&driver, ego.speed, ego.speed - lead.speed, gap)
            .map_err(|e| TrajectoryError::InvalidEpisode(e.to_string()))?;
        let eps: f64 = if cfg.noise_std > 0.0 { noise.sample(&mut rng) } else { 0.0 };
        let ea = (base + eps).clamp(-baselines::ACCEL_CLAMP, baselines::ACCEL_CLAMP);
        steps.push(TraceStep {
            lead_pos: lead.pos,
            lead_speed: lead.speed,
            lead_accel: la,
            ego_pos: ego.pos,
            ego_speed: ego.speed,
            ego_accel: ea,
        });
        lead = kinematics::step_motion(lead, la, dt);
        ego = kinematics::step_motion(ego, ea, dt);
    }
    EpisodeTrace::new(dt, steps, seed as i64, EpisodeSource::Synthetic(style))
}
