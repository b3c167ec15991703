//! Per-style MLP regressors predicting ego acceleration from lead history
//! and the current ego state, trained on MAE with dropout and early
//! stopping.

use std::fmt::Write as _;

use ndarray::{Array2, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::StyleTag;
use crate::container::{Container, ContainerError};
use crate::kinematics;
use crate::nn::{self, Adam, AdamConfig, Mlp};
use crate::predictor::{AccelPredictor, FollowWindow};
use crate::style::DrivingStyle;
use crate::trajectory::EpisodeTrace;

pub const N_FEATURES: usize = 8;
pub const SCALER_STD_FLOOR: f64 = 1e-8;
pub const MIN_TRAINING_SAMPLES: usize = 100;
pub const MODEL_KIND: &str = "regressor";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegressorError {
    #[error("feature index {0} needs two earlier samples")]
    IndexTooEarly(usize),
    #[error("feature index {index} out of range for {len} steps")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("ego speed too small for a headway at index {0}")]
    UndefinedHeadway(usize),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("input has {got} features, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { got: usize, min: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Container(#[from] ContainerError),
}

/// `[a_lead(t-2), a_lead(t-1), a_lead(t), v_lead(t-2), v_lead(t-1), v_lead(t), v_ego(t), headway(t)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector(pub [f64; N_FEATURES]);

impl FeatureVector {
    pub fn from_window(w: &FollowWindow) -> Option<Self> {
        let h = kinematics::headway(w.gap, w.ego_speed).ok()?;
        let [a0, a1, a2] = w.lead_accel;
        let [v0, v1, v2] = w.lead_speed;
        Some(Self([a0, a1, a2, v0, v1, v2, w.ego_speed, h]))
    }
}

pub fn follow_window(ep: &EpisodeTrace, t: usize) -> Result<FollowWindow, RegressorError> {
    let steps = ep.steps();
    if t < 2 {
        return Err(RegressorError::IndexTooEarly(t));
    }
    if t >= steps.len() {
        return Err(RegressorError::IndexOutOfRange { index: t, len: steps.len() });
    }
    let (p2, p1, s) = (&steps[t - 2], &steps[t - 1], &steps[t]);
    Ok(FollowWindow {
        lead_accel: [p2.lead_accel, p1.lead_accel, s.lead_accel],
        lead_speed: [p2.lead_speed, p1.lead_speed, s.lead_speed],
        ego_speed: s.ego_speed,
        gap: s.gap(),
    })
}

pub fn build_features(ep: &EpisodeTrace, t: usize) -> Result<FeatureVector, RegressorError> {
    let w = follow_window(ep, t)?;
    FeatureVector::from_window(&w).ok_or(RegressorError::UndefinedHeadway(t))
}

/// Per-feature standardization with the population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self, RegressorError> {
        let first = rows.first().ok_or(RegressorError::EmptyDataset)?;
        let d = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            if r.len() != d {
                return Err(RegressorError::DimensionMismatch { expected: d, got: r.len() });
            }
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for r in rows {
            for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var.iter().map(|v| (v / n).sqrt().max(SCALER_STD_FLOOR)).collect();
        Ok(Self { mean, std })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            mean: vec![0.0; d],
            std: vec![1.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.std).map(|((x, m), s)| (x - m) / s).collect()
    }

    pub fn unscale(&self, z: &[f64]) -> Vec<f64> {
        z.iter().zip(&self.mean).zip(&self.std).map(|((z, m), s)| z * s + m).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub dropout: Vec<f64>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub min_delta: f64,
    pub patience: usize,
    /// Train, validation and test fractions.
    pub split: [f64; 3],
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self::for_style(DrivingStyle::Normal)
    }
}

impl TrainConfig {
    pub fn for_style(style: DrivingStyle) -> Self {
        let (hidden, batch_size) = match style {
            DrivingStyle::Aggressive => (vec![256, 128, 64], 32),
            DrivingStyle::Normal => (vec![256, 256, 128], 64),
            DrivingStyle::Conservative => (vec![256, 128, 64], 64),
        };
        Self {
            hidden,
            dropout: vec![0.2, 0.15, 0.1],
            learning_rate: 1e-4,
            batch_size,
            min_delta: 0.001,
            patience: 5,
            split: [0.65, 0.15, 0.20],
            max_epochs: 200,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), RegressorError> {
        let bad = |m: &str| Err(RegressorError::InvalidConfig(m.to_string()));
        if (self.split.iter().sum::<f64>() - 1.0).abs() > 1e-9 || self.split.iter().any(|f| !(*f > 0.0)) {
            return bad("split fractions must be positive and sum to 1");
        }
        if self.hidden.iter().any(|h| *h == 0) {
            return bad("hidden sizes must be positive");
        }
        if self.dropout.len() > self.hidden.len() || self.dropout.iter().any(|p| !(0.0..1.0).contains(p)) {
            return bad("one dropout rate in [0, 1) per hidden layer at most");
        }
        if self.batch_size == 0 || !(self.learning_rate > 0.0) || self.max_epochs == 0 {
            return bad("batch size, learning rate and max epochs must be positive");
        }
        Ok(())
    }
}

/// A trained acceleration predictor: network plus input scaler.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub style: DrivingStyle,
    pub net: Mlp,
    pub dropout: Vec<f64>,
    pub scaler: Scaler,
    pub seed: u64,
}

pub enum Mode<'a> {
    Infer,
    /// Seeded inverted dropout.
    Train(&'a mut ChaCha8Rng),
}

impl MlpModel {
    pub fn new(style: DrivingStyle, net: Mlp, dropout: Vec<f64>, scaler: Scaler, seed: u64) -> Self {
        Self {
            style,
            net,
            dropout,
            scaler,
            seed,
        }
    }

    pub fn forward(&self, f: &[f64], mode: Mode<'_>) -> Result<f64, RegressorError> {
        let d = self.net.input_dim();
        if f.len() != d || self.scaler.dim() != d {
            return Err(RegressorError::DimensionMismatch { expected: d, got: f.len() });
        }
        let z = self.scaler.apply(f);
        let x = ArrayView2::from_shape((1, d), &z).expect("row vector");
        let y = match mode {
            Mode::Infer => self.net.forward(x),
            Mode::Train(rng) => self.net.forward_cached(x, Some((&self.dropout, rng))).0,
        };
        Ok(y[[0, 0]])
    }

    pub fn predict_features(&self, f: &FeatureVector) -> f64 {
        self.forward(&f.0, Mode::Infer).expect("feature dimension is fixed")
    }

    pub fn predict_batch(&self, rows: &[[f64; N_FEATURES]]) -> Vec<f64> {
        if rows.is_empty() {
            return Vec::new();
        }
        let x = scaled_matrix(&self.scaler, rows, None);
        self.net.forward(x.view()).into_raw_vec_and_offset().0
    }

    pub fn to_container(&self, config_hash: &str) -> Container {
        let mut c = Container::new(MODEL_KIND).with_header(config_hash, self.seed);
        c.set_meta("style", self.style);
        c.set_meta("seed", self.seed);
        c.set_vector("dropout", &self.dropout);
        c.set_vector("scaler.mean", &self.scaler.mean);
        c.set_vector("scaler.std", &self.scaler.std);
        c.put_mlp("net", &self.net);
        c
    }

    pub fn from_container(c: &Container) -> Result<Self, RegressorError> {
        c.expect_kind(MODEL_KIND)?;
        let style: DrivingStyle = c.meta("style")?;
        let net = c.get_mlp("net")?;
        let scaler = Scaler {
            mean: c.vector("scaler.mean")?,
            std: c.vector("scaler.std")?,
        };
        if scaler.dim() != net.input_dim() || scaler.std.len() != scaler.dim() || net.output_dim() != 1 {
            return Err(RegressorError::DimensionMismatch {
                expected: net.input_dim(),
                got: scaler.dim(),
            });
        }
        Ok(Self {
            style,
            net,
            dropout: c.vector("dropout")?,
            scaler,
            seed: c.meta("seed")?,
        })
    }
}

impl AccelPredictor for MlpModel {
    fn predict(&self, w: &FollowWindow) -> f64 {
        match FeatureVector::from_window(w) {
            Some(f) => self.predict_features(&f),
            None => 0.0,
        }
    }
}

/// Feature rows and acceleration targets.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub features: Vec<[f64; N_FEATURES]>,
    pub targets: Vec<f64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn push(&mut self, f: FeatureVector, y: f64) {
        self.features.push(f.0);
        self.targets.push(y);
    }

    pub fn extend(&mut self, other: &Dataset) {
        self.features.extend_from_slice(&other.features);
        self.targets.extend_from_slice(&other.targets);
    }

    fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: idx.iter().map(|i| self.features[*i]).collect(),
            targets: idx.iter().map(|i| self.targets[*i]).collect(),
        }
    }

    /// Every step from index 2 on, targetting the recorded ego acceleration.
    pub fn from_episode(ep: &EpisodeTrace) -> Self {
        let mut d = Dataset::default();
        for t in 2..ep.len() {
            if let Ok(f) = build_features(ep, t) {
                d.push(f, ep.steps()[t].ego_accel);
            }
        }
        d
    }

    /// Split an episode's steps by style tag; doubly tagged steps go to both
    /// datasets.
    pub fn partition_by_tags(ep: &EpisodeTrace, tags: &[Option<StyleTag>]) -> [Dataset; 3] {
        let mut out: [Dataset; 3] = Default::default();
        for t in 2..ep.len() {
            let (Some(tag), Ok(f)) = (tags.get(t).copied().flatten(), build_features(ep, t)) else {
                continue;
            };
            for s in tag.styles() {
                out[s.index()].push(f, ep.steps()[t].ego_accel);
            }
        }
        out
    }

    pub fn to_csv(&self, preamble: &[String]) -> String {
        let mut out = String::new();
        for l in preamble {
            let _ = writeln!(out, "# {l}");
        }
        out.push_str("lead_accel_t2,lead_accel_t1,lead_accel_t0,lead_speed_t2,lead_speed_t1,lead_speed_t0,ego_speed,headway,target\n");
        for (f, y) in self.features.iter().zip(&self.targets) {
            let vals: Vec<String> = f.iter().chain(std::iter::once(y)).map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", vals.join(","));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, RegressorError> {
        let mut d = Dataset::default();
        let mut header = true;
        for (i, line) in text.lines().enumerate() {
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            if header {
                header = false;
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|v| v.trim().parse())
                .collect::<Result<_, _>>()
                .map_err(|_| RegressorError::InvalidConfig(format!("dataset line {}", i + 1)))?;
            if vals.len() != N_FEATURES + 1 {
                return Err(RegressorError::DimensionMismatch {
                    expected: N_FEATURES + 1,
                    got: vals.len(),
                });
            }
            let mut f = [0.0; N_FEATURES];
            f.copy_from_slice(&vals[..N_FEATURES]);
            d.push(FeatureVector(f), vals[N_FEATURES]);
        }
        Ok(d)
    }
}

fn scaled_matrix(s: &Scaler, rows: &[[f64; N_FEATURES]], idx: Option<&[usize]>) -> Array2<f64> {
    let n = idx.map_or(rows.len(), <[usize]>::len);
    let mut x = Array2::zeros((n, N_FEATURES));
    for r in 0..n {
        let src = &rows[idx.map_or(r, |i| i[r])];
        for c in 0..N_FEATURES {
            x[[r, c]] = (src[c] - s.mean[c]) / s.std[c];
        }
    }
    x
}

pub fn mae(pred: &[f64], actual: &[f64]) -> Result<f64, RegressorError> {
    if pred.len() != actual.len() {
        return Err(RegressorError::LengthMismatch(pred.len(), actual.len()));
    }
    if pred.is_empty() {
        return Err(RegressorError::EmptyDataset);
    }
    Ok(pred.iter().zip(actual).map(|(p, a)| (p - a).abs()).sum::<f64>() / pred.len() as f64)
}

pub fn rmse(pred: &[f64], actual: &[f64]) -> Result<f64, RegressorError> {
    if pred.len() != actual.len() {
        return Err(RegressorError::LengthMismatch(pred.len(), actual.len()));
    }
    if pred.is_empty() {
        return Err(RegressorError::EmptyDataset);
    }
    Ok((pred.iter().zip(actual).map(|(p, a)| (p - a) * (p - a)).sum::<f64>() / pred.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: usize,
    pub train_mae: f64,
    pub val_mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub style: DrivingStyle,
    pub epochs: Vec<EpochRow>,
    pub best_epoch: usize,
    pub best_val_mae: f64,
    pub test_mae: f64,
    pub n_params: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub stopped_early: bool,
}

impl TrainingReport {
    pub fn epochs_csv(&self, preamble: &[String]) -> String {
        let mut out = String::new();
        for l in preamble {
            let _ = writeln!(out, "# {l}");
        }
        out.push_str("epoch,train_mae,val_mae\n");
        for r in &self.epochs {
            let _ = writeln!(out, "{},{},{}", r.epoch, r.train_mae, r.val_mae);
        }
        out
    }
}

/// Tracks the early-stopping rule: stop after `patience` consecutive epochs
/// without an improvement of at least `min_delta` over the best value.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    pub min_delta: f64,
    pub patience: usize,
    reference: f64,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(min_delta: f64, patience: usize) -> Self {
        Self {
            min_delta,
            patience,
            reference: f64::INFINITY,
            stale: 0,
        }
    }

    /// Record an epoch's validation loss; true when training should stop.
    pub fn observe(&mut self, val: f64) -> bool {
        if val <= self.reference - self.min_delta || self.reference.is_infinite() {
            self.reference = self.reference.min(val);
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        self.stale >= self.patience
    }
}

fn split_with(data: &Dataset, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> [Dataset; 3] {
    let mut idx: Vec<usize> = (0..data.len()).collect();
    idx.shuffle(rng);
    let n_train = (((data.len() as f64) * cfg.split[0]).round() as usize).min(data.len());
    let n_val = ((data.len() as f64) * cfg.split[1]).round() as usize;
    let (train_idx, rest) = idx.split_at(n_train);
    let (val_idx, test_idx) = rest.split_at(n_val.min(rest.len()));
    [data.subset(train_idx), data.subset(val_idx), data.subset(test_idx)]
}

/// The train / validation / test partition [`train_regressor`] uses for
/// this dataset and configuration.
pub fn split_dataset(data: &Dataset, cfg: &TrainConfig) -> [Dataset; 3] {
    split_with(data, cfg, &mut ChaCha8Rng::seed_from_u64(cfg.seed))
}

/// Train with mini-batch Adam on the mean absolute error. Returns the
/// parameters of the epoch with the lowest validation MAE.
pub fn train_regressor(
    data: &Dataset,
    style: DrivingStyle,
    cfg: &TrainConfig,
) -> Result<(MlpModel, TrainingReport), RegressorError> {
    cfg.validate()?;
    if data.len() < MIN_TRAINING_SAMPLES {
        return Err(RegressorError::TooFewSamples {
            got: data.len(),
            min: MIN_TRAINING_SAMPLES,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let [train, val, test] = split_with(data, cfg, &mut rng);

    let rows: Vec<Vec<f64>> = train.features.iter().map(|f| f.to_vec()).collect();
    let scaler = Scaler::fit(&rows)?;
    let mut sizes = vec![N_FEATURES];
    sizes.extend(&cfg.hidden);
    sizes.push(1);
    let net = Mlp::new(&sizes, &mut rng);
    let mut model = MlpModel::new(style, net, cfg.dropout.clone(), scaler, cfg.seed);
    let mut opt = Adam::new(&model.net, AdamConfig::with_lr(cfg.learning_rate));

    let x_train = scaled_matrix(&model.scaler, &train.features, None);
    let eval = |m: &MlpModel, d: &Dataset| -> f64 {
        if d.is_empty() {
            return f64::NAN;
        }
        mae(&m.predict_batch(&d.features), &d.targets).expect("non-empty")
    };

    let mut stopper = EarlyStopping::new(cfg.min_delta, cfg.patience);
    let mut best = (f64::INFINITY, 0usize, model.net.clone());
    let mut epochs = Vec::new();
    let mut stopped_early = false;
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let xb = x_train.select(ndarray::Axis(0), batch);
            let (y, cache) = model.net.forward_cached(xb.view(), Some((&model.dropout, &mut rng)));
            let n = batch.len() as f64;
            let dy = Array2::from_shape_fn((batch.len(), 1), |(r, _)| {
                let e = y[[r, 0]] - train.targets[batch[r]];
                if e > 0.0 {
                    1.0 / n
                } else if e < 0.0 {
                    -1.0 / n
                } else {
                    0.0
                }
            });
            let (g, _) = model.net.backward(&cache, &dy);
            opt.step(&mut model.net, &g);
        }
        let train_mae = eval(&model, &train);
        let val_mae = if val.is_empty() { train_mae } else { eval(&model, &val) };
        epochs.push(EpochRow { epoch, train_mae, val_mae });
        if val_mae < best.0 {
            best = (val_mae, epoch, model.net.clone());
        }
        if stopper.observe(val_mae) {
            stopped_early = epoch < cfg.max_epochs;
            break;
        }
    }
    model.net = best.2;
    let test_mae = eval(&model, &test);
    let report = TrainingReport {
        style,
        epochs,
        best_epoch: best.1,
        best_val_mae: best.0,
        test_mae,
        n_params: model.net.n_params(),
        n_train: train.len(),
        n_val: val.len(),
        n_test: test.len(),
        stopped_early,
    };
    Ok((model, report))
}

/// Smooth absolute-error surrogate (Huber with a tiny threshold).
fn huber(e: f64, delta: f64) -> (f64, f64) {
    if e.abs() <= delta {
        (0.5 * e * e / delta, e / delta)
    } else {
        (e.abs() - 0.5 * delta, e.signum())
    }
}

/// Max relative difference between the analytic parameter gradient of the
/// smoothed absolute error and central finite differences (h = 1e-5).
/// Dropout is not applied.
pub fn gradient_check(model: &MlpModel, f: &[f64], y: f64) -> Result<f64, RegressorError> {
    const DELTA: f64 = 1e-6;
    let d = model.net.input_dim();
    if f.len() != d {
        return Err(RegressorError::DimensionMismatch { expected: d, got: f.len() });
    }
    let z = model.scaler.apply(f);
    let x = ArrayView2::from_shape((1, d), &z).expect("row vector");
    let (out, cache) = model.net.forward_cached(x, None);
    let (_, dl) = huber(out[[0, 0]] - y, DELTA);
    let (g, _) = model.net.backward(&cache, &Array2::from_elem((1, 1), dl));
    let p0 = model.net.flat_params();
    let mut probe = model.net.clone();
    let numeric = nn::numeric_gradient(&p0, 1e-5, |p| {
        probe.set_flat_params(p);
        huber(probe.forward(x)[[0, 0]] - y, DELTA).0
    });
    Ok(nn::max_relative_error(&g.flat(), &numeric))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Dense;
    use crate::trajectory::{generate_synthetic_episode, EpisodeSource, TraceStep};
    use ndarray::array;
    use proptest::prelude::*;

    fn constant_episode() -> EpisodeTrace {
        let steps = (0..130)
            .map(|i| {
                let x = 20.0 * 0.08 * i as f64;
                TraceStep {
                    lead_pos: x + 30.0,
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
    fn feature_examples() {
        let ep = constant_episode();
        assert_eq!(build_features(&ep, 1), Err(RegressorError::IndexTooEarly(1)));
        assert_eq!(build_features(&ep, 7).unwrap().0, [0.0, 0.0, 0.0, 20.0, 20.0, 20.0, 20.0, 1.5]);

        let ep = generate_synthetic_episode(DrivingStyle::Normal, 4, 12.0).unwrap();
        let s = ep.steps();
        let f = build_features(&ep, 10).unwrap().0;
        let want = [
            s[8].lead_accel,
            s[9].lead_accel,
            s[10].lead_accel,
            s[8].lead_speed,
            s[9].lead_speed,
            s[10].lead_speed,
            s[10].ego_speed,
            (s[10].lead_pos - s[10].ego_pos) / s[10].ego_speed,
        ];
        assert_eq!(f, want);
    }

    #[test]
    fn scaler_examples() {
        let rows = vec![vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]];
        let s = Scaler::fit(&rows).unwrap();
        assert_eq!(s.mean, vec![2.0, 5.0]);
        assert!((s.std[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        let z: Vec<f64> = rows.iter().map(|r| s.apply(r)[0]).collect();
        assert!((z[0] + 1.224744871391589).abs() < 1e-12 && z[1] == 0.0 && (z[2] - 1.224744871391589).abs() < 1e-12);
        assert!(rows.iter().all(|r| s.apply(r)[1] == 0.0));
        assert_eq!(s.apply(&s.mean), vec![0.0, 0.0]);
        assert_eq!(Scaler::fit(&[]), Err(RegressorError::EmptyDataset));
    }

    #[test]
    fn forward_examples() {
        let zero = MlpModel::new(DrivingStyle::Normal, Mlp::zeros(&[8, 4, 1]), vec![], Scaler::identity(8), 0);
        assert_eq!(zero.forward(&[1.0; 8], Mode::Infer).unwrap(), 0.0);
        assert!(matches!(zero.forward(&[1.0; 3], Mode::Infer), Err(RegressorError::DimensionMismatch { .. })));

        let net = Mlp {
            layers: vec![
                Dense { w: Array2::from_shape_fn((8, 1), |(i, _)| i as f64 * 0.1), b: array![-0.5] },
                Dense { w: array![[2.0]], b: array![0.25] },
            ],
        };
        let m = MlpModel::new(DrivingStyle::Normal, net, vec![0.0], Scaler::identity(8), 0);
        let x = [1.0, 2.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0];
        // w·x = 0.1*2 + 0.4*1 + 0.7*1 = 1.3; relu(0.8)*2 + 0.25 = 1.85
        let y = m.forward(&x, Mode::Infer).unwrap();
        assert!((y - 1.85).abs() < 1e-12);
        assert_eq!(m.forward(&x, Mode::Infer).unwrap(), y);
    }

    #[test]
    fn mae_examples() {
        assert!((mae(&[0.1, 0.2], &[0.0, 0.4]).unwrap() - 0.15).abs() < 1e-15);
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mae(&[1.0], &[-1.0]).unwrap(), 2.0);
        assert_eq!(mae(&[1.0], &[]), Err(RegressorError::LengthMismatch(1, 0)));
        assert_eq!(mae(&[], &[]), Err(RegressorError::EmptyDataset));
    }

    #[test]
    fn patience_rule() {
        let mut s = EarlyStopping::new(0.001, 5);
        assert!(!s.observe(0.9));
        // plateau starting at epoch e = 2
        let stops: Vec<bool> = (0..6).map(|_| s.observe(0.5)).collect();
        assert_eq!(stops, vec![false, false, false, false, false, true]);
    }

    #[test]
    fn gradient_check_small_nets() {
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let net = Mlp::new(&[8, 4, 1], &mut rng);
            let m = MlpModel::new(DrivingStyle::Normal, net, vec![], Scaler::identity(8), seed);
            let f: Vec<f64> = (0..8).map(|i| ((seed as f64 + 1.0) * (i as f64 + 0.3)).sin()).collect();
            assert!(gradient_check(&m, &f, 0.7).unwrap() < 1e-4);
        }
        let zero = MlpModel::new(DrivingStyle::Normal, Mlp::zeros(&[8, 4, 1]), vec![], Scaler::identity(8), 0);
        assert_eq!(gradient_check(&zero, &[0.5; 8], 0.0).unwrap(), 0.0);
    }

    #[test]
    fn linear_net_gradient_is_sign_times_input() {
        let net = Mlp { layers: vec![Dense { w: Array2::from_elem((8, 1), 0.1), b: array![0.0] }] };
        let m = MlpModel::new(DrivingStyle::Normal, net, vec![], Scaler::identity(8), 0);
        let x = [1.0, -2.0, 0.5, 0.0, 3.0, 1.0, -1.0, 2.0];
        let (out, cache) = m.net.forward_cached(ArrayView2::from_shape((1, 8), &x).unwrap(), None);
        let e = out[[0, 0]] - 10.0;
        let (_, dl) = huber(e, 1e-6);
        let (g, _) = m.net.backward(&cache, &Array2::from_elem((1, 1), dl));
        let mut want: Vec<f64> = x.iter().map(|v| e.signum() * v).collect();
        want.push(e.signum());
        assert_eq!(g.flat(), want);
        assert!(gradient_check(&m, &x, 10.0).unwrap() < 1e-6);
    }

    #[test]
    fn fits_constant_target_and_is_reproducible() {
        let mut d = Dataset::default();
        for seed in 0..6 {
            let ep = generate_synthetic_episode(DrivingStyle::Aggressive, seed, 20.0).unwrap();
            for t in 2..ep.len() {
                d.push(build_features(&ep, t).unwrap(), 0.0);
            }
        }
        let cfg = TrainConfig {
            max_epochs: 10,
            ..TrainConfig::for_style(DrivingStyle::Aggressive)
        };
        let (m, r) = train_regressor(&d, DrivingStyle::Aggressive, &cfg).unwrap();
        let best = r.epochs[r.best_epoch - 1];
        assert!(best.train_mae < 0.01, "{:?}", r.epochs);
        let (m2, r2) = train_regressor(&d, DrivingStyle::Aggressive, &cfg).unwrap();
        assert_eq!(m, m2);
        assert_eq!(r, r2);
        assert!(r.n_train + r.n_val + r.n_test == d.len());

        let small = Dataset { features: d.features[..50].to_vec(), targets: d.targets[..50].to_vec() };
        assert!(matches!(train_regressor(&small, DrivingStyle::Normal, &cfg), Err(RegressorError::TooFewSamples { .. })));
    }

    #[test]
    fn model_file_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let scaler = Scaler { mean: (0..8).map(|i| i as f64 * 1.1).collect(), std: vec![0.3; 8] };
        let m = MlpModel::new(DrivingStyle::Conservative, Mlp::new(&[8, 5, 3, 1], &mut rng), vec![0.2, 0.1], scaler, 77);
        let text = m.to_container("deadbeef").render();
        let back = MlpModel::from_container(&Container::parse(&text).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn dataset_csv_round_trip() {
        let ep = generate_synthetic_episode(DrivingStyle::Normal, 1, 10.0).unwrap();
        let d = Dataset::from_episode(&ep);
        assert_eq!(d.len(), ep.len() - 2);
        assert_eq!(Dataset::from_csv(&d.to_csv(&["x=1".into()])).unwrap(), d);
    }

    proptest! {
        #[test]
        fn mae_metric_properties(
            a in proptest::collection::vec(-5.0..5.0f64, 1..30),
            shift_b in -1.0..1.0f64, shift_c in -1.0..1.0f64,
        ) {
            let b: Vec<f64> = a.iter().map(|x| x + shift_b * x.sin()).collect();
            let c: Vec<f64> = a.iter().map(|x| x - shift_c * x.cos()).collect();
            let ab = mae(&a, &b).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, mae(&b, &a).unwrap());
            prop_assert!(mae(&a, &c).unwrap() <= ab + mae(&b, &c).unwrap() + 1e-12);
        }

        #[test]
        fn scaler_round_trip(rows in proptest::collection::vec(proptest::collection::vec(-1e3..1e3f64, 3), 2..20)) {
            let s = Scaler::fit(&rows).unwrap();
            for r in &rows {
                let back = s.unscale(&s.apply(r));
                for ((x, y), m) in r.iter().zip(back).zip(&s.mean) {
                    prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(m.abs()).max(1.0));
                }
            }
        }
    }
}
