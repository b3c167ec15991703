//! Soft actor-critic with a Lagrange multiplier trading reward against a
//! safety cost: twin reward critics, one cost critic, target copies,
//! entropy-temperature adaptation, replay and a curriculum-scheduled
//! training loop.

mod agent;
mod checkpoint;
mod replay;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::container::ContainerError;
use crate::env::EnvError;

pub use agent::{ActionMode, ActorSample, SacAgent, UpdateStats, ACTION_SCALE, LOG_STD_MAX, LOG_STD_MIN};
pub use checkpoint::{AgentCheckpoint, CHECKPOINT_KIND};
pub use replay::{CmdpTransition, ReplayBuffer};
pub use train::{
    evaluate, fit_observation_scaler, run_episode, train, CurriculumPhase, CurriculumSchedule, EpisodeLog, EpisodeSummary, EvalLog,
    EvalMetrics, TrainOutcome, TrainingLog,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SacError {
    #[error("replay holds {have} transitions, batch needs {need}")]
    BufferTooSmall { have: usize, need: usize },
    #[error("episode pool is empty")]
    EmptyPool,
    #[error("evaluation trace {0} also appears in the training pool")]
    OverlappingEvalTraces(usize),
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Checkpoint(#[from] ContainerError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentHyperparams {
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    /// Networks and temperature.
    pub learning_rate: f64,
    /// Step size of the Lagrange variable's unbounded parameter.
    pub lagrange_lr: f64,
    pub initial_kappa: f64,
    pub initial_temperature: f64,
    pub target_entropy: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub gamma: f64,
    pub tau: f64,
    pub random_episodes: usize,
    /// Environment transitions per gradient update.
    pub update_every: usize,
    /// Per-step violation-rate budget.
    pub cost_limit: f64,
    /// The multiplier drives the training cost towards
    /// `cost_limit - cost_margin`; selection and evaluation still use
    /// `cost_limit`.
    pub cost_margin: f64,
    /// Training episodes averaged for the Lagrange update.
    pub cost_window: usize,
    /// `false` zeroes the cost channel (unconstrained ablation).
    pub cost_enabled: bool,
    pub seed: u64,
}

impl Default for AgentHyperparams {
    fn default() -> Self {
        Self {
            actor_hidden: vec![128, 256, 128],
            critic_hidden: vec![128, 128],
            learning_rate: 3e-4,
            lagrange_lr: 0.2,
            initial_kappa: 0.0,
            initial_temperature: 0.1,
            target_entropy: -1.0,
            replay_capacity: 1_000_000,
            batch_size: 128,
            gamma: 0.99,
            tau: 0.005,
            random_episodes: 100,
            update_every: 5,
            cost_limit: 0.1,
            cost_margin: 0.0,
            cost_window: 10,
            cost_enabled: true,
            seed: 0,
        }
    }
}

impl AgentHyperparams {
    pub fn validate(&self) -> Result<(), SacError> {
        let bad = |m: &str| Err(SacError::InvalidHyperparams(m.to_string()));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad("gamma must lie in (0, 1)");
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return bad("replay capacity must be at least the batch size");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]");
        }
        if !(self.learning_rate > 0.0 && self.lagrange_lr > 0.0 && self.initial_temperature > 0.0) {
            return bad("learning rates and temperature must be positive");
        }
        if self.update_every == 0 || self.cost_window == 0 {
            return bad("update_every and cost_window must be positive");
        }
        if !(self.cost_margin >= 0.0 && self.cost_margin < self.cost_limit) {
            return bad("cost_margin must lie in [0, cost_limit)");
        }
        if self.actor_hidden.iter().chain(&self.critic_hidden).any(|h| *h == 0) {
            return bad("hidden sizes must be positive");
        }
        Ok(())
    }
}

/// λ = sigmoid(κ) with κ unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LagrangeVariable {
    pub kappa: f64,
}

impl LagrangeVariable {
    pub fn new(kappa: f64) -> Self {
        Self { kappa }
    }

    pub fn lambda(&self) -> f64 {
        1.0 / (1.0 + (-self.kappa).exp())
    }

    /// `κ ← κ + lr·(estimate − b)`.
    pub fn update(&self, estimate: f64, b: f64, lr: f64) -> Self {
        Self {
            kappa: self.kappa + lr * (estimate - b),
        }
    }
}
