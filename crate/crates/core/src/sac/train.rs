use std::collections::VecDeque;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::agent::{ActionMode, SacAgent, ACTION_SCALE};
use super::checkpoint::AgentCheckpoint;
use super::replay::{CmdpTransition, ReplayBuffer};
use super::{AgentHyperparams, SacError};
use crate::env::{cost_indicator, CarFollowingEnv, EnvConfig, RolloutRow, STATE_DIM};
use crate::predictor::AccelPredictor;
use crate::regressor::Scaler;
use crate::trajectory::EpisodeTrace;

const OBS_STD_FLOOR: f64 = 0.05;
/// Index of the binary cost indicator in the state vector; left unscaled.
const COST_DIM: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurriculumPhase {
    /// Only the absolute acceleration bounds apply.
    Unlimited,
    /// The per-step rate limit is active.
    RateLimited,
}

impl fmt::Display for CurriculumPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Unlimited => "unlimited",
            Self::RateLimited => "rate_limited",
        })
    }
}

impl FromStr for CurriculumPhase {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "unlimited" => Ok(Self::Unlimited),
            "rate_limited" => Ok(Self::RateLimited),
            _ => Err(format!("unknown curriculum phase `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurriculumSchedule {
    pub episodes: usize,
    /// First episode trained with the rate limit.
    pub switch_episode: usize,
    pub eval_every: usize,
}

impl Default for CurriculumSchedule {
    fn default() -> Self {
        Self {
            episodes: 2000,
            switch_episode: 500,
            eval_every: 100,
        }
    }
}

impl CurriculumSchedule {
    pub fn phase(&self, episode: usize) -> CurriculumPhase {
        if episode >= self.switch_episode {
            CurriculumPhase::RateLimited
        } else {
            CurriculumPhase::Unlimited
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub steps: usize,
    pub episode_return: f64,
    /// Fraction of steps with a safety violation.
    pub mean_cost: f64,
    pub lambda: f64,
    pub temperature: f64,
    pub phase: CurriculumPhase,
    /// Largest change between consecutive applied actions.
    pub max_action_delta: f64,
    pub collision: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub episodes: usize,
    pub steps: usize,
    pub mean_reward: f64,
    pub mean_discounted_cost: f64,
    pub violation_rate: f64,
    pub min_headway: f64,
    /// Applied action against the predictor's acceleration.
    pub rmse_vs_predictor: f64,
    pub max_action_delta: f64,
    pub collisions: usize,
}

impl EvalMetrics {
    pub fn satisfies(&self, cost_limit: f64) -> bool {
        self.collisions == 0 && self.violation_rate <= cost_limit
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalLog {
    pub episode: usize,
    pub lambda: f64,
    pub metrics: EvalMetrics,
    pub constraint_ok: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub episodes: Vec<EpisodeLog>,
    pub evals: Vec<EvalLog>,
}

fn preamble_lines(out: &mut String, preamble: &[String]) {
    for l in preamble {
        let _ = writeln!(out, "# {l}");
    }
}

impl TrainingLog {
    pub fn episodes_csv(&self, preamble: &[String]) -> String {
        let mut out = String::new();
        preamble_lines(&mut out, preamble);
        out.push_str("episode,steps,return,mean_cost,lambda,temperature,curriculum_phase,max_action_delta,collision\n");
        for e in &self.episodes {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                e.episode, e.steps, e.episode_return, e.mean_cost, e.lambda, e.temperature, e.phase, e.max_action_delta, e.collision as u8
            );
        }
        out
    }

    pub fn evals_csv(&self, preamble: &[String]) -> String {
        let mut out = String::new();
        preamble_lines(&mut out, preamble);
        out.push_str("episode,lambda,mean_reward,mean_discounted_cost,violation_rate,min_headway,rmse,max_action_delta,collisions,constraint_ok\n");
        for e in &self.evals {
            let m = &e.metrics;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                e.episode,
                e.lambda,
                m.mean_reward,
                m.mean_discounted_cost,
                m.violation_rate,
                m.min_headway,
                m.rmse_vs_predictor,
                m.max_action_delta,
                m.collisions,
                e.constraint_ok as u8
            );
        }
        out
    }

    /// `(episode, lambda)` pairs, one per training episode.
    pub fn lambda_trace(&self) -> Vec<(usize, f64)> {
        self.episodes.iter().map(|e| (e.episode, e.lambda)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub final_checkpoint: AgentCheckpoint,
    /// Best evaluated checkpoint: highest reward among those meeting the
    /// constraint, else the lowest violation rate.
    pub best_checkpoint: AgentCheckpoint,
    pub best_eval: Option<EvalLog>,
    pub log: TrainingLog,
}

/// Standardization fitted to the states the recorded drivers produce.
pub fn fit_observation_scaler(pool: &[EpisodeTrace], env: &EnvConfig) -> Result<Scaler, SacError> {
    let mut rows = Vec::new();
    for tr in pool {
        let st = tr.steps();
        for i in env.start_index.max(1)..st.len() {
            let s = &st[i];
            let headway = s.gap().max(0.0) / s.ego_speed.max(crate::env::STATE_SPEED_FLOOR);
            rows.push(vec![
                s.lead_accel,
                headway,
                s.ego_speed,
                s.lead_speed - s.ego_speed,
                st[i - 1].ego_accel,
                cost_indicator(headway, &env.safety),
            ]);
        }
    }
    let mut sc = Scaler::fit(&rows).map_err(|_| SacError::EmptyPool)?;
    for s in &mut sc.std {
        *s = s.max(OBS_STD_FLOOR);
    }
    sc.mean[COST_DIM] = 0.0;
    sc.std[COST_DIM] = 1.0;
    Ok(sc)
}

/// Per-episode aggregates of a rollout.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EpisodeSummary {
    pub steps: usize,
    pub episode_return: f64,
    pub violations: usize,
    pub discounted_cost: f64,
    pub min_headway: f64,
    pub sq_error: f64,
    pub max_action_delta: f64,
    pub collision: bool,
}

/// Runs one deterministic (or stochastic) episode and records every step.
pub fn run_episode<'a>(
    agent: &SacAgent,
    env: &mut CarFollowingEnv<'a>,
    trace: &'a EpisodeTrace,
    mode: ActionMode,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<(Vec<RolloutRow>, EpisodeSummary), SacError> {
    let mut s = env.reset(trace)?;
    let dt = env.config().dt;
    let gamma = agent.hp.gamma;
    let mut rows = Vec::with_capacity(env.remaining());
    let mut sum = EpisodeSummary {
        min_headway: f64::INFINITY,
        ..Default::default()
    };
    let mut disc = 1.0;
    let mut prev_applied: Option<f64> = None;
    loop {
        let a = agent.act(&s, mode, rng.as_deref_mut());
        let r = env.step(a)?;
        rows.push(RolloutRow::from_step(sum.steps as f64 * dt, &s, &r));
        sum.steps += 1;
        sum.episode_return += r.reward.total;
        sum.violations += (r.cost > 0.0) as usize;
        sum.discounted_cost += disc * r.cost;
        disc *= gamma;
        sum.min_headway = sum.min_headway.min(r.state.headway);
        sum.sq_error += (r.info.applied_action - r.info.target_accel).powi(2);
        if let Some(p) = prev_applied {
            sum.max_action_delta = sum.max_action_delta.max((r.info.applied_action - p).abs());
        }
        prev_applied = Some(r.info.applied_action);
        s = r.state;
        if r.done {
            sum.collision = r.info.collision;
            break;
        }
    }
    Ok((rows, sum))
}

/// Deterministic-policy metrics over held-out traces.
pub fn evaluate(
    agent: &SacAgent,
    env_cfg: &EnvConfig,
    predictor: &dyn AccelPredictor,
    traces: &[EpisodeTrace],
) -> Result<EvalMetrics, SacError> {
    if traces.is_empty() {
        return Err(SacError::EmptyPool);
    }
    let mut env = CarFollowingEnv::new(*env_cfg, predictor)?;
    let mut m = EvalMetrics {
        episodes: traces.len(),
        steps: 0,
        mean_reward: 0.0,
        mean_discounted_cost: 0.0,
        violation_rate: 0.0,
        min_headway: f64::INFINITY,
        rmse_vs_predictor: 0.0,
        max_action_delta: 0.0,
        collisions: 0,
    };
    let mut violations = 0;
    let mut sq = 0.0;
    for tr in traces {
        let (_, s) = run_episode(agent, &mut env, tr, ActionMode::Deterministic, None)?;
        m.steps += s.steps;
        m.mean_reward += s.episode_return;
        m.mean_discounted_cost += s.discounted_cost;
        violations += s.violations;
        sq += s.sq_error;
        m.min_headway = m.min_headway.min(s.min_headway);
        m.max_action_delta = m.max_action_delta.max(s.max_action_delta);
        m.collisions += s.collision as usize;
    }
    let n = traces.len() as f64;
    m.mean_reward /= n;
    m.mean_discounted_cost /= n;
    m.violation_rate = violations as f64 / m.steps as f64;
    m.rmse_vs_predictor = (sq / m.steps as f64).sqrt();
    Ok(m)
}

/// Checkpoint preference. Without a cost channel every checkpoint counts as
/// feasible, so only the reward decides.
fn better(candidate: &EvalMetrics, incumbent: &EvalMetrics, b: f64, cost_enabled: bool) -> bool {
    if !cost_enabled {
        return candidate.mean_reward > incumbent.mean_reward;
    }
    match (candidate.satisfies(b), incumbent.satisfies(b)) {
        (true, false) => true,
        (false, true) => false,
        (true, true) => candidate.mean_reward > incumbent.mean_reward,
        (false, false) => candidate.violation_rate < incumbent.violation_rate,
    }
}

/// Trains an agent over `pool`, evaluating on `eval_traces` (with the rate
/// limit on) every `schedule.eval_every` episodes.
pub fn train(
    hp: &AgentHyperparams,
    schedule: &CurriculumSchedule,
    env_cfg: &EnvConfig,
    predictor: &dyn AccelPredictor,
    pool: &[EpisodeTrace],
    eval_traces: &[EpisodeTrace],
) -> Result<TrainOutcome, SacError> {
    if pool.is_empty() {
        return Err(SacError::EmptyPool);
    }
    if let Some(i) = eval_traces.iter().position(|e| pool.contains(e)) {
        return Err(SacError::OverlappingEvalTraces(i));
    }
    let mut agent = SacAgent::new(hp.clone(), fit_observation_scaler(pool, env_cfg)?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
    let mut buffer = ReplayBuffer::new(hp.replay_capacity);
    let mut env = CarFollowingEnv::new(*env_cfg, predictor)?;
    let eval_cfg = env_cfg.with_rate_limit(true);
    let mut log = TrainingLog::default();
    let mut recent_costs: VecDeque<f64> = VecDeque::with_capacity(hp.cost_window);
    let mut total_steps: u64 = 0;
    let mut best: Option<(EvalLog, AgentCheckpoint)> = None;

    for episode in 0..schedule.episodes {
        let phase = schedule.phase(episode);
        env.set_rate_limit(phase == CurriculumPhase::RateLimited);
        let trace = &pool[rng.random_range(0..pool.len())];
        let mut s = env.reset(trace)?;
        let random = episode < hp.random_episodes;
        let mut steps = 0;
        let mut ret = 0.0;
        let mut true_cost = 0.0;
        let mut channel_cost = 0.0;
        let mut prev_applied: Option<f64> = None;
        let mut max_delta: f64 = 0.0;
        let collision = loop {
            let a = if random {
                rng.random_range(-ACTION_SCALE..ACTION_SCALE)
            } else {
                agent.act(&s, ActionMode::Stochastic, Some(&mut rng))
            };
            let r = env.step(a)?;
            let cost = if hp.cost_enabled { r.cost } else { 0.0 };
            let mut state = s.to_array();
            let mut next = r.state.to_array();
            if !hp.cost_enabled {
                state[STATE_DIM - 1] = 0.0;
                next[STATE_DIM - 1] = 0.0;
            }
            buffer.push(CmdpTransition {
                state,
                action: a,
                reward: r.reward.total,
                cost,
                next_state: next,
                done: r.info.collision,
            });
            steps += 1;
            total_steps += 1;
            ret += r.reward.total;
            true_cost += r.cost;
            channel_cost += cost;
            if let Some(p) = prev_applied {
                max_delta = max_delta.max((r.info.applied_action - p).abs());
            }
            prev_applied = Some(r.info.applied_action);
            if buffer.len() >= hp.batch_size && total_steps % hp.update_every as u64 == 0 {
                let batch = buffer.sample(hp.batch_size, &mut rng)?;
                agent.update(&batch, &mut rng)?;
            }
            s = r.state;
            if r.done {
                break r.info.collision;
            }
        };
        if recent_costs.len() == hp.cost_window {
            recent_costs.pop_front();
        }
        recent_costs.push_back(channel_cost / steps as f64);
        if !random {
            let est = recent_costs.iter().sum::<f64>() / recent_costs.len() as f64;
            agent.update_lambda(est);
        }
        log.episodes.push(EpisodeLog {
            episode,
            steps,
            episode_return: ret,
            mean_cost: true_cost / steps as f64,
            lambda: agent.lambda(),
            temperature: agent.temperature(),
            phase,
            max_action_delta: max_delta,
            collision,
        });

        let is_eval = schedule.eval_every > 0 && (episode + 1) % schedule.eval_every == 0;
        if is_eval && !eval_traces.is_empty() {
            let metrics = evaluate(&agent, &eval_cfg, predictor, eval_traces)?;
            let entry = EvalLog {
                episode,
                lambda: agent.lambda(),
                metrics,
                constraint_ok: metrics.satisfies(hp.cost_limit),
            };
            log.evals.push(entry);
            if best.as_ref().is_none_or(|(b, _)| better(&metrics, &b.metrics, hp.cost_limit, hp.cost_enabled)) {
                best = Some((entry, AgentCheckpoint::new(agent.clone(), episode + 1, total_steps, phase)));
            }
        }
    }
    let final_checkpoint = AgentCheckpoint::new(agent, schedule.episodes, total_steps, schedule.phase(schedule.episodes.saturating_sub(1)));
    let (best_eval, best_checkpoint) = match best {
        Some((e, c)) => (Some(e), c),
        None => (None, final_checkpoint.clone()),
    };
    Ok(TrainOutcome {
        final_checkpoint,
        best_checkpoint,
        best_eval,
        log,
    })
}
