use ndarray::{s, Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::replay::CmdpTransition;
use super::{AgentHyperparams, LagrangeVariable, SacError};
use crate::env::{CmdpState, STATE_DIM};
use crate::nn::{Adam, AdamConfig, Grads, Mlp, ScalarAdam};
use crate::regressor::Scaler;

/// Actions are `ACTION_SCALE · tanh(u)`.
pub const ACTION_SCALE: f64 = 4.0;
pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;
const LN_2: f64 = std::f64::consts::LN_2;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionMode {
    Stochastic,
    /// `ACTION_SCALE · tanh(mean)`.
    Deterministic,
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

/// `log(1 - tanh(u)^2)` without cancellation.
fn log_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (LN_2 - u - softplus(-2.0 * u))
}

fn squash_log_std(raw: f64) -> f64 {
    LOG_STD_MIN + 0.5 * (LOG_STD_MAX - LOG_STD_MIN) * (raw.tanh() + 1.0)
}

/// Reparameterized actor output for a batch.
#[derive(Debug, Clone)]
pub struct ActorSample {
    pub mean: Array1<f64>,
    pub log_std: Array1<f64>,
    pub raw_log_std: Array1<f64>,
    pub noise: Array1<f64>,
    pub pre_tanh: Array1<f64>,
    pub action: Array1<f64>,
    pub log_prob: Array1<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats {
    pub reward_critic_loss: f64,
    pub cost_critic_loss: f64,
    pub actor_loss: f64,
    pub temperature: f64,
    pub mean_log_prob: f64,
}

#[derive(Debug, Clone)]
struct Optimizers {
    actor: Adam,
    q1: Adam,
    q2: Adam,
    qc: Adam,
    log_alpha: ScalarAdam,
}

impl Optimizers {
    fn new(a: &SacAgent) -> Self {
        let cfg = AdamConfig::with_lr(a.hp.learning_rate);
        Self {
            actor: Adam::new(&a.actor, cfg),
            q1: Adam::new(&a.q1, cfg),
            q2: Adam::new(&a.q2, cfg),
            qc: Adam::new(&a.qc, cfg),
            log_alpha: ScalarAdam::new(cfg),
        }
    }
}

/// Tanh-Gaussian actor with twin reward critics, a cost critic and target
/// copies of all three. Networks see standardized states; critics see the
/// action divided by [`ACTION_SCALE`].
#[derive(Debug, Clone)]
pub struct SacAgent {
    pub hp: AgentHyperparams,
    pub obs_scaler: Scaler,
    pub actor: Mlp,
    pub q1: Mlp,
    pub q2: Mlp,
    pub qc: Mlp,
    pub q1_target: Mlp,
    pub q2_target: Mlp,
    pub qc_target: Mlp,
    pub log_alpha: f64,
    pub lagrange: LagrangeVariable,
    pub updates: u64,
    opt: Option<Optimizers>,
}

impl PartialEq for SacAgent {
    fn eq(&self, o: &Self) -> bool {
        self.hp == o.hp
            && self.obs_scaler == o.obs_scaler
            && self.actor == o.actor
            && self.q1 == o.q1
            && self.q2 == o.q2
            && self.qc == o.qc
            && self.q1_target == o.q1_target
            && self.q2_target == o.q2_target
            && self.qc_target == o.qc_target
            && self.log_alpha.to_bits() == o.log_alpha.to_bits()
            && self.lagrange.kappa.to_bits() == o.lagrange.kappa.to_bits()
            && self.updates == o.updates
    }
}

fn sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut v = vec![input];
    v.extend_from_slice(hidden);
    v.push(output);
    v
}

impl SacAgent {
    pub fn new(hp: AgentHyperparams, obs_scaler: Scaler) -> Result<Self, SacError> {
        hp.validate()?;
        if obs_scaler.dim() != STATE_DIM {
            return Err(SacError::InvalidHyperparams(format!(
                "observation scaler has {} dims, expected {STATE_DIM}",
                obs_scaler.dim()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(hp.seed ^ 0x5ac0_a9e7);
        let mut actor = Mlp::new(&sizes(STATE_DIM, &hp.actor_hidden, 2), &mut rng);
        actor.scale_output_layer(0.1);
        let critic = sizes(STATE_DIM + 1, &hp.critic_hidden, 1);
        let q1 = Mlp::new(&critic, &mut rng);
        let q2 = Mlp::new(&critic, &mut rng);
        let qc = Mlp::new(&critic, &mut rng);
        Ok(Self::from_parts(hp, obs_scaler, actor, [q1.clone(), q2.clone(), qc.clone()], [q1, q2, qc]))
    }

    /// Assembles an agent from existing networks with fresh optimizer state.
    pub fn from_parts(hp: AgentHyperparams, obs_scaler: Scaler, actor: Mlp, critics: [Mlp; 3], targets: [Mlp; 3]) -> Self {
        let [q1, q2, qc] = critics;
        let [q1_target, q2_target, qc_target] = targets;
        Self {
            log_alpha: hp.initial_temperature.ln(),
            lagrange: LagrangeVariable::new(hp.initial_kappa),
            hp,
            obs_scaler,
            actor,
            q1,
            q2,
            qc,
            q1_target,
            q2_target,
            qc_target,
            updates: 0,
            opt: None,
        }
    }

    pub fn temperature(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn lambda(&self) -> f64 {
        self.lagrange.lambda()
    }

    pub fn normalize(&self, s: &CmdpState) -> [f64; STATE_DIM] {
        let a = s.to_array();
        let mut out = [0.0; STATE_DIM];
        for i in 0..STATE_DIM {
            out[i] = (a[i] - self.obs_scaler.mean[i]) / self.obs_scaler.std[i];
        }
        out
    }

    fn normalize_rows<'b>(&self, rows: impl ExactSizeIterator<Item = &'b [f64; STATE_DIM]>) -> Array2<f64> {
        let n = rows.len();
        let mut x = Array2::zeros((n, STATE_DIM));
        for (i, r) in rows.enumerate() {
            for j in 0..STATE_DIM {
                x[[i, j]] = (r[j] - self.obs_scaler.mean[j]) / self.obs_scaler.std[j];
            }
        }
        x
    }

    /// Action for one state. Stochastic mode needs an RNG.
    pub fn act(&self, s: &CmdpState, mode: ActionMode, rng: Option<&mut ChaCha8Rng>) -> f64 {
        let out = self.actor.forward_one(&self.normalize(s));
        match (mode, rng) {
            (ActionMode::Stochastic, Some(rng)) => {
                let eps: f64 = StandardNormal.sample(rng);
                ACTION_SCALE * (out[0] + squash_log_std(out[1]).exp() * eps).tanh()
            }
            (ActionMode::Stochastic, None) => panic!("stochastic actions need an RNG"),
            (ActionMode::Deterministic, _) => ACTION_SCALE * out[0].tanh(),
        }
    }

    /// Squashes actor outputs with the given standard-normal noise.
    pub fn sample_from_outputs(out: &Array2<f64>, noise: Array1<f64>) -> ActorSample {
        let n = out.nrows();
        let mean = out.column(0).to_owned();
        let raw_log_std = out.column(1).to_owned();
        let log_std = raw_log_std.mapv(squash_log_std);
        let mut pre_tanh = Array1::zeros(n);
        let mut action = Array1::zeros(n);
        let mut log_prob = Array1::zeros(n);
        for i in 0..n {
            let u = mean[i] + log_std[i].exp() * noise[i];
            pre_tanh[i] = u;
            action[i] = ACTION_SCALE * u.tanh();
            log_prob[i] = -0.5 * noise[i] * noise[i] - log_std[i] - HALF_LN_2PI - ACTION_SCALE.ln() - log_one_minus_tanh_sq(u);
        }
        ActorSample {
            mean,
            log_std,
            raw_log_std,
            noise,
            pre_tanh,
            action,
            log_prob,
        }
    }

    fn draw_noise(n: usize, rng: &mut ChaCha8Rng) -> Array1<f64> {
        Array1::from_shape_simple_fn(n, || StandardNormal.sample(rng))
    }

    fn critic_input(states: &Array2<f64>, actions: &Array1<f64>) -> Array2<f64> {
        let n = states.nrows();
        let mut x = Array2::zeros((n, STATE_DIM + 1));
        x.slice_mut(s![.., ..STATE_DIM]).assign(states);
        x.column_mut(STATE_DIM).assign(&(actions / ACTION_SCALE));
        x
    }

    /// Bellman targets `(reward, cost)` for a batch, using the given noise
    /// for the next-state actions.
    pub fn targets(&self, batch: &[CmdpTransition], noise: Array1<f64>) -> (Array1<f64>, Array1<f64>) {
        let next = self.normalize_rows(batch.iter().map(|t| &t.next_state));
        let sample = Self::sample_from_outputs(&self.actor.forward(next.view()), noise);
        let x = Self::critic_input(&next, &sample.action);
        let q1 = self.q1_target.forward(x.view());
        let q2 = self.q2_target.forward(x.view());
        let qc = self.qc_target.forward(x.view());
        let alpha = self.temperature();
        let g = self.hp.gamma;
        let n = batch.len();
        let mut yr = Array1::zeros(n);
        let mut yc = Array1::zeros(n);
        for (i, t) in batch.iter().enumerate() {
            if t.done {
                // Collisions are absorbing: the violation persists for every
                // remaining step, so terminating can never look cheaper
                // than staying close behind the lead.
                yr[i] = t.reward;
                yc[i] = t.cost / (1.0 - g);
            } else {
                yr[i] = t.reward + g * (q1[[i, 0]].min(q2[[i, 0]]) - alpha * sample.log_prob[i]);
                yc[i] = t.cost + g * qc[[i, 0]];
            }
        }
        (yr, yc)
    }

    /// Mean squared Bellman error of `net` against fixed targets, with its
    /// parameter gradient.
    pub fn critic_loss_and_grads(&self, net: &Mlp, batch: &[CmdpTransition], y: &Array1<f64>) -> (f64, Grads) {
        let states = self.normalize_rows(batch.iter().map(|t| &t.state));
        let actions = Array1::from_iter(batch.iter().map(|t| t.action));
        let x = Self::critic_input(&states, &actions);
        let (q, cache) = net.forward_cached(x.view(), None);
        let n = batch.len() as f64;
        let mut dy = Array2::zeros((batch.len(), 1));
        let mut loss = 0.0;
        for i in 0..batch.len() {
            let d = q[[i, 0]] - y[i];
            loss += d * d / n;
            dy[[i, 0]] = 2.0 * d / n;
        }
        (loss, net.backward(&cache, &dy).0)
    }

    /// Actor objective `mean[(1−λ)(α·logπ − min Q) + λ·Qc]` for fixed
    /// noise, critics, temperature and λ, with its parameter gradient.
    pub fn actor_loss_and_grads(&self, states: &[[f64; STATE_DIM]], noise: Array1<f64>, lambda: f64) -> (f64, Grads, ActorSample) {
        let x = self.normalize_rows(states.iter());
        let n = states.len();
        let nf = n as f64;
        let (out, cache) = self.actor.forward_cached(x.view(), None);
        let sample = Self::sample_from_outputs(&out, noise);
        let xa = Self::critic_input(&x, &sample.action);
        let (q1, c1) = self.q1.forward_cached(xa.view(), None);
        let (q2, c2) = self.q2.forward_cached(xa.view(), None);
        let (qc, cc) = self.qc.forward_cached(xa.view(), None);
        let ones = Array2::ones((n, 1));
        let d1 = self.q1.backward(&c1, &ones).1;
        let d2 = self.q2.backward(&c2, &ones).1;
        let dc = self.qc.backward(&cc, &ones).1;
        let alpha = self.temperature();
        let w = 1.0 - lambda;
        let half_range = 0.5 * (LOG_STD_MAX - LOG_STD_MIN);
        let mut loss = 0.0;
        let mut dy = Array2::zeros((n, 2));
        for i in 0..n {
            let (q, dq) = if q1[[i, 0]] <= q2[[i, 0]] {
                (q1[[i, 0]], d1[[i, STATE_DIM]])
            } else {
                (q2[[i, 0]], d2[[i, STATE_DIM]])
            };
            let lp = sample.log_prob[i];
            loss += (w * (alpha * lp - q) + lambda * qc[[i, 0]]) / nf;
            let u = sample.pre_tanh[i];
            let th = u.tanh();
            let sigma = sample.log_std[i].exp();
            let eps = sample.noise[i];
            // dx columns are with respect to action / ACTION_SCALE.
            let dl_da = (-w * dq + lambda * dc[[i, STATE_DIM]]) / ACTION_SCALE;
            let dl_du = dl_da * ACTION_SCALE * (1.0 - th * th);
            let dl_dmean = dl_du + w * alpha * 2.0 * th;
            let dl_dlogstd = dl_du * sigma * eps + w * alpha * (-1.0 + 2.0 * th * sigma * eps);
            let tr = sample.raw_log_std[i].tanh();
            dy[[i, 0]] = dl_dmean / nf;
            dy[[i, 1]] = dl_dlogstd * half_range * (1.0 - tr * tr) / nf;
        }
        (loss, self.actor.backward(&cache, &dy).0, sample)
    }

    /// One gradient step on the three critics. Returns the reward and cost
    /// critic losses.
    pub fn update_critics(&mut self, batch: &[CmdpTransition], rng: &mut ChaCha8Rng) -> Result<(f64, f64), SacError> {
        self.check_batch(batch)?;
        let (yr, yc) = self.targets(batch, Self::draw_noise(batch.len(), rng));
        let (l1, g1) = self.critic_loss_and_grads(&self.q1, batch, &yr);
        let (l2, g2) = self.critic_loss_and_grads(&self.q2, batch, &yr);
        let (lc, gc) = self.critic_loss_and_grads(&self.qc, batch, &yc);
        let mut opt = self.opt.take().unwrap_or_else(|| Optimizers::new(self));
        opt.q1.step(&mut self.q1, &g1);
        opt.q2.step(&mut self.q2, &g2);
        opt.qc.step(&mut self.qc, &gc);
        self.opt = Some(opt);
        Ok((0.5 * (l1 + l2), lc))
    }

    /// One gradient step on the actor followed by one on `log α`.
    pub fn update_actor_and_temperature(&mut self, batch: &[CmdpTransition], rng: &mut ChaCha8Rng) -> Result<(f64, f64), SacError> {
        self.check_batch(batch)?;
        let states: Vec<[f64; STATE_DIM]> = batch.iter().map(|t| t.state).collect();
        let (loss, g, sample) = self.actor_loss_and_grads(&states, Self::draw_noise(batch.len(), rng), self.lambda());
        let mut opt = self.opt.take().unwrap_or_else(|| Optimizers::new(self));
        opt.actor.step(&mut self.actor, &g);
        let mean_lp = sample.log_prob.mean().unwrap_or(0.0);
        let g_alpha = self.temperature_gradient(mean_lp);
        opt.log_alpha.step(&mut self.log_alpha, g_alpha);
        self.opt = Some(opt);
        Ok((loss, mean_lp))
    }

    /// Gradient of `−α·(E[logπ] + target_entropy)` with respect to `log α`.
    pub fn temperature_gradient(&self, mean_log_prob: f64) -> f64 {
        -self.temperature() * (mean_log_prob + self.hp.target_entropy)
    }

    pub fn soft_update_targets(&mut self) {
        let tau = self.hp.tau;
        self.q1_target.soft_update_from(&self.q1, tau);
        self.q2_target.soft_update_from(&self.q2, tau);
        self.qc_target.soft_update_from(&self.qc, tau);
    }

    /// Critic step, actor and temperature step, then target tracking.
    pub fn update(&mut self, batch: &[CmdpTransition], rng: &mut ChaCha8Rng) -> Result<UpdateStats, SacError> {
        let (rq, cq) = self.update_critics(batch, rng)?;
        let (al, lp) = self.update_actor_and_temperature(batch, rng)?;
        self.soft_update_targets();
        self.updates += 1;
        Ok(UpdateStats {
            reward_critic_loss: rq,
            cost_critic_loss: cq,
            actor_loss: al,
            temperature: self.temperature(),
            mean_log_prob: lp,
        })
    }

    /// `κ ← κ + lagrange_lr·(estimate − (cost_limit − cost_margin))`.
    pub fn update_lambda(&mut self, cost_estimate: f64) {
        self.lagrange = self.lagrange.update(cost_estimate, self.hp.cost_limit - self.hp.cost_margin, self.hp.lagrange_lr);
    }

    fn check_batch(&self, batch: &[CmdpTransition]) -> Result<(), SacError> {
        if batch.len() < self.hp.batch_size {
            return Err(SacError::BufferTooSmall {
                have: batch.len(),
                need: self.hp.batch_size,
            });
        }
        Ok(())
    }

    /// Deterministic actions for a batch of raw states.
    pub fn act_batch(&self, states: &[[f64; STATE_DIM]]) -> Vec<f64> {
        let out = self.actor.forward(self.normalize_rows(states.iter()).view());
        out.index_axis(Axis(1), 0).iter().map(|m| ACTION_SCALE * m.tanh()).collect()
    }
}
