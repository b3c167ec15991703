use super::agent::SacAgent;
use super::train::CurriculumPhase;
use super::{AgentHyperparams, LagrangeVariable, SacError};
use crate::container::{Container, ContainerError};
use crate::regressor::Scaler;

pub const CHECKPOINT_KIND: &str = "sac-agent";

const NETS: [&str; 7] = ["actor", "q1", "q2", "qc", "q1_target", "q2_target", "qc_target"];

/// Agent snapshot with training counters. Optimizer moments are not kept.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentCheckpoint {
    pub agent: SacAgent,
    pub episodes: usize,
    pub total_steps: u64,
    pub phase: CurriculumPhase,
}

impl AgentCheckpoint {
    pub fn new(agent: SacAgent, episodes: usize, total_steps: u64, phase: CurriculumPhase) -> Self {
        Self {
            agent,
            episodes,
            total_steps,
            phase,
        }
    }

    pub fn to_container(&self, config_hash: &str) -> Container {
        let a = &self.agent;
        let mut c = Container::new(CHECKPOINT_KIND).with_header(config_hash, a.hp.seed);
        c.set_meta(
            "hyperparams",
            serde_json::to_string(&a.hp).expect("hyperparameters serialize"),
        );
        c.set_meta("log_alpha", a.log_alpha);
        c.set_meta("kappa", a.lagrange.kappa);
        c.set_meta("updates", a.updates);
        c.set_meta("episodes", self.episodes);
        c.set_meta("total_steps", self.total_steps);
        c.set_meta("phase", self.phase);
        c.set_meta("seed", a.hp.seed);
        c.set_vector("obs.mean", &a.obs_scaler.mean);
        c.set_vector("obs.std", &a.obs_scaler.std);
        for (name, net) in NETS.iter().zip([&a.actor, &a.q1, &a.q2, &a.qc, &a.q1_target, &a.q2_target, &a.qc_target]) {
            c.put_mlp(name, net);
        }
        c
    }

    pub fn from_container(c: &Container) -> Result<Self, SacError> {
        c.expect_kind(CHECKPOINT_KIND)?;
        let hp: AgentHyperparams =
            serde_json::from_str(c.meta_str("hyperparams")?).map_err(|_| ContainerError::BadValue("hyperparams".into()))?;
        let scaler = Scaler {
            mean: c.vector("obs.mean")?,
            std: c.vector("obs.std")?,
        };
        let mut nets = Vec::with_capacity(NETS.len());
        for n in NETS {
            nets.push(c.get_mlp(n)?);
        }
        let mut it = nets.into_iter();
        let mut next = || it.next().expect("seven networks");
        let actor = next();
        let critics = [next(), next(), next()];
        let targets = [next(), next(), next()];
        let mut agent = SacAgent::from_parts(hp, scaler, actor, critics, targets);
        agent.log_alpha = c.meta("log_alpha")?;
        agent.lagrange = LagrangeVariable::new(c.meta("kappa")?);
        agent.updates = c.meta("updates")?;
        Ok(Self {
            agent,
            episodes: c.meta("episodes")?,
            total_steps: c.meta("total_steps")?,
            phase: c.meta("phase")?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let hp = AgentHyperparams {
            actor_hidden: vec![5, 4],
            critic_hidden: vec![3],
            seed: 77,
            ..AgentHyperparams::default()
        };
        let mut agent = SacAgent::new(hp, Scaler::identity(6)).unwrap();
        agent.log_alpha = -1.234_567_890_123_456_7;
        agent.lagrange = LagrangeVariable::new(0.1 + 0.2);
        agent.updates = 42;
        let ck = AgentCheckpoint::new(agent, 600, 123_456, CurriculumPhase::RateLimited);
        let text = ck.to_container("deadbeef").render();
        assert!(text.starts_with("# config_hash=deadbeef seed=77\n"));
        let back = AgentCheckpoint::from_container(&Container::parse(&text).unwrap()).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_container("deadbeef").render(), text);
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let c = Container::new("regressor");
        assert!(matches!(
            AgentCheckpoint::from_container(&c),
            Err(SacError::Checkpoint(ContainerError::Kind { .. }))
        ));
    }
}
