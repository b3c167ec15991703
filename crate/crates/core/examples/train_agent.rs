//! Train a SAC-Lagrangian car-following agent on a handful of aggressive
//! traces and compare it with the cost-channel-disabled ablation.
//!
//! With the defaults this takes a few minutes in release mode; pass a
//! smaller episode count for a quick look.
//!
//! ```text
//! cargo run --release --example train_agent -- [episodes]
//! ```

use adaptive_autopilot::env::EnvConfig;
use adaptive_autopilot::regressor::{train_regressor, Dataset, TrainConfig};
use adaptive_autopilot::sac::{evaluate, train, AgentHyperparams, CurriculumSchedule};
use adaptive_autopilot::trajectory::{generate_synthetic_episode, EpisodeTrace};
use adaptive_autopilot::DrivingStyle;

fn traces(style: DrivingStyle, from: u64, n: u64) -> Result<Vec<EpisodeTrace>, Box<dyn std::error::Error>> {
    Ok((from..from + n).map(|s| generate_synthetic_episode(style, s, 20.0)).collect::<Result<_, _>>()?)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let episodes: usize = std::env::args().nth(1).map_or(Ok(1000), |a| a.parse())?;
    let style = DrivingStyle::Aggressive;

    let mut data = Dataset::default();
    for ep in traces(style, 500, 40)? {
        data.extend(&Dataset::from_episode(&ep));
    }
    let reg_cfg = TrainConfig {
        max_epochs: 30,
        ..TrainConfig::for_style(style)
    };
    let (predictor, report) = train_regressor(&data, style, &reg_cfg)?;
    println!("regressor test MAE {:.4} m/s^2", report.test_mae);

    let (pool, selection, held_out) = (traces(style, 1000, 10)?, traces(style, 2000, 10)?, traces(style, 3000, 10)?);
    let schedule = CurriculumSchedule {
        episodes,
        switch_episode: episodes / 4,
        eval_every: (episodes / 10).max(1),
    };
    let env = EnvConfig::default();
    for cost_enabled in [true, false] {
        let hp = AgentHyperparams {
            actor_hidden: vec![32, 32],
            critic_hidden: vec![32, 32],
            cost_enabled,
            cost_margin: 0.05,
            seed: 1,
            ..AgentHyperparams::default()
        };
        let out = train(&hp, &schedule, &env, &predictor, &pool, &selection)?;
        let last = out.log.episodes.last().expect("at least one episode");
        let m = evaluate(&out.best_checkpoint.agent, &env, &predictor, &held_out)?;
        println!(
            "{}: final lambda {:.3}, temperature {:.4}; held-out violation {:.3}, min headway {:.3} s, reward {:.1}, rmse {:.3}",
            if cost_enabled { "constrained" } else { "ablation   " },
            last.lambda,
            last.temperature,
            m.violation_rate,
            m.min_headway,
            m.mean_reward,
            m.rmse_vs_predictor
        );
    }
    Ok(())
}
