//! Save a trained agent, load it back and show the reloaded agent behaves
//! identically on held-out traces.
//!
//! ```text
//! cargo run --release --example checkpoint_evaluate
//! ```

use adaptive_autopilot::baselines::IdmParams;
use adaptive_autopilot::container::Container;
use adaptive_autopilot::env::EnvConfig;
use adaptive_autopilot::sac::{evaluate, train, AgentCheckpoint, AgentHyperparams, CurriculumSchedule};
use adaptive_autopilot::trajectory::generate_synthetic_episode;
use adaptive_autopilot::DrivingStyle;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let style = DrivingStyle::Normal;
    let predictor = IdmParams::for_style(style);
    let gen = |from: u64| (from..from + 3).map(|s| generate_synthetic_episode(style, s, 15.0)).collect::<Result<Vec<_>, _>>();
    let (pool, held_out) = (gen(0)?, gen(100)?);

    let hp = AgentHyperparams {
        actor_hidden: vec![16, 16],
        critic_hidden: vec![16, 16],
        random_episodes: 10,
        ..AgentHyperparams::default()
    };
    let schedule = CurriculumSchedule {
        episodes: 60,
        switch_episode: 30,
        eval_every: 0,
    };
    let env = EnvConfig::default();
    let out = train(&hp, &schedule, &env, &predictor, &pool, &[])?;
    let ckpt: &AgentCheckpoint = &out.final_checkpoint;
    println!("trained {} episodes, {} env steps, phase {}", ckpt.episodes, ckpt.total_steps, ckpt.phase);

    let text = ckpt.to_container("example").render();
    println!("checkpoint: {} bytes", text.len());
    let restored = AgentCheckpoint::from_container(&Container::parse(&text)?)?;
    assert_eq!(&restored, ckpt);

    let a = evaluate(&ckpt.agent, &env, &predictor, &held_out)?;
    let b = evaluate(&restored.agent, &env, &predictor, &held_out)?;
    assert_eq!(a, b);
    println!(
        "held-out: reward {:.2}, violation {:.3}, min headway {:.3} s, rmse {:.3} (identical after reload)",
        a.mean_reward, a.violation_rate, a.min_headway, a.rmse_vs_predictor
    );
    Ok(())
}
