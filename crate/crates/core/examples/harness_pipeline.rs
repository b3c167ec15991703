//! Run every harness stage end to end on a small synthetic corpus, the same
//! sequence the `aa` binary runs one subcommand at a time.
//!
//! ```text
//! cargo run --release --example harness_pipeline -- [output_dir]
//! ```

use adaptive_autopilot::harness::{self, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("aa-pipeline"), Into::into);

    let mut cfg = RunConfig::default();
    cfg.paths.output_dir = out.clone();
    cfg.paths.data_dir = out.join("data");
    cfg.ingest.synthetic = 12;
    cfg.ingest.synthetic_duration = 15.0;
    cfg.regressor.max_epochs = Some(10);
    cfg.regressor.hidden = Some(vec![32, 16]);
    let hp = &mut cfg.agent.hyperparams;
    hp.actor_hidden = vec![16, 16];
    hp.critic_hidden = vec![16, 16];
    hp.random_episodes = 5;
    cfg.agent.curriculum.episodes = 40;
    cfg.agent.curriculum.switch_episode = 20;
    cfg.agent.curriculum.eval_every = 10;
    cfg.agent.pool_size = 3;
    cfg.agent.selection_size = 2;
    cfg.agent.eval_size = 3;
    println!("config hash {}, writing to {}", cfg.config_hash(), out.display());

    let stages: [(&str, fn(&RunConfig) -> Result<harness::CommandOutput, harness::HarnessError>); 7] = [
        ("ingest", harness::cmd_ingest),
        ("classify", harness::cmd_classify),
        ("train-regressor", harness::cmd_train_regressor),
        ("calibrate-idm", harness::cmd_calibrate_idm),
        ("train-agent", harness::cmd_train_agent),
        ("evaluate", harness::cmd_evaluate),
        ("report", harness::cmd_report),
    ];
    for (name, stage) in stages {
        let res = stage(&cfg)?;
        println!("== {name}: {} files", res.written.len());
        println!("{}", res.summary.trim_end());
    }
    Ok(())
}
