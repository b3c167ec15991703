//! Train a human-like acceleration regressor for one driving style and
//! store it as a model container.
//!
//! ```text
//! cargo run --release --example train_regressor -- [episodes] [epochs]
//! ```

use adaptive_autopilot::container::Container;
use adaptive_autopilot::regressor::{train_regressor, Dataset, MlpModel, TrainConfig};
use adaptive_autopilot::trajectory::generate_synthetic_episode;
use adaptive_autopilot::DrivingStyle;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let episodes: u64 = args.next().map_or(Ok(30), |a| a.parse())?;
    let epochs: usize = args.next().map_or(Ok(20), |a| a.parse())?;

    let style = DrivingStyle::Normal;
    let mut data = Dataset::default();
    for seed in 0..episodes {
        data.extend(&Dataset::from_episode(&generate_synthetic_episode(style, seed, 20.0)?));
    }
    let cfg = TrainConfig {
        max_epochs: epochs,
        hidden: vec![64, 32],
        dropout: vec![0.1, 0.05],
        ..TrainConfig::for_style(style)
    };
    let (model, report) = train_regressor(&data, style, &cfg)?;
    for row in report.epochs.iter().step_by(5) {
        println!("epoch {:>3}: train MAE {:.4}, val MAE {:.4}", row.epoch, row.train_mae, row.val_mae);
    }
    println!(
        "{} samples ({} train / {} val / {} test), best epoch {}, test MAE {:.4} m/s^2",
        data.len(),
        report.n_train,
        report.n_val,
        report.n_test,
        report.best_epoch,
        report.test_mae
    );

    let path = std::env::temp_dir().join("regressor_normal.aac");
    std::fs::write(&path, model.to_container("example").render())?;
    let back = MlpModel::from_container(&Container::parse(&std::fs::read_to_string(&path)?)?)?;
    assert_eq!(back, model);
    println!("saved and reloaded {}", path.display());
    Ok(())
}
