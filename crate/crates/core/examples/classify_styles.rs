//! Label synthetic drivers by projected time headway and summarise the
//! per-style statistics.
//!
//! ```text
//! cargo run --release --example classify_styles
//! ```

use adaptive_autopilot::classifier::{classify_driver, style_statistics, RuleConfig};
use adaptive_autopilot::trajectory::generate_synthetic_episode;
use adaptive_autopilot::DrivingStyle;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rules = RuleConfig::default();
    let mut episodes = Vec::new();
    let mut confusion = [[0usize; 3]; 3];
    for style in DrivingStyle::ALL {
        for seed in 0..30 {
            let ep = generate_synthetic_episode(style, seed, 20.0)?;
            let profile = classify_driver(&ep, &rules);
            confusion[style.index()][profile.label.index()] += 1;
            episodes.push(ep);
        }
    }

    println!("generated \\ labelled   aggressive   normal   conservative");
    for style in DrivingStyle::ALL {
        let row = confusion[style.index()];
        println!("{style:>21} {:>12} {:>8} {:>14}", row[0], row[1], row[2]);
    }

    let summary = style_statistics(&episodes, &rules)?.summary()?;
    println!("\n{} tagged steps", summary.n_steps);
    for (style, s) in &summary.styles {
        println!(
            "{style:>12}: {:>6} steps, headway mode {:?} s, accel mode {:?} m/s^2, braking {:.0}%",
            s.count,
            s.headway_mode,
            s.accel_mode,
            100.0 * s.braking_fraction
        );
    }
    Ok(())
}
