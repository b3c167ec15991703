//! Generate a small synthetic car-following corpus, write it out as a
//! highD-style tracks file, and read it back through the episode filter.
//!
//! ```text
//! cargo run --release --example synthetic_corpus
//! ```

use adaptive_autopilot::trajectory::{
    episode_to_frames, extract_follow_episodes_with_tally, frames_to_csv, generate_synthetic_episode, parse_trace_file,
    FilterConfig, SchemaMap, TRAINING_DT,
};
use adaptive_autopilot::DrivingStyle;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut frames = Vec::new();
    for (k, style) in DrivingStyle::ALL.into_iter().enumerate() {
        let ep = generate_synthetic_episode(style, 40 + k as u64, 25.0)?;
        let first = ep.steps()[0];
        println!(
            "{style:>12}: {} steps, start gap {:.1} m at {:.1} m/s",
            ep.len(),
            first.gap(),
            first.ego_speed
        );
        // Distinct vehicle ids per pair so the filter sees three followers.
        let id = 10 * (k as i64 + 1);
        frames.extend(episode_to_frames(&ep, id, id + 1));
    }

    let csv = frames_to_csv(&frames);
    println!("tracks file: {} rows, {} bytes", frames.len(), csv.len());

    let parsed = parse_trace_file(csv.as_bytes(), &SchemaMap::highd())?;
    let filter = FilterConfig {
        source_dt: TRAINING_DT,
        ..FilterConfig::default()
    };
    let (episodes, tally) = extract_follow_episodes_with_tally(&parsed, &filter);
    println!("recovered {} episodes; rejections: {tally:?}", episodes.len());
    for ep in &episodes {
        println!("  driver {:>3}: {:.1} s", ep.driver_id(), ep.duration());
    }
    Ok(())
}
