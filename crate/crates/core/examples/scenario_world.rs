//! Generate a motion-coupled world and save it with its ground truth.
//!
//! `cargo run --example scenario_world -- out_dir [seed]`

use std::path::PathBuf;

use surprise_core::latent_io::write_labels;
use surprise_core::scenario::{generate, ScenarioConfig};

fn main() -> surprise_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "world".into()));
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);

    let cfg = ScenarioConfig::motion_coupled(32, seed, 5);
    let world = generate(&cfg)?;
    std::fs::create_dir_all(&dir)?;
    world.sequence.write_file(dir.join("sequence.lseq"))?;
    write_labels(&world.labels, std::fs::File::create(dir.join("labels.tsv"))?)?;
    std::fs::write(dir.join("scenario.toml"), cfg.to_toml())?;

    println!("{} frames, {:.0} s", world.sequence.len(), world.sequence.duration_s());
    for (a, b) in &world.maneuver_windows {
        println!("maneuver {a:7.2} .. {b:7.2} s");
    }
    for e in &world.event_times {
        println!("event    {e:7.2} s");
    }
    println!("written to {}", dir.display());
    Ok(())
}
