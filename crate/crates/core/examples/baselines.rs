//! Direct latent difference and uniform sampling on the same world.

use surprise_core::baselines::{direct_diff_trace, uniform_schedule};
use surprise_core::extractor::{extract, ExtractorConfig, Source};
use surprise_core::scenario::{generate, ScenarioConfig};

fn main() -> surprise_core::Result<()> {
    let world = generate(&ScenarioConfig::motion_coupled(32, 3, 3))?;
    let seq = &world.sequence;
    let diff = direct_diff_trace(seq, 0.5)?;
    let triggers = extract(&diff, &ExtractorConfig::with_fps(seq.fps()), Source::DirectDiff)?.triggers;
    let in_maneuver = triggers
        .iter()
        .filter(|t| {
            world
                .maneuver_windows
                .iter()
                .any(|&(a, b)| t.time_s >= a && t.time_s <= b)
        })
        .count();
    println!(
        "direct difference: {} triggers, {} inside maneuvers, {} events",
        triggers.len(),
        in_maneuver,
        world.event_times.len()
    );
    let uniform = uniform_schedule(seq.duration_s(), 12.0, seq.fps())?;
    println!(
        "uniform 12 s over {:.0} s: {} triggers at {:?}",
        seq.duration_s(),
        uniform.len(),
        uniform.iter().map(|t| t.time_s).collect::<Vec<_>>()
    );
    Ok(())
}
