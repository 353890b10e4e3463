//! Motion-coupled worlds over several seeds: false triggers inside maneuver
//! windows with and without the motion cue, then the mean operating points
//! of every method and the F1 gap at matched bandwidth.
//!
//! `cargo run --release --example separability -- [n_seeds]`

use std::time::Instant;

use surprise_core::extractor::extract;
use surprise_core::harness::*;
use surprise_core::metrics::{LerConfig, TelemetryPolicy};

fn main() -> surprise_core::Result<()> {
    let n: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let start = Instant::now();
    let setup = DeskSetup::default();
    let seeds: Vec<u64> = (0..n).collect();
    let suite = run_suite(&setup, &seeds, &LerConfig::default())?;
    let eval = EvalSettings::default();

    let mut per_stream = Vec::new();
    let (mut comp_false, mut naive_false) = (0, 0);
    for e in &suite {
        let mut counts = Vec::new();
        for m in [Method::Compensated, Method::Naive] {
            let triggers = extract(e.stream.trace(m).unwrap(), &eval.extractor, m.source())?.triggers;
            counts.push(window_counts(&triggers, &e.scenario, &eval.matching, 1.0));
        }
        println!(
            "seed {:2}: maneuver false triggers {} vs {}, events hit {} vs {} of {}",
            e.seed,
            counts[0].maneuver_false,
            counts[1].maneuver_false,
            counts[0].event_true,
            counts[1].event_true,
            e.scenario.event_times.len()
        );
        comp_false += counts[0].maneuver_false;
        naive_false += counts[1].maneuver_false;
        per_stream.push(e.stream.sweep(&Method::SWEEP, &DEFAULT_ALPHAS, &eval)?);
    }
    println!("total maneuver false triggers: compensated {comp_false}, naive {naive_false}");

    let mean = mean_rows(&per_stream)?;
    println!("\n{CSV_HEADER}");
    for r in &mean {
        println!("{}", r.to_csv());
    }
    let max_bsr = (1.0 - TelemetryPolicy::default().r_low()) * 100.0;
    let comp = Frontier::new(&operating_points(&mean, "compensated"), max_bsr);
    let naive = Frontier::new(&operating_points(&mean, "naive"), max_bsr);
    println!();
    for (bsr, _) in operating_points(&mean, "naive") {
        println!(
            "BSR {bsr:6.2} %: F1 compensated {:.3}, naive {:.3}",
            comp.f1_at(bsr),
            naive.f1_at(bsr)
        );
    }
    println!("{:.1} s", start.elapsed().as_secs_f64());
    Ok(())
}
