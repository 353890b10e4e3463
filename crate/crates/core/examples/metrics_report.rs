//! Peak matching, consensus rates and telemetry metrics for a hand-made
//! trigger stream.

use surprise_core::latent_io::{Category, EventLabel, LatentSequence};
use surprise_core::metrics::*;

fn main() -> surprise_core::Result<()> {
    let events = [10.0, 40.0, 70.0, 100.0];
    let triggers = [9.0, 41.5, 55.0, 101.0, 102.0];
    let m = match_peaks(&triggers, &events, &MatchConfig::default());
    println!(
        "matched {} of {} events with {} triggers: precision {:?}, recall {:?}, F1 {:.3}",
        m.matched(),
        events.len(),
        triggers.len(),
        m.precision(),
        m.recall(),
        m.f1()
    );

    // two annotators; consensus needs both
    let labels: Vec<EventLabel> = events
        .iter()
        .flat_map(|&t| {
            ["a", "b"].map(|who| EventLabel::new(t - 0.5, t + 1.0, Category::SpatialTransition, who).unwrap())
        })
        .collect();
    let consensus = ConsensusSet {
        events: build_consensus(&labels, None),
    };
    let frames: Vec<(usize, f64)> = triggers.iter().map(|&t| ((t * 30.0) as usize, t)).collect();
    let rates = consensus_rates(&frames, &consensus, &MatchConfig::default());
    println!("SPCR {:?} %, TCR {:?} %", rates.spcr_p1, rates.tcr_p1);

    let policy = TelemetryPolicy::default();
    let duration = 120.0;
    let band = bsr(&triggers, duration, &policy)?;
    println!(
        "BSR {:.2} % ({:.0} of {:.0} frames sent)",
        band.bsr, band.n_tx, band.n_raw
    );

    let vectors: Vec<Vec<f64>> = (0..(duration * 30.0) as usize)
        .map(|t| {
            // the latent turns by a fixed angle at every event
            let turns = events.iter().filter(|&&e| t as f64 / 30.0 >= e).count() as f64;
            vec![(0.6 * turns).cos(), (0.6 * turns).sin()]
        })
        .collect();
    let seq = LatentSequence::from_vectors(30.0, 2, vectors, None)?;
    let energy = latent_energy(&seq, LerConfig::default().context)?;
    let mask = telemetry_mask(seq.len(), seq.fps(), &triggers, &policy);
    match ler(&energy, &mask)? {
        Some(v) => println!("LER {v:.2} %"),
        None => println!("LER undefined: no latent change"),
    }
    Ok(())
}
