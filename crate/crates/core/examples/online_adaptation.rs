//! Pretrain on a maneuver-only world, then score a drive frame by frame with
//! online updates. Surprise stays low through maneuvers and jumps at events.

use surprise_core::harness::{pretrained, DeskSetup};
use surprise_core::motion::Variant;
use surprise_core::scenario::{generate, ScenarioConfig};
use surprise_core::world_model::OnlineScorer;

fn main() -> surprise_core::Result<()> {
    let setup = DeskSetup::default();
    let mut predictor = pretrained(&setup, 7, Variant::Compensated)?;
    let world = generate(&ScenarioConfig::motion_coupled(setup.dim, 7, 2))?;
    let seq = &world.sequence;
    let motion = seq.motion().expect("scenario has motion");

    let mut scorer = OnlineScorer::new(&mut predictor)?;
    let mut scores = Vec::new();
    for (t, &m) in motion.iter().enumerate() {
        if let Some(rec) = scorer.push(seq.frame(t), Some(m))? {
            scores.push((rec.t, rec.surprise));
        }
    }
    let mean_in = |a: f64, b: f64| {
        let v: Vec<f64> = scores
            .iter()
            .filter(|&&(t, _)| (a..=b).contains(&(t as f64 / seq.fps())))
            .map(|&(_, s)| s)
            .collect();
        v.iter().sum::<f64>() / v.len().max(1) as f64
    };
    for &(a, b) in &world.maneuver_windows {
        println!("maneuver {a:6.1}-{b:6.1} s: mean surprise {:.4}", mean_in(a, b));
    }
    for &e in &world.event_times {
        println!(
            "event    {e:6.1} s:        peak surprise {:.4}",
            peak(&scores, e, seq.fps())
        );
    }
    Ok(())
}

fn peak(scores: &[(usize, f64)], at_s: f64, fps: f64) -> f64 {
    scores
        .iter()
        .filter(|&&(t, _)| (t as f64 / fps - at_s).abs() <= 0.5)
        .map(|&(_, s)| s)
        .fold(0.0, f64::max)
}
