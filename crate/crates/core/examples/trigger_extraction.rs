//! Feed a noisy score trace through the streaming extractor and print every
//! trigger with the frame at which it was confirmed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use surprise_core::extractor::{ExtractorConfig, Source, StreamingExtractor};

fn main() -> surprise_core::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let fps = 30.0;
    let mut raw: Vec<f64> = (0..1800).map(|_| 0.1 + rng.random_range(0.0..0.02)).collect();
    for (at, height) in [(600, 0.8), (1200, 0.5), (1208, 0.6)] {
        for (k, v) in raw[at..at + 10].iter_mut().enumerate() {
            *v += height * (1.0 - k as f64 / 10.0);
        }
    }
    let cfg = ExtractorConfig::with_fps(fps);
    println!(
        "sigma {} (K = {}), window {} s, alpha {}, refractory {} s",
        cfg.sigma,
        cfg.kernel_radius(),
        cfg.window_s,
        cfg.alpha,
        cfg.refractory_s
    );
    let mut ex = StreamingExtractor::new(cfg, Source::Compensated)?;
    for (t, &r) in raw.iter().enumerate() {
        let out = ex.push(r)?;
        if let Some(tr) = out.trigger {
            println!(
                "frame {t}: trigger at frame {} ({:.2} s), smoothed {:.3} > threshold {:.3}",
                tr.frame_index, tr.time_s, tr.score, tr.threshold
            );
        }
    }
    // the bump at 1208 lands inside the refractory period of the 1200 one
    Ok(())
}
