//! Compare the analytic gradient of the surprise loss against central
//! differences on a small random predictor.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use surprise_core::motion::Variant;
use surprise_core::world_model::{surprise, ContextWindow, Predictor, PredictorConfig, PredictorParams};

fn main() -> surprise_core::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cfg = PredictorConfig {
        hidden_dim: 6,
        num_layers: 2,
        lookback: 4,
        ..PredictorConfig::new(5, Variant::Compensated)
    };
    let p = Predictor::new(cfg.clone())?;
    let ctx = ContextWindow::new(
        (0..cfg.lookback)
            .map(|_| (0..cfg.input_dim()).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect(),
    );
    let z_prev: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
    let z_t: Vec<f64> = z_prev.iter().map(|v| v + rng.random_range(-0.3..0.3)).collect();

    let (s, grad) = p.surprise_and_gradient(&ctx, &z_prev, &z_t)?;
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for i in 0..grad.len() {
        let at = |delta: f64| -> surprise_core::Result<f64> {
            let mut v = p.params().values().to_vec();
            v[i] += delta;
            let q = Predictor::with_params(cfg.clone(), PredictorParams::from_values(&cfg, v)?)?;
            surprise(&z_t, &q.predict(&ctx, &z_prev)?, cfg.lambda)
        };
        let numeric = (at(h)? - at(-h)?) / (2.0 * h);
        worst = worst.max((grad[i] - numeric).abs() / grad[i].abs().max(numeric.abs()).max(1e-6));
    }
    println!(
        "surprise {s:.6}, {} parameters, worst relative error {worst:.2e}",
        grad.len()
    );
    Ok(())
}
