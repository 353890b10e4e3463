//! Independent reference implementations shared by the integration tests.
// Oracles index literally, formula by formula.
#![allow(dead_code, clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use surprise_core::extractor::ExtractorConfig;
use surprise_core::motion::Variant;
use surprise_core::world_model::{surprise, ContextWindow, Predictor, PredictorConfig, PredictorParams};

/// Offline trigger scan: smoothing, threshold and peak test evaluated from
/// scratch for every frame, then the refractory pass. Returns
/// `(frame, smoothed score, threshold)` per trigger.
pub fn oracle_scan(raw: &[f64], cfg: &ExtractorConfig) -> Vec<(usize, f64, f64)> {
    let n = raw.len();
    let k_max = ((3.0 * cfg.sigma).round() as usize).max(1);
    let mut smooth = vec![0.0; n];
    for t in 0..n {
        let mut num = 0.0;
        let mut den = 0.0;
        for k in 0..=k_max.min(t) {
            let w = (-((k * k) as f64) / (2.0 * cfg.sigma * cfg.sigma)).exp();
            num += w * raw[t - k];
            den += w;
        }
        smooth[t] = num / den;
    }
    let w_samp = (cfg.window_s * cfg.fps).round() as usize;
    let tau = |t: usize| -> Option<f64> {
        if t <= cfg.warmup {
            return None;
        }
        let lo = (cfg.warmup + 1).max(t.saturating_sub(w_samp));
        let window = &smooth[lo..=t];
        let mut sum = 0.0;
        for v in window {
            sum += v;
        }
        let mu = sum / window.len() as f64;
        let mut ss = 0.0;
        for v in window {
            ss += (v - mu) * (v - mu);
        }
        let s = (ss / window.len() as f64).sqrt();
        Some((mu + cfg.alpha * s).max(cfg.tau_min))
    };
    let mut peaks = Vec::new();
    for t in 1..n.saturating_sub(1) {
        if let Some(th) = tau(t) {
            if smooth[t - 1] < smooth[t] && smooth[t] >= smooth[t + 1] && smooth[t] > th {
                peaks.push((t, smooth[t], th));
            }
        }
    }
    let mut kept: Vec<(usize, f64, f64)> = Vec::new();
    for p in peaks {
        let ok = match kept.last() {
            Some(&(q, _, _)) => p.0 as f64 / cfg.fps - q as f64 / cfg.fps >= cfg.refractory_s,
            None => true,
        };
        if ok {
            kept.push(p);
        }
    }
    kept
}

pub fn oracle_triggers(raw: &[f64], cfg: &ExtractorConfig) -> Vec<usize> {
    oracle_scan(raw, cfg).into_iter().map(|(t, _, _)| t).collect()
}

/// Literal LER: rolling mean of the previous `c` latents, cosine deviation
/// (zero when a norm vanishes), median over every defined frame, clipped
/// energy, weighted share.
pub fn oracle_ler(z: &[Vec<f64>], c: usize, w: &[f64]) -> Option<f64> {
    let t_len = z.len();
    let d = z[0].len();
    let mut delta = vec![0.0; t_len];
    for t in c..t_len {
        let mut mu = vec![0.0; d];
        for j in t - c..t {
            for k in 0..d {
                mu[k] += z[j][k] / c as f64;
            }
        }
        let dot: f64 = (0..d).map(|k| z[t][k] * mu[k]).sum();
        let nz = z[t].iter().map(|x| x * x).sum::<f64>().sqrt();
        let nm = mu.iter().map(|x| x * x).sum::<f64>().sqrt();
        delta[t] = if nz == 0.0 || nm == 0.0 {
            0.0
        } else {
            1.0 - dot / (nz * nm)
        };
    }
    let mut defined: Vec<f64> = delta[c..].to_vec();
    defined.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = defined.len();
    let med = if m % 2 == 1 {
        defined[m / 2]
    } else {
        0.5 * (defined[m / 2 - 1] + defined[m / 2])
    };
    let e: Vec<f64> = (0..t_len)
        .map(|t| if t < c { 0.0 } else { (delta[t] - med).max(0.0) })
        .collect();
    let total: f64 = e.iter().sum();
    if total == 0.0 {
        return None;
    }
    Some(100.0 * e.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / total)
}

/// Maximum matching size by trying every subset of admissible pairs
/// through recursion over events.
pub fn oracle_max_matching(triggers: &[f64], events: &[f64], tol: f64) -> usize {
    fn go(i: usize, used: &mut Vec<bool>, triggers: &[f64], events: &[f64], tol: f64) -> usize {
        if i == events.len() {
            return 0;
        }
        let mut best = go(i + 1, used, triggers, events, tol);
        for j in 0..triggers.len() {
            if !used[j] && (triggers[j] - events[i]).abs() <= tol {
                used[j] = true;
                best = best.max(1 + go(i + 1, used, triggers, events, tol));
                used[j] = false;
            }
        }
        best
    }
    go(0, &mut vec![false; triggers.len()], triggers, events, tol)
}

/// Random small predictor instance with perturbed parameters.
pub fn random_instance(seed: u64) -> (PredictorConfig, Predictor, ContextWindow, Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let variant = if rng.random_bool(0.5) {
        Variant::Compensated
    } else {
        Variant::Naive
    };
    let cfg = PredictorConfig {
        hidden_dim: rng.random_range(2..=8),
        num_layers: rng.random_range(1..=2),
        lookback: rng.random_range(1..=6),
        lambda: rng.random_range(0.0..1.0),
        seed,
        ..PredictorConfig::new(rng.random_range(2..=8), variant)
    };
    let mut p = Predictor::new(cfg.clone()).unwrap();
    for v in p.params_mut().values_mut() {
        *v += rng.random_range(-0.3..0.3);
    }
    let ctx = ContextWindow::new(
        (0..cfg.lookback)
            .map(|_| (0..cfg.input_dim()).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect(),
    );
    let z_prev: Vec<f64> = (0..cfg.latent_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let z_t: Vec<f64> = z_prev.iter().map(|v| v + rng.random_range(-0.5..0.5)).collect();
    (cfg, p, ctx, z_prev, z_t)
}

/// Largest relative deviation between the analytic gradient and central
/// differences with step 1e-5. Relative to max(|a|, |n|, 1e-6).
pub fn gradient_check(cfg: &PredictorConfig, p: &Predictor, ctx: &ContextWindow, z_prev: &[f64], z_t: &[f64]) -> f64 {
    let (_, grad) = p.surprise_and_gradient(ctx, z_prev, z_t).unwrap();
    let base = p.params().values().to_vec();
    let h = 1e-5;
    let eval = |i: usize, delta: f64| {
        let mut v = base.clone();
        v[i] += delta;
        let q = Predictor::with_params(cfg.clone(), PredictorParams::from_values(cfg, v).unwrap()).unwrap();
        surprise(z_t, &q.predict(ctx, z_prev).unwrap(), cfg.lambda).unwrap()
    };
    let mut worst: f64 = 0.0;
    for i in 0..base.len() {
        let numeric = (eval(i, h) - eval(i, -h)) / (2.0 * h);
        let rel = (grad[i] - numeric).abs() / grad[i].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}

/// Surprise-like fuzz trace: noisy baseline with a few random bumps.
pub fn fuzz_trace(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let base = rng.random_range(0.001..0.05);
    let mut v: Vec<f64> = (0..len).map(|_| base + rng.random_range(0.0..base)).collect();
    for _ in 0..rng.random_range(0..12) {
        let at = rng.random_range(0..len);
        let h = rng.random_range(0.0..0.5);
        for (k, x) in v.iter_mut().enumerate().skip(at.saturating_sub(3)).take(7) {
            *x += h * (-((k as f64 - at as f64).powi(2)) / 4.0).exp();
        }
    }
    v
}

pub fn fuzz_config(rng: &mut ChaCha8Rng) -> ExtractorConfig {
    ExtractorConfig {
        sigma: rng.random_range(0.5..3.0),
        window_s: rng.random_range(1.0..12.0),
        alpha: rng.random_range(0.0..4.0),
        tau_min: rng.random_range(0.0..0.02),
        warmup: rng.random_range(0..80),
        refractory_s: rng.random_range(0.0..1.0),
        fps: [10.0, 25.0, 30.0][rng.random_range(0..3)],
    }
}
