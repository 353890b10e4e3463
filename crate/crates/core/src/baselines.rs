//! Comparison scorers: frame-to-frame latent change and content-agnostic
//! periodic sampling. The uncompensated predictive baseline is the world
//! model run with [`Variant::Naive`](crate::motion::Variant::Naive).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extractor::{Source, TriggerEvent};
use crate::latent_io::LatentSequence;
use crate::world_model::surprise;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BaselineKind {
    NaiveSurprise,
    DirectDiff,
    UniformPeriodic { period_s: f64 },
}

impl BaselineKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BaselineKind::UniformPeriodic { period_s } if !(period_s.is_finite() && period_s > 0.0) => {
                Err(Error::invalid(format!("uniform period must be > 0, got {period_s}")))
            }
            _ => Ok(()),
        }
    }
}

/// Hybrid surprise with "no change" as the prediction.
pub fn direct_diff_score(z_t: &[f64], z_prev: &[f64], lambda: f64) -> Result<f64> {
    surprise(z_t, z_prev, lambda)
}

/// Direct-difference trace for a whole sequence. Frame 0 has no predecessor
/// and scores zero.
pub fn direct_diff_trace(seq: &LatentSequence, lambda: f64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(seq.len());
    if !seq.is_empty() {
        out.push(0.0);
    }
    for t in 1..seq.len() {
        out.push(direct_diff_score(seq.frame(t), seq.frame(t - 1), lambda)?);
    }
    Ok(out)
}

/// Triggers every `period_s` seconds, at `k * period_s <= duration_s`, k >= 1.
pub fn uniform_schedule(duration_s: f64, period_s: f64, fps: f64) -> Result<Vec<TriggerEvent>> {
    BaselineKind::UniformPeriodic { period_s }.validate()?;
    if !(fps.is_finite() && fps > 0.0) {
        return Err(Error::invalid("fps must be > 0"));
    }
    let mut out = Vec::new();
    let mut k = 1u64;
    loop {
        let time_s = k as f64 * period_s;
        // tolerate representation error in the product at the last slot
        if time_s > duration_s + 1e-9 * duration_s.abs().max(1.0) {
            break;
        }
        out.push(TriggerEvent {
            frame_index: (time_s * fps).round() as usize,
            time_s,
            score: 0.0,
            threshold: 0.0,
            source: Source::Uniform,
        });
        k += 1;
    }
    Ok(out)
}
