//! Synthetic latent worlds with known ego-motion coupling and ground-truth
//! novelty events.
//!
//! Each frame is the sum of four parts:
//!
//! * a background that mean-reverts towards a seeded base latent,
//! * an ego-motion offset that integrates the motion cue through a fixed
//!   `D x 2` coupling map, `o_t = o_{t-1} + A m_{t-1}`,
//! * event kernels (persistent jumps for transitions, symmetric pulses for
//!   transients),
//! * isotropic per-frame jitter.
//!
//! Inside a maneuver the motion cue is piecewise constant. Every segment
//! either reverses the previous one or picks a fresh heading, so the latent
//! change at a segment boundary cannot be anticipated from latent history
//! alone while it is exactly determined by the previous motion cue.

use std::f64::consts::TAU;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent_io::{Category, EventLabel, LatentSequence};
use crate::motion::MotionVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Maneuver {
    pub start_s: f64,
    pub end_s: f64,
    /// Magnitude of the normalized motion cue.
    pub speed: f64,
    /// Duration of one constant-heading segment.
    pub segment_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// Step jump decaying toward a persistent new baseline.
    Transition,
    /// Symmetric burst centred on the event time.
    Transient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventSpec {
    pub time_s: f64,
    pub kind: EventKind,
    /// Norm of the latent displacement at the event peak.
    pub magnitude: f64,
    pub decay_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<Category>,
}

impl EventSpec {
    fn category(&self) -> Category {
        self.category.unwrap_or(match self.kind {
            EventKind::Transition => Category::SpatialTransition,
            EventKind::Transient => Category::Environmental,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub dim: usize,
    pub frames: usize,
    pub fps: f64,
    pub seed: u64,
    /// Norm of the base latent.
    pub base_norm: f64,
    /// Per-component standard deviation of the background innovations.
    pub drift_scale: f64,
    /// Per-frame pull of the background toward the base latent.
    pub reversion_rate: f64,
    /// Per-component standard deviation of the frame jitter.
    pub noise_scale: f64,
    /// Norm of each column of the coupling map.
    pub coupling_gain: f64,
    /// Fraction of a transition jump that persists.
    #[serde(default = "default_persistence")]
    pub persistence: f64,
    #[serde(default)]
    pub maneuvers: Vec<Maneuver>,
    #[serde(default)]
    pub events: Vec<EventSpec>,
}

fn default_persistence() -> f64 {
    0.5
}

impl ScenarioConfig {
    pub fn duration_s(&self) -> f64 {
        self.frames as f64 / self.fps
    }

    /// Quiet world: no maneuvers, no events.
    pub fn quiet(dim: usize, frames: usize, seed: u64) -> Self {
        ScenarioConfig {
            dim,
            frames,
            fps: 30.0,
            seed,
            base_norm: 3.0,
            drift_scale: 0.001,
            reversion_rate: 0.02,
            noise_scale: 0.01,
            coupling_gain: 0.5,
            persistence: default_persistence(),
            maneuvers: Vec::new(),
            events: Vec::new(),
        }
    }

    /// Replay world alternating maneuvers and events, separated by quiet
    /// cruising. Starts with a 10 s calm lead-in.
    pub fn motion_coupled(dim: usize, seed: u64, cycles: usize) -> Self {
        let mut cfg = Self::quiet(dim, 0, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed);
        let mut t = 10.0;
        for i in 0..cycles {
            let length = rng.random_range(3.0..5.0);
            cfg.maneuvers.push(Maneuver {
                start_s: t,
                end_s: t + length,
                speed: 0.2,
                segment_s: 0.1,
            });
            t += length + rng.random_range(10.5..12.0);
            cfg.events.push(EventSpec {
                time_s: t,
                kind: if i % 2 == 0 {
                    EventKind::Transition
                } else {
                    EventKind::Transient
                },
                magnitude: if i % 2 == 0 {
                    rng.random_range(0.6..1.0)
                } else {
                    rng.random_range(1.2..1.6)
                },
                decay_s: if i % 2 == 0 { 0.3 } else { 0.1 },
                category: None,
            });
            t += rng.random_range(5.0..7.0);
        }
        cfg.frames = (t * cfg.fps).round() as usize;
        cfg
    }

    /// Maneuver-rich, event-free footage for offline pretraining.
    pub fn pretraining(dim: usize, seed: u64, duration_s: f64) -> Self {
        let mut cfg = Self::quiet(dim, (duration_s * 30.0).round() as usize, seed);
        let mut t = 2.0;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0ff1_ce00);
        while t + 6.0 < duration_s {
            let length = rng.random_range(3.0..5.0);
            cfg.maneuvers.push(Maneuver {
                start_s: t,
                end_s: t + length,
                speed: 0.2,
                segment_s: 0.1,
            });
            t += length + rng.random_range(1.0..2.0);
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.frames == 0 {
            return Err(Error::invalid("scenario needs positive dim and frame count"));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::invalid("fps must be > 0"));
        }
        let scales = [
            self.base_norm,
            self.drift_scale,
            self.reversion_rate,
            self.noise_scale,
            self.coupling_gain,
            self.persistence,
        ];
        if scales.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || self.reversion_rate > 1.0 {
            return Err(Error::invalid("scenario scales must be finite and non-negative"));
        }
        let duration = self.duration_s();
        for m in &self.maneuvers {
            if !(m.start_s >= 0.0 && m.start_s < m.end_s && m.end_s <= duration) {
                return Err(Error::invalid(format!(
                    "maneuver [{}, {}] outside [0, {duration}]",
                    m.start_s, m.end_s
                )));
            }
            if !(m.segment_s > 0.0 && m.speed.is_finite()) {
                return Err(Error::invalid("maneuver segments must be > 0 s"));
            }
        }
        for e in &self.events {
            if !(e.time_s >= 0.0 && e.time_s <= duration) {
                return Err(Error::invalid(format!(
                    "event at {} s outside [0, {duration}]",
                    e.time_s
                )));
            }
            if !(e.decay_s > 0.0 && e.magnitude.is_finite()) {
                return Err(Error::invalid("event decay must be > 0 s"));
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

/// Generated world plus its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub sequence: LatentSequence,
    pub labels: Vec<EventLabel>,
    pub coupling: Vec<[f64; 2]>,
    pub maneuver_windows: Vec<(f64, f64)>,
    pub event_times: Vec<f64>,
}

pub const GROUND_TRUTH_ANNOTATOR: &str = "ground_truth";

fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Motion cue for every frame from the maneuver schedule.
fn motion_track(cfg: &ScenarioConfig) -> Vec<MotionVector> {
    let mut rng = stream(cfg.seed, 3);
    let mut track = vec![MotionVector::ZERO; cfg.frames];
    for m in &cfg.maneuvers {
        let first = (m.start_s * cfg.fps).ceil() as usize;
        let last = ((m.end_s * cfg.fps).floor() as usize).min(cfg.frames.saturating_sub(1));
        let seg_frames = ((m.segment_s * cfg.fps).round() as usize).max(1);
        let mut heading = rng.random_range(0.0..TAU);
        for (i, t) in (first..=last).enumerate() {
            if i > 0 && i % seg_frames == 0 {
                heading = if rng.random_bool(0.5) {
                    heading + std::f64::consts::PI
                } else {
                    rng.random_range(0.0..TAU)
                };
            }
            track[t] = MotionVector::new(m.speed * heading.cos(), m.speed * heading.sin());
        }
    }
    track
}

pub fn generate(cfg: &ScenarioConfig) -> Result<Scenario> {
    cfg.validate()?;
    let d = cfg.dim;

    let mut structure = stream(cfg.seed, 1);
    let base: Vec<f64> = unit_vector(&mut structure, d)
        .iter()
        .map(|v| v * cfg.base_norm)
        .collect();
    let col_x = unit_vector(&mut structure, d);
    let col_y = unit_vector(&mut structure, d);
    let coupling: Vec<[f64; 2]> = (0..d)
        .map(|k| [col_x[k] * cfg.coupling_gain, col_y[k] * cfg.coupling_gain])
        .collect();
    let mut event_rng = stream(cfg.seed, 2);
    let directions: Vec<Vec<f64>> = cfg.events.iter().map(|_| unit_vector(&mut event_rng, d)).collect();

    let motion = motion_track(cfg);
    let mut noise = stream(cfg.seed, 4);

    let mut background = base.clone();
    let mut ego = vec![0.0; d];
    let mut vectors = Vec::with_capacity(cfg.frames);
    for t in 0..cfg.frames {
        let time = t as f64 / cfg.fps;
        if t > 0 {
            let m = motion[t - 1];
            for k in 0..d {
                let innovation: f64 = StandardNormal.sample(&mut noise);
                background[k] += cfg.reversion_rate * (base[k] - background[k]) + cfg.drift_scale * innovation;
                ego[k] += coupling[k][0] * m.mx + coupling[k][1] * m.my;
            }
        }
        let mut z: Vec<f64> = background.iter().zip(&ego).map(|(b, o)| b + o).collect();
        for (e, dir) in cfg.events.iter().zip(&directions) {
            let amp = event_amplitude(e, time, cfg.persistence);
            if amp != 0.0 {
                for (zk, dk) in z.iter_mut().zip(dir) {
                    *zk += amp * dk;
                }
            }
        }
        for zk in &mut z {
            let jitter: f64 = StandardNormal.sample(&mut noise);
            *zk += cfg.noise_scale * jitter;
        }
        vectors.push(z);
    }

    let labels = cfg
        .events
        .iter()
        .map(|e| {
            let (start, end) = match e.kind {
                EventKind::Transition => (e.time_s, e.time_s + e.decay_s),
                EventKind::Transient => ((e.time_s - e.decay_s).max(0.0), e.time_s + e.decay_s),
            };
            EventLabel::new(start, end, e.category(), GROUND_TRUTH_ANNOTATOR)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Scenario {
        sequence: LatentSequence::from_vectors(cfg.fps, d, vectors, Some(motion))?,
        labels,
        coupling,
        maneuver_windows: cfg.maneuvers.iter().map(|m| (m.start_s, m.end_s)).collect(),
        event_times: cfg.events.iter().map(|e| e.time_s).collect(),
    })
}

fn event_amplitude(e: &EventSpec, time: f64, persistence: f64) -> f64 {
    let dt = time - e.time_s;
    match e.kind {
        EventKind::Transition if dt >= 0.0 => {
            e.magnitude * (persistence + (1.0 - persistence) * (-dt / e.decay_s).exp())
        }
        EventKind::Transition => 0.0,
        EventKind::Transient => e.magnitude * (-(dt * dt) / (2.0 * e.decay_s * e.decay_s)).exp(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_world() {
        let cfg = ScenarioConfig::motion_coupled(8, 3, 2);
        assert_eq!(generate(&cfg).unwrap(), generate(&cfg).unwrap());
        let other = ScenarioConfig { seed: 4, ..cfg.clone() };
        assert_ne!(generate(&other).unwrap().sequence, generate(&cfg).unwrap().sequence);
    }

    #[test]
    fn clean_maneuver_moves_latent_by_coupled_motion() {
        let mut cfg = ScenarioConfig::quiet(6, 300, 9);
        cfg.noise_scale = 0.0;
        cfg.drift_scale = 0.0;
        cfg.maneuvers.push(Maneuver {
            start_s: 2.0,
            end_s: 6.0,
            speed: 0.05,
            segment_s: 0.5,
        });
        let s = generate(&cfg).unwrap();
        let motion = s.sequence.motion().unwrap();
        let baseline = s.sequence.frame(0).to_vec();
        let mut moved = false;
        for t in 1..300 {
            let m = motion[t - 1];
            for k in 0..6 {
                let step = s.sequence.frame(t)[k] - s.sequence.frame(t - 1)[k];
                let expected = s.coupling[k][0] * m.mx + s.coupling[k][1] * m.my;
                assert!((step - expected).abs() < 1e-12, "t={t} k={k}");
            }
            moved |= m != MotionVector::ZERO;
        }
        assert!(moved);
        // before the maneuver the world is static
        for (t, m) in motion.iter().enumerate().take(60) {
            assert_eq!(s.sequence.frame(t), &baseline[..]);
            assert_eq!(*m, MotionVector::ZERO);
        }
    }

    #[test]
    fn labels_follow_the_event_schedule() {
        let mut cfg = ScenarioConfig::quiet(4, 30 * 60, 1);
        for i in 0..5 {
            cfg.events.push(EventSpec {
                time_s: 5.0 + 10.0 * i as f64,
                kind: if i % 2 == 0 {
                    EventKind::Transition
                } else {
                    EventKind::Transient
                },
                magnitude: 0.5,
                decay_s: 0.2,
                category: None,
            });
        }
        let s = generate(&cfg).unwrap();
        assert_eq!(s.labels.len(), 5);
        assert_eq!(s.event_times, vec![5.0, 15.0, 25.0, 35.0, 45.0]);
        assert_eq!(s.labels[0].start_s, 5.0);
        assert_eq!(s.labels[0].category, Category::SpatialTransition);
        assert_eq!(s.labels[1].category, Category::Environmental);
        assert!((s.labels[1].start_s - 14.8).abs() < 1e-12);
    }

    #[test]
    fn schedule_outside_duration_is_rejected() {
        let mut cfg = ScenarioConfig::quiet(4, 300, 1);
        cfg.events.push(EventSpec {
            time_s: 11.0,
            kind: EventKind::Transient,
            magnitude: 1.0,
            decay_s: 0.1,
            category: None,
        });
        assert!(generate(&cfg).is_err());
        let mut cfg = ScenarioConfig::quiet(4, 300, 1);
        cfg.maneuvers.push(Maneuver {
            start_s: 8.0,
            end_s: 12.0,
            speed: 0.1,
            segment_s: 0.5,
        });
        assert!(generate(&cfg).is_err());
    }

    #[test]
    fn toml_roundtrip() {
        let cfg = ScenarioConfig::motion_coupled(16, 7, 3);
        assert_eq!(ScenarioConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn presets_are_valid() {
        ScenarioConfig::motion_coupled(16, 1, 6).validate().unwrap();
        ScenarioConfig::pretraining(16, 1, 90.0).validate().unwrap();
    }
}
