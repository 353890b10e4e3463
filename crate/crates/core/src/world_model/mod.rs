//! Recurrent latent predictor with hybrid surprise scoring and online
//! self-supervised adaptation.
//!
//! The predictor sees the last `lookback` context vectors (latents, optionally
//! with the motion cue appended), unrolls a stacked GRU from a zero hidden
//! state and predicts the residual `z_t - z_{t-1}`. Each online step scores the
//! incoming frame with the current weights and then takes one plain SGD step
//! on that score.

mod gru;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent_io::LatentSequence;
use crate::motion::{make_context_vector, Variant};

pub use gru::Layout;

/// Predictor hyper-parameters. `new` fills in the reference operating values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorConfig {
    pub latent_dim: usize,
    pub variant: Variant,
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub lookback: usize,
    pub lambda: f64,
    pub learning_rate: f64,
    pub seed: u64,
}

impl PredictorConfig {
    pub fn new(latent_dim: usize, variant: Variant) -> Self {
        PredictorConfig {
            latent_dim,
            variant,
            hidden_dim: 256,
            num_layers: 2,
            lookback: 50,
            lambda: 0.5,
            learning_rate: 0.001,
            seed: 0,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.variant.input_dim(self.latent_dim)
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self.latent_dim, self.input_dim(), self.hidden_dim, self.num_layers)
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.hidden_dim == 0 || self.num_layers == 0 || self.lookback == 0 {
            return Err(Error::invalid(
                "latent_dim, hidden_dim, num_layers and lookback must be positive",
            ));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::invalid(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::invalid(format!(
                "learning rate must be >= 0, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Flat weight vector together with its block layout.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorParams {
    layout: Layout,
    values: Vec<f64>,
}

impl PredictorParams {
    pub fn init(config: &PredictorConfig) -> Self {
        let layout = config.layout();
        let values = layout.init(config.seed);
        PredictorParams { layout, values }
    }

    pub fn zeros(config: &PredictorConfig) -> Self {
        let layout = config.layout();
        let values = vec![0.0; layout.len];
        PredictorParams { layout, values }
    }

    pub fn from_values(config: &PredictorConfig, values: Vec<f64>) -> Result<Self> {
        let layout = config.layout();
        if values.len() != layout.len {
            return Err(Error::DimMismatch {
                expected: layout.len,
                found: values.len(),
            });
        }
        Ok(PredictorParams { layout, values })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// The `lookback` most recent predictor inputs, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextWindow(Vec<Vec<f64>>);

impl ContextWindow {
    pub fn new(vectors: Vec<Vec<f64>>) -> Self {
        ContextWindow(vectors)
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Hybrid mismatch `||z - z_hat||^2 + lambda * (1 - cos(z, z_hat))`.
///
/// The cosine similarity is taken as 1 when either vector has zero norm.
pub fn surprise(z: &[f64], z_hat: &[f64], lambda: f64) -> Result<f64> {
    if z.len() != z_hat.len() {
        return Err(Error::DimMismatch {
            expected: z.len(),
            found: z_hat.len(),
        });
    }
    let mse: f64 = z.iter().zip(z_hat).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(mse + lambda * (1.0 - cosine(z, z_hat)))
}

pub(crate) fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    dot / (na * nb)
}

/// Gradient of `surprise(z, z_hat, lambda)` with respect to `z_hat`.
fn surprise_grad(z: &[f64], z_hat: &[f64], lambda: f64) -> Vec<f64> {
    let mut g: Vec<f64> = z.iter().zip(z_hat).map(|(a, b)| 2.0 * (b - a)).collect();
    let nz = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nh = z_hat.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nz > 0.0 && nh > 0.0 && lambda != 0.0 {
        let sim = cosine(z, z_hat);
        for k in 0..g.len() {
            let dsim = z[k] / (nz * nh) - sim * z_hat[k] / (nh * nh);
            g[k] -= lambda * dsim;
        }
    }
    g
}

/// Outcome of one scored frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub surprise: f64,
    pub update_applied: bool,
}

impl StepRecord {
    /// `t<TAB>surprise<TAB>0|1`
    pub fn to_line(&self) -> String {
        format!("{}\t{}\t{}", self.t, self.surprise, u8::from(self.update_applied))
    }
}

#[derive(Debug, Clone)]
pub struct Predictor {
    config: PredictorConfig,
    params: PredictorParams,
}

impl Predictor {
    /// Fresh predictor with seeded initial weights.
    pub fn new(config: PredictorConfig) -> Result<Self> {
        config.validate()?;
        let params = PredictorParams::init(&config);
        Ok(Predictor { config, params })
    }

    pub fn with_params(config: PredictorConfig, params: PredictorParams) -> Result<Self> {
        config.validate()?;
        if params.layout != config.layout() {
            return Err(Error::invalid("parameter layout does not match the configuration"));
        }
        Ok(Predictor { config, params })
    }

    pub fn config(&self) -> &PredictorConfig {
        &self.config
    }

    pub fn params(&self) -> &PredictorParams {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut PredictorParams {
        &mut self.params
    }

    pub fn into_params(self) -> PredictorParams {
        self.params
    }

    fn check(&self, ctx: &ContextWindow, z_prev: &[f64]) -> Result<()> {
        if ctx.len() != self.config.lookback {
            return Err(Error::invalid(format!(
                "context window has {} vectors, lookback is {}",
                ctx.len(),
                self.config.lookback
            )));
        }
        let input_dim = self.config.input_dim();
        if let Some(v) = ctx.vectors().iter().find(|v| v.len() != input_dim) {
            return Err(Error::DimMismatch {
                expected: input_dim,
                found: v.len(),
            });
        }
        if z_prev.len() != self.config.latent_dim {
            return Err(Error::DimMismatch {
                expected: self.config.latent_dim,
                found: z_prev.len(),
            });
        }
        Ok(())
    }

    /// Predicted latent `z_prev + delta(ctx)`.
    pub fn predict(&self, ctx: &ContextWindow, z_prev: &[f64]) -> Result<Vec<f64>> {
        self.check(ctx, z_prev)?;
        let trace = gru::forward(&self.params.layout, &self.params.values, ctx.vectors());
        let z_hat: Vec<f64> = z_prev.iter().zip(&trace.delta).map(|(a, d)| a + d).collect();
        if z_hat.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("prediction".into()));
        }
        Ok(z_hat)
    }

    /// Surprise of `z_t` under the current weights and its gradient with
    /// respect to every parameter (backpropagated through the whole window).
    pub fn surprise_and_gradient(&self, ctx: &ContextWindow, z_prev: &[f64], z_t: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check(ctx, z_prev)?;
        if z_t.len() != self.config.latent_dim {
            return Err(Error::DimMismatch {
                expected: self.config.latent_dim,
                found: z_t.len(),
            });
        }
        let layout = &self.params.layout;
        let trace = gru::forward(layout, &self.params.values, ctx.vectors());
        let z_hat: Vec<f64> = z_prev.iter().zip(&trace.delta).map(|(a, d)| a + d).collect();
        if z_hat.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("prediction".into()));
        }
        let s = surprise(z_t, &z_hat, self.config.lambda)?;
        let d_delta = surprise_grad(z_t, &z_hat, self.config.lambda);
        let grad = gru::backward(layout, &self.params.values, ctx.vectors(), &trace, &d_delta);
        Ok((s, grad))
    }

    /// Score `z_t`, then descend on that score with step size `lr`.
    ///
    /// A non-finite gradient leaves the weights untouched and is reported
    /// through `update_applied = false`.
    pub fn online_step(&mut self, ctx: &ContextWindow, z_prev: &[f64], z_t: &[f64], lr: f64) -> Result<StepRecord> {
        if !(lr.is_finite() && lr >= 0.0) {
            return Err(Error::invalid(format!("learning rate must be >= 0, got {lr}")));
        }
        let (s, grad) = self.surprise_and_gradient(ctx, z_prev, z_t)?;
        let finite = grad.iter().all(|g| g.is_finite());
        if finite && lr > 0.0 {
            for (p, g) in self.params.values.iter_mut().zip(&grad) {
                *p -= lr * g;
            }
        }
        if !finite {
            log::warn!("non-finite gradient, update skipped");
        }
        Ok(StepRecord {
            t: 0,
            surprise: s,
            update_applied: finite,
        })
    }

    /// Causal sweeps over `seq`, one online step per predictable frame.
    /// Returns the mean surprise of every epoch.
    pub fn pretrain(&mut self, seq: &LatentSequence, epochs: usize, lr: f64) -> Result<Vec<f64>> {
        let lookback = self.config.lookback;
        if seq.len() <= lookback + 1 {
            return Err(Error::TooShort {
                needed: lookback + 1,
                found: seq.len(),
            });
        }
        let inputs = self.context_inputs(seq)?;
        let mut means = Vec::with_capacity(epochs);
        for _ in 0..epochs {
            let mut total = 0.0;
            for t in lookback..seq.len() {
                let ctx = ContextWindow::new(inputs[t - lookback..t].to_vec());
                total += self.online_step(&ctx, seq.frame(t - 1), seq.frame(t), lr)?.surprise;
            }
            means.push(total / (seq.len() - lookback) as f64);
        }
        Ok(means)
    }

    /// Replay `seq` online: for every frame past the warm-start window, record
    /// the surprise under the current weights and then adapt with the
    /// configured learning rate. The first `lookback` frames have no score.
    pub fn score_sequence(&mut self, seq: &LatentSequence) -> Result<Vec<Option<StepRecord>>> {
        let mut scorer = OnlineScorer::new(self)?;
        seq.frames()
            .iter()
            .enumerate()
            .map(|(t, f)| scorer.push(&f.values, seq.motion().map(|m| m[t])))
            .collect()
    }

    fn context_inputs(&self, seq: &LatentSequence) -> Result<Vec<Vec<f64>>> {
        if seq.dim() != self.config.latent_dim {
            return Err(Error::DimMismatch {
                expected: self.config.latent_dim,
                found: seq.dim(),
            });
        }
        (0..seq.len())
            .map(|t| make_context_vector(seq.frame(t), seq.motion().map(|m| m[t]), self.config.variant))
            .collect()
    }

    pub fn write_checkpoint<W: Write>(&self, mut out: W) -> Result<()> {
        let c = &self.config;
        out.write_all(CHECKPOINT_MAGIC)?;
        out.write_all(&(c.latent_dim as u32).to_le_bytes())?;
        out.write_all(&[match c.variant {
            Variant::Naive => 0u8,
            Variant::Compensated => 1u8,
        }])?;
        for n in [c.hidden_dim, c.num_layers, c.lookback] {
            out.write_all(&(n as u32).to_le_bytes())?;
        }
        out.write_all(&c.lambda.to_le_bytes())?;
        out.write_all(&c.learning_rate.to_le_bytes())?;
        out.write_all(&c.seed.to_le_bytes())?;
        out.write_all(&(self.params.values.len() as u64).to_le_bytes())?;
        for v in &self.params.values {
            out.write_all(&v.to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(mut input: R) -> Result<Self> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        if bytes.len() < 5 || &bytes[..5] != CHECKPOINT_MAGIC {
            return Err(Error::BadMagic { expected: "GRUP1" });
        }
        const HEADER: usize = 5 + 4 + 1 + 12 + 8 + 8 + 8 + 8;
        if bytes.len() < HEADER {
            return Err(Error::LengthMismatch {
                expected: HEADER as u64,
                found: bytes.len() as u64,
            });
        }
        let u32_at = |p: usize| u32::from_le_bytes(bytes[p..p + 4].try_into().unwrap()) as usize;
        let u64_at = |p: usize| u64::from_le_bytes(bytes[p..p + 8].try_into().unwrap());
        let f64_at = |p: usize| f64::from_le_bytes(bytes[p..p + 8].try_into().unwrap());
        let variant = match bytes[9] {
            0 => Variant::Naive,
            1 => Variant::Compensated,
            v => return Err(Error::invalid(format!("unknown variant tag {v}"))),
        };
        let config = PredictorConfig {
            latent_dim: u32_at(5),
            variant,
            hidden_dim: u32_at(10),
            num_layers: u32_at(14),
            lookback: u32_at(18),
            lambda: f64_at(22),
            learning_rate: f64_at(30),
            seed: u64_at(38),
        };
        config.validate()?;
        let count = u64_at(46) as usize;
        let expected = (HEADER + 8 * count) as u64;
        if bytes.len() as u64 != expected {
            return Err(Error::LengthMismatch {
                expected,
                found: bytes.len() as u64,
            });
        }
        let values = bytes[HEADER..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let params = PredictorParams::from_values(&config, values)?;
        Predictor::with_params(config, params)
    }
}

const CHECKPOINT_MAGIC: &[u8; 5] = b"GRUP1";

/// Streaming wrapper: feed frames one at a time, get a score once the
/// context window is full.
pub struct OnlineScorer<'a> {
    predictor: &'a mut Predictor,
    window: std::collections::VecDeque<Vec<f64>>,
    z_prev: Option<Vec<f64>>,
    t: usize,
}

impl<'a> OnlineScorer<'a> {
    pub fn new(predictor: &'a mut Predictor) -> Result<Self> {
        predictor.config.validate()?;
        Ok(OnlineScorer {
            window: std::collections::VecDeque::with_capacity(predictor.config.lookback + 1),
            predictor,
            z_prev: None,
            t: 0,
        })
    }

    /// Consume frame `t`. Returns `None` while the window is still filling.
    pub fn push(&mut self, z_t: &[f64], m_t: Option<crate::motion::MotionVector>) -> Result<Option<StepRecord>> {
        let lookback = self.predictor.config.lookback;
        let lr = self.predictor.config.learning_rate;
        let input = make_context_vector(z_t, m_t, self.predictor.config.variant)?;
        let record = match &self.z_prev {
            Some(z_prev) if self.window.len() == lookback => {
                let ctx = ContextWindow::new(self.window.iter().cloned().collect());
                let mut rec = self.predictor.online_step(&ctx, z_prev, z_t, lr)?;
                rec.t = self.t;
                Some(rec)
            }
            _ => None,
        };
        self.window.push_back(input);
        if self.window.len() > lookback {
            self.window.pop_front();
        }
        self.z_prev = Some(z_t.to_vec());
        self.t += 1;
        Ok(record)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_config(variant: Variant) -> PredictorConfig {
        PredictorConfig {
            hidden_dim: 8,
            lookback: 5,
            seed: 11,
            ..PredictorConfig::new(6, variant)
        }
    }

    fn random_ctx(rng: &mut ChaCha8Rng, len: usize, dim: usize) -> ContextWindow {
        ContextWindow::new(
            (0..len)
                .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect(),
        )
    }

    #[test]
    fn defaults_match_operating_values() {
        let c = PredictorConfig::new(1024, Variant::Compensated);
        assert_eq!((c.hidden_dim, c.num_layers, c.lookback), (256, 2, 50));
        assert_eq!((c.lambda, c.learning_rate), (0.5, 0.001));
        assert_eq!(c.input_dim(), 1026);
        assert_eq!(PredictorConfig::new(1024, Variant::Naive).input_dim(), 1024);
    }

    #[test]
    fn surprise_hand_values() {
        assert_eq!(surprise(&[0.3, -0.4], &[0.3, -0.4], 0.5).unwrap(), 0.0);
        assert_eq!(surprise(&[1.0, 0.0], &[0.0, 1.0], 0.5).unwrap(), 2.5);
        let s = surprise(&[0.6, 0.8], &[1.2, 1.6], 0.5).unwrap();
        assert!((s - 1.0).abs() < 1e-15);
        // zero vector: cosine term vanishes
        assert_eq!(surprise(&[0.0, 0.0], &[1.0, 0.0], 0.5).unwrap(), 1.0);
        assert!(surprise(&[1.0], &[1.0, 2.0], 0.5).is_err());
    }

    #[test]
    fn zero_params_predict_previous_latent() {
        let config = small_config(Variant::Naive);
        let p = Predictor::with_params(config.clone(), PredictorParams::zeros(&config)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ctx = random_ctx(&mut rng, 5, 6);
        let z_prev = vec![0.1, 0.2, -0.3, 0.4, 0.5, -0.6];
        assert_eq!(p.predict(&ctx, &z_prev).unwrap(), z_prev);
    }

    #[test]
    fn predict_is_deterministic() {
        let p = Predictor::new(small_config(Variant::Compensated)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ctx = random_ctx(&mut rng, 5, 8);
        let z_prev = vec![0.5; 6];
        let a = p.predict(&ctx, &z_prev).unwrap();
        let b = p.predict(&ctx, &z_prev).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn predict_rejects_bad_shapes() {
        let p = Predictor::new(small_config(Variant::Naive)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(p.predict(&random_ctx(&mut rng, 4, 6), &[0.0; 6]).is_err());
        assert!(matches!(
            p.predict(&random_ctx(&mut rng, 5, 7), &[0.0; 6]),
            Err(Error::DimMismatch { expected: 6, found: 7 })
        ));
        assert!(p.predict(&random_ctx(&mut rng, 5, 6), &[0.0; 5]).is_err());
    }

    #[test]
    fn zero_learning_rate_leaves_params_and_matches_predict() {
        let mut p = Predictor::new(small_config(Variant::Naive)).unwrap();
        let before = p.params().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ctx = random_ctx(&mut rng, 5, 6);
        let z_prev = vec![0.2; 6];
        let z_t = vec![0.3, 0.1, 0.2, 0.25, 0.2, 0.15];
        let expected = surprise(&z_t, &p.predict(&ctx, &z_prev).unwrap(), 0.5).unwrap();
        let rec = p.online_step(&ctx, &z_prev, &z_t, 0.0).unwrap();
        assert_eq!(rec.surprise, expected);
        assert_eq!(p.params(), &before);
    }

    #[test]
    fn repeated_steps_on_one_sample_descend() {
        let mut p = Predictor::new(small_config(Variant::Compensated)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ctx = random_ctx(&mut rng, 5, 8);
        let z_prev: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let z_t: Vec<f64> = z_prev.iter().map(|v| v + rng.random_range(-0.5..0.5)).collect();
        let mut last = f64::INFINITY;
        for _ in 0..50 {
            let s = p.online_step(&ctx, &z_prev, &z_t, 1e-3).unwrap().surprise;
            assert!(s <= last, "{s} > {last}");
            last = s;
        }
    }

    #[test]
    fn pretrain_zero_epochs_and_short_sequences() {
        let config = small_config(Variant::Naive);
        let mut p = Predictor::new(config.clone()).unwrap();
        let before = p.params().clone();
        let seq = LatentSequence::from_vectors(30.0, 6, vec![vec![0.1; 6]; 20], None).unwrap();
        assert!(p.pretrain(&seq, 0, 0.01).unwrap().is_empty());
        assert_eq!(p.params(), &before);
        let short = LatentSequence::from_vectors(30.0, 6, vec![vec![0.1; 6]; 6], None).unwrap();
        assert!(matches!(p.pretrain(&short, 1, 0.01), Err(Error::TooShort { .. })));
    }

    #[test]
    fn compensated_without_motion_is_rejected() {
        let mut p = Predictor::new(small_config(Variant::Compensated)).unwrap();
        let seq = LatentSequence::from_vectors(30.0, 6, vec![vec![0.1; 6]; 20], None).unwrap();
        assert!(p.score_sequence(&seq).is_err());
        let mut naive = Predictor::new(small_config(Variant::Naive)).unwrap();
        assert!(naive.score_sequence(&seq).is_ok());
    }

    #[test]
    fn checkpoint_roundtrip() {
        let p = Predictor::new(small_config(Variant::Compensated)).unwrap();
        let mut bytes = Vec::new();
        p.write_checkpoint(&mut bytes).unwrap();
        let back = Predictor::read_checkpoint(&bytes[..]).unwrap();
        assert_eq!(back.config(), p.config());
        assert_eq!(back.params(), p.params());
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(
            Predictor::read_checkpoint(&bytes[..]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn step_record_line() {
        let r = StepRecord {
            t: 12,
            surprise: 0.25,
            update_applied: true,
        };
        assert_eq!(r.to_line(), "12\t0.25\t1");
    }
}
