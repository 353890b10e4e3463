//! Causal trigger extraction from a raw surprise trace.
//!
//! Three stages run per frame: a one-sided Gaussian smoother over current
//! and past samples, an adaptive threshold `max(mean + alpha * std, tau_min)`
//! over a trailing window of smoothed values that starts after the warm-up,
//! and a local-maximum test that needs the next smoothed sample. A decision
//! about frame `t` is therefore available once frame `t + 1` has arrived.
//! Accepted peaks are thinned left to right with a refractory interval.

use std::collections::VecDeque;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractorConfig {
    /// Smoothing width in frames.
    pub sigma: f64,
    /// Trailing threshold window in seconds.
    pub window_s: f64,
    pub alpha: f64,
    pub tau_min: f64,
    /// Frames that never trigger nor enter the threshold statistics.
    pub warmup: usize,
    pub refractory_s: f64,
    pub fps: f64,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        ExtractorConfig {
            sigma: 2.0,
            window_s: 10.0,
            alpha: 2.5,
            tau_min: 0.005,
            warmup: 200,
            refractory_s: 0.5,
            fps: 30.0,
        }
    }
}

impl ExtractorConfig {
    pub fn with_fps(fps: f64) -> Self {
        ExtractorConfig { fps, ..Self::default() }
    }

    pub fn kernel_radius(&self) -> usize {
        kernel_radius(self.sigma)
    }

    pub fn window_samples(&self) -> usize {
        (self.window_s * self.fps).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::invalid(format!("sigma must be > 0, got {}", self.sigma)));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::invalid(format!("fps must be > 0, got {}", self.fps)));
        }
        if !(self.window_s.is_finite() && self.window_s > 0.0) {
            return Err(Error::invalid("threshold window must be > 0 s"));
        }
        if !self.alpha.is_finite() {
            return Err(Error::invalid("alpha must be finite"));
        }
        if !(self.tau_min.is_finite() && self.tau_min >= 0.0) {
            return Err(Error::invalid("tau_min must be >= 0"));
        }
        if !(self.refractory_s.is_finite() && self.refractory_s >= 0.0) {
            return Err(Error::invalid("refractory interval must be >= 0"));
        }
        Ok(())
    }
}

fn kernel_radius(sigma: f64) -> usize {
    ((3.0 * sigma).round() as usize).max(1)
}

fn kernel(sigma: f64) -> Vec<f64> {
    (0..=kernel_radius(sigma))
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect()
}

/// Which scorer produced a trigger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Compensated,
    Naive,
    DirectDiff,
    Uniform,
}

impl Source {
    pub const ALL: [Source; 4] = [Source::Compensated, Source::Naive, Source::DirectDiff, Source::Uniform];

    pub fn as_str(self) -> &'static str {
        match self {
            Source::Compensated => "compensated",
            Source::Naive => "naive",
            Source::DirectDiff => "direct_diff",
            Source::Uniform => "uniform",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Source::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown trigger source {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerEvent {
    pub frame_index: usize,
    pub time_s: f64,
    /// Smoothed score at the trigger frame.
    pub score: f64,
    pub threshold: f64,
    pub source: Source,
}

/// One-sided Gaussian smoothing with weights renormalized near the start.
pub fn smooth_causal(raw: &[f64], sigma: f64) -> Result<Vec<f64>> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid(format!("sigma must be > 0, got {sigma}")));
    }
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("surprise trace".into()));
    }
    let w = kernel(sigma);
    Ok((0..raw.len()).map(|t| smooth_at(raw, t, &w)).collect())
}

fn smooth_at(raw: &[f64], t: usize, w: &[f64]) -> f64 {
    let reach = t.min(w.len() - 1);
    let mut num = 0.0;
    let mut den = 0.0;
    for (k, wk) in w.iter().enumerate().take(reach + 1) {
        num += wk * raw[t - k];
        den += wk;
    }
    num / den
}

/// Threshold at frame `t` from the smoothed trace.
pub fn adaptive_threshold(smoothed: &[f64], t: usize, cfg: &ExtractorConfig) -> Result<f64> {
    if t <= cfg.warmup {
        return Err(Error::Undefined(format!(
            "threshold at frame {t} lies inside the {}-frame warm-up",
            cfg.warmup
        )));
    }
    if t >= smoothed.len() {
        return Err(Error::invalid(format!(
            "frame {t} beyond trace of length {}",
            smoothed.len()
        )));
    }
    let start = (cfg.warmup + 1).max(t.saturating_sub(cfg.window_samples()));
    Ok(threshold_of(smoothed[start..=t].iter().copied(), cfg))
}

fn threshold_of<I>(window: I, cfg: &ExtractorConfig) -> f64
where
    I: Iterator<Item = f64> + Clone,
{
    let (mean, std) = population_stats(window);
    (mean + cfg.alpha * std).max(cfg.tau_min)
}

fn population_stats<I>(values: I) -> (f64, f64)
where
    I: Iterator<Item = f64> + Clone,
{
    let mut n = 0usize;
    let mut sum = 0.0;
    for v in values.clone() {
        sum += v;
        n += 1;
    }
    let mean = sum / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

/// Per-frame output of the streaming extractor.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutput {
    pub t: usize,
    pub smoothed: f64,
    /// Absent inside the warm-up.
    pub threshold: Option<f64>,
    /// Decision about frame `t - 1`, which needed this frame as look-ahead.
    pub trigger: Option<TriggerEvent>,
}

/// Stateful, single-stream trigger extractor.
#[derive(Debug, Clone)]
pub struct StreamingExtractor {
    cfg: ExtractorConfig,
    source: Source,
    weights: Vec<f64>,
    raw: VecDeque<f64>,
    window: VecDeque<(usize, f64)>,
    /// Smoothed values and thresholds of frames `t - 2` and `t - 1`.
    prev2: Option<f64>,
    prev1: Option<(f64, Option<f64>)>,
    last_accepted: Option<f64>,
    t: usize,
}

impl StreamingExtractor {
    pub fn new(cfg: ExtractorConfig, source: Source) -> Result<Self> {
        cfg.validate()?;
        let weights = kernel(cfg.sigma);
        Ok(StreamingExtractor {
            raw: VecDeque::with_capacity(weights.len()),
            window: VecDeque::with_capacity(cfg.window_samples() + 2),
            weights,
            cfg,
            source,
            prev2: None,
            prev1: None,
            last_accepted: None,
            t: 0,
        })
    }

    pub fn config(&self) -> &ExtractorConfig {
        &self.cfg
    }

    pub fn push(&mut self, raw: f64) -> Result<FrameOutput> {
        if !raw.is_finite() {
            return Err(Error::NonFinite(format!("surprise at frame {}", self.t)));
        }
        let t = self.t;
        self.raw.push_front(raw);
        self.raw.truncate(self.weights.len());
        let mut num = 0.0;
        let mut den = 0.0;
        for (wk, s) in self.weights.iter().zip(&self.raw) {
            num += wk * s;
            den += wk;
        }
        let smoothed = num / den;

        let threshold = if t > self.cfg.warmup {
            self.window.push_back((t, smoothed));
            let lo = (self.cfg.warmup + 1).max(t.saturating_sub(self.cfg.window_samples()));
            while self.window.front().is_some_and(|&(i, _)| i < lo) {
                self.window.pop_front();
            }
            Some(threshold_of(self.window.iter().map(|&(_, v)| v), &self.cfg))
        } else {
            None
        };

        let mut trigger = None;
        if let (Some(before), Some((peak, Some(tau)))) = (self.prev2, self.prev1) {
            let candidate = t - 1;
            if before < peak && peak >= smoothed && peak > tau {
                let time_s = candidate as f64 / self.cfg.fps;
                let clear = self
                    .last_accepted
                    .is_none_or(|last| time_s - last >= self.cfg.refractory_s);
                if clear {
                    self.last_accepted = Some(time_s);
                    trigger = Some(TriggerEvent {
                        frame_index: candidate,
                        time_s,
                        score: peak,
                        threshold: tau,
                        source: self.source,
                    });
                }
            }
        }
        self.prev2 = self.prev1.map(|(v, _)| v);
        self.prev1 = Some((smoothed, threshold));
        self.t += 1;
        Ok(FrameOutput {
            t,
            smoothed,
            threshold,
            trigger,
        })
    }
}

/// Whole-trace result of the streaming extractor.
#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub raw: Vec<f64>,
    pub smoothed: Vec<f64>,
    pub threshold: Vec<Option<f64>>,
    pub triggers: Vec<TriggerEvent>,
}

impl Extraction {
    /// CSV dump with columns `t,raw,smoothed,tau`; `tau` is empty during warm-up.
    pub fn write_trace_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,raw,smoothed,tau")?;
        for (t, ((raw, s), tau)) in self.raw.iter().zip(&self.smoothed).zip(&self.threshold).enumerate() {
            match tau {
                Some(tau) => writeln!(out, "{t},{raw},{s},{tau}")?,
                None => writeln!(out, "{t},{raw},{s},")?,
            }
        }
        Ok(())
    }
}

/// Run the streaming extractor over a complete trace.
pub fn extract(raw: &[f64], cfg: &ExtractorConfig, source: Source) -> Result<Extraction> {
    let mut ex = StreamingExtractor::new(cfg.clone(), source)?;
    let mut out = Extraction {
        raw: raw.to_vec(),
        smoothed: Vec::with_capacity(raw.len()),
        threshold: Vec::with_capacity(raw.len()),
        triggers: Vec::new(),
    };
    for &s in raw {
        let f = ex.push(s)?;
        out.smoothed.push(f.smoothed);
        out.threshold.push(f.threshold);
        out.triggers.extend(f.trigger);
    }
    Ok(out)
}

pub fn detect_triggers(raw: &[f64], cfg: &ExtractorConfig, source: Source) -> Result<Vec<TriggerEvent>> {
    if raw.len() <= cfg.warmup + 2 {
        return Err(Error::TooShort {
            needed: cfg.warmup + 2,
            found: raw.len(),
        });
    }
    Ok(extract(raw, cfg, source)?.triggers)
}

/// Tab-separated trigger log: `frame_index time_s score threshold source`.
pub fn write_trigger_log<W: Write>(triggers: &[TriggerEvent], mut out: W) -> Result<()> {
    writeln!(out, "# frame_index\ttime_s\tscore\tthreshold\tsource")?;
    for e in triggers {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            e.frame_index, e.time_s, e.score, e.threshold, e.source
        )?;
    }
    Ok(())
}

pub fn read_trigger_log<R: Read>(mut input: R) -> Result<Vec<TriggerEvent>> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse { line: i + 1, message };
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 {
            return Err(err(format!("expected 5 fields, found {}", f.len())));
        }
        let num = |s: &str, name: &str| s.parse::<f64>().map_err(|e| err(format!("{name}: {e}")));
        out.push(TriggerEvent {
            frame_index: f[0].parse().map_err(|e| err(format!("frame_index: {e}")))?,
            time_s: num(f[1], "time_s")?,
            score: num(f[2], "score")?,
            threshold: num(f[3], "threshold")?,
            source: f[4].parse().map_err(|e: Error| err(e.to_string()))?,
        });
    }
    Ok(out)
}
