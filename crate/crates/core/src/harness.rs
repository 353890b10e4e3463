//! Replay and sweep orchestration: manifests, per-method score traces,
//! metrics rows, α sweeps with matched-budget uniform rows, Pareto
//! frontiers, and the CSV/SVG report writers.
//!
//! Reports embed the manifest that produced them as `# `-prefixed TOML, so
//! [`RunManifest::from_report`] recovers a manifest that reproduces the
//! report byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{direct_diff_trace, uniform_schedule};
use crate::error::{Error, Result};
use crate::extractor::{extract, write_trigger_log, Extraction, ExtractorConfig, Source, TriggerEvent};
use crate::latent_io::{read_labels, EventLabel, LatentSequence};
use crate::metrics::{
    bsr, build_consensus, consensus_rates, latent_energy, ler, match_peaks, telemetry_mask, ConsensusSet, LerConfig,
    MatchConfig, TelemetryPolicy,
};
use crate::motion::Variant;
use crate::scenario::{generate, Scenario, ScenarioConfig};
use crate::world_model::{Predictor, PredictorConfig, StepRecord};

pub const DEFAULT_ALPHAS: [f64; 7] = [1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Method {
    Compensated,
    Naive,
    DirectDiff,
    Uniform { period_s: f64 },
}

impl Method {
    /// The four methods of a sweep; the uniform period is replaced by the
    /// matched one at sweep time.
    pub const SWEEP: [Method; 4] = [
        Method::Compensated,
        Method::Naive,
        Method::DirectDiff,
        Method::Uniform { period_s: 12.0 },
    ];

    pub fn name(&self) -> &'static str {
        self.source().as_str()
    }

    pub fn source(&self) -> Source {
        match self {
            Method::Compensated => Source::Compensated,
            Method::Naive => Source::Naive,
            Method::DirectDiff => Source::DirectDiff,
            Method::Uniform { .. } => Source::Uniform,
        }
    }

    pub fn variant(&self) -> Option<Variant> {
        match self {
            Method::Compensated => Some(Variant::Compensated),
            Method::Naive => Some(Variant::Naive),
            _ => None,
        }
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self, Method::Uniform { .. })
    }
}

/// Predictor settings that do not depend on the input stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSettings {
    pub hidden_dim: usize,
    pub num_layers: usize,
    pub lookback: usize,
    pub lambda: f64,
    pub learning_rate: f64,
}

impl ModelSettings {
    /// Small single-layer predictor that replays a few minutes of 32-d
    /// latents in seconds on one core.
    pub fn desk() -> Self {
        ModelSettings {
            hidden_dim: 24,
            num_layers: 1,
            lookback: 8,
            lambda: 0.5,
            learning_rate: 0.001,
        }
    }

    /// Reference operating values of [`PredictorConfig::new`].
    pub fn reference() -> Self {
        let c = PredictorConfig::new(1, Variant::Naive);
        ModelSettings {
            hidden_dim: c.hidden_dim,
            num_layers: c.num_layers,
            lookback: c.lookback,
            lambda: c.lambda,
            learning_rate: c.learning_rate,
        }
    }

    pub fn config(&self, latent_dim: usize, variant: Variant, seed: u64) -> PredictorConfig {
        PredictorConfig {
            latent_dim,
            variant,
            hidden_dim: self.hidden_dim,
            num_layers: self.num_layers,
            lookback: self.lookback,
            lambda: self.lambda,
            learning_rate: self.learning_rate,
            seed,
        }
    }
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self::desk()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Inputs {
    pub sequence: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    /// Pretrained predictor; without one the predictor starts from its seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
}

/// Extractor, matching and telemetry settings shared by every metrics row.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalSettings {
    pub extractor: ExtractorConfig,
    pub matching: MatchConfig,
    pub telemetry: TelemetryPolicy,
    pub ler: LerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub method: Method,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_sweep_methods")]
    pub sweep_methods: Vec<Method>,
    pub inputs: Inputs,
    #[serde(default)]
    pub model: ModelSettings,
    #[serde(default)]
    pub extractor: ExtractorConfig,
    #[serde(default)]
    pub matching: MatchConfig,
    #[serde(default)]
    pub telemetry: TelemetryPolicy,
    #[serde(default)]
    pub ler: LerConfig,
}

fn default_alphas() -> Vec<f64> {
    DEFAULT_ALPHAS.to_vec()
}

fn default_sweep_methods() -> Vec<Method> {
    Method::SWEEP.to_vec()
}

impl RunManifest {
    pub fn new(sequence: impl Into<PathBuf>, output_dir: impl Into<PathBuf>, method: Method) -> Self {
        RunManifest {
            seed: 0,
            output_dir: output_dir.into(),
            method,
            alphas: default_alphas(),
            sweep_methods: default_sweep_methods(),
            inputs: Inputs {
                sequence: sequence.into(),
                ..Inputs::default()
            },
            model: ModelSettings::desk(),
            extractor: ExtractorConfig::default(),
            matching: MatchConfig::default(),
            telemetry: TelemetryPolicy::default(),
            ler: LerConfig::default(),
        }
    }

    pub fn eval(&self) -> EvalSettings {
        EvalSettings {
            extractor: self.extractor.clone(),
            matching: self.matching.clone(),
            telemetry: self.telemetry.clone(),
            ler: self.ler.clone(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.extractor.validate()?;
        self.telemetry.validate()?;
        if let Method::Uniform { period_s } = self.method {
            crate::baselines::BaselineKind::UniformPeriodic { period_s }.validate()?;
        }
        if !(self.matching.tolerance_s.is_finite() && self.matching.tolerance_s >= 0.0) {
            return Err(Error::invalid("match tolerance must be >= 0"));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let m: RunManifest = toml::from_str(text).map_err(|e| Error::invalid(format!("manifest: {e}")))?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    /// Manifest embedded in a report written by this module.
    pub fn from_report(report: &str) -> Result<Self> {
        let text: String = report
            .lines()
            .filter_map(|l| l.strip_prefix("# ").or_else(|| (l == "#").then_some("")))
            .fold(String::new(), |mut acc, l| {
                acc.push_str(l);
                acc.push('\n');
                acc
            });
        Self::from_toml(&text)
    }

    fn header(&self) -> String {
        let mut out = String::new();
        for line in self.to_toml().lines() {
            if line.is_empty() {
                out.push_str("#\n");
            } else {
                let _ = writeln!(out, "# {line}");
            }
        }
        out
    }
}

/// Reference events derived from annotation labels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Reference {
    /// Consensus onset times used for peak matching.
    pub event_times: Vec<f64>,
    pub consensus: ConsensusSet,
}

impl Reference {
    pub fn from_labels(labels: &[EventLabel]) -> Self {
        let events = build_consensus(labels, None);
        Reference {
            event_times: events.iter().map(|e| e.start_s).collect(),
            consensus: ConsensusSet { events },
        }
    }
}

/// One line of a replay or sweep report. Label-dependent metrics are `None`
/// when no labels were given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub method: String,
    pub alpha: Option<f64>,
    pub period_s: Option<f64>,
    pub n_triggers: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub spcr: Option<f64>,
    pub tcr: Option<f64>,
    pub bsr: f64,
    pub ler: Option<f64>,
}

pub const CSV_HEADER: &str = "method,alpha,period_s,n_triggers,precision,recall,f1,spcr,tcr,bsr,ler";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl MetricsRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.method,
            opt(self.alpha),
            opt(self.period_s),
            self.n_triggers,
            opt(self.precision),
            opt(self.recall),
            opt(self.f1),
            opt(self.spcr),
            opt(self.tcr),
            self.bsr,
            opt(self.ler)
        )
    }
}

/// Surprise records as a dense trace; frames without a full context window
/// score zero, which the extractor's warm-up covers as long as
/// `warmup >= lookback`.
pub fn fill_absent(records: &[Option<StepRecord>]) -> Vec<f64> {
    records.iter().map(|r| r.map_or(0.0, |r| r.surprise)).collect()
}

/// Fresh or checkpointed predictor for a predictive method.
pub fn load_predictor(manifest: &RunManifest, method: Method, latent_dim: usize) -> Result<Predictor> {
    let variant = method
        .variant()
        .ok_or_else(|| Error::invalid(format!("{} has no predictor", method.name())))?;
    match &manifest.inputs.checkpoint {
        Some(path) => {
            let p = Predictor::read_checkpoint(fs::File::open(path)?)?;
            let c = p.config();
            if c.latent_dim != latent_dim {
                return Err(Error::DimMismatch {
                    expected: latent_dim,
                    found: c.latent_dim,
                });
            }
            if c.variant != variant {
                return Err(Error::invalid(format!(
                    "checkpoint is a {:?} predictor, method needs {:?}",
                    c.variant, variant
                )));
            }
            Ok(p)
        }
        None => Predictor::new(manifest.model.config(latent_dim, variant, manifest.seed)),
    }
}

/// Raw per-frame score trace of a method. The predictor is consumed since
/// online adaptation mutates it. Uniform sampling has no score.
pub fn score_trace(
    method: Method,
    seq: &LatentSequence,
    predictor: Option<Predictor>,
    lambda: f64,
) -> Result<Vec<f64>> {
    match method {
        Method::Compensated | Method::Naive => {
            let mut p = predictor.ok_or_else(|| Error::invalid("predictive method needs a predictor"))?;
            Ok(fill_absent(&p.score_sequence(seq)?))
        }
        Method::DirectDiff => direct_diff_trace(seq, lambda),
        Method::Uniform { .. } => Ok(vec![0.0; seq.len()]),
    }
}

/// Metrics row for a finished trigger stream.
#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    method: Method,
    alpha: Option<f64>,
    triggers: &[TriggerEvent],
    duration_s: f64,
    fps: f64,
    energy: &[f64],
    reference: Option<&Reference>,
    eval: &EvalSettings,
) -> Result<MetricsRow> {
    let times: Vec<f64> = triggers.iter().map(|e| e.time_s).collect();
    let band = bsr(&times, duration_s, &eval.telemetry)?;
    let mask = telemetry_mask(energy.len(), fps, &times, &eval.telemetry);
    let ler = ler(energy, &mask)?;
    let (precision, recall, f1, spcr, tcr) = match reference {
        Some(r) => {
            let m = match_peaks(&times, &r.event_times, &eval.matching);
            let pairs: Vec<(usize, f64)> = triggers.iter().map(|e| (e.frame_index, e.time_s)).collect();
            let rates = consensus_rates(&pairs, &r.consensus, &eval.matching);
            (m.precision(), m.recall(), Some(m.f1()), rates.spcr_p1, rates.tcr_p1)
        }
        None => (None, None, None, None, None),
    };
    Ok(MetricsRow {
        method: method.name().to_string(),
        alpha,
        period_s: match method {
            Method::Uniform { period_s } => Some(period_s),
            _ => None,
        },
        n_triggers: triggers.len(),
        precision,
        recall,
        f1,
        spcr,
        tcr,
        bsr: band.bsr,
        ler,
    })
}

/// Uniform period giving `n` triggers over the stream; no triggers when `n`
/// is zero.
pub fn matched_period(duration_s: f64, n: usize) -> f64 {
    if n == 0 {
        2.0 * duration_s
    } else {
        duration_s / n as f64
    }
}

/// One stream prepared for sweeping: score traces per predictive or
/// difference method plus the shared energy trace.
#[derive(Debug, Clone)]
pub struct PreparedStream {
    pub fps: f64,
    pub duration_s: f64,
    pub energy: Vec<f64>,
    pub reference: Option<Reference>,
    pub traces: Vec<(Method, Vec<f64>)>,
}

impl PreparedStream {
    pub fn trace(&self, method: Method) -> Option<&[f64]> {
        self.traces
            .iter()
            .find(|(m, _)| *m == method)
            .map(|(_, t)| t.as_slice())
    }

    /// Rows for every (method, α). Each uniform row uses the period whose
    /// trigger count matches the first scored method at that α.
    pub fn sweep(&self, methods: &[Method], alphas: &[f64], eval: &EvalSettings) -> Result<Vec<MetricsRow>> {
        if alphas.is_empty() {
            return Err(Error::invalid("alpha list is empty"));
        }
        let mut rows = Vec::new();
        for &alpha in alphas {
            let cfg = ExtractorConfig {
                alpha,
                ..eval.extractor.clone()
            };
            let mut anchor: Option<usize> = None;
            for &method in methods.iter().filter(|m| !m.is_uniform()) {
                let raw = self
                    .trace(method)
                    .ok_or_else(|| Error::invalid(format!("no {} trace prepared", method.name())))?;
                let triggers = extract(raw, &cfg, method.source())?.triggers;
                anchor.get_or_insert(triggers.len());
                rows.push(self.row(method, Some(alpha), &triggers, eval)?);
            }
            if methods.iter().any(Method::is_uniform) {
                let n = anchor.ok_or_else(|| Error::invalid("uniform rows need a scored method to match"))?;
                let method = Method::Uniform {
                    period_s: matched_period(self.duration_s, n),
                };
                let triggers = self.uniform_triggers(method)?;
                rows.push(self.row(method, Some(alpha), &triggers, eval)?);
            }
        }
        Ok(rows)
    }

    fn uniform_triggers(&self, method: Method) -> Result<Vec<TriggerEvent>> {
        match method {
            Method::Uniform { period_s } => uniform_schedule(self.duration_s, period_s, self.fps),
            _ => unreachable!("uniform method"),
        }
    }

    fn row(
        &self,
        method: Method,
        alpha: Option<f64>,
        triggers: &[TriggerEvent],
        eval: &EvalSettings,
    ) -> Result<MetricsRow> {
        evaluate(
            method,
            alpha,
            triggers,
            self.duration_s,
            self.fps,
            &self.energy,
            self.reference.as_ref(),
            eval,
        )
    }
}

fn read_inputs(manifest: &RunManifest) -> Result<(LatentSequence, Option<Reference>)> {
    let seq = LatentSequence::read_file(&manifest.inputs.sequence, None)?;
    let reference = match &manifest.inputs.labels {
        Some(path) => Some(Reference::from_labels(&read_labels(fs::File::open(path)?)?)),
        None => None,
    };
    Ok((seq, reference))
}

fn method_trace(manifest: &RunManifest, method: Method, seq: &LatentSequence) -> Result<Vec<f64>> {
    let predictor = match method.variant() {
        Some(_) => Some(load_predictor(manifest, method, seq.dim())?),
        None => None,
    };
    score_trace(method, seq, predictor, manifest.model.lambda)
}

#[derive(Debug, Clone)]
pub struct ReplayOutput {
    pub row: MetricsRow,
    pub extraction: Extraction,
    /// Report text as written to `report.csv`.
    pub report: String,
}

/// Replay one stream through the manifest's method at its operating point.
/// Writes `trace.csv`, `triggers.tsv` and `report.csv` into the output
/// directory.
pub fn run_replay(manifest: &RunManifest) -> Result<ReplayOutput> {
    manifest.validate()?;
    let (seq, reference) = read_inputs(manifest)?;
    let eval = manifest.eval();
    let raw = method_trace(manifest, manifest.method, &seq)?;
    let extraction = match manifest.method {
        Method::Uniform { period_s } => Extraction {
            triggers: uniform_schedule(seq.duration_s(), period_s, seq.fps())?,
            smoothed: vec![0.0; raw.len()],
            threshold: vec![None; raw.len()],
            raw,
        },
        m => extract(&raw, &eval.extractor, m.source())?,
    };
    let energy = latent_energy(&seq, eval.ler.context)?;
    let row = evaluate(
        manifest.method,
        Some(eval.extractor.alpha),
        &extraction.triggers,
        seq.duration_s(),
        seq.fps(),
        &energy,
        reference.as_ref(),
        &eval,
    )?;
    let report = format!("{}{CSV_HEADER}\n{}\n", manifest.header(), row.to_csv());

    let dir = &manifest.output_dir;
    fs::create_dir_all(dir)?;
    let mut trace = Vec::new();
    extraction.write_trace_csv(&mut trace)?;
    fs::write(dir.join("trace.csv"), trace)?;
    let mut log = Vec::new();
    write_trigger_log(&extraction.triggers, &mut log)?;
    fs::write(dir.join("triggers.tsv"), log)?;
    fs::write(dir.join("report.csv"), &report)?;
    log::info!(
        "replay {}: {} triggers",
        manifest.method.name(),
        extraction.triggers.len()
    );
    Ok(ReplayOutput {
        row,
        extraction,
        report,
    })
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub rows: Vec<MetricsRow>,
    pub report: String,
    pub svg: String,
}

/// α sweep over `sweep_methods`. Score traces do not depend on α, so each
/// method is scored once (in parallel, each with its own predictor) and
/// re-extracted per α. Writes `sweep.csv` and `frontier.svg`.
pub fn alpha_sweep(manifest: &RunManifest) -> Result<SweepOutput> {
    manifest.validate()?;
    if manifest.alphas.is_empty() {
        return Err(Error::invalid("alpha list is empty"));
    }
    let (seq, reference) = read_inputs(manifest)?;
    let eval = manifest.eval();
    let scored: Vec<Method> = manifest
        .sweep_methods
        .iter()
        .copied()
        .filter(|m| !m.is_uniform())
        .collect();
    let traces = scored
        .par_iter()
        .map(|&m| method_trace(manifest, m, &seq).map(|t| (m, t)))
        .collect::<Result<Vec<_>>>()?;
    let stream = PreparedStream {
        fps: seq.fps(),
        duration_s: seq.duration_s(),
        energy: latent_energy(&seq, eval.ler.context)?,
        reference,
        traces,
    };
    let rows = stream.sweep(&manifest.sweep_methods, &manifest.alphas, &eval)?;
    let mut report = manifest.header();
    report.push_str(CSV_HEADER);
    report.push('\n');
    for r in &rows {
        report.push_str(&r.to_csv());
        report.push('\n');
    }
    let svg = frontier_svg(&rows);
    let dir = &manifest.output_dir;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("sweep.csv"), &report)?;
    let mut f = fs::File::create(dir.join("frontier.svg"))?;
    f.write_all(svg.as_bytes())?;
    Ok(SweepOutput { rows, report, svg })
}

/// Pareto set of (BSR, F1) operating points, both maximised.
#[derive(Debug, Clone, PartialEq)]
pub struct Frontier {
    /// Sorted by BSR ascending; F1 strictly decreasing.
    pub points: Vec<(f64, f64)>,
}

impl Frontier {
    /// `max_bsr` is the trigger-free savings, added as a zero-F1 anchor: a
    /// silent extractor is always available.
    pub fn new(points: &[(f64, f64)], max_bsr: f64) -> Self {
        let mut all: Vec<(f64, f64)> = points.to_vec();
        all.push((max_bsr, 0.0));
        all.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)));
        // sweep from the highest BSR down, keeping strict F1 improvements
        let mut kept: Vec<(f64, f64)> = Vec::new();
        for p in all {
            if kept.last().is_none_or(|last| p.1 > last.1) {
                kept.push(p);
            }
        }
        kept.reverse();
        Frontier { points: kept }
    }

    /// Interpolated F1 at a BSR budget: clamped to the best F1 below the
    /// first point and zero past the anchor.
    pub fn f1_at(&self, bsr: f64) -> f64 {
        let pts = &self.points;
        if bsr <= pts[0].0 {
            return pts[0].1;
        }
        for w in pts.windows(2) {
            let ((b0, f0), (b1, f1)) = (w[0], w[1]);
            if bsr <= b1 {
                return f0 + (f1 - f0) * (bsr - b0) / (b1 - b0);
            }
        }
        0.0
    }
}

/// Per-(method, α) means over several streams' sweep rows.
pub fn mean_rows(per_stream: &[Vec<MetricsRow>]) -> Result<Vec<MetricsRow>> {
    let first = per_stream.first().ok_or_else(|| Error::invalid("no sweep rows"))?;
    let n = per_stream.len() as f64;
    let mut out = Vec::with_capacity(first.len());
    for (i, proto) in first.iter().enumerate() {
        let col = |f: &dyn Fn(&MetricsRow) -> Option<f64>| -> Option<f64> {
            let vals: Option<Vec<f64>> = per_stream.iter().map(|rows| f(&rows[i])).collect();
            vals.map(|v| v.iter().sum::<f64>() / n)
        };
        for rows in per_stream {
            if rows.len() != first.len() || rows[i].method != proto.method || rows[i].alpha != proto.alpha {
                return Err(Error::invalid("sweep rows of different shape"));
            }
        }
        out.push(MetricsRow {
            method: proto.method.clone(),
            alpha: proto.alpha,
            period_s: col(&|r| r.period_s),
            n_triggers: (per_stream.iter().map(|r| r[i].n_triggers).sum::<usize>() as f64 / n).round() as usize,
            precision: col(&|r| r.precision),
            recall: col(&|r| r.recall),
            f1: col(&|r| r.f1),
            spcr: col(&|r| r.spcr),
            tcr: col(&|r| r.tcr),
            bsr: col(&|r| Some(r.bsr)).expect("bsr always present"),
            ler: col(&|r| r.ler),
        });
    }
    Ok(out)
}

/// (BSR, F1) points of one method's rows.
pub fn operating_points(rows: &[MetricsRow], method: &str) -> Vec<(f64, f64)> {
    rows.iter()
        .filter(|r| r.method == method)
        .filter_map(|r| r.f1.map(|f| (r.bsr, f)))
        .collect()
}

/// F1-versus-BSR scatter, one colour per method.
pub fn frontier_svg(rows: &[MetricsRow]) -> String {
    const W: f64 = 480.0;
    const H: f64 = 360.0;
    const PAD: f64 = 48.0;
    let colors = [
        ("compensated", "#1b7837"),
        ("naive", "#c51b7d"),
        ("direct_diff", "#2166ac"),
        ("uniform", "#7f7f7f"),
    ];
    let bsrs: Vec<f64> = rows.iter().map(|r| r.bsr).collect();
    let lo = bsrs.iter().copied().fold(f64::INFINITY, f64::min).min(0.0);
    let hi = bsrs.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(100.0);
    let x = |b: f64| PAD + (b - lo) / (hi - lo) * (W - 2.0 * PAD);
    let y = |f: f64| H - PAD - f * (H - 2.0 * PAD);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<path d="M{PAD} {PAD} V{} H{}" fill="none" stroke="black"/>"#,
        H - PAD,
        W - PAD
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">BSR (%)</text>"#,
        W / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">peak F1</text>"#,
        H / 2.0,
        H / 2.0
    );
    for (i, (name, color)) in colors.iter().enumerate() {
        let pts: Vec<&MetricsRow> = rows.iter().filter(|r| r.method == *name && r.f1.is_some()).collect();
        if pts.is_empty() {
            continue;
        }
        for r in &pts {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{color}"><title>{name} alpha={} bsr={:.2} f1={:.3}</title></circle>"#,
                x(r.bsr),
                y(r.f1.unwrap_or(0.0)),
                opt(r.alpha),
                r.bsr,
                r.f1.unwrap_or(0.0)
            );
        }
        let ly = PAD + 14.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<circle cx="{}" cy="{ly}" r="3.5" fill="{color}"/>"#,
            W - PAD - 90.0
        );
        let _ = writeln!(s, r#"<text x="{}" y="{}">{name}</text>"#, W - PAD - 82.0, ly + 4.0);
    }
    s.push_str("</svg>\n");
    s
}

/// Synthetic suite settings: motion-coupled replay worlds plus matching
/// event-free pretraining footage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeskSetup {
    pub dim: usize,
    pub cycles: usize,
    pub pretrain_s: f64,
    pub pretrain_epochs: usize,
    pub pretrain_lr: f64,
    pub model: ModelSettings,
}

impl Default for DeskSetup {
    fn default() -> Self {
        DeskSetup {
            dim: 32,
            cycles: 5,
            pretrain_s: 120.0,
            pretrain_epochs: 3,
            pretrain_lr: 0.05,
            model: ModelSettings::desk(),
        }
    }
}

/// Pretrained predictor for one world seed. Pretraining footage shares the
/// replay world's structure seed, so the same scene geometry and coupling.
pub fn pretrained(setup: &DeskSetup, seed: u64, variant: Variant) -> Result<Predictor> {
    let footage = generate(&ScenarioConfig::pretraining(setup.dim, seed, setup.pretrain_s))?;
    let mut p = Predictor::new(setup.model.config(setup.dim, variant, seed))?;
    p.pretrain(&footage.sequence, setup.pretrain_epochs, setup.pretrain_lr)?;
    Ok(p)
}

/// Trigger bookkeeping against a synthetic world's ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowCounts {
    /// Triggers left unmatched by peak matching that fall inside a maneuver
    /// window extended by `slack_s`.
    pub maneuver_false: usize,
    /// Triggers matched to a scheduled event.
    pub event_true: usize,
    pub total: usize,
}

pub fn window_counts(
    triggers: &[TriggerEvent],
    scenario: &Scenario,
    matching: &MatchConfig,
    slack_s: f64,
) -> WindowCounts {
    let times: Vec<f64> = triggers.iter().map(|e| e.time_s).collect();
    let m = match_peaks(&times, &scenario.event_times, matching);
    let maneuver_false = m
        .false_positives
        .iter()
        .filter(|&&i| {
            scenario
                .maneuver_windows
                .iter()
                .any(|&(a, b)| times[i] >= a && times[i] <= b + slack_s)
        })
        .count();
    WindowCounts {
        maneuver_false,
        event_true: m.matched(),
        total: triggers.len(),
    }
}

#[derive(Debug, Clone)]
pub struct SuiteEntry {
    pub seed: u64,
    pub scenario: Scenario,
    pub stream: PreparedStream,
}

/// Generate, pretrain and score every seed of a suite. Both predictive
/// variants share seed and schedule. Seeds run in parallel.
pub fn run_suite(setup: &DeskSetup, seeds: &[u64], ler: &LerConfig) -> Result<Vec<SuiteEntry>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let scenario = generate(&ScenarioConfig::motion_coupled(setup.dim, seed, setup.cycles))?;
            let seq = &scenario.sequence;
            let mut traces = Vec::new();
            for method in [Method::Compensated, Method::Naive] {
                let variant = method.variant().expect("predictive method");
                let p = pretrained(setup, seed, variant)?;
                traces.push((method, score_trace(method, seq, Some(p), setup.model.lambda)?));
            }
            traces.push((Method::DirectDiff, direct_diff_trace(seq, setup.model.lambda)?));
            let stream = PreparedStream {
                fps: seq.fps(),
                duration_s: seq.duration_s(),
                energy: latent_energy(seq, ler.context)?,
                reference: Some(Reference::from_labels(&scenario.labels)),
                traces,
            };
            Ok(SuiteEntry { seed, scenario, stream })
        })
        .collect()
}
