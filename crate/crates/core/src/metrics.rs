//! Evaluation arithmetic: peak matching and F1, reviewer-consensus rates,
//! false-alarm suppression, bandwidth savings and latent-energy retention.
//!
//! Undefined ratios (empty denominators) are `None`, never zero.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latent_io::{Category, EventLabel, LatentSequence};
use crate::world_model::cosine;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchConfig {
    pub tolerance_s: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig { tolerance_s: 3.0 }
    }
}

/// One-to-one assignment between trigger times and reference event times.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Matching {
    /// `(trigger index, event index)` pairs, ordered by event.
    pub pairs: Vec<(usize, usize)>,
    pub false_positives: Vec<usize>,
    pub misses: Vec<usize>,
    pub n_triggers: usize,
    pub n_events: usize,
}

impl Matching {
    pub fn matched(&self) -> usize {
        self.pairs.len()
    }

    pub fn precision(&self) -> Option<f64> {
        ratio(self.matched(), self.n_triggers)
    }

    pub fn recall(&self) -> Option<f64> {
        ratio(self.matched(), self.n_events)
    }

    /// Peak F1, taking undefined precision or recall as zero.
    pub fn f1(&self) -> f64 {
        peak_f1(self.precision().unwrap_or(0.0), self.recall().unwrap_or(0.0)).expect("ratios lie in [0, 1]")
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// Maximum-cardinality one-to-one matching of triggers to events where a
/// pair is admissible when the times differ by at most the tolerance.
///
/// Events are processed chronologically and each tries its admissible
/// triggers nearest first, re-routing earlier assignments along augmenting
/// paths when that frees a trigger.
pub fn match_peaks(trigger_times: &[f64], event_times: &[f64], cfg: &MatchConfig) -> Matching {
    let tol = cfg.tolerance_s;
    let candidates: Vec<Vec<usize>> = event_times
        .iter()
        .map(|&e| {
            let mut c: Vec<usize> = (0..trigger_times.len())
                .filter(|&i| (trigger_times[i] - e).abs() <= tol)
                .collect();
            c.sort_by(|&a, &b| {
                (trigger_times[a] - e)
                    .abs()
                    .total_cmp(&(trigger_times[b] - e).abs())
                    .then(a.cmp(&b))
            });
            c
        })
        .collect();

    let mut order: Vec<usize> = (0..event_times.len()).collect();
    order.sort_by(|&a, &b| event_times[a].total_cmp(&event_times[b]).then(a.cmp(&b)));

    let mut owner: Vec<Option<usize>> = vec![None; trigger_times.len()];
    for &ev in &order {
        let mut seen = vec![false; trigger_times.len()];
        augment(ev, &candidates, &mut owner, &mut seen);
    }

    let mut pairs: Vec<(usize, usize)> = owner
        .iter()
        .enumerate()
        .filter_map(|(trig, ev)| ev.map(|ev| (trig, ev)))
        .collect();
    pairs.sort_by_key(|&(_, ev)| ev);
    let matched_events: BTreeSet<usize> = pairs.iter().map(|&(_, e)| e).collect();
    Matching {
        false_positives: (0..trigger_times.len()).filter(|&i| owner[i].is_none()).collect(),
        misses: (0..event_times.len()).filter(|e| !matched_events.contains(e)).collect(),
        pairs,
        n_triggers: trigger_times.len(),
        n_events: event_times.len(),
    }
}

fn augment(ev: usize, candidates: &[Vec<usize>], owner: &mut [Option<usize>], seen: &mut [bool]) -> bool {
    for &trig in &candidates[ev] {
        if seen[trig] {
            continue;
        }
        seen[trig] = true;
        let free = match owner[trig] {
            None => true,
            Some(other) => augment(other, candidates, owner, seen),
        };
        if free {
            owner[trig] = Some(ev);
            return true;
        }
    }
    false
}

/// Harmonic mean of precision and recall; zero when both are zero.
pub fn peak_f1(precision: f64, recall: f64) -> Result<f64> {
    for (name, v) in [("precision", precision), ("recall", recall)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(format!("{name} must lie in [0, 1], got {v}")));
        }
    }
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Review phase that produced a consensus event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "phase")]
pub enum Phase {
    /// Blind annotation consensus.
    P1,
    /// Model proposal confirmed by reviewer vote.
    P2Confirmed {
        proposal_id: String,
        frame_index: usize,
        agree_votes: usize,
        reject_votes: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusEvent {
    pub start_s: f64,
    pub end_s: f64,
    pub category: Option<Category>,
    #[serde(flatten)]
    pub phase: Phase,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConsensusSet {
    pub events: Vec<ConsensusEvent>,
}

impl ConsensusSet {
    pub fn p1(&self) -> impl Iterator<Item = &ConsensusEvent> {
        self.events.iter().filter(|e| matches!(e.phase, Phase::P1))
    }

    pub fn p2(&self) -> impl Iterator<Item = &ConsensusEvent> {
        self.events
            .iter()
            .filter(|e| matches!(e.phase, Phase::P2Confirmed { .. }))
    }
}

/// Merge per-annotator labels into Phase 1 consensus intervals: maximal time
/// spans where at least `min_votes` distinct annotators marked the same
/// category. `None` means a simple majority of the annotators present.
pub fn build_consensus(labels: &[EventLabel], min_votes: Option<usize>) -> Vec<ConsensusEvent> {
    let annotators: BTreeSet<&str> = labels.iter().map(|l| l.annotator_id.as_str()).collect();
    let needed = min_votes.unwrap_or(annotators.len() / 2 + 1).max(1);

    let mut out = Vec::new();
    for category in Category::ALL {
        // (time, +1 start / -1 end); starts sort before ends at equal time so
        // closed intervals touching at a point overlap.
        let mut edges: Vec<(f64, i32)> = Vec::new();
        let mut per_annotator: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
        for l in labels.iter().filter(|l| l.category == category) {
            per_annotator
                .entry(l.annotator_id.as_str())
                .or_default()
                .push((l.start_s, l.end_s));
        }
        for intervals in per_annotator.values() {
            for (s, e) in merge_intervals(intervals.clone()) {
                edges.push((s, 1));
                edges.push((e, -1));
            }
        }
        edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)));
        let mut count = 0usize;
        let mut open: Option<f64> = None;
        for (time, delta) in edges {
            if delta > 0 {
                count += 1;
                if count == needed {
                    open = Some(time);
                }
            } else {
                if count == needed {
                    if let Some(start) = open.take() {
                        out.push(ConsensusEvent {
                            start_s: start,
                            end_s: time,
                            category: Some(category),
                            phase: Phase::P1,
                        });
                    }
                }
                count -= 1;
            }
        }
    }
    out.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    out
}

fn merge_intervals(mut v: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (s, e) in v {
        match out.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

/// Consensus-based recall, confirmation and discovery rates, in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusRates {
    pub spcr_p1: Option<f64>,
    pub spcr_p1p2: Option<f64>,
    pub tcr_p1: Option<f64>,
    pub tcr_p1p2: Option<f64>,
    pub dr: Option<f64>,
    pub p1_events: usize,
    pub p1_retained: usize,
    pub p2_events: usize,
    pub proposals: usize,
    pub confirmed_p1: usize,
    pub confirmed_p1p2: usize,
}

/// Trigger stream against a consensus set.
///
/// * a P1 event is retained when a trigger lies inside its interval widened
///   by the tolerance
/// * a proposal is P1-confirmed when it lies inside any widened P1 interval,
///   and P2-confirmed when a P2 entry references its frame
/// * post-discovery recall adds the P2 discoveries to both sides; the
///   confirmation denominator stays the full proposal count
pub fn consensus_rates(trigger: &[(usize, f64)], consensus: &ConsensusSet, cfg: &MatchConfig) -> ConsensusRates {
    let tol = cfg.tolerance_s;
    let p1: Vec<&ConsensusEvent> = consensus.p1().collect();
    let p2_frames: BTreeSet<usize> = consensus
        .p2()
        .filter_map(|e| match e.phase {
            Phase::P2Confirmed { frame_index, .. } => Some(frame_index),
            Phase::P1 => None,
        })
        .collect();
    let p2_events = consensus.p2().count();

    let inside = |time: f64, e: &ConsensusEvent| time >= e.start_s - tol && time <= e.end_s + tol;
    let p1_retained = p1.iter().filter(|e| trigger.iter().any(|&(_, t)| inside(t, e))).count();
    let p1_confirmed: Vec<bool> = trigger.iter().map(|&(_, t)| p1.iter().any(|e| inside(t, e))).collect();
    let confirmed_p1 = p1_confirmed.iter().filter(|&&c| c).count();
    let confirmed_p1p2 = trigger
        .iter()
        .zip(&p1_confirmed)
        .filter(|&(&(frame, _), &c)| c || p2_frames.contains(&frame))
        .count();

    let pct = |n: usize, d: usize| ratio(n, d).map(|r| r * 100.0);
    ConsensusRates {
        spcr_p1: pct(p1_retained, p1.len()),
        spcr_p1p2: pct(p1_retained + p2_events, p1.len() + p2_events),
        tcr_p1: pct(confirmed_p1, trigger.len()),
        tcr_p1p2: pct(confirmed_p1p2, trigger.len()),
        dr: pct(p2_events, p1.len()),
        p1_events: p1.len(),
        p1_retained,
        p2_events,
        proposals: trigger.len(),
        confirmed_p1,
        confirmed_p1p2,
    }
}

/// Relative false-alarm reduction of the compensated stream, in percent.
pub fn fpsr(n_comp_false: usize, n_uncomp_false: usize) -> Result<f64> {
    if n_uncomp_false == 0 {
        return Err(Error::Undefined("no uncompensated false alarms".into()));
    }
    Ok((1.0 - n_comp_false as f64 / n_uncomp_false as f64) * 100.0)
}

/// Trigger-gated transmission rule: full rate inside `+-half_window_s`
/// around each trigger, low rate elsewhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TelemetryPolicy {
    pub low_rate_fps: f64,
    pub high_rate_fps: f64,
    pub half_window_s: f64,
}

impl Default for TelemetryPolicy {
    fn default() -> Self {
        TelemetryPolicy {
            low_rate_fps: 1.0,
            high_rate_fps: 30.0,
            half_window_s: 3.0,
        }
    }
}

impl TelemetryPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.low_rate_fps >= 0.0 && self.high_rate_fps > 0.0 && self.low_rate_fps <= self.high_rate_fps) {
            return Err(Error::invalid(
                "telemetry rates must satisfy 0 <= low <= high, high > 0",
            ));
        }
        if !(self.half_window_s.is_finite() && self.half_window_s >= 0.0) {
            return Err(Error::invalid("telemetry half-window must be >= 0"));
        }
        Ok(())
    }

    /// Low-rate sampling ratio.
    pub fn r_low(&self) -> f64 {
        self.low_rate_fps / self.high_rate_fps
    }
}

/// Length of the union of trigger windows clipped to `[0, duration_s]`.
pub fn covered_duration(trigger_times: &[f64], duration_s: f64, half_window_s: f64) -> f64 {
    let windows: Vec<(f64, f64)> = trigger_times
        .iter()
        .map(|&t| ((t - half_window_s).max(0.0), (t + half_window_s).min(duration_s)))
        .filter(|(s, e)| e > s)
        .collect();
    merge_intervals(windows).iter().map(|(s, e)| e - s).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthReport {
    pub n_raw: f64,
    pub n_tx: f64,
    /// Percent.
    pub bsr: f64,
}

/// Bandwidth savings ratio of a trigger stream against continuous full-rate
/// streaming. Frame counts are rate times duration.
pub fn bsr(trigger_times: &[f64], duration_s: f64, policy: &TelemetryPolicy) -> Result<BandwidthReport> {
    policy.validate()?;
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::invalid(format!("duration must be > 0, got {duration_s}")));
    }
    let covered = covered_duration(trigger_times, duration_s, policy.half_window_s);
    let n_raw = duration_s * policy.high_rate_fps;
    let n_tx = covered * policy.high_rate_fps + (duration_s - covered) * policy.low_rate_fps;
    Ok(BandwidthReport {
        n_raw,
        n_tx,
        bsr: (1.0 - n_tx / n_raw) * 100.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LerConfig {
    /// Rolling context length in frames.
    pub context: usize,
}

impl Default for LerConfig {
    fn default() -> Self {
        LerConfig { context: 30 }
    }
}

/// Per-frame latent-change energy: cosine deviation of each frame from the
/// mean of the previous `context` frames, median-centred and clipped at
/// zero. Frames before `context` carry no energy.
pub fn latent_energy(seq: &LatentSequence, context: usize) -> Result<Vec<f64>> {
    let n = seq.len();
    if context == 0 {
        return Err(Error::invalid("LER context must be positive"));
    }
    if n <= context {
        return Err(Error::TooShort {
            needed: context,
            found: n,
        });
    }
    let mut deviation = Vec::with_capacity(n - context);
    let mut mean = vec![0.0; seq.dim()];
    for t in context..n {
        mean.iter_mut().for_each(|m| *m = 0.0);
        for k in t - context..t {
            for (m, x) in mean.iter_mut().zip(seq.frame(k)) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= context as f64);
        deviation.push(1.0 - cosine(seq.frame(t), &mean));
    }
    let med = median(&deviation);
    let mut energy = vec![0.0; context];
    energy.extend(deviation.iter().map(|d| (d - med).max(0.0)));
    Ok(energy)
}

/// Median, averaging the two middle values for even counts.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Per-frame telemetry weights: 1 inside any trigger window, `r_low` elsewhere.
pub fn telemetry_mask(n_frames: usize, fps: f64, trigger_times: &[f64], policy: &TelemetryPolicy) -> Vec<f64> {
    let mut sorted = trigger_times.to_vec();
    sorted.sort_by(f64::total_cmp);
    let r_low = policy.r_low();
    (0..n_frames)
        .map(|t| {
            let time = t as f64 / fps;
            let i = sorted.partition_point(|&x| x < time - policy.half_window_s);
            if sorted.get(i).is_some_and(|&x| x <= time + policy.half_window_s) {
                1.0
            } else {
                r_low
            }
        })
        .collect()
}

/// Retained share of the energy trace, in percent. `None` when the trace
/// carries no energy.
pub fn ler(energy: &[f64], weights: &[f64]) -> Result<Option<f64>> {
    if energy.len() != weights.len() {
        return Err(Error::DimMismatch {
            expected: energy.len(),
            found: weights.len(),
        });
    }
    let total: f64 = energy.iter().sum();
    if total == 0.0 {
        return Ok(None);
    }
    let captured: f64 = energy.iter().zip(weights).map(|(e, w)| e * w).sum();
    Ok(Some(captured / total * 100.0))
}
