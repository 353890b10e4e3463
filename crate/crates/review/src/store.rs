//! Proposal index and append-only verdict log.
//!
//! Each accepted verdict is one JSON line, synced to disk before the call
//! returns. Opening a store replays the log over freshly loaded proposals,
//! so statuses are a pure function of (trigger logs, verdict log, rule).

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use arc_swap::ArcSwap;
use serde::{Deserialize, Serialize};
use surprise_core::extractor::{Source, TriggerEvent};
use surprise_core::latent_io::EventLabel;
use surprise_core::metrics::{consensus_rates, ConsensusEvent, ConsensusRates, ConsensusSet, MatchConfig, Phase};

use crate::error::{Result, ReviewError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Agree,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pending,
    Agreed,
    Rejected,
}

impl std::str::FromStr for Status {
    type Err = ReviewError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pending" => Ok(Status::Pending),
            "agreed" => Ok(Status::Agreed),
            "rejected" => Ok(Status::Rejected),
            _ => Err(ReviewError::BadRequest(format!("unknown status {s:?}"))),
        }
    }
}

/// Majority of submitted verdicts once at least `min_verdicts` exist; ties
/// stay pending.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteRule {
    pub min_verdicts: usize,
}

impl Default for VoteRule {
    fn default() -> Self {
        VoteRule { min_verdicts: 1 }
    }
}

impl VoteRule {
    pub fn status(&self, verdicts: &[Verdict]) -> Status {
        let agree = verdicts.iter().filter(|v| v.decision == Decision::Agree).count();
        let reject = verdicts.len() - agree;
        if verdicts.len() < self.min_verdicts.max(1) || agree == reject {
            Status::Pending
        } else if agree > reject {
            Status::Agreed
        } else {
            Status::Rejected
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub proposal_id: String,
    pub reviewer_id: String,
    pub decision: Decision,
    /// Seconds since the Unix epoch, assigned by the server.
    pub timestamp_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcerptPoint {
    pub frame_index: usize,
    pub time_s: f64,
    pub smoothed: f64,
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub id: String,
    pub stream_id: String,
    pub frame_index: usize,
    pub time_s: f64,
    pub score: f64,
    pub threshold: f64,
    pub source: Source,
    pub excerpt: Vec<ExcerptPoint>,
    #[serde(default)]
    pub frames: Vec<String>,
    pub status: Status,
    pub verdicts: Vec<Verdict>,
}

/// Smoothed score and threshold per frame, as dumped by a replay.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceDump {
    pub smoothed: Vec<f64>,
    pub threshold: Vec<Option<f64>>,
}

impl TraceDump {
    /// Parse a `t,raw,smoothed,tau` trace CSV.
    pub fn parse(text: &str) -> Result<Self> {
        let mut out = TraceDump::default();
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            let bad = || ReviewError::BadInput(format!("trace line {}: {line:?}", i + 1));
            if cols.len() != 4 || cols[0].parse::<usize>().ok() != Some(out.smoothed.len()) {
                return Err(bad());
            }
            out.smoothed.push(cols[2].parse().map_err(|_| bad())?);
            out.threshold.push(match cols[3] {
                "" => None,
                s => Some(s.parse().map_err(|_| bad())?),
            });
        }
        Ok(out)
    }
}

/// Everything needed to serve one replayed stream.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamInput {
    pub id: String,
    pub fps: f64,
    pub duration_s: f64,
    pub triggers: Vec<TriggerEvent>,
    pub trace: Option<TraceDump>,
    /// Phase 1 labels; `None` when not loaded.
    pub labels: Option<Vec<EventLabel>>,
    /// Half-width of the trace excerpt attached to each proposal.
    pub excerpt_s: f64,
    /// Frame image reference, `{frame}` replaced by the trigger frame.
    pub frame_pattern: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StreamSummary {
    pub id: String,
    pub fps: f64,
    pub duration_s: f64,
    pub proposals: usize,
    pub pending: usize,
    pub agreed: usize,
    pub rejected: usize,
    pub p1_events: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
pub struct ProposalFilter {
    pub status: Option<Status>,
    /// Hide proposals inside this reviewer's own Phase 1 intervals.
    pub reviewer: Option<String>,
    /// With `reviewer`: keep only proposals the reviewer has (or has not)
    /// judged.
    pub voted: Option<bool>,
    pub offset: Option<usize>,
    pub limit: Option<usize>,
}

pub const DEFAULT_PAGE: usize = 50;
pub const MAX_PAGE: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Page {
    pub stream_id: String,
    pub total: usize,
    pub offset: usize,
    pub limit: usize,
    pub items: Vec<Proposal>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsSnapshot {
    pub stream_id: String,
    pub p1_labels_loaded: bool,
    pub rates: ConsensusRates,
}

#[derive(Debug, Clone)]
struct StreamState {
    input: StreamInput,
    p1: Vec<ConsensusEvent>,
    /// Proposal ids in trigger-time order.
    order: Vec<String>,
}

#[derive(Debug, Clone, Default)]
struct State {
    streams: BTreeMap<String, StreamState>,
    proposals: BTreeMap<String, Proposal>,
}

/// Shared review state. Reads load an immutable snapshot without locking;
/// writes go through a single writer that appends to the log before
/// publishing the next snapshot.
#[derive(Debug)]
pub struct ReviewStore {
    state: ArcSwap<State>,
    log: Mutex<File>,
    log_path: PathBuf,
    rule: VoteRule,
    matching: MatchConfig,
}

pub fn proposal_id(stream_id: &str, frame_index: usize) -> String {
    format!("{stream_id}-{frame_index}")
}

fn excerpt(input: &StreamInput, frame: usize) -> Vec<ExcerptPoint> {
    let Some(trace) = &input.trace else {
        return Vec::new();
    };
    let half = (input.excerpt_s * input.fps).round() as usize;
    let lo = frame.saturating_sub(half);
    let hi = (frame + half).min(trace.smoothed.len().saturating_sub(1));
    (lo..=hi)
        .filter(|&t| t < trace.smoothed.len())
        .map(|t| ExcerptPoint {
            frame_index: t,
            time_s: t as f64 / input.fps,
            smoothed: trace.smoothed[t],
            threshold: trace.threshold.get(t).copied().flatten(),
        })
        .collect()
}

fn now_s() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

impl State {
    fn build(streams: Vec<StreamInput>) -> Result<Self> {
        let mut state = State::default();
        for input in streams {
            if state.streams.contains_key(&input.id) {
                return Err(ReviewError::BadInput(format!("duplicate stream id {:?}", input.id)));
            }
            let mut triggers = input.triggers.clone();
            triggers.sort_by(|a, b| a.time_s.total_cmp(&b.time_s).then(a.frame_index.cmp(&b.frame_index)));
            let mut order = Vec::with_capacity(triggers.len());
            for tr in &triggers {
                let id = proposal_id(&input.id, tr.frame_index);
                if state.proposals.contains_key(&id) {
                    return Err(ReviewError::BadInput(format!(
                        "two triggers at frame {}",
                        tr.frame_index
                    )));
                }
                state.proposals.insert(
                    id.clone(),
                    Proposal {
                        id: id.clone(),
                        stream_id: input.id.clone(),
                        frame_index: tr.frame_index,
                        time_s: tr.time_s,
                        score: tr.score,
                        threshold: tr.threshold,
                        source: tr.source,
                        excerpt: excerpt(&input, tr.frame_index),
                        frames: input
                            .frame_pattern
                            .iter()
                            .map(|p| p.replace("{frame}", &tr.frame_index.to_string()))
                            .collect(),
                        status: Status::Pending,
                        verdicts: Vec::new(),
                    },
                );
                order.push(id);
            }
            let p1 = input
                .labels
                .as_deref()
                .map(|l| surprise_core::metrics::build_consensus(l, None))
                .unwrap_or_default();
            state.streams.insert(input.id.clone(), StreamState { input, p1, order });
        }
        Ok(state)
    }

    fn apply(&mut self, v: Verdict, rule: &VoteRule) -> Result<Proposal> {
        let p = self
            .proposals
            .get_mut(&v.proposal_id)
            .ok_or_else(|| ReviewError::NotFound(format!("proposal {:?}", v.proposal_id)))?;
        if p.verdicts.iter().any(|x| x.reviewer_id == v.reviewer_id) {
            return Err(ReviewError::Conflict(format!(
                "{} already judged {}",
                v.reviewer_id, v.proposal_id
            )));
        }
        p.verdicts.push(v);
        p.status = rule.status(&p.verdicts);
        Ok(p.clone())
    }
}

impl ReviewStore {
    /// Load proposals and replay any existing verdict log at `log_path`.
    pub fn open(
        streams: Vec<StreamInput>,
        log_path: impl AsRef<Path>,
        rule: VoteRule,
        matching: MatchConfig,
    ) -> Result<Self> {
        let log_path = log_path.as_ref().to_path_buf();
        let mut state = State::build(streams)?;
        if log_path.exists() {
            let reader = BufReader::new(File::open(&log_path)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let v: Verdict = serde_json::from_str(&line)
                    .map_err(|e| ReviewError::BadInput(format!("verdict log line {}: {e}", i + 1)))?;
                state
                    .apply(v, &rule)
                    .map_err(|e| ReviewError::BadInput(format!("verdict log line {} does not replay: {e}", i + 1)))?;
            }
        }
        let log = OpenOptions::new().create(true).append(true).open(&log_path)?;
        Ok(ReviewStore {
            state: ArcSwap::from_pointee(state),
            log: Mutex::new(log),
            log_path,
            rule,
            matching,
        })
    }

    pub fn log_path(&self) -> &Path {
        &self.log_path
    }

    pub fn rule(&self) -> VoteRule {
        self.rule
    }

    fn snapshot(&self) -> Arc<State> {
        self.state.load_full()
    }

    pub fn streams(&self) -> Vec<StreamSummary> {
        let s = self.snapshot();
        s.streams
            .values()
            .map(|st| {
                let count = |status| st.order.iter().filter(|id| s.proposals[*id].status == status).count();
                StreamSummary {
                    id: st.input.id.clone(),
                    fps: st.input.fps,
                    duration_s: st.input.duration_s,
                    proposals: st.order.len(),
                    pending: count(Status::Pending),
                    agreed: count(Status::Agreed),
                    rejected: count(Status::Rejected),
                    p1_events: st.input.labels.as_ref().map(|_| st.p1.len()),
                }
            })
            .collect()
    }

    pub fn proposal(&self, id: &str) -> Result<Proposal> {
        self.snapshot()
            .proposals
            .get(id)
            .cloned()
            .ok_or_else(|| ReviewError::NotFound(format!("proposal {id:?}")))
    }

    pub fn list(&self, stream_id: &str, filter: &ProposalFilter) -> Result<Page> {
        let s = self.snapshot();
        let st = s
            .streams
            .get(stream_id)
            .ok_or_else(|| ReviewError::NotFound(format!("stream {stream_id:?}")))?;
        let own: Vec<(f64, f64)> = match (&filter.reviewer, &st.input.labels) {
            (Some(r), Some(labels)) => labels
                .iter()
                .filter(|l| &l.annotator_id == r)
                .map(|l| (l.start_s, l.end_s))
                .collect(),
            _ => Vec::new(),
        };
        let matching: Vec<&Proposal> = st
            .order
            .iter()
            .map(|id| &s.proposals[id])
            .filter(|p| filter.status.is_none_or(|want| p.status == want))
            .filter(|p| !own.iter().any(|&(a, b)| p.time_s >= a && p.time_s <= b))
            .filter(|p| match (&filter.reviewer, filter.voted) {
                (Some(r), Some(voted)) => p.verdicts.iter().any(|v| &v.reviewer_id == r) == voted,
                _ => true,
            })
            .collect();
        let offset = filter.offset.unwrap_or(0);
        let limit = filter.limit.unwrap_or(DEFAULT_PAGE).min(MAX_PAGE);
        Ok(Page {
            stream_id: stream_id.to_string(),
            total: matching.len(),
            offset,
            limit,
            items: matching.into_iter().skip(offset).take(limit).cloned().collect(),
        })
    }

    /// Persist a verdict, then publish the updated proposal.
    pub fn submit(&self, proposal_id: &str, reviewer_id: &str, decision: Decision) -> Result<Proposal> {
        if reviewer_id.trim().is_empty() {
            return Err(ReviewError::BadRequest("reviewer id is empty".into()));
        }
        let mut log = self.log.lock().expect("writer lock");
        let mut next = (*self.snapshot()).clone();
        let verdict = Verdict {
            proposal_id: proposal_id.to_string(),
            reviewer_id: reviewer_id.to_string(),
            decision,
            timestamp_s: now_s(),
        };
        let updated = next.apply(verdict.clone(), &self.rule)?;
        let mut line = serde_json::to_string(&verdict).expect("verdict serializes");
        line.push('\n');
        log.write_all(line.as_bytes())?;
        log.sync_data()?;
        self.state.store(Arc::new(next));
        Ok(updated)
    }

    /// Consensus rates for one stream. Phase 2 entries are agreed proposals
    /// outside every widened Phase 1 interval; without labels the Phase 1
    /// rates are absent.
    pub fn metrics(&self, stream_id: &str) -> Result<MetricsSnapshot> {
        let s = self.snapshot();
        let st = s
            .streams
            .get(stream_id)
            .ok_or_else(|| ReviewError::NotFound(format!("stream {stream_id:?}")))?;
        let tol = self.matching.tolerance_s;
        let in_p1 = |t: f64| st.p1.iter().any(|e| t >= e.start_s - tol && t <= e.end_s + tol);
        let mut events = st.p1.clone();
        let mut triggers = Vec::with_capacity(st.order.len());
        for id in &st.order {
            let p = &s.proposals[id];
            triggers.push((p.frame_index, p.time_s));
            if p.status == Status::Agreed && !in_p1(p.time_s) {
                let agree = p.verdicts.iter().filter(|v| v.decision == Decision::Agree).count();
                events.push(ConsensusEvent {
                    start_s: p.time_s,
                    end_s: p.time_s,
                    category: None,
                    phase: Phase::P2Confirmed {
                        proposal_id: p.id.clone(),
                        frame_index: p.frame_index,
                        agree_votes: agree,
                        reject_votes: p.verdicts.len() - agree,
                    },
                });
            }
        }
        let mut rates = consensus_rates(&triggers, &ConsensusSet { events }, &self.matching);
        let loaded = st.input.labels.is_some();
        if !loaded {
            rates.spcr_p1 = None;
            rates.tcr_p1 = None;
            rates.spcr_p1p2 = None;
            rates.dr = None;
        }
        Ok(MetricsSnapshot {
            stream_id: stream_id.to_string(),
            p1_labels_loaded: loaded,
            rates,
        })
    }

    pub fn all_metrics(&self) -> Vec<MetricsSnapshot> {
        let ids: Vec<String> = self.snapshot().streams.keys().cloned().collect();
        ids.iter().filter_map(|id| self.metrics(id).ok()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(decision: Decision, who: &str) -> Verdict {
        Verdict {
            proposal_id: "p".into(),
            reviewer_id: who.into(),
            decision,
            timestamp_s: 0.0,
        }
    }

    #[test]
    fn majority_rule() {
        let r = VoteRule::default();
        assert_eq!(r.status(&[]), Status::Pending);
        assert_eq!(r.status(&[v(Decision::Agree, "a")]), Status::Agreed);
        assert_eq!(
            r.status(&[v(Decision::Agree, "a"), v(Decision::Reject, "b")]),
            Status::Pending
        );
        assert_eq!(
            r.status(&[
                v(Decision::Agree, "a"),
                v(Decision::Reject, "b"),
                v(Decision::Agree, "c")
            ]),
            Status::Agreed
        );
        assert_eq!(r.status(&[v(Decision::Reject, "a")]), Status::Rejected);
        let quorum = VoteRule { min_verdicts: 3 };
        assert_eq!(
            quorum.status(&[v(Decision::Agree, "a"), v(Decision::Agree, "b")]),
            Status::Pending
        );
    }

    #[test]
    fn trace_csv_parses_with_blank_thresholds() {
        let t = TraceDump::parse("t,raw,smoothed,tau\n0,0.1,0.1,\n1,0.2,0.15,0.3\n").unwrap();
        assert_eq!(t.smoothed, vec![0.1, 0.15]);
        assert_eq!(t.threshold, vec![None, Some(0.3)]);
        assert!(TraceDump::parse("t,raw,smoothed,tau\n5,0,0,\n").is_err());
    }

    #[test]
    fn excerpt_is_clipped_to_the_trace() {
        let input = StreamInput {
            id: "s".into(),
            fps: 10.0,
            duration_s: 1.0,
            triggers: Vec::new(),
            trace: Some(TraceDump {
                smoothed: (0..10).map(|t| t as f64).collect(),
                threshold: vec![None; 10],
            }),
            labels: None,
            excerpt_s: 0.3,
            frame_pattern: None,
        };
        let e = excerpt(&input, 1);
        assert_eq!(e.first().unwrap().frame_index, 0);
        assert_eq!(e.last().unwrap().frame_index, 4);
        assert_eq!(excerpt(&input, 9).len(), 4);
    }
}
