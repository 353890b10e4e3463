//! Service configuration and loading of replay outputs.

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use surprise_core::extractor::read_trigger_log;
use surprise_core::latent_io::read_labels;
use surprise_core::metrics::MatchConfig;

use crate::error::{Result, ReviewError};
use crate::store::{ReviewStore, StreamInput, TraceDump, VoteRule};

fn default_addr() -> String {
    "127.0.0.1:8080".into()
}

fn default_excerpt() -> f64 {
    3.0
}

fn default_min_verdicts() -> usize {
    1
}

fn default_tolerance() -> f64 {
    MatchConfig::default().tolerance_s
}

/// One replayed stream: the trigger log plus optional trace dump and labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamConfig {
    pub id: String,
    pub triggers: PathBuf,
    #[serde(default)]
    pub trace: Option<PathBuf>,
    #[serde(default)]
    pub labels: Option<PathBuf>,
    pub fps: f64,
    /// Defaults to the trace length, else the last trigger time.
    #[serde(default)]
    pub duration_s: Option<f64>,
    /// Frame image reference with `{frame}` standing for the trigger frame,
    /// served relative to the console mount.
    #[serde(default)]
    pub frame_pattern: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServeConfig {
    #[serde(default = "default_addr")]
    pub addr: String,
    pub verdict_log: PathBuf,
    #[serde(default)]
    pub console_dir: Option<PathBuf>,
    #[serde(default = "default_excerpt")]
    pub excerpt_s: f64,
    #[serde(default = "default_min_verdicts")]
    pub min_verdicts: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance_s: f64,
    #[serde(default)]
    pub streams: Vec<StreamConfig>,
}

impl ServeConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| ReviewError::BadInput(format!("serve config: {e}")))
    }

    /// Read a config file; relative paths inside it resolve against its
    /// directory.
    pub fn read_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::from_toml(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.rebase(base);
        Ok(cfg)
    }

    pub fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.verdict_log);
        if let Some(c) = &mut self.console_dir {
            fix(c);
        }
        for s in &mut self.streams {
            fix(&mut s.triggers);
            if let Some(t) = &mut s.trace {
                fix(t);
            }
            if let Some(l) = &mut s.labels {
                fix(l);
            }
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("serve config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ReviewError::BadInput(m));
        if !(self.excerpt_s.is_finite() && self.excerpt_s >= 0.0) {
            return bad(format!("excerpt_s must be non-negative, got {}", self.excerpt_s));
        }
        if !(self.tolerance_s.is_finite() && self.tolerance_s >= 0.0) {
            return bad(format!("tolerance_s must be non-negative, got {}", self.tolerance_s));
        }
        for s in &self.streams {
            if !(s.fps.is_finite() && s.fps > 0.0) {
                return bad(format!("stream {:?}: fps must be positive", s.id));
            }
            if s.id.is_empty() || s.id.contains('/') {
                return bad(format!("stream id {:?} must be non-empty without '/'", s.id));
            }
        }
        Ok(())
    }

    pub fn vote_rule(&self) -> VoteRule {
        VoteRule {
            min_verdicts: self.min_verdicts,
        }
    }

    pub fn matching(&self) -> MatchConfig {
        MatchConfig {
            tolerance_s: self.tolerance_s,
        }
    }

    /// Load every stream and replay the verdict log.
    pub fn open_store(&self) -> Result<ReviewStore> {
        self.validate()?;
        let streams = self
            .streams
            .iter()
            .map(|s| load_stream(s, self.excerpt_s))
            .collect::<Result<Vec<_>>>()?;
        ReviewStore::open(streams, &self.verdict_log, self.vote_rule(), self.matching())
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| ReviewError::BadInput(format!("{}: {e}", path.display())))
}

pub fn load_stream(cfg: &StreamConfig, excerpt_s: f64) -> Result<StreamInput> {
    let triggers = read_trigger_log(open(&cfg.triggers)?)?;
    let trace = match &cfg.trace {
        Some(p) => Some(TraceDump::parse(&std::fs::read_to_string(p)?)?),
        None => None,
    };
    let labels = match &cfg.labels {
        Some(p) => Some(read_labels(open(p)?)?),
        None => None,
    };
    let duration_s = cfg.duration_s.unwrap_or_else(|| match &trace {
        Some(t) => t.smoothed.len() as f64 / cfg.fps,
        None => triggers.iter().map(|t| t.time_s).fold(0.0, f64::max),
    });
    Ok(StreamInput {
        id: cfg.id.clone(),
        fps: cfg.fps,
        duration_s,
        triggers,
        trace,
        labels,
        excerpt_s,
        frame_pattern: cfg.frame_pattern.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = ServeConfig::from_toml(
            "verdict_log = \"v.jsonl\"\n[[streams]]\nid = \"a\"\ntriggers = \"a.tsv\"\nfps = 10.0\n",
        )
        .unwrap();
        assert_eq!(cfg.addr, "127.0.0.1:8080");
        assert_eq!(cfg.min_verdicts, 1);
        assert_eq!(cfg.streams[0].trace, None);
        assert_eq!(ServeConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn relative_paths_follow_the_config_file() {
        let mut cfg = ServeConfig::from_toml(
            "verdict_log = \"v.jsonl\"\n[[streams]]\nid = \"a\"\ntriggers = \"/abs/a.tsv\"\nlabels = \"l.tsv\"\nfps = 10.0\n",
        )
        .unwrap();
        cfg.rebase(Path::new("/srv/run"));
        assert_eq!(cfg.verdict_log, PathBuf::from("/srv/run/v.jsonl"));
        assert_eq!(cfg.streams[0].triggers, PathBuf::from("/abs/a.tsv"));
        assert_eq!(cfg.streams[0].labels, Some(PathBuf::from("/srv/run/l.tsv")));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_streams() {
        assert!(ServeConfig::from_toml("verdict_log = \"v\"\nport = 3\n").is_err());
        let cfg =
            ServeConfig::from_toml("verdict_log = \"v\"\n[[streams]]\nid = \"a/b\"\ntriggers = \"t\"\nfps = 10.0\n")
                .unwrap();
        assert!(cfg.validate().is_err());
    }
}
