//! Ego-motion compensated semantic surprise over frozen latent sequences.
//!
//! The crate turns a stream of pooled latent states (plus an optional global
//! motion cue) into an online surprise trace, extracts causal trigger
//! proposals from it, and evaluates trigger streams against labelled events
//! and telemetry budgets.
//!
//! | module | role |
//! |---|---|
//! | [`latent_io`] | sequence/label formats, feature-map pooling |
//! | [`motion`] | flow pooling, context vectors |
//! | [`world_model`] | recurrent predictor, surprise, online adaptation |
//! | [`extractor`] | smoothing, adaptive threshold, peak triggers |
//! | [`baselines`] | direct latent difference, periodic sampling |
//! | [`metrics`] | matching, F1, consensus rates, BSR, LER |
//! | [`scenario`] | synthetic worlds with ground truth |
//! | [`harness`] | replay, alpha sweeps, frontier reports |

pub mod baselines;
pub mod error;
pub mod extractor;
pub mod harness;
pub mod latent_io;
pub mod metrics;
pub mod motion;
pub mod scenario;
pub mod world_model;

pub use error::{Error, Result};
