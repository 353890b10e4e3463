//! Reviewer adjudication service for trigger proposals.
//!
//! Replayed trigger logs become proposals; reviewers post Agree/Reject
//! verdicts, which are appended to a durable log, and the service reports
//! consensus rates before and after the confirmed discoveries.
//!
//! ```no_run
//! # async fn run() -> surprise_review::Result<()> {
//! let cfg = surprise_review::ServeConfig::read_file("serve.toml")?;
//! surprise_review::serve(cfg).await
//! # }
//! ```

pub mod api;
pub mod config;
pub mod error;
pub mod store;

use std::sync::Arc;

pub use api::router;
pub use config::{ServeConfig, StreamConfig};
pub use error::{Result, ReviewError};
pub use store::{Decision, Proposal, ReviewStore, Status, Verdict, VoteRule};

/// Open the store and serve until Ctrl-C.
pub async fn serve(cfg: ServeConfig) -> Result<()> {
    let store = Arc::new(cfg.open_store()?);
    let app = router(store.clone(), cfg.console_dir.as_deref());
    let listener = tokio::net::TcpListener::bind(&cfg.addr).await?;
    log::info!(
        "serving {} streams on {} (verdicts in {})",
        cfg.streams.len(),
        listener.local_addr()?,
        store.log_path().display()
    );
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
