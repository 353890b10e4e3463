//! A short adjudication session against an in-memory router.
//!
//! Three reviewers judge the proposals of one synthetic stream; the consensus
//! rates are printed before and after. Run with
//! `cargo run -p surprise-review --example review_session`.

use std::sync::Arc;

use axum::body::Body;
use axum::http::Request;
use http_body_util::BodyExt;
use surprise_core::extractor::{Source, TriggerEvent};
use surprise_core::latent_io::{Category, EventLabel};
use surprise_core::metrics::MatchConfig;
use surprise_review::store::StreamInput;
use surprise_review::{router, ReviewStore, VoteRule};
use tower::ServiceExt;

async fn get(app: &axum::Router, uri: &str) -> serde_json::Value {
    let resp = app
        .clone()
        .oneshot(Request::get(uri).body(Body::empty()).unwrap())
        .await
        .unwrap();
    serde_json::from_slice(&resp.into_body().collect().await.unwrap().to_bytes()).unwrap()
}

#[tokio::main(flavor = "current_thread")]
async fn main() {
    let dir = tempfile::tempdir().unwrap();
    // six labelled events; triggers hit four of them and fire twice elsewhere
    let labels: Vec<EventLabel> = (0..6)
        .map(|i| {
            EventLabel::new(
                30.0 * i as f64 + 5.0,
                30.0 * i as f64 + 7.0,
                Category::SpatialTransition,
                "p1",
            )
            .unwrap()
        })
        .collect();
    let times = [6.0, 36.0, 66.0, 96.0, 110.0, 140.0];
    let stream = StreamInput {
        id: "drive".into(),
        fps: 10.0,
        duration_s: 180.0,
        triggers: times
            .iter()
            .map(|&t| TriggerEvent {
                frame_index: (t * 10.0) as usize,
                time_s: t,
                score: 1.0,
                threshold: 0.4,
                source: Source::Compensated,
            })
            .collect(),
        trace: None,
        labels: Some(labels),
        excerpt_s: 3.0,
        frame_pattern: None,
    };
    let store = Arc::new(
        ReviewStore::open(
            vec![stream],
            dir.path().join("verdicts.jsonl"),
            VoteRule::default(),
            MatchConfig::default(),
        )
        .unwrap(),
    );
    let app = router(store, None);
    println!("before: {}", get(&app, "/metrics?stream=drive").await["rates"]);

    for (id, votes) in [
        ("drive-1100", ["agree", "agree", "reject"]),
        ("drive-1400", ["reject", "reject", "agree"]),
    ] {
        for (who, decision) in ["ana", "ben", "cy"].iter().zip(votes) {
            let body = serde_json::json!({ "reviewer_id": who, "decision": decision }).to_string();
            let req = Request::post(format!("/proposals/{id}/verdicts"))
                .header("content-type", "application/json")
                .body(Body::from(body))
                .unwrap();
            let resp = app.clone().oneshot(req).await.unwrap();
            let p: serde_json::Value =
                serde_json::from_slice(&resp.into_body().collect().await.unwrap().to_bytes()).unwrap();
            println!("{id} {who} {decision} -> {}", p["status"]);
        }
    }
    println!("after: {}", get(&app, "/metrics?stream=drive").await["rates"]);
}
