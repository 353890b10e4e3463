use proptest::prelude::*;
use surprise_core::extractor::{Source, TriggerEvent};
use surprise_core::latent_io::{Category, EventLabel};
use surprise_core::metrics::MatchConfig;
use surprise_review::store::StreamInput;
use surprise_review::{Decision, ReviewStore, VoteRule};

fn input(frames: &[usize], events: &[(u32, u32)]) -> StreamInput {
    StreamInput {
        id: "p".into(),
        fps: 10.0,
        duration_s: 400.0,
        triggers: frames
            .iter()
            .map(|&f| TriggerEvent {
                frame_index: f,
                time_s: f as f64 / 10.0,
                score: 1.0,
                threshold: 0.5,
                source: Source::Naive,
            })
            .collect(),
        trace: None,
        labels: Some(
            events
                .iter()
                .map(|&(s, len)| EventLabel::new(s as f64, (s + len) as f64, Category::Behavior, "a").unwrap())
                .collect(),
        ),
        excerpt_s: 0.0,
        frame_pattern: None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn agreements_never_lower_rates_and_replay_is_exact(
        frames in proptest::collection::btree_set(0usize..4000, 1..25),
        events in proptest::collection::vec((0u32..390, 0u32..5), 1..8),
        votes in proptest::collection::vec((0usize..25, 0usize..3, any::<bool>()), 0..40),
    ) {
        let frames: Vec<usize> = frames.into_iter().collect();
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("v.jsonl");
        let store = ReviewStore::open(vec![input(&frames, &events)], &log, VoteRule::default(), MatchConfig::default()).unwrap();
        let mut prev = store.metrics("p").unwrap().rates;
        prop_assert_eq!(prev.spcr_p1, prev.spcr_p1p2);
        prop_assert_eq!(prev.tcr_p1, prev.tcr_p1p2);
        for (i, who, agree) in votes {
            let id = format!("p-{}", frames[i % frames.len()]);
            let decision = if agree { Decision::Agree } else { Decision::Reject };
            let before = store.proposal(&id).unwrap();
            let res = store.submit(&id, &format!("r{who}"), decision);
            prop_assert_eq!(res.is_err(), before.verdicts.iter().any(|v| v.reviewer_id == format!("r{who}")));
            let now = store.metrics("p").unwrap().rates;
            prop_assert!(now.spcr_p1 == prev.spcr_p1 && now.tcr_p1 == prev.tcr_p1);
            prop_assert!(now.tcr_p1p2 >= now.tcr_p1);
            prop_assert!(now.spcr_p1p2 >= now.spcr_p1);
            // a rejection can only withdraw that proposal's own discovery
            if agree {
                prop_assert!(now.tcr_p1p2 >= prev.tcr_p1p2);
                prop_assert!(now.p2_events >= prev.p2_events);
            }
            prev = now;
        }
        let reopened = ReviewStore::open(vec![input(&frames, &events)], &log, VoteRule::default(), MatchConfig::default()).unwrap();
        for f in &frames {
            let id = format!("p-{f}");
            prop_assert_eq!(reopened.proposal(&id).unwrap(), store.proposal(&id).unwrap());
        }
        prop_assert_eq!(reopened.metrics("p").unwrap(), store.metrics("p").unwrap());
    }
}
