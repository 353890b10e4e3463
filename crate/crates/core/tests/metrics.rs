mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use surprise_core::latent_io::{Category, EventLabel, LatentSequence};
use surprise_core::metrics::{
    bsr, build_consensus, consensus_rates, fpsr, latent_energy, ler, match_peaks, peak_f1, telemetry_mask,
    ConsensusSet, MatchConfig, TelemetryPolicy,
};

use common::{oracle_ler, oracle_max_matching};

/// 20 frames, D = 3: a slow rotation with one directional jump at frame 12.
fn jump_sequence() -> Vec<Vec<f64>> {
    (0..20)
        .map(|t| {
            let a = 0.02 * t as f64;
            if t < 12 {
                vec![a.cos(), a.sin(), 0.1]
            } else {
                vec![0.2, 0.3 * a.cos(), 1.0]
            }
        })
        .collect()
}

#[test]
fn ler_matches_literal_transcription() {
    let z = jump_sequence();
    let seq = LatentSequence::from_vectors(10.0, 3, z.clone(), None).unwrap();
    let policy = TelemetryPolicy {
        half_window_s: 0.2,
        ..TelemetryPolicy::default()
    };
    for c in [1, 3, 5] {
        let energy = latent_energy(&seq, c).unwrap();
        for triggers in [vec![], vec![1.2], vec![0.5, 1.6], vec![1.9]] {
            let w = telemetry_mask(20, 10.0, &triggers, &policy);
            let got = ler(&energy, &w).unwrap().unwrap();
            let want = oracle_ler(&z, c, &w).unwrap();
            assert!((got - want).abs() < 1e-10, "c={c} {triggers:?}: {got} vs {want}");
        }
    }
}

#[test]
fn ler_hits_its_bounds() {
    let seq = LatentSequence::from_vectors(10.0, 3, jump_sequence(), None).unwrap();
    let e = latent_energy(&seq, 3).unwrap();
    let p = TelemetryPolicy::default();
    assert!((ler(&e, &[1.0; 20]).unwrap().unwrap() - 100.0).abs() < 1e-10);
    let low = ler(&e, &[p.r_low(); 20]).unwrap().unwrap();
    assert!((low - p.r_low() * 100.0).abs() < 1e-10);
}

#[test]
fn ler_stays_in_bounds_on_fuzzed_masks() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let p = TelemetryPolicy::default();
    for _ in 0..100 {
        let n = rng.random_range(40..200);
        let z: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let seq = LatentSequence::from_vectors(30.0, 4, z, None).unwrap();
        let e = latent_energy(&seq, rng.random_range(1..30)).unwrap();
        let w: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.3) { 1.0 } else { p.r_low() })
            .collect();
        if let Some(v) = ler(&e, &w).unwrap() {
            assert!(v >= p.r_low() * 100.0 - 1e-9 && v <= 100.0 + 1e-9, "{v}");
        }
    }
}

#[test]
fn bsr_reference_values() {
    let p = TelemetryPolicy::default();
    let none = bsr(&[], 60.0, &p).unwrap();
    assert!((none.bsr - (1.0 - 1.0 / 30.0) * 100.0).abs() < 1e-10);
    let one = bsr(&[30.0], 60.0, &p).unwrap();
    assert!((one.n_tx - 234.0).abs() < 1e-10 && one.n_raw == 1800.0);
    assert!((one.bsr - 87.0).abs() < 1e-10);
    let dense: Vec<f64> = (0..=20).map(|k| 3.0 * k as f64).collect();
    assert!(bsr(&dense, 60.0, &p).unwrap().bsr.abs() < 1e-10);
}

#[test]
fn formula_values() {
    assert!((peak_f1(0.5, 1.0).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(peak_f1(1.0, 1.0).unwrap(), 1.0);
    assert_eq!(peak_f1(0.0, 0.7).unwrap(), 0.0);
    assert!((fpsr(6, 11).unwrap() - 45.454545454545).abs() < 1e-9);
    assert_eq!(fpsr(0, 3).unwrap(), 100.0);
    assert_eq!(fpsr(4, 4).unwrap(), 0.0);
    assert!(fpsr(1, 0).is_err());
}

#[test]
fn nineteen_of_forty_retained() {
    let labels: Vec<EventLabel> = (0..40)
        .map(|i| EventLabel::new(20.0 * i as f64, 20.0 * i as f64 + 1.0, Category::Behavior, "gt").unwrap())
        .collect();
    let consensus = ConsensusSet {
        events: build_consensus(&labels, None),
    };
    let triggers: Vec<(usize, f64)> = (0..19).map(|i| (i * 600, 20.0 * i as f64 + 0.5)).collect();
    let r = consensus_rates(&triggers, &consensus, &MatchConfig::default());
    assert!((r.spcr_p1.unwrap() - 47.5).abs() < 1e-10);
    assert_eq!(r.dr, Some(0.0));
}

fn labels_strategy() -> impl Strategy<Value = Vec<EventLabel>> {
    prop::collection::vec((0.0f64..50.0, 0.1f64..5.0, 0usize..3, 0usize..5), 0..25).prop_map(|v| {
        v.into_iter()
            .map(|(s, len, c, a)| EventLabel::new(s, s + len, Category::ALL[c], format!("a{a}")).unwrap())
            .collect()
    })
}

proptest! {
    #[test]
    fn matching_is_maximum(
        triggers in prop::collection::vec(0.0f64..30.0, 0..=8),
        events in prop::collection::vec(0.0f64..30.0, 0..=8),
        tol in 0.5f64..6.0,
    ) {
        let m = match_peaks(&triggers, &events, &MatchConfig { tolerance_s: tol });
        prop_assert_eq!(m.matched(), oracle_max_matching(&triggers, &events, tol));
        for &(i, j) in &m.pairs {
            prop_assert!((triggers[i] - events[j]).abs() <= tol);
        }
        prop_assert_eq!(m.matched() + m.false_positives.len(), triggers.len());
        prop_assert_eq!(m.matched() + m.misses.len(), events.len());
    }

    #[test]
    fn more_triggers_never_cost_bandwidth_savings_less(
        a in prop::collection::vec(0.0f64..100.0, 0..20),
        extra in prop::collection::vec(0.0f64..100.0, 0..5),
    ) {
        let p = TelemetryPolicy::default();
        let base = bsr(&a, 100.0, &p).unwrap().bsr;
        let mut more = a.clone();
        more.extend(extra);
        let fewer_saved = bsr(&more, 100.0, &p).unwrap().bsr;
        prop_assert!(fewer_saved <= base + 1e-9);
        prop_assert!(base <= (1.0 - p.r_low()) * 100.0 + 1e-9 && fewer_saved >= -1e-9);
    }

    #[test]
    fn stricter_quorum_never_adds_consensus_time(labels in labels_strategy()) {
        let covered = |k: usize| -> f64 {
            build_consensus(&labels, Some(k)).iter().map(|e| e.end_s - e.start_s).sum()
        };
        for k in 1..5 {
            prop_assert!(covered(k + 1) <= covered(k) + 1e-9);
        }
    }
}
