use surprise_core::metrics::{latent_energy, LerConfig};
use surprise_core::motion::Variant;
use surprise_core::scenario::{generate, EventKind, EventSpec, ScenarioConfig};
use surprise_core::world_model::{Predictor, PredictorConfig};

fn event_world(seed: u64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::quiet(16, 30 * 60, seed);
    for (i, t) in [12.0, 24.0, 36.0, 48.0].into_iter().enumerate() {
        cfg.events.push(EventSpec {
            time_s: t,
            kind: if i % 2 == 0 {
                EventKind::Transition
            } else {
                EventKind::Transient
            },
            magnitude: 0.5,
            decay_s: 0.2,
            category: None,
        });
    }
    cfg
}

#[test]
fn latent_energy_concentrates_around_events() {
    for seed in 0..5 {
        let cfg = event_world(seed);
        assert!(cfg.events.iter().all(|e| e.magnitude >= 5.0 * cfg.noise_scale));
        let s = generate(&cfg).unwrap();
        let e = latent_energy(&s.sequence, LerConfig::default().context).unwrap();
        let total: f64 = e.iter().sum();
        let near: f64 = e
            .iter()
            .enumerate()
            .filter(|(t, _)| s.event_times.iter().any(|&x| (*t as f64 / 30.0 - x).abs() <= 1.0))
            .map(|(_, v)| v)
            .sum();
        assert!(near / total >= 0.8, "seed {seed}: {:.3}", near / total);
    }
}

#[test]
fn naive_and_compensated_traces_differ_on_coupled_worlds() {
    let s = generate(&ScenarioConfig::motion_coupled(8, 1, 1)).unwrap();
    let trace = |variant| {
        let cfg = PredictorConfig {
            hidden_dim: 6,
            num_layers: 1,
            lookback: 4,
            seed: 1,
            ..PredictorConfig::new(8, variant)
        };
        Predictor::new(cfg).unwrap().score_sequence(&s.sequence).unwrap()
    };
    let naive = trace(Variant::Naive);
    assert_eq!(naive, trace(Variant::Naive));
    assert_ne!(naive, trace(Variant::Compensated));
}

#[test]
fn compensated_rejects_streams_without_motion() {
    let s = generate(&ScenarioConfig::quiet(4, 60, 0)).unwrap();
    let bare = s.sequence.clone().with_motion(None).unwrap();
    let cfg = |v| PredictorConfig {
        hidden_dim: 3,
        lookback: 4,
        ..PredictorConfig::new(4, v)
    };
    assert!(Predictor::new(cfg(Variant::Compensated))
        .unwrap()
        .score_sequence(&bare)
        .is_err());
    assert!(Predictor::new(cfg(Variant::Naive))
        .unwrap()
        .score_sequence(&bare)
        .is_ok());
}

#[test]
fn scenario_config_files_load() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("world.toml");
    let cfg = ScenarioConfig::motion_coupled(8, 3, 2);
    std::fs::write(&path, cfg.to_toml()).unwrap();
    assert_eq!(ScenarioConfig::read_file(&path).unwrap(), cfg);
}
