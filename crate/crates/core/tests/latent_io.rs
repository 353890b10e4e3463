use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use surprise_core::latent_io::{
    pool_feature_map, read_labels, write_labels, Category, EventLabel, FeatureMap, LatentSequence,
};
use surprise_core::motion::{pool_flow, FlowField, MotionVector};
use surprise_core::Error;

#[test]
fn random_map_pools_like_a_double_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let values: Vec<f64> = (0..4 * 4 * 3).map(|_| rng.random_range(-5.0..5.0)).collect();
        let map = FeatureMap::new(4, 4, 3, values.clone()).unwrap();
        let z = pool_feature_map(&map).unwrap();
        for k in 0..3 {
            let mut acc = 0.0;
            for i in 0..4 {
                for j in 0..4 {
                    acc += values[(i * 4 + j) * 3 + k];
                }
            }
            assert!((z.values[k] - acc / 16.0).abs() < 1e-12);
        }
    }
}

#[test]
fn lone_patch_on_a_32_grid() {
    let mut map = FeatureMap::zeros(32, 32, 5).unwrap();
    map.patch_mut(17, 3)[2] = 7.5;
    let z = pool_feature_map(&map).unwrap();
    assert_eq!(z.values, vec![0.0, 0.0, 7.5 / 1024.0, 0.0, 0.0]);
}

#[test]
fn feature_map_file_roundtrip() {
    let map = FeatureMap::new(2, 3, 2, (0..12).map(|v| v as f64 * 0.25).collect()).unwrap();
    let mut buf = Vec::new();
    map.write_to(&mut buf).unwrap();
    assert_eq!(FeatureMap::read_from(&buf[..]).unwrap(), map);
}

#[test]
fn sequence_file_errors() {
    let seq = LatentSequence::from_vectors(30.0, 16, vec![vec![0.5; 16]; 4], None).unwrap();
    let mut buf = Vec::new();
    seq.write_to(&mut buf).unwrap();
    assert!(matches!(
        LatentSequence::read_from(&buf[..], Some(1024)),
        Err(Error::DimMismatch {
            expected: 1024,
            found: 16
        })
    ));
    assert!(matches!(
        LatentSequence::read_from(&buf[..buf.len() - 10], None),
        Err(Error::LengthMismatch { .. })
    ));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.lseq");
    seq.write_file(&path).unwrap();
    assert_eq!(LatentSequence::read_file(&path, Some(16)).unwrap(), seq);
}

#[test]
fn labels_file_roundtrip() {
    let labels = vec![
        EventLabel::new(1.0, 2.5, Category::Behavior, "a1").unwrap(),
        EventLabel::new(10.0, 10.0, Category::Environmental, "a2").unwrap(),
    ];
    let mut buf = Vec::new();
    write_labels(&labels, &mut buf).unwrap();
    assert_eq!(read_labels(&buf[..]).unwrap(), labels);
}

#[test]
fn half_moving_field() {
    let mut f = FlowField::uniform(100, 100, 0.0, 0.0).unwrap();
    for y in 0..100 {
        for x in 0..50 {
            f.set(x, y, 2.0, 0.0);
        }
    }
    let m = pool_flow(&f).unwrap();
    assert!((m.mx - 0.01).abs() < 1e-15 && m.my == 0.0);
}

fn field(w: usize, h: usize) -> impl Strategy<Value = FlowField> {
    (
        prop::collection::vec(-10.0f64..10.0, w * h),
        prop::collection::vec(-10.0f64..10.0, w * h),
    )
        .prop_map(move |(vx, vy)| FlowField::new(w, h, vx, vy).unwrap())
}

proptest! {
    #[test]
    fn pooling_is_linear(
        a in prop::collection::vec(-3.0f64..3.0, 3 * 2 * 4),
        b in prop::collection::vec(-3.0f64..3.0, 3 * 2 * 4),
        s in -2.0f64..2.0,
    ) {
        let combo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + s * y).collect();
        let pa = pool_feature_map(&FeatureMap::new(3, 2, 4, a).unwrap()).unwrap().values;
        let pb = pool_feature_map(&FeatureMap::new(3, 2, 4, b).unwrap()).unwrap().values;
        let pc = pool_feature_map(&FeatureMap::new(3, 2, 4, combo).unwrap()).unwrap().values;
        for k in 0..4 {
            prop_assert!((pc[k] - (pa[k] + s * pb[k])).abs() < 1e-12);
        }
    }

    #[test]
    fn sequences_roundtrip_to_f32(
        frames in 1usize..12,
        dim in 1usize..9,
        with_motion in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vectors: Vec<Vec<f64>> = (0..frames).map(|_| (0..dim).map(|_| rng.random_range(-100.0..100.0)).collect()).collect();
        let motion = with_motion.then(|| (0..frames).map(|_| MotionVector::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect());
        let seq = LatentSequence::from_vectors(25.0, dim, vectors, motion).unwrap();
        let mut buf = Vec::new();
        seq.write_to(&mut buf).unwrap();
        let back = LatentSequence::read_from(&buf[..], Some(dim)).unwrap();
        prop_assert_eq!(&back, &seq.quantized());
        for (x, y) in back.frames().iter().zip(seq.frames()) {
            for (a, b) in x.values.iter().zip(&y.values) {
                prop_assert!((a - b).abs() <= 1e-5 * b.abs().max(1.0));
            }
        }
    }

    #[test]
    fn flow_pooling_ignores_pixel_order(f in field(6, 4), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx: Vec<usize> = (0..24).collect();
        for i in (1..24).rev() {
            idx.swap(i, rng.random_range(0..=i));
        }
        let fm = f.to_feature_map();
        let vx: Vec<f64> = idx.iter().map(|&i| fm.values()[2 * i]).collect();
        let vy: Vec<f64> = idx.iter().map(|&i| fm.values()[2 * i + 1]).collect();
        let a = pool_flow(&f).unwrap();
        let b = pool_flow(&FlowField::new(6, 4, vx, vy).unwrap()).unwrap();
        prop_assert!((a.mx - b.mx).abs() < 1e-12 && (a.my - b.my).abs() < 1e-12);
    }

    #[test]
    fn uniform_flow_is_resolution_free(u in -20.0f64..20.0, v in -20.0f64..20.0, k in 1usize..5) {
        // the same physical motion at k times the resolution moves k times as many pixels
        let lo = pool_flow(&FlowField::uniform(16, 12, u, v).unwrap()).unwrap();
        let hi = pool_flow(&FlowField::uniform(16 * k, 12 * k, u * k as f64, v * k as f64).unwrap()).unwrap();
        prop_assert!((lo.mx - hi.mx).abs() < 1e-12 && (lo.my - hi.my).abs() < 1e-12);
        prop_assert!((lo.mx - u / 16.0).abs() < 1e-12 && (lo.my - v / 12.0).abs() < 1e-12);
    }

    #[test]
    fn small_object_moves_the_cue_little(w in 1usize..6, h in 1usize..6, speed in -50.0f64..50.0) {
        // an object covering w*h of 64*48 pixels shifts the cue by at most its share
        let mut f = FlowField::uniform(64, 48, 0.0, 0.0).unwrap();
        for y in 0..h {
            for x in 0..w {
                f.set(x, y, speed, speed);
            }
        }
        let m = pool_flow(&f).unwrap();
        let share = (w * h) as f64 / (64.0 * 48.0);
        prop_assert!(m.mx.abs() <= share * speed.abs() / 64.0 + 1e-15);
        prop_assert!(m.my.abs() <= share * speed.abs() / 48.0 + 1e-15);
    }
}
