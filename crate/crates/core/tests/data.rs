use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use traitfuse::data::{
    generate_synthetic, load_checkpoint, save_checkpoint, CheckpointMeta, Dataset, FeatureRecord, SyntheticSpec, Teacher,
    AUDIO, VIDEO,
};
use traitfuse::nn::{FusionModel, ModelConfig, ModelDims};
use traitfuse::prompt::SubjectMeta;
use traitfuse::tensor::RngState;
use traitfuse::Trait;

#[test]
fn synthetic_round_trip_is_lossless() {
    let ds = generate_synthetic(&SyntheticSpec {
        n: 100,
        teacher: Teacher::PlantedGate,
        noise_std: 0.2,
        seed: 17,
        ..Default::default()
    })
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.jsonl");
    ds.save(&p).unwrap();
    let back = Dataset::load(&p).unwrap();
    assert_eq!(back, ds);
    for (a, b) in ds.records().iter().zip(back.records()) {
        for (k, v) in &a.features {
            let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(v), bits(&b.features[k]));
        }
    }
}

#[test]
fn same_seed_same_file() {
    let spec = SyntheticSpec { n: 20, seed: 4, ..Default::default() };
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    generate_synthetic(&spec).unwrap().save(&a).unwrap();
    generate_synthetic(&spec).unwrap().save(&b).unwrap();
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn noiseless_linear_teacher_is_recovered_by_least_squares() {
    let spec = SyntheticSpec {
        n: 200,
        teacher: Teacher::Linear,
        noise_std: 0.0,
        seed: 21,
        ..Default::default()
    };
    let ds = generate_synthetic(&spec).unwrap();
    for t in Trait::ALL {
        let cols = 1 + spec.text_dim + spec.audio_dim + spec.video_dim;
        let mut x = DMatrix::<f64>::zeros(spec.n, cols);
        let mut y = DVector::<f64>::zeros(spec.n);
        for (i, r) in ds.records().iter().enumerate() {
            x[(i, 0)] = 1.0;
            let feats = r.features[t.text_feature()]
                .iter()
                .chain(&r.features[AUDIO])
                .chain(&r.features[VIDEO]);
            for (j, v) in feats.enumerate() {
                x[(i, j + 1)] = *v as f64;
            }
            y[i] = r.labels[&t];
        }
        let fit = x.clone().svd(true, true).solve(&y, 1e-12).unwrap();
        let residual = (&x * fit - &y).amax();
        assert!(residual < 1e-8, "{t}: residual {residual}");
    }
}

#[test]
fn noise_is_not_linearly_explained() {
    let spec = SyntheticSpec {
        n: 200,
        noise_std: 0.5,
        seed: 21,
        ..Default::default()
    };
    let ds = generate_synthetic(&spec).unwrap();
    let t = Trait::H;
    let cols = 1 + spec.text_dim + spec.audio_dim + spec.video_dim;
    let mut x = DMatrix::<f64>::zeros(spec.n, cols);
    let mut y = DVector::<f64>::zeros(spec.n);
    for (i, r) in ds.records().iter().enumerate() {
        x[(i, 0)] = 1.0;
        let feats = r.features[t.text_feature()].iter().chain(&r.features[AUDIO]).chain(&r.features[VIDEO]);
        for (j, v) in feats.enumerate() {
            x[(i, j + 1)] = *v as f64;
        }
        y[i] = r.labels[&t];
    }
    let fit = x.clone().svd(true, true).solve(&y, 1e-12).unwrap();
    assert!((&x * fit - &y).amax() > 1e-3);
}

#[test]
fn checkpoint_preserves_predictions() {
    let cfg = ModelConfig::from_dims(&ModelDims::toy(), Trait::A).unwrap();
    let model = FusionModel::new(&cfg, &mut RngState::new(12)).unwrap();
    let ds = generate_synthetic(&SyntheticSpec { n: 16, seed: 3, ..Default::default() }).unwrap();
    let idx: Vec<usize> = (0..16).collect();
    let batch = ds.batch(&idx, Trait::A).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.ckpt");
    save_checkpoint(&model, &CheckpointMeta::default(), &p).unwrap();
    let back = load_checkpoint(&p).unwrap().model;
    let (a, b) = (model.predict(&batch).unwrap(), back.predict(&batch).unwrap());
    for (x, y) in a.data().iter().zip(b.data()) {
        assert!((x - y).abs() <= 1e-5 * x.abs().max(1.0), "{x} vs {y}");
    }
}

#[test]
fn load_reports_line_and_ids() {
    let dir = tempfile::tempdir().unwrap();
    let good = generate_synthetic(&SyntheticSpec { n: 3, ..Default::default() }).unwrap();
    let p = dir.path().join("d.jsonl");
    good.save(&p).unwrap();
    let mut text = std::fs::read_to_string(&p).unwrap();
    text.push_str("{\"id\": \"oops\"\n");
    std::fs::write(&p, &text).unwrap();
    let err = Dataset::load(&p).unwrap_err().to_string();
    assert!(err.contains(":4:"), "{err}");

    let bad_label = text.lines().take(3).collect::<Vec<_>>().join("\n").replacen("\"H\":", "\"H\":9.0,\"X\":", 1);
    std::fs::write(&p, bad_label).unwrap();
    assert!(Dataset::load(&p).is_err());
}

#[test]
fn model_width_check_names_record() {
    let ds = generate_synthetic(&SyntheticSpec { n: 4, audio_dim: 10, ..Default::default() }).unwrap();
    let cfg = ModelConfig::from_dims(&ModelDims::toy(), Trait::H).unwrap();
    let err = ds.check_for(&cfg, true).unwrap_err().to_string();
    assert!(err.contains("syn-00000") && err.contains("audio"), "{err}");
}

fn record_strategy() -> impl Strategy<Value = FeatureRecord> {
    (
        "[a-z0-9-]{1,12}",
        proptest::collection::btree_map(prop_oneof![Just(Trait::H), Just(Trait::E), Just(Trait::A), Just(Trait::C)], 1.0f64..=5.0, 0..4),
        proptest::option::of(1u32..100),
        proptest::collection::vec(any::<f32>().prop_filter("finite", |v| v.is_finite()), 3),
        proptest::collection::vec(any::<f32>().prop_filter("finite", |v| v.is_finite()), 2),
    )
        .prop_map(|(id, labels, age, a, v)| FeatureRecord {
            id,
            labels,
            meta: SubjectMeta {
                age,
                gender: Some("x".into()),
                ..Default::default()
            },
            features: BTreeMap::from([(AUDIO.to_string(), a), (VIDEO.to_string(), v)]),
            encoders: BTreeMap::new(),
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn arbitrary_records_round_trip(records in proptest::collection::vec(record_strategy(), 0..100)) {
        let mut seen = std::collections::HashSet::new();
        let records: Vec<_> = records.into_iter().filter(|r| seen.insert(r.id.clone())).collect();
        let ds = Dataset::new(records).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.jsonl");
        ds.save(&p).unwrap();
        prop_assert_eq!(Dataset::load(&p).unwrap(), ds);
    }
}
