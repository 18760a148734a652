use traitfuse::data::{generate_synthetic, SyntheticSpec, Teacher};
use traitfuse::nn::{AblationMode, FusionModel, ModelConfig, ModelDims};
use traitfuse::tensor::HasParams;
use traitfuse::train::{
    grid_search, init_model, predict_raw, stability_runs, train_trait, Grid, TrainConfig,
};
use traitfuse::{Error, Trait};

fn no_dropout() -> ModelDims {
    ModelDims {
        dropout_cwp: 0.0,
        dropout_cmc: 0.0,
        dropout_tfe: 0.0,
        ..ModelDims::toy()
    }
}

fn quick(epochs: usize) -> TrainConfig {
    TrainConfig {
        lr: 1e-3,
        epochs,
        batch_size: 16,
        k_folds: 3,
        seed: 5,
        ..Default::default()
    }
}

fn data(n: usize) -> traitfuse::data::Dataset {
    generate_synthetic(&SyntheticSpec {
        n,
        teacher: Teacher::PlantedGate,
        noise_std: 0.05,
        seed: 2,
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn overfits_small_linear_teacher() {
    let ds = generate_synthetic(&SyntheticSpec { n: 64, ..Default::default() }).unwrap();
    let cfg = ModelConfig::from_dims(&no_dropout(), Trait::H).unwrap();
    let tc = TrainConfig {
        lr: 1e-3,
        epochs: 500,
        k_folds: 1,
        ..Default::default()
    };
    let out = train_trait(&ds, &cfg, &tc, 1).unwrap();
    let epochs = &out.report.epochs;
    let hit = epochs.iter().position(|e| e.val_mse_live < 1e-2);
    let hit = hit.unwrap_or_else(|| panic!("final train MSE {}", epochs.last().unwrap().val_mse_live));

    // Descent phase: 10-epoch averages never rise until the target is met.
    let windows: Vec<f64> = epochs[..hit + 1]
        .chunks(10)
        .map(|w| w.iter().map(|e| e.train_loss).sum::<f64>() / w.len() as f64)
        .collect();
    for (i, w) in windows.windows(2).enumerate() {
        assert!(w[1] <= w[0], "window {} rose: {} -> {}", i + 1, w[0], w[1]);
    }
}

#[test]
fn same_seed_is_bitwise_reproducible() {
    let ds = data(40);
    let cfg = ModelConfig::from_dims(&ModelDims::toy(), Trait::C).unwrap();
    let a = train_trait(&ds, &cfg, &quick(4), 1).unwrap();
    let b = train_trait(&ds, &cfg, &quick(4), 1).unwrap();
    let c = train_trait(&ds, &cfg, &quick(4), 3).unwrap();
    for other in [&b, &c] {
        assert_eq!(a.report.epochs.len(), other.report.epochs.len());
        for (x, y) in a.report.epochs.iter().zip(&other.report.epochs) {
            assert_eq!(x.train_loss.to_bits(), y.train_loss.to_bits());
            assert_eq!(x.val_mse_ema.to_bits(), y.val_mse_ema.to_bits());
        }
    }
    let d = train_trait(&ds, &cfg, &TrainConfig { seed: 6, ..quick(4) }, 1).unwrap();
    assert_ne!(a.report.epochs[0].train_loss, d.report.epochs[0].train_loss);
}

#[test]
fn zero_lr_leaves_parameters_alone() {
    let ds = data(24);
    let cfg = ModelConfig::from_dims(&ModelDims::toy(), Trait::A).unwrap();
    let tc = TrainConfig {
        lr: 0.0,
        ema_decay: 0.0,
        epochs: 3,
        ..quick(3)
    };
    let out = train_trait(&ds, &cfg, &tc, 1).unwrap();
    for fold in &out.folds {
        let init = init_model(&tc.apply_to(&cfg), &tc, fold.fold).unwrap();
        for (p, q) in init.params().iter().zip(fold.model.params()) {
            assert!(p.value.bitwise_eq(&q.value), "{} moved", p.name);
        }
    }
}

#[test]
fn validation_is_repeatable_and_pooled() {
    let ds = data(30);
    let cfg = ModelConfig::from_dims(&ModelDims::toy(), Trait::E).unwrap();
    let out = train_trait(&ds, &cfg, &quick(3), 1).unwrap();
    let f = &out.folds[0];
    let a = predict_raw(&f.model, out.scaling, &ds, &f.val_indices).unwrap();
    let b = predict_raw(&f.model, out.scaling, &ds, &f.val_indices).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, f.val_predictions);

    let covered: usize = out.folds.iter().map(|f| f.val_indices.len()).sum();
    assert_eq!(covered, ds.len());
    let s = &out.report.summary;
    assert_eq!(s.folds.len(), 3);
    for (fs, fr) in s.folds.iter().zip(&out.folds) {
        let best = out.report.fold_epochs(fr.fold).map(|e| e.val_mse_ema).fold(f64::INFINITY, f64::min);
        assert_eq!(fs.best_val_mse, best);
    }
}

#[test]
fn minmax_training_reports_raw_scale() {
    let ds = data(30);
    let cfg = ModelConfig::from_dims(&ModelDims::toy(), Trait::H).unwrap();
    let tc = TrainConfig {
        normalize_labels: traitfuse::data::LabelScaling::Minmax,
        ..quick(2)
    };
    let out = train_trait(&ds, &cfg, &tc, 1).unwrap();
    let f = &out.folds[0];
    let labels = ds.labels(&f.val_indices, Trait::H).unwrap();
    let direct = traitfuse::train::mse(&f.val_predictions, &labels);
    assert_eq!(direct, f.best_val_mse);
    let scaled = f.model.predict(&ds.batch(&f.val_indices, Trait::H).unwrap()).unwrap();
    for (raw, s) in f.val_predictions.iter().zip(scaled.data()) {
        assert_eq!(*raw, s * 4.0 + 1.0);
    }
}

#[test]
fn singleton_grid_matches_plain_run() {
    let ds = data(30);
    let cfg = ModelConfig::from_dims(&ModelDims::toy(), Trait::H).unwrap();
    let base = quick(3);
    let grid: Grid = [("lr".to_string(), vec![base.lr])].into();
    let rows = grid_search(&ds, &cfg, &grid, &base, 1).unwrap();
    let plain = train_trait(&ds, &cfg, &base, 1).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].mse.to_bits(), plain.report.summary.mean_fold_mse.to_bits());
}

#[test]
fn grid_rows_are_sorted_and_reproducible() {
    let ds = data(30);
    let cfg = ModelConfig::from_dims(&ModelDims::toy(), Trait::A).unwrap();
    let base = quick(2);
    let grid: Grid = [
        ("lr".to_string(), vec![1e-3, 3e-3]),
        ("dropout_cwp".to_string(), vec![0.0, 0.2]),
    ]
    .into();
    let rows = grid_search(&ds, &cfg, &grid, &base, 2).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.windows(2).all(|w| w[0].mse <= w[1].mse));
    let rerun = train_trait(&ds, &cfg, &rows[0].train, 1).unwrap();
    assert_eq!(rerun.report.summary.mean_fold_mse.to_bits(), rows[0].mse.to_bits());
}

#[test]
fn identical_seeds_have_zero_spread() {
    let ds = data(24);
    let cfg = ModelConfig::from_dims(&ModelDims::toy(), Trait::C).unwrap();
    let r = stability_runs(&ds, &cfg, &quick(2), &[9, 9, 9], 1).unwrap();
    assert_eq!(r.std, 0.0);
    assert!(stability_runs(&ds, &cfg, &quick(2), &[9], 1).is_err());
}

#[test]
fn input_errors() {
    let cfg = ModelConfig::from_dims(&ModelDims::toy(), Trait::H).unwrap();
    let empty = generate_synthetic(&SyntheticSpec { n: 0, ..Default::default() }).unwrap();
    assert!(matches!(train_trait(&empty, &cfg, &quick(1), 1), Err(Error::Dataset(_))));

    let wide = generate_synthetic(&SyntheticSpec { n: 10, text_dim: 20, ..Default::default() }).unwrap();
    let err = train_trait(&wide, &cfg, &quick(1), 1).unwrap_err();
    assert!(err.to_string().contains("text_H"), "{err}");
}

#[test]
fn diverging_run_names_the_batch() {
    let ds = data(20);
    let cfg = ModelConfig::from_dims(&ModelDims::toy(), Trait::H).unwrap();
    let tc = TrainConfig {
        lr: 1e300,
        ..quick(5)
    };
    match train_trait(&ds, &cfg, &tc, 1) {
        Err(Error::NonFinite { ids, .. }) => assert!(ids.contains("syn-")),
        other => panic!("expected a non-finite error, got {:?}", other.map(|o| o.report.summary)),
    }
}

#[test]
fn every_variant_trains() {
    let ds = data(20);
    for mode in AblationMode::ALL {
        let cfg = ModelConfig::from_dims(&ModelDims::toy(), Trait::E).unwrap().with_variant(mode);
        let out = train_trait(&ds, &cfg, &TrainConfig { k_folds: 2, ..quick(2) }, 1).unwrap();
        assert!(out.report.summary.final_mse.is_finite(), "{mode}");
        assert_eq!(out.folds[0].model.mode(), mode);
        let _: &FusionModel = &out.folds[0].model;
    }
}
