//! Per-trait training: K folds, minibatch Adam on MSE, EMA shadow weights,
//! best-epoch selection on EMA validation error.

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use super::config::TrainConfig;
use super::ema::EmaState;
use super::kfold::{kfold_split, Fold};
use crate::data::{CheckpointMeta, Dataset, LabelScaling};
use crate::error::{Error, Result};
use crate::hexaco::Trait;
use crate::nn::{AblationMode, FusionModel, ModelConfig};
use crate::tensor::{mse_loss, mse_loss_backward, HasParams, RngState, Tensor};

const EVAL_CHUNK: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub fold: usize,
    pub epoch: usize,
    /// Mean minibatch loss, raw label scale.
    pub train_loss: f64,
    pub val_mse_live: f64,
    pub val_mse_ema: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub fold: usize,
    pub train_size: usize,
    pub val_size: usize,
    pub best_epoch: usize,
    pub best_val_mse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    #[serde(rename = "trait")]
    pub trait_id: Trait,
    pub variant: AblationMode,
    pub folds: Vec<FoldSummary>,
    /// Mean of the per-fold best validation MSE.
    pub mean_fold_mse: f64,
    /// MSE of every validation prediction pooled across folds.
    pub final_mse: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub epochs: Vec<EpochRecord>,
    pub summary: RunSummary,
}

impl MetricsReport {
    /// `metrics.jsonl` (one line per fold-epoch) and `summary.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let p = dir.join("metrics.jsonl");
        let mut f = fs::File::create(&p).map_err(|e| Error::io(&p, e))?;
        for e in &self.epochs {
            writeln!(f, "{}", serde_json::to_string(e).expect("epoch serialises")).map_err(|e| Error::io(&p, e))?;
        }
        let s = dir.join("summary.json");
        let text = serde_json::to_string_pretty(&self.summary).expect("summary serialises");
        fs::write(&s, text + "\n").map_err(|e| Error::io(&s, e))
    }

    pub fn fold_epochs(&self, fold: usize) -> impl Iterator<Item = &EpochRecord> {
        self.epochs.iter().filter(move |e| e.fold == fold)
    }
}

/// One trained fold: the best EMA weights and their validation output.
#[derive(Clone, Debug)]
pub struct FoldResult {
    pub fold: usize,
    pub model: FusionModel,
    pub best_epoch: usize,
    pub best_val_mse: f64,
    pub val_indices: Vec<usize>,
    /// Raw-scale predictions for `val_indices` at the best epoch.
    pub val_predictions: Vec<f64>,
    pub epochs: Vec<EpochRecord>,
    pub train_size: usize,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub folds: Vec<FoldResult>,
    pub report: MetricsReport,
    pub scaling: LabelScaling,
    pub train: TrainConfig,
}

impl TrainOutcome {
    /// Raw-scale fold-ensemble prediction (mean over fold models).
    pub fn predict(&self, dataset: &Dataset, indices: &[usize]) -> Result<Vec<f64>> {
        let models: Vec<&FusionModel> = self.folds.iter().map(|f| &f.model).collect();
        ensemble_predict(&models, self.scaling, dataset, indices)
    }

    pub fn checkpoint_meta(&self, fold: &FoldResult) -> CheckpointMeta {
        CheckpointMeta {
            train: Some(self.train.clone()),
            labels: self.scaling,
            fold: Some(fold.fold),
            best_epoch: Some(fold.best_epoch),
        }
    }
}

/// Eval-mode predictions mapped back to the raw label scale.
pub fn predict_raw(model: &FusionModel, scaling: LabelScaling, dataset: &Dataset, indices: &[usize]) -> Result<Vec<f64>> {
    let t = model.config().trait_id;
    let mut out = Vec::with_capacity(indices.len());
    for chunk in indices.chunks(EVAL_CHUNK) {
        let pred = model.predict(&dataset.batch(chunk, t)?)?;
        out.extend(pred.data().iter().map(|&y| scaling.inverse(y)));
    }
    Ok(out)
}

/// Mean of several models' raw-scale predictions.
pub fn ensemble_predict(
    models: &[&FusionModel],
    scaling: LabelScaling,
    dataset: &Dataset,
    indices: &[usize],
) -> Result<Vec<f64>> {
    if models.is_empty() {
        return Err(Error::Config("no models to ensemble".into()));
    }
    let mut acc = vec![0.0; indices.len()];
    for m in models {
        for (a, p) in acc.iter_mut().zip(predict_raw(m, scaling, dataset, indices)?) {
            *a += p;
        }
    }
    let k = models.len() as f64;
    Ok(acc.into_iter().map(|a| a / k).collect())
}

pub fn mse(pred: &[f64], target: &[f64]) -> f64 {
    if pred.is_empty() {
        return f64::NAN;
    }
    pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64
}

/// The folds a run trains: all data twice over when `k_folds == 1`.
pub fn plan_folds(n: usize, cfg: &TrainConfig) -> Result<Vec<Fold>> {
    let mut folds = if cfg.k_folds == 1 {
        let all: Vec<usize> = (0..n).collect();
        vec![Fold {
            train: all.clone(),
            val: all,
        }]
    } else {
        kfold_split(n, cfg.k_folds, cfg.split_seed())?
    };
    if let Some(m) = cfg.max_folds {
        folds.truncate(m);
    }
    Ok(folds)
}

/// Runs `f` on a pool of `jobs` threads (`0` = rayon default, `1` = caller's
/// thread).
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if jobs == 1 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Trains one model per fold for `model_cfg.trait_id`. Folds are independent
/// and run in parallel on `jobs` threads; results do not depend on `jobs`.
pub fn train_trait(dataset: &Dataset, model_cfg: &ModelConfig, cfg: &TrainConfig, jobs: usize) -> Result<TrainOutcome> {
    cfg.validate()?;
    let model_cfg = cfg.apply_to(model_cfg);
    model_cfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::Dataset("cannot train on an empty dataset".into()));
    }
    dataset.check_for(&model_cfg, true)?;
    let t = model_cfg.trait_id;
    let scaling = cfg.normalize_labels;
    let raw = dataset.labels(&(0..dataset.len()).collect::<Vec<_>>(), t)?;
    let scaled: Vec<f64> = raw.iter().map(|&y| scaling.forward(y)).collect();

    let folds = plan_folds(dataset.len(), cfg)?;
    let results: Vec<Result<FoldResult>> = with_jobs(jobs, || {
        folds
            .par_iter()
            .enumerate()
            .map(|(i, fold)| train_fold(dataset, &model_cfg, cfg, i, fold, &raw, &scaled))
            .collect()
    })?;
    let folds: Vec<FoldResult> = results.into_iter().collect::<Result<_>>()?;

    let (mut pooled_p, mut pooled_t) = (Vec::new(), Vec::new());
    for f in &folds {
        pooled_p.extend(&f.val_predictions);
        pooled_t.extend(f.val_indices.iter().map(|&i| raw[i]));
    }
    let summary = RunSummary {
        trait_id: t,
        variant: model_cfg.variant,
        folds: folds
            .iter()
            .map(|f| FoldSummary {
                fold: f.fold,
                train_size: f.train_size,
                val_size: f.val_indices.len(),
                best_epoch: f.best_epoch,
                best_val_mse: f.best_val_mse,
            })
            .collect(),
        mean_fold_mse: folds.iter().map(|f| f.best_val_mse).sum::<f64>() / folds.len() as f64,
        final_mse: mse(&pooled_p, &pooled_t),
    };
    let report = MetricsReport {
        epochs: folds.iter().flat_map(|f| f.epochs.iter().cloned()).collect(),
        summary,
    };
    Ok(TrainOutcome {
        folds,
        report,
        scaling,
        train: cfg.clone(),
    })
}

fn fold_rng(cfg: &TrainConfig, fold_id: usize) -> RngState {
    RngState::new(cfg.seed).derive(fold_id as u64)
}

/// The freshly initialised model a fold starts from.
pub fn init_model(model_cfg: &ModelConfig, cfg: &TrainConfig, fold_id: usize) -> Result<FusionModel> {
    FusionModel::new(model_cfg, &mut fold_rng(cfg, fold_id).derive(1))
}

fn train_fold(
    dataset: &Dataset,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    fold_id: usize,
    fold: &Fold,
    raw: &[f64],
    scaled: &[f64],
) -> Result<FoldResult> {
    let t = model_cfg.trait_id;
    let scaling = cfg.normalize_labels;
    let root = fold_rng(cfg, fold_id);
    let mut shuffle_rng = root.derive(2);
    let mut dropout_rng = root.derive(3);

    let mut model = init_model(model_cfg, cfg, fold_id)?;
    let mut adam = AdamState::new(&model.params());
    let adam_cfg = AdamConfig {
        lr: cfg.lr,
        beta1: cfg.beta1,
        beta2: cfg.beta2,
        eps: cfg.eps,
    };
    let mut ema = EmaState::new(&model, cfg.ema_decay);

    let val_raw: Vec<f64> = fold.val.iter().map(|&i| raw[i]).collect();
    let mut order = fold.train.clone();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, FusionModel, Vec<f64>)> = None;

    for epoch in 1..=cfg.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let batch = dataset.batch(idx, t)?;
            let target = Tensor::vector(idx.iter().map(|&i| scaled[i]).collect())?;
            let (pred, cache) = model.forward(&batch, &mut dropout_rng, true)?;
            let loss = mse_loss(&pred, &target)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite {
                    fold: fold_id,
                    epoch,
                    batch: b,
                    ids: dataset.ids(idx).join(", "),
                });
            }
            loss_sum += loss * idx.len() as f64;
            model.zero_grad();
            model.backward(&cache, &mse_loss_backward(&pred, &target)?)?;
            adam.step(&mut model.params_mut(), &adam_cfg)?;
            ema.update(&model)?;
        }

        let live = predict_raw(&model, scaling, dataset, &fold.val)?;
        let best_so_far = best.as_ref().map_or(f64::INFINITY, |b| b.1);
        let (val_mse_ema, improved) = ema.with_shadow(&mut model, |m| -> Result<_> {
            let pred = predict_raw(m, scaling, dataset, &fold.val)?;
            let err = mse(&pred, &val_raw);
            // strict: ties keep the earlier epoch
            let improved = (err < best_so_far || best_so_far.is_infinite()).then(|| (m.clone(), pred));
            Ok((err, improved))
        })??;
        let rec = EpochRecord {
            fold: fold_id,
            epoch,
            train_loss: loss_sum / order.len() as f64 * scaling.mse_factor(),
            val_mse_live: mse(&live, &val_raw),
            val_mse_ema,
        };
        log::debug!(
            "fold {fold_id} epoch {epoch}: train {:.4} val(live) {:.4} val(ema) {:.4}",
            rec.train_loss,
            rec.val_mse_live,
            rec.val_mse_ema
        );
        if let Some((m, pred)) = improved {
            best = Some((epoch, val_mse_ema, m, pred));
        }
        epochs.push(rec);
    }
    let (best_epoch, best_val_mse, model, val_predictions) =
        best.ok_or_else(|| Error::Config("epochs must be >= 1".into()))?;
    Ok(FoldResult {
        fold: fold_id,
        model,
        best_epoch,
        best_val_mse,
        val_indices: fold.val.clone(),
        val_predictions,
        epochs,
        train_size: fold.train.len(),
    })
}
