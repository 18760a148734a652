use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::trainer::train_trait;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::ModelConfig;

/// Hyperparameters a grid may vary.
pub const GRID_KEYS: [&str; 7] = [
    "lr",
    "batch_size",
    "epochs",
    "ema_decay",
    "dropout_cwp",
    "dropout_cmc",
    "dropout_tfe",
];

pub type Grid = BTreeMap<String, Vec<f64>>;

pub fn default_grid() -> Grid {
    [
        ("lr", vec![1e-4, 3e-4]),
        ("dropout_cwp", vec![0.1, 0.2]),
        ("dropout_cmc", vec![0.2, 0.3]),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

fn as_count(key: &str, v: f64) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(Error::Config(format!("grid value {v} for `{key}` must be a positive integer")))
    }
}

/// `base` with one grid cell's values applied.
pub fn apply_cell(base: &TrainConfig, cell: &BTreeMap<String, f64>) -> Result<TrainConfig> {
    let mut cfg = base.clone();
    for (k, &v) in cell {
        match k.as_str() {
            "lr" => cfg.lr = v,
            "batch_size" => cfg.batch_size = as_count(k, v)?,
            "epochs" => cfg.epochs = as_count(k, v)?,
            "ema_decay" => cfg.ema_decay = v,
            "dropout_cwp" => cfg.dropout_cwp = Some(v),
            "dropout_cmc" => cfg.dropout_cmc = Some(v),
            "dropout_tfe" => cfg.dropout_tfe = Some(v),
            other => {
                return Err(Error::Config(format!(
                    "unknown grid key `{other}` (expected one of {})",
                    GRID_KEYS.join(", ")
                )))
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Every combination of the grid's values, keys varying slowest-first in
/// sorted key order.
pub fn grid_cells(grid: &Grid) -> Result<Vec<BTreeMap<String, f64>>> {
    if grid.is_empty() || grid.values().any(|v| v.is_empty()) {
        return Err(Error::Config("grid must name at least one value per key".into()));
    }
    let mut cells = vec![BTreeMap::new()];
    for (k, values) in grid {
        cells = cells
            .into_iter()
            .flat_map(|c| {
                values.iter().map(move |&v| {
                    let mut c = c.clone();
                    c.insert(k.clone(), v);
                    c
                })
            })
            .collect();
    }
    Ok(cells)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub params: BTreeMap<String, f64>,
    /// Mean over folds of the best-epoch validation MSE.
    pub mse: f64,
    pub final_mse: f64,
    pub train: TrainConfig,
}

/// Trains every cell and returns rows sorted by ascending MSE (stable, so
/// ties keep grid order).
pub fn grid_search(
    dataset: &Dataset,
    model_cfg: &ModelConfig,
    grid: &Grid,
    base: &TrainConfig,
    jobs: usize,
) -> Result<Vec<GridRow>> {
    let cells = grid_cells(grid)?;
    let configs: Vec<TrainConfig> = cells.iter().map(|c| apply_cell(base, c)).collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(cells.len());
    for (cell, cfg) in cells.into_iter().zip(configs) {
        let out = train_trait(dataset, model_cfg, &cfg, jobs)?;
        log::info!("grid {:?}: mse {:.4}", cell, out.report.summary.mean_fold_mse);
        rows.push(GridRow {
            params: cell,
            mse: out.report.summary.mean_fold_mse,
            final_mse: out.report.summary.final_mse,
            train: cfg,
        });
    }
    rows.sort_by(|a, b| a.mse.total_cmp(&b.mse));
    Ok(rows)
}

pub fn write_grid(rows: &[GridRow], path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(rows).expect("grid rows serialise");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
