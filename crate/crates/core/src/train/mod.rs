//! Optimisation: Adam, EMA shadow weights, K-fold training, grid search
//! and metric aggregation.

mod adam;
mod config;
mod ema;
mod grid;
mod kfold;
mod metrics;
mod trainer;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use config::TrainConfig;
pub use ema::EmaState;
pub use grid::{apply_cell, default_grid, grid_cells, grid_search, write_grid, Grid, GridRow, GRID_KEYS};
pub use kfold::{kfold_split, Fold};
pub use metrics::{aggregate_mse, format_mse, mean_std, stability_runs, stability_study, StabilityReport};
pub use trainer::{
    ensemble_predict, init_model, mse, plan_folds, predict_raw, train_trait, with_jobs, EpochRecord, FoldResult, FoldSummary,
    MetricsReport, RunSummary, TrainOutcome,
};
