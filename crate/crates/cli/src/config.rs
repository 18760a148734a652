//! The run config file and its command-line overrides.
//! Precedence: flags, then the file, then built-in defaults.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use traitfuse::data::LabelScaling;
use traitfuse::nn::{AblationMode, ModelConfig, ModelDims};
use traitfuse::train::{Grid, TrainConfig};
use traitfuse::{Error, Result, Trait};

pub const DATA_DIR_ENV: &str = "TRAITFUSE_DATA_DIR";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub model: ModelDims,
    pub variant: AblationMode,
    pub train: TrainConfig,
    pub grid: Option<Grid>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn model_config(&self, t: Trait) -> Result<ModelConfig> {
        Ok(ModelConfig::from_dims(&self.model, t)?.with_variant(self.variant))
    }
}

/// Training knobs that may override the config file.
#[derive(Args, Clone, Debug, Default)]
pub struct TrainOverrides {
    /// Master seed for initialisation, shuffling and dropout.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seed for the fold assignment (defaults to --seed).
    #[arg(long)]
    pub split_seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Number of folds; 1 trains on all data and validates on it.
    #[arg(long)]
    pub folds: Option<usize>,
    /// Train only the first N folds.
    #[arg(long)]
    pub max_folds: Option<usize>,
    #[arg(long)]
    pub ema_decay: Option<f64>,
    #[arg(long)]
    pub dropout_cwp: Option<f64>,
    #[arg(long)]
    pub dropout_cmc: Option<f64>,
    #[arg(long)]
    pub dropout_tfe: Option<f64>,
    /// Train on min-max scaled labels (errors are still reported on 1–5).
    #[arg(long)]
    pub normalize_labels: bool,
}

impl TrainOverrides {
    pub fn apply(&self, cfg: &mut TrainConfig) {
        macro_rules! set {
            ($($f:ident => $g:ident),*) => {$(
                if let Some(v) = self.$f { cfg.$g = v; }
            )*};
        }
        set!(seed => seed, epochs => epochs, lr => lr, batch_size => batch_size, folds => k_folds, ema_decay => ema_decay);
        if self.split_seed.is_some() {
            cfg.split_seed = self.split_seed;
        }
        if self.max_folds.is_some() {
            cfg.max_folds = self.max_folds;
        }
        if self.dropout_cwp.is_some() {
            cfg.dropout_cwp = self.dropout_cwp;
        }
        if self.dropout_cmc.is_some() {
            cfg.dropout_cmc = self.dropout_cmc;
        }
        if self.dropout_tfe.is_some() {
            cfg.dropout_tfe = self.dropout_tfe;
        }
        if self.normalize_labels {
            cfg.normalize_labels = LabelScaling::Minmax;
        }
    }
}

/// Relative data paths are looked up under `$TRAITFUSE_DATA_DIR` when they
/// do not exist as given.
pub fn resolve_data(path: &Path) -> PathBuf {
    if path.is_relative() && !path.exists() {
        if let Some(dir) = std::env::var_os(DATA_DIR_ENV) {
            let candidate = Path::new(&dir).join(path);
            if candidate.exists() {
                return candidate;
            }
        }
    }
    path.to_path_buf()
}
