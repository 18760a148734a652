use serde::{Deserialize, Serialize};

use crate::data::LabelScaling;
use crate::error::{Error, Result};
use crate::nn::ModelConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub ema_decay: f64,
    /// `1` trains a single model on all data and validates on the training
    /// set; `≥ 2` trains one model per fold.
    pub k_folds: usize,
    pub seed: u64,
    /// Seed for the fold assignment; defaults to `seed`. Fixing it while
    /// varying `seed` keeps the split constant across runs.
    pub split_seed: Option<u64>,
    /// Train only the first `max_folds` folds (all when unset).
    pub max_folds: Option<usize>,
    pub dropout_cwp: Option<f64>,
    pub dropout_cmc: Option<f64>,
    pub dropout_tfe: Option<f64>,
    pub normalize_labels: LabelScaling,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            batch_size: 32,
            epochs: 200,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            ema_decay: 0.999,
            k_folds: 5,
            seed: 0,
            split_seed: None,
            max_folds: None,
            dropout_cwp: None,
            dropout_cmc: None,
            dropout_tfe: None,
            normalize_labels: LabelScaling::None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad(format!("lr {} must be finite and >= 0", self.lr));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.ema_decay) {
            return bad(format!("ema_decay {} outside [0, 1]", self.ema_decay));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)".into());
        }
        if !(self.eps > 0.0) {
            return bad("Adam eps must be positive".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be >= 1".into());
        }
        if self.k_folds == 0 {
            return bad("k_folds must be >= 1".into());
        }
        if self.max_folds == Some(0) {
            return bad("max_folds must be >= 1".into());
        }
        for (name, p) in [
            ("dropout_cwp", self.dropout_cwp),
            ("dropout_cmc", self.dropout_cmc),
            ("dropout_tfe", self.dropout_tfe),
        ] {
            if let Some(p) = p {
                if !(0.0..1.0).contains(&p) {
                    return bad(format!("{name} {p} outside [0, 1)"));
                }
            }
        }
        Ok(())
    }

    pub fn split_seed(&self) -> u64 {
        self.split_seed.unwrap_or(self.seed)
    }

    /// The model config with this run's dropout overrides applied.
    pub fn apply_to(&self, cfg: &ModelConfig) -> ModelConfig {
        cfg.clone().with_dropout(self.dropout_cwp, self.dropout_cmc, self.dropout_tfe)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        TrainConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        for cfg in [
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { ema_decay: 1.5, ..Default::default() },
            TrainConfig { k_folds: 0, ..Default::default() },
            TrainConfig { dropout_cmc: Some(1.0), ..Default::default() },
        ] {
            assert!(cfg.validate().is_err());
        }
    }
}
