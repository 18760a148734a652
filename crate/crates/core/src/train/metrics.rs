use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::trainer::train_trait;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::hexaco::Trait;
use crate::nn::ModelConfig;

/// Summaries print errors to four decimals.
pub fn format_mse(x: f64) -> String {
    format!("{x:.4}")
}

/// Mean MSE over H, E, A and C; every trait must be present.
pub fn aggregate_mse(per_trait: &BTreeMap<Trait, f64>) -> Result<f64> {
    let mut sum = 0.0;
    for t in Trait::ALL {
        sum += per_trait.get(&t).ok_or(Error::MissingTrait(t.letter()))?;
    }
    Ok(sum / Trait::ALL.len() as f64)
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub seeds: Vec<u64>,
    pub mse: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl fmt::Display for StabilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "mean {} std {} over {} runs", format_mse(self.mean), format_mse(self.std), self.mse.len())
    }
}

/// Trains once per seed on the split fixed by `cfg.split_seed()` and reports
/// the spread of the final validation MSE.
pub fn stability_runs(
    dataset: &Dataset,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    seeds: &[u64],
    jobs: usize,
) -> Result<StabilityReport> {
    if seeds.len() < 2 {
        return Err(Error::Config("a stability study needs at least 2 runs".into()));
    }
    let split = cfg.split_seed();
    let mut mse = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let run = TrainConfig {
            seed,
            split_seed: Some(split),
            ..cfg.clone()
        };
        mse.push(train_trait(dataset, model_cfg, &run, jobs)?.report.summary.final_mse);
    }
    let (mean, std) = mean_std(&mse);
    Ok(StabilityReport {
        seeds: seeds.to_vec(),
        mse,
        mean,
        std,
    })
}

/// `n_runs` runs with seeds `cfg.seed, cfg.seed + 1, …`.
pub fn stability_study(
    dataset: &Dataset,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    n_runs: usize,
    jobs: usize,
) -> Result<StabilityReport> {
    let seeds: Vec<u64> = (0..n_runs as u64).map(|i| cfg.seed.wrapping_add(i)).collect();
    stability_runs(dataset, model_cfg, cfg, &seeds, jobs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(v: [f64; 4]) -> BTreeMap<Trait, f64> {
        Trait::ALL.into_iter().zip(v).collect()
    }

    #[test]
    fn full_fusion_row() {
        let m = aggregate_mse(&table([0.1072, 0.1003, 0.0981, 0.0957])).unwrap();
        assert!((m - 0.100325).abs() < 1e-12);
        assert_eq!(format_mse(m), "0.1003");
    }

    #[test]
    fn concat_row() {
        let m = aggregate_mse(&table([0.1981, 0.2212, 0.2219, 0.1883])).unwrap();
        assert_eq!(format_mse(m), "0.2074");
    }

    #[test]
    fn constant_and_missing() {
        assert_eq!(aggregate_mse(&table([0.25; 4])).unwrap(), 0.25);
        let mut t = table([0.1; 4]);
        t.remove(&Trait::A);
        assert!(matches!(aggregate_mse(&t), Err(Error::MissingTrait('A'))));
    }

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[0.3, 0.3, 0.3]).1, 0.0);
    }

    #[test]
    fn report_format() {
        let r = StabilityReport {
            seeds: vec![1, 2],
            mse: vec![0.1, 0.2],
            mean: 0.15,
            std: 0.0707107,
        };
        assert_eq!(r.to_string(), "mean 0.1500 std 0.0707 over 2 runs");
    }
}
