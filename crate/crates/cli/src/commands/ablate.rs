use std::collections::BTreeMap;
use std::process::ExitCode;

use serde::Serialize;
use traitfuse::hexaco::parse_trait_list;
use traitfuse::nn::AblationMode;
use traitfuse::train::train_trait;
use traitfuse::{Error, Result, Trait};

use super::{create_dir, load_data, write_json};
use crate::config::FileConfig;
use crate::manifest::RunManifest;
use crate::{table, AblateArgs};

pub fn parse_modes(s: &str) -> Result<Vec<AblationMode>> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(AblationMode::ALL.to_vec());
    }
    let modes = s
        .split(',')
        .filter(|m| !m.trim().is_empty())
        .map(str::parse)
        .collect::<Result<Vec<AblationMode>>>()?;
    if modes.is_empty() {
        return Err(Error::Config("no ablation modes given".into()));
    }
    Ok(modes)
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Serialize)]
struct Cell {
    variant: AblationMode,
    #[serde(rename = "trait")]
    trait_id: Trait,
    seeds: Vec<u64>,
    mse: Vec<f64>,
    median: f64,
}

#[derive(Serialize)]
struct Resolved<'a> {
    modes: &'a [AblationMode],
    traits: &'a [Trait],
    seeds: &'a [u64],
    file: &'a FileConfig,
}

pub fn ablate(args: &AblateArgs, jobs: usize) -> Result<ExitCode> {
    let modes = parse_modes(&args.modes)?;
    let traits = parse_trait_list(&args.traits)?;
    let mut file = FileConfig::load(args.config.as_deref())?;
    args.overrides.apply(&mut file.train);
    file.train.validate()?;
    let seeds = args.seeds.clone().unwrap_or_else(|| vec![file.train.seed]);
    if seeds.is_empty() {
        return Err(Error::Config("no seeds given".into()));
    }
    let (dataset, data_path) = load_data(&args.data)?;
    let mut manifest = RunManifest::start(
        "ablate",
        Resolved {
            modes: &modes,
            traits: &traits,
            seeds: &seeds,
            file: &file,
        },
        Some(file.train.seed),
    );
    manifest.input(&data_path)?;
    if let Some(c) = &args.config {
        manifest.input(c)?;
    }
    create_dir(&args.out)?;

    let mut rows = Vec::new();
    let mut cells = Vec::new();
    for &mode in &modes {
        let mut row = BTreeMap::new();
        for &t in &traits {
            let model_cfg = file.model_config(t)?.with_variant(mode);
            let mut runs = Vec::new();
            for &seed in &seeds {
                let cfg = traitfuse::train::TrainConfig {
                    seed,
                    ..file.train.clone()
                };
                runs.push(train_trait(&dataset, &model_cfg, &cfg, jobs)?.report.summary.final_mse);
            }
            let m = median(&runs);
            row.insert(t, m);
            cells.push(Cell {
                variant: mode,
                trait_id: t,
                seeds: seeds.clone(),
                mse: runs,
                median: m,
            });
        }
        rows.push((mode.to_string(), row));
    }
    let rendered = table::render("Variant", &rows);
    print!("{rendered}");
    std::fs::write(args.out.join("ablation.txt"), &rendered).map_err(|e| Error::Io {
        path: args.out.join("ablation.txt"),
        source: e,
    })?;
    write_json(&args.out.join("ablation.json"), &cells)?;
    manifest.finish(&args.out.join("manifest.json"))?;
    Ok(ExitCode::SUCCESS)
}
