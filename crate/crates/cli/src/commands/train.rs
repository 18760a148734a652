use std::collections::BTreeMap;
use std::process::ExitCode;

use serde::Serialize;
use traitfuse::data::save_checkpoint;
use traitfuse::hexaco::parse_trait_list;
use traitfuse::nn::AblationMode;
use traitfuse::train::{default_grid, grid_search, train_trait, write_grid, TrainConfig};
use traitfuse::{Result, Trait};

use super::{create_dir, load_data};
use crate::config::FileConfig;
use crate::manifest::RunManifest;
use crate::{table, TrainArgs};

#[derive(Serialize)]
struct Resolved<'a> {
    traits: &'a [Trait],
    file: &'a FileConfig,
    jobs: usize,
    grid: bool,
}

pub fn train(args: &TrainArgs, jobs: usize) -> Result<ExitCode> {
    let traits = parse_trait_list(&args.traits)?;
    let mut file = FileConfig::load(args.config.as_deref())?;
    if let Some(v) = &args.variant {
        file.variant = v.parse::<AblationMode>()?;
    }
    args.overrides.apply(&mut file.train);
    file.train.validate()?;
    let (dataset, data_path) = load_data(&args.data)?;

    let mut manifest = RunManifest::start(
        "train",
        Resolved {
            traits: &traits,
            file: &file,
            jobs,
            grid: args.grid,
        },
        Some(file.train.seed),
    );
    manifest.input(&data_path)?;
    if let Some(c) = &args.config {
        manifest.input(c)?;
    }
    create_dir(&args.out)?;

    let mut results = BTreeMap::new();
    for &t in &traits {
        let model_cfg = file.model_config(t)?;
        dataset.check_for(&model_cfg, true)?;
        let dir = args.out.join(t.letter().to_string());
        create_dir(&dir)?;
        let cfg: TrainConfig = if args.grid {
            let grid = file.grid.clone().unwrap_or_else(default_grid);
            let rows = grid_search(&dataset, &model_cfg, &grid, &file.train, jobs)?;
            write_grid(&rows, &dir.join("grid.json"))?;
            println!("{t}: best grid cell {:?} (mse {:.4})", rows[0].params, rows[0].mse);
            rows[0].train.clone()
        } else {
            file.train.clone()
        };
        let outcome = train_trait(&dataset, &model_cfg, &cfg, jobs)?;
        for fold in &outcome.folds {
            let path = dir.join(format!("fold{}.ckpt", fold.fold));
            save_checkpoint(&fold.model, &outcome.checkpoint_meta(fold), &path)?;
        }
        outcome.report.write(&dir)?;
        let s = &outcome.report.summary;
        for f in &s.folds {
            log::info!("{t} fold {}: best epoch {} val mse {:.4}", f.fold, f.best_epoch, f.best_val_mse);
        }
        results.insert(t, s.final_mse);
    }

    print!("{}", table::render("Run", &[(file.variant.to_string(), results)]));
    manifest.finish(&args.out.join("manifest.json"))?;
    Ok(ExitCode::SUCCESS)
}
