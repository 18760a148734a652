use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use serde::Serialize;
use traitfuse::data::{load_checkpoint, Checkpoint};
use traitfuse::train::{ensemble_predict, mse};
use traitfuse::{Error, Result, Trait};

use super::{create_dir, load_data, write_json};
use crate::manifest::RunManifest;
use crate::{table, EvalArgs};

fn collect(path: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    if path.is_dir() {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(|e| Error::Io {
                path: path.to_path_buf(),
                source: e,
            })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        entries.sort();
        for e in entries {
            if e.is_dir() || e.extension().is_some_and(|x| x == "ckpt") {
                collect(&e, out)?;
            }
        }
    } else if path.exists() {
        out.push(path.to_path_buf());
    } else {
        return Err(Error::Checkpoint {
            path: path.to_path_buf(),
            msg: "no such file or directory".into(),
        });
    }
    Ok(())
}

#[derive(Serialize)]
struct Prediction<'a> {
    id: &'a str,
    label: f64,
    prediction: f64,
}

pub fn eval(args: &EvalArgs) -> Result<ExitCode> {
    let mut paths = Vec::new();
    for p in &args.checkpoints {
        collect(p, &mut paths)?;
    }
    if paths.is_empty() {
        return Err(Error::Config("no checkpoints found".into()));
    }
    let (dataset, data_path) = load_data(&args.data)?;

    let mut by_trait: BTreeMap<Trait, Vec<Checkpoint>> = BTreeMap::new();
    for p in &paths {
        let ck = load_checkpoint(p)?;
        by_trait.entry(ck.manifest.model.trait_id).or_default().push(ck);
    }

    let mut manifest = RunManifest::start("eval", &args.checkpoints, None);
    manifest.input(&data_path)?;
    for p in &paths {
        manifest.input(p)?;
    }

    let all: Vec<usize> = (0..dataset.len()).collect();
    let mut results = BTreeMap::new();
    let mut predictions = BTreeMap::new();
    for (t, cks) in &by_trait {
        let scaling = cks[0].manifest.labels;
        if cks.iter().any(|c| c.manifest.labels != scaling) {
            return Err(Error::Config(format!("checkpoints for {t} disagree on label scaling")));
        }
        for ck in cks {
            dataset.check_for(&ck.manifest.model, true)?;
        }
        let models: Vec<_> = cks.iter().map(|c| &c.model).collect();
        let pred = ensemble_predict(&models, scaling, &dataset, &all)?;
        let labels = dataset.labels(&all, *t)?;
        results.insert(*t, mse(&pred, &labels));
        log::info!("{t}: {} checkpoint(s)", cks.len());
        predictions.insert(*t, (pred, labels));
    }

    print!("{}", table::render("Eval", &[(format!("{} checkpoints", paths.len()), results.clone())]));

    if let Some(out) = &args.out {
        create_dir(out)?;
        for (t, (pred, labels)) in &predictions {
            let rows: Vec<Prediction> = dataset
                .records()
                .iter()
                .zip(pred.iter().zip(labels))
                .map(|(r, (p, l))| Prediction {
                    id: &r.id,
                    label: *l,
                    prediction: *p,
                })
                .collect();
            write_json(&out.join(format!("predictions_{}.json", t.letter())), &rows)?;
        }
        write_json(&out.join("mse.json"), &results)?;
        manifest.finish(&out.join("manifest.json"))?;
    }
    Ok(ExitCode::SUCCESS)
}
