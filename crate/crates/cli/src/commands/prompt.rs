use std::process::ExitCode;

use traitfuse::prompt::{build_prompt, PromptBank, SubjectMeta};
use traitfuse::{Error, Result, Trait};

use crate::PromptArgs;

fn read(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn prompt(args: &PromptArgs) -> Result<ExitCode> {
    let bank = match &args.bank {
        Some(p) => PromptBank::load(p)?,
        None => PromptBank::builtin(),
    };
    if let Some(t) = &args.variants {
        let t: Trait = t.parse()?;
        for (i, v) in bank.variants(t, usize::MAX)?.iter().enumerate() {
            println!("{i}\t{}", v.task_description);
        }
        return Ok(ExitCode::SUCCESS);
    }
    let t: Trait = args.trait_id.as_deref().unwrap_or_default().parse()?;
    let variants = bank.variants(t, usize::MAX)?;
    let template = variants.get(args.variant).ok_or_else(|| {
        Error::Config(format!("variant {} out of range ({} available for {t})", args.variant, variants.len()))
    })?;
    let transcript = match &args.transcript {
        Some(p) => read(p)?,
        None => String::new(),
    };
    let meta: SubjectMeta = match &args.meta {
        Some(p) => serde_json::from_str(&read(p)?).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
        None => SubjectMeta::default(),
    };
    let text = build_prompt(template, &transcript, &meta);
    match &args.out {
        Some(p) => std::fs::write(p, text + "\n").map_err(|e| Error::Io {
            path: p.clone(),
            source: e,
        })?,
        None => println!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}
