use std::process::ExitCode;

use traitfuse::data::{generate_synthetic, SyntheticSpec};
use traitfuse::Result;

use crate::manifest::RunManifest;
use crate::SynthArgs;

pub fn synth(args: &SynthArgs) -> Result<ExitCode> {
    let spec = SyntheticSpec {
        n: args.n,
        text_dim: args.text_dim,
        audio_dim: args.audio_dim,
        video_dim: args.video_dim,
        latent: args.latent,
        teacher: args.teacher.into(),
        noise_std: args.noise,
        seed: args.seed,
    };
    let manifest = RunManifest::start("synth", &spec, Some(spec.seed));
    let ds = generate_synthetic(&spec)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        super::create_dir(dir)?;
    }
    ds.save(&args.out)?;
    let mut name = args.out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    manifest.finish(&args.out.with_file_name(name))?;
    println!("wrote {} records to {}", ds.len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}
