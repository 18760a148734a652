//! `traitfuse`: train, evaluate and ablate the trait-regression model.

mod commands;
mod config;
mod manifest;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use traitfuse::data::Teacher;

use crate::config::TrainOverrides;

#[derive(Parser, Debug)]
#[command(name = "traitfuse", version, about = "Text-centric multimodal HEXACO trait regression")]
struct Cli {
    /// Worker threads for fold-level parallelism (0 = all cores). Results do
    /// not depend on this value.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one model per fold for each requested trait.
    Train(TrainArgs),
    /// Score checkpoints against a labeled dataset.
    Eval(EvalArgs),
    /// Train and compare model variants.
    Ablate(AblateArgs),
    /// Check every analytic gradient against finite differences.
    Gradcheck(GradcheckArgs),
    /// Assemble a trait prompt or list the prompt variants.
    Prompt(PromptArgs),
    /// Write a synthetic dataset.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Traits to train: a letter, a comma list, or `all`.
    #[arg(long = "trait", value_name = "TRAITS")]
    pub traits: String,
    /// Dataset file (relative paths also resolve under $TRAITFUSE_DATA_DIR).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Model variant, overriding the config file.
    #[arg(long)]
    pub variant: Option<String>,
    /// Grid-search first (the config's [grid] or the default grid) and
    /// train the best cell.
    #[arg(long)]
    pub grid: bool,
    #[command(flatten)]
    pub overrides: TrainOverrides,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Checkpoint files or directories searched for `*.ckpt`.
    #[arg(long, num_args = 1.., required = true)]
    pub checkpoints: Vec<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    /// Directory for the manifest and per-record predictions.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AblateArgs {
    /// Comma-separated variants, or `all`.
    #[arg(long, default_value = "all")]
    pub modes: String,
    #[arg(long = "traits", default_value = "all")]
    pub traits: String,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Seeds to repeat each cell with; the table shows the median.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[command(flatten)]
    pub overrides: TrainOverrides,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    /// Override every component's tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Seeds per kernel.
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    /// Seeds per model variant.
    #[arg(long, default_value_t = 1)]
    pub model_seeds: u64,
}

#[derive(Args, Debug)]
pub struct PromptArgs {
    /// List the variant bank for this trait instead of building a prompt.
    #[arg(long, value_name = "TRAIT", conflicts_with_all = ["trait_id", "transcript", "meta"])]
    pub variants: Option<String>,
    #[arg(long = "trait", value_name = "TRAIT", required_unless_present = "variants")]
    pub trait_id: Option<String>,
    /// Transcript text file; omit for an empty transcript.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
    /// JSON file with gender, age, education, work_experience.
    #[arg(long)]
    pub meta: Option<PathBuf>,
    /// Which variant to use (0 = default).
    #[arg(long, default_value_t = 0)]
    pub variant: usize,
    /// Alternative variant bank (TOML).
    #[arg(long)]
    pub bank: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 256)]
    pub n: usize,
    #[arg(long, default_value_t = 16)]
    pub text_dim: usize,
    #[arg(long, default_value_t = 12)]
    pub audio_dim: usize,
    #[arg(long, default_value_t = 8)]
    pub video_dim: usize,
    /// Planted projection width per modality.
    #[arg(long, default_value_t = 4)]
    pub latent: usize,
    #[arg(long, value_enum, default_value = "linear")]
    pub teacher: TeacherArg,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
pub enum TeacherArg {
    Linear,
    PlantedGate,
}

impl From<TeacherArg> for Teacher {
    fn from(t: TeacherArg) -> Self {
        match t {
            TeacherArg::Linear => Teacher::Linear,
            TeacherArg::PlantedGate => Teacher::PlantedGate,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    let result = match &cli.command {
        Command::Train(a) => commands::train(a, cli.jobs),
        Command::Eval(a) => commands::eval(a),
        Command::Ablate(a) => commands::ablate(a, cli.jobs),
        Command::Gradcheck(a) => commands::gradcheck(a),
        Command::Prompt(a) => commands::prompt(a),
        Command::Synth(a) => commands::synth(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
