mod ablate;
mod eval;
mod gradcheck;
mod prompt;
mod synth;
mod train;

use std::path::Path;

use traitfuse::data::Dataset;
use traitfuse::{Error, Result};

pub use ablate::ablate;
pub use eval::eval;
pub use gradcheck::gradcheck;
pub use prompt::prompt;
pub use synth::synth;
pub use train::train;

use crate::config::resolve_data;

fn load_data(path: &Path) -> Result<(Dataset, std::path::PathBuf)> {
    let path = resolve_data(path);
    if !path.exists() {
        return Err(Error::Dataset(format!("data file {} does not exist", path.display())));
    }
    Ok((Dataset::load(&path)?, path))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("value serialises");
    std::fs::write(path, text + "\n").map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}
