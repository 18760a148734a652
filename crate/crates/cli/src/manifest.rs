use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use traitfuse::{Error, Result};

#[derive(Clone, Debug, Serialize)]
pub struct InputFile {
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything needed to rerun a command: argv, the fully resolved config,
/// hashes of every input, tool version and wall-clock bounds.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub inputs: Vec<InputFile>,
    pub tool: String,
    pub rng: String,
    pub started: String,
    pub finished: Option<String>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = File::open(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

impl RunManifest {
    pub fn start(command: &str, config: impl Serialize, seed: Option<u64>) -> Self {
        Self {
            command: command.to_string(),
            argv: std::env::args().collect(),
            config: serde_json::to_value(config).expect("config serialises"),
            seed,
            inputs: Vec::new(),
            tool: format!("traitfuse {}", env!("CARGO_PKG_VERSION")),
            rng: "chacha8".to_string(),
            started: chrono::Utc::now().to_rfc3339(),
            finished: None,
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.push(InputFile {
            path: path.to_path_buf(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    pub fn finish(mut self, path: &Path) -> Result<()> {
        self.finished = Some(chrono::Utc::now().to_rfc3339());
        let text = serde_json::to_string_pretty(&self).expect("manifest serialises");
        std::fs::write(path, text + "\n").map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }
}
