//! Architecture hyperparameters.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hexaco::Trait;
use crate::nn::Linear;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChunkProjectorConfig {
    pub input_dim: usize,
    pub num_chunks: usize,
    pub hidden_dim: usize,
    pub chunk_out_dim: usize,
    pub dropout: f64,
    /// ReLU after the second linear layer, as printed in the CWP formula.
    pub outer_relu: bool,
}

impl ChunkProjectorConfig {
    pub fn chunk_dim(&self) -> usize {
        self.input_dim / self.num_chunks
    }

    pub fn output_dim(&self) -> usize {
        self.num_chunks * self.chunk_out_dim
    }

    pub fn num_params(&self) -> usize {
        let per_chunk = Linear::num_params(self.chunk_dim(), self.hidden_dim)
            + Linear::num_params(self.hidden_dim, self.chunk_out_dim)
            + 2 * self.chunk_out_dim;
        self.num_chunks * per_chunk
    }

    pub fn validate(&self, what: &str) -> Result<()> {
        if self.input_dim == 0 || self.num_chunks == 0 || self.hidden_dim == 0 || self.chunk_out_dim == 0 {
            return Err(Error::Config(format!("{what} projector: all dims must be positive")));
        }
        if self.input_dim % self.num_chunks != 0 {
            return Err(Error::Config(format!(
                "{what} projector: {} chunks do not divide input dim {}",
                self.num_chunks, self.input_dim
            )));
        }
        check_dropout(what, self.dropout)
    }

    /// One-chunk projector with the same output width and a hidden width
    /// chosen so the parameter count matches `self` as closely as possible.
    pub fn single_matched(&self) -> Self {
        let out = self.output_dim();
        let fixed = out + 2 * out;
        let per_hidden = self.input_dim + 1 + out;
        let target = self.num_params().saturating_sub(fixed) as f64;
        let hidden = ((target / per_hidden as f64).round() as usize).max(1);
        Self {
            input_dim: self.input_dim,
            num_chunks: 1,
            hidden_dim: hidden,
            chunk_out_dim: out,
            dropout: self.dropout,
            outer_relu: self.outer_relu,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConnectorConfig {
    pub query_dim: usize,
    pub key_dim: usize,
    /// Number of key/value tokens the key modality is reshaped into.
    pub key_tokens: usize,
    pub output_dim: usize,
    pub heads: usize,
    pub dropout: f64,
}

impl ConnectorConfig {
    pub fn head_dim(&self) -> usize {
        self.output_dim / self.heads
    }

    pub fn token_dim(&self) -> usize {
        self.key_dim / self.key_tokens
    }

    pub fn validate(&self, what: &str) -> Result<()> {
        if self.heads == 0 || self.output_dim % self.heads != 0 {
            return Err(Error::Config(format!(
                "{what} connector: {} heads do not divide output dim {}",
                self.heads, self.output_dim
            )));
        }
        if self.key_tokens == 0 || self.key_dim % self.key_tokens != 0 {
            return Err(Error::Config(format!(
                "{what} connector: {} tokens do not divide key dim {}",
                self.key_tokens, self.key_dim
            )));
        }
        check_dropout(what, self.dropout)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GateMode {
    #[default]
    SoftmaxGates,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnhancerConfig {
    pub model_dim: usize,
    /// Width of the raw text feature; a linear adapter maps it to
    /// `model_dim` when the two differ.
    pub text_dim: usize,
    pub dropout: f64,
    #[serde(default)]
    pub gate: GateMode,
}

impl EnhancerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.model_dim == 0 || self.text_dim == 0 {
            return Err(Error::Config("enhancer: dims must be positive".into()));
        }
        check_dropout("enhancer", self.dropout)
    }
}

/// Which network variant to build.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AblationMode {
    #[default]
    Full,
    Concat,
    CmcOnly,
    TfeOnly,
    SingleProjector,
    SingleHead,
}

impl AblationMode {
    pub const ALL: [AblationMode; 6] = [
        AblationMode::Full,
        AblationMode::Concat,
        AblationMode::CmcOnly,
        AblationMode::TfeOnly,
        AblationMode::SingleProjector,
        AblationMode::SingleHead,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AblationMode::Full => "full",
            AblationMode::Concat => "concat",
            AblationMode::CmcOnly => "cmc-only",
            AblationMode::TfeOnly => "tfe-only",
            AblationMode::SingleProjector => "single-projector",
            AblationMode::SingleHead => "single-head",
        }
    }
}

impl fmt::Display for AblationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AblationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AblationMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s.trim())
            .ok_or_else(|| Error::UnknownMode(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(rename = "trait")]
    pub trait_id: Trait,
    #[serde(default)]
    pub variant: AblationMode,
    pub text: ChunkProjectorConfig,
    pub audio: ChunkProjectorConfig,
    pub video: ChunkProjectorConfig,
    pub audio_connector: ConnectorConfig,
    pub video_connector: ConnectorConfig,
    pub enhancer: EnhancerConfig,
    pub ensemble_size: usize,
    pub head_hidden: [usize; 2],
}

impl ModelConfig {
    pub fn from_dims(dims: &ModelDims, trait_id: Trait) -> Result<Self> {
        let projector = |input_dim, num_chunks| ChunkProjectorConfig {
            input_dim,
            num_chunks,
            hidden_dim: dims.chunk_hidden,
            chunk_out_dim: dims.chunk_out,
            dropout: dims.dropout_cwp,
            outer_relu: dims.outer_relu,
        };
        let text = projector(dims.text_dim, dims.text_chunks);
        let audio = projector(dims.audio_dim, dims.audio_chunks);
        let video = projector(dims.video_dim, dims.video_chunks);
        let connector = |key: &ChunkProjectorConfig| ConnectorConfig {
            query_dim: text.output_dim(),
            key_dim: key.output_dim(),
            key_tokens: key.num_chunks,
            output_dim: dims.latent_dim,
            heads: dims.heads,
            dropout: dims.dropout_cmc,
        };
        let cfg = Self {
            trait_id,
            variant: AblationMode::Full,
            audio_connector: connector(&audio),
            video_connector: connector(&video),
            enhancer: EnhancerConfig {
                model_dim: dims.latent_dim,
                text_dim: text.output_dim(),
                dropout: dims.dropout_tfe,
                gate: GateMode::SoftmaxGates,
            },
            text,
            audio,
            video,
            ensemble_size: dims.ensemble_size,
            head_hidden: dims.head_hidden,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_variant(mut self, variant: AblationMode) -> Self {
        self.variant = variant;
        self
    }

    /// Replaces the per-module dropout rates where given.
    pub fn with_dropout(mut self, cwp: Option<f64>, cmc: Option<f64>, tfe: Option<f64>) -> Self {
        if let Some(p) = cwp {
            self.text.dropout = p;
            self.audio.dropout = p;
            self.video.dropout = p;
        }
        if let Some(p) = cmc {
            self.audio_connector.dropout = p;
            self.video_connector.dropout = p;
        }
        if let Some(p) = tfe {
            self.enhancer.dropout = p;
        }
        self
    }

    /// Input widths `(text, audio, video)`.
    pub fn input_dims(&self) -> (usize, usize, usize) {
        (self.text.input_dim, self.audio.input_dim, self.video.input_dim)
    }

    pub fn validate(&self) -> Result<()> {
        self.text.validate("text")?;
        self.audio.validate("audio")?;
        self.video.validate("video")?;
        self.audio_connector.validate("audio")?;
        self.video_connector.validate("video")?;
        self.enhancer.validate()?;
        for (name, conn, proj) in [
            ("audio", &self.audio_connector, &self.audio),
            ("video", &self.video_connector, &self.video),
        ] {
            if conn.query_dim != self.text.output_dim() {
                return Err(Error::Config(format!(
                    "{name} connector query dim {} != text projector output {}",
                    conn.query_dim,
                    self.text.output_dim()
                )));
            }
            if conn.key_dim != proj.output_dim() {
                return Err(Error::Config(format!(
                    "{name} connector key dim {} != {name} projector output {}",
                    conn.key_dim,
                    proj.output_dim()
                )));
            }
            if conn.output_dim != self.enhancer.model_dim {
                return Err(Error::Config(format!(
                    "{name} connector output {} != enhancer width {}",
                    conn.output_dim, self.enhancer.model_dim
                )));
            }
        }
        if self.enhancer.text_dim != self.text.output_dim() {
            return Err(Error::Config("enhancer text dim != text projector output".into()));
        }
        if self.ensemble_size == 0 || self.head_hidden.contains(&0) {
            return Err(Error::Config("ensemble size and head widths must be positive".into()));
        }
        Ok(())
    }
}

/// The compact knob set the config file exposes; expands into a
/// [`ModelConfig`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelDims {
    pub text_dim: usize,
    pub audio_dim: usize,
    pub video_dim: usize,
    pub text_chunks: usize,
    pub audio_chunks: usize,
    pub video_chunks: usize,
    pub chunk_hidden: usize,
    pub chunk_out: usize,
    pub latent_dim: usize,
    pub heads: usize,
    pub ensemble_size: usize,
    pub head_hidden: [usize; 2],
    pub dropout_cwp: f64,
    pub dropout_cmc: f64,
    pub dropout_tfe: f64,
    pub outer_relu: bool,
}

impl Default for ModelDims {
    fn default() -> Self {
        Self {
            text_dim: 4096,
            audio_dim: 768,
            video_dim: 768,
            text_chunks: 32,
            audio_chunks: 8,
            video_chunks: 8,
            chunk_hidden: 64,
            chunk_out: 32,
            latent_dim: 256,
            heads: 8,
            ensemble_size: 32,
            head_hidden: [128, 64],
            dropout_cwp: 0.2,
            dropout_cmc: 0.3,
            dropout_tfe: 0.1,
            outer_relu: true,
        }
    }
}

impl ModelDims {
    /// Small widths for tests and smoke runs.
    pub fn toy() -> Self {
        Self {
            text_dim: 16,
            audio_dim: 12,
            video_dim: 8,
            text_chunks: 4,
            audio_chunks: 3,
            video_chunks: 2,
            chunk_hidden: 6,
            chunk_out: 4,
            latent_dim: 8,
            heads: 2,
            ensemble_size: 4,
            head_hidden: [8, 4],
            ..Self::default()
        }
    }
}

fn check_dropout(what: &str, p: f64) -> Result<()> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Config(format!("{what}: dropout {p} outside [0, 1)")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_dims_validate() {
        let cfg = ModelConfig::from_dims(&ModelDims::default(), Trait::H).unwrap();
        assert_eq!(cfg.text.output_dim(), 1024);
        assert_eq!(cfg.audio.output_dim(), 256);
        assert_eq!(cfg.audio_connector.head_dim(), 32);
        assert_eq!(cfg.audio_connector.token_dim(), 32);
    }

    #[test]
    fn rejects_indivisible_chunks() {
        let dims = ModelDims {
            text_dim: 10,
            text_chunks: 3,
            ..ModelDims::toy()
        };
        let err = ModelConfig::from_dims(&dims, Trait::H).unwrap_err().to_string();
        assert!(err.contains("do not divide"), "{err}");
    }

    #[test]
    fn rejects_indivisible_heads() {
        let dims = ModelDims {
            heads: 3,
            ..ModelDims::toy()
        };
        assert!(ModelConfig::from_dims(&dims, Trait::H).is_err());
    }

    #[test]
    fn single_projector_matches_per_projector_at_default_dims() {
        let cfg = ModelConfig::from_dims(&ModelDims::default(), Trait::E).unwrap();
        for p in [&cfg.text, &cfg.audio, &cfg.video] {
            let single = p.single_matched();
            assert_eq!(single.num_chunks, 1);
            assert_eq!(single.output_dim(), p.output_dim());
            let (a, b) = (p.num_params() as f64, single.num_params() as f64);
            assert!((a - b).abs() / a <= 0.05, "{a} vs {b}");
        }
    }

    #[test]
    fn mode_names_round_trip() {
        for m in AblationMode::ALL {
            assert_eq!(m.as_str().parse::<AblationMode>().unwrap(), m);
        }
        assert!(matches!("bogus".parse::<AblationMode>(), Err(Error::UnknownMode(_))));
    }
}
