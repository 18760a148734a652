//! The assembled trait-regression network and its ablation variants.

use super::config::{AblationMode, ModelConfig};
use super::connector::{ConnectorCache, CrossModalConnector};
use super::enhancer::{EnhancerCache, TextEnhancer};
use super::head::{EnsembleHead, HeadCache};
use super::linear::Linear;
use super::projector::{ChunkProjector, ChunkProjectorCache};
use crate::error::{Error, Result};
use crate::tensor::{concat_lastdim, split_lastdim, HasParams, ParamTensor, RngState, Tensor};

/// Per-modality input features for a batch, each `[B × dim]`.
#[derive(Clone, Debug)]
pub struct ModalityBatch {
    pub text: Tensor,
    pub audio: Tensor,
    pub video: Tensor,
}

impl ModalityBatch {
    pub fn len(&self) -> usize {
        self.text.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug)]
pub struct FusionModel {
    cfg: ModelConfig,
    text: ChunkProjector,
    audio: ChunkProjector,
    video: ChunkProjector,
    audio_conn: Option<CrossModalConnector>,
    video_conn: Option<CrossModalConnector>,
    enhancer: Option<TextEnhancer>,
    /// cmc-only: `[x_at; x_vt] → D_m`.
    bridge: Option<Linear>,
    /// tfe-only: projected audio/video → D_m in place of the connectors.
    side: Option<(Linear, Linear)>,
    head: EnsembleHead,
}

#[derive(Debug)]
enum BodyCache {
    Concat {
        widths: [usize; 3],
    },
    CmcOnly {
        at: ConnectorCache,
        vt: ConnectorCache,
        bridge_in: Tensor,
    },
    Full {
        at: ConnectorCache,
        vt: ConnectorCache,
        tfe: EnhancerCache,
    },
    TfeOnly {
        audio: Tensor,
        video: Tensor,
        tfe: EnhancerCache,
    },
}

#[derive(Debug)]
pub struct ModelCache {
    text: ChunkProjectorCache,
    audio: ChunkProjectorCache,
    video: ChunkProjectorCache,
    body: BodyCache,
    head: HeadCache,
}

impl ModelCache {
    /// Attention weights `[B × H × tokens]` of the audio and video connectors.
    pub fn attention_weights(&self) -> Vec<&Tensor> {
        match &self.body {
            BodyCache::Full { at, vt, .. } | BodyCache::CmcOnly { at, vt, .. } => {
                vec![at.attention_weights(), vt.attention_weights()]
            }
            _ => Vec::new(),
        }
    }

    /// Enhancer gates `[B × 3]`, when the variant has an enhancer.
    pub fn gates(&self) -> Option<&Tensor> {
        match &self.body {
            BodyCache::Full { tfe, .. } | BodyCache::TfeOnly { tfe, .. } => Some(tfe.gates()),
            _ => None,
        }
    }
}

impl FusionModel {
    /// Builds and initialises the variant named by `cfg.variant`.
    pub fn new(cfg: &ModelConfig, rng: &mut RngState) -> Result<Self> {
        cfg.validate()?;
        let mode = cfg.variant;
        let projector_cfg = |p: &super::config::ChunkProjectorConfig| {
            if mode == AblationMode::SingleProjector {
                p.single_matched()
            } else {
                p.clone()
            }
        };
        let text = ChunkProjector::new("cwp.text", &projector_cfg(&cfg.text), rng)?;
        let audio = ChunkProjector::new("cwp.audio", &projector_cfg(&cfg.audio), rng)?;
        let video = ChunkProjector::new("cwp.video", &projector_cfg(&cfg.video), rng)?;
        let m = cfg.enhancer.model_dim;

        let with_connectors = matches!(
            mode,
            AblationMode::Full | AblationMode::CmcOnly | AblationMode::SingleProjector | AblationMode::SingleHead
        );
        let (audio_conn, video_conn) = if with_connectors {
            (
                Some(CrossModalConnector::new("cmc.audio", &cfg.audio_connector, rng)?),
                Some(CrossModalConnector::new("cmc.video", &cfg.video_connector, rng)?),
            )
        } else {
            (None, None)
        };
        let side = (mode == AblationMode::TfeOnly).then(|| {
            (
                Linear::new("side.audio", cfg.audio.output_dim(), m, rng),
                Linear::new("side.video", cfg.video.output_dim(), m, rng),
            )
        });
        let enhancer = if matches!(mode, AblationMode::CmcOnly | AblationMode::Concat) {
            None
        } else {
            Some(TextEnhancer::new("tfe", &cfg.enhancer, rng)?)
        };
        let bridge = (mode == AblationMode::CmcOnly).then(|| {
            Linear::new("bridge", cfg.audio_connector.output_dim + cfg.video_connector.output_dim, m, rng)
        });
        let head_in = if mode == AblationMode::Concat {
            cfg.text.output_dim() + cfg.audio.output_dim() + cfg.video.output_dim()
        } else {
            m
        };
        let head_size = if mode == AblationMode::SingleHead { 1 } else { cfg.ensemble_size };
        let head = EnsembleHead::new("head", head_in, cfg.head_hidden, head_size, rng);

        Ok(Self {
            cfg: cfg.clone(),
            text,
            audio,
            video,
            audio_conn,
            video_conn,
            enhancer,
            bridge,
            side,
            head,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn mode(&self) -> AblationMode {
        self.cfg.variant
    }

    pub fn head(&self) -> &EnsembleHead {
        &self.head
    }

    pub fn head_mut(&mut self) -> &mut EnsembleHead {
        &mut self.head
    }

    pub fn enhancer_mut(&mut self) -> Option<&mut TextEnhancer> {
        self.enhancer.as_mut()
    }

    fn check_inputs(&self, batch: &ModalityBatch) -> Result<()> {
        let (t, a, v) = self.cfg.input_dims();
        for (name, x, want) in [("text", &batch.text, t), ("audio", &batch.audio, a), ("video", &batch.video, v)] {
            if x.shape().len() != 2 || x.cols() != want {
                return Err(Error::Size {
                    op: "model_forward",
                    msg: format!("{name} input has shape {:?}, model expects width {want}", x.shape()),
                });
            }
            if x.rows() != batch.text.rows() {
                return Err(Error::shape("model_forward", batch.text.shape(), x.shape()));
            }
        }
        Ok(())
    }

    /// Per-sample trait scores `[B]` and the cache for [`Self::backward`].
    pub fn forward(&self, batch: &ModalityBatch, rng: &mut RngState, training: bool) -> Result<(Tensor, ModelCache)> {
        self.check_inputs(batch)?;
        let (zt, text) = self.text.forward(&batch.text, rng, training)?;
        let (za, audio) = self.audio.forward(&batch.audio, rng, training)?;
        let (zv, video) = self.video.forward(&batch.video, rng, training)?;

        let (features, body) = match self.cfg.variant {
            AblationMode::Concat => (
                concat_lastdim(&[&zt, &za, &zv])?,
                BodyCache::Concat {
                    widths: [zt.cols(), za.cols(), zv.cols()],
                },
            ),
            AblationMode::CmcOnly => {
                let (x_at, at) = self.audio_conn.as_ref().unwrap().forward(&zt, &za, rng, training)?;
                let (x_vt, vt) = self.video_conn.as_ref().unwrap().forward(&zt, &zv, rng, training)?;
                let bridge_in = concat_lastdim(&[&x_at, &x_vt])?;
                let out = self.bridge.as_ref().unwrap().forward(&bridge_in)?;
                (out, BodyCache::CmcOnly { at, vt, bridge_in })
            }
            AblationMode::TfeOnly => {
                let (side_a, side_v) = self.side.as_ref().unwrap();
                let x_a = side_a.forward(&za)?;
                let x_v = side_v.forward(&zv)?;
                let (out, tfe) = self.enhancer.as_ref().unwrap().forward(&x_a, &x_v, &zt, rng, training)?;
                (out, BodyCache::TfeOnly { audio: za, video: zv, tfe })
            }
            AblationMode::Full | AblationMode::SingleProjector | AblationMode::SingleHead => {
                let (x_at, at) = self.audio_conn.as_ref().unwrap().forward(&zt, &za, rng, training)?;
                let (x_vt, vt) = self.video_conn.as_ref().unwrap().forward(&zt, &zv, rng, training)?;
                let (out, tfe) = self.enhancer.as_ref().unwrap().forward(&x_at, &x_vt, &zt, rng, training)?;
                (out, BodyCache::Full { at, vt, tfe })
            }
        };
        let (y, head) = self.head.forward(&features)?;
        Ok((
            y,
            ModelCache {
                text,
                audio,
                video,
                body,
                head,
            },
        ))
    }

    /// Eval-mode forward.
    pub fn predict(&self, batch: &ModalityBatch) -> Result<Tensor> {
        // eval mode draws nothing from the stream
        let mut rng = RngState::new(0);
        Ok(self.forward(batch, &mut rng, false)?.0)
    }

    /// Accumulates parameter grads given `g = ∂loss/∂output` (`[B]`).
    pub fn backward(&mut self, cache: &ModelCache, g: &Tensor) -> Result<()> {
        let g_features = self.head.backward(&cache.head, g)?;
        let (g_zt, g_za, g_zv) = match &cache.body {
            BodyCache::Concat { widths } => {
                let mut parts = split_lastdim(&g_features, widths)?.into_iter();
                (parts.next().unwrap(), parts.next().unwrap(), parts.next().unwrap())
            }
            BodyCache::CmcOnly { at, vt, bridge_in } => {
                let g_in = self.bridge.as_mut().unwrap().backward(bridge_in, &g_features)?;
                let widths = [self.cfg.audio_connector.output_dim, self.cfg.video_connector.output_dim];
                let mut parts = split_lastdim(&g_in, &widths)?.into_iter();
                let (g_at, g_vt) = (parts.next().unwrap(), parts.next().unwrap());
                let (mut g_zt, g_za) = self.audio_conn.as_mut().unwrap().backward(at, &g_at)?;
                let (g_zt2, g_zv) = self.video_conn.as_mut().unwrap().backward(vt, &g_vt)?;
                g_zt.add_assign(&g_zt2)?;
                (g_zt, g_za, g_zv)
            }
            BodyCache::TfeOnly { audio, video, tfe } => {
                let (g_a, g_v, g_zt) = self.enhancer.as_mut().unwrap().backward(tfe, &g_features)?;
                let (side_a, side_v) = self.side.as_mut().unwrap();
                let g_za = side_a.backward(audio, &g_a)?;
                let g_zv = side_v.backward(video, &g_v)?;
                (g_zt, g_za, g_zv)
            }
            BodyCache::Full { at, vt, tfe } => {
                let (g_at, g_vt, mut g_zt) = self.enhancer.as_mut().unwrap().backward(tfe, &g_features)?;
                let (g_q1, g_za) = self.audio_conn.as_mut().unwrap().backward(at, &g_at)?;
                let (g_q2, g_zv) = self.video_conn.as_mut().unwrap().backward(vt, &g_vt)?;
                g_zt.add_assign(&g_q1)?;
                g_zt.add_assign(&g_q2)?;
                (g_zt, g_za, g_zv)
            }
        };
        self.text.backward(&cache.text, &g_zt)?;
        self.audio.backward(&cache.audio, &g_za)?;
        self.video.backward(&cache.video, &g_zv)?;
        Ok(())
    }
}

impl HasParams for FusionModel {
    fn params(&self) -> Vec<&ParamTensor> {
        let mut out = Vec::new();
        out.extend(self.text.params());
        out.extend(self.audio.params());
        out.extend(self.video.params());
        if let Some(c) = &self.audio_conn {
            out.extend(c.params());
        }
        if let Some(c) = &self.video_conn {
            out.extend(c.params());
        }
        if let Some((a, v)) = &self.side {
            out.extend(a.params());
            out.extend(v.params());
        }
        if let Some(e) = &self.enhancer {
            out.extend(e.params());
        }
        if let Some(b) = &self.bridge {
            out.extend(b.params());
        }
        out.extend(self.head.params());
        out
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut out = Vec::new();
        out.extend(self.text.params_mut());
        out.extend(self.audio.params_mut());
        out.extend(self.video.params_mut());
        if let Some(c) = &mut self.audio_conn {
            out.extend(c.params_mut());
        }
        if let Some(c) = &mut self.video_conn {
            out.extend(c.params_mut());
        }
        if let Some((a, v)) = &mut self.side {
            out.extend(a.params_mut());
            out.extend(v.params_mut());
        }
        if let Some(e) = &mut self.enhancer {
            out.extend(e.params_mut());
        }
        if let Some(b) = &mut self.bridge {
            out.extend(b.params_mut());
        }
        out.extend(self.head.params_mut());
        out
    }
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;
    use crate::hexaco::Trait;
    use crate::nn::ModelDims;

    fn toy(mode: AblationMode) -> ModelConfig {
        ModelConfig::from_dims(&ModelDims::toy(), Trait::H).unwrap().with_variant(mode)
    }

    fn batch(rng: &mut RngState, b: usize) -> ModalityBatch {
        ModalityBatch {
            text: Tensor::randn(&[b, 16], rng),
            audio: Tensor::randn(&[b, 12], rng),
            video: Tensor::randn(&[b, 8], rng),
        }
    }

    #[test]
    fn every_variant_runs_and_names_are_unique() {
        for mode in AblationMode::ALL {
            let mut rng = RngState::new(1);
            let model = FusionModel::new(&toy(mode), &mut rng).unwrap();
            let (y, _) = model.forward(&batch(&mut rng, 3), &mut rng, true).unwrap();
            assert_eq!(y.shape(), &[3]);
            assert!(y.is_finite());
            let names: HashSet<_> = model.params().iter().map(|p| p.name.clone()).collect();
            assert_eq!(names.len(), model.params().len(), "{mode}");
        }
    }

    #[test]
    fn eval_is_deterministic() {
        let mut rng = RngState::new(2);
        let model = FusionModel::new(&toy(AblationMode::Full), &mut rng).unwrap();
        let b = batch(&mut rng, 4);
        assert!(model.predict(&b).unwrap().bitwise_eq(&model.predict(&b).unwrap()));
    }

    #[test]
    fn zero_audio_video_stays_finite() {
        let mut rng = RngState::new(3);
        let model = FusionModel::new(&toy(AblationMode::Full), &mut rng).unwrap();
        let mut b = batch(&mut rng, 2);
        b.audio = Tensor::zeros(&[2, 12]);
        b.video = Tensor::zeros(&[2, 8]);
        assert!(model.predict(&b).unwrap().is_finite());
    }

    #[test]
    fn wrong_width_is_reported() {
        let mut rng = RngState::new(4);
        let model = FusionModel::new(&toy(AblationMode::Full), &mut rng).unwrap();
        let mut b = batch(&mut rng, 2);
        b.audio = Tensor::zeros(&[2, 11]);
        let err = model.predict(&b).unwrap_err().to_string();
        assert!(err.contains("audio"), "{err}");
    }

    #[test]
    fn concat_head_reads_all_projections() {
        let mut rng = RngState::new(5);
        let model = FusionModel::new(&toy(AblationMode::Concat), &mut rng).unwrap();
        assert_eq!(model.head().in_dim(), 16 + 12 + 8);
    }

    #[test]
    fn single_head_has_one_subnet() {
        let mut rng = RngState::new(6);
        let model = FusionModel::new(&toy(AblationMode::SingleHead), &mut rng).unwrap();
        assert_eq!(model.head().size(), 1);
    }
}
