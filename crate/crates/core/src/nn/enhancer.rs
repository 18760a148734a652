//! Text-feature enhancer: gated convex fusion of the audio-text,
//! video-text and text features, plus a residual to the raw text.

use super::config::EnhancerConfig;
use super::linear::{Linear, Norm};
use crate::error::{Error, Result};
use crate::tensor::{
    concat_lastdim, dropout, softmax, softmax_backward, split_lastdim, DropoutMask, LayerNormCache, ParamTensor,
    RngState, Tensor,
};

#[derive(Clone, Debug)]
pub struct TextEnhancer {
    cfg: EnhancerConfig,
    /// Present only when the raw text width differs from `model_dim`.
    text_adapter: Option<Linear>,
    proj_at: Linear,
    proj_vt: Linear,
    proj_t: Linear,
    gate: Linear,
    norm: Norm,
}

#[derive(Debug)]
pub struct EnhancerCache {
    x_at: Tensor,
    x_vt: Tensor,
    raw_text: Tensor,
    text: Tensor,
    proj: [Tensor; 3],
    gate_input: Tensor,
    /// `[B × 3]`, rows sum to one.
    gates: Tensor,
    mask: DropoutMask,
    norm: LayerNormCache,
}

impl EnhancerCache {
    pub fn gates(&self) -> &Tensor {
        &self.gates
    }
}

impl TextEnhancer {
    pub fn new(name: &str, cfg: &EnhancerConfig, rng: &mut RngState) -> Result<Self> {
        cfg.validate()?;
        let m = cfg.model_dim;
        let text_adapter = (cfg.text_dim != m).then(|| Linear::new(&format!("{name}.text_in"), cfg.text_dim, m, rng));
        Ok(Self {
            cfg: cfg.clone(),
            text_adapter,
            proj_at: Linear::new(&format!("{name}.W_at"), m, m, rng),
            proj_vt: Linear::new(&format!("{name}.W_vt"), m, m, rng),
            proj_t: Linear::new(&format!("{name}.W_t"), m, m, rng),
            gate: Linear::new(&format!("{name}.gate"), 3 * m, 3, rng),
            norm: Norm::new(&format!("{name}.ln"), m),
        })
    }

    pub fn config(&self) -> &EnhancerConfig {
        &self.cfg
    }

    /// Mutable access to the gate layer, e.g. to pin the gate logits.
    pub fn gate_mut(&mut self) -> &mut Linear {
        &mut self.gate
    }

    pub fn forward(
        &self,
        x_at: &Tensor,
        x_vt: &Tensor,
        x_t: &Tensor,
        rng: &mut RngState,
        training: bool,
    ) -> Result<(Tensor, EnhancerCache)> {
        let m = self.cfg.model_dim;
        if x_at.cols() != m || x_vt.cols() != m {
            return Err(Error::shape("enhance_text", x_at.shape(), x_vt.shape()));
        }
        if x_t.cols() != self.cfg.text_dim || x_t.rows() != x_at.rows() || x_vt.rows() != x_at.rows() {
            return Err(Error::shape("enhance_text", x_at.shape(), x_t.shape()));
        }
        let text = match &self.text_adapter {
            Some(a) => a.forward(x_t)?,
            None => x_t.clone(),
        };
        let proj = [
            self.proj_at.forward(x_at)?,
            self.proj_vt.forward(x_vt)?,
            self.proj_t.forward(&text)?,
        ];
        let gate_input = concat_lastdim(&[&proj[0], &proj[1], &proj[2]])?;
        let gates = softmax(&self.gate.forward(&gate_input)?);

        let mut fused = Tensor::zeros(proj[0].shape());
        for b in 0..fused.rows() {
            let g = gates.row(b).to_vec();
            let row = fused.row_mut(b);
            for (i, p) in proj.iter().enumerate() {
                for (o, &v) in row.iter_mut().zip(p.row(b)) {
                    *o += g[i] * v;
                }
            }
        }
        let (dropped, mask) = dropout(&fused, self.cfg.dropout, rng, training)?;
        let (y, norm) = self.norm.forward(&text.add(&dropped)?)?;
        Ok((
            y,
            EnhancerCache {
                x_at: x_at.clone(),
                x_vt: x_vt.clone(),
                raw_text: x_t.clone(),
                text,
                proj,
                gate_input,
                gates,
                mask,
                norm,
            },
        ))
    }

    /// Returns grads w.r.t. `(x_at, x_vt, x_t)`.
    pub fn backward(&mut self, cache: &EnhancerCache, g: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
        let g_res = self.norm.backward(&cache.norm, g)?;
        let g_fused = cache.mask.backward(&g_res);
        let mut g_text = g_res;

        let rows = g_fused.rows();
        let mut g_proj: Vec<Tensor> = cache.proj.iter().map(|p| Tensor::zeros(p.shape())).collect();
        let mut g_gates = Tensor::zeros(cache.gates.shape());
        for b in 0..rows {
            let gf = g_fused.row(b);
            let gates = cache.gates.row(b);
            for i in 0..3 {
                g_gates.row_mut(b)[i] = gf.iter().zip(cache.proj[i].row(b)).map(|(a, c)| a * c).sum();
                for (o, &v) in g_proj[i].row_mut(b).iter_mut().zip(gf) {
                    *o += gates[i] * v;
                }
            }
        }
        let g_logits = softmax_backward(&cache.gates, &g_gates)?;
        let g_gate_in = self.gate.backward(&cache.gate_input, &g_logits)?;
        let m = self.cfg.model_dim;
        for (gp, extra) in g_proj.iter_mut().zip(split_lastdim(&g_gate_in, &[m, m, m])?) {
            gp.add_assign(&extra)?;
        }

        let g_at = self.proj_at.backward(&cache.x_at, &g_proj[0])?;
        let g_vt = self.proj_vt.backward(&cache.x_vt, &g_proj[1])?;
        g_text.add_assign(&self.proj_t.backward(&cache.text, &g_proj[2])?)?;
        let g_t = match &mut self.text_adapter {
            Some(a) => a.backward(&cache.raw_text, &g_text)?,
            None => g_text,
        };
        Ok((g_at, g_vt, g_t))
    }

    pub fn params(&self) -> Vec<&ParamTensor> {
        let mut out = Vec::new();
        if let Some(a) = &self.text_adapter {
            out.extend(a.params());
        }
        for l in [&self.proj_at, &self.proj_vt, &self.proj_t, &self.gate] {
            out.extend(l.params());
        }
        out.extend(self.norm.params());
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut out = Vec::new();
        if let Some(a) = &mut self.text_adapter {
            out.extend(a.params_mut());
        }
        out.extend(self.proj_at.params_mut());
        out.extend(self.proj_vt.params_mut());
        out.extend(self.proj_t.params_mut());
        out.extend(self.gate.params_mut());
        out.extend(self.norm.params_mut());
        out
    }
}
