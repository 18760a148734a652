//! Cross-modal connector: the text vector queries the tokens of another
//! modality with multi-head scaled dot-product attention.
//!
//! The key/value modality `[B × key_dim]` is viewed as `key_tokens` tokens
//! of width `key_dim / key_tokens`; the text query is a single token per
//! head. Output is `LayerNorm(Dropout(W_o · concat(heads)))`.

use super::config::ConnectorConfig;
use super::linear::{Linear, Norm};
use crate::error::{Error, Result};
use crate::tensor::{dropout, softmax, softmax_backward, DropoutMask, LayerNormCache, ParamTensor, RngState, Tensor};

#[derive(Clone, Debug)]
pub struct CrossModalConnector {
    cfg: ConnectorConfig,
    query: Linear,
    key: Linear,
    value: Linear,
    out: Linear,
    norm: Norm,
}

#[derive(Debug)]
pub struct ConnectorCache {
    text: Tensor,
    tokens: Tensor,
    q: Tensor,
    k: Tensor,
    v: Tensor,
    /// `[B × H × key_tokens]`.
    weights: Tensor,
    context: Tensor,
    mask: DropoutMask,
    norm: LayerNormCache,
}

impl ConnectorCache {
    pub fn attention_weights(&self) -> &Tensor {
        &self.weights
    }
}

impl CrossModalConnector {
    pub fn new(name: &str, cfg: &ConnectorConfig, rng: &mut RngState) -> Result<Self> {
        cfg.validate(name)?;
        Ok(Self {
            cfg: cfg.clone(),
            query: Linear::new(&format!("{name}.q"), cfg.query_dim, cfg.output_dim, rng),
            key: Linear::new(&format!("{name}.k"), cfg.token_dim(), cfg.output_dim, rng),
            value: Linear::new(&format!("{name}.v"), cfg.token_dim(), cfg.output_dim, rng),
            out: Linear::new(&format!("{name}.o"), cfg.output_dim, cfg.output_dim, rng),
            norm: Norm::new(&format!("{name}.ln"), cfg.output_dim),
        })
    }

    pub fn config(&self) -> &ConnectorConfig {
        &self.cfg
    }

    pub fn forward(
        &self,
        text: &Tensor,
        other: &Tensor,
        rng: &mut RngState,
        training: bool,
    ) -> Result<(Tensor, ConnectorCache)> {
        let cfg = &self.cfg;
        if text.cols() != cfg.query_dim || other.cols() != cfg.key_dim || text.rows() != other.rows() {
            return Err(Error::shape("cross_modal_connect", text.shape(), other.shape()));
        }
        let batch = text.rows();
        let (heads, dh, n) = (cfg.heads, cfg.head_dim(), cfg.key_tokens);
        let scale = 1.0 / (dh as f64).sqrt();

        let tokens = other.clone().reshape(&[batch * n, cfg.token_dim()])?;
        let q = self.query.forward(text)?;
        let k = self.key.forward(&tokens)?;
        let v = self.value.forward(&tokens)?;

        let mut scores = Tensor::zeros(&[batch, heads, n]);
        for b in 0..batch {
            for h in 0..heads {
                let qh = &q.row(b)[h * dh..(h + 1) * dh];
                let srow = scores.row_mut(b * heads + h);
                for (j, s) in srow.iter_mut().enumerate() {
                    let kh = &k.row(b * n + j)[h * dh..(h + 1) * dh];
                    *s = scale * qh.iter().zip(kh).map(|(a, c)| a * c).sum::<f64>();
                }
            }
        }
        let weights = softmax(&scores);

        let mut context = Tensor::zeros(&[batch, cfg.output_dim]);
        for b in 0..batch {
            for h in 0..heads {
                let w = weights.row(b * heads + h).to_vec();
                let crow = &mut context.row_mut(b)[h * dh..(h + 1) * dh];
                for (j, &a) in w.iter().enumerate() {
                    let vh = &v.row(b * n + j)[h * dh..(h + 1) * dh];
                    for (c, &vv) in crow.iter_mut().zip(vh) {
                        *c += a * vv;
                    }
                }
            }
        }

        let projected = self.out.forward(&context)?;
        let (dropped, mask) = dropout(&projected, cfg.dropout, rng, training)?;
        let (y, norm) = self.norm.forward(&dropped)?;
        Ok((
            y,
            ConnectorCache {
                text: text.clone(),
                tokens,
                q,
                k,
                v,
                weights,
                context,
                mask,
                norm,
            },
        ))
    }

    /// Returns grads w.r.t. `(text, other)`.
    pub fn backward(&mut self, cache: &ConnectorCache, g: &Tensor) -> Result<(Tensor, Tensor)> {
        let cfg = &self.cfg;
        let batch = cache.text.rows();
        let (heads, dh, n) = (cfg.heads, cfg.head_dim(), cfg.key_tokens);
        let scale = 1.0 / (dh as f64).sqrt();

        let g = self.norm.backward(&cache.norm, g)?;
        let g = cache.mask.backward(&g);
        let g_ctx = self.out.backward(&cache.context, &g)?;

        let mut g_q = Tensor::zeros(cache.q.shape());
        let mut g_k = Tensor::zeros(cache.k.shape());
        let mut g_v = Tensor::zeros(cache.v.shape());
        let mut g_w = Tensor::zeros(cache.weights.shape());
        for b in 0..batch {
            for h in 0..heads {
                let gc = &g_ctx.row(b)[h * dh..(h + 1) * dh];
                let w = cache.weights.row(b * heads + h);
                let gwrow = g_w.row_mut(b * heads + h);
                for j in 0..n {
                    let vh = &cache.v.row(b * n + j)[h * dh..(h + 1) * dh];
                    gwrow[j] = gc.iter().zip(vh).map(|(a, c)| a * c).sum();
                    let gvh = &mut g_v.row_mut(b * n + j)[h * dh..(h + 1) * dh];
                    for (o, &gcv) in gvh.iter_mut().zip(gc) {
                        *o += w[j] * gcv;
                    }
                }
            }
        }
        let g_scores = softmax_backward(&cache.weights, &g_w)?;
        for b in 0..batch {
            for h in 0..heads {
                let gs = g_scores.row(b * heads + h).to_vec();
                let qh = cache.q.row(b)[h * dh..(h + 1) * dh].to_vec();
                for (j, &s) in gs.iter().enumerate() {
                    let s = s * scale;
                    let kh = &cache.k.row(b * n + j)[h * dh..(h + 1) * dh];
                    let gqh = &mut g_q.row_mut(b)[h * dh..(h + 1) * dh];
                    for (o, &kv) in gqh.iter_mut().zip(kh) {
                        *o += s * kv;
                    }
                    let gkh = &mut g_k.row_mut(b * n + j)[h * dh..(h + 1) * dh];
                    for (o, &qv) in gkh.iter_mut().zip(&qh) {
                        *o += s * qv;
                    }
                }
            }
        }

        let g_text = self.query.backward(&cache.text, &g_q)?;
        let mut g_tokens = self.key.backward(&cache.tokens, &g_k)?;
        g_tokens.add_assign(&self.value.backward(&cache.tokens, &g_v)?)?;
        let g_other = g_tokens.reshape(&[batch, cfg.key_dim])?;
        Ok((g_text, g_other))
    }

    pub fn params(&self) -> Vec<&ParamTensor> {
        let mut out = Vec::with_capacity(10);
        for l in [&self.query, &self.key, &self.value, &self.out] {
            out.extend(l.params());
        }
        out.extend(self.norm.params());
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        let mut out = Vec::with_capacity(10);
        out.extend(self.query.params_mut());
        out.extend(self.key.params_mut());
        out.extend(self.value.params_mut());
        out.extend(self.out.params_mut());
        out.extend(self.norm.params_mut());
        out
    }
}
