use super::Tensor;
use crate::error::{Error, Result};

pub const LAYERNORM_EPS: f64 = 1e-5;

/// What the backward pass needs from a layernorm forward.
#[derive(Clone, Debug)]
pub struct LayerNormCache {
    normalized: Tensor,
    inv_std: Vec<f64>,
}

/// Normalises each row over the last dim, then applies `gain` and `bias`.
/// `eps` sits inside the square root.
pub fn layernorm(x: &Tensor, gain: &Tensor, bias: &Tensor, eps: f64) -> Result<(Tensor, LayerNormCache)> {
    let d = x.cols();
    if gain.shape() != [d] || bias.shape() != [d] {
        return Err(Error::shape("layernorm", x.shape(), gain.shape()));
    }
    let mut normalized = x.clone();
    let mut inv_std = Vec::with_capacity(x.rows());
    for r in 0..x.rows() {
        let row = normalized.row_mut(r);
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let s = 1.0 / (var + eps).sqrt();
        for v in row.iter_mut() {
            *v = (*v - mean) * s;
        }
        inv_std.push(s);
    }
    let mut out = normalized.clone();
    for r in 0..out.rows() {
        for ((v, g), b) in out.row_mut(r).iter_mut().zip(gain.data()).zip(bias.data()) {
            *v = *v * g + b;
        }
    }
    Ok((out, LayerNormCache { normalized, inv_std }))
}

/// Returns `(grad_x, grad_gain, grad_bias)`.
pub fn layernorm_backward(cache: &LayerNormCache, gain: &Tensor, g: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
    let xhat = &cache.normalized;
    if xhat.shape() != g.shape() {
        return Err(Error::shape("layernorm_backward", xhat.shape(), g.shape()));
    }
    let d = xhat.cols();
    let mut gx = Tensor::zeros(xhat.shape());
    let mut ggain = vec![0.0; d];
    let mut gbias = vec![0.0; d];
    let mut dxhat = vec![0.0; d];
    for r in 0..xhat.rows() {
        let (xr, gr) = (xhat.row(r), g.row(r));
        for j in 0..d {
            ggain[j] += gr[j] * xr[j];
            gbias[j] += gr[j];
            dxhat[j] = gr[j] * gain.data()[j];
        }
        let sum_d: f64 = dxhat.iter().sum();
        let sum_dx: f64 = dxhat.iter().zip(xr).map(|(a, b)| a * b).sum();
        let s = cache.inv_std[r] / d as f64;
        for (j, o) in gx.row_mut(r).iter_mut().enumerate() {
            *o = s * (d as f64 * dxhat[j] - sum_d - xr[j] * sum_dx);
        }
    }
    Ok((gx, Tensor::new(vec![d], ggain)?, Tensor::new(vec![d], gbias)?))
}
