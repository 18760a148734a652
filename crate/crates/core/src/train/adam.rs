use crate::error::{Error, Result};
use crate::tensor::{ParamTensor, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, one pair per parameter tensor.
#[derive(Clone, Debug)]
pub struct AdamState {
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: u64,
}

impl AdamState {
    pub fn new(params: &[&ParamTensor]) -> Self {
        let zeros = || params.iter().map(|p| Tensor::zeros(p.value.shape())).collect::<Vec<_>>();
        Self {
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Advances the step counter and applies one bias-corrected update.
    pub fn step(&mut self, params: &mut [&mut ParamTensor], cfg: &AdamConfig) -> Result<()> {
        self.t += 1;
        adam_step(params, &mut self.m, &mut self.v, cfg, self.t)
    }
}

/// One Adam update at step `t ≥ 1` using each parameter's accumulated grad.
pub fn adam_step(
    params: &mut [&mut ParamTensor],
    m: &mut [Tensor],
    v: &mut [Tensor],
    cfg: &AdamConfig,
    t: u64,
) -> Result<()> {
    if t == 0 {
        return Err(Error::Config("Adam step index starts at 1".into()));
    }
    if params.len() != m.len() || params.len() != v.len() {
        return Err(Error::Size {
            op: "adam_step",
            msg: format!("{} parameters but {} moment tensors", params.len(), m.len()),
        });
    }
    let bc1 = 1.0 - cfg.beta1.powi(t as i32);
    let bc2 = 1.0 - cfg.beta2.powi(t as i32);
    for ((p, m), v) in params.iter_mut().zip(m.iter_mut()).zip(v.iter_mut()) {
        if p.value.shape() != m.shape() || p.grad.shape() != m.shape() {
            return Err(Error::shape("adam_step", p.value.shape(), m.shape()));
        }
        let grads = p.grad.data().to_vec();
        for (((w, g), mi), vi) in p
            .value
            .data_mut()
            .iter_mut()
            .zip(&grads)
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * g;
            *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * g * g;
            let m_hat = *mi / bc1;
            let v_hat = *vi / bc2;
            *w -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}
