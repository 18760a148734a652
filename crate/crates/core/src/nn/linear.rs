use crate::error::Result;
use crate::tensor::{
    layernorm, layernorm_backward, linear, linear_backward, LayerNormCache, ParamTensor, RngState, Tensor,
    LAYERNORM_EPS,
};

#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: ParamTensor,
    pub bias: ParamTensor,
}

impl Linear {
    pub fn new(name: &str, in_dim: usize, out_dim: usize, rng: &mut RngState) -> Self {
        Self {
            weight: ParamTensor::weight(format!("{name}.W"), out_dim, in_dim, rng),
            bias: ParamTensor::zeros(format!("{name}.b"), &[out_dim]),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.value.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.value.shape()[0]
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        linear(x, &self.weight.value, &self.bias.value)
    }

    /// Accumulates parameter grads and returns the grad w.r.t. `x`.
    pub fn backward(&mut self, x: &Tensor, g: &Tensor) -> Result<Tensor> {
        let (gx, gw, gb) = linear_backward(x, &self.weight.value, g)?;
        self.weight.grad.add_assign(&gw)?;
        self.bias.grad.add_assign(&gb)?;
        Ok(gx)
    }

    pub fn params(&self) -> [&ParamTensor; 2] {
        [&self.weight, &self.bias]
    }

    pub fn params_mut(&mut self) -> [&mut ParamTensor; 2] {
        [&mut self.weight, &mut self.bias]
    }

    pub fn num_params(in_dim: usize, out_dim: usize) -> usize {
        in_dim * out_dim + out_dim
    }
}

/// LayerNorm with learnable gain/bias.
#[derive(Clone, Debug)]
pub struct Norm {
    pub gain: ParamTensor,
    pub bias: ParamTensor,
}

impl Norm {
    pub fn new(name: &str, dim: usize) -> Self {
        Self {
            gain: ParamTensor::ones(format!("{name}.gain"), &[dim]),
            bias: ParamTensor::zeros(format!("{name}.bias"), &[dim]),
        }
    }

    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, LayerNormCache)> {
        layernorm(x, &self.gain.value, &self.bias.value, LAYERNORM_EPS)
    }

    pub fn backward(&mut self, cache: &LayerNormCache, g: &Tensor) -> Result<Tensor> {
        let (gx, gg, gb) = layernorm_backward(cache, &self.gain.value, g)?;
        self.gain.grad.add_assign(&gg)?;
        self.bias.grad.add_assign(&gb)?;
        Ok(gx)
    }

    pub fn params(&self) -> [&ParamTensor; 2] {
        [&self.gain, &self.bias]
    }

    pub fn params_mut(&mut self) -> [&mut ParamTensor; 2] {
        [&mut self.gain, &mut self.bias]
    }
}
