use super::{RngState, Tensor};

/// A learnable tensor with its accumulated gradient.
#[derive(Clone, Debug)]
pub struct ParamTensor {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

impl ParamTensor {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape());
        Self {
            name: name.into(),
            value,
            grad,
        }
    }

    pub fn zeros(name: impl Into<String>, shape: &[usize]) -> Self {
        Self::new(name, Tensor::zeros(shape))
    }

    pub fn ones(name: impl Into<String>, shape: &[usize]) -> Self {
        Self::new(name, Tensor::full(shape, 1.0))
    }

    /// Weight matrix `[out × in]` drawn from uniform(±1/√fan_in).
    pub fn weight(name: impl Into<String>, out_dim: usize, in_dim: usize, rng: &mut RngState) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        Self::new(name, Tensor::uniform(&[out_dim, in_dim], bound, rng))
    }

    pub fn zero_grad(&mut self) {
        self.grad.data_mut().fill(0.0);
    }

    pub fn numel(&self) -> usize {
        self.value.len()
    }
}

/// Anything that owns learnable parameters, visited in a fixed order.
pub trait HasParams {
    fn params(&self) -> Vec<&ParamTensor>;
    fn params_mut(&mut self) -> Vec<&mut ParamTensor>;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.numel()).sum()
    }
}

/// Loose parameters, for checking single kernels.
#[derive(Clone, Debug, Default)]
pub struct ParamList(pub Vec<ParamTensor>);

impl HasParams for ParamList {
    fn params(&self) -> Vec<&ParamTensor> {
        self.0.iter().collect()
    }

    fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        self.0.iter_mut().collect()
    }
}
