//! Ensemble regression head: the mean of independent three-layer MLPs.

use super::linear::Linear;
use crate::error::Result;
use crate::tensor::{relu, relu_backward, ParamTensor, RngState, Tensor};

#[derive(Clone, Debug)]
pub struct SubNet {
    pub fc1: Linear,
    pub fc2: Linear,
    pub fc3: Linear,
}

#[derive(Clone, Debug)]
pub struct EnsembleHead {
    subnets: Vec<SubNet>,
}

#[derive(Debug)]
struct SubNetCache {
    a1: Tensor,
    h1: Tensor,
    a2: Tensor,
    h2: Tensor,
}

#[derive(Debug)]
pub struct HeadCache {
    input: Tensor,
    subnets: Vec<SubNetCache>,
}

impl EnsembleHead {
    pub fn new(name: &str, in_dim: usize, hidden: [usize; 2], size: usize, rng: &mut RngState) -> Self {
        let subnets = (0..size.max(1))
            .map(|i| SubNet {
                fc1: Linear::new(&format!("{name}.sub{i}.fc1"), in_dim, hidden[0], rng),
                fc2: Linear::new(&format!("{name}.sub{i}.fc2"), hidden[0], hidden[1], rng),
                fc3: Linear::new(&format!("{name}.sub{i}.fc3"), hidden[1], 1, rng),
            })
            .collect();
        Self { subnets }
    }

    pub fn size(&self) -> usize {
        self.subnets.len()
    }

    pub fn in_dim(&self) -> usize {
        self.subnets[0].fc1.in_dim()
    }

    pub fn subnets(&self) -> &[SubNet] {
        &self.subnets
    }

    pub fn subnets_mut(&mut self) -> &mut [SubNet] {
        &mut self.subnets
    }

    /// Output of one sub-network, `[B]`.
    pub fn subnet_forward(&self, index: usize, x: &Tensor) -> Result<Tensor> {
        let s = &self.subnets[index];
        let h1 = relu(&s.fc1.forward(x)?);
        let h2 = relu(&s.fc2.forward(&h1)?);
        s.fc3.forward(&h2)?.reshape(&[x.rows()])
    }

    /// `[B × in] → [B]`, mean over sub-networks.
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, HeadCache)> {
        let batch = x.rows();
        // incremental mean: exact when every sub-network agrees
        let mut mean = vec![0.0; batch];
        let mut caches = Vec::with_capacity(self.subnets.len());
        for (k, s) in self.subnets.iter().enumerate() {
            let a1 = s.fc1.forward(x)?;
            let h1 = relu(&a1);
            let a2 = s.fc2.forward(&h1)?;
            let h2 = relu(&a2);
            let y = s.fc3.forward(&h2)?;
            let k = (k + 1) as f64;
            mean.iter_mut().zip(y.data()).for_each(|(acc, v)| *acc += (v - *acc) / k);
            caches.push(SubNetCache { a1, h1, a2, h2 });
        }
        let out = Tensor::new(vec![batch], mean)?;
        Ok((
            out,
            HeadCache {
                input: x.clone(),
                subnets: caches,
            },
        ))
    }

    /// `g` is `[B]`; returns the grad w.r.t. the head input.
    pub fn backward(&mut self, cache: &HeadCache, g: &Tensor) -> Result<Tensor> {
        let m = self.subnets.len() as f64;
        let g_y = g.scale(1.0 / m).reshape(&[g.len(), 1])?;
        let mut g_x = Tensor::zeros(cache.input.shape());
        for (s, c) in self.subnets.iter_mut().zip(&cache.subnets) {
            let g2 = relu_backward(&c.a2, &s.fc3.backward(&c.h2, &g_y)?)?;
            let g1 = relu_backward(&c.a1, &s.fc2.backward(&c.h1, &g2)?)?;
            g_x.add_assign(&s.fc1.backward(&cache.input, &g1)?)?;
        }
        Ok(g_x)
    }

    pub fn params(&self) -> Vec<&ParamTensor> {
        self.subnets
            .iter()
            .flat_map(|s| s.fc1.params().into_iter().chain(s.fc2.params()).chain(s.fc3.params()))
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        self.subnets
            .iter_mut()
            .flat_map(|s| {
                s.fc1
                    .params_mut()
                    .into_iter()
                    .chain(s.fc2.params_mut())
                    .chain(s.fc3.params_mut())
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_subnets_equal_single() {
        let mut rng = RngState::new(5);
        let mut head = EnsembleHead::new("head", 6, [5, 3], 32, &mut rng);
        let first = head.subnets[0].clone();
        for s in head.subnets_mut() {
            *s = first.clone();
        }
        let x = Tensor::randn(&[4, 6], &mut rng);
        let (y, _) = head.forward(&x).unwrap();
        let single = head.subnet_forward(0, &x).unwrap();
        assert!(y.bitwise_eq(&single), "{y:?} vs {single:?}");
    }

    #[test]
    fn hand_set_mean_of_three() {
        let mut rng = RngState::new(6);
        let mut head = EnsembleHead::new("head", 2, [2, 2], 3, &mut rng);
        // subnet i: fc1 = I, fc2 = I, fc3 = [i+1, 0], all biases zero -> y = (i+1)·relu(x0)
        for (i, s) in head.subnets_mut().iter_mut().enumerate() {
            s.fc1.weight.value.data_mut().copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
            s.fc2.weight.value.data_mut().copy_from_slice(&[1.0, 0.0, 0.0, 1.0]);
            s.fc3.weight.value.data_mut().copy_from_slice(&[(i + 1) as f64, 0.0]);
            for l in [&mut s.fc1, &mut s.fc2, &mut s.fc3] {
                l.bias.value.data_mut().fill(0.0);
            }
        }
        let x = Tensor::from_rows(&[vec![0.5, 1.0], vec![-1.0, 2.0]]).unwrap();
        let (y, _) = head.forward(&x).unwrap();
        // mean of 1,2,3 = 2
        assert_eq!(y.data(), &[1.0, 0.0]);
    }
}
