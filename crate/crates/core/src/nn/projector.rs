//! Chunk-wise projector: split the feature vector into equal chunks,
//! project each through its own small feedforward block, concatenate.

use super::config::ChunkProjectorConfig;
use super::linear::{Linear, Norm};
use crate::error::{Error, Result};
use crate::tensor::{
    concat_lastdim, dropout, relu, relu_backward, split_lastdim, DropoutMask, LayerNormCache,
    ParamTensor, RngState, Tensor,
};

#[derive(Clone, Debug)]
struct ChunkBlock {
    fc1: Linear,
    fc2: Linear,
    norm: Norm,
}

#[derive(Clone, Debug)]
pub struct ChunkProjector {
    cfg: ChunkProjectorConfig,
    blocks: Vec<ChunkBlock>,
}

#[derive(Debug)]
struct ChunkCache {
    input: Tensor,
    hidden_pre: Tensor,
    hidden: Tensor,
    out_pre: Tensor,
    norm: LayerNormCache,
    mask: DropoutMask,
}

#[derive(Debug)]
pub struct ChunkProjectorCache {
    chunks: Vec<ChunkCache>,
}

impl ChunkProjector {
    pub fn new(name: &str, cfg: &ChunkProjectorConfig, rng: &mut RngState) -> Result<Self> {
        cfg.validate(name)?;
        let d = cfg.chunk_dim();
        let blocks = (0..cfg.num_chunks)
            .map(|i| {
                let prefix = format!("{name}.chunk{i}");
                ChunkBlock {
                    fc1: Linear::new(&format!("{prefix}.fc1"), d, cfg.hidden_dim, rng),
                    fc2: Linear::new(&format!("{prefix}.fc2"), cfg.hidden_dim, cfg.chunk_out_dim, rng),
                    norm: Norm::new(&format!("{prefix}.ln"), cfg.chunk_out_dim),
                }
            })
            .collect();
        Ok(Self {
            cfg: cfg.clone(),
            blocks,
        })
    }

    pub fn config(&self) -> &ChunkProjectorConfig {
        &self.cfg
    }

    pub fn forward(&self, x: &Tensor, rng: &mut RngState, training: bool) -> Result<(Tensor, ChunkProjectorCache)> {
        if x.cols() != self.cfg.input_dim {
            return Err(Error::shape("chunk_project", x.shape(), &[self.cfg.input_dim]));
        }
        let sizes = vec![self.cfg.chunk_dim(); self.cfg.num_chunks];
        let inputs = split_lastdim(x, &sizes)?;
        let mut outputs = Vec::with_capacity(inputs.len());
        let mut caches = Vec::with_capacity(inputs.len());
        for (block, input) in self.blocks.iter().zip(inputs) {
            let hidden_pre = block.fc1.forward(&input)?;
            let hidden = relu(&hidden_pre);
            let out_pre = block.fc2.forward(&hidden)?;
            let activated = if self.cfg.outer_relu {
                relu(&out_pre)
            } else {
                out_pre.clone()
            };
            let (normed, norm) = block.norm.forward(&activated)?;
            let (out, mask) = dropout(&normed, self.cfg.dropout, rng, training)?;
            outputs.push(out);
            caches.push(ChunkCache {
                input,
                hidden_pre,
                hidden,
                out_pre,
                norm,
                mask,
            });
        }
        let out = concat_lastdim(&outputs.iter().collect::<Vec<_>>())?;
        Ok((out, ChunkProjectorCache { chunks: caches }))
    }

    pub fn backward(&mut self, cache: &ChunkProjectorCache, g: &Tensor) -> Result<Tensor> {
        let sizes = vec![self.cfg.chunk_out_dim; self.cfg.num_chunks];
        let grads = split_lastdim(g, &sizes)?;
        let mut input_grads = Vec::with_capacity(grads.len());
        for ((block, c), g) in self.blocks.iter_mut().zip(&cache.chunks).zip(grads) {
            let g = c.mask.backward(&g);
            let g = block.norm.backward(&c.norm, &g)?;
            let g = if self.cfg.outer_relu {
                relu_backward(&c.out_pre, &g)?
            } else {
                g
            };
            let g = block.fc2.backward(&c.hidden, &g)?;
            let g = relu_backward(&c.hidden_pre, &g)?;
            input_grads.push(block.fc1.backward(&c.input, &g)?);
        }
        concat_lastdim(&input_grads.iter().collect::<Vec<_>>())
    }

    pub fn params(&self) -> Vec<&ParamTensor> {
        self.blocks
            .iter()
            .flat_map(|b| b.fc1.params().into_iter().chain(b.fc2.params()).chain(b.norm.params()))
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut ParamTensor> {
        self.blocks
            .iter_mut()
            .flat_map(|b| {
                b.fc1
                    .params_mut()
                    .into_iter()
                    .chain(b.fc2.params_mut())
                    .chain(b.norm.params_mut())
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{linear, layernorm, LAYERNORM_EPS};

    fn cfg(n: usize) -> ChunkProjectorConfig {
        ChunkProjectorConfig {
            input_dim: 8,
            num_chunks: n,
            hidden_dim: 5,
            chunk_out_dim: 3,
            dropout: 0.2,
            outer_relu: true,
        }
    }

    fn input(rng: &mut RngState) -> Tensor {
        Tensor::randn(&[2, 8], rng)
    }

    #[test]
    fn output_width() {
        let mut rng = RngState::new(1);
        let p = ChunkProjector::new("cwp", &cfg(2), &mut rng).unwrap();
        let (y, _) = p.forward(&input(&mut rng), &mut rng, false).unwrap();
        assert_eq!(y.shape(), &[2, 6]);
    }

    #[test]
    fn chunk_local() {
        let mut rng = RngState::new(2);
        let p = ChunkProjector::new("cwp", &cfg(2), &mut rng).unwrap();
        let x = input(&mut rng);
        let mut x2 = x.clone();
        // permute chunk 2 of each row
        for r in 0..2 {
            x2.row_mut(r)[4..8].reverse();
        }
        let (a, _) = p.forward(&x, &mut rng, false).unwrap();
        let (b, _) = p.forward(&x2, &mut rng, false).unwrap();
        for r in 0..2 {
            for j in 0..3 {
                assert_eq!(a.row(r)[j].to_bits(), b.row(r)[j].to_bits());
            }
        }
        assert_ne!(a.row(0)[3..], b.row(0)[3..]);
    }

    #[test]
    fn matches_straight_line_reimplementation() {
        let mut rng = RngState::new(3);
        let p = ChunkProjector::new("cwp", &cfg(2), &mut rng).unwrap();
        let x = input(&mut rng);
        let (y, _) = p.forward(&x, &mut rng, false).unwrap();
        for r in 0..2 {
            for (i, block) in p.blocks.iter().enumerate() {
                let chunk = Tensor::new(vec![1, 4], x.row(r)[i * 4..(i + 1) * 4].to_vec()).unwrap();
                // fc1
                let w1 = block.fc1.weight.value.data();
                let mut h = [0.0; 5];
                for (k, hk) in h.iter_mut().enumerate() {
                    let s: f64 = (0..4).map(|j| w1[k * 4 + j] * chunk.data()[j]).sum();
                    *hk = (s + block.fc1.bias.value.data()[k]).max(0.0);
                }
                let hidden = Tensor::new(vec![1, 5], h.to_vec()).unwrap();
                let z = linear(&hidden, &block.fc2.weight.value, &block.fc2.bias.value)
                    .unwrap()
                    .map(|v| v.max(0.0));
                let (n, _) = layernorm(&z, &block.norm.gain.value, &block.norm.bias.value, LAYERNORM_EPS).unwrap();
                for j in 0..3 {
                    let got = y.row(r)[i * 3 + j];
                    assert!((got - n.data()[j]).abs() < 1e-14, "{got} vs {}", n.data()[j]);
                }
            }
        }
    }

    #[test]
    fn single_chunk_is_plain_ffn() {
        let mut rng = RngState::new(4);
        let p = ChunkProjector::new("cwp", &cfg(1), &mut rng).unwrap();
        assert_eq!(p.blocks.len(), 1);
        assert_eq!(p.blocks[0].fc1.in_dim(), 8);
    }

    #[test]
    fn rejects_indivisible() {
        let bad = ChunkProjectorConfig {
            num_chunks: 3,
            ..cfg(1)
        };
        assert!(ChunkProjector::new("cwp", &bad, &mut RngState::new(0)).is_err());
    }
}
