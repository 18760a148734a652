use super::{RngState, Tensor};
use crate::error::{Error, Result};

/// Per-element scale recorded by a dropout forward; `None` is the identity.
#[derive(Clone, Debug)]
pub struct DropoutMask(Option<Vec<f64>>);

impl DropoutMask {
    pub fn identity() -> Self {
        Self(None)
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_none()
    }

    pub fn backward(&self, g: &Tensor) -> Tensor {
        match &self.0 {
            None => g.clone(),
            Some(scale) => {
                let mut out = g.clone();
                out.data_mut().iter_mut().zip(scale).for_each(|(v, s)| *v *= s);
                out
            }
        }
    }
}

/// Inverted dropout: in training, zero with probability `p` and scale the
/// survivors by `1/(1-p)`. Eval mode and `p == 0` are the identity and
/// draw nothing from `rng`.
pub fn dropout(x: &Tensor, p: f64, rng: &mut RngState, training: bool) -> Result<(Tensor, DropoutMask)> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Config(format!("dropout probability {p} outside [0, 1)")));
    }
    if !training || p == 0.0 {
        return Ok((x.clone(), DropoutMask::identity()));
    }
    let keep = 1.0 / (1.0 - p);
    let scale: Vec<f64> = (0..x.len())
        .map(|_| if rng.next_f64() < p { 0.0 } else { keep })
        .collect();
    let mut out = x.clone();
    out.data_mut().iter_mut().zip(&scale).for_each(|(v, s)| *v *= s);
    Ok((out, DropoutMask(Some(scale))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_p_is_identity() {
        let x = Tensor::vector(vec![1.0, -2.0, 3.0]).unwrap();
        let mut rng = RngState::new(0);
        for training in [true, false] {
            let (y, mask) = dropout(&x, 0.0, &mut rng, training).unwrap();
            assert!(y.bitwise_eq(&x));
            assert!(mask.is_identity());
        }
    }

    #[test]
    fn eval_is_identity() {
        let x = Tensor::vector(vec![1.0, -2.0, 3.0]).unwrap();
        let (y, _) = dropout(&x, 0.3, &mut RngState::new(0), false).unwrap();
        assert!(y.bitwise_eq(&x));
    }

    #[test]
    fn rejects_p_one() {
        let x = Tensor::zeros(&[2]);
        assert!(dropout(&x, 1.0, &mut RngState::new(0), true).is_err());
        assert!(dropout(&x, -0.1, &mut RngState::new(0), true).is_err());
    }

    #[test]
    fn preserves_mean_in_expectation() {
        let x = Tensor::full(&[1_000_000], 1.0);
        let (y, _) = dropout(&x, 0.5, &mut RngState::new(11), true).unwrap();
        let mean = y.sum() / y.len() as f64;
        assert!((mean - 1.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn same_rng_same_mask() {
        let x = Tensor::full(&[64], 1.0);
        let (a, _) = dropout(&x, 0.4, &mut RngState::new(5), true).unwrap();
        let (b, _) = dropout(&x, 0.4, &mut RngState::new(5), true).unwrap();
        assert!(a.bitwise_eq(&b));
    }
}
