use crate::error::{Error, Result};
use crate::tensor::{HasParams, Tensor};

/// Exponential moving average of a model's parameters.
#[derive(Clone, Debug)]
pub struct EmaState {
    shadow: Vec<Tensor>,
    decay: f64,
}

impl EmaState {
    /// Shadow starts as a copy of the current parameters.
    pub fn new(model: &impl HasParams, decay: f64) -> Self {
        Self {
            shadow: model.params().iter().map(|p| p.value.clone()).collect(),
            decay,
        }
    }

    pub fn from_shadow(shadow: Vec<Tensor>, decay: f64) -> Self {
        Self { shadow, decay }
    }

    pub fn shadow(&self) -> &[Tensor] {
        &self.shadow
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    fn check(&self, model: &impl HasParams) -> Result<()> {
        let params = model.params();
        if params.len() != self.shadow.len() {
            return Err(Error::Size {
                op: "ema",
                msg: format!("{} parameters but {} shadow tensors", params.len(), self.shadow.len()),
            });
        }
        for (p, s) in params.iter().zip(&self.shadow) {
            if p.value.shape() != s.shape() {
                return Err(Error::shape("ema", p.value.shape(), s.shape()));
            }
        }
        Ok(())
    }

    /// `shadow ← decay·shadow + (1 − decay)·params`.
    pub fn update(&mut self, model: &impl HasParams) -> Result<()> {
        self.check(model)?;
        let (d, r) = (self.decay, 1.0 - self.decay);
        for (s, p) in self.shadow.iter_mut().zip(model.params()) {
            for (a, &b) in s.data_mut().iter_mut().zip(p.value.data()) {
                *a = d * *a + r * b;
            }
        }
        Ok(())
    }

    /// Exchanges shadow and live values; calling twice restores both.
    pub fn swap(&mut self, model: &mut impl HasParams) -> Result<()> {
        self.check(model)?;
        for (s, p) in self.shadow.iter_mut().zip(model.params_mut()) {
            std::mem::swap(s, &mut p.value);
        }
        Ok(())
    }

    /// Runs `f` with the shadow weights loaded, then puts the live weights back.
    pub fn with_shadow<M: HasParams, T>(&mut self, model: &mut M, f: impl FnOnce(&mut M) -> T) -> Result<T> {
        self.swap(model)?;
        let out = f(model);
        self.swap(model)?;
        Ok(out)
    }
}
