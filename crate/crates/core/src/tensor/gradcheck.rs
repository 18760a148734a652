//! Central-difference gradient oracle.

use super::{HasParams, Tensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct GradCheckOptions {
    /// Finite-difference step `h`.
    pub step: f64,
    /// Maximum relative error accepted per element.
    pub tol: f64,
    /// Denominator floor for the relative error, so that gradients that are
    /// zero up to rounding do not blow up the ratio.
    pub floor: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            tol: 1e-5,
            floor: 1e-4,
        }
    }
}

impl GradCheckOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct ParamReport {
    pub name: String,
    pub numel: usize,
    pub max_rel_err: f64,
}

#[derive(Clone, Debug)]
pub struct GradReport {
    pub params: Vec<ParamReport>,
    pub tol: f64,
}

impl GradReport {
    pub fn worst(&self) -> f64 {
        self.params.iter().map(|p| p.max_rel_err).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.params.iter().all(|p| p.max_rel_err <= self.tol)
    }
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares the gradients `f` accumulates into `model`'s parameters against
/// `(f(θ+h) − f(θ−h)) / 2h` for every parameter element.
///
/// `f` must return the scalar loss and accumulate (not overwrite) gradients.
/// It is called twice at the unperturbed point; differing results are
/// rejected as non-deterministic.
pub fn grad_check<M, F>(model: &mut M, mut f: F, opts: GradCheckOptions) -> Result<GradReport>
where
    M: HasParams,
    F: FnMut(&mut M) -> Result<f64>,
{
    model.zero_grad();
    let first = f(model)?;
    let analytic: Vec<Tensor> = model.params().iter().map(|p| p.grad.clone()).collect();
    model.zero_grad();
    let second = f(model)?;
    if first.to_bits() != second.to_bits() {
        return Err(Error::NonDeterministic { first, second });
    }

    let names: Vec<(String, usize)> = model
        .params()
        .iter()
        .map(|p| (p.name.clone(), p.numel()))
        .collect();
    let mut reports = Vec::with_capacity(names.len());
    for (pi, (name, numel)) in names.into_iter().enumerate() {
        let mut worst = 0.0f64;
        for e in 0..numel {
            let orig = model.params()[pi].value.data()[e];
            set_element(model, pi, e, orig + opts.step);
            let plus = f(model)?;
            set_element(model, pi, e, orig - opts.step);
            let minus = f(model)?;
            set_element(model, pi, e, orig);
            let numeric = (plus - minus) / (2.0 * opts.step);
            let rel = relative_error(analytic[pi].data()[e], numeric, opts.floor);
            worst = worst.max(if rel.is_nan() { f64::INFINITY } else { rel });
        }
        reports.push(ParamReport {
            name,
            numel,
            max_rel_err: worst,
        });
    }

    for (p, g) in model.params_mut().into_iter().zip(analytic) {
        p.grad = g;
    }
    Ok(GradReport {
        params: reports,
        tol: opts.tol,
    })
}

fn set_element<M: HasParams>(model: &mut M, param: usize, element: usize, value: f64) {
    model.params_mut()[param].value.data_mut()[element] = value;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{ParamList, ParamTensor};

    fn dot_model() -> (ParamList, Vec<f64>) {
        let w = ParamTensor::new("w", Tensor::vector(vec![0.3, -1.2, 2.0]).unwrap());
        (ParamList(vec![w]), vec![1.5, 0.5, -2.0])
    }

    #[test]
    fn linear_model_exact() {
        // loss = (w·x)^2 / 2, grad = (w·x) x
        let (mut m, x) = dot_model();
        let report = grad_check(
            &mut m,
            |m| {
                let w = &mut m.0[0];
                let y: f64 = w.value.data().iter().zip(&x).map(|(a, b)| a * b).sum();
                for (g, xi) in w.grad.data_mut().iter_mut().zip(&x) {
                    *g += y * xi;
                }
                Ok(0.5 * y * y)
            },
            GradCheckOptions::with_tol(1e-9),
        )
        .unwrap();
        assert!(report.passed(), "{report:?}");
        assert!(report.worst() < 1e-9);
    }

    #[test]
    fn corrupted_gradient_fails() {
        let (mut m, x) = dot_model();
        let report = grad_check(
            &mut m,
            |m| {
                let w = &mut m.0[0];
                let y: f64 = w.value.data().iter().zip(&x).map(|(a, b)| a * b).sum();
                for (g, xi) in w.grad.data_mut().iter_mut().zip(&x) {
                    *g += 1.01 * y * xi;
                }
                Ok(0.5 * y * y)
            },
            GradCheckOptions::default(),
        )
        .unwrap();
        assert!(!report.passed());
    }

    #[test]
    fn nondeterministic_rejected() {
        let (mut m, _) = dot_model();
        let mut calls = 0.0;
        let err = grad_check(
            &mut m,
            |_| {
                calls += 1.0;
                Ok(calls)
            },
            GradCheckOptions::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonDeterministic { .. }));
    }
}
