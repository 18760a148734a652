//! Dense row-major `f64` tensors and the handful of kernels the fusion
//! network needs. Every kernel has an analytic backward; `gradcheck`
//! verifies them against central differences.

mod dropout;
pub mod gradcheck;
mod layernorm;
mod ops;
mod param;
mod rng;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dropout::{dropout, DropoutMask};
pub use layernorm::{layernorm, layernorm_backward, LayerNormCache, LAYERNORM_EPS};
pub use ops::{
    concat_lastdim, linear, linear_backward, matmul, matmul_backward, mse_loss, mse_loss_backward,
    relu, relu_backward, softmax, softmax_backward, split_lastdim, transpose,
};
pub use param::{HasParams, ParamList, ParamTensor};
pub use rng::RngState;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if shape.iter().any(|&d| d == 0) || numel != data.len() {
            return Err(Error::Size {
                op: "tensor",
                msg: format!("shape {:?} does not hold {} elements", shape, data.len()),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        assert!(shape.iter().all(|&d| d > 0), "zero-sized dim in {shape:?}");
        let numel = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; numel],
        }
    }

    /// Builds a `[rows.len() × width]` matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let width = rows.first().map(Vec::len).unwrap_or(0);
        if let Some(bad) = rows.iter().find(|r| r.len() != width) {
            return Err(Error::Size {
                op: "from_rows",
                msg: format!("row of length {} in a matrix of width {}", bad.len(), width),
            });
        }
        Self::new(vec![rows.len(), width], rows.concat())
    }

    pub fn vector(data: Vec<f64>) -> Result<Self> {
        Self::new(vec![data.len()], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Size of the last dimension.
    pub fn cols(&self) -> usize {
        *self.shape.last().expect("tensor has at least one dim")
    }

    /// Number of rows when viewed as `[rows × last_dim]`.
    pub fn rows(&self) -> usize {
        self.data.len() / self.cols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn reshape(self, shape: &[usize]) -> Result<Self> {
        let numel: usize = shape.iter().product();
        if numel != self.data.len() || shape.iter().any(|&d| d == 0) {
            return Err(Error::shape("reshape", &self.shape, shape));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data: self.data,
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn add(&self, other: &Tensor) -> Result<Self> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn add_assign(&mut self, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::shape("add_assign", &self.shape, &other.shape));
        }
        self.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(a, b)| *a += b);
        Ok(())
    }

    pub fn mul(&self, other: &Tensor) -> Result<Self> {
        self.zip_with(other, "mul", |a, b| a * b)
    }

    pub fn scale(&self, k: f64) -> Self {
        self.map(|v| v * k)
    }

    fn zip_with(&self, other: &Tensor, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::shape(op, &self.shape, &other.shape));
        }
        Ok(Self {
            shape: self.shape.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Largest absolute elementwise difference. Shapes must match.
    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Bitwise equality, distinguishing `0.0` from `-0.0`.
    pub fn bitwise_eq(&self, other: &Tensor) -> bool {
        self.shape == other.shape
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }

    /// Uniform(−bound, bound) draws.
    pub fn uniform(shape: &[usize], bound: f64, rng: &mut RngState) -> Self {
        let mut t = Self::zeros(shape);
        for v in t.data.iter_mut() {
            *v = rng.uniform(-bound, bound);
        }
        t
    }

    pub fn randn(shape: &[usize], rng: &mut RngState) -> Self {
        let mut t = Self::zeros(shape);
        for v in t.data.iter_mut() {
            *v = rng.normal();
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_rejects_wrong_length() {
        assert!(Tensor::new(vec![2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::new(vec![0], vec![]).is_err());
        assert!(Tensor::new(vec![2, 3], vec![0.0; 6]).is_ok());
    }

    #[test]
    fn rows_and_cols() {
        let t = Tensor::new(vec![2, 3, 4], (0..24).map(f64::from).collect()).unwrap();
        assert_eq!(t.cols(), 4);
        assert_eq!(t.rows(), 6);
        assert_eq!(t.row(5), &[20.0, 21.0, 22.0, 23.0]);
    }

    #[test]
    fn reshape_checks_numel() {
        let t = Tensor::zeros(&[2, 3]);
        assert!(t.clone().reshape(&[3, 2]).is_ok());
        let err = t.reshape(&[4, 2]).unwrap_err().to_string();
        assert!(err.contains("[2, 3]") && err.contains("[4, 2]"), "{err}");
    }
}
