use super::Tensor;
use crate::error::{Error, Result};

fn require_matrix(op: &'static str, t: &Tensor) -> Result<(usize, usize)> {
    match *t.shape() {
        [r, c] => Ok((r, c)),
        _ => Err(Error::Size {
            op,
            msg: format!("expected a matrix, got shape {:?}", t.shape()),
        }),
    }
}

/// `[m×k] · [k×n] → [m×n]`.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = require_matrix("matmul", a)?;
    let (k2, n) = require_matrix("matmul", b)?;
    if k != k2 {
        return Err(Error::shape("matmul", a.shape(), b.shape()));
    }
    let mut out = vec![0.0; m * n];
    let (ad, bd) = (a.data(), b.data());
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = ad[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &bd[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Tensor::new(vec![m, n], out)
}

/// Gradients of `matmul(a, b)` given the upstream gradient `g`.
pub fn matmul_backward(a: &Tensor, b: &Tensor, g: &Tensor) -> Result<(Tensor, Tensor)> {
    let ga = matmul(g, &transpose(b)?)?;
    let gb = matmul(&transpose(a)?, g)?;
    Ok((ga, gb))
}

pub fn transpose(a: &Tensor) -> Result<Tensor> {
    let (m, n) = require_matrix("transpose", a)?;
    let d = a.data();
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = d[i * n + j];
        }
    }
    Tensor::new(vec![n, m], out)
}

/// Affine map over the last dim: `y = x·Wᵀ + b` with `W: [out×in]`, `b: [out]`.
pub fn linear(x: &Tensor, weight: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (out_dim, in_dim) = require_matrix("linear", weight)?;
    if x.cols() != in_dim {
        return Err(Error::shape("linear", x.shape(), weight.shape()));
    }
    if bias.shape() != [out_dim] {
        return Err(Error::shape("linear", weight.shape(), bias.shape()));
    }
    let rows = x.rows();
    let (w, b) = (weight.data(), bias.data());
    let mut out = Vec::with_capacity(rows * out_dim);
    for r in 0..rows {
        let xr = x.row(r);
        for o in 0..out_dim {
            let wr = &w[o * in_dim..(o + 1) * in_dim];
            let dot: f64 = xr.iter().zip(wr).map(|(a, b)| a * b).sum();
            out.push(dot + b[o]);
        }
    }
    let mut shape = x.shape().to_vec();
    *shape.last_mut().unwrap() = out_dim;
    Tensor::new(shape, out)
}

/// Returns `(grad_x, grad_weight, grad_bias)` for [`linear`].
pub fn linear_backward(x: &Tensor, weight: &Tensor, g: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
    let (out_dim, in_dim) = require_matrix("linear_backward", weight)?;
    if g.cols() != out_dim || g.rows() != x.rows() || x.cols() != in_dim {
        return Err(Error::shape("linear_backward", x.shape(), g.shape()));
    }
    let w = weight.data();
    let mut gx = Tensor::zeros(x.shape());
    let mut gw = vec![0.0; out_dim * in_dim];
    let mut gb = vec![0.0; out_dim];
    for r in 0..x.rows() {
        let xr = x.row(r);
        let gr = g.row(r);
        let gxr = gx.row_mut(r);
        for (o, &go) in gr.iter().enumerate() {
            if go == 0.0 {
                continue;
            }
            gb[o] += go;
            let wr = &w[o * in_dim..(o + 1) * in_dim];
            let gwr = &mut gw[o * in_dim..(o + 1) * in_dim];
            for i in 0..in_dim {
                gxr[i] += go * wr[i];
                gwr[i] += go * xr[i];
            }
        }
    }
    Ok((
        gx,
        Tensor::new(vec![out_dim, in_dim], gw)?,
        Tensor::new(vec![out_dim], gb)?,
    ))
}

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

/// Passes `g` through where the forward input was strictly positive.
pub fn relu_backward(x: &Tensor, g: &Tensor) -> Result<Tensor> {
    if x.shape() != g.shape() {
        return Err(Error::shape("relu_backward", x.shape(), g.shape()));
    }
    let data = x
        .data()
        .iter()
        .zip(g.data())
        .map(|(&xv, &gv)| if xv > 0.0 { gv } else { 0.0 })
        .collect();
    Tensor::new(x.shape().to_vec(), data)
}

/// Softmax over the last dim, max-subtracted.
pub fn softmax(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    out
}

/// Vector–Jacobian product of softmax given its output `y`.
pub fn softmax_backward(y: &Tensor, g: &Tensor) -> Result<Tensor> {
    if y.shape() != g.shape() {
        return Err(Error::shape("softmax_backward", y.shape(), g.shape()));
    }
    let mut out = Tensor::zeros(y.shape());
    for r in 0..y.rows() {
        let (yr, gr) = (y.row(r), g.row(r));
        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
        for ((o, &yv), &gv) in out.row_mut(r).iter_mut().zip(yr).zip(gr) {
            *o = yv * (gv - dot);
        }
    }
    Ok(out)
}

pub fn concat_lastdim(parts: &[&Tensor]) -> Result<Tensor> {
    let first = parts.first().ok_or_else(|| Error::Size {
        op: "concat_lastdim",
        msg: "no tensors to concatenate".into(),
    })?;
    let lead = &first.shape()[..first.shape().len() - 1];
    for p in parts {
        if &p.shape()[..p.shape().len() - 1] != lead {
            return Err(Error::shape("concat_lastdim", first.shape(), p.shape()));
        }
    }
    let width: usize = parts.iter().map(|p| p.cols()).sum();
    let rows = first.rows();
    let mut data = Vec::with_capacity(rows * width);
    for r in 0..rows {
        for p in parts {
            data.extend_from_slice(p.row(r));
        }
    }
    let mut shape = lead.to_vec();
    shape.push(width);
    Tensor::new(shape, data)
}

pub fn split_lastdim(x: &Tensor, sizes: &[usize]) -> Result<Vec<Tensor>> {
    let total: usize = sizes.iter().sum();
    if total != x.cols() || sizes.contains(&0) {
        return Err(Error::Size {
            op: "split_lastdim",
            msg: format!("sizes {:?} do not partition last dim of {:?}", sizes, x.shape()),
        });
    }
    let lead = &x.shape()[..x.shape().len() - 1];
    let mut offset = 0;
    let mut parts = Vec::with_capacity(sizes.len());
    for &s in sizes {
        let mut data = Vec::with_capacity(x.rows() * s);
        for r in 0..x.rows() {
            data.extend_from_slice(&x.row(r)[offset..offset + s]);
        }
        let mut shape = lead.to_vec();
        shape.push(s);
        parts.push(Tensor::new(shape, data)?);
        offset += s;
    }
    Ok(parts)
}

pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(Error::shape("mse_loss", pred.shape(), target.shape()));
    }
    let n = pred.len() as f64;
    Ok(pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n)
}

pub fn mse_loss_backward(pred: &Tensor, target: &Tensor) -> Result<Tensor> {
    if pred.shape() != target.shape() {
        return Err(Error::shape("mse_loss_backward", pred.shape(), target.shape()));
    }
    let n = pred.len() as f64;
    pred.zip_with(target, "mse_loss_backward", |p, t| 2.0 * (p - t) / n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Tensor {
        Tensor::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn matmul_identity() {
        let out = matmul(&m(&[&[1.0, 0.0], &[0.0, 1.0]]), &m(&[&[3.0], &[4.0]])).unwrap();
        assert_eq!(out, m(&[&[3.0], &[4.0]]));
    }

    #[test]
    fn matmul_hand() {
        let out = matmul(&m(&[&[1.0, 2.0]]), &m(&[&[3.0], &[4.0]])).unwrap();
        assert_eq!(out.data(), &[11.0]);
    }

    #[test]
    fn matmul_shape_error_names_both() {
        let err = matmul(&Tensor::zeros(&[2, 3]), &Tensor::zeros(&[2, 3]))
            .unwrap_err()
            .to_string();
        assert!(err.contains("[2, 3]") && err.matches("[2, 3]").count() == 2, "{err}");
    }

    #[test]
    fn relu_values() {
        let x = Tensor::vector(vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn relu_all_negative() {
        let x = Tensor::vector(vec![-1.0, -0.5, -3.0]).unwrap();
        let g = Tensor::full(&[3], 1.0);
        assert_eq!(relu(&x).data(), &[0.0; 3]);
        assert_eq!(relu_backward(&x, &g).unwrap().data(), &[0.0; 3]);
    }

    #[test]
    fn softmax_symmetric() {
        let y = softmax(&Tensor::vector(vec![0.0, 0.0]).unwrap());
        assert_eq!(y.data(), &[0.5, 0.5]);
    }

    #[test]
    fn softmax_large_inputs() {
        let y = softmax(&Tensor::vector(vec![1000.0; 3]).unwrap());
        for v in y.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn split_concat_round_trip() {
        let x = Tensor::vector(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let parts = split_lastdim(&x, &[2, 2]).unwrap();
        assert_eq!(parts[0].data(), &[1.0, 2.0]);
        assert_eq!(parts[1].data(), &[3.0, 4.0]);
        let back = concat_lastdim(&parts.iter().collect::<Vec<_>>()).unwrap();
        assert_eq!(back, x);
        assert_eq!(split_lastdim(&x, &[4]).unwrap()[0], x);
    }

    #[test]
    fn split_rejects_bad_sizes() {
        let x = Tensor::zeros(&[2, 4]);
        assert!(split_lastdim(&x, &[2, 3]).is_err());
        assert!(concat_lastdim(&[&Tensor::zeros(&[2, 1]), &Tensor::zeros(&[3, 1])]).is_err());
    }

    #[test]
    fn mse_values() {
        let p = Tensor::vector(vec![1.0, 3.0]).unwrap();
        let t = Tensor::vector(vec![2.0, 3.0]).unwrap();
        assert_eq!(mse_loss(&p, &p).unwrap(), 0.0);
        assert_eq!(mse_loss(&p, &t).unwrap(), 0.5);
        assert!(mse_loss(&p, &Tensor::zeros(&[3])).is_err());
    }
}
