//! The gradient self-check run by the `gradcheck` command: every kernel
//! over several seeds, then each model variant at toy widths.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::hexaco::Trait;
use crate::nn::{AblationMode, FusionModel, ModalityBatch, ModelConfig, ModelDims};
use crate::tensor::gradcheck::{grad_check, GradCheckOptions, GradReport, ParamReport};
use crate::tensor::{
    concat_lastdim, dropout, layernorm, layernorm_backward, linear, linear_backward, matmul, matmul_backward,
    mse_loss, mse_loss_backward, relu, relu_backward, softmax, softmax_backward, split_lastdim, HasParams, ParamList,
    ParamTensor, RngState, Tensor, LAYERNORM_EPS,
};

pub const KERNEL_TOL: f64 = 1e-5;
pub const MODEL_TOL: f64 = 1e-4;

/// Worst relative error per parameter for one component across seeds.
#[derive(Clone, Debug)]
pub struct ComponentCheck {
    pub component: String,
    pub cases: usize,
    pub tol: f64,
    pub params: Vec<ParamReport>,
}

impl ComponentCheck {
    fn from_reports(component: &str, tol: f64, reports: &[GradReport]) -> Self {
        let mut worst: BTreeMap<String, ParamReport> = BTreeMap::new();
        let mut order = Vec::new();
        for r in reports {
            for p in &r.params {
                match worst.get_mut(&p.name) {
                    Some(w) => w.max_rel_err = w.max_rel_err.max(p.max_rel_err),
                    None => {
                        order.push(p.name.clone());
                        worst.insert(p.name.clone(), p.clone());
                    }
                }
            }
        }
        Self {
            component: component.to_string(),
            cases: reports.len(),
            tol,
            params: order.into_iter().map(|n| worst.remove(&n).expect("present")).collect(),
        }
    }

    pub fn worst(&self) -> f64 {
        self.params.iter().map(|p| p.max_rel_err).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.worst() <= self.tol
    }
}

fn probe(out: &Tensor, r: &Tensor) -> f64 {
    out.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

fn plist(rng: &mut RngState, shapes: &[(&str, &[usize])]) -> ParamList {
    ParamList(
        shapes
            .iter()
            .map(|(n, s)| ParamTensor::new(*n, Tensor::randn(s, rng)))
            .collect(),
    )
}

fn opts() -> GradCheckOptions {
    GradCheckOptions::with_tol(KERNEL_TOL)
}

type Kernel = fn(u64) -> Result<GradReport>;

fn check_matmul(seed: u64) -> Result<GradReport> {
    let mut rng = RngState::new(seed);
    let mut ps = plist(&mut rng, &[("a", &[4, 5]), ("b", &[5, 3])]);
    let r = Tensor::randn(&[4, 3], &mut rng);
    grad_check(
        &mut ps,
        |ps| {
            let (a, b) = (&ps.0[0].value, &ps.0[1].value);
            let out = matmul(a, b)?;
            let (ga, gb) = matmul_backward(a, b, &r)?;
            ps.0[0].grad.add_assign(&ga)?;
            ps.0[1].grad.add_assign(&gb)?;
            Ok(probe(&out, &r))
        },
        opts(),
    )
}

fn check_linear(seed: u64) -> Result<GradReport> {
    let mut rng = RngState::new(seed);
    let mut ps = plist(&mut rng, &[("x", &[3, 4]), ("W", &[2, 4]), ("b", &[2])]);
    let r = Tensor::randn(&[3, 2], &mut rng);
    grad_check(
        &mut ps,
        |ps| {
            let out = linear(&ps.0[0].value, &ps.0[1].value, &ps.0[2].value)?;
            let (gx, gw, gb) = linear_backward(&ps.0[0].value, &ps.0[1].value, &r)?;
            ps.0[0].grad.add_assign(&gx)?;
            ps.0[1].grad.add_assign(&gw)?;
            ps.0[2].grad.add_assign(&gb)?;
            Ok(probe(&out, &r))
        },
        opts(),
    )
}

fn check_relu(seed: u64) -> Result<GradReport> {
    let mut rng = RngState::new(seed);
    // keep inputs off the kink, where the derivative is undefined
    let x = Tensor::randn(&[3, 4], &mut rng).map(|v| if v.abs() < 1e-3 { 0.5 } else { v });
    let mut ps = ParamList(vec![ParamTensor::new("x", x)]);
    let r = Tensor::randn(&[3, 4], &mut rng);
    grad_check(
        &mut ps,
        |ps| {
            let g = relu_backward(&ps.0[0].value, &r)?;
            let out = relu(&ps.0[0].value);
            ps.0[0].grad.add_assign(&g)?;
            Ok(probe(&out, &r))
        },
        opts(),
    )
}

fn check_softmax(seed: u64) -> Result<GradReport> {
    let mut rng = RngState::new(seed);
    let mut ps = plist(&mut rng, &[("x", &[3, 5])]);
    let r = Tensor::randn(&[3, 5], &mut rng);
    grad_check(
        &mut ps,
        |ps| {
            let y = softmax(&ps.0[0].value);
            ps.0[0].grad.add_assign(&softmax_backward(&y, &r)?)?;
            Ok(probe(&y, &r))
        },
        opts(),
    )
}

fn check_layernorm(seed: u64) -> Result<GradReport> {
    let mut rng = RngState::new(seed);
    let mut ps = plist(&mut rng, &[("x", &[2, 8]), ("gain", &[8]), ("bias", &[8])]);
    let r = Tensor::randn(&[2, 8], &mut rng);
    grad_check(
        &mut ps,
        |ps| {
            let (out, cache) = layernorm(&ps.0[0].value, &ps.0[1].value, &ps.0[2].value, LAYERNORM_EPS)?;
            let (gx, gg, gb) = layernorm_backward(&cache, &ps.0[1].value, &r)?;
            ps.0[0].grad.add_assign(&gx)?;
            ps.0[1].grad.add_assign(&gg)?;
            ps.0[2].grad.add_assign(&gb)?;
            Ok(probe(&out, &r))
        },
        opts(),
    )
}

fn check_concat(seed: u64) -> Result<GradReport> {
    let mut rng = RngState::new(seed);
    let mut ps = plist(&mut rng, &[("a", &[2, 2]), ("b", &[2, 3])]);
    let r = Tensor::randn(&[2, 5], &mut rng);
    grad_check(
        &mut ps,
        |ps| {
            let out = concat_lastdim(&[&ps.0[0].value, &ps.0[1].value])?;
            let parts = split_lastdim(&r, &[2, 3])?;
            ps.0[0].grad.add_assign(&parts[0])?;
            ps.0[1].grad.add_assign(&parts[1])?;
            Ok(probe(&out, &r))
        },
        opts(),
    )
}

fn check_dropout(seed: u64) -> Result<GradReport> {
    let mut rng = RngState::new(seed);
    let mut ps = plist(&mut rng, &[("x", &[3, 5])]);
    let r = Tensor::randn(&[3, 5], &mut rng);
    let mask_rng = rng.derive(1);
    grad_check(
        &mut ps,
        |ps| {
            let (y, mask) = dropout(&ps.0[0].value, 0.3, &mut mask_rng.clone(), true)?;
            ps.0[0].grad.add_assign(&mask.backward(&r))?;
            Ok(probe(&y, &r))
        },
        opts(),
    )
}

fn check_mse(seed: u64) -> Result<GradReport> {
    let mut rng = RngState::new(seed);
    let target = Tensor::randn(&[8], &mut rng);
    let mut ps = plist(&mut rng, &[("pred", &[8])]);
    grad_check(
        &mut ps,
        |ps| {
            let g = mse_loss_backward(&ps.0[0].value, &target)?;
            ps.0[0].grad.add_assign(&g)?;
            mse_loss(&ps.0[0].value, &target)
        },
        opts(),
    )
}

const KERNELS: [(&str, Kernel); 8] = [
    ("matmul", check_matmul),
    ("linear", check_linear),
    ("relu", check_relu),
    ("softmax", check_softmax),
    ("layernorm", check_layernorm),
    ("concat/split", check_concat),
    ("dropout", check_dropout),
    ("mse", check_mse),
];

pub fn kernel_suite(seeds: u64) -> Result<Vec<ComponentCheck>> {
    KERNELS
        .iter()
        .enumerate()
        .map(|(k, (name, f))| {
            let reports = (0..seeds).map(|s| f(1000 * k as u64 + s)).collect::<Result<Vec<_>>>()?;
            Ok(ComponentCheck::from_reports(name, KERNEL_TOL, &reports))
        })
        .collect()
}

/// Toy widths small enough for element-wise finite differences.
pub fn gradcheck_config(mode: AblationMode) -> ModelConfig {
    let dims = ModelDims {
        text_dim: 12,
        audio_dim: 9,
        video_dim: 6,
        text_chunks: 3,
        audio_chunks: 3,
        video_chunks: 2,
        chunk_hidden: 4,
        chunk_out: 3,
        latent_dim: 4,
        heads: 2,
        ensemble_size: 3,
        head_hidden: [3, 2],
        ..ModelDims::default()
    };
    ModelConfig::from_dims(&dims, Trait::A)
        .expect("toy dims are valid")
        .with_variant(mode)
}

/// Whole-model check with batch 2 in eval mode; biases are jittered so no
/// ReLU input sits exactly on the kink.
pub fn model_check(mode: AblationMode, seed: u64) -> Result<GradReport> {
    let cfg = gradcheck_config(mode);
    let mut rng = RngState::new(seed);
    let mut model = FusionModel::new(&cfg, &mut rng)?;
    for p in model.params_mut() {
        if p.name.ends_with(".b") {
            p.value = Tensor::randn(p.value.shape(), &mut rng).scale(0.1);
        }
    }
    let (dt, da, dv) = cfg.input_dims();
    let batch = ModalityBatch {
        text: Tensor::randn(&[2, dt], &mut rng),
        audio: Tensor::randn(&[2, da], &mut rng),
        video: Tensor::randn(&[2, dv], &mut rng),
    };
    let target = Tensor::vector(vec![2.5, 4.0])?;
    grad_check(
        &mut model,
        |m| {
            let (y, cache) = m.forward(&batch, &mut RngState::new(0), false)?;
            m.backward(&cache, &mse_loss_backward(&y, &target)?)?;
            mse_loss(&y, &target)
        },
        GradCheckOptions::with_tol(MODEL_TOL),
    )
}

pub fn model_suite(modes: &[AblationMode], seeds: u64) -> Result<Vec<ComponentCheck>> {
    modes
        .iter()
        .map(|&mode| {
            let reports = (0..seeds).map(|s| model_check(mode, s)).collect::<Result<Vec<_>>>()?;
            Ok(ComponentCheck::from_reports(&format!("model/{mode}"), MODEL_TOL, &reports))
        })
        .collect()
}

/// Kernels over `kernel_seeds` seeds, then every model variant.
pub fn gradient_suite(kernel_seeds: u64, model_seeds: u64) -> Result<Vec<ComponentCheck>> {
    let mut out = kernel_suite(kernel_seeds)?;
    out.extend(model_suite(&AblationMode::ALL, model_seeds)?);
    Ok(out)
}
