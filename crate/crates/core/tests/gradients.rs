//! Analytic gradients against central differences.

use traitfuse::nn::{AblationMode, FusionModel, ModalityBatch, ModelConfig, ModelDims};
use traitfuse::tensor::gradcheck::{grad_check, GradCheckOptions, GradReport};
use traitfuse::tensor::{
    concat_lastdim, dropout, layernorm, layernorm_backward, matmul, matmul_backward, mse_loss, mse_loss_backward,
    relu, relu_backward, softmax, softmax_backward, split_lastdim, HasParams, ParamList, ParamTensor, RngState,
    Tensor, LAYERNORM_EPS,
};
use traitfuse::Trait;

const SEEDS: u64 = 10;

fn param(name: &str, t: Tensor) -> ParamTensor {
    ParamTensor::new(name, t)
}

/// Scalar probe `Σ out ⊙ r`, whose upstream gradient is `r`.
fn probe(out: &Tensor, r: &Tensor) -> f64 {
    out.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

fn assert_pass(report: &GradReport, what: &str) {
    assert!(report.passed(), "{what}: {:#?}", report.params);
}

#[test]
fn matmul_gradients() {
    for seed in 0..SEEDS {
        let mut rng = RngState::new(seed);
        let mut ps = ParamList(vec![
            param("a", Tensor::randn(&[4, 5], &mut rng)),
            param("b", Tensor::randn(&[5, 2], &mut rng)),
        ]);
        let r = Tensor::randn(&[4, 2], &mut rng);
        let report = grad_check(
            &mut ps,
            |ps| {
                let (a, b) = (&ps.0[0].value, &ps.0[1].value);
                let out = matmul(a, b)?;
                let (ga, gb) = matmul_backward(a, b, &r)?;
                ps.0[0].grad.add_assign(&ga)?;
                ps.0[1].grad.add_assign(&gb)?;
                Ok(probe(&out, &r))
            },
            GradCheckOptions::with_tol(1e-6),
        )
        .unwrap();
        assert_pass(&report, "matmul");
    }
}

#[test]
fn relu_gradients_away_from_kink() {
    for seed in 0..SEEDS {
        let mut rng = RngState::new(100 + seed);
        let x = Tensor::randn(&[3, 3], &mut rng).map(|v| if v.abs() < 1e-3 { 0.5 } else { v });
        let mut ps = ParamList(vec![param("x", x)]);
        let r = Tensor::randn(&[3, 3], &mut rng);
        let report = grad_check(
            &mut ps,
            |ps| {
                let x = &ps.0[0].value;
                let g = relu_backward(x, &r)?;
                let out = relu(x);
                ps.0[0].grad.add_assign(&g)?;
                Ok(probe(&out, &r))
            },
            GradCheckOptions::with_tol(1e-6),
        )
        .unwrap();
        assert_pass(&report, "relu");
    }
}

#[test]
fn layernorm_gradients() {
    for seed in 0..SEEDS {
        let mut rng = RngState::new(200 + seed);
        let mut ps = ParamList(vec![
            param("x", Tensor::randn(&[2, 8], &mut rng)),
            param("gain", Tensor::randn(&[8], &mut rng)),
            param("bias", Tensor::randn(&[8], &mut rng)),
        ]);
        let r = Tensor::randn(&[2, 8], &mut rng);
        let report = grad_check(
            &mut ps,
            |ps| {
                let (out, cache) = layernorm(&ps.0[0].value, &ps.0[1].value, &ps.0[2].value, LAYERNORM_EPS)?;
                let (gx, gg, gb) = layernorm_backward(&cache, &ps.0[1].value, &r)?;
                ps.0[0].grad.add_assign(&gx)?;
                ps.0[1].grad.add_assign(&gg)?;
                ps.0[2].grad.add_assign(&gb)?;
                Ok(probe(&out, &r))
            },
            GradCheckOptions::with_tol(1e-5),
        )
        .unwrap();
        assert_pass(&report, "layernorm");
    }
}

#[test]
fn softmax_gradients() {
    for seed in 0..SEEDS {
        let mut rng = RngState::new(300 + seed);
        let mut ps = ParamList(vec![param("x", Tensor::randn(&[3, 4], &mut rng))]);
        let r = Tensor::randn(&[3, 4], &mut rng);
        let report = grad_check(
            &mut ps,
            |ps| {
                let y = softmax(&ps.0[0].value);
                let g = softmax_backward(&y, &r)?;
                ps.0[0].grad.add_assign(&g)?;
                Ok(probe(&y, &r))
            },
            GradCheckOptions::with_tol(1e-6),
        )
        .unwrap();
        assert_pass(&report, "softmax");
    }
}

#[test]
fn concat_split_gradients() {
    for seed in 0..SEEDS {
        let mut rng = RngState::new(400 + seed);
        let mut ps = ParamList(vec![
            param("a", Tensor::randn(&[2, 2], &mut rng)),
            param("b", Tensor::randn(&[2, 3], &mut rng)),
        ]);
        let r = Tensor::randn(&[2, 5], &mut rng);
        let report = grad_check(
            &mut ps,
            |ps| {
                let out = concat_lastdim(&[&ps.0[0].value, &ps.0[1].value])?;
                let parts = split_lastdim(&r, &[2, 3])?;
                ps.0[0].grad.add_assign(&parts[0])?;
                ps.0[1].grad.add_assign(&parts[1])?;
                Ok(probe(&out, &r))
            },
            GradCheckOptions::with_tol(1e-6),
        )
        .unwrap();
        assert_pass(&report, "concat");
    }
}

#[test]
fn dropout_gradients_with_fixed_mask() {
    for seed in 0..SEEDS {
        let mut rng = RngState::new(500 + seed);
        let mut ps = ParamList(vec![param("x", Tensor::randn(&[3, 5], &mut rng))]);
        let r = Tensor::randn(&[3, 5], &mut rng);
        let mask_rng = rng.derive(1);
        let report = grad_check(
            &mut ps,
            |ps| {
                let (y, mask) = dropout(&ps.0[0].value, 0.3, &mut mask_rng.clone(), true)?;
                ps.0[0].grad.add_assign(&mask.backward(&r))?;
                Ok(probe(&y, &r))
            },
            GradCheckOptions::with_tol(1e-6),
        )
        .unwrap();
        assert_pass(&report, "dropout");
    }
}

#[test]
fn mse_gradients() {
    for seed in 0..SEEDS {
        let mut rng = RngState::new(600 + seed);
        let target = Tensor::randn(&[8], &mut rng);
        let mut ps = ParamList(vec![param("pred", Tensor::randn(&[8], &mut rng))]);
        let report = grad_check(
            &mut ps,
            |ps| {
                let g = mse_loss_backward(&ps.0[0].value, &target)?;
                ps.0[0].grad.add_assign(&g)?;
                mse_loss(&ps.0[0].value, &target)
            },
            GradCheckOptions::with_tol(1e-7),
        )
        .unwrap();
        assert_pass(&report, "mse");
    }
}

#[test]
fn layernorm_mse_composite() {
    let mut rng = RngState::new(700);
    let target = Tensor::randn(&[3, 6], &mut rng);
    let mut ps = ParamList(vec![
        param("x", Tensor::randn(&[3, 6], &mut rng)),
        param("gain", Tensor::randn(&[6], &mut rng)),
        param("bias", Tensor::randn(&[6], &mut rng)),
    ]);
    let report = grad_check(
        &mut ps,
        |ps| {
            let (y, cache) = layernorm(&ps.0[0].value, &ps.0[1].value, &ps.0[2].value, LAYERNORM_EPS)?;
            let (y, target) = (y.reshape(&[18])?, target.clone().reshape(&[18])?);
            let g = mse_loss_backward(&y, &target)?.reshape(&[3, 6])?;
            let (gx, gg, gb) = layernorm_backward(&cache, &ps.0[1].value, &g)?;
            ps.0[0].grad.add_assign(&gx)?;
            ps.0[1].grad.add_assign(&gg)?;
            ps.0[2].grad.add_assign(&gb)?;
            mse_loss(&y, &target)
        },
        GradCheckOptions::with_tol(1e-5),
    )
    .unwrap();
    assert_pass(&report, "layernorm+mse");
}

fn tiny_config(mode: AblationMode) -> ModelConfig {
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
    ModelConfig::from_dims(&dims, Trait::A).unwrap().with_variant(mode)
}

fn model_report(mode: AblationMode, seed: u64) -> GradReport {
    let cfg = tiny_config(mode);
    let mut rng = RngState::new(seed);
    let mut model = FusionModel::new(&cfg, &mut rng).unwrap();
    // zero-initialised biases can park dead ReLUs exactly on the kink
    for p in model.params_mut() {
        if p.name.ends_with(".b") {
            p.value = Tensor::randn(p.value.shape(), &mut rng).scale(0.1);
        }
    }
    let batch = ModalityBatch {
        text: Tensor::randn(&[2, 12], &mut rng),
        audio: Tensor::randn(&[2, 9], &mut rng),
        video: Tensor::randn(&[2, 6], &mut rng),
    };
    let target = Tensor::vector(vec![2.5, 4.0]).unwrap();
    grad_check(
        &mut model,
        |m| {
            let mut rng = RngState::new(0);
            let (y, cache) = m.forward(&batch, &mut rng, false)?;
            let g = mse_loss_backward(&y, &target)?;
            m.backward(&cache, &g)?;
            mse_loss(&y, &target)
        },
        GradCheckOptions::with_tol(1e-4),
    )
    .unwrap()
}

#[test]
fn full_model_gradients() {
    for seed in 0..3 {
        let report = model_report(AblationMode::Full, seed);
        assert_pass(&report, "full model");
        assert!(report.params.iter().any(|p| p.name.starts_with("cmc.audio")));
        assert!(report.params.iter().any(|p| p.name.starts_with("tfe.gate")));
    }
}

#[test]
fn ablation_variant_gradients() {
    for mode in AblationMode::ALL {
        let report = model_report(mode, 42);
        assert_pass(&report, mode.as_str());
    }
}

#[test]
fn model_params_are_all_checked() {
    let cfg = tiny_config(AblationMode::Full);
    let model = FusionModel::new(&cfg, &mut RngState::new(1)).unwrap();
    let report = model_report(AblationMode::Full, 1);
    assert_eq!(report.params.len(), model.params().len());
}
