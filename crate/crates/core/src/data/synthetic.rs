//! Seeded synthetic datasets with a planted teacher, for tests and smoke
//! runs where real interview features are unavailable.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::record::{Dataset, FeatureRecord, AUDIO, LABEL_MAX, LABEL_MIN, VIDEO};
use crate::error::{Error, Result};
use crate::hexaco::Trait;
use crate::prompt::SubjectMeta;
use crate::tensor::RngState;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Teacher {
    /// Label is a linear function of the planted projections.
    #[default]
    Linear,
    /// Text decides, through a sigmoid gate, how much audio versus video
    /// contributes.
    PlantedGate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n: usize,
    pub text_dim: usize,
    pub audio_dim: usize,
    pub video_dim: usize,
    /// Planted projection width per modality.
    pub latent: usize,
    pub teacher: Teacher,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n: 256,
            text_dim: 16,
            audio_dim: 12,
            video_dim: 8,
            latent: 4,
            teacher: Teacher::Linear,
            noise_std: 0.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.text_dim == 0 || self.audio_dim == 0 || self.video_dim == 0 || self.latent == 0 {
            return Err(Error::Config("synthetic dims and latent width must be positive".into()));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Config(format!("noise std {} must be finite and >= 0", self.noise_std)));
        }
        Ok(())
    }
}

/// A block-local projection: latent `j` reads only the `j`-th contiguous
/// slice of the input.
#[derive(Clone, Debug)]
struct Projection {
    blocks: Vec<(usize, Vec<f64>)>,
}

impl Projection {
    fn new(dim: usize, latent: usize, rng: &mut RngState) -> Self {
        let k = latent.min(dim);
        let blocks = (0..k)
            .map(|j| {
                let (lo, hi) = (j * dim / k, (j + 1) * dim / k);
                let scale = 1.0 / ((hi - lo) as f64).sqrt();
                (lo, (lo..hi).map(|_| rng.normal() * scale).collect())
            })
            .collect();
        Self { blocks }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.blocks
            .iter()
            .map(|(lo, w)| w.iter().zip(&x[*lo..]).map(|(a, b)| a * b).sum())
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn coeffs(n: usize, scale: f64, rng: &mut RngState) -> Vec<f64> {
    (0..n).map(|_| rng.normal() * scale).collect()
}

struct TraitTeacher {
    text: Projection,
    audio: Projection,
    video: Projection,
    w_t: Vec<f64>,
    w_a: Vec<f64>,
    w_v: Vec<f64>,
    u: Vec<f64>,
}

impl TraitTeacher {
    fn new(spec: &SyntheticSpec, rng: &mut RngState) -> Self {
        let text = Projection::new(spec.text_dim, spec.latent, rng);
        let audio = Projection::new(spec.audio_dim, spec.latent, rng);
        let video = Projection::new(spec.video_dim, spec.latent, rng);
        let w_t = coeffs(text.blocks.len(), 1.0, rng);
        let w_a = coeffs(audio.blocks.len(), 1.0, rng);
        let w_v = coeffs(video.blocks.len(), 1.0, rng);
        let u = coeffs(text.blocks.len(), 1.5, rng);
        Self { text, audio, video, w_t, w_a, w_v, u }
    }

    fn score(&self, teacher: Teacher, t: &[f64], a: &[f64], v: &[f64]) -> f64 {
        let (zt, za, zv) = (self.text.apply(t), self.audio.apply(a), self.video.apply(v));
        match teacher {
            Teacher::Linear => dot(&self.w_t, &zt) + 0.5 * dot(&self.w_a, &za) + 0.5 * dot(&self.w_v, &zv),
            Teacher::PlantedGate => {
                let s = 1.0 / (1.0 + (-dot(&self.u, &zt)).exp());
                dot(&self.w_t, &zt) + s * dot(&self.w_a, &za) + (1.0 - s) * dot(&self.w_v, &zv)
            }
        }
    }
}

fn draw_features(dim: usize, rng: &mut RngState) -> Vec<f32> {
    (0..dim).map(|_| rng.normal() as f32).collect()
}

fn widen(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

/// Affine map of raw scores onto `[1, 5]` using their own min and max.
fn to_label_range(scores: &[f64]) -> Vec<f64> {
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mid = 0.5 * (LABEL_MIN + LABEL_MAX);
    scores
        .iter()
        .map(|&s| {
            if hi > lo {
                (LABEL_MIN + (LABEL_MAX - LABEL_MIN) * (s - lo) / (hi - lo)).clamp(LABEL_MIN, LABEL_MAX)
            } else {
                mid
            }
        })
        .collect()
}

const GENDERS: [&str; 2] = ["female", "male"];
const EDUCATION: [&str; 4] = ["high school", "bachelor's degree", "master's degree", "doctorate"];

/// Pure function of `spec`: standard-normal features (stored at f32),
/// labels from the teacher on a planted low-dimensional projection plus
/// noise, mapped into `[1, 5]`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let root = RngState::new(spec.seed);
    let mut teacher_rng = root.derive(1);
    let mut feature_rng = root.derive(2);
    let mut noise_rng = root.derive(3);
    let mut meta_rng = root.derive(4);

    let teachers: Vec<TraitTeacher> = Trait::ALL.iter().map(|_| TraitTeacher::new(spec, &mut teacher_rng)).collect();

    let mut records: Vec<FeatureRecord> = (0..spec.n)
        .map(|i| {
            let mut features = BTreeMap::new();
            for t in Trait::ALL {
                features.insert(t.text_feature().to_string(), draw_features(spec.text_dim, &mut feature_rng));
            }
            features.insert(AUDIO.to_string(), draw_features(spec.audio_dim, &mut feature_rng));
            features.insert(VIDEO.to_string(), draw_features(spec.video_dim, &mut feature_rng));
            let pick = |rng: &mut RngState, n: usize| ((rng.next_f64() * n as f64) as usize).min(n - 1);
            let meta = SubjectMeta {
                gender: Some(GENDERS[pick(&mut meta_rng, GENDERS.len())].to_string()),
                age: Some(20 + pick(&mut meta_rng, 41) as u32),
                education: Some(EDUCATION[pick(&mut meta_rng, EDUCATION.len())].to_string()),
                work_experience: Some(format!("{} years", pick(&mut meta_rng, 30))),
            };
            FeatureRecord {
                id: format!("syn-{i:05}"),
                meta,
                features,
                ..Default::default()
            }
        })
        .collect();

    if !records.is_empty() {
        for (t, teacher) in Trait::ALL.into_iter().zip(&teachers) {
            let scores: Vec<f64> = records
                .iter()
                .map(|r| {
                    let s = teacher.score(
                        spec.teacher,
                        &widen(&r.features[t.text_feature()]),
                        &widen(&r.features[AUDIO]),
                        &widen(&r.features[VIDEO]),
                    );
                    s + spec.noise_std * noise_rng.normal()
                })
                .collect();
            for (r, y) in records.iter_mut().zip(to_label_range(&scores)) {
                r.labels.insert(t, y);
            }
        }
    }
    Dataset::new(records)
}
