//! Feature records and the line-delimited dataset file.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hexaco::Trait;
use crate::nn::{ModalityBatch, ModelConfig};
use crate::prompt::SubjectMeta;
use crate::tensor::Tensor;

pub const LABEL_MIN: f64 = 1.0;
pub const LABEL_MAX: f64 = 5.0;
pub const AUDIO: &str = "audio";
pub const VIDEO: &str = "video";

/// One interview: labels, demographics and pre-extracted features.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FeatureRecord {
    pub id: String,
    pub labels: BTreeMap<Trait, f64>,
    pub meta: SubjectMeta,
    pub features: BTreeMap<String, Vec<f32>>,
    /// Which encoder produced each feature, when known.
    pub encoders: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct WireFeature {
    dim: usize,
    b64: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    encoder: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct WireRecord {
    id: String,
    #[serde(default)]
    labels: BTreeMap<Trait, f64>,
    #[serde(default)]
    meta: SubjectMeta,
    features: BTreeMap<String, WireFeature>,
}

pub fn encode_f32(values: &[f32]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    B64.encode(bytes)
}

pub fn decode_f32(b64: &str) -> std::result::Result<Vec<f32>, String> {
    let bytes = B64.decode(b64.trim()).map_err(|e| format!("bad base64: {e}"))?;
    if bytes.len() % 4 != 0 {
        return Err(format!("payload of {} bytes is not a whole number of f32 values", bytes.len()));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

impl FeatureRecord {
    /// Checks the per-record invariants: declared dims, finite values,
    /// labels within range.
    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Error::Record {
            id: self.id.clone(),
            msg,
        };
        if self.id.is_empty() {
            return Err(err("empty id".into()));
        }
        for (t, &y) in &self.labels {
            if !(LABEL_MIN..=LABEL_MAX).contains(&y) {
                return Err(err(format!("label {t} = {y} outside [1, 5]")));
            }
        }
        for (name, v) in &self.features {
            if v.is_empty() {
                return Err(err(format!("feature `{name}` is empty")));
            }
            if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                return Err(err(format!("feature `{name}` has a non-finite value at {i}")));
            }
        }
        Ok(())
    }

    pub fn label(&self, t: Trait) -> Option<f64> {
        self.labels.get(&t).copied()
    }

    fn to_line(&self) -> String {
        let wire = WireRecord {
            id: self.id.clone(),
            labels: self.labels.clone(),
            meta: self.meta.clone(),
            features: self
                .features
                .iter()
                .map(|(k, v)| {
                    let f = WireFeature {
                        dim: v.len(),
                        b64: encode_f32(v),
                        encoder: self.encoders.get(k).cloned(),
                    };
                    (k.clone(), f)
                })
                .collect(),
        };
        serde_json::to_string(&wire).expect("record serialises")
    }

    fn from_line(line: &str, source: &str, lineno: usize) -> Result<Self> {
        let wire: WireRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: source.to_string(),
            line: lineno,
            msg: e.to_string(),
        })?;
        let mut rec = FeatureRecord {
            id: wire.id,
            labels: wire.labels,
            meta: wire.meta,
            ..Default::default()
        };
        for (name, f) in wire.features {
            let values = decode_f32(&f.b64).map_err(|msg| Error::Record {
                id: rec.id.clone(),
                msg: format!("feature `{name}`: {msg}"),
            })?;
            if values.len() != f.dim {
                return Err(Error::Record {
                    id: rec.id.clone(),
                    msg: format!("feature `{name}` declares dim {} but holds {} values", f.dim, values.len()),
                });
            }
            if let Some(enc) = f.encoder {
                rec.encoders.insert(name.clone(), enc);
            }
            rec.features.insert(name, values);
        }
        rec.validate()?;
        Ok(rec)
    }
}

/// A validated collection of records with per-feature widths fixed across
/// the file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    records: Vec<FeatureRecord>,
    dims: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LabelStats {
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub records: usize,
    pub dims: BTreeMap<String, usize>,
    pub labels: BTreeMap<Trait, LabelStats>,
}

fn collect_errors(mut errors: Vec<Error>) -> Result<()> {
    match errors.len() {
        0 => Ok(()),
        1 => Err(errors.remove(0)),
        n => Err(Error::Dataset(format!(
            "{n} invalid records: {}",
            errors.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")
        ))),
    }
}

impl Dataset {
    /// Validates every record and the cross-record width consistency.
    /// All violations are reported together.
    pub fn new(records: Vec<FeatureRecord>) -> Result<Self> {
        let mut errors = Vec::new();
        let mut dims: BTreeMap<String, usize> = BTreeMap::new();
        let mut seen = HashSet::new();
        for rec in &records {
            if let Err(e) = rec.validate() {
                errors.push(e);
                continue;
            }
            if !seen.insert(rec.id.as_str()) {
                errors.push(Error::Record {
                    id: rec.id.clone(),
                    msg: "duplicate id".into(),
                });
                continue;
            }
            for (name, v) in &rec.features {
                let expected = *dims.entry(name.clone()).or_insert(v.len());
                if expected != v.len() {
                    errors.push(Error::Record {
                        id: rec.id.clone(),
                        msg: format!("feature `{name}` has dim {} but earlier records have {expected}", v.len()),
                    });
                }
            }
        }
        collect_errors(errors)?;
        Ok(Self { records, dims })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let source = path.display().to_string();
        let mut lines = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if !line.trim().is_empty() {
                lines.push((i + 1, line));
            }
        }
        let parsed: Vec<Result<FeatureRecord>> = lines
            .par_iter()
            .map(|(n, l)| FeatureRecord::from_line(l, &source, *n))
            .collect();
        let mut records = Vec::with_capacity(parsed.len());
        let mut errors = Vec::new();
        for r in parsed {
            match r {
                Ok(rec) => records.push(rec),
                Err(e) => errors.push(e),
            }
        }
        collect_errors(errors)?;
        let ds = Self::new(records)?;
        if ds.is_empty() {
            log::warn!("{source}: dataset is empty");
        } else {
            let s = ds.summary();
            log::info!("{source}: {} records, dims {:?}", s.records, s.dims);
            for (t, st) in &s.labels {
                log::info!("  {t}: n={} mean={:.4} min={:.4} max={:.4}", st.count, st.mean, st.min, st.max);
            }
        }
        Ok(ds)
    }

    /// Writes one record per line via a temporary file and rename.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = tmp_path(path);
        {
            let file = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
            let mut w = BufWriter::new(file);
            for rec in &self.records {
                writeln!(w, "{}", rec.to_line()).map_err(|e| Error::io(&tmp, e))?;
            }
            w.flush().map_err(|e| Error::io(&tmp, e))?;
        }
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn records(&self) -> &[FeatureRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dims(&self) -> &BTreeMap<String, usize> {
        &self.dims
    }

    pub fn ids(&self, indices: &[usize]) -> Vec<&str> {
        indices.iter().map(|&i| self.records[i].id.as_str()).collect()
    }

    pub fn summary(&self) -> DatasetSummary {
        let mut labels = BTreeMap::new();
        for t in Trait::ALL {
            let ys: Vec<f64> = self.records.iter().filter_map(|r| r.label(t)).collect();
            if ys.is_empty() {
                continue;
            }
            let n = ys.len() as f64;
            labels.insert(
                t,
                LabelStats {
                    count: ys.len(),
                    mean: ys.iter().sum::<f64>() / n,
                    min: ys.iter().copied().fold(f64::INFINITY, f64::min),
                    max: ys.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                },
            );
        }
        DatasetSummary {
            records: self.len(),
            dims: self.dims.clone(),
            labels,
        }
    }

    /// Ensures every record carries the features (and, if `labeled`, the
    /// label) needed for `t`, at the widths the model expects.
    pub fn check_for(&self, cfg: &ModelConfig, labeled: bool) -> Result<()> {
        let t = cfg.trait_id;
        let (dt, da, dv) = cfg.input_dims();
        let mut errors = Vec::new();
        for rec in &self.records {
            for (name, want) in [(t.text_feature(), dt), (AUDIO, da), (VIDEO, dv)] {
                match rec.features.get(name) {
                    None => errors.push(Error::Record {
                        id: rec.id.clone(),
                        msg: format!("missing feature `{name}` required for trait {t}"),
                    }),
                    Some(v) if v.len() != want => errors.push(Error::Record {
                        id: rec.id.clone(),
                        msg: format!("feature `{name}` has dim {} but the model expects {want}", v.len()),
                    }),
                    _ => {}
                }
            }
            if labeled && rec.label(t).is_none() {
                errors.push(Error::Record {
                    id: rec.id.clone(),
                    msg: format!("missing label for trait {t}"),
                });
            }
        }
        collect_errors(errors)
    }

    /// Stacks the trait's text feature, audio and video for `indices`.
    pub fn batch(&self, indices: &[usize], t: Trait) -> Result<ModalityBatch> {
        let stack = |name: &str| -> Result<Tensor> {
            let mut data = Vec::new();
            let mut width = 0;
            for &i in indices {
                let rec = self
                    .records
                    .get(i)
                    .ok_or_else(|| Error::Dataset(format!("index {i} out of range")))?;
                let v = rec.features.get(name).ok_or_else(|| Error::Record {
                    id: rec.id.clone(),
                    msg: format!("missing feature `{name}`"),
                })?;
                width = v.len();
                data.extend(v.iter().map(|&x| x as f64));
            }
            Tensor::new(vec![indices.len(), width], data)
        };
        Ok(ModalityBatch {
            text: stack(t.text_feature())?,
            audio: stack(AUDIO)?,
            video: stack(VIDEO)?,
        })
    }

    pub fn labels(&self, indices: &[usize], t: Trait) -> Result<Vec<f64>> {
        indices
            .iter()
            .map(|&i| {
                let rec = &self.records[i];
                rec.label(t).ok_or_else(|| Error::Record {
                    id: rec.id.clone(),
                    msg: format!("missing label for trait {t}"),
                })
            })
            .collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            dims: self.dims.clone(),
        }
    }

    pub(crate) fn records_mut(&mut self) -> &mut [FeatureRecord] {
        &mut self.records
    }
}

pub(crate) fn tmp_path(path: &Path) -> std::path::PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(format!(".tmp{}", std::process::id()));
    path.with_file_name(name)
}
