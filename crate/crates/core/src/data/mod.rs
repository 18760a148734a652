//! Dataset files, label scaling, synthetic data and checkpoints.

mod checkpoint;
mod labels;
mod record;
mod synthetic;

pub use checkpoint::{
    load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta, Manifest, ParamEntry, CHECKPOINT_VERSION,
};
pub use labels::{normalize_labels, LabelScaling};
pub use record::{decode_f32, encode_f32, Dataset, DatasetSummary, FeatureRecord, LabelStats, AUDIO, LABEL_MAX, LABEL_MIN, VIDEO};
pub use synthetic::{generate_synthetic, SyntheticSpec, Teacher};
