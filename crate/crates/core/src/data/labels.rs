use serde::{Deserialize, Serialize};

use super::record::{Dataset, LABEL_MAX, LABEL_MIN};

/// Training-time label scaling. Reported errors are always mapped back to
/// the raw 1–5 scale.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelScaling {
    #[default]
    None,
    /// `[1, 5] → [0, 1]`.
    Minmax,
}

impl LabelScaling {
    pub fn forward(self, y: f64) -> f64 {
        match self {
            LabelScaling::None => y,
            LabelScaling::Minmax => (y - LABEL_MIN) / (LABEL_MAX - LABEL_MIN),
        }
    }

    pub fn inverse(self, y: f64) -> f64 {
        match self {
            LabelScaling::None => y,
            LabelScaling::Minmax => y * (LABEL_MAX - LABEL_MIN) + LABEL_MIN,
        }
    }

    /// Factor that converts a squared error on the training scale into one
    /// on the raw scale.
    pub fn mse_factor(self) -> f64 {
        match self {
            LabelScaling::None => 1.0,
            LabelScaling::Minmax => (LABEL_MAX - LABEL_MIN).powi(2),
        }
    }
}

/// Rescales every label and returns the transform needed to undo it.
pub fn normalize_labels(dataset: &Dataset, mode: LabelScaling) -> (Dataset, LabelScaling) {
    let mut out = dataset.clone();
    for rec in out.records_mut() {
        for y in rec.labels.values_mut() {
            *y = mode.forward(*y);
        }
    }
    (out, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn minmax_midpoint() {
        assert_eq!(LabelScaling::Minmax.forward(3.0), 0.5);
        assert_eq!(LabelScaling::Minmax.forward(1.0), 0.0);
        assert_eq!(LabelScaling::Minmax.forward(5.0), 1.0);
        assert_eq!(LabelScaling::None.forward(3.7), 3.7);
    }

    proptest! {
        #[test]
        fn round_trip(y in 1.0f64..=5.0) {
            for m in [LabelScaling::None, LabelScaling::Minmax] {
                prop_assert!((m.inverse(m.forward(y)) - y).abs() <= 1e-12);
            }
        }
    }
}
