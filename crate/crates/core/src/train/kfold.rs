use crate::error::{Error, Result};
use crate::tensor::RngState;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

/// Shuffles `0..n` under `seed` and cuts it into `k` contiguous validation
/// slices whose sizes differ by at most one (the larger ones first).
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::Config(format!("k-fold split needs k >= 2, got {k}")));
    }
    if n < k {
        return Err(Error::Config(format!("cannot split {n} samples into {k} folds")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    RngState::new(seed).shuffle(&mut order);
    let (base, extra) = (n / k, n % k);
    let mut start = 0;
    let mut folds = Vec::with_capacity(k);
    for i in 0..k {
        let len = base + usize::from(i < extra);
        let mut val = order[start..start + len].to_vec();
        val.sort_unstable();
        let mut train: Vec<usize> = order[..start].iter().chain(&order[start + len..]).copied().collect();
        train.sort_unstable();
        folds.push(Fold { train, val });
        start += len;
    }
    Ok(folds)
}
