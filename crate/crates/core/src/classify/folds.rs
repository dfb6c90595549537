use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Splits sample indices into `k` disjoint folds that preserve the class
/// ratio. Each class is shuffled with `seed` and dealt round-robin; the
/// negatives continue the cycle where the positives stopped so fold sizes
/// differ by at most one. Indices inside a fold are ascending.
pub fn stratified_folds(labels: &[bool], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    let (mut pos, mut neg): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| labels[i]);
    if pos.len() < k || neg.len() < k {
        return Err(Error::InsufficientData(format!(
            "each class needs at least {k} members (positives {}, negatives {})",
            pos.len(),
            neg.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut folds = vec![Vec::new(); k];
    for (slot, idx) in pos.into_iter().chain(neg).enumerate() {
        folds[slot % k].push(idx);
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(folds)
}
