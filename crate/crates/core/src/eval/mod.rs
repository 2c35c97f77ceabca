//! Fold construction, class balancing and evaluation metrics.

mod metrics;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use metrics::{
    evaluate, evaluate_with, exact_match_rate, frame_scores, frame_scores_balanced, harmonic_f1,
    label_report, macro_pr, predictions_to_sets, EvalOptions, FoldSummary, FrameScores, LabelRow,
    MeanStd, MetricsReport, DEFAULT_MIN_LABEL_COUNT,
};

pub const DEFAULT_FOLDS: usize = 5;
pub const MIN_ARTICLES: usize = 5;

/// One train/dev/test partition of the labeled ids.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub fold_id: usize,
    pub seed: u64,
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
}

impl FoldSpec {
    pub fn len(&self) -> usize {
        self.train.len() + self.dev.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `k` independent 60/20/20 resplits. Fold `i` shuffles the sorted ids with
/// seed `seed + i`; dev and test each take `floor(n / 5)` ids and train
/// keeps the rest. Each list is returned sorted.
pub fn make_folds(ids: &[String], k: usize, seed: u64) -> Result<Vec<FoldSpec>> {
    if k == 0 {
        return Err(Error::invalid("fold count must be positive"));
    }
    let mut sorted = ids.to_vec();
    sorted.sort();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::invalid(format!("duplicate article id `{}`", w[0])));
    }
    if sorted.len() < MIN_ARTICLES {
        return Err(Error::invalid(format!(
            "need at least {MIN_ARTICLES} labeled articles to split, got {}",
            sorted.len()
        )));
    }
    let holdout = sorted.len() / 5;
    Ok((0..k)
        .map(|fold_id| {
            let fold_seed = seed.wrapping_add(fold_id as u64);
            let mut order = sorted.clone();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(fold_seed));
            let mut dev = order[..holdout].to_vec();
            let mut test = order[holdout..2 * holdout].to_vec();
            let mut train = order[2 * holdout..].to_vec();
            dev.sort();
            test.sort();
            train.sort();
            FoldSpec {
                fold_id,
                seed: fold_seed,
                train,
                dev,
                test,
            }
        })
        .collect())
}

/// Upsample the minority class with replacement to a 1:1 ratio. Originals
/// come first in their input order, followed by the drawn copies.
pub fn balance_upsample<T: Clone>(items: Vec<(T, bool)>, seed: u64) -> Result<Vec<(T, bool)>> {
    let pos: Vec<usize> = (0..items.len()).filter(|&i| items[i].1).collect();
    let neg: Vec<usize> = (0..items.len()).filter(|&i| !items[i].1).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::invalid("cannot balance a single-class set"));
    }
    let (minority, deficit) = if pos.len() < neg.len() {
        (pos.as_slice(), neg.len() - pos.len())
    } else {
        (neg.as_slice(), pos.len() - neg.len())
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let extra: Vec<(T, bool)> = (0..deficit)
        .map(|_| items[minority[rng.random_range(0..minority.len())]].clone())
        .collect();
    let mut out = items;
    out.extend(extra);
    Ok(out)
}
