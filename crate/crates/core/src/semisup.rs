//! Semi-supervised training of a frame head: unlabeled items get sharpened
//! soft labels from the current model and are mixed with labeled items by
//! mixup. No data augmentation is applied.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::rbf::model::{accumulate_gradient, apply_step, check_training_set, mask_gradient};
use crate::rbf::{batch_gradient, epoch_batches, sigmoid, FrameModel, TrainConfig, CHANNELS};

/// Separates the mixing stream from the batch-order stream.
const MIX_STREAM: u64 = 0x6d69_7875_705f_7273;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnlabeledLoss {
    /// Squared error between prediction and soft target.
    #[default]
    Brier,
    CrossEntropy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SemiSupConfig {
    pub temperature: f64,
    pub beta_alpha: f64,
    pub unlabeled_weight: f64,
    /// Unlabeled items drawn per labeled item in a batch.
    pub unlabeled_ratio: f64,
    pub unlabeled_loss: UnlabeledLoss,
}

impl Default for SemiSupConfig {
    fn default() -> Self {
        SemiSupConfig {
            temperature: 0.5,
            beta_alpha: 0.75,
            unlabeled_weight: 0.5,
            unlabeled_ratio: 1.0,
            unlabeled_loss: UnlabeledLoss::Brier,
        }
    }
}

impl SemiSupConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let non_negative = |v: f64| v.is_finite() && v >= 0.0;
        if !positive(self.temperature) || !positive(self.beta_alpha) {
            return Err(Error::Config(
                "temperature and beta_alpha must be positive".into(),
            ));
        }
        if !non_negative(self.unlabeled_weight) || !non_negative(self.unlabeled_ratio) {
            return Err(Error::Config(
                "unlabeled_weight and unlabeled_ratio must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoftLabel {
    pub article_id: String,
    pub frame: Frame,
    pub p: f64,
}

/// `p^(1/T) / (p^(1/T) + (1-p)^(1/T))`, computed as a ratio so small `T`
/// cannot underflow both terms.
pub fn sharpen(p: f64, t: f64) -> f64 {
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    1.0 / (1.0 + ((1.0 - p) / p).powf(1.0 / t))
}

/// Interpolate towards the first sample with `λ = max(λ_raw, 1 - λ_raw)`.
pub fn mixup(x1: &[f64], y1: f64, x2: &[f64], y2: f64, lambda_raw: f64) -> Result<(Vec<f64>, f64)> {
    if x1.len() != x2.len() {
        return Err(Error::DimensionMismatch {
            left: x1.len(),
            right: x2.len(),
        });
    }
    let l = lambda_raw.max(1.0 - lambda_raw);
    let x = x1
        .iter()
        .zip(x2)
        .map(|(a, b)| l * a + (1.0 - l) * b)
        .collect();
    Ok((x, l * y1 + (1.0 - l) * y2))
}

/// Sharpened predictions of `model` for unlabeled feature rows.
pub fn soft_labels(
    model: &FrameModel,
    ids: &[String],
    rows: &[Vec<f64>],
    temperature: f64,
) -> Vec<SoftLabel> {
    ids.par_iter()
        .zip(rows)
        .map(|(id, x)| SoftLabel {
            article_id: id.clone(),
            frame: model.frame,
            p: sharpen(model.probability(x), temperature),
        })
        .collect()
}

/// Mean squared error between predictions and targets.
pub fn brier_loss(w: &[f64], xs: &[&[f64]], ys: &[f64]) -> f64 {
    let d = w.len() - 1;
    let total: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let z = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + w[d];
            (sigmoid(z) - y).powi(2)
        })
        .sum();
    total / xs.len() as f64
}

pub fn brier_gradient(w: &[f64], xs: &[&[f64]], ys: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; w.len()];
    accumulate_gradient(&mut g, w, xs, ys, |p, y| 2.0 * (p - y) * p * (1.0 - p));
    let n = xs.len() as f64;
    g.iter_mut().for_each(|v| *v /= n);
    g
}

/// Supervised cross-entropy on each clean labeled batch and on its mixed
/// copy, plus `unlabeled_weight` times the loss on mixed unlabeled items. Batches follow the same seeded schedule as
/// [`train_frame_model`](crate::rbf::train_frame_model), and with zero
/// weight or no unlabeled data the result is bitwise identical to it.
///
/// `base` supplies the starting weights; without it training starts at zero.
pub fn train_semisup(
    frame: Frame,
    labeled: &[(Vec<f64>, bool)],
    unlabeled: &[Vec<f64>],
    base: Option<&FrameModel>,
    train: &TrainConfig,
    cfg: &SemiSupConfig,
) -> Result<FrameModel> {
    train.validate()?;
    cfg.validate()?;
    let dim = check_training_set(labeled)?;
    if let Some(u) = unlabeled.iter().find(|u| u.len() != CHANNELS * dim) {
        return Err(Error::DimensionMismatch {
            left: u.len(),
            right: CHANNELS * dim,
        });
    }
    let mut model = FrameModel::zeros(frame, dim, train.clone());
    if let Some(b) = base {
        if b.weights.len() != model.weights.len() {
            return Err(Error::DimensionMismatch {
                left: b.weights.len(),
                right: model.weights.len(),
            });
        }
        model.weights.clone_from(&b.weights);
    }
    let use_unlabeled =
        cfg.unlabeled_weight > 0.0 && cfg.unlabeled_ratio > 0.0 && !unlabeled.is_empty();
    let beta =
        Beta::new(cfg.beta_alpha, cfg.beta_alpha).map_err(|e| Error::Config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(train.seed);
    let mut mix_rng = ChaCha8Rng::seed_from_u64(train.seed ^ MIX_STREAM);

    for _ in 0..train.epochs {
        let soft: Vec<f64> = if use_unlabeled {
            unlabeled
                .par_iter()
                .map(|u| sharpen(model.probability(u), cfg.temperature))
                .collect()
        } else {
            Vec::new()
        };
        for batch in epoch_batches(&mut rng, labeled.len(), train.batch_size) {
            let xs: Vec<&[f64]> = batch.iter().map(|&i| labeled[i].0.as_slice()).collect();
            let ys: Vec<f64> = batch
                .iter()
                .map(|&i| f64::from(u8::from(labeled[i].1)))
                .collect();
            let mut g = batch_gradient(&model.weights, &xs, &ys);
            if use_unlabeled {
                let m = ((batch.len() as f64) * cfg.unlabeled_ratio).ceil() as usize;
                let drawn: Vec<usize> = (0..m)
                    .map(|_| mix_rng.random_range(0..unlabeled.len()))
                    .collect();
                let mut pool: Vec<(&[f64], f64)> =
                    xs.iter().copied().zip(ys.iter().copied()).collect();
                pool.extend(drawn.iter().map(|&j| (unlabeled[j].as_slice(), soft[j])));
                let mut partners: Vec<usize> = (0..pool.len()).collect();
                for i in (1..partners.len()).rev() {
                    partners.swap(i, mix_rng.random_range(0..=i));
                }
                let mut mixed = Vec::with_capacity(pool.len());
                for (i, &(x, y)) in pool.iter().enumerate() {
                    let (px, py) = pool[partners[i]];
                    mixed.push(mixup(x, y, px, py, beta.sample(&mut mix_rng))?);
                }
                let (mx, mu) = mixed.split_at(xs.len());
                let mx_x: Vec<&[f64]> = mx.iter().map(|(x, _)| x.as_slice()).collect();
                let mx_y: Vec<f64> = mx.iter().map(|(_, y)| *y).collect();
                let mu_x: Vec<&[f64]> = mu.iter().map(|(x, _)| x.as_slice()).collect();
                let mu_y: Vec<f64> = mu.iter().map(|(_, y)| *y).collect();
                let g_x = batch_gradient(&model.weights, &mx_x, &mx_y);
                let g_u = match cfg.unlabeled_loss {
                    UnlabeledLoss::Brier => brier_gradient(&model.weights, &mu_x, &mu_y),
                    UnlabeledLoss::CrossEntropy => batch_gradient(&model.weights, &mu_x, &mu_y),
                };
                for ((gi, a), b) in g.iter_mut().zip(&g_x).zip(&g_u) {
                    *gi += a + cfg.unlabeled_weight * b;
                }
            }
            mask_gradient(&mut g, dim, train.ablation);
            apply_step(&mut model.weights, &g, train.learning_rate);
        }
    }
    model.validate()?;
    Ok(model)
}
