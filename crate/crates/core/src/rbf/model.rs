use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Ablation, CHANNELS};
use crate::error::{Error, Result};
use crate::frame::Frame;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub ablation: Ablation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            learning_rate: 0.01,
            batch_size: 8,
            seed: 1042,
            ablation: Ablation::Full,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "epochs and batch_size must be positive".into(),
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// Logistic classifier over the concatenated channel features of one frame.
/// The last weight is the bias.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameModel {
    pub frame: Frame,
    pub dim: usize,
    pub weights: Vec<f64>,
    pub config: TrainConfig,
}

impl FrameModel {
    pub fn zeros(frame: Frame, dim: usize, config: TrainConfig) -> Self {
        FrameModel {
            frame,
            dim,
            weights: vec![0.0; CHANNELS * dim + 1],
            config,
        }
    }

    pub fn n_features(&self) -> usize {
        CHANNELS * self.dim
    }

    pub fn bias(&self) -> f64 {
        self.weights[self.n_features()]
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != CHANNELS * self.dim + 1 {
            return Err(Error::DimensionMismatch {
                left: self.weights.len(),
                right: CHANNELS * self.dim + 1,
            });
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid(format!(
                "{} model has non-finite weights",
                self.frame
            )));
        }
        self.config.validate()
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x)
    }

    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.score(x))
    }

    /// Weights of one channel block.
    pub fn block(&self, channel: usize) -> &[f64] {
        &self.weights[channel * self.dim..(channel + 1) * self.dim]
    }
}

/// `w·x + b` where `w` carries the bias as its last element.
fn dot(w: &[f64], x: &[f64]) -> f64 {
    debug_assert_eq!(w.len(), x.len() + 1);
    x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + w[x.len()]
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean binary cross-entropy; targets may be soft.
pub fn batch_loss(w: &[f64], xs: &[&[f64]], ys: &[f64]) -> f64 {
    let total: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, &y)| {
            let z = dot(w, x);
            // log(1 + e^z) - y z, stable for large |z|.
            let softplus = if z > 0.0 {
                z + (-z).exp().ln_1p()
            } else {
                z.exp().ln_1p()
            };
            softplus - y * z
        })
        .sum();
    total / xs.len() as f64
}

/// Gradient of [`batch_loss`] with respect to the weights.
pub fn batch_gradient(w: &[f64], xs: &[&[f64]], ys: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; w.len()];
    accumulate_gradient(&mut g, w, xs, ys, |p, y| p - y);
    let n = xs.len() as f64;
    g.iter_mut().for_each(|v| *v /= n);
    g
}

/// Adds `sum_i r(p_i, y_i) * [x_i, 1]` to `g`.
pub(crate) fn accumulate_gradient(
    g: &mut [f64],
    w: &[f64],
    xs: &[&[f64]],
    ys: &[f64],
    residual: impl Fn(f64, f64) -> f64,
) {
    let d = g.len() - 1;
    for (x, &y) in xs.iter().zip(ys) {
        let r = residual(sigmoid(dot(w, x)), y);
        for (gi, xi) in g[..d].iter_mut().zip(x.iter()) {
            *gi += r * xi;
        }
        g[d] += r;
    }
}

/// Zero gradient entries of ablated channel blocks so they keep their
/// initial value.
pub(crate) fn mask_gradient(g: &mut [f64], dim: usize, ablation: Ablation) {
    for (c, keep) in ablation.active().into_iter().enumerate() {
        if !keep {
            g[c * dim..(c + 1) * dim].iter_mut().for_each(|v| *v = 0.0);
        }
    }
}

pub(crate) fn apply_step(w: &mut [f64], g: &[f64], lr: f64) {
    for (wi, gi) in w.iter_mut().zip(g) {
        *wi -= lr * gi;
    }
}

/// Shuffled mini-batch index lists for one epoch.
pub fn epoch_batches(rng: &mut ChaCha8Rng, n: usize, batch_size: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

pub(crate) fn check_training_set(data: &[(Vec<f64>, bool)]) -> Result<usize> {
    let first = data
        .first()
        .ok_or_else(|| Error::invalid("training set is empty"))?;
    let len = first.0.len();
    if len == 0 || len % CHANNELS != 0 {
        return Err(Error::invalid(format!(
            "feature length {len} is not a multiple of {CHANNELS}"
        )));
    }
    if let Some((x, _)) = data.iter().find(|(x, _)| x.len() != len) {
        return Err(Error::DimensionMismatch {
            left: x.len(),
            right: len,
        });
    }
    let positives = data.iter().filter(|(_, y)| *y).count();
    if positives == 0 || positives == data.len() {
        return Err(Error::invalid("training set contains a single class"));
    }
    Ok(len / CHANNELS)
}

/// Seeded mini-batch gradient descent on cross-entropy, starting from zero.
pub fn train_frame_model(
    frame: Frame,
    data: &[(Vec<f64>, bool)],
    config: &TrainConfig,
) -> Result<FrameModel> {
    config.validate()?;
    let dim = check_training_set(data)?;
    let mut model = FrameModel::zeros(frame, dim, config.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..config.epochs {
        for batch in epoch_batches(&mut rng, data.len(), config.batch_size) {
            let xs: Vec<&[f64]> = batch.iter().map(|&i| data[i].0.as_slice()).collect();
            let ys: Vec<f64> = batch
                .iter()
                .map(|&i| f64::from(u8::from(data[i].1)))
                .collect();
            let mut g = batch_gradient(&model.weights, &xs, &ys);
            mask_gradient(&mut g, dim, config.ablation);
            apply_step(&mut model.weights, &g, config.learning_rate);
        }
    }
    model.validate()?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn separable(n: usize, dim: usize, seed: u64) -> Vec<(Vec<f64>, bool)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let y = i % 2 == 0;
                let mut x: Vec<f64> = (0..CHANNELS * dim)
                    .map(|_| rng.random_range(-0.1..0.1))
                    .collect();
                x[0] = if y { 1.0 } else { -1.0 };
                (x, y)
            })
            .collect()
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert!((sigmoid(2.0) + sigmoid(-2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_model_predicts_one_half() {
        let m = FrameModel::zeros(Frame::Moral, 8, TrainConfig::default());
        assert_eq!(m.probability(&[0.3; 40]), 0.5);
        assert_eq!(m.weights.len(), 41);
    }

    #[test]
    fn learns_separable_data() {
        let data = separable(40, 4, 1);
        let cfg = TrainConfig {
            learning_rate: 0.5,
            ..Default::default()
        };
        let m = train_frame_model(Frame::Conflict, &data, &cfg).unwrap();
        let correct = data
            .iter()
            .filter(|(x, y)| (m.probability(x) >= 0.5) == *y)
            .count();
        assert_eq!(correct, data.len());
    }

    #[test]
    fn same_seed_same_weights() {
        let data = separable(30, 4, 2);
        let cfg = TrainConfig::default();
        let a = train_frame_model(Frame::Economic, &data, &cfg).unwrap();
        let b = train_frame_model(Frame::Economic, &data, &cfg).unwrap();
        assert_eq!(a.weights, b.weights);
        let c = train_frame_model(Frame::Economic, &data, &TrainConfig { seed: 7, ..cfg }).unwrap();
        assert_ne!(a.weights, c.weights);
    }

    #[test]
    fn ablated_blocks_stay_zero() {
        let data = separable(30, 4, 3);
        for ablation in Ablation::ALL {
            let cfg = TrainConfig {
                ablation,
                ..Default::default()
            };
            let m = train_frame_model(Frame::Resolution, &data, &cfg).unwrap();
            for (c, keep) in ablation.active().into_iter().enumerate() {
                assert_eq!(
                    m.block(c).iter().all(|w| *w == 0.0),
                    !keep,
                    "{ablation:?} block {c}"
                );
            }
        }
    }

    #[test]
    fn rejects_bad_training_sets() {
        let cfg = TrainConfig::default();
        assert!(train_frame_model(Frame::Moral, &[], &cfg).is_err());
        let one_class = vec![(vec![0.0; 10], true), (vec![1.0; 10], true)];
        assert!(train_frame_model(Frame::Moral, &one_class, &cfg).is_err());
        let ragged = vec![(vec![0.0; 10], true), (vec![1.0; 15], false)];
        assert!(train_frame_model(Frame::Moral, &ragged, &cfg).is_err());
        let odd = vec![(vec![0.0; 7], true), (vec![1.0; 7], false)];
        assert!(train_frame_model(Frame::Moral, &odd, &cfg).is_err());
        let bad_cfg = TrainConfig {
            epochs: 0,
            ..Default::default()
        };
        assert!(train_frame_model(Frame::Moral, &separable(4, 2, 0), &bad_cfg).is_err());
    }

    #[test]
    fn loss_matches_naive_formula() {
        let w = [0.5, -0.25, 0.1];
        let xs: [&[f64]; 2] = [&[1.0, 2.0], &[-1.0, 0.5]];
        let ys = [1.0, 0.3];
        let naive: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| {
                let p = 1.0 / (1.0 + (-(w[0] * x[0] + w[1] * x[1] + w[2])).exp());
                -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
            })
            .sum::<f64>()
            / 2.0;
        assert!((batch_loss(&w, &xs, &ys) - naive).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let h = 1e-5;
        for _ in 0..50 {
            let d = rng.random_range(2..12);
            let n = rng.random_range(1..9);
            let w: Vec<f64> = (0..=d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let xs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
            let ys: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let g = batch_gradient(&w, &xs, &ys);
            for j in 0..=d {
                let mut plus = w.clone();
                let mut minus = w.clone();
                plus[j] += h;
                minus[j] -= h;
                let numeric =
                    (batch_loss(&plus, &xs, &ys) - batch_loss(&minus, &xs, &ys)) / (2.0 * h);
                let rel = (g[j] - numeric).abs() / g[j].abs().max(numeric.abs()).max(1e-8);
                assert!(rel <= 1e-5, "component {j}: {} vs {numeric}", g[j]);
            }
        }
    }
}
