//! Comparison predictors: a seeded coin, the per-frame majority class and
//! TF-IDF nearest neighbours.

use serde::{Deserialize, Serialize};

use crate::corpus::Article;
use crate::embed::{fnv1a64, sparse_sq_distance, SparseVector, TfidfVectorizer};
use crate::error::{Error, Result};
use crate::eval::{balance_upsample, harmonic_f1};
use crate::frame::{Frame, FrameSet};

pub const DEFAULT_K_GRID: [usize; 7] = [1, 3, 5, 7, 9, 15, 25];

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform draw in `[0, 1)` fixed by `(seed, article_id, frame)`, so the
/// outcome does not depend on evaluation order.
pub fn random_probability(seed: u64, article_id: &str, frame: Frame) -> f64 {
    let h = splitmix64(splitmix64(seed ^ fnv1a64(article_id.as_bytes())) ^ frame.index() as u64);
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Fair coin per frame.
pub fn random_predict(article_id: &str, seed: u64) -> FrameSet {
    Frame::ALL
        .into_iter()
        .filter(|&f| random_probability(seed, article_id, f) >= 0.5)
        .collect()
}

/// Constant per-frame prediction: positive when a strict majority of the
/// training labels carry the frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MajorityModel {
    pub prediction: FrameSet,
}

impl MajorityModel {
    pub fn fit(labels: &[FrameSet]) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::invalid(
                "majority baseline needs at least one training label",
            ));
        }
        let prediction = Frame::ALL
            .into_iter()
            .filter(|&f| 2 * labels.iter().filter(|l| l.contains(f)).count() > labels.len())
            .collect();
        Ok(MajorityModel { prediction })
    }

    pub fn predict(&self) -> FrameSet {
        self.prediction
    }
}

/// Vote of the `k` nearest rows by L2 distance. Equal distances keep the
/// lower row position; an even split votes `false`.
fn knn_vote(distances: &[f64], labels: &[bool], k: usize) -> bool {
    let mut order: Vec<usize> = (0..distances.len()).collect();
    order.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]).then(a.cmp(&b)));
    let k = k.min(order.len());
    let yes = order[..k].iter().filter(|&&i| labels[i]).count();
    2 * yes > k
}

/// Neighbour set and `k` for one frame. `rows` index into the shared
/// training vectors and may repeat after upsampling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnFrame {
    pub frame: Frame,
    pub k: usize,
    pub rows: Vec<usize>,
    pub labels: Vec<bool>,
}

/// One KNN classifier per frame over a shared TF-IDF space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub vectorizer: TfidfVectorizer,
    pub vectors: Vec<SparseVector>,
    pub frames: Vec<KnnFrame>,
}

/// Training rows for one frame: indices into the article list with labels.
pub type FrameRows = Vec<(usize, bool)>;

impl KnnModel {
    /// Fit the vectorizer on `train`, then choose each frame's `k` from
    /// `k_grid` by dev-set F1 (ties to the smaller `k`). `rows[f]` lists the
    /// training rows for frame `f`, possibly upsampled. With `balance_dev`,
    /// each frame's dev labels are upsampled to 1:1 with seed
    /// `balance_dev + frame index` before scoring.
    pub fn fit(
        train: &[Article],
        rows: &[FrameRows; Frame::COUNT],
        dev: &[(Article, FrameSet)],
        k_grid: &[usize],
        balance_dev: Option<u64>,
    ) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::invalid("KNN needs training articles"));
        }
        if k_grid.is_empty() || k_grid.contains(&0) {
            return Err(Error::Config("k grid must hold positive values".into()));
        }
        let vectorizer = TfidfVectorizer::fit(train)?;
        let vectors: Vec<SparseVector> = train
            .iter()
            .map(|a| vectorizer.transform(&a.full_text()))
            .collect();
        let dev_vectors: Vec<SparseVector> = dev
            .iter()
            .map(|(a, _)| vectorizer.transform(&a.full_text()))
            .collect();
        // Distances from each dev article to each distinct training article.
        let dev_dist: Vec<Vec<f64>> = dev_vectors
            .iter()
            .map(|q| vectors.iter().map(|v| sparse_sq_distance(q, v)).collect())
            .collect();

        let mut frames = Vec::with_capacity(Frame::COUNT);
        for frame in Frame::ALL {
            let frame_rows = &rows[frame.index()];
            if frame_rows.is_empty() {
                return Err(Error::invalid(format!("no KNN training rows for {frame}")));
            }
            if let Some(&(i, _)) = frame_rows.iter().find(|(i, _)| *i >= train.len()) {
                return Err(Error::invalid(format!("KNN row {i} is out of range")));
            }
            let idx: Vec<usize> = frame_rows.iter().map(|r| r.0).collect();
            let labels: Vec<bool> = frame_rows.iter().map(|r| r.1).collect();
            let mut candidates: Vec<usize> =
                k_grid.iter().copied().filter(|&k| k <= idx.len()).collect();
            candidates.sort_unstable();
            candidates.dedup();
            if candidates.is_empty() {
                candidates.push(idx.len());
            }
            let mut dev_rows: Vec<(usize, bool)> = dev
                .iter()
                .enumerate()
                .map(|(i, (_, g))| (i, g.contains(frame)))
                .collect();
            if let Some(seed) = balance_dev {
                if dev_rows.iter().any(|r| r.1) && dev_rows.iter().any(|r| !r.1) {
                    dev_rows = balance_upsample(dev_rows, seed.wrapping_add(frame.index() as u64))?;
                }
            }
            let mut best = (candidates[0], f64::NEG_INFINITY);
            if !dev.is_empty() {
                for &k in &candidates {
                    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
                    for &(j, gold) in &dev_rows {
                        let dist: Vec<f64> = idx.iter().map(|&i| dev_dist[j][i]).collect();
                        match (knn_vote(&dist, &labels, k), gold) {
                            (true, true) => tp += 1,
                            (true, false) => fp += 1,
                            (false, true) => fn_ += 1,
                            _ => {}
                        }
                    }
                    let p = if tp + fp == 0 {
                        0.0
                    } else {
                        tp as f64 / (tp + fp) as f64
                    };
                    let r = if tp + fn_ == 0 {
                        0.0
                    } else {
                        tp as f64 / (tp + fn_) as f64
                    };
                    let f1 = harmonic_f1(p, r);
                    if f1 > best.1 {
                        best = (k, f1);
                    }
                }
            }
            frames.push(KnnFrame {
                frame,
                k: best.0,
                rows: idx,
                labels,
            });
        }
        Ok(KnnModel {
            vectorizer,
            vectors,
            frames,
        })
    }

    pub fn predict(&self, article: &Article) -> FrameSet {
        let q = self.vectorizer.transform(&article.full_text());
        let dist: Vec<f64> = self
            .vectors
            .iter()
            .map(|v| sparse_sq_distance(&q, v))
            .collect();
        self.frames
            .iter()
            .filter(|kf| {
                let d: Vec<f64> = kf.rows.iter().map(|&i| dist[i]).collect();
                knn_vote(&d, &kf.labels, kf.k)
            })
            .map(|kf| kf.frame)
            .collect()
    }

    pub fn k(&self, frame: Frame) -> usize {
        self.frames[frame.index()].k
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::Leaning;
    use proptest::prelude::*;

    fn article(id: &str, body: &str) -> Article {
        Article {
            id: id.into(),
            title: String::new(),
            body: body.into(),
            outlet: "o".into(),
            leaning: Leaning::Left,
            date: "2017-01-01".into(),
        }
    }

    fn all_rows(labels: &[FrameSet]) -> [FrameRows; Frame::COUNT] {
        Frame::ALL.map(|f| {
            labels
                .iter()
                .enumerate()
                .map(|(i, l)| (i, l.contains(f)))
                .collect()
        })
    }

    #[test]
    fn random_is_deterministic_and_fair() {
        assert_eq!(random_predict("a1", 5), random_predict("a1", 5));
        let n = 10_000;
        for f in Frame::ALL {
            let pos = (0..n)
                .filter(|i| random_probability(1042, &format!("doc{i}"), f) >= 0.5)
                .count();
            let rate = pos as f64 / n as f64;
            // Within 3 sigma of a fair coin.
            assert!(
                (rate - 0.5).abs() < 3.0 * (0.25f64 / n as f64).sqrt(),
                "{f}: {rate}"
            );
        }
    }

    #[test]
    fn random_recall_near_one_half() {
        let gold: Vec<FrameSet> = (0..1000)
            .map(|i| FrameSet::from_bits((i % 31 + 1) as u8))
            .collect();
        let pred: Vec<FrameSet> = (0..1000)
            .map(|i| random_predict(&format!("x{i}"), 9))
            .collect();
        let (_, r) = crate::eval::macro_pr(&pred, &gold).unwrap();
        assert!((r - 0.5).abs() <= 0.05, "{r}");
    }

    #[test]
    fn majority_examples() {
        let re = FrameSet::from_frames([Frame::Resolution]);
        let sixty: Vec<FrameSet> = (0..10)
            .map(|i| if i < 6 { re } else { FrameSet::EMPTY })
            .collect();
        assert!(MajorityModel::fit(&sixty)
            .unwrap()
            .predict()
            .contains(Frame::Resolution));
        let forty: Vec<FrameSet> = (0..10)
            .map(|i| if i < 4 { re } else { FrameSet::EMPTY })
            .collect();
        assert!(MajorityModel::fit(&forty).unwrap().predict().is_empty());
        let tie: Vec<FrameSet> = (0..10)
            .map(|i| if i < 5 { re } else { FrameSet::EMPTY })
            .collect();
        assert!(MajorityModel::fit(&tie).unwrap().predict().is_empty());
        assert!(MajorityModel::fit(&[]).is_err());
    }

    #[test]
    fn vote_rules() {
        assert!(knn_vote(&[0.1, 0.2, 0.3], &[true, true, false], 3));
        assert!(!knn_vote(&[0.1, 0.2], &[true, false], 2));
        // Distance tie: the lower position wins the single slot.
        assert!(knn_vote(&[0.5, 0.5], &[true, false], 1));
        assert!(!knn_vote(&[0.5, 0.5], &[false, true], 1));
    }

    #[test]
    fn identical_query_with_k1_returns_its_label() {
        let train = vec![
            article("a", "carbon tax costs money"),
            article("b", "senators argue fiercely"),
            article("c", "prayers and faith"),
        ];
        let labels = vec![
            FrameSet::from_frames([Frame::Economic]),
            FrameSet::from_frames([Frame::Conflict]),
            FrameSet::from_frames([Frame::Moral]),
        ];
        let model = KnnModel::fit(&train, &all_rows(&labels), &[], &[1], None).unwrap();
        for (a, l) in train.iter().zip(&labels) {
            assert_eq!(model.predict(a), *l);
        }
        assert!(KnnModel::fit(&[], &all_rows(&[]), &[], &[1], None).is_err());
        assert!(KnnModel::fit(&train, &all_rows(&labels), &[], &[0], None).is_err());
    }

    #[test]
    fn k_selection_prefers_smallest_on_ties() {
        let train: Vec<Article> = (0..6)
            .map(|i| article(&format!("t{i}"), &format!("word{i} shared")))
            .collect();
        let labels: Vec<FrameSet> = (0..6)
            .map(|i| {
                if i % 2 == 0 {
                    FrameSet::from_frames([Frame::Moral])
                } else {
                    FrameSet::EMPTY
                }
            })
            .collect();
        let dev = vec![(
            article("d", "word0 shared"),
            FrameSet::from_frames([Frame::Moral]),
        )];
        let model = KnnModel::fit(&train, &all_rows(&labels), &dev, &[5, 1, 3], None).unwrap();
        assert_eq!(model.k(Frame::Moral), 1);
        // Grid values above the training size are skipped.
        let model = KnnModel::fit(&train, &all_rows(&labels), &dev, &[25], None).unwrap();
        assert_eq!(model.k(Frame::Moral), 6);
    }

    proptest! {
        #[test]
        fn majority_ignores_order(bits in prop::collection::vec(0u8..32, 1..40)) {
            let labels: Vec<FrameSet> = bits.iter().map(|&b| FrameSet::from_bits(b)).collect();
            let mut rev = labels.clone();
            rev.reverse();
            prop_assert_eq!(MajorityModel::fit(&labels).unwrap(), MajorityModel::fit(&rev).unwrap());
        }

        #[test]
        fn knn_with_full_k_equals_majority(
            bits in prop::collection::vec(0u8..32, 1..15),
            words in prop::collection::vec("[a-z]{3,6}", 15),
        ) {
            let train: Vec<Article> = bits
                .iter()
                .enumerate()
                .map(|(i, _)| article(&format!("t{i}"), &format!("{} {}", words[i], words[(i + 3) % 15])))
                .collect();
            let labels: Vec<FrameSet> = bits.iter().map(|&b| FrameSet::from_bits(b)).collect();
            let model = KnnModel::fit(&train, &all_rows(&labels), &[], &[train.len()], None).unwrap();
            let majority = MajorityModel::fit(&labels).unwrap().predict();
            prop_assert_eq!(model.predict(&article("q", &words[0])), majority);
        }
    }
}
