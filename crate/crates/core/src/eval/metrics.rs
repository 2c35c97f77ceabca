use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::balance_upsample;
use crate::error::{Error, Result};
use crate::frame::{Frame, FrameSet};
use crate::rbf::FramePrediction;

/// Multi-labels seen fewer times than this are left out of the label report.
pub const DEFAULT_MIN_LABEL_COUNT: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameScores {
    pub frame: Frame,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// `2PR / (P + R)`, or 0 when both are 0.
pub fn harmonic_f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

fn check_pair(pred: &[FrameSet], gold: &[FrameSet]) -> Result<()> {
    if pred.len() != gold.len() {
        return Err(Error::DimensionMismatch {
            left: pred.len(),
            right: gold.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::invalid("evaluation set is empty"));
    }
    Ok(())
}

fn scores_from_pairs(frame: Frame, pairs: impl Iterator<Item = (bool, bool)>) -> FrameScores {
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for pair in pairs {
        match pair {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    FrameScores {
        frame,
        tp,
        fp,
        fn_,
        tn,
        precision,
        recall,
        f1: harmonic_f1(precision, recall),
    }
}

/// Positive-class confusion counts per frame. A precision or recall with a
/// zero denominator is 0.
pub fn frame_scores(pred: &[FrameSet], gold: &[FrameSet]) -> Result<Vec<FrameScores>> {
    check_pair(pred, gold)?;
    Ok(Frame::ALL
        .into_iter()
        .map(|frame| {
            scores_from_pairs(
                frame,
                pred.iter()
                    .zip(gold)
                    .map(|(p, g)| (p.contains(frame), g.contains(frame))),
            )
        })
        .collect())
}

/// Per-frame scores after upsampling each frame's minority gold class to
/// 1:1 with seed `seed + frame index`. A frame whose gold labels are all one
/// class is scored as is.
pub fn frame_scores_balanced(
    pred: &[FrameSet],
    gold: &[FrameSet],
    seed: u64,
) -> Result<Vec<FrameScores>> {
    check_pair(pred, gold)?;
    Frame::ALL
        .into_iter()
        .map(|frame| {
            let pairs: Vec<(bool, bool)> = pred
                .iter()
                .zip(gold)
                .map(|(p, g)| (p.contains(frame), g.contains(frame)))
                .collect();
            let single_class = pairs.iter().all(|p| p.1) || pairs.iter().all(|p| !p.1);
            let pairs = if single_class {
                pairs
            } else {
                balance_upsample(pairs, seed.wrapping_add(frame.index() as u64))?
            };
            Ok(scores_from_pairs(frame, pairs.into_iter()))
        })
        .collect()
}

/// Unweighted means of per-frame precision and recall.
pub fn macro_pr(pred: &[FrameSet], gold: &[FrameSet]) -> Result<(f64, f64)> {
    let scores = frame_scores(pred, gold)?;
    let n = scores.len() as f64;
    Ok((
        scores.iter().map(|s| s.precision).sum::<f64>() / n,
        scores.iter().map(|s| s.recall).sum::<f64>() / n,
    ))
}

/// Share of articles whose predicted set equals the gold set.
pub fn exact_match_rate(pred: &[FrameSet], gold: &[FrameSet]) -> Result<f64> {
    check_pair(pred, gold)?;
    Ok(ratio(
        pred.iter().zip(gold).filter(|(p, g)| p == g).count(),
        pred.len(),
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelRow {
    pub label: FrameSet,
    pub n: usize,
    pub exact_match: f64,
}

/// Exact-match rate per gold multi-label occurring at least `min_count`
/// times, best first. Ties go to the larger count, then to the smaller
/// bitmask.
pub fn label_report(
    pred: &[FrameSet],
    gold: &[FrameSet],
    min_count: usize,
) -> Result<Vec<LabelRow>> {
    check_pair(pred, gold)?;
    let mut counts: BTreeMap<u8, (usize, usize)> = BTreeMap::new();
    for (p, g) in pred.iter().zip(gold) {
        let e = counts.entry(g.bits()).or_default();
        e.0 += 1;
        e.1 += usize::from(p == g);
    }
    let mut rows: Vec<LabelRow> = counts
        .into_iter()
        .filter(|(_, (n, _))| *n >= min_count.max(1))
        .map(|(bits, (n, hits))| LabelRow {
            label: FrameSet::from_bits(bits),
            n,
            exact_match: ratio(hits, n),
        })
        .collect();
    rows.sort_by(|a, b| {
        b.exact_match
            .total_cmp(&a.exact_match)
            .then(b.n.cmp(&a.n))
            .then(a.label.bits().cmp(&b.label.bits()))
    });
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_articles: usize,
    /// Per-frame scores were computed on class-balanced test labels.
    #[serde(default)]
    pub balanced: bool,
    pub frames: Vec<FrameScores>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    /// Harmonic mean of the macro precision and recall.
    pub f1: f64,
    /// Mean of the per-frame F1 scores.
    pub mean_frame_f1: f64,
    pub exact_match: f64,
    pub labels: Vec<LabelRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EvalOptions {
    pub min_label_count: usize,
    /// Balance each frame's test labels before per-frame scoring. Exact match
    /// and the label report always use the natural distribution.
    pub balance_seed: Option<u64>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            min_label_count: DEFAULT_MIN_LABEL_COUNT,
            balance_seed: None,
        }
    }
}

/// Score predictions for every predicted article against gold. Every
/// predicted article needs a gold label; gold may hold more articles.
pub fn evaluate(
    pred: &BTreeMap<String, FrameSet>,
    gold: &BTreeMap<String, FrameSet>,
) -> Result<MetricsReport> {
    evaluate_with(pred, gold, &EvalOptions::default())
}

pub fn evaluate_with(
    pred: &BTreeMap<String, FrameSet>,
    gold: &BTreeMap<String, FrameSet>,
    opts: &EvalOptions,
) -> Result<MetricsReport> {
    if pred.is_empty() {
        return Err(Error::invalid("no predictions to evaluate"));
    }
    let mut p = Vec::with_capacity(pred.len());
    let mut g = Vec::with_capacity(pred.len());
    for (id, set) in pred {
        let gold_set = gold.get(id).ok_or_else(|| {
            Error::invalid(format!("article `{id}` has predictions but no gold label"))
        })?;
        p.push(*set);
        g.push(*gold_set);
    }
    let frames = match opts.balance_seed {
        Some(seed) => frame_scores_balanced(&p, &g, seed)?,
        None => frame_scores(&p, &g)?,
    };
    let n = frames.len() as f64;
    let macro_precision = frames.iter().map(|s| s.precision).sum::<f64>() / n;
    let macro_recall = frames.iter().map(|s| s.recall).sum::<f64>() / n;
    Ok(MetricsReport {
        n_articles: p.len(),
        balanced: opts.balance_seed.is_some(),
        macro_precision,
        macro_recall,
        f1: harmonic_f1(macro_precision, macro_recall),
        mean_frame_f1: frames.iter().map(|s| s.f1).sum::<f64>() / n,
        exact_match: exact_match_rate(&p, &g)?,
        labels: label_report(&p, &g, opts.min_label_count)?,
        frames,
        config_digest: None,
    })
}

/// Collapse per-frame prediction lines into one set per article. Each
/// article must have exactly one line per frame.
pub fn predictions_to_sets(preds: &[FramePrediction]) -> Result<BTreeMap<String, FrameSet>> {
    let mut seen: BTreeMap<&str, (FrameSet, FrameSet)> = BTreeMap::new();
    for p in preds {
        let (covered, predicted) = seen.entry(p.article_id.as_str()).or_default();
        if covered.contains(p.frame) {
            return Err(Error::invalid(format!(
                "duplicate {} prediction for article `{}`",
                p.frame, p.article_id
            )));
        }
        covered.insert(p.frame);
        predicted.set(p.frame, p.predicted);
    }
    seen.into_iter()
        .map(|(id, (covered, predicted))| {
            if covered.len() != Frame::COUNT {
                return Err(Error::invalid(format!(
                    "article `{id}` lacks predictions for some frames"
                )));
            }
            Ok((id.to_string(), predicted))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return MeanStd::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        MeanStd { mean, std }
    }
}

/// Mean and spread of fold-level reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub n_folds: usize,
    pub macro_precision: MeanStd,
    pub macro_recall: MeanStd,
    pub f1: MeanStd,
    pub mean_frame_f1: MeanStd,
    pub exact_match: MeanStd,
    pub frame_f1: BTreeMap<Frame, MeanStd>,
    pub folds: Vec<MetricsReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
}

impl FoldSummary {
    pub fn from_reports(folds: Vec<MetricsReport>) -> Result<Self> {
        if folds.is_empty() {
            return Err(Error::invalid("no fold reports to summarise"));
        }
        let stat = |f: &dyn Fn(&MetricsReport) -> f64| {
            MeanStd::of(&folds.iter().map(f).collect::<Vec<_>>())
        };
        let frame_f1 = Frame::ALL
            .into_iter()
            .map(|fr| (fr, stat(&|r: &MetricsReport| r.frames[fr.index()].f1)))
            .collect();
        Ok(FoldSummary {
            n_folds: folds.len(),
            macro_precision: stat(&|r| r.macro_precision),
            macro_recall: stat(&|r| r.macro_recall),
            f1: stat(&|r| r.f1),
            mean_frame_f1: stat(&|r| r.mean_frame_f1),
            exact_match: stat(&|r| r.exact_match),
            frame_f1,
            folds,
            config_digest: None,
        })
    }

    /// Aligned text table: macro scores, then per-frame F1, each as
    /// `mean (std)`.
    pub fn to_table(&self, method: &str) -> String {
        let cell = |m: MeanStd| format!("{:.2} ({:.2})", m.mean, m.std);
        let width = method.len().max(6);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>11}  {:>11}  {:>11}  {:>11}",
            "Method", "Macro-Pr", "Macro-Re", "F1", "Exact"
        );
        let _ = writeln!(
            out,
            "{:<width$}  {:>11}  {:>11}  {:>11}  {:>11}",
            method,
            cell(self.macro_precision),
            cell(self.macro_recall),
            cell(self.f1),
            cell(self.exact_match)
        );
        out.push('\n');
        let _ = write!(out, "{:<width$}", "Method");
        for f in Frame::ALL {
            let _ = write!(out, "  {:>11}", f.code());
        }
        let _ = write!(out, "  {:>11}\n{:<width$}", "Mean", method);
        for f in Frame::ALL {
            let _ = write!(out, "  {:>11}", cell(self.frame_f1[&f]));
        }
        let _ = writeln!(out, "  {:>11}", cell(self.mean_frame_f1));
        let _ = writeln!(
            out,
            "\n({} fold{})",
            self.n_folds,
            if self.n_folds == 1 { "" } else { "s" }
        );
        out
    }
}
