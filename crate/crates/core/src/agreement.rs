//! Inter-annotator reliability: nominal Krippendorff's alpha, raw pairwise
//! agreement, and entity-string agreement (exact match and Rouge-L).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::annotation::{group_by_article, normalize_entity, AnnotationRecord, Codebook};
use crate::error::{Error, Result};
use crate::frame::Role;

/// Units × annotators table of optional binary answers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReliabilityMatrix {
    units: Vec<(String, String)>,
    annotators: Vec<String>,
    values: Vec<Vec<Option<bool>>>,
}

impl ReliabilityMatrix {
    /// Build from a dense `units × annotators` table. Units whose row is all
    /// missing are dropped.
    pub fn from_rows(rows: Vec<Vec<Option<bool>>>) -> Result<Self> {
        let n_annotators = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_annotators) {
            return Err(Error::invalid("ragged reliability table"));
        }
        let annotators = (0..n_annotators).map(|i| format!("a{i}")).collect();
        let units = (0..rows.len())
            .map(|i| (String::new(), format!("u{i}")))
            .collect();
        Self::new(units, annotators, rows)
    }

    fn new(
        units: Vec<(String, String)>,
        annotators: Vec<String>,
        values: Vec<Vec<Option<bool>>>,
    ) -> Result<Self> {
        if annotators.len() < 2 {
            return Err(Error::invalid("reliability needs at least two annotators"));
        }
        let (units, values): (Vec<_>, Vec<_>) = units
            .into_iter()
            .zip(values)
            .filter(|(_, row)| row.iter().any(Option::is_some))
            .unzip();
        Ok(ReliabilityMatrix {
            units,
            annotators,
            values,
        })
    }

    /// One unit per (article, retained indicator); one column per annotator.
    pub fn from_records(records: &[AnnotationRecord], codebook: &Codebook) -> Result<Self> {
        let mut annotators: Vec<String> = records.iter().map(|r| r.annotator_id.clone()).collect();
        annotators.sort();
        annotators.dedup();
        let column: BTreeMap<&str, usize> = annotators
            .iter()
            .enumerate()
            .map(|(i, a)| (a.as_str(), i))
            .collect();

        let mut units = Vec::new();
        let mut values = Vec::new();
        for (article_id, group) in group_by_article(records) {
            for q in codebook.retained() {
                let mut row = vec![None; annotators.len()];
                for r in &group {
                    if let Some(&v) = r.answers.get(&q.qid) {
                        row[column[r.annotator_id.as_str()]] = Some(v);
                    }
                }
                units.push((article_id.clone(), q.qid.clone()));
                values.push(row);
            }
        }
        Self::new(units, annotators, values)
    }

    pub fn units(&self) -> &[(String, String)] {
        &self.units
    }

    pub fn annotators(&self) -> &[String] {
        &self.annotators
    }

    pub fn rows(&self) -> &[Vec<Option<bool>>] {
        &self.values
    }
}

/// Nominal Krippendorff's alpha from the coincidence matrix, `1 - D_o / D_e`.
///
/// Units with fewer than two values are not pairable and are skipped. When
/// every pairable value is identical the expected disagreement is zero and
/// alpha is defined as 1.
pub fn krippendorff_alpha(m: &ReliabilityMatrix) -> Result<f64> {
    // coincidences[c][k] for c, k in {false, true}
    let mut coincidences = [[0.0f64; 2]; 2];
    for row in m.rows() {
        let present: Vec<bool> = row.iter().flatten().copied().collect();
        let m_u = present.len();
        if m_u < 2 {
            continue;
        }
        let ones = present.iter().filter(|v| **v).count() as f64;
        let zeros = m_u as f64 - ones;
        let w = 1.0 / (m_u as f64 - 1.0);
        coincidences[0][0] += zeros * (zeros - 1.0) * w;
        coincidences[1][1] += ones * (ones - 1.0) * w;
        coincidences[0][1] += zeros * ones * w;
        coincidences[1][0] += ones * zeros * w;
    }
    let n0 = coincidences[0][0] + coincidences[0][1];
    let n1 = coincidences[1][0] + coincidences[1][1];
    let n = n0 + n1;
    if n == 0.0 {
        return Err(Error::invalid("no unit has two or more values"));
    }
    let expected = 2.0 * n0 * n1;
    if expected == 0.0 {
        return Ok(1.0);
    }
    let observed = coincidences[0][1] + coincidences[1][0];
    Ok(1.0 - (n - 1.0) * observed / expected)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseAgreement {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Raw agreement per annotator pair over co-answered units; mean, min and max
/// over the pairs that share at least one unit.
pub fn pairwise_agreement(m: &ReliabilityMatrix) -> Result<PairwiseAgreement> {
    let k = m.annotators().len();
    let mut rates = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            let mut shared = 0usize;
            let mut equal = 0usize;
            for row in m.rows() {
                if let (Some(x), Some(y)) = (row[a], row[b]) {
                    shared += 1;
                    equal += (x == y) as usize;
                }
            }
            if shared > 0 {
                rates.push(equal as f64 / shared as f64);
            }
        }
    }
    if rates.is_empty() {
        return Err(Error::invalid("no annotator pair shares a unit"));
    }
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    let min = rates.iter().copied().fold(f64::INFINITY, f64::min);
    let max = rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(PairwiseAgreement { mean, min, max })
}

fn rouge_tokens(s: &str) -> Vec<String> {
    s.split_whitespace()
        .map(|t| {
            t.trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase()
        })
        .filter(|t| !t.is_empty())
        .collect()
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Rouge-L F-measure over lowercased whitespace tokens (surrounding
/// punctuation stripped). Zero when either side has no tokens.
pub fn rouge_l(a: &str, b: &str) -> f64 {
    let ta = rouge_tokens(a);
    let tb = rouge_tokens(b);
    if ta.is_empty() || tb.is_empty() {
        return 0.0;
    }
    let lcs = lcs_len(&ta, &tb) as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let precision = lcs / tb.len() as f64;
    let recall = lcs / ta.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Equality after entity normalization.
pub fn entity_exact_match(a: &str, b: &str) -> bool {
    normalize_entity(a) == normalize_entity(b)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntityAgreement {
    /// `None` when no role slot was filled by two or more annotators.
    pub exact_match_rate: Option<f64>,
    pub rouge_l_mean: Option<f64>,
    pub pairs: usize,
}

/// Entity agreement over every annotator pair that filled the same role slot
/// of the same article.
pub fn entity_agreement(records: &[AnnotationRecord]) -> EntityAgreement {
    let mut exact = 0usize;
    let mut rouge = 0.0;
    let mut pairs = 0usize;
    for (_, group) in group_by_article(records) {
        for role in Role::ALL {
            let entities: Vec<&str> = group
                .iter()
                .filter_map(|r| r.role_entities.get(role))
                .collect();
            for i in 0..entities.len() {
                for j in i + 1..entities.len() {
                    pairs += 1;
                    exact += entity_exact_match(entities[i], entities[j]) as usize;
                    rouge += rouge_l(entities[i], entities[j]);
                }
            }
        }
    }
    if pairs == 0 {
        return EntityAgreement {
            exact_match_rate: None,
            rouge_l_mean: None,
            pairs,
        };
    }
    EntityAgreement {
        exact_match_rate: Some(exact as f64 / pairs as f64),
        rouge_l_mean: Some(rouge / pairs as f64),
        pairs,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub alpha: f64,
    pub pairwise: PairwiseAgreement,
    pub entity: EntityAgreement,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
}

pub fn agreement_report(
    records: &[AnnotationRecord],
    codebook: &Codebook,
) -> Result<AgreementReport> {
    let matrix = ReliabilityMatrix::from_records(records, codebook)?;
    Ok(AgreementReport {
        alpha: krippendorff_alpha(&matrix)?,
        pairwise: pairwise_agreement(&matrix)?,
        entity: entity_agreement(records),
        config_digest: None,
    })
}
