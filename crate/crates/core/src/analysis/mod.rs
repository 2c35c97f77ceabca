//! Cross-tabulations of frames, roles, stakeholders and outlet leaning.

mod render;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::annotation::{
    map_stakeholder, AnnotationRecord, LabelRecord, StakeholderCategory, StakeholderLexicon,
};
use crate::error::{Error, Result};
use crate::frame::{Frame, Leaning, Role};

pub use render::{render_svg, ChartKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Rows,
    Cols,
}

/// A labeled matrix of counts or shares.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossTab {
    pub row_dim: String,
    pub col_dim: String,
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub values: Vec<Vec<f64>>,
    /// Set when rows or columns were scaled to sum to one.
    pub normalized: Option<Axis>,
}

impl CrossTab {
    pub fn zeros(row_dim: &str, col_dim: &str, rows: Vec<String>, cols: Vec<String>) -> Self {
        let values = vec![vec![0.0; cols.len()]; rows.len()];
        CrossTab {
            row_dim: row_dim.into(),
            col_dim: col_dim.into(),
            rows,
            cols,
            values,
            normalized: None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty() || self.cols.is_empty()
    }

    pub fn get(&self, row: &str, col: &str) -> Option<f64> {
        let r = self.rows.iter().position(|x| x == row)?;
        let c = self.cols.iter().position(|x| x == col)?;
        Some(self.values[r][c])
    }

    pub fn total(&self) -> f64 {
        self.values.iter().flatten().sum()
    }

    /// Scale each row or column to sum to one; all-zero lines stay zero.
    pub fn normalize(&self, axis: Axis) -> CrossTab {
        let mut out = self.clone();
        match axis {
            Axis::Rows => {
                for row in &mut out.values {
                    let s: f64 = row.iter().sum();
                    if s > 0.0 {
                        row.iter_mut().for_each(|v| *v /= s);
                    }
                }
            }
            Axis::Cols => {
                for c in 0..out.cols.len() {
                    let s: f64 = out.values.iter().map(|r| r[c]).sum();
                    if s > 0.0 {
                        out.values.iter_mut().for_each(|r| r[c] /= s);
                    }
                }
            }
        }
        out.normalized = Some(axis);
        out
    }

    /// CSV with a header row and a label column. The corner cell records
    /// the dimensions as `row_dim\col_dim`, plus `|rows` or `|cols` when
    /// normalized. Numbers use the shortest exact representation.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let corner = match self.normalized {
            None => format!("{}\\{}", self.row_dim, self.col_dim),
            Some(Axis::Rows) => format!("{}\\{}|rows", self.row_dim, self.col_dim),
            Some(Axis::Cols) => format!("{}\\{}|cols", self.row_dim, self.col_dim),
        };
        let mut header = vec![corner];
        header.extend(self.cols.iter().cloned());
        w.write_record(&header)?;
        for (label, row) in self.rows.iter().zip(&self.values) {
            let mut rec = vec![label.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::invalid(e.to_string()))
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(text.as_bytes());
        let mut records = r.records();
        let header = records
            .next()
            .ok_or_else(|| Error::invalid("empty cross-tab CSV"))??;
        let corner = header.get(0).unwrap_or_default();
        let (dims, normalized) = match corner.rsplit_once('|') {
            Some((d, "rows")) => (d, Some(Axis::Rows)),
            Some((d, "cols")) => (d, Some(Axis::Cols)),
            _ => (corner, None),
        };
        let (row_dim, col_dim) = dims
            .split_once('\\')
            .ok_or_else(|| Error::invalid(format!("corner cell `{corner}` lacks `row\\col`")))?;
        let cols: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut rows = Vec::new();
        let mut values = Vec::new();
        for (i, rec) in records.enumerate() {
            let rec = rec?;
            if rec.len() != cols.len() + 1 {
                return Err(Error::Malformed {
                    line: i + 2,
                    message: format!("expected {} fields, found {}", cols.len() + 1, rec.len()),
                });
            }
            rows.push(rec[0].to_string());
            values.push(
                rec.iter()
                    .skip(1)
                    .map(|v| {
                        v.parse::<f64>().map_err(|e| Error::Malformed {
                            line: i + 2,
                            message: format!("`{v}`: {e}"),
                        })
                    })
                    .collect::<Result<Vec<f64>>>()?,
            );
        }
        Ok(CrossTab {
            row_dim: row_dim.into(),
            col_dim: col_dim.into(),
            rows,
            cols,
            values,
            normalized,
        })
    }
}

fn frame_cols() -> Vec<String> {
    Frame::ALL.iter().map(|f| f.code().to_string()).collect()
}

fn role_rows() -> Vec<String> {
    Role::ALL.iter().map(|r| r.name().to_string()).collect()
}

fn leaning_labels() -> Vec<String> {
    Leaning::ALL.iter().map(|l| l.code().to_string()).collect()
}

/// One annotator's entity string for one role in one article.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RoleRecord {
    pub article_id: String,
    pub role: Role,
    pub annotator_id: String,
    pub entity: String,
}

/// Every extraction stored in a labels file.
pub fn role_records_from_labels(labels: &[LabelRecord]) -> Vec<RoleRecord> {
    labels
        .iter()
        .flat_map(|l| {
            l.role_entities.iter().flat_map(move |(role, ents)| {
                ents.iter().map(move |e| RoleRecord {
                    article_id: l.article_id.clone(),
                    role: *role,
                    annotator_id: e.annotator_id.clone(),
                    entity: e.entity.clone(),
                })
            })
        })
        .collect()
}

/// Every non-empty role entity in raw annotations.
pub fn role_records_from_annotations(records: &[AnnotationRecord]) -> Vec<RoleRecord> {
    records
        .iter()
        .flat_map(|r| {
            Role::ALL.into_iter().filter_map(move |role| {
                r.role_entities.get(role).map(|e| RoleRecord {
                    article_id: r.article_id.clone(),
                    role,
                    annotator_id: r.annotator_id.clone(),
                    entity: e.to_string(),
                })
            })
        })
        .collect()
}

/// Share of each leaning's labeled articles that carry each frame. Rows
/// need not sum to one.
pub fn frame_by_leaning(
    labels: &[LabelRecord],
    leanings: &HashMap<String, Leaning>,
) -> Result<CrossTab> {
    let mut counts = CrossTab::zeros("leaning", "frame", leaning_labels(), frame_cols());
    let mut totals = [0usize; 4];
    for l in labels {
        let leaning = leanings.get(&l.article_id).ok_or_else(|| {
            Error::invalid(format!("no leaning for labeled article `{}`", l.article_id))
        })?;
        let r = Leaning::ALL
            .iter()
            .position(|x| x == leaning)
            .expect("leaning in ALL");
        totals[r] += 1;
        for f in l.frames.iter() {
            counts.values[r][f.index()] += 1.0;
        }
    }
    for (row, total) in counts.values.iter_mut().zip(totals) {
        if total > 0 {
            row.iter_mut().for_each(|v| *v /= total as f64);
        }
    }
    Ok(counts)
}

/// Count of role extractions per frame of the article they come from. An
/// extraction counts once for every frame the article carries.
pub fn role_frame_cooccurrence(records: &[RoleRecord], labels: &[LabelRecord]) -> Result<CrossTab> {
    let frames: HashMap<&str, _> = labels
        .iter()
        .map(|l| (l.article_id.as_str(), l.frames))
        .collect();
    let mut t = CrossTab::zeros("role", "frame", role_rows(), frame_cols());
    for r in records {
        let set = frames.get(r.article_id.as_str()).ok_or_else(|| {
            Error::invalid(format!(
                "role record for unlabeled article `{}`",
                r.article_id
            ))
        })?;
        for f in set.iter() {
            t.values[r.role as usize][f.index()] += 1.0;
        }
    }
    Ok(t)
}

fn category_labels() -> Vec<String> {
    StakeholderCategory::ALL
        .iter()
        .map(|c| c.label().to_string())
        .collect()
}

fn category_index(c: StakeholderCategory) -> usize {
    StakeholderCategory::ALL
        .iter()
        .position(|x| *x == c)
        .expect("category in ALL")
}

/// Count of role extractions per stakeholder category; unmapped entities
/// count as Other.
pub fn role_stakeholder(records: &[RoleRecord], lexicon: &StakeholderLexicon) -> CrossTab {
    let mut t = CrossTab::zeros("role", "stakeholder", role_rows(), category_labels());
    for r in records {
        t.values[r.role as usize][category_index(map_stakeholder(&r.entity, lexicon))] += 1.0;
    }
    t
}

/// Roles given to one stakeholder category, split by outlet leaning.
pub fn stakeholder_roles_by_leaning(
    category: StakeholderCategory,
    records: &[RoleRecord],
    lexicon: &StakeholderLexicon,
    leanings: &HashMap<String, Leaning>,
) -> Result<CrossTab> {
    let mut t = CrossTab::zeros("role", "leaning", role_rows(), leaning_labels());
    for r in records {
        if map_stakeholder(&r.entity, lexicon) != category {
            continue;
        }
        let leaning = leanings
            .get(&r.article_id)
            .ok_or_else(|| Error::invalid(format!("no leaning for article `{}`", r.article_id)))?;
        let c = Leaning::ALL
            .iter()
            .position(|x| x == leaning)
            .expect("leaning in ALL");
        t.values[r.role as usize][c] += 1.0;
    }
    Ok(t)
}
