use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Article;
use crate::embed::{Embedder, EmbeddingVector};
use crate::error::{Error, Result};

/// Sparse vector as `(term index, weight)` pairs sorted by index.
pub type SparseVector = Vec<(usize, f64)>;

/// TF-IDF over lowercased whitespace tokens with smoothed idf
/// `ln((1 + N) / (1 + df)) + 1` and L2-normalized rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TfidfVectorizer {
    /// Sorted vocabulary; a term's index is its position.
    terms: Vec<String>,
    idf: Vec<f64>,
}

fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace().map(str::to_lowercase)
}

impl TfidfVectorizer {
    pub fn fit(corpus: &[Article]) -> Result<Self> {
        let texts: Vec<String> = corpus.iter().map(Article::full_text).collect();
        Self::fit_texts(&texts)
    }

    pub fn fit_texts<S: AsRef<str>>(docs: &[S]) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::invalid("cannot fit TF-IDF on an empty corpus"));
        }
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for doc in docs {
            let mut terms: Vec<String> = tokenize(doc.as_ref()).collect();
            terms.sort_unstable();
            terms.dedup();
            for t in terms {
                *df.entry(t).or_default() += 1;
            }
        }
        if df.is_empty() {
            return Err(Error::invalid("TF-IDF corpus has no tokens"));
        }
        let n = docs.len() as f64;
        let (terms, idf) = df
            .into_iter()
            .map(|(t, d)| (t, ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0))
            .unzip();
        Ok(TfidfVectorizer { terms, idf })
    }

    pub fn vocabulary_size(&self) -> usize {
        self.terms.len()
    }

    pub fn term_index(&self, term: &str) -> Option<usize> {
        self.terms.binary_search_by(|t| t.as_str().cmp(term)).ok()
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.term_index(term).map(|i| self.idf[i])
    }

    /// Out-of-vocabulary tokens are ignored.
    pub fn transform(&self, text: &str) -> SparseVector {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for tok in tokenize(text) {
            if let Some(i) = self.term_index(&tok) {
                *counts.entry(i).or_default() += 1.0;
            }
        }
        let mut row: SparseVector = counts
            .into_iter()
            .map(|(i, c)| (i, c * self.idf[i]))
            .collect();
        let norm = row.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, w) in &mut row {
                *w /= norm;
            }
        }
        row
    }

    pub fn transform_dense(&self, text: &str) -> EmbeddingVector {
        let mut dense = vec![0.0; self.terms.len()];
        for (i, w) in self.transform(text) {
            dense[i] = w;
        }
        EmbeddingVector::new(dense).expect("vocabulary is non-empty")
    }
}

impl Embedder for TfidfVectorizer {
    fn dim(&self) -> usize {
        self.terms.len()
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        Ok(texts.iter().map(|t| self.transform_dense(t)).collect())
    }
}

/// Squared Euclidean distance between sparse vectors sorted by index.
pub fn sparse_sq_distance(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut acc = 0.0;
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some(&(ia, wa)), Some(&(ib, wb))) if ia == ib => {
                acc += (wa - wb) * (wa - wb);
                i += 1;
                j += 1;
            }
            (Some(&(ia, wa)), Some(&(ib, _))) if ia < ib => {
                acc += wa * wa;
                i += 1;
            }
            (Some(_), Some(&(_, wb))) => {
                acc += wb * wb;
                j += 1;
            }
            (Some(&(_, wa)), None) => {
                acc += wa * wa;
                i += 1;
            }
            (None, Some(&(_, wb))) => {
                acc += wb * wb;
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_document_is_proportional_to_counts() {
        let v = TfidfVectorizer::fit_texts(&["a a b"]).unwrap();
        assert_eq!(v.idf("a"), v.idf("b"));
        let row = v.transform("a a b");
        let wa = row[v.term_index("a").unwrap()].1;
        let wb = row
            .iter()
            .find(|(i, _)| *i == v.term_index("b").unwrap())
            .unwrap()
            .1;
        assert!((wa / wb - 2.0).abs() < 1e-12);
    }

    #[test]
    fn unseen_terms_contribute_nothing() {
        let v = TfidfVectorizer::fit_texts(&["a b"]).unwrap();
        assert!(v.transform("zzz").is_empty());
        assert_eq!(v.transform("a zzz"), v.transform("a"));
    }

    #[test]
    fn rarer_terms_weigh_more() {
        // df(a) = 2, df(b) = 1 over {"a b", "a c"}
        let v = TfidfVectorizer::fit_texts(&["a b", "a c"]).unwrap();
        let idf_a = (3.0f64 / 3.0).ln() + 1.0;
        let idf_b = (3.0f64 / 2.0).ln() + 1.0;
        assert!((v.idf("a").unwrap() - idf_a).abs() < 1e-12);
        assert!((v.idf("b").unwrap() - idf_b).abs() < 1e-12);
        let row = v.transform("a b");
        let norm = (idf_a * idf_a + idf_b * idf_b).sqrt();
        assert!((row[0].1 - idf_a / norm).abs() < 1e-12);
        assert!((row[1].1 - idf_b / norm).abs() < 1e-12);
        assert!(row[0].1 < row[1].1);
    }

    #[test]
    fn fitted_documents_have_unit_norm() {
        let docs = ["The sea rises", "the SEA falls fast", "rain"];
        let v = TfidfVectorizer::fit_texts(&docs).unwrap();
        for d in docs {
            let n: f64 = v.transform(d).iter().map(|(_, w)| w * w).sum();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(TfidfVectorizer::fit_texts::<&str>(&[]).is_err());
        assert!(TfidfVectorizer::fit_texts(&["   "]).is_err());
    }

    #[test]
    fn sparse_distance_matches_dense() {
        let v = TfidfVectorizer::fit_texts(&["a b c", "b c d", "e"]).unwrap();
        let (x, y) = ("a b", "c d d e");
        let dx = v.transform_dense(x);
        let dy = v.transform_dense(y);
        let dense: f64 = dx
            .values()
            .iter()
            .zip(dy.values())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        assert!((sparse_sq_distance(&v.transform(x), &v.transform(y)) - dense).abs() < 1e-12);
    }
}
