//! News corpus loading, keyword filtering, sentence segmentation and token
//! truncation.

use std::collections::HashSet;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::frame::Leaning;
use crate::jsonl;

/// One news article with outlet metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Article {
    pub id: String,
    pub title: String,
    pub body: String,
    pub outlet: String,
    pub leaning: Leaning,
    #[serde(deserialize_with = "de_date")]
    pub date: String,
}

impl Article {
    /// Body sentences, segmented with [`split_sentences`].
    pub fn sentences(&self) -> Vec<Sentence> {
        split_sentences(&self.body)
    }

    /// Title and body joined by a single space.
    pub fn full_text(&self) -> String {
        if self.title.is_empty() {
            self.body.clone()
        } else {
            format!("{} {}", self.title, self.body)
        }
    }
}

fn de_date<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<String, D::Error> {
    let s = String::deserialize(d)?;
    if is_iso_date(&s) {
        Ok(s)
    } else {
        Err(serde::de::Error::custom(format!(
            "date `{s}` is not YYYY-MM-DD"
        )))
    }
}

fn is_iso_date(s: &str) -> bool {
    let b = s.as_bytes();
    if b.len() != 10 || b[4] != b'-' || b[7] != b'-' {
        return false;
    }
    let digits = |r: std::ops::Range<usize>| b[r].iter().all(u8::is_ascii_digit);
    if !(digits(0..4) && digits(5..7) && digits(8..10)) {
        return false;
    }
    let month: u32 = s[5..7].parse().unwrap_or(0);
    let day: u32 = s[8..10].parse().unwrap_or(0);
    (1..=12).contains(&month) && (1..=31).contains(&day)
}

/// A sentence of an article body. `start..end` are byte offsets into the body.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub index: usize,
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Load a JSONL corpus, preserving file order. Unknown fields are ignored.
pub fn load_corpus(path: &Path) -> Result<Vec<Article>> {
    let articles: Vec<Article> = jsonl::read_jsonl(path)?;
    check_unique_ids(&articles)?;
    Ok(articles)
}

pub fn parse_corpus<R: std::io::Read>(reader: R) -> Result<Vec<Article>> {
    let articles: Vec<Article> = jsonl::parse_jsonl(reader)?;
    check_unique_ids(&articles)?;
    Ok(articles)
}

fn check_unique_ids(articles: &[Article]) -> Result<()> {
    let mut seen = HashSet::new();
    for a in articles {
        if !seen.insert(a.id.as_str()) {
            return Err(Error::invalid(format!("duplicate article id `{}`", a.id)));
        }
    }
    Ok(())
}

pub fn write_corpus(path: &Path, articles: &[Article]) -> Result<()> {
    jsonl::write_jsonl(path, articles)
}

/// Lowercase search terms for article selection.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeywordList {
    terms: Vec<String>,
}

impl KeywordList {
    pub fn new<I, S>(terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for t in terms {
            let t = t.as_ref().trim().to_lowercase();
            if t.is_empty() {
                continue;
            }
            if !seen.insert(t.clone()) {
                return Err(Error::invalid(format!("duplicate keyword `{t}`")));
            }
            out.push(t);
        }
        if out.is_empty() {
            return Err(Error::invalid("keyword list is empty"));
        }
        Ok(KeywordList { terms: out })
    }

    /// One term per line; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let terms = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty());
        Self::new(terms)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// The shipped climate-change glossary terms.
    pub fn bundled() -> Self {
        Self::parse(include_str!("../data/climate_keywords.txt"))
            .expect("bundled keywords are valid")
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }
}

/// Number of word-boundary, case-insensitive occurrences of `term` in `text`.
pub fn count_mentions(text: &str, term: &str) -> usize {
    let hay = text.to_lowercase();
    let needle = term.to_lowercase();
    if needle.is_empty() {
        return 0;
    }
    hay.match_indices(needle.as_str())
        .filter(|(pos, m)| {
            let before = hay[..*pos].chars().next_back();
            let after = hay[pos + m.len()..].chars().next();
            !before.is_some_and(char::is_alphanumeric) && !after.is_some_and(char::is_alphanumeric)
        })
        .count()
}

/// Relevant iff at least one keyword occurs in the title, or keyword mentions
/// in the body total at least three (repeated mentions count each time).
pub fn climate_filter(article: &Article, keywords: &KeywordList) -> bool {
    if keywords
        .terms()
        .iter()
        .any(|k| count_mentions(&article.title, k) > 0)
    {
        return true;
    }
    let mut mentions = 0;
    for k in keywords.terms() {
        mentions += count_mentions(&article.body, k);
        if mentions >= 3 {
            return true;
        }
    }
    false
}

/// Apply [`climate_filter`] in parallel; kept articles stay in input order.
pub fn filter_corpus(articles: Vec<Article>, keywords: &KeywordList) -> (Vec<Article>, usize) {
    let keep: Vec<bool> = articles
        .par_iter()
        .map(|a| climate_filter(a, keywords))
        .collect();
    let total = articles.len();
    let kept: Vec<Article> = articles
        .into_iter()
        .zip(keep)
        .filter_map(|(a, k)| k.then_some(a))
        .collect();
    let dropped = total - kept.len();
    (kept, dropped)
}

/// Tokens that end in a period but never end a sentence.
pub const ABBREVIATIONS: &[&str] = &[
    "Mr.", "Mrs.", "Ms.", "Dr.", "Prof.", "Sr.", "Jr.", "St.", "Mt.", "Sen.", "Rep.", "Gov.",
    "Gen.", "Lt.", "Col.", "Capt.", "Rev.", "Hon.", "Jan.", "Feb.", "Mar.", "Apr.", "Aug.", "Sep.",
    "Sept.", "Oct.", "Nov.", "Dec.", "U.S.", "U.K.", "U.N.", "E.U.", "D.C.", "e.g.", "i.e.", "vs.",
    "approx.", "No.",
];

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}')
}

/// Rule-based segmentation: a sentence ends after `.`, `!` or `?` (plus any
/// closing quotes or brackets) when followed by whitespace and an uppercase
/// letter, or by the end of the text. A period closing a token from
/// [`ABBREVIATIONS`] never ends a sentence. Sentence text excludes the
/// surrounding whitespace, so every gap between spans is whitespace.
pub fn split_sentences(text: &str) -> Vec<Sentence> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    let mut i = 0;

    while i < chars.len() {
        let (pos, c) = chars[i];
        if start.is_none() {
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            start = Some(pos);
        }
        if matches!(c, '.' | '!' | '?') {
            let mut j = i + 1;
            while j < chars.len()
                && (matches!(chars[j].1, '.' | '!' | '?') || is_closer(chars[j].1))
            {
                j += 1;
            }
            let end = chars.get(j).map_or(text.len(), |(p, _)| *p);
            let mut k = j;
            while k < chars.len() && chars[k].1.is_whitespace() {
                k += 1;
            }
            let boundary = if k == chars.len() {
                true
            } else {
                k > j && chars[k].1.is_uppercase()
            };
            let abbreviation = c == '.' && j == i + 1 && {
                let s = start.unwrap_or(0);
                let token_start = text[s..pos]
                    .char_indices()
                    .rfind(|(_, ch)| ch.is_whitespace())
                    .map_or(s, |(w, ch)| s + w + ch.len_utf8());
                ABBREVIATIONS.contains(&&text[token_start..end])
            };
            if boundary && !abbreviation {
                let s = start.take().unwrap_or(pos);
                out.push(Sentence {
                    index: out.len(),
                    text: text[s..end].to_string(),
                    start: s,
                    end,
                });
                i = k;
                continue;
            }
            i = j;
            continue;
        }
        i += 1;
    }

    if let Some(s) = start {
        let end = text.trim_end().len();
        if end > s {
            out.push(Sentence {
                index: out.len(),
                text: text[s..end].to_string(),
                start: s,
                end,
            });
        }
    }
    out
}

/// First `n` whitespace tokens joined by single spaces.
pub fn truncate_tokens(text: &str, n: usize) -> String {
    text.split_whitespace()
        .take(n)
        .collect::<Vec<_>>()
        .join(" ")
}
