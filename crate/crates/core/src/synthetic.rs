//! Generated corpora with planted frame evidence, for benchmarks and tests.
//!
//! Each article mixes neutral filler sentences with one to three sentences
//! per present frame that reuse the words of that frame's description. The
//! planted positions are recorded so retrieval quality can be checked.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::annotation::LabelRecord;
use crate::corpus::Article;
use crate::frame::{Frame, FrameSet, Leaning};
use crate::rbf::FrameDescriptions;

const FILLER: &[&str] = &[
    "weather",
    "station",
    "reported",
    "tuesday",
    "river",
    "village",
    "morning",
    "readings",
    "coastal",
    "survey",
    "satellite",
    "warming",
    "winter",
    "summer",
    "temperature",
    "rainfall",
    "glacier",
    "sensors",
    "published",
    "monday",
    "city",
    "council",
    "meeting",
    "data",
    "record",
    "northern",
    "southern",
    "forecast",
    "ocean",
    "ice",
    "measured",
    "decade",
    "average",
    "level",
    "season",
    "storm",
    "emissions",
    "carbon",
    "climate",
    "local",
    "observers",
    "noted",
    "week",
    "area",
    "region",
    "west",
    "east",
    "hills",
    "lake",
    "valley",
];

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub n_articles: usize,
    pub seed: u64,
    /// Chance that a frame is present in an article.
    pub positive_rate: f64,
    pub filler_sentences: (usize, usize),
    pub planted_per_frame: (usize, usize),
    pub id_prefix: String,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_articles: 200,
            seed: 1042,
            positive_rate: 0.4,
            filler_sentences: (4, 9),
            planted_per_frame: (1, 3),
            id_prefix: "syn".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub articles: Vec<Article>,
    pub labels: Vec<LabelRecord>,
    /// Planted sentence indices per article and frame.
    pub planted: BTreeMap<String, [Vec<usize>; Frame::COUNT]>,
}

impl SyntheticCorpus {
    pub fn is_planted(&self, article_id: &str, frame: Frame, sentence: usize) -> bool {
        self.planted
            .get(article_id)
            .is_some_and(|p| p[frame.index()].contains(&sentence))
    }

    pub fn gold(&self) -> BTreeMap<String, FrameSet> {
        self.labels
            .iter()
            .map(|l| (l.article_id.clone(), l.frames))
            .collect()
    }
}

fn words(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase()
        })
        .filter(|w| !w.is_empty() && w != "etc")
        .collect()
}

fn sentence(mut parts: Vec<String>) -> String {
    if let Some(first) = parts.first_mut() {
        let mut cs = first.chars();
        if let Some(c) = cs.next() {
            *first = c.to_uppercase().chain(cs).collect();
        }
    }
    format!("{}.", parts.join(" "))
}

fn filler_words(rng: &mut ChaCha8Rng, n: usize) -> Vec<String> {
    (0..n)
        .map(|_| FILLER[rng.random_range(0..FILLER.len())].to_string())
        .collect()
}

/// Words unique to a description are always kept; shared words are kept
/// with probability 0.6. A few filler words pad both ends.
fn planted_sentence(rng: &mut ChaCha8Rng, own: &[String], others: &BTreeSet<String>) -> String {
    let head = rng.random_range(1..=3);
    let mut parts = filler_words(rng, head);
    parts.extend(
        own.iter()
            .filter(|w| !others.contains(*w) || rng.random_bool(0.6))
            .cloned(),
    );
    let tail = rng.random_range(1..=2);
    parts.extend(filler_words(rng, tail));
    sentence(parts)
}

pub fn generate(cfg: &SyntheticConfig, descriptions: &FrameDescriptions) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let vocab: Vec<Vec<String>> = Frame::ALL
        .iter()
        .map(|f| words(descriptions.get(*f)))
        .collect();
    let others: Vec<BTreeSet<String>> = Frame::ALL
        .iter()
        .map(|f| {
            vocab
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != f.index())
                .flat_map(|(_, v)| v.iter().cloned())
                .collect()
        })
        .collect();

    let mut articles = Vec::with_capacity(cfg.n_articles);
    let mut labels = Vec::with_capacity(cfg.n_articles);
    let mut planted = BTreeMap::new();
    for i in 0..cfg.n_articles {
        let id = format!("{}{i:04}", cfg.id_prefix);
        let frames: FrameSet = Frame::ALL
            .into_iter()
            .filter(|_| rng.random_bool(cfg.positive_rate))
            .collect();

        // (frame index or None for filler, text)
        let mut sentences: Vec<(Option<usize>, String)> = Vec::new();
        let fillers = rng.random_range(cfg.filler_sentences.0..=cfg.filler_sentences.1);
        for _ in 0..fillers {
            let n = rng.random_range(5..=10);
            sentences.push((None, sentence(filler_words(&mut rng, n))));
        }
        for f in frames.iter() {
            let k = rng.random_range(cfg.planted_per_frame.0..=cfg.planted_per_frame.1);
            for _ in 0..k {
                let s = planted_sentence(&mut rng, &vocab[f.index()], &others[f.index()]);
                sentences.push((Some(f.index()), s));
            }
        }
        sentences.shuffle(&mut rng);

        let mut spots: [Vec<usize>; Frame::COUNT] = Default::default();
        for (pos, (frame, _)) in sentences.iter().enumerate() {
            if let Some(f) = frame {
                spots[*f].push(pos);
            }
        }
        let body = sentences
            .iter()
            .map(|(_, s)| s.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        articles.push(Article {
            id: id.clone(),
            title: format!("Climate change report {i}"),
            body,
            outlet: format!("outlet{}", i % 7),
            leaning: Leaning::ALL[i % Leaning::ALL.len()],
            date: format!("2018-{:02}-{:02}", 1 + i % 12, 1 + i % 28),
        });
        labels.push(LabelRecord {
            article_id: id.clone(),
            frames,
            n_annotators: 0,
            role_entities: BTreeMap::new(),
            config_digest: None,
        });
        planted.insert(id, spots);
    }
    SyntheticCorpus {
        articles,
        labels,
        planted,
    }
}
