//! Retrieval-based frame prediction.
//!
//! Sentences are ranked per frame by cosine similarity to a short frame
//! description. The top sentences, the remaining above-threshold sentences
//! and a truncated copy of the article form five channels whose embeddings
//! feed one logistic classifier per frame.

mod featurize;
pub(crate) mod model;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{truncate_tokens, Article, Sentence};
use crate::embed::{cosine, Embedder, EmbeddingVector};
use crate::error::{Error, Result};
use crate::frame::Frame;

pub use featurize::{predict_article, ArticleFeatures, Evidence, Featurizer, FramePrediction};
pub use model::{
    batch_gradient, batch_loss, epoch_batches, sigmoid, train_frame_model, FrameModel, TrainConfig,
};

pub const CHANNELS: usize = 5;
pub const TOP_K: usize = 3;
pub const DEFAULT_THETA: f64 = 0.15;
pub const ARTICLE_TOKENS: usize = 256;
pub const SEP: &str = " [SEP] ";

/// One description per frame, used as the retrieval query.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<Frame, String>", into = "BTreeMap<Frame, String>")]
pub struct FrameDescriptions([String; Frame::COUNT]);

impl FrameDescriptions {
    /// The canonical frame definitions.
    pub fn canonical() -> Self {
        FrameDescriptions([
            "solution/alleviation of the issue".into(),
            "disagreements between individuals, groups, institutions, countries, etc.".into(),
            "emotionalization and dramatization of an issue through the lens of affected individuals".into(),
            "moral or religious references".into(),
            "economic consequences for individuals, groups, institutions, countries, etc.".into(),
        ])
    }

    /// Shorter alternate wording. Its CO and HI texts are swapped relative to
    /// [`canonical`](Self::canonical), kept verbatim for comparison runs.
    pub fn alternate() -> Self {
        FrameDescriptions([
            "Solution or alleviation of the problem".into(),
            "Human interest, emotion or dramatization of events".into(),
            "Conflict or disagreement between two or more sides".into(),
            "Morality or religion".into(),
            "Economic consequences".into(),
        ])
    }

    pub fn get(&self, frame: Frame) -> &str {
        &self.0[frame.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (Frame, &str)> {
        Frame::ALL.into_iter().map(move |f| (f, self.get(f)))
    }
}

impl Default for FrameDescriptions {
    fn default() -> Self {
        Self::canonical()
    }
}

impl TryFrom<BTreeMap<Frame, String>> for FrameDescriptions {
    type Error = Error;

    fn try_from(map: BTreeMap<Frame, String>) -> Result<Self> {
        let mut out: [String; Frame::COUNT] = Default::default();
        for frame in Frame::ALL {
            match map.get(&frame) {
                Some(text) if !text.trim().is_empty() => out[frame.index()] = text.clone(),
                Some(_) => return Err(Error::Config(format!("description for {frame} is empty"))),
                None => return Err(Error::Config(format!("missing description for {frame}"))),
            }
        }
        Ok(FrameDescriptions(out))
    }
}

impl From<FrameDescriptions> for BTreeMap<Frame, String> {
    fn from(d: FrameDescriptions) -> Self {
        Frame::ALL.into_iter().zip(d.0).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub index: usize,
    pub rel: f64,
}

/// Sentences of one article ordered by relevance to one frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelevanceRanking {
    pub article_id: String,
    pub frame: Frame,
    pub entries: Vec<RankEntry>,
}

impl RelevanceRanking {
    /// Rank precomputed sentence vectors against a description vector.
    /// Descending relevance, ties to the lower sentence index.
    pub fn from_vectors(
        article_id: &str,
        frame: Frame,
        description: &EmbeddingVector,
        sentences: &[EmbeddingVector],
    ) -> Result<Self> {
        if sentences.is_empty() {
            return Err(Error::invalid(format!(
                "article `{article_id}` has no sentences"
            )));
        }
        let mut entries = sentences
            .iter()
            .enumerate()
            .map(|(index, v)| {
                Ok(RankEntry {
                    index,
                    rel: cosine(v, description)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        entries.sort_by(|a, b| b.rel.total_cmp(&a.rel).then(a.index.cmp(&b.index)));
        Ok(RelevanceRanking {
            article_id: article_id.to_string(),
            frame,
            entries,
        })
    }

    pub fn top(&self, k: usize) -> &[RankEntry] {
        &self.entries[..k.min(self.entries.len())]
    }
}

/// Rank an article's sentences against one description.
pub fn relevance_ranking(
    article: &Article,
    frame: Frame,
    description: &str,
    embedder: &dyn Embedder,
) -> Result<RelevanceRanking> {
    let sentences = article.sentences();
    if sentences.is_empty() {
        return Err(Error::invalid(format!(
            "article `{}` has no sentences",
            article.id
        )));
    }
    let texts: Vec<&str> = sentences.iter().map(|s| s.text.as_str()).collect();
    let vectors = embedder.embed(&texts)?;
    let desc = embedder.embed_one(description)?;
    RelevanceRanking::from_vectors(&article.id, frame, &desc, &vectors)
}

/// Which channels feed the classifier.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    #[default]
    Full,
    /// Article channel removed.
    NoArticle,
    /// Article and threshold channels removed.
    NoArticleNoThreshold,
}

impl Ablation {
    pub const ALL: [Ablation; 3] = [
        Ablation::Full,
        Ablation::NoArticle,
        Ablation::NoArticleNoThreshold,
    ];

    /// `true` for each channel that is kept.
    pub fn active(self) -> [bool; CHANNELS] {
        match self {
            Ablation::Full => [true; CHANNELS],
            Ablation::NoArticle => [true, true, true, true, false],
            Ablation::NoArticleNoThreshold => [true, true, true, false, false],
        }
    }
}

/// Texts of the five channels for one (article, frame) pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelTexts {
    pub article_id: String,
    pub frame: Frame,
    pub theta: f64,
    pub texts: [String; CHANNELS],
    /// Sentence indices that make up channels 1 to 4.
    pub top: Vec<usize>,
    pub above_threshold: Vec<usize>,
}

/// Select channel texts from a ranking.
///
/// Channels 1-3 hold the top three sentences (empty when the article is
/// shorter). Channel 4 joins, in document order, every other sentence with
/// relevance strictly above `theta`. Channel 5 is the title and body cut to
/// [`ARTICLE_TOKENS`] tokens.
pub fn channel_texts(
    article: &Article,
    sentences: &[Sentence],
    ranking: &RelevanceRanking,
    theta: f64,
) -> Result<ChannelTexts> {
    if ranking.article_id != article.id || ranking.entries.len() != sentences.len() {
        return Err(Error::invalid(format!(
            "ranking for `{}` does not belong to article `{}`",
            ranking.article_id, article.id
        )));
    }
    let mut texts: [String; CHANNELS] = Default::default();
    let top: Vec<usize> = ranking.top(TOP_K).iter().map(|e| e.index).collect();
    for (slot, &i) in top.iter().enumerate() {
        texts[slot] = sentences[i].text.clone();
    }
    let mut above: Vec<usize> = ranking.entries[top.len()..]
        .iter()
        .filter(|e| e.rel > theta)
        .map(|e| e.index)
        .collect();
    above.sort_unstable();
    texts[3] = above
        .iter()
        .map(|&i| sentences[i].text.as_str())
        .collect::<Vec<_>>()
        .join(SEP);
    texts[4] = truncate_tokens(
        &format!("{} {}", article.title, article.body),
        ARTICLE_TOKENS,
    );
    Ok(ChannelTexts {
        article_id: article.id.clone(),
        frame: ranking.frame,
        theta,
        texts,
        top,
        above_threshold: above,
    })
}

/// Channel texts plus their embeddings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelSet {
    #[serde(flatten)]
    pub texts: ChannelTexts,
    pub vectors: Vec<EmbeddingVector>,
}

impl ChannelSet {
    pub fn dim(&self) -> usize {
        self.vectors[0].dim()
    }

    /// Concatenated channel embeddings with ablated blocks zeroed.
    pub fn features(&self, ablation: Ablation) -> Vec<f64> {
        let dim = self.dim();
        let mut out = vec![0.0; CHANNELS * dim];
        for (c, keep) in ablation.active().into_iter().enumerate() {
            if keep {
                out[c * dim..(c + 1) * dim].copy_from_slice(self.vectors[c].values());
            }
        }
        out
    }
}

/// Embed channel texts; empty channels get the zero vector.
pub fn embed_channels(texts: ChannelTexts, embedder: &dyn Embedder) -> Result<ChannelSet> {
    let dim = embedder.dim();
    let wanted: Vec<&str> = texts
        .texts
        .iter()
        .filter(|t| !t.is_empty())
        .map(String::as_str)
        .collect();
    let mut embedded = embedder.embed(&wanted)?.into_iter();
    let mut vectors = Vec::with_capacity(CHANNELS);
    for t in &texts.texts {
        let v = if t.is_empty() {
            EmbeddingVector::zeros(dim)
        } else {
            embedded
                .next()
                .ok_or_else(|| Error::Protocol("embedder returned too few vectors".into()))?
        };
        if v.dim() != dim {
            return Err(Error::DimensionMismatch {
                left: v.dim(),
                right: dim,
            });
        }
        vectors.push(v);
    }
    Ok(ChannelSet { texts, vectors })
}

/// Build the full channel set for one (article, frame) pair.
pub fn build_channels(
    article: &Article,
    ranking: &RelevanceRanking,
    theta: f64,
    embedder: &dyn Embedder,
) -> Result<ChannelSet> {
    let sentences = article.sentences();
    embed_channels(
        channel_texts(article, &sentences, ranking, theta)?,
        embedder,
    )
}
