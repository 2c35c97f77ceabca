use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    channel_texts, Ablation, ChannelSet, FrameDescriptions, FrameModel, RelevanceRanking, TOP_K,
};
use crate::corpus::Article;
use crate::embed::{Embedder, EmbeddingVector};
use crate::error::{Error, Result};
use crate::frame::Frame;

/// Rankings and channel sets of one article for every frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArticleFeatures {
    pub article_id: String,
    pub rankings: Vec<RelevanceRanking>,
    pub channels: Vec<ChannelSet>,
}

impl ArticleFeatures {
    pub fn ranking(&self, frame: Frame) -> &RelevanceRanking {
        &self.rankings[frame.index()]
    }

    pub fn channel_set(&self, frame: Frame) -> &ChannelSet {
        &self.channels[frame.index()]
    }

    pub fn features(&self, frame: Frame, ablation: Ablation) -> Vec<f64> {
        self.channel_set(frame).features(ablation)
    }

    /// The top-ranked sentences for a frame.
    pub fn evidence(&self, frame: Frame) -> Vec<Evidence> {
        let ch = self.channel_set(frame);
        self.ranking(frame)
            .top(TOP_K)
            .iter()
            .zip(&ch.texts.texts)
            .map(|(e, text)| Evidence {
                index: e.index,
                rel: e.rel,
                text: text.clone(),
            })
            .collect()
    }
}

/// Turns articles into [`ArticleFeatures`].
///
/// Retrieval and classification may use different embedders. Frame
/// descriptions are embedded once at construction.
#[derive(Clone)]
pub struct Featurizer {
    retrieval: Arc<dyn Embedder>,
    classification: Arc<dyn Embedder>,
    descriptions: FrameDescriptions,
    description_vectors: Vec<EmbeddingVector>,
    theta: f64,
}

impl std::fmt::Debug for Featurizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Featurizer")
            .field("retrieval_dim", &self.retrieval.dim())
            .field("classification_dim", &self.classification.dim())
            .field("theta", &self.theta)
            .finish()
    }
}

impl Featurizer {
    pub fn new(
        retrieval: Arc<dyn Embedder>,
        classification: Arc<dyn Embedder>,
        descriptions: FrameDescriptions,
        theta: f64,
    ) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::Config("theta must be finite".into()));
        }
        let texts: Vec<&str> = descriptions.iter().map(|(_, t)| t).collect();
        let description_vectors = retrieval.embed(&texts)?;
        if description_vectors.len() != texts.len() {
            return Err(Error::Protocol(
                "embedder returned the wrong number of vectors".into(),
            ));
        }
        Ok(Featurizer {
            retrieval,
            classification,
            descriptions,
            description_vectors,
            theta,
        })
    }

    /// Same embedder for retrieval and classification.
    pub fn shared(
        embedder: Arc<dyn Embedder>,
        descriptions: FrameDescriptions,
        theta: f64,
    ) -> Result<Self> {
        Self::new(Arc::clone(&embedder), embedder, descriptions, theta)
    }

    pub fn dim(&self) -> usize {
        self.classification.dim()
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn descriptions(&self) -> &FrameDescriptions {
        &self.descriptions
    }

    pub fn featurize(&self, article: &Article) -> Result<ArticleFeatures> {
        let sentences = article.sentences();
        let sentence_texts: Vec<&str> = sentences.iter().map(|s| s.text.as_str()).collect();
        if sentence_texts.is_empty() {
            return Err(Error::invalid(format!(
                "article `{}` has no sentences",
                article.id
            )));
        }
        let sentence_vectors = self.retrieval.embed(&sentence_texts)?;
        if sentence_vectors.len() != sentence_texts.len() {
            return Err(Error::Protocol(
                "embedder returned the wrong number of vectors".into(),
            ));
        }

        let mut rankings = Vec::with_capacity(Frame::COUNT);
        let mut texts = Vec::with_capacity(Frame::COUNT);
        for frame in Frame::ALL {
            let ranking = RelevanceRanking::from_vectors(
                &article.id,
                frame,
                &self.description_vectors[frame.index()],
                &sentence_vectors,
            )?;
            texts.push(channel_texts(article, &sentences, &ranking, self.theta)?);
            rankings.push(ranking);
        }

        // Embed each distinct channel text once.
        let mut cache: HashMap<&str, EmbeddingVector> = HashMap::new();
        if Arc::ptr_eq(&self.retrieval, &self.classification) {
            for (t, v) in sentence_texts.iter().zip(&sentence_vectors) {
                cache.insert(t, v.clone());
            }
        }
        let mut pending: Vec<&str> = Vec::new();
        for t in texts.iter().flat_map(|c| c.texts.iter()) {
            if !t.is_empty() && !cache.contains_key(t.as_str()) && !pending.contains(&t.as_str()) {
                pending.push(t);
            }
        }
        let fresh = self.classification.embed(&pending)?;
        if fresh.len() != pending.len() {
            return Err(Error::Protocol(
                "embedder returned the wrong number of vectors".into(),
            ));
        }
        cache.extend(pending.iter().copied().zip(fresh));

        let dim = self.dim();
        let mut channels = Vec::with_capacity(Frame::COUNT);
        for t in &texts {
            let mut vectors = Vec::with_capacity(t.texts.len());
            for text in &t.texts {
                let v = if text.is_empty() {
                    EmbeddingVector::zeros(dim)
                } else {
                    cache[text.as_str()].clone()
                };
                if v.dim() != dim {
                    return Err(Error::DimensionMismatch {
                        left: v.dim(),
                        right: dim,
                    });
                }
                vectors.push(v);
            }
            channels.push(ChannelSet {
                texts: t.clone(),
                vectors,
            });
        }
        Ok(ArticleFeatures {
            article_id: article.id.clone(),
            rankings,
            channels,
        })
    }

    /// Featurize in parallel, keeping input order.
    pub fn featurize_all(&self, articles: &[Article]) -> Result<Vec<ArticleFeatures>> {
        articles.par_iter().map(|a| self.featurize(a)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub index: usize,
    pub rel: f64,
    pub text: String,
}

/// One line of prediction output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FramePrediction {
    pub article_id: String,
    pub frame: Frame,
    pub probability: f64,
    pub predicted: bool,
    #[serde(default)]
    pub evidence: Vec<Evidence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
}

impl FramePrediction {
    /// `predicted` is `probability >= 0.5`.
    pub fn new(article_id: &str, frame: Frame, probability: f64, evidence: Vec<Evidence>) -> Self {
        FramePrediction {
            article_id: article_id.to_string(),
            frame,
            probability,
            predicted: probability >= 0.5,
            evidence,
            config_digest: None,
        }
    }
}

/// Score one article with one model per frame.
pub fn predict_article(
    features: &ArticleFeatures,
    models: &[FrameModel],
    with_evidence: bool,
) -> Result<Vec<FramePrediction>> {
    Frame::ALL
        .into_iter()
        .map(|frame| {
            let model = models
                .iter()
                .find(|m| m.frame == frame)
                .ok_or_else(|| Error::invalid(format!("no model for frame {frame}")))?;
            let x = features.features(frame, model.config.ablation);
            if x.len() != model.n_features() {
                return Err(Error::DimensionMismatch {
                    left: x.len(),
                    right: model.n_features(),
                });
            }
            let evidence = if with_evidence {
                features.evidence(frame)
            } else {
                Vec::new()
            };
            Ok(FramePrediction::new(
                &features.article_id,
                frame,
                model.probability(&x),
                evidence,
            ))
        })
        .collect()
}
