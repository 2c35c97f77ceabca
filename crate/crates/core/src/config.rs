//! Run configuration shared by every subcommand.
//!
//! Loaded from TOML, overridden by command-line flags, and fingerprinted so
//! outputs can be traced to the settings that produced them.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::DEFAULT_K_GRID;
use crate::corpus::Article;
use crate::embed::{
    EmbedderConfig, RemoteConfig, TfidfVectorizer, DEFAULT_HASH_DIM, EMBED_URL_ENV,
};
use crate::error::{Error, Result};
use crate::eval::{DEFAULT_FOLDS, DEFAULT_MIN_LABEL_COUNT};
use crate::rbf::{FrameDescriptions, TrainConfig, DEFAULT_THETA};
use crate::semisup::SemiSupConfig;

/// Embedder choice as written by a user. TF-IDF is fitted on the training
/// articles when a model is trained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EmbedderSpec {
    Hash {
        #[serde(default = "default_dim")]
        dim: usize,
    },
    Tfidf,
    Remote(RemoteConfig),
}

fn default_dim() -> usize {
    DEFAULT_HASH_DIM
}

impl Default for EmbedderSpec {
    fn default() -> Self {
        EmbedderSpec::Hash {
            dim: DEFAULT_HASH_DIM,
        }
    }
}

impl EmbedderSpec {
    /// Concrete embedder config. A remote spec without an endpoint reads
    /// `NF_EMBED_URL`.
    pub fn resolve(&self, train: &[Article]) -> Result<EmbedderConfig> {
        let cfg = match self {
            EmbedderSpec::Hash { dim } => EmbedderConfig::Hash { dim: *dim },
            EmbedderSpec::Tfidf => EmbedderConfig::Tfidf {
                vectorizer: TfidfVectorizer::fit(train)?,
            },
            EmbedderSpec::Remote(remote) => {
                let mut remote = remote.clone();
                if remote.endpoint.trim().is_empty() {
                    remote.endpoint = std::env::var(EMBED_URL_ENV).map_err(|_| {
                        Error::Config(format!(
                            "remote embedder needs an endpoint or {EMBED_URL_ENV}"
                        ))
                    })?;
                }
                EmbedderConfig::Remote(remote)
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub folds: usize,
    /// Balance dev (KNN model selection) and test (per-frame scores) as
    /// well as train.
    pub balance_all: bool,
    pub min_label_count: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            folds: DEFAULT_FOLDS,
            balance_all: false,
            min_label_count: DEFAULT_MIN_LABEL_COUNT,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnConfig {
    pub k_grid: Vec<usize>,
}

impl Default for KnnConfig {
    fn default() -> Self {
        KnnConfig {
            k_grid: DEFAULT_K_GRID.to_vec(),
        }
    }
}

/// Optional resource files; bundled defaults are used when absent.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Resources {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub keywords: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub codebook: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lexicon: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Seeds fold splits, class balancing and the random baseline.
    pub seed: u64,
    pub theta: f64,
    pub embedder: EmbedderSpec,
    /// Embedder for sentence ranking; the classification embedder when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub retrieval_embedder: Option<EmbedderSpec>,
    pub train: TrainConfig,
    pub semisup: SemiSupConfig,
    pub eval: EvalConfig,
    pub knn: KnnConfig,
    pub descriptions: FrameDescriptions,
    pub resources: Resources,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1042,
            theta: DEFAULT_THETA,
            embedder: EmbedderSpec::default(),
            retrieval_embedder: None,
            train: TrainConfig::default(),
            semisup: SemiSupConfig::default(),
            eval: EvalConfig::default(),
            knn: KnnConfig::default(),
            descriptions: FrameDescriptions::default(),
            resources: Resources::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if !self.theta.is_finite() {
            return Err(Error::Config("theta must be finite".into()));
        }
        if self.eval.folds == 0 {
            return Err(Error::Config("eval.folds must be positive".into()));
        }
        if self.knn.k_grid.is_empty() || self.knn.k_grid.contains(&0) {
            return Err(Error::Config("knn.k_grid must hold positive values".into()));
        }
        if let EmbedderSpec::Hash { dim } = self.embedder {
            EmbedderConfig::Hash { dim }.validate()?;
        }
        self.train.validate()?;
        self.semisup.validate()
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg);
        assert_eq!(RunConfig::from_toml("").unwrap(), cfg);
    }

    #[test]
    fn partial_file_overrides_defaults() {
        let cfg = RunConfig::from_toml(
            r#"
            seed = 7
            theta = 0.2
            [embedder]
            kind = "hash"
            dim = 64
            [train]
            epochs = 5
            [descriptions]
            RE = "fixing it"
            CO = "fighting"
            HI = "people"
            MO = "faith"
            EC = "money"
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.embedder, EmbedderSpec::Hash { dim: 64 });
        assert_eq!(cfg.train.epochs, 5);
        assert_eq!(cfg.train.learning_rate, 0.01);
        assert_eq!(cfg.descriptions.get(crate::frame::Frame::Moral), "faith");
    }

    #[test]
    fn invalid_files_are_config_errors() {
        assert!(matches!(
            RunConfig::from_toml("seed = \"x\""),
            Err(Error::Config(_))
        ));
        assert!(RunConfig::from_toml("[embedder]\nkind = \"hash\"\ndim = 2").is_err());
        assert!(RunConfig::from_toml("[knn]\nk_grid = []").is_err());
        assert!(RunConfig::from_toml("[descriptions]\nRE = \"x\"").is_err());
        assert!(RunConfig::from_toml("[train]\nlearning_rate = -1.0").is_err());
    }

    #[test]
    fn digest_tracks_content() {
        let a = RunConfig::default();
        assert_eq!(a.digest(), RunConfig::default().digest());
        assert_eq!(a.digest().len(), 64);
        let b = RunConfig {
            seed: 1,
            ..RunConfig::default()
        };
        assert_ne!(a.digest(), b.digest());
    }

    #[test]
    fn remote_spec_parses_without_endpoint() {
        let cfg = RunConfig::from_toml("[embedder]\nkind = \"remote\"\nbatch_size = 8").unwrap();
        match &cfg.embedder {
            EmbedderSpec::Remote(r) => {
                assert_eq!(r.batch_size, 8);
                assert!(r.endpoint.is_empty());
            }
            other => panic!("{other:?}"),
        }
        let with = RunConfig::from_toml("[embedder]\nkind = \"remote\"\nendpoint = \"http://h:1\"")
            .unwrap();
        assert!(
            matches!(with.embedder.resolve(&[]).unwrap(), EmbedderConfig::Remote(r) if r.endpoint == "http://h:1")
        );
    }
}
