//! Method dispatch for training and prediction, plus the on-disk model and
//! fold formats.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotation::LabelRecord;
use crate::baselines::{random_probability, FrameRows, KnnModel, MajorityModel};
use crate::config::RunConfig;
use crate::corpus::Article;
use crate::embed::EmbedderConfig;
use crate::error::{Error, Result};
use crate::eval::{balance_upsample, FoldSpec};
use crate::frame::{Frame, FrameSet};
use crate::rbf::{
    predict_article, train_frame_model, Ablation, Featurizer, FrameDescriptions, FrameModel,
    FramePrediction, TrainConfig,
};
use crate::semisup::train_semisup;

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const MODEL_FILE: &str = "model.json";
pub const FOLD_FILE: &str = "fold.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Rbf,
    /// RBF without the article channel.
    RbfA,
    /// RBF without the article and threshold channels.
    RbfAt,
    Knn,
    Majority,
    Random,
    Semisup,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Rbf,
        Method::RbfA,
        Method::RbfAt,
        Method::Knn,
        Method::Majority,
        Method::Random,
        Method::Semisup,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Rbf => "rbf",
            Method::RbfA => "rbf-a",
            Method::RbfAt => "rbf-at",
            Method::Knn => "knn",
            Method::Majority => "majority",
            Method::Random => "random",
            Method::Semisup => "semisup",
        }
    }

    pub fn is_rbf(self) -> bool {
        matches!(
            self,
            Method::Rbf | Method::RbfA | Method::RbfAt | Method::Semisup
        )
    }

    /// Channel mask used by RBF-family methods. Semisup follows the config.
    pub fn ablation(self, train: &TrainConfig) -> Ablation {
        match self {
            Method::Rbf => Ablation::Full,
            Method::RbfA => Ablation::NoArticle,
            Method::RbfAt => Ablation::NoArticleNoThreshold,
            _ => train.ablation,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

/// Corpus articles joined with their gold labels.
#[derive(Clone, Debug)]
pub struct Dataset {
    articles: Vec<Article>,
    index: BTreeMap<String, usize>,
    gold: BTreeMap<String, FrameSet>,
}

impl Dataset {
    pub fn new(articles: Vec<Article>, labels: &[LabelRecord]) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, a) in articles.iter().enumerate() {
            if index.insert(a.id.clone(), i).is_some() {
                return Err(Error::invalid(format!("duplicate article id `{}`", a.id)));
            }
        }
        let mut gold = BTreeMap::new();
        for l in labels {
            if gold.insert(l.article_id.clone(), l.frames).is_some() {
                return Err(Error::invalid(format!(
                    "duplicate label for article `{}`",
                    l.article_id
                )));
            }
        }
        Ok(Dataset {
            articles,
            index,
            gold,
        })
    }

    pub fn articles(&self) -> &[Article] {
        &self.articles
    }

    pub fn gold(&self) -> &BTreeMap<String, FrameSet> {
        &self.gold
    }

    pub fn article(&self, id: &str) -> Result<&Article> {
        self.index
            .get(id)
            .map(|&i| &self.articles[i])
            .ok_or_else(|| Error::invalid(format!("article `{id}` is not in the corpus")))
    }

    /// Articles with gold labels, in the order of `ids`.
    pub fn labeled(&self, ids: &[String]) -> Result<Vec<(Article, FrameSet)>> {
        ids.iter()
            .map(|id| {
                let gold = self
                    .gold
                    .get(id)
                    .ok_or_else(|| Error::invalid(format!("article `{id}` has no gold label")))?;
                Ok((self.article(id)?.clone(), *gold))
            })
            .collect()
    }

    /// Corpus articles without a gold label, in corpus order.
    pub fn unlabeled(&self) -> Vec<Article> {
        self.articles
            .iter()
            .filter(|a| !self.gold.contains_key(&a.id))
            .cloned()
            .collect()
    }
}

/// A fold as written by `split`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldFile {
    #[serde(flatten)]
    pub spec: FoldSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
}

/// Write `dir/fold{i}/fold.json` for every fold.
pub fn write_folds(dir: &Path, folds: &[FoldSpec], config_digest: &str) -> Result<Vec<PathBuf>> {
    folds
        .iter()
        .map(|spec| {
            let sub = dir.join(format!("fold{}", spec.fold_id));
            std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
            let path = sub.join(FOLD_FILE);
            let file = FoldFile {
                spec: spec.clone(),
                config_digest: Some(config_digest.to_string()),
            };
            write_json(&path, &file)?;
            Ok(path)
        })
        .collect()
}

/// Load a fold from its directory or from the file itself.
pub fn load_fold(path: &Path) -> Result<FoldSpec> {
    let file = if path.is_dir() {
        path.join(FOLD_FILE)
    } else {
        path.to_path_buf()
    };
    let fold: FoldFile = read_json(&file)?;
    let mut seen = HashSet::new();
    for id in fold
        .spec
        .train
        .iter()
        .chain(&fold.spec.dev)
        .chain(&fold.spec.test)
    {
        if !seen.insert(id.as_str()) {
            return Err(Error::invalid(format!(
                "{}: article `{id}` appears in two splits",
                file.display()
            )));
        }
    }
    Ok(fold.spec)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Schema {
        line: e.line(),
        message: format!("{}: {e}", path.display()),
    })
}

/// Trained RBF heads with everything needed to featurize new articles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbfModel {
    pub embedder: EmbedderConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retrieval_embedder: Option<EmbedderConfig>,
    pub theta: f64,
    pub descriptions: FrameDescriptions,
    pub models: Vec<FrameModel>,
}

impl RbfModel {
    pub fn featurizer(&self) -> Result<Featurizer> {
        let classification = self.embedder.build()?;
        match &self.retrieval_embedder {
            None => Featurizer::shared(classification, self.descriptions.clone(), self.theta),
            Some(r) => Featurizer::new(
                r.build()?,
                classification,
                self.descriptions.clone(),
                self.theta,
            ),
        }
    }

    pub fn model(&self, frame: Frame) -> Option<&FrameModel> {
        self.models.iter().find(|m| m.frame == frame)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelBody {
    Rbf(Box<RbfModel>),
    Knn(KnnModel),
    Majority(MajorityModel),
    Random { seed: u64 },
}

/// Contents of `model.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub method: Method,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fold_id: Option<usize>,
    pub config_digest: String,
    pub config: RunConfig,
    pub body: ModelBody,
}

impl ModelFile {
    /// Write `dir/model.json`, creating `dir` if needed.
    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(MODEL_FILE);
        write_json(&path, self)?;
        Ok(path)
    }

    /// Load from a model directory or the file itself.
    pub fn load(path: &Path) -> Result<Self> {
        let file = if path.is_dir() {
            path.join(MODEL_FILE)
        } else {
            path.to_path_buf()
        };
        let model: ModelFile = read_json(&file)?;
        if model.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::invalid(format!(
                "{}: unsupported model format version {}",
                file.display(),
                model.format_version
            )));
        }
        Ok(model)
    }

    pub fn rbf(&self) -> Option<&RbfModel> {
        match &self.body {
            ModelBody::Rbf(m) => Some(m),
            _ => None,
        }
    }
}

fn balanced_rows<T: Clone>(
    frame: Frame,
    rows: Vec<(T, bool)>,
    seed: u64,
) -> Result<Vec<(T, bool)>> {
    if rows.iter().all(|r| r.1) || rows.iter().all(|r| !r.1) {
        return Err(Error::invalid(format!(
            "frame {frame} has a single class in the training split; both classes are needed"
        )));
    }
    balance_upsample(rows, seed.wrapping_add(frame.index() as u64))
}

/// Train `method` on the train split of `fold`.
///
/// Each frame's training rows are upsampled to 1:1 with seed
/// `config.seed + frame index`. Semisup draws its unlabeled pool from
/// `unlabeled`, or from corpus articles without gold labels when `None`.
pub fn train(
    method: Method,
    config: &RunConfig,
    data: &Dataset,
    fold: &FoldSpec,
    unlabeled: Option<&[Article]>,
) -> Result<ModelFile> {
    config.validate()?;
    let train = data.labeled(&fold.train)?;
    if train.is_empty() {
        return Err(Error::invalid("training split is empty"));
    }
    let body = match method {
        Method::Random => ModelBody::Random { seed: config.seed },
        Method::Majority => {
            let labels: Vec<FrameSet> = train.iter().map(|(_, g)| *g).collect();
            ModelBody::Majority(MajorityModel::fit(&labels)?)
        }
        Method::Knn => {
            let articles: Vec<Article> = train.iter().map(|(a, _)| a.clone()).collect();
            let rows: Vec<FrameRows> = Frame::ALL
                .into_iter()
                .map(|frame| {
                    let rows = train
                        .iter()
                        .enumerate()
                        .map(|(i, (_, g))| (i, g.contains(frame)))
                        .collect();
                    balanced_rows(frame, rows, config.seed)
                })
                .collect::<Result<_>>()?;
            let rows: [FrameRows; Frame::COUNT] = rows.try_into().expect("one row set per frame");
            let dev = data.labeled(&fold.dev)?;
            let balance_dev = config.eval.balance_all.then_some(config.seed);
            ModelBody::Knn(KnnModel::fit(
                &articles,
                &rows,
                &dev,
                &config.knn.k_grid,
                balance_dev,
            )?)
        }
        _ => {
            let pool = match (method, unlabeled) {
                (Method::Semisup, Some(u)) => u.to_vec(),
                (Method::Semisup, None) => data.unlabeled(),
                _ => Vec::new(),
            };
            ModelBody::Rbf(Box::new(train_rbf(method, config, &train, &pool)?))
        }
    };
    Ok(ModelFile {
        format_version: MODEL_FORMAT_VERSION,
        method,
        fold_id: Some(fold.fold_id),
        config_digest: config.digest(),
        config: config.clone(),
        body,
    })
}

fn train_rbf(
    method: Method,
    config: &RunConfig,
    train: &[(Article, FrameSet)],
    pool: &[Article],
) -> Result<RbfModel> {
    let articles: Vec<Article> = train.iter().map(|(a, _)| a.clone()).collect();
    let mut model = RbfModel {
        embedder: config.embedder.resolve(&articles)?,
        retrieval_embedder: config
            .retrieval_embedder
            .as_ref()
            .map(|s| s.resolve(&articles))
            .transpose()?,
        theta: config.theta,
        descriptions: config.descriptions.clone(),
        models: Vec::new(),
    };
    let featurizer = model.featurizer()?;
    let features = featurizer.featurize_all(&articles)?;
    let pool_features = if method == Method::Semisup {
        featurizer.featurize_all(pool)?
    } else {
        Vec::new()
    };
    let ablation = method.ablation(&config.train);
    let tc = TrainConfig {
        ablation,
        ..config.train.clone()
    };
    model.models = Frame::ALL
        .par_iter()
        .map(|&frame| {
            let rows: Vec<(Vec<f64>, bool)> = features
                .iter()
                .zip(train)
                .map(|(f, (_, g))| (f.features(frame, ablation), g.contains(frame)))
                .collect();
            let rows = balanced_rows(frame, rows, config.seed)?;
            if method == Method::Semisup {
                let u: Vec<Vec<f64>> = pool_features
                    .iter()
                    .map(|f| f.features(frame, ablation))
                    .collect();
                train_semisup(frame, &rows, &u, None, &tc, &config.semisup)
            } else {
                train_frame_model(frame, &rows, &tc)
            }
        })
        .collect::<Result<_>>()?;
    Ok(model)
}

/// A loaded model ready to score articles.
#[derive(Debug)]
pub struct Predictor {
    model: ModelFile,
    featurizer: Option<Featurizer>,
}

impl Predictor {
    pub fn new(model: ModelFile) -> Result<Self> {
        let featurizer = match &model.body {
            ModelBody::Rbf(m) => {
                for frame in Frame::ALL {
                    if m.model(frame).is_none() {
                        return Err(Error::invalid(format!(
                            "model has no head for frame {frame}"
                        )));
                    }
                }
                Some(m.featurizer()?)
            }
            _ => None,
        };
        Ok(Predictor { model, featurizer })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::new(ModelFile::load(path)?)
    }

    pub fn model(&self) -> &ModelFile {
        &self.model
    }

    /// One prediction per article and frame, in input order. Evidence is
    /// only available for RBF-family models.
    pub fn predict(
        &self,
        articles: &[Article],
        with_evidence: bool,
    ) -> Result<Vec<FramePrediction>> {
        let mut out = match (&self.model.body, &self.featurizer) {
            (ModelBody::Rbf(m), Some(fz)) => {
                let features = fz.featurize_all(articles)?;
                let per_article: Vec<Vec<FramePrediction>> = features
                    .par_iter()
                    .map(|f| predict_article(f, &m.models, with_evidence))
                    .collect::<Result<_>>()?;
                per_article.into_iter().flatten().collect()
            }
            (ModelBody::Random { seed }, _) => articles
                .iter()
                .flat_map(|a| {
                    Frame::ALL.into_iter().map(move |f| {
                        FramePrediction::new(
                            &a.id,
                            f,
                            random_probability(*seed, &a.id, f),
                            Vec::new(),
                        )
                    })
                })
                .collect(),
            (ModelBody::Majority(m), _) => {
                let set = m.predict();
                constant_predictions(articles, |_| set)
            }
            (ModelBody::Knn(m), _) => {
                let sets: Vec<FrameSet> = articles.par_iter().map(|a| m.predict(a)).collect();
                let by_id: BTreeMap<&str, FrameSet> =
                    articles.iter().map(|a| a.id.as_str()).zip(sets).collect();
                constant_predictions(articles, |id| by_id[id])
            }
            (ModelBody::Rbf(_), None) => unreachable!("RBF predictors always hold a featurizer"),
        };
        for p in &mut out {
            p.config_digest = Some(self.model.config_digest.clone());
        }
        Ok(out)
    }
}

fn constant_predictions(
    articles: &[Article],
    set_for: impl Fn(&str) -> FrameSet,
) -> Vec<FramePrediction> {
    articles
        .iter()
        .flat_map(|a| {
            let set = set_for(&a.id);
            Frame::ALL.into_iter().map(move |f| {
                let p = if set.contains(f) { 1.0 } else { 0.0 };
                FramePrediction::new(&a.id, f, p, Vec::new())
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::EmbedderSpec;
    use crate::eval::{make_folds, predictions_to_sets};
    use crate::synthetic::{generate, SyntheticConfig};

    fn small() -> (Dataset, FoldSpec, RunConfig) {
        let corpus = generate(
            &SyntheticConfig {
                n_articles: 60,
                ..Default::default()
            },
            &FrameDescriptions::canonical(),
        );
        let ids: Vec<String> = corpus.labels.iter().map(|l| l.article_id.clone()).collect();
        let fold = make_folds(&ids, 1, 7).unwrap().remove(0);
        let mut cfg = RunConfig {
            embedder: EmbedderSpec::Hash { dim: 32 },
            ..Default::default()
        };
        cfg.train.epochs = 5;
        (
            Dataset::new(corpus.articles, &corpus.labels).unwrap(),
            fold,
            cfg,
        )
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            assert_eq!(
                serde_json::to_string(&m).unwrap(),
                format!("\"{}\"", m.name())
            );
        }
        assert!("rbf-x".parse::<Method>().is_err());
    }

    #[test]
    fn every_method_trains_saves_and_predicts() {
        let (data, fold, cfg) = small();
        let test: Vec<Article> = fold
            .test
            .iter()
            .map(|id| data.article(id).unwrap().clone())
            .collect();
        let dir = tempfile::tempdir().unwrap();
        for method in Method::ALL {
            let model = train(method, &cfg, &data, &fold, None).unwrap();
            let path = model.save(&dir.path().join(method.name())).unwrap();
            let loaded = ModelFile::load(&path).unwrap();
            assert_eq!(loaded, model, "{method}");
            let preds = Predictor::new(loaded)
                .unwrap()
                .predict(&test, true)
                .unwrap();
            assert_eq!(preds.len(), test.len() * Frame::COUNT);
            assert!(preds
                .iter()
                .all(|p| p.config_digest.as_deref() == Some(cfg.digest().as_str())));
            assert_eq!(predictions_to_sets(&preds).unwrap().len(), test.len());
            assert_eq!(
                preds.iter().any(|p| !p.evidence.is_empty()),
                method.is_rbf(),
                "{method}"
            );
        }
    }

    #[test]
    fn ablated_methods_zero_masked_blocks() {
        let (data, fold, cfg) = small();
        for method in [Method::RbfA, Method::RbfAt] {
            let model = train(method, &cfg, &data, &fold, None).unwrap();
            let active = method.ablation(&cfg.train).active();
            for m in &model.rbf().unwrap().models {
                for (c, keep) in active.iter().enumerate() {
                    if !keep {
                        assert!(m.block(c).iter().all(|w| *w == 0.0), "{method} {c}");
                    }
                }
            }
        }
    }

    #[test]
    fn single_class_frames_are_rejected() {
        let (data, mut fold, cfg) = small();
        let mut gold: Vec<String> = fold.train.clone();
        // Keep only articles without the Moral frame.
        gold.retain(|id| !data.gold()[id].contains(Frame::Moral));
        fold.train = gold;
        let err = train(Method::Rbf, &cfg, &data, &fold, None).unwrap_err();
        assert!(err.to_string().contains("single class"), "{err}");
    }

    #[test]
    fn unknown_fold_ids_are_data_errors() {
        let (data, mut fold, cfg) = small();
        fold.train.push("missing".into());
        assert!(train(Method::Majority, &cfg, &data, &fold, None).is_err());
    }

    #[test]
    fn folds_round_trip_through_disk() {
        let ids: Vec<String> = (0..20).map(|i| format!("a{i}")).collect();
        let folds = make_folds(&ids, 3, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let paths = write_folds(dir.path(), &folds, "abc").unwrap();
        assert_eq!(paths.len(), 3);
        assert_eq!(load_fold(&dir.path().join("fold2")).unwrap(), folds[2]);
        let text = std::fs::read_to_string(&paths[0]).unwrap();
        assert!(text.contains("\"config_digest\": \"abc\""));
    }

    #[test]
    fn training_is_deterministic() {
        let (data, fold, cfg) = small();
        let a = train(Method::Rbf, &cfg, &data, &fold, None).unwrap();
        let b = train(Method::Rbf, &cfg, &data, &fold, None).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }
}
