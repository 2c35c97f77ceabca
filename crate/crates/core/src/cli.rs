//! The `nframes` command line.
//!
//! Settings come from defaults, then an optional TOML file (`--config`),
//! then flags. Exit codes: 0 success, 1 usage error, 2 data error.

use std::collections::{BTreeMap, HashMap};
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::agreement::{agreement_report, AgreementReport};
use crate::analysis::{
    frame_by_leaning, render_svg, role_frame_cooccurrence, role_records_from_annotations,
    role_records_from_labels, role_stakeholder, stakeholder_roles_by_leaning, ChartKind, CrossTab,
};
use crate::annotation::{
    aggregate_all, load_annotations, load_labels, Codebook, StakeholderCategory, StakeholderLexicon,
};
use crate::config::{EmbedderSpec, RunConfig};
use crate::corpus::{filter_corpus, load_corpus, write_corpus, KeywordList};
use crate::embed::{
    run_contract_suite, MockEmbedServer, MockServerConfig, RemoteConfig, DEFAULT_HASH_DIM,
    EMBED_URL_ENV,
};
use crate::error::{Error, Result};
use crate::eval::{
    evaluate_with, make_folds, predictions_to_sets, EvalOptions, FoldSummary, MetricsReport,
};
use crate::frame::Leaning;
use crate::jsonl::{read_jsonl, write_jsonl};
use crate::pipeline::{
    load_fold, train, write_folds, write_json, Dataset, Method, ModelFile, Predictor,
};
use crate::rbf::FramePrediction;
use crate::synthetic::{generate, SyntheticConfig};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "nframes",
    version,
    about = "Narrative frame labeling, classification and analysis"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// TOML run configuration; flags override its values
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Seed for splits, balancing, training and the random baseline
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Relevance threshold for the threshold channel
    #[arg(long, global = true)]
    pub theta: Option<f64>,

    /// Classification embedder
    #[arg(long, global = true, value_enum)]
    pub embedder: Option<EmbedderKind>,

    /// Embedder used to rank sentences; defaults to the classification embedder
    #[arg(long, global = true, value_enum)]
    pub retrieval_embedder: Option<EmbedderKind>,

    /// Dimension of the hash embedder
    #[arg(long, global = true)]
    pub dim: Option<usize>,

    /// Base URL of the embedding service for `--embedder remote`
    #[arg(long, global = true, env = EMBED_URL_ENV)]
    pub embed_url: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EmbedderKind {
    Hash,
    Tfidf,
    Remote,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Rbf,
    RbfA,
    RbfAt,
    Knn,
    Majority,
    Random,
    Semisup,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Rbf => Method::Rbf,
            MethodArg::RbfA => Method::RbfA,
            MethodArg::RbfAt => Method::RbfAt,
            MethodArg::Knn => Method::Knn,
            MethodArg::Majority => Method::Majority,
            MethodArg::Random => Method::Random,
            MethodArg::Semisup => Method::Semisup,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load raw articles and keep the climate-related ones
    Ingest {
        #[arg(long)]
        input: PathBuf,
        /// One keyword per line; the bundled list when omitted
        #[arg(long)]
        keywords: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate annotator answers into frame labels and role entities
    Aggregate {
        #[arg(long)]
        annotations: PathBuf,
        /// Codebook JSON; the bundled codebook when omitted
        #[arg(long)]
        codebook: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Inter-annotator reliability report
    Agreement {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        codebook: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write train/dev/test folds as DIR/foldN/fold.json
    Split {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one method on a fold's train split
    Train {
        #[arg(long, value_enum)]
        method: MethodArg,
        /// Fold directory or fold.json
        #[arg(long)]
        fold: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Unlabeled articles for semisup; corpus articles without labels otherwise
        #[arg(long)]
        unlabeled: Option<PathBuf>,
        /// Output directory for model.json
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict frames for articles
    Predict {
        /// Model directory or model.json
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Only predict the fold's test articles
        #[arg(long)]
        fold: Option<PathBuf>,
        /// Attach the top-ranked sentences to each prediction
        #[arg(long)]
        evidence: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predictions against gold labels
    Eval {
        /// Predictions file; repeat to summarise several folds
        #[arg(long, required = true)]
        preds: Vec<PathBuf>,
        #[arg(long)]
        gold: PathBuf,
        /// Balance each frame's test labels before per-frame scoring
        #[arg(long)]
        balance_test: bool,
        /// Also write a plain-text results table
        #[arg(long)]
        table: Option<PathBuf>,
        /// Method name for the table
        #[arg(long, default_value = "model")]
        name: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-tabulations of frames, roles, stakeholders and leaning
    Analyze {
        #[arg(long)]
        labels: PathBuf,
        /// Raw annotations; role entities come from the labels file otherwise
        #[arg(long)]
        annotations: Option<PathBuf>,
        /// Corpus with outlet leanings; leaning tables are skipped without it
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Entity to stakeholder CSV; the bundled lexicon when omitted
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        codebook: Option<PathBuf>,
        /// Also render SVG charts
        #[arg(long)]
        svg: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a corpus with planted frame sentences
    Synthesize {
        #[arg(long, default_value_t = 200)]
        articles: usize,
        #[arg(long, default_value_t = 0.4)]
        positive_rate: f64,
        #[arg(long, default_value = "syn")]
        id_prefix: String,
        /// Output directory for corpus.jsonl and labels.jsonl
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the embedding protocol over the hash embedder
    MockEmbedder {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = DEFAULT_HASH_DIM)]
        mock_dim: usize,
        #[arg(long, default_value_t = 64)]
        max_batch: usize,
    },
    /// Check an embedding service against the protocol contract
    ContractCheck {
        #[arg(long, env = EMBED_URL_ENV)]
        url: String,
        /// Largest batch the service claims to accept
        #[arg(long, default_value_t = 64)]
        max_batch: usize,
    },
}

/// Defaults, then the config file, then flags.
pub fn effective_config(global: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = match &global.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = global.seed {
        cfg.seed = seed;
        cfg.train.seed = seed;
    }
    if let Some(theta) = global.theta {
        cfg.theta = theta;
    }
    if let Some(kind) = global.embedder {
        cfg.embedder = spec_for(kind, &cfg.embedder, global);
    } else if let (Some(dim), EmbedderSpec::Hash { .. }) = (global.dim, &cfg.embedder) {
        cfg.embedder = EmbedderSpec::Hash { dim };
    }
    if let Some(kind) = global.retrieval_embedder {
        let current = cfg
            .retrieval_embedder
            .clone()
            .unwrap_or_else(|| cfg.embedder.clone());
        cfg.retrieval_embedder = Some(spec_for(kind, &current, global));
    }
    if let (Some(url), EmbedderSpec::Remote(r)) = (&global.embed_url, &mut cfg.embedder) {
        r.endpoint.clone_from(url);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn spec_for(kind: EmbedderKind, current: &EmbedderSpec, global: &GlobalArgs) -> EmbedderSpec {
    match (kind, current) {
        (EmbedderKind::Hash, EmbedderSpec::Hash { dim }) => EmbedderSpec::Hash {
            dim: global.dim.unwrap_or(*dim),
        },
        (EmbedderKind::Hash, _) => EmbedderSpec::Hash {
            dim: global.dim.unwrap_or(DEFAULT_HASH_DIM),
        },
        (EmbedderKind::Tfidf, _) => EmbedderSpec::Tfidf,
        (EmbedderKind::Remote, current) => {
            let mut remote = match current {
                EmbedderSpec::Remote(r) => r.clone(),
                _ => RemoteConfig::new(""),
            };
            if let Some(url) = &global.embed_url {
                remote.endpoint.clone_from(url);
            }
            EmbedderSpec::Remote(remote)
        }
    }
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => {
            std::fs::create_dir_all(p).map_err(|e| Error::io(p, e))
        }
        _ => Ok(()),
    }
}

fn codebook(path: Option<&Path>, cfg: &RunConfig) -> Result<Codebook> {
    match path.or(cfg.resources.codebook.as_deref()) {
        Some(p) => Codebook::load(p),
        None => Ok(Codebook::bundled()),
    }
}

/// Provenance written next to outputs whose records have no room for it.
#[derive(Serialize)]
struct Manifest<'a, T: Serialize> {
    command: &'a str,
    config_digest: String,
    #[serde(flatten)]
    details: T,
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".meta.json");
    out.with_file_name(name)
}

#[derive(Serialize)]
struct WithDigest<'a, T: Serialize> {
    #[serde(flatten)]
    inner: &'a T,
    config_digest: &'a str,
}

/// Parse `args` and run the command, returning the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_DATA
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let cfg = effective_config(&cli.global)?;
    let digest = cfg.digest();
    match cli.command {
        Command::Ingest {
            input,
            keywords,
            out,
        } => {
            let kw = match keywords.as_deref().or(cfg.resources.keywords.as_deref()) {
                Some(p) => KeywordList::load(p)?,
                None => KeywordList::bundled(),
            };
            let articles = load_corpus(&input)?;
            let (kept, dropped) = filter_corpus(articles, &kw);
            ensure_parent(&out)?;
            write_corpus(&out, &kept)?;
            #[derive(Serialize)]
            struct Counts {
                total: usize,
                kept: usize,
                dropped: usize,
            }
            let counts = Counts {
                total: kept.len() + dropped,
                kept: kept.len(),
                dropped,
            };
            println!(
                "kept {} of {} articles ({} dropped)",
                counts.kept, counts.total, counts.dropped
            );
            write_json(
                &manifest_path(&out),
                &Manifest {
                    command: "ingest",
                    config_digest: digest,
                    details: counts,
                },
            )
        }
        Command::Aggregate {
            annotations,
            codebook: cb,
            out,
        } => {
            let cb = codebook(cb.as_deref(), &cfg)?;
            let records = load_annotations(&annotations, &cb)?;
            let mut labels = aggregate_all(&records, &cb)?;
            for l in &mut labels {
                l.config_digest = Some(digest.clone());
            }
            ensure_parent(&out)?;
            write_jsonl(&out, &labels)?;
            println!(
                "aggregated {} articles from {} annotation records",
                labels.len(),
                records.len()
            );
            Ok(())
        }
        Command::Agreement {
            annotations,
            codebook: cb,
            out,
        } => {
            let cb = codebook(cb.as_deref(), &cfg)?;
            let records = load_annotations(&annotations, &cb)?;
            let report = AgreementReport {
                config_digest: Some(digest),
                ..agreement_report(&records, &cb)?
            };
            ensure_parent(&out)?;
            write_json(&out, &report)?;
            println!(
                "alpha {:.4}, pairwise {:.4}",
                report.alpha, report.pairwise.mean
            );
            Ok(())
        }
        Command::Split { labels, folds, out } => {
            let labels = load_labels(&labels)?;
            let ids: Vec<String> = labels.iter().map(|l| l.article_id.clone()).collect();
            let specs = make_folds(&ids, folds.unwrap_or(cfg.eval.folds), cfg.seed)?;
            let paths = write_folds(&out, &specs, &digest)?;
            println!("wrote {} folds to {}", paths.len(), out.display());
            Ok(())
        }
        Command::Train {
            method,
            fold,
            corpus,
            labels,
            unlabeled,
            out,
        } => {
            let fold = load_fold(&fold)?;
            let data = Dataset::new(load_corpus(&corpus)?, &load_labels(&labels)?)?;
            let pool = unlabeled.as_deref().map(load_corpus).transpose()?;
            let model = train(method.into(), &cfg, &data, &fold, pool.as_deref())?;
            let path = model.save(&out)?;
            println!(
                "trained {} on {} articles -> {}",
                model.method,
                fold.train.len(),
                path.display()
            );
            Ok(())
        }
        Command::Predict {
            model,
            corpus,
            fold,
            evidence,
            out,
        } => {
            let predictor = Predictor::new(ModelFile::load(&model)?)?;
            let mut articles = load_corpus(&corpus)?;
            if let Some(fold) = fold {
                let fold = load_fold(&fold)?;
                let by_id: HashMap<String, _> =
                    articles.into_iter().map(|a| (a.id.clone(), a)).collect();
                articles = fold
                    .test
                    .iter()
                    .map(|id| {
                        by_id.get(id).cloned().ok_or_else(|| {
                            Error::invalid(format!("test article `{id}` is not in the corpus"))
                        })
                    })
                    .collect::<Result<_>>()?;
            }
            let preds = predictor.predict(&articles, evidence)?;
            ensure_parent(&out)?;
            write_jsonl(&out, &preds)?;
            println!("predicted {} articles", articles.len());
            Ok(())
        }
        Command::Eval {
            preds,
            gold,
            balance_test,
            table,
            name,
            out,
        } => {
            let gold: BTreeMap<_, _> = load_labels(&gold)?
                .into_iter()
                .map(|l| (l.article_id, l.frames))
                .collect();
            let opts = EvalOptions {
                min_label_count: cfg.eval.min_label_count,
                balance_seed: (balance_test || cfg.eval.balance_all).then_some(cfg.seed),
            };
            let mut reports: Vec<MetricsReport> = Vec::with_capacity(preds.len());
            let mut digests = Vec::new();
            for path in &preds {
                let lines: Vec<FramePrediction> = read_jsonl(path)?;
                digests.extend(lines.iter().filter_map(|p| p.config_digest.clone()));
                let sets = predictions_to_sets(&lines)
                    .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
                reports.push(
                    evaluate_with(&sets, &gold, &opts)
                        .map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?,
                );
            }
            digests.sort_unstable();
            digests.dedup();
            // The model's digest when every prediction agrees on one.
            let report_digest = match digests.as_slice() {
                [only] => only.clone(),
                _ => digest,
            };
            ensure_parent(&out)?;
            if reports.len() == 1 {
                let mut report = reports.pop().expect("one report");
                report.config_digest = Some(report_digest);
                println!("f1 {:.4}, exact match {:.4}", report.f1, report.exact_match);
                if let Some(t) = &table {
                    let summary = FoldSummary::from_reports(vec![report.clone()])?;
                    write_text(t, &summary.to_table(&name))?;
                }
                write_json(&out, &report)
            } else {
                let mut summary = FoldSummary::from_reports(reports)?;
                summary.config_digest = Some(report_digest);
                let text = summary.to_table(&name);
                print!("{text}");
                if let Some(t) = &table {
                    write_text(t, &text)?;
                }
                write_json(&out, &summary)
            }
        }
        Command::Analyze {
            labels,
            annotations,
            corpus,
            lexicon,
            codebook: cb,
            svg,
            out,
        } => {
            let labels = load_labels(&labels)?;
            let lexicon = match lexicon.as_deref().or(cfg.resources.lexicon.as_deref()) {
                Some(p) => StakeholderLexicon::load(p)?,
                None => StakeholderLexicon::bundled(),
            };
            let records = match annotations {
                Some(path) => role_records_from_annotations(&load_annotations(
                    &path,
                    &codebook(cb.as_deref(), &cfg)?,
                )?),
                None => role_records_from_labels(&labels),
            };
            let mut tables: Vec<(String, CrossTab, ChartKind)> = vec![
                (
                    "role_frame".into(),
                    role_frame_cooccurrence(&records, &labels)?,
                    ChartKind::Heatmap,
                ),
                (
                    "role_stakeholder".into(),
                    role_stakeholder(&records, &lexicon),
                    ChartKind::Heatmap,
                ),
            ];
            if let Some(corpus) = corpus {
                let leanings: HashMap<String, Leaning> = load_corpus(&corpus)?
                    .into_iter()
                    .map(|a| (a.id, a.leaning))
                    .collect();
                tables.push((
                    "frame_leaning".into(),
                    frame_by_leaning(&labels, &leanings)?,
                    ChartKind::Bars,
                ));
                for category in StakeholderCategory::ALL {
                    let t = stakeholder_roles_by_leaning(category, &records, &lexicon, &leanings)?;
                    if t.total() > 0.0 {
                        tables.push((
                            format!("roles_by_leaning_{}", category.slug()),
                            t,
                            ChartKind::Bars,
                        ));
                    }
                }
            }
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            let mut files = Vec::new();
            for (name, table, kind) in &tables {
                let csv_name = format!("{name}.csv");
                write_text(&out.join(&csv_name), &table.to_csv()?)?;
                files.push(csv_name);
                if svg {
                    let svg_name = format!("{name}.svg");
                    write_text(&out.join(&svg_name), &render_svg(table, *kind)?)?;
                    files.push(svg_name);
                }
            }
            #[derive(Serialize)]
            struct Files {
                files: Vec<String>,
            }
            println!("wrote {} files to {}", files.len(), out.display());
            write_json(
                &out.join("manifest.json"),
                &Manifest {
                    command: "analyze",
                    config_digest: digest,
                    details: Files { files },
                },
            )
        }
        Command::Synthesize {
            articles,
            positive_rate,
            id_prefix,
            out,
        } => {
            let synth = SyntheticConfig {
                n_articles: articles,
                seed: cfg.seed,
                positive_rate,
                id_prefix,
                ..Default::default()
            };
            if !(0.0..=1.0).contains(&positive_rate) {
                return Err(Error::Config("positive rate must lie in [0, 1]".into()));
            }
            let corpus = generate(&synth, &cfg.descriptions);
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            write_corpus(&out.join("corpus.jsonl"), &corpus.articles)?;
            let labels: Vec<_> = corpus
                .labels
                .iter()
                .cloned()
                .map(|mut l| {
                    l.config_digest = Some(digest.clone());
                    l
                })
                .collect();
            write_jsonl(&out.join("labels.jsonl"), &labels)?;
            let planted: BTreeMap<&String, BTreeMap<String, &Vec<usize>>> = corpus
                .planted
                .iter()
                .map(|(id, p)| {
                    let frames = crate::frame::Frame::ALL
                        .into_iter()
                        .filter(|f| !p[f.index()].is_empty())
                        .map(|f| (f.code().to_string(), &p[f.index()]))
                        .collect();
                    (id, frames)
                })
                .collect();
            write_json(
                &out.join("planted.json"),
                &WithDigest {
                    inner: &planted,
                    config_digest: &digest,
                },
            )?;
            println!("generated {} articles in {}", articles, out.display());
            Ok(())
        }
        Command::MockEmbedder {
            port,
            host,
            mock_dim,
            max_batch,
        } => {
            let server = MockEmbedServer::start(MockServerConfig {
                host,
                port,
                dim: mock_dim,
                max_batch,
                ..Default::default()
            })?;
            println!("mock embedder listening on {}", server.url());
            server.wait();
            Ok(())
        }
        Command::ContractCheck { url, max_batch } => {
            let checks = run_contract_suite(&url, max_batch);
            let mut failed = 0;
            for c in &checks {
                println!(
                    "{} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
                failed += usize::from(!c.passed);
            }
            if failed > 0 {
                return Err(Error::Protocol(format!(
                    "{failed} of {} contract checks failed",
                    checks.len()
                )));
            }
            Ok(())
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
