//! Narrative-framing analysis for news articles.
//!
//! The pipeline filters a corpus to on-topic articles, aggregates annotator
//! answers into frame labels, trains retrieval-based frame classifiers and
//! summarises how frames, roles and stakeholders vary with outlet leaning.

pub mod agreement;
pub mod analysis;
pub mod annotation;
pub mod baselines;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod embed;
pub mod error;
pub mod eval;
pub mod frame;
pub mod jsonl;
pub mod pipeline;
pub mod rbf;
pub mod semisup;
pub mod synthetic;

pub use error::{Error, Result};
pub use frame::{Frame, FrameSet, Leaning, Role};
