//! Collective memory: a raw chronological log plus distilled
//! context-action-outcome records ranked by a debiased retrieval score.

pub mod diagnostics;
pub mod inference;
pub mod scoring;
pub mod shared;
pub mod store;
pub mod strategy;

use thiserror::Error;

pub use diagnostics::{bias_diagnostics, BiasDiagnostics, RetrievalEvent, SuccessFailureRatio};
pub use inference::{infer_configuration, InferenceRules};
pub use scoring::{jaccard, score, DecayForm, MemoryParams, ScoredCandidate};
pub use shared::SharedMemory;
pub use store::{rank_order, MemoryStore, QueryContext, RawEntry, RawMeta};
pub use strategy::{
    distill, query_keywords, DistillContext, DistilledStrategy, KeywordBands, Keywords,
    StrategyAction, StrategyContext, StrategyOutcome, TrafficLevel,
};

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("stored strategy from trial {stored} is newer than query trial {query}")]
    NegativeAge { stored: usize, query: usize },
    #[error("no retrievals logged")]
    InsufficientData,
    #[error("invalid memory parameters: {0}")]
    InvalidParams(String),
    #[error("bad memory record at line {line}: {cause}")]
    Record { line: usize, cause: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
