//! Classification of DAO governance proposals with a chat-completion model.
//!
//! Proposals are ingested from Snapshot, Discourse forums or local files,
//! rendered into a single prompt against a seven-category taxonomy, sent
//! through a cached and retrying gateway, and parsed into structured
//! records. Records can be scored against human gold labels and aggregated
//! into per-space category statistics.
//!
//! Batch work (classification, parsing, aggregation) runs on rayon when the
//! `parallel` feature is enabled and sequentially otherwise.

pub mod analytics;
pub mod evaluation;
pub mod gateway;
pub mod http;
pub mod ingest;
pub mod model;
pub mod par;
pub mod parsing;
pub mod pipeline;
pub mod prompt;
pub mod retry;
pub mod store;
pub mod taxonomy;
#[cfg(feature = "testkit")]
pub mod testkit;

pub use analytics::{
    aggregate, aggregate_with_failures, export_stats, AggregateStats, ExportFormat,
};
pub use evaluation::{
    evaluate, load_gold_labels, meets_ending_condition, predominant_category, EvaluationReport,
};
pub use gateway::{Gateway, Provider, ProviderError, RawResponse, ResponseCache};
pub use model::{
    ClassificationRecord, GoldLabel, LlmParameters, MoneyAmount, Proposal, ScoreMap, Source,
};
pub use parsing::{parse_classification, parse_money, repair_candidate, ParseOutcome};
pub use pipeline::{Pipeline, PipelineOptions};
pub use prompt::{render_prompt, RenderedPrompt};
pub use store::Store;
pub use taxonomy::{builtin_taxonomy_v7, load_taxonomy, CategoryCode, Taxonomy};
