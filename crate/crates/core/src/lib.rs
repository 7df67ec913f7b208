//! Streaming classification with a bounded dual-memory context.
//!
//! The engine keeps a short-term recency buffer and a class-balanced
//! long-term buffer over an unbounded labeled stream, hands their union to
//! an in-context predictor, and scores it prequentially (test, then
//! memorize).

pub mod eval;
pub mod ingestion;
pub mod memory;
pub mod numeric;
pub mod predictor;
pub mod types;

pub use memory::{DualMemory, EvictionEvent, EvictionKind, MemoryConfig, MemoryVariant, ShortSize};
pub use types::{
    argmax_label, validate_example, ClassDistribution, Context, FeatureKind, LabeledExample, Query, Schema,
};
