//! Prequential evaluation, ablation grids, statistical comparison and the
//! variance diagnostics.

mod ablation;
mod bound;
mod prequential;
mod stats;
mod timing;
mod variance;

pub use ablation::{
    ablation_grid, paired_deltas, AblationOutcome, AblationResult, AblationRun, AblationSpec, PairedDelta,
};
pub use bound::{mcdiarmid_bound, sensitivity_norm_sq, BoundError, BoundReport, LipschitzBoundConfig, SeriesMode};
pub use prequential::{
    run_prequential, run_prequential_with, EvictionStats, InstanceRecord, MemorySnapshot, RunOptions, RunReport,
    WindowPoint, REPORT_VERSION,
};
pub use stats::{
    average_ranks, friedman_nemenyi, nemenyi_q, paired_t_test, studentized_range_cdf, FriedmanResult, StatError,
    StatTestResult,
};
pub use timing::{timing_report, TimingSummary};
pub use variance::{variance_probe, ProbeStats, SizeReport, VarianceProbeSpec, VarianceReport};

use thiserror::Error;

use crate::ingestion::IngestError;
use crate::memory::MemoryError;
use crate::predictor::{ConfigError, PredictError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("ingestion failed at instance {arrival_index}: {source}")]
    Ingest {
        arrival_index: u64,
        #[source]
        source: IngestError,
    },
    #[error("prediction failed at instance {arrival_index}: {source}")]
    Predict {
        arrival_index: u64,
        #[source]
        source: PredictError,
    },
    #[error("memory update failed at instance {arrival_index}: {source}")]
    Memory {
        arrival_index: u64,
        #[source]
        source: MemoryError,
    },
    #[error("predictor returned {got} distributions for {expected} queries")]
    BatchShape { expected: usize, got: usize },
    #[error("schema has {schema} classes but the predictor expects {predictor}")]
    ClassCountMismatch { schema: usize, predictor: usize },
    #[error(transparent)]
    PredictorConfig(#[from] ConfigError),
    #[error("could not build predictor: {0}")]
    PredictorBuild(#[source] PredictError),
    #[error("invalid variant configuration: {0}")]
    InvalidVariantConfig(String),
    #[error("generator does not expose its true conditional")]
    GeneratorLacksTruth,
    #[error("invalid probe specification: {0}")]
    InvalidProbe(String),
    #[error(transparent)]
    Stat(#[from] StatError),
}
