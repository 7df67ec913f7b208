//! In-context predictors.
//!
//! A predictor maps a context of labeled examples and a batch of queries to
//! one class distribution per query. Local predictors run in-process; the
//! remote client speaks a JSON-lines protocol to an external model server.

mod baselines;
pub mod conformance;
mod knn;
pub mod mock;
mod naive_bayes;
pub mod protocol;
mod remote;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{ClassDistribution, Context, LabeledExample, Query};

pub use baselines::{MajorityClass, NoChange};
pub use knn::{knn_distribution, Knn, KNN_EPSILON};
pub use naive_bayes::GaussianNaiveBayes;
pub use remote::{Endpoint, RemoteClient, RemoteOptions};

#[derive(Debug, Error)]
pub enum PredictError {
    #[error("remote predictor unavailable at {endpoint}: {reason}")]
    RemoteUnavailable { endpoint: String, reason: String },
    #[error("remote protocol violation: {0}")]
    RemoteProtocol(String),
    #[error("remote predictor timed out after {0} ms")]
    Timeout(u64),
    #[error("context of {size} examples exceeds the remote maximum of {max}")]
    ContextTooLarge { size: usize, max: usize },
    #[error("query has {actual} features, context has {expected}")]
    FeatureMismatch { expected: usize, actual: usize },
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("knn needs k >= 1")]
    ZeroK,
    #[error("Laplace smoothing must be positive, got {0}")]
    NonPositiveSmoothing(f64),
    #[error("batch size must be at least 1")]
    ZeroBatch,
    #[error("at least one permutation is required")]
    ZeroPermutations,
    #[error("remote endpoint is empty")]
    EmptyEndpoint,
}

pub trait Predictor: Send {
    fn name(&self) -> String;

    fn n_classes(&self) -> usize;

    /// One distribution per query. With an empty context every distribution
    /// is uniform.
    fn predict(&mut self, ctx: &Context, queries: &[Query]) -> Result<Vec<ClassDistribution>, PredictError>;

    /// Reveals the label of an instance that has already been predicted.
    fn record_label(&mut self, _ex: &LabeledExample) {}

    /// Preferred number of queries per call.
    fn batch_size(&self) -> usize {
        1
    }
}

impl<P: Predictor + ?Sized> Predictor for Box<P> {
    fn name(&self) -> String {
        (**self).name()
    }

    fn n_classes(&self) -> usize {
        (**self).n_classes()
    }

    fn predict(&mut self, ctx: &Context, queries: &[Query]) -> Result<Vec<ClassDistribution>, PredictError> {
        (**self).predict(ctx, queries)
    }

    fn record_label(&mut self, ex: &LabeledExample) {
        (**self).record_label(ex)
    }

    fn batch_size(&self) -> usize {
        (**self).batch_size()
    }
}

pub(crate) fn uniform_batch(n_classes: usize, n: usize) -> Vec<ClassDistribution> {
    vec![ClassDistribution::uniform(n_classes); n]
}

fn default_alpha() -> f64 {
    1.0
}

/// Declarative predictor choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictorConfig {
    Knn {
        k: usize,
    },
    NaiveBayes {
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
    NoChange,
    MajorityClass,
    Remote(RemoteOptions),
}

impl PredictorConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        match self {
            PredictorConfig::Knn { k } if *k == 0 => Err(ConfigError::ZeroK),
            PredictorConfig::NaiveBayes { alpha } if alpha.is_nan() || *alpha <= 0.0 => {
                Err(ConfigError::NonPositiveSmoothing(*alpha))
            }
            PredictorConfig::Remote(opts) => opts.validate(),
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> String {
        match self {
            PredictorConfig::Knn { k } => format!("knn(k={k})"),
            PredictorConfig::NaiveBayes { alpha } => format!("naive_bayes(alpha={alpha})"),
            PredictorConfig::NoChange => "no_change".into(),
            PredictorConfig::MajorityClass => "majority_class".into(),
            PredictorConfig::Remote(o) => format!("remote({})", o.endpoint),
        }
    }

    /// Instantiates the predictor. Remote predictors connect and handshake
    /// here.
    pub fn build(&self, n_classes: usize) -> Result<Box<dyn Predictor>, PredictError> {
        Ok(match self {
            PredictorConfig::Knn { k } => Box::new(Knn::new(*k, n_classes)),
            PredictorConfig::NaiveBayes { alpha } => Box::new(GaussianNaiveBayes::new(*alpha, n_classes)),
            PredictorConfig::NoChange => Box::new(NoChange::new(n_classes)),
            PredictorConfig::MajorityClass => Box::new(MajorityClass::new(n_classes)),
            PredictorConfig::Remote(opts) => Box::new(RemoteClient::connect(opts.clone(), n_classes)?),
        })
    }
}
