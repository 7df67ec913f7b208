//! Domain types shared across the engine.
//!
//! Everything here is immutable after construction. Constructors validate
//! and return an error instead of coercing.

use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance on the probability mass of a [`ClassDistribution`].
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchemaError {
    #[error("schema has no features")]
    NoFeatures,
    #[error("{names} feature names but {kinds} feature kinds")]
    KindCountMismatch { names: usize, kinds: usize },
    #[error("schema has no classes")]
    NoClasses,
    #[error("duplicate class name {0:?}")]
    DuplicateClass(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExampleError {
    #[error("expected {expected} features, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("feature {index} is not finite ({value})")]
    NonFiniteFeature { index: usize, value: f64 },
    #[error("label {label} is outside the {n_classes} known classes")]
    UnknownLabel { label: usize, n_classes: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistributionError {
    #[error("empty probability vector")]
    Empty,
    #[error("probability {index} is invalid ({value})")]
    InvalidEntry { index: usize, value: f64 },
    #[error("probabilities sum to {sum}, not 1")]
    NotNormalized { sum: f64 },
    #[error("weights have no positive mass")]
    ZeroMass,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ContextError {
    #[error("arrival index {0} appears twice in the context")]
    DuplicateArrival(u64),
    #[error("arrival index {index} is out of order within its portion")]
    OutOfOrder { index: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureKind {
    Numeric,
    /// Ordinal-encoded nominal feature. `categories` may start empty for
    /// sources that learn their categories online.
    Categorical {
        categories: Vec<String>,
    },
}

impl FeatureKind {
    pub fn categorical<S: Into<String>>(categories: impl IntoIterator<Item = S>) -> Self {
        FeatureKind::Categorical { categories: categories.into_iter().map(Into::into).collect() }
    }

    pub fn cardinality(&self) -> Option<usize> {
        match self {
            FeatureKind::Numeric => None,
            FeatureKind::Categorical { categories } => Some(categories.len()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    feature_names: Vec<String>,
    feature_kinds: Vec<FeatureKind>,
    class_names: Vec<String>,
}

impl Schema {
    pub fn new(
        feature_names: Vec<String>,
        feature_kinds: Vec<FeatureKind>,
        class_names: Vec<String>,
    ) -> Result<Self, SchemaError> {
        if feature_names.is_empty() {
            return Err(SchemaError::NoFeatures);
        }
        if feature_names.len() != feature_kinds.len() {
            return Err(SchemaError::KindCountMismatch { names: feature_names.len(), kinds: feature_kinds.len() });
        }
        if class_names.is_empty() {
            return Err(SchemaError::NoClasses);
        }
        let mut seen = HashSet::with_capacity(class_names.len());
        for name in &class_names {
            if !seen.insert(name.as_str()) {
                return Err(SchemaError::DuplicateClass(name.clone()));
            }
        }
        Ok(Self { feature_names, feature_kinds, class_names })
    }

    /// All-numeric schema with generated names `x0..x{n-1}`.
    pub fn numeric(n_features: usize, class_names: Vec<String>) -> Result<Self, SchemaError> {
        let names = (0..n_features).map(|i| format!("x{i}")).collect();
        Self::new(names, vec![FeatureKind::Numeric; n_features], class_names)
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_kinds(&self) -> &[FeatureKind] {
        &self.feature_kinds
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|c| c == name)
    }
}

/// One labeled stream instance after encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    /// Shared so that contexts can be assembled without copying rows.
    pub features: Arc<[f64]>,
    pub label: usize,
    pub arrival_index: u64,
}

impl LabeledExample {
    /// The unlabeled view of this example.
    pub fn query(&self) -> Query {
        Query { features: self.features.clone(), arrival_index: self.arrival_index }
    }
}

/// Validates a raw encoded row against `schema`.
pub fn validate_example(
    schema: &Schema,
    raw: Vec<f64>,
    label: usize,
    arrival_index: u64,
) -> Result<LabeledExample, ExampleError> {
    check_features(schema, &raw)?;
    if label >= schema.n_classes() {
        return Err(ExampleError::UnknownLabel { label, n_classes: schema.n_classes() });
    }
    Ok(LabeledExample { features: raw.into(), label, arrival_index })
}

fn check_features(schema: &Schema, raw: &[f64]) -> Result<(), ExampleError> {
    if raw.len() != schema.n_features() {
        return Err(ExampleError::LengthMismatch { expected: schema.n_features(), actual: raw.len() });
    }
    if let Some((index, &value)) = raw.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(ExampleError::NonFiniteFeature { index, value });
    }
    Ok(())
}

/// An unlabeled query. There is deliberately no label field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub features: Arc<[f64]>,
    pub arrival_index: u64,
}

impl Query {
    pub fn new(schema: &Schema, features: Vec<f64>, arrival_index: u64) -> Result<Self, ExampleError> {
        check_features(schema, &features)?;
        Ok(Self { features: features.into(), arrival_index })
    }
}

/// A normalized probability vector over the schema's classes.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ClassDistribution {
    probs: Vec<f64>,
}

impl ClassDistribution {
    /// Accepts `probs` only if every entry is finite and non-negative and the
    /// total is within [`NORMALIZATION_TOLERANCE`] of one.
    pub fn new(probs: Vec<f64>) -> Result<Self, DistributionError> {
        if probs.is_empty() {
            return Err(DistributionError::Empty);
        }
        if let Some((index, &value)) = probs.iter().enumerate().find(|(_, p)| !p.is_finite() || **p < 0.0) {
            return Err(DistributionError::InvalidEntry { index, value });
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(DistributionError::NotNormalized { sum });
        }
        Ok(Self { probs })
    }

    /// Normalizes non-negative weights into a distribution.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self, DistributionError> {
        if weights.is_empty() {
            return Err(DistributionError::Empty);
        }
        if let Some((index, &value)) = weights.iter().enumerate().find(|(_, w)| !w.is_finite() || **w < 0.0) {
            return Err(DistributionError::InvalidEntry { index, value });
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 || !total.is_finite() {
            return Err(DistributionError::ZeroMass);
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(n_classes: usize) -> Self {
        assert!(n_classes > 0, "uniform distribution over zero classes");
        Self { probs: vec![1.0 / n_classes as f64; n_classes] }
    }

    pub fn one_hot(n_classes: usize, class: usize) -> Self {
        assert!(class < n_classes, "class {class} out of range {n_classes}");
        let mut probs = vec![0.0; n_classes];
        probs[class] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn n_classes(&self) -> usize {
        self.probs.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.probs
    }
}

/// Index of the most probable class; ties go to the lowest index.
pub fn argmax_label(dist: &ClassDistribution) -> usize {
    let mut best = 0;
    for (i, &p) in dist.probs.iter().enumerate().skip(1) {
        if p > dist.probs[best] {
            best = i;
        }
    }
    best
}

/// The examples handed to a predictor: long-term portion first, then the
/// short-term portion, each in arrival order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Context {
    examples: Vec<LabeledExample>,
    long_len: usize,
}

impl Context {
    pub fn new(long_term: Vec<LabeledExample>, short_term: Vec<LabeledExample>) -> Result<Self, ContextError> {
        check_portion(&long_term)?;
        check_portion(&short_term)?;
        let long_len = long_term.len();
        let mut examples = long_term;
        examples.extend(short_term);
        let mut seen = HashSet::with_capacity(examples.len());
        for ex in &examples {
            if !seen.insert(ex.arrival_index) {
                return Err(ContextError::DuplicateArrival(ex.arrival_index));
            }
        }
        Ok(Self { examples, long_len })
    }

    /// Builds a context from portions the caller already keeps ordered and
    /// disjoint (the dual memory does).
    pub(crate) fn from_ordered_parts(
        mut examples: Vec<LabeledExample>,
        short_term: impl IntoIterator<Item = LabeledExample>,
    ) -> Self {
        let long_len = examples.len();
        examples.extend(short_term);
        debug_assert!(check_portion(&examples[..long_len]).is_ok());
        debug_assert!(check_portion(&examples[long_len..]).is_ok());
        Self { examples, long_len }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }

    pub fn long_term(&self) -> &[LabeledExample] {
        &self.examples[..self.long_len]
    }

    pub fn short_term(&self) -> &[LabeledExample] {
        &self.examples[self.long_len..]
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn contains_arrival(&self, arrival_index: u64) -> bool {
        self.examples.iter().any(|e| e.arrival_index == arrival_index)
    }
}

fn check_portion(portion: &[LabeledExample]) -> Result<(), ContextError> {
    for pair in portion.windows(2) {
        if pair[1].arrival_index < pair[0].arrival_index {
            return Err(ContextError::OutOfOrder { index: pair[1].arrival_index });
        }
    }
    Ok(())
}
