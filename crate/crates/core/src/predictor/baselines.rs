//! Context-free reference predictors. Both learn only from labels revealed
//! through `record_label`.

use super::{uniform_batch, PredictError, Predictor};
use crate::types::{ClassDistribution, Context, LabeledExample, Query};

/// Predicts the most recently revealed label.
#[derive(Debug, Clone)]
pub struct NoChange {
    n_classes: usize,
    last: Option<usize>,
}

impl NoChange {
    pub fn new(n_classes: usize) -> Self {
        Self { n_classes, last: None }
    }
}

impl Predictor for NoChange {
    fn name(&self) -> String {
        "no_change".into()
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict(&mut self, ctx: &Context, queries: &[Query]) -> Result<Vec<ClassDistribution>, PredictError> {
        Ok(match self.last {
            Some(label) if !ctx.is_empty() => vec![ClassDistribution::one_hot(self.n_classes, label); queries.len()],
            _ => uniform_batch(self.n_classes, queries.len()),
        })
    }

    fn record_label(&mut self, ex: &LabeledExample) {
        self.last = Some(ex.label);
    }
}

/// Predicts the empirical label frequencies seen so far; its argmax is the
/// running mode.
#[derive(Debug, Clone)]
pub struct MajorityClass {
    counts: Vec<u64>,
}

impl MajorityClass {
    pub fn new(n_classes: usize) -> Self {
        Self { counts: vec![0; n_classes] }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
}

impl Predictor for MajorityClass {
    fn name(&self) -> String {
        "majority_class".into()
    }

    fn n_classes(&self) -> usize {
        self.counts.len()
    }

    fn predict(&mut self, ctx: &Context, queries: &[Query]) -> Result<Vec<ClassDistribution>, PredictError> {
        let total: u64 = self.counts.iter().sum();
        if ctx.is_empty() || total == 0 {
            return Ok(uniform_batch(self.counts.len(), queries.len()));
        }
        let dist = ClassDistribution::from_weights(self.counts.iter().map(|&c| c as f64).collect())
            .expect("non-zero label counts");
        Ok(vec![dist; queries.len()])
    }

    fn record_label(&mut self, ex: &LabeledExample) {
        self.counts[ex.label] += 1;
    }
}
