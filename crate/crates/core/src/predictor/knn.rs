use std::cmp::Ordering;

use super::{uniform_batch, PredictError, Predictor};
use crate::types::{ClassDistribution, Context, LabeledExample, Query};

/// Added to every distance before inverting it.
pub const KNN_EPSILON: f64 = 1e-12;

/// Inverse-distance-weighted k-nearest-neighbour vote.
#[derive(Debug, Clone)]
pub struct Knn {
    k: usize,
    n_classes: usize,
}

impl Knn {
    pub fn new(k: usize, n_classes: usize) -> Self {
        assert!(k >= 1, "k must be at least 1");
        Self { k, n_classes }
    }
}

impl Predictor for Knn {
    fn name(&self) -> String {
        format!("knn(k={})", self.k)
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict(&mut self, ctx: &Context, queries: &[Query]) -> Result<Vec<ClassDistribution>, PredictError> {
        if ctx.is_empty() {
            return Ok(uniform_batch(self.n_classes, queries.len()));
        }
        queries
            .iter()
            .map(|q| {
                let expected = ctx.examples()[0].features.len();
                if q.features.len() != expected {
                    return Err(PredictError::FeatureMismatch { expected, actual: q.features.len() });
                }
                Ok(knn_distribution(ctx.examples(), &q.features, self.k, self.n_classes))
            })
            .collect()
    }
}

fn by_distance(a: &(f64, u64, usize), b: &(f64, u64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Weighted vote of the `k` nearest examples (all of them if fewer), each
/// weighing `1 / (d + ε)`. Distance ties are broken by arrival index so the
/// result does not depend on the order of `examples`.
pub fn knn_distribution(examples: &[LabeledExample], query: &[f64], k: usize, n_classes: usize) -> ClassDistribution {
    if examples.is_empty() {
        return ClassDistribution::uniform(n_classes);
    }
    // Squared distances order the neighbours; roots are taken for the k kept.
    let mut scored: Vec<(f64, u64, usize)> = examples
        .iter()
        .map(|e| {
            let sq: f64 = e.features.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
            (sq, e.arrival_index, e.label)
        })
        .collect();
    let k = k.min(scored.len());
    if k < scored.len() {
        scored.select_nth_unstable_by(k - 1, by_distance);
        scored.truncate(k);
    }
    scored.sort_unstable_by(by_distance);
    let mut weights = vec![0.0; n_classes];
    for &(sq, _, label) in &scored {
        weights[label] += 1.0 / (sq.sqrt() + KNN_EPSILON);
    }
    ClassDistribution::from_weights(weights).expect("positive finite weights")
}
