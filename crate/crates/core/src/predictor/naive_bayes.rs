use super::{uniform_batch, PredictError, Predictor};
use crate::types::{ClassDistribution, Context, Query};

/// Gaussian naive Bayes fitted on the context for every call.
///
/// Class priors use Laplace smoothing `(n_y + α) / (n + α K)`. Classes absent
/// from the context fall back to the pooled per-feature Gaussian of the whole
/// context, so they keep only their prior advantage or disadvantage.
#[derive(Debug, Clone)]
pub struct GaussianNaiveBayes {
    alpha: f64,
    n_classes: usize,
}

struct Moments {
    count: usize,
    mean: Vec<f64>,
    var: Vec<f64>,
}

impl Moments {
    fn fit<'a>(rows: impl Iterator<Item = &'a [f64]>, d: usize) -> Self {
        let mut count = 0;
        let mut sum = vec![0.0; d];
        let mut sq = vec![0.0; d];
        for row in rows {
            count += 1;
            for j in 0..d {
                sum[j] += row[j];
                sq[j] += row[j] * row[j];
            }
        }
        let n = count.max(1) as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let var = sq.iter().zip(&mean).map(|(s, m)| (s / n - m * m).max(0.0)).collect();
        Self { count, mean, var }
    }
}

impl GaussianNaiveBayes {
    pub fn new(alpha: f64, n_classes: usize) -> Self {
        assert!(alpha > 0.0, "smoothing must be positive");
        Self { alpha, n_classes }
    }
}

impl Predictor for GaussianNaiveBayes {
    fn name(&self) -> String {
        format!("naive_bayes(alpha={})", self.alpha)
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict(&mut self, ctx: &Context, queries: &[Query]) -> Result<Vec<ClassDistribution>, PredictError> {
        if ctx.is_empty() {
            return Ok(uniform_batch(self.n_classes, queries.len()));
        }
        let d = ctx.examples()[0].features.len();
        let pooled = Moments::fit(ctx.examples().iter().map(|e| &*e.features), d);
        // Variance floor relative to the widest feature, as in common GNB
        // implementations.
        let floor = 1e-9 * pooled.var.iter().cloned().fold(0.0, f64::max) + 1e-12;
        let per_class: Vec<Moments> = (0..self.n_classes)
            .map(|c| Moments::fit(ctx.examples().iter().filter(|e| e.label == c).map(|e| &*e.features), d))
            .collect();
        let n = ctx.len() as f64;
        let denom = n + self.alpha * self.n_classes as f64;

        queries
            .iter()
            .map(|q| {
                if q.features.len() != d {
                    return Err(PredictError::FeatureMismatch { expected: d, actual: q.features.len() });
                }
                let log_post: Vec<f64> = per_class
                    .iter()
                    .map(|m| {
                        let stats = if m.count == 0 { &pooled } else { m };
                        let prior = ((m.count as f64 + self.alpha) / denom).ln();
                        let ll: f64 = q
                            .features
                            .iter()
                            .zip(stats.mean.iter().zip(&stats.var))
                            .map(|(x, (mu, v))| {
                                let v = v + floor;
                                -0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (x - mu) * (x - mu) / v)
                            })
                            .sum();
                        prior + ll
                    })
                    .collect();
                let max = log_post.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let weights = log_post.iter().map(|l| (l - max).exp()).collect();
                Ok(ClassDistribution::from_weights(weights).expect("finite posterior"))
            })
            .collect()
    }
}
