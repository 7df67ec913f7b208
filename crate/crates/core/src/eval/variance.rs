use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::ingestion::TruthfulConcept;
use crate::predictor::Predictor;
use crate::types::{Context, LabeledExample, Query};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceProbeSpec {
    pub context_sizes: Vec<usize>,
    /// Independent contexts drawn per size.
    pub resamples: usize,
    pub seed: u64,
}

/// Squared-error decomposition at one probe query. Distances are squared
/// Euclidean norms between probability vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeStats {
    /// Mean over resamples of `‖p_r - p̄‖²`.
    pub variance: f64,
    /// `‖p̄ - p*‖²` against the true conditional `p*`.
    pub bias_sq: f64,
    /// Irreducible term `1 - ‖p*‖²`.
    pub noise: f64,
    /// Monte-Carlo `‖p_r - e_y‖²` with `y ~ p*` drawn per resample.
    pub mse: f64,
    pub mean_prediction: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeReport {
    pub context_size: usize,
    pub probes: Vec<ProbeStats>,
    pub mean_variance: f64,
    pub mean_bias_sq: f64,
    pub mean_noise: f64,
    pub mean_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub resamples: usize,
    pub seed: u64,
    pub sizes: Vec<SizeReport>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n.max(1) as f64
}

/// Resamples contexts of each size from `context_concept` and measures the
/// spread of the predictor's output at fixed `probes`, scored against the
/// true conditional of `truth` (which may be a different concept, to model
/// an outdated context).
///
/// `predictor_for(n)` builds the predictor used with contexts of size `n`.
pub fn variance_probe<F, P>(
    context_concept: &dyn TruthfulConcept,
    truth: &dyn TruthfulConcept,
    mut predictor_for: F,
    probes: &[Vec<f64>],
    spec: &VarianceProbeSpec,
) -> Result<VarianceReport, EvalError>
where
    F: FnMut(usize) -> P,
    P: Predictor,
{
    if probes.is_empty() {
        return Err(EvalError::InvalidProbe("no probe queries".into()));
    }
    if spec.resamples < 2 {
        return Err(EvalError::InvalidProbe("at least 2 resamples are needed".into()));
    }
    if spec.context_sizes.contains(&0) {
        return Err(EvalError::InvalidProbe("context sizes must be positive".into()));
    }
    let d = context_concept.n_features();
    if truth.n_features() != d || truth.n_classes() != context_concept.n_classes() {
        return Err(EvalError::InvalidProbe("context and truth concepts have different shapes".into()));
    }
    if let Some(p) = probes.iter().find(|p| p.len() != d) {
        return Err(EvalError::InvalidProbe(format!("probe of width {}, concept has {d} features", p.len())));
    }
    let targets: Vec<Vec<f64>> = probes
        .iter()
        .map(|x| truth.true_conditional(x).ok_or(EvalError::GeneratorLacksTruth))
        .collect::<Result<_, _>>()?;
    let queries: Vec<Query> = probes
        .iter()
        .enumerate()
        .map(|(i, x)| Query { features: x.as_slice().into(), arrival_index: u64::MAX - i as u64 })
        .collect();
    let k = truth.n_classes();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut sizes = Vec::with_capacity(spec.context_sizes.len());
    for &n in &spec.context_sizes {
        let mut predictor = predictor_for(n);
        // outputs[r][q] is the distribution for probe q under resample r.
        let mut outputs: Vec<Vec<Vec<f64>>> = Vec::with_capacity(spec.resamples);
        let mut mse_acc = vec![0.0; probes.len()];
        for _ in 0..spec.resamples {
            let examples: Vec<LabeledExample> = (0..n)
                .map(|t| {
                    let (features, label) = context_concept.sample(&mut rng);
                    LabeledExample { features: features.into(), label, arrival_index: t as u64 }
                })
                .collect();
            let ctx = Context::new(examples, Vec::new()).expect("fresh arrival indices");
            let dists = predictor
                .predict(&ctx, &queries)
                .map_err(|source| EvalError::Predict { arrival_index: n as u64, source })?;
            if dists.len() != queries.len() {
                return Err(EvalError::BatchShape { expected: queries.len(), got: dists.len() });
            }
            let row: Vec<Vec<f64>> = dists.into_iter().map(|d| d.into_inner()).collect();
            for (q, p) in row.iter().enumerate() {
                let y = sample_label(&targets[q], rng.random::<f64>());
                let mut onehot = vec![0.0; k];
                onehot[y] = 1.0;
                mse_acc[q] += sq_dist(p, &onehot);
            }
            outputs.push(row);
        }
        let r = spec.resamples as f64;
        let probes_stats: Vec<ProbeStats> = (0..probes.len())
            .map(|q| {
                let mut mean_p = vec![0.0; k];
                for out in &outputs {
                    for (m, v) in mean_p.iter_mut().zip(&out[q]) {
                        *m += v;
                    }
                }
                mean_p.iter_mut().for_each(|m| *m /= r);
                let variance = mean(outputs.iter().map(|out| sq_dist(&out[q], &mean_p)));
                let target = &targets[q];
                ProbeStats {
                    variance,
                    bias_sq: sq_dist(&mean_p, target),
                    noise: 1.0 - target.iter().map(|p| p * p).sum::<f64>(),
                    mse: mse_acc[q] / r,
                    mean_prediction: mean_p,
                }
            })
            .collect();
        sizes.push(SizeReport {
            context_size: n,
            mean_variance: mean(probes_stats.iter().map(|p| p.variance)),
            mean_bias_sq: mean(probes_stats.iter().map(|p| p.bias_sq)),
            mean_noise: mean(probes_stats.iter().map(|p| p.noise)),
            mean_mse: mean(probes_stats.iter().map(|p| p.mse)),
            probes: probes_stats,
        });
    }
    Ok(VarianceReport { resamples: spec.resamples, seed: spec.seed, sizes })
}

fn sample_label(p: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, v) in p.iter().enumerate() {
        acc += v;
        if u < acc {
            return i;
        }
    }
    p.len() - 1
}
