//! Seeded synthetic streams that know their true conditional `p(y | x)`.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{IngestError, Normalization, Origin, RawRow, RawValue, RowReader, StreamSource};
use crate::types::Schema;

/// A stationary labeled distribution whose class posterior may be known.
pub trait TruthfulConcept: Send + Sync {
    fn n_features(&self) -> usize;
    fn n_classes(&self) -> usize;
    fn sample(&self, rng: &mut dyn RngCore) -> (Vec<f64>, usize);
    /// `p(y | x)`, or `None` when the concept cannot compute it.
    fn true_conditional(&self, x: &[f64]) -> Option<Vec<f64>>;
}

/// Isotropic Gaussian class-conditionals with class priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianConcept {
    pub class_priors: Vec<f64>,
    pub class_means: Vec<Vec<f64>>,
    pub std: f64,
}

impl GaussianConcept {
    pub fn validate(&self) -> Result<(), IngestError> {
        let invalid = |m: String| Err(IngestError::InvalidSpec(m));
        if self.class_priors.is_empty() || self.class_priors.len() != self.class_means.len() {
            return invalid(format!("{} priors for {} class means", self.class_priors.len(), self.class_means.len()));
        }
        if self.class_priors.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return invalid("class priors must be non-negative".into());
        }
        let total: f64 = self.class_priors.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return invalid(format!("class priors sum to {total}"));
        }
        let dims = self.class_means[0].len();
        if dims == 0 || self.class_means.iter().any(|m| m.len() != dims) {
            return invalid("class means must share a non-zero dimension".into());
        }
        if !(self.std.is_finite() && self.std > 0.0) {
            return invalid(format!("std must be positive, got {}", self.std));
        }
        Ok(())
    }

    /// Log of `p(y) p(x | y)` for every class, including normalizers.
    fn log_joint(&self, x: &[f64]) -> Vec<f64> {
        let var = self.std * self.std;
        let log_norm = -(x.len() as f64) * (self.std.ln() + 0.5 * (2.0 * std::f64::consts::PI).ln());
        self.class_priors
            .iter()
            .zip(&self.class_means)
            .map(|(&prior, mean)| {
                if prior == 0.0 {
                    return f64::NEG_INFINITY;
                }
                let sq: f64 = x.iter().zip(mean).map(|(a, b)| (a - b) * (a - b)).sum();
                prior.ln() + log_norm - sq / (2.0 * var)
            })
            .collect()
    }
}

fn sample_class(priors: &[f64], rng: &mut dyn RngCore) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in priors.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left u above the cumulative mass; take the last class with mass.
    priors.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

fn normalize_log(log_weights: &[f64]) -> Vec<f64> {
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = log_weights.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

impl TruthfulConcept for GaussianConcept {
    fn n_features(&self) -> usize {
        self.class_means[0].len()
    }

    fn n_classes(&self) -> usize {
        self.class_priors.len()
    }

    fn sample(&self, rng: &mut dyn RngCore) -> (Vec<f64>, usize) {
        let y = sample_class(&self.class_priors, rng);
        let x = self.class_means[y]
            .iter()
            .map(|m| {
                let z: f64 = rng.sample(StandardNormal);
                m + self.std * z
            })
            .collect();
        (x, y)
    }

    fn true_conditional(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some(normalize_log(&self.log_joint(x)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub concept: GaussianConcept,
    pub length: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transition {
    Abrupt,
    /// Linear mixing over `width` instances centred on each boundary.
    Gradual {
        width: u64,
    },
}

/// Consecutive concepts, each active for a fixed number of instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    pub segments: Vec<Segment>,
    pub transition: Transition,
}

impl DriftSpec {
    pub fn validate(&self) -> Result<(), IngestError> {
        let first = self.segments.first().ok_or_else(|| IngestError::InvalidSpec("no segments".into()))?;
        let (dims, classes) = (first.concept.n_features_checked()?, first.concept.class_priors.len());
        for (i, seg) in self.segments.iter().enumerate() {
            seg.concept.validate()?;
            if seg.length == 0 {
                return Err(IngestError::InvalidSpec(format!("segment {i} has zero length")));
            }
            if seg.concept.class_means[0].len() != dims || seg.concept.class_priors.len() != classes {
                return Err(IngestError::InvalidSpec(format!("segment {i} changes the feature or class count")));
            }
            if let Transition::Gradual { width } = self.transition {
                if width == 0 || width >= seg.length {
                    return Err(IngestError::InvalidSpec(format!(
                        "gradual width {width} must be in [1, {}) for segment {i}",
                        seg.length
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn total_length(&self) -> u64 {
        self.segments.iter().map(|s| s.length).sum()
    }

    pub fn n_features(&self) -> usize {
        self.segments[0].concept.class_means[0].len()
    }

    pub fn n_classes(&self) -> usize {
        self.segments[0].concept.class_priors.len()
    }

    /// The active concepts at position `t` and the weight of the second one.
    fn mixture_at(&self, t: u64) -> (&GaussianConcept, Option<(&GaussianConcept, f64)>) {
        let mut start = 0u64;
        for (i, seg) in self.segments.iter().enumerate() {
            let end = start + seg.length;
            if t < end {
                if let Transition::Gradual { width } = self.transition {
                    let half = width as f64 / 2.0;
                    let pos = t as f64 + 0.5;
                    // Mixing into the next concept near the end of this segment.
                    if let Some(next) = self.segments.get(i + 1) {
                        let from = end as f64 - half;
                        if pos > from {
                            let lambda = (pos - from) / width as f64;
                            return (&seg.concept, Some((&next.concept, lambda)));
                        }
                    }
                    // Still mixing in from the previous concept.
                    if i > 0 {
                        let until = start as f64 + half;
                        if pos < until {
                            let lambda = 0.5 + (pos - start as f64) / width as f64;
                            return (&self.segments[i - 1].concept, Some((&seg.concept, lambda)));
                        }
                    }
                }
                return (&seg.concept, None);
            }
            start = end;
        }
        (&self.segments.last().expect("validated").concept, None)
    }

    /// `p(y | x)` of the distribution generating position `t`.
    pub fn true_conditional_at(&self, t: u64, x: &[f64]) -> Vec<f64> {
        match self.mixture_at(t) {
            (concept, None) => normalize_log(&concept.log_joint(x)),
            (old, Some((new, lambda))) => {
                let a = old.log_joint(x);
                let b = new.log_joint(x);
                let mixed: Vec<f64> =
                    a.iter().zip(&b).map(|(la, lb)| log_add((1.0 - lambda).ln() + la, lambda.ln() + lb)).collect();
                normalize_log(&mixed)
            }
        }
    }

    /// Abrupt two-class-or-more preset: every class keeps its mean for the
    /// whole stream, but class priors follow `priors` segment by segment. A
    /// zero prior makes a class disappear until a later segment brings it
    /// back.
    pub fn recurring_classes(means: Vec<Vec<f64>>, std: f64, priors: Vec<Vec<f64>>, segment_length: u64) -> Self {
        DriftSpec {
            segments: priors
                .into_iter()
                .map(|p| Segment {
                    concept: GaussianConcept { class_priors: p, class_means: means.clone(), std },
                    length: segment_length,
                })
                .collect(),
            transition: Transition::Abrupt,
        }
    }
    /// Four isotropic classes on the corners of a square of side `side`.
    /// Each segment draws from one pair of them with equal priors, cycling
    /// through all six pairs, so every class repeatedly disappears for
    /// several segments and then returns unchanged. The final segment is
    /// shortened to end at `length`.
    pub fn class_pair_cycle(length: u64, segment_length: u64, side: f64, std: f64) -> Self {
        const PAIRS: [[usize; 2]; 6] = [[0, 1], [2, 3], [0, 2], [1, 3], [0, 3], [1, 2]];
        let means = vec![vec![0.0, 0.0], vec![side, 0.0], vec![0.0, side], vec![side, side]];
        let segment_length = segment_length.max(1);
        let mut segments = Vec::new();
        let mut start = 0;
        while start < length {
            let pair = PAIRS[segments.len() % PAIRS.len()];
            let mut priors = vec![0.0; 4];
            for c in pair {
                priors[c] = 0.5;
            }
            segments.push(Segment {
                concept: GaussianConcept { class_priors: priors, class_means: means.clone(), std },
                length: segment_length.min(length - start),
            });
            start += segment_length;
        }
        DriftSpec { segments, transition: Transition::Abrupt }
    }
}

impl GaussianConcept {
    fn n_features_checked(&self) -> Result<usize, IngestError> {
        self.validate()?;
        Ok(self.class_means[0].len())
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn class_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("c{i}")).collect()
}

struct DriftRows {
    spec: DriftSpec,
    rng: ChaCha8Rng,
    t: u64,
    total: u64,
}

impl RowReader for DriftRows {
    fn next_row(&mut self) -> Option<Result<RawRow, IngestError>> {
        if self.t >= self.total {
            return None;
        }
        let t = self.t;
        self.t += 1;
        let concept = match self.spec.mixture_at(t) {
            (c, None) => c,
            (old, Some((new, lambda))) => {
                if self.rng.random::<f64>() < lambda {
                    new
                } else {
                    old
                }
            }
        };
        let (x, y) = concept.sample(&mut self.rng);
        let truth = self.spec.true_conditional_at(t, &x);
        Some(Ok(RawRow { values: x.into_iter().map(RawValue::Numeric).collect(), label: y, truth: Some(truth) }))
    }
}

/// Stream drawn segment by segment from `spec`; identical for identical seeds.
pub fn gaussian_drift_stream(spec: &DriftSpec, seed: u64) -> Result<StreamSource, IngestError> {
    spec.validate()?;
    let schema = Schema::numeric(spec.n_features(), class_names(spec.n_classes()))?;
    let rows = DriftRows { spec: spec.clone(), rng: ChaCha8Rng::seed_from_u64(seed), t: 0, total: spec.total_length() };
    Ok(StreamSource::new(
        schema,
        Origin::Synthetic { generator: "gaussian_drift".into(), seed },
        Box::new(rows),
        Normalization::Identity,
        true,
    ))
}

/// Binary stream labelled by a hyperplane through the centre of the unit
/// cube whose normal rotates at a constant angular rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperplaneSpec {
    pub dims: usize,
    /// Radians per instance.
    pub rotation_rate: f64,
    /// Probability of flipping the clean label.
    pub noise: f64,
    pub length: u64,
}

impl HyperplaneSpec {
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.dims < 2 {
            return Err(IngestError::InvalidSpec("hyperplane needs at least 2 dimensions".into()));
        }
        if !self.rotation_rate.is_finite() {
            return Err(IngestError::InvalidSpec("rotation rate must be finite".into()));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(IngestError::InvalidSpec(format!("noise {} outside [0, 1]", self.noise)));
        }
        Ok(())
    }
}

/// Fixed orthonormal pair spanning the rotation plane, drawn from the seed.
#[derive(Debug, Clone)]
pub struct RotatingHyperplane {
    spec: HyperplaneSpec,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl RotatingHyperplane {
    pub fn new(spec: HyperplaneSpec, rng: &mut dyn RngCore) -> Self {
        let d = spec.dims;
        let gauss = |rng: &mut dyn RngCore| -> Vec<f64> { (0..d).map(|_| rng.sample(StandardNormal)).collect() };
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let mut u = gauss(rng);
        let nu = dot(&u, &u).sqrt();
        u.iter_mut().for_each(|x| *x /= nu);
        let mut v = gauss(rng);
        let proj = dot(&u, &v);
        v.iter_mut().zip(&u).for_each(|(x, ux)| *x -= proj * ux);
        let nv = dot(&v, &v).sqrt();
        v.iter_mut().for_each(|x| *x /= nv);
        Self { spec, u, v }
    }

    /// Unit normal of the decision boundary at position `t`.
    pub fn normal_at(&self, t: u64) -> Vec<f64> {
        let theta = self.spec.rotation_rate * t as f64;
        let (s, c) = theta.sin_cos();
        self.u.iter().zip(&self.v).map(|(a, b)| c * a + s * b).collect()
    }

    pub fn clean_label(&self, t: u64, x: &[f64]) -> usize {
        let w = self.normal_at(t);
        let margin: f64 = w.iter().zip(x).map(|(wi, xi)| wi * (xi - 0.5)).sum();
        usize::from(margin >= 0.0)
    }

    pub fn true_conditional_at(&self, t: u64, x: &[f64]) -> Vec<f64> {
        let noise = self.spec.noise;
        if self.clean_label(t, x) == 1 {
            vec![noise, 1.0 - noise]
        } else {
            vec![1.0 - noise, noise]
        }
    }
}

struct HyperplaneRows {
    plane: RotatingHyperplane,
    rng: ChaCha8Rng,
    t: u64,
}

impl RowReader for HyperplaneRows {
    fn next_row(&mut self) -> Option<Result<RawRow, IngestError>> {
        if self.t >= self.plane.spec.length {
            return None;
        }
        let t = self.t;
        self.t += 1;
        let x: Vec<f64> = (0..self.plane.spec.dims).map(|_| self.rng.random::<f64>()).collect();
        let mut y = self.plane.clean_label(t, &x);
        if self.rng.random::<f64>() < self.plane.spec.noise {
            y = 1 - y;
        }
        let truth = self.plane.true_conditional_at(t, &x);
        Some(Ok(RawRow { values: x.into_iter().map(RawValue::Numeric).collect(), label: y, truth: Some(truth) }))
    }
}

pub fn rotating_hyperplane_stream(spec: &HyperplaneSpec, seed: u64) -> Result<StreamSource, IngestError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plane = RotatingHyperplane::new(spec.clone(), &mut rng);
    let schema = Schema::numeric(spec.dims, class_names(2))?;
    Ok(StreamSource::new(
        schema,
        Origin::Synthetic { generator: "rotating_hyperplane".into(), seed },
        Box::new(HyperplaneRows { plane, rng, t: 0 }),
        Normalization::Identity,
        true,
    ))
}

/// The plane a hyperplane stream with this spec and seed will use.
pub fn hyperplane_for(spec: &HyperplaneSpec, seed: u64) -> RotatingHyperplane {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RotatingHyperplane::new(spec.clone(), &mut rng)
}
