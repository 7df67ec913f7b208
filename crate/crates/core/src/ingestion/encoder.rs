use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{IngestError, RawValue};
use crate::types::{validate_example, ExampleError, FeatureKind, LabeledExample, Schema};

/// Numeric feature scaling applied by the encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// z-score with running mean and population standard deviation of the
    /// values released so far.
    #[default]
    RunningZScore,
    Identity,
}

#[derive(Debug, Clone, Default)]
struct RunningMoments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningMoments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn std(&self) -> f64 {
        (self.m2 / self.n as f64).sqrt()
    }
}

#[derive(Debug, Clone)]
struct CategoryMap {
    index: HashMap<String, usize>,
    counts: Vec<u64>,
}

impl CategoryMap {
    fn new(categories: &[String]) -> Self {
        Self {
            index: categories.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect(),
            counts: vec![0; categories.len()],
        }
    }

    fn mode(&self) -> usize {
        let mut best = 0;
        for (i, &c) in self.counts.iter().enumerate() {
            if c > self.counts.get(best).copied().unwrap_or(0) {
                best = i;
            }
        }
        best
    }
}

#[derive(Debug, Clone)]
enum FeatureState {
    Numeric(RunningMoments),
    Categorical(CategoryMap),
}

/// Online encoder. Statistics only ever include values that were already
/// released, so encoding an example never depends on later rows.
#[derive(Debug, Clone)]
pub struct EncoderState {
    features: Vec<FeatureState>,
    n_classes: usize,
    schema: Schema,
    normalization: Normalization,
    strict_categories: bool,
    imputed: u64,
}

impl EncoderState {
    pub fn new(schema: &Schema, normalization: Normalization, strict_categories: bool) -> Self {
        let features = schema
            .feature_kinds()
            .iter()
            .map(|kind| match kind {
                FeatureKind::Numeric => FeatureState::Numeric(RunningMoments::default()),
                FeatureKind::Categorical { categories } => FeatureState::Categorical(CategoryMap::new(categories)),
            })
            .collect();
        Self {
            features,
            n_classes: schema.n_classes(),
            schema: schema.clone(),
            normalization,
            strict_categories,
            imputed: 0,
        }
    }

    /// Number of missing values imputed so far.
    pub fn imputed_values(&self) -> u64 {
        self.imputed
    }

    /// Running mean of numeric feature `feature`, if any value was seen.
    pub fn running_mean(&self, feature: usize) -> Option<f64> {
        match self.features.get(feature)? {
            FeatureState::Numeric(m) if m.n > 0 => Some(m.mean),
            _ => None,
        }
    }

    pub fn encode(
        &mut self,
        raw: &[RawValue],
        label: usize,
        arrival_index: u64,
    ) -> Result<LabeledExample, IngestError> {
        let bad = |source| IngestError::Example { arrival_index, source };
        if raw.len() != self.features.len() {
            return Err(bad(ExampleError::LengthMismatch { expected: self.features.len(), actual: raw.len() }));
        }
        if label >= self.n_classes {
            return Err(bad(ExampleError::UnknownLabel { label, n_classes: self.n_classes }));
        }
        // Validate everything before touching statistics so a rejected row
        // leaves the state unchanged.
        for (i, (value, state)) in raw.iter().zip(&self.features).enumerate() {
            match (value, state) {
                (RawValue::Numeric(v), FeatureState::Numeric(_)) if !v.is_finite() => {
                    return Err(bad(ExampleError::NonFiniteFeature { index: i, value: *v }));
                }
                (RawValue::Categorical(s), FeatureState::Categorical(map))
                    if self.strict_categories && !map.index.contains_key(s) =>
                {
                    return Err(IngestError::UnknownCategoricalValue { feature: i, value: s.clone() });
                }
                (RawValue::Categorical(_), FeatureState::Numeric(_)) => {
                    return Err(IngestError::SchemaMismatch(format!(
                        "feature {} ({}) is numeric but got a categorical value",
                        i,
                        self.schema.feature_names()[i]
                    )));
                }
                (RawValue::Numeric(_), FeatureState::Categorical(_)) => {
                    return Err(IngestError::SchemaMismatch(format!(
                        "feature {} ({}) is categorical but got a numeric value",
                        i,
                        self.schema.feature_names()[i]
                    )));
                }
                _ => {}
            }
        }

        let mut encoded = Vec::with_capacity(raw.len());
        for (value, state) in raw.iter().zip(self.features.iter_mut()) {
            match state {
                FeatureState::Numeric(moments) => {
                    let x = match value {
                        RawValue::Numeric(v) => *v,
                        _ => {
                            self.imputed += 1;
                            moments.mean
                        }
                    };
                    let z = match self.normalization {
                        Normalization::Identity => x,
                        Normalization::RunningZScore if moments.n < 2 => x,
                        Normalization::RunningZScore => {
                            let std = moments.std();
                            if std > 1e-12 {
                                (x - moments.mean) / std
                            } else {
                                x - moments.mean
                            }
                        }
                    };
                    encoded.push(z);
                    if let RawValue::Numeric(v) = value {
                        moments.push(*v);
                    }
                }
                FeatureState::Categorical(map) => {
                    let index = match value {
                        RawValue::Categorical(s) => match map.index.get(s) {
                            Some(&i) => i,
                            None => {
                                let i = map.counts.len();
                                map.index.insert(s.clone(), i);
                                map.counts.push(0);
                                i
                            }
                        },
                        _ => {
                            self.imputed += 1;
                            map.mode()
                        }
                    };
                    if let RawValue::Categorical(_) = value {
                        map.counts[index] += 1;
                    }
                    encoded.push(index as f64);
                }
            }
        }
        validate_example(&self.schema, encoded, label, arrival_index).map_err(bad)
    }
}
