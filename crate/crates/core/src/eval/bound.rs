use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::zeta;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundError {
    #[error("sensitivity decay α = {0} does not exceed 1/2; the series diverges")]
    DivergentSeries(f64),
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("finite series needs at least one term")]
    NoTerms,
}

/// Per-coordinate sensitivities `c_i = δ · i^(-α)` and a deviation `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzBoundConfig {
    pub delta: f64,
    pub alpha: f64,
    pub t: f64,
}

impl LipschitzBoundConfig {
    pub fn validate(&self) -> Result<(), BoundError> {
        for (name, value) in [("delta", self.delta), ("t", self.t)] {
            if value.is_nan() || value <= 0.0 || value.is_infinite() {
                return Err(BoundError::NonPositive { name, value });
            }
        }
        if self.alpha.is_nan() || self.alpha <= 0.5 || self.alpha.is_infinite() {
            return Err(BoundError::DivergentSeries(self.alpha));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesMode {
    /// Sum over a context of `n` examples.
    Finite(u64),
    /// The limit `n → ∞`, via the Riemann zeta function.
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// `‖c‖²`.
    pub norm_sq: f64,
    /// `min(1, 2 exp(-2 t² / ‖c‖²))`.
    pub bound: f64,
}

/// `‖c‖² = δ² Σ i^(-2α)` over the requested range.
pub fn sensitivity_norm_sq(cfg: &LipschitzBoundConfig, mode: SeriesMode) -> Result<f64, BoundError> {
    cfg.validate()?;
    let s = 2.0 * cfg.alpha;
    let sum = match mode {
        SeriesMode::Infinite => zeta(s),
        SeriesMode::Finite(0) => return Err(BoundError::NoTerms),
        SeriesMode::Finite(n) => (1..=n).rev().map(|i| (i as f64).powf(-s)).sum(),
    };
    Ok(cfg.delta * cfg.delta * sum)
}

/// Two-sided McDiarmid bound on a deviation of at least `t`.
pub fn mcdiarmid_bound(cfg: &LipschitzBoundConfig, mode: SeriesMode) -> Result<BoundReport, BoundError> {
    let norm_sq = sensitivity_norm_sq(cfg, mode)?;
    let bound = (2.0 * (-2.0 * cfg.t * cfg.t / norm_sq).exp()).min(1.0);
    Ok(BoundReport { norm_sq, bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg(delta: f64, alpha: f64, t: f64) -> LipschitzBoundConfig {
        LipschitzBoundConfig { delta, alpha, t }
    }

    #[test]
    fn harmonic_squares_case() {
        let pi2 = std::f64::consts::PI.powi(2);
        let r = mcdiarmid_bound(&cfg(1.0, 1.0, 1.0), SeriesMode::Infinite).unwrap();
        assert_relative_eq!(r.norm_sq, pi2 / 6.0, epsilon = 1e-14);
        assert_relative_eq!(r.bound, 2.0 * (-12.0 / pi2).exp(), epsilon = 1e-12);
        assert_relative_eq!(r.bound, 0.5929133434362145, epsilon = 1e-12);
    }

    #[test]
    fn small_deviations_are_capped() {
        for t in [1e-9, 1e-3, 0.1] {
            assert_eq!(mcdiarmid_bound(&cfg(1.0, 1.0, t), SeriesMode::Infinite).unwrap().bound, 1.0);
        }
    }

    #[test]
    fn divergent_and_invalid_parameters() {
        assert_eq!(mcdiarmid_bound(&cfg(1.0, 0.5, 1.0), SeriesMode::Infinite), Err(BoundError::DivergentSeries(0.5)));
        assert!(mcdiarmid_bound(&cfg(1.0, 0.3, 1.0), SeriesMode::Finite(10)).is_err());
        assert!(matches!(
            mcdiarmid_bound(&cfg(0.0, 1.0, 1.0), SeriesMode::Infinite),
            Err(BoundError::NonPositive { .. })
        ));
        assert_eq!(mcdiarmid_bound(&cfg(1.0, 1.0, 1.0), SeriesMode::Finite(0)), Err(BoundError::NoTerms));
    }

    #[test]
    fn finite_sums_increase_towards_the_limit() {
        let c = cfg(0.5, 0.8, 1.0);
        let limit = sensitivity_norm_sq(&c, SeriesMode::Infinite).unwrap();
        let mut prev = 0.0;
        for n in [1, 10, 100, 10_000] {
            let v = sensitivity_norm_sq(&c, SeriesMode::Finite(n)).unwrap();
            assert!(v > prev && v < limit);
            prev = v;
        }
        assert_relative_eq!(sensitivity_norm_sq(&c, SeriesMode::Finite(1)).unwrap(), 0.25);
    }
}
