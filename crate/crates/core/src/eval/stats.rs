use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{chi_square_sf, normal_cdf, normal_pdf, student_t_two_tailed};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatError {
    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("at least {needed} observations are required, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("at least 2 datasets are required, got {0}")]
    TooFewDatasets(usize),
    #[error("at least 2 algorithms are required, got {0}")]
    TooFewAlgorithms(usize),
    #[error("row {row} has {got} scores, expected {expected}")]
    RaggedMatrix { row: usize, expected: usize, got: usize },
    #[error("non-finite value in the input")]
    NonFinite,
    #[error("significance level must lie in (0, 1), got {0}")]
    BadAlpha(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatTestResult {
    pub n: usize,
    pub mean_difference: f64,
    pub statistic: f64,
    pub p_value: f64,
    /// `p_value < 0.05`.
    pub significant: bool,
    /// The differences have zero variance. If they are all zero the result
    /// is `statistic = 0, p = 1`; otherwise `statistic = ±inf, p = 0`.
    pub degenerate: bool,
}

/// Two-tailed paired t-test on `a - b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<StatTestResult, StatError> {
    if a.len() != b.len() {
        return Err(StatError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(StatError::TooFewSamples { needed: 2, got: a.len() });
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(StatError::NonFinite);
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    if d.iter().all(|&x| x == d[0]) {
        let (statistic, p_value) = if d[0] == 0.0 { (0.0, 1.0) } else { (f64::INFINITY.copysign(d[0]), 0.0) };
        return Ok(StatTestResult {
            n: d.len(),
            mean_difference: d[0],
            statistic,
            p_value,
            significant: p_value < 0.05,
            degenerate: true,
        });
    }
    let var = d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    let statistic = mean / (var / n).sqrt();
    let p_value = student_t_two_tailed(statistic, n - 1.0).clamp(0.0, 1.0);
    Ok(StatTestResult {
        n: d.len(),
        mean_difference: mean,
        statistic,
        p_value,
        significant: p_value < 0.05,
        degenerate: false,
    })
}

/// Ranks within each row (1 = highest score), ties sharing the mean of the
/// positions they span, averaged over rows.
pub fn average_ranks(scores: &[Vec<f64>]) -> Result<Vec<f64>, StatError> {
    let k = scores.first().map_or(0, Vec::len);
    for (row, s) in scores.iter().enumerate() {
        if s.len() != k {
            return Err(StatError::RaggedMatrix { row, expected: k, got: s.len() });
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(StatError::NonFinite);
        }
    }
    let mut totals = vec![0.0; k];
    for s in scores {
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
        let mut start = 0;
        while start < k {
            let mut end = start + 1;
            while end < k && s[order[end]] == s[order[start]] {
                end += 1;
            }
            // Positions start+1 ..= end share their mean.
            let rank = (start + 1 + end) as f64 / 2.0;
            for &j in &order[start..end] {
                totals[j] += rank;
            }
            start = end;
        }
    }
    Ok(totals.into_iter().map(|t| t / scores.len().max(1) as f64).collect())
}

/// `P(R <= q)` for the range of `k` independent standard normals (the
/// studentized range with infinite degrees of freedom).
pub fn studentized_range_cdf(q: f64, k: usize) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    // k ∫ φ(z) [Φ(z + q) - Φ(z)]^(k-1) dz by composite Simpson on [-9, 9].
    let (lo, hi, steps) = (-9.0, 9.0, 6000usize);
    let h = (hi - lo) / steps as f64;
    let f = |z: f64| normal_pdf(z) * (normal_cdf(z + q) - normal_cdf(z)).powi(k as i32 - 1);
    let mut acc = f(lo) + f(hi);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    (k as f64 * acc * h / 3.0).clamp(0.0, 1.0)
}

/// The Nemenyi constant `q_α / √2` for `k` algorithms.
pub fn nemenyi_q(k: usize, alpha: f64) -> Result<f64, StatError> {
    if k < 2 {
        return Err(StatError::TooFewAlgorithms(k));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatError::BadAlpha(alpha));
    }
    let target = 1.0 - alpha;
    let (mut lo, mut hi) = (0.0f64, 20.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if studentized_range_cdf(mid, k) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    Ok(0.5 * (lo + hi) / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FriedmanResult {
    pub n_datasets: usize,
    pub n_algorithms: usize,
    pub alpha: f64,
    pub average_ranks: Vec<f64>,
    pub chi_square: f64,
    pub p_value: f64,
    pub q_alpha: f64,
    pub critical_difference: f64,
    /// Maximal groups of algorithms whose average ranks lie within the
    /// critical difference of each other, sorted by best rank.
    pub cliques: Vec<Vec<usize>>,
}

/// Friedman test with the Nemenyi post-hoc critical difference.
///
/// `scores[d][j]` is the score of algorithm `j` on dataset `d`; higher is
/// better.
pub fn friedman_nemenyi(scores: &[Vec<f64>], alpha: f64) -> Result<FriedmanResult, StatError> {
    let n = scores.len();
    if n < 2 {
        return Err(StatError::TooFewDatasets(n));
    }
    let ranks = average_ranks(scores)?;
    let k = ranks.len();
    let q = nemenyi_q(k, alpha)?;
    let (kf, nf) = (k as f64, n as f64);
    let cd = q * (kf * (kf + 1.0) / (6.0 * nf)).sqrt();
    let sum_sq: f64 = ranks.iter().map(|r| r * r).sum();
    let chi_square = 12.0 * nf / (kf * (kf + 1.0)) * (sum_sq - kf * (kf + 1.0) * (kf + 1.0) / 4.0);
    let chi_square = chi_square.max(0.0);

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| ranks[i].total_cmp(&ranks[j]).then(i.cmp(&j)));
    let mut cliques: Vec<Vec<usize>> = Vec::new();
    let mut last_end = 0;
    for start in 0..k {
        let mut end = start;
        while end + 1 < k && ranks[order[end + 1]] - ranks[order[start]] <= cd {
            end += 1;
        }
        // Skip groups contained in the previous one.
        if start == 0 || end > last_end {
            cliques.push(order[start..=end].to_vec());
            last_end = end;
        }
    }

    Ok(FriedmanResult {
        n_datasets: n,
        n_algorithms: k,
        alpha,
        average_ranks: ranks,
        chi_square,
        p_value: chi_square_sf(chi_square, kf - 1.0),
        q_alpha: q,
        critical_difference: cd,
        cliques,
    })
}
