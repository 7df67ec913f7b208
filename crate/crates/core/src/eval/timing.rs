use serde::{Deserialize, Serialize};

use super::RunReport;

/// Per-instance predict latency. All fields are `None` when nothing was
/// evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub count: usize,
    pub mean_ms: Option<f64>,
    pub p50_ms: Option<f64>,
    pub p99_ms: Option<f64>,
    pub max_ms: Option<f64>,
    /// Evaluated instances per second of predict time.
    pub throughput: Option<f64>,
}

/// Nearest-rank percentile of sorted data.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = ((p / 100.0) * sorted.len() as f64).ceil().max(1.0) as usize;
    sorted[rank.min(sorted.len()) - 1]
}

pub fn timing_report(report: &RunReport) -> TimingSummary {
    let mut lat: Vec<f64> = report.records.iter().map(|r| r.latency_ms).collect();
    if lat.is_empty() {
        return TimingSummary { count: 0, mean_ms: None, p50_ms: None, p99_ms: None, max_ms: None, throughput: None };
    }
    lat.sort_by(f64::total_cmp);
    let total: f64 = lat.iter().sum();
    let mean = total / lat.len() as f64;
    TimingSummary {
        count: lat.len(),
        mean_ms: Some(mean),
        p50_ms: Some(percentile(&lat, 50.0)),
        p99_ms: Some(percentile(&lat, 99.0)),
        max_ms: lat.last().copied(),
        throughput: (total > 0.0).then(|| lat.len() as f64 / (total / 1e3)),
    }
}
