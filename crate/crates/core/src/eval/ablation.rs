use std::collections::BTreeMap;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::prequential::{run_prequential, RunOptions};
use super::stats::{paired_t_test, StatTestResult};
use super::EvalError;
use crate::ingestion::{IngestError, StreamSource};
use crate::memory::{MemoryConfig, MemoryVariant, ShortSize};
use crate::predictor::PredictorConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSpec {
    pub dataset: String,
    /// Total capacities `M`.
    pub totals: Vec<usize>,
    /// Short-term ratios.
    pub ratios: Vec<f64>,
    pub variants: Vec<MemoryVariant>,
    pub seeds: Vec<u64>,
    pub t_warm: u64,
    pub predictor: PredictorConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRun {
    pub dataset: String,
    pub total: usize,
    pub ratio: f64,
    pub variant: MemoryVariant,
    pub seed: u64,
    pub accuracy: f64,
}

/// Summary of one grid cell over its seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub total: usize,
    pub ratio: f64,
    pub variant: MemoryVariant,
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation over seeds (0 for a single seed).
    pub std: f64,
}

/// Seed-paired accuracy differences `a - b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedDelta {
    /// `dual-long_only`, `dual-short_only` or `M<max>-M<min>`.
    pub name: String,
    /// The cell, or `None` for the average over all cells.
    pub total: Option<usize>,
    pub ratio: Option<f64>,
    pub differences: Vec<f64>,
    pub mean: f64,
    pub test: Option<StatTestResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationOutcome {
    pub dataset: String,
    pub runs: Vec<AblationRun>,
    pub cells: Vec<AblationResult>,
    pub deltas: Vec<PairedDelta>,
}

impl AblationOutcome {
    /// `dataset,M,ratio,variant,seed,accuracy` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["dataset", "M", "ratio", "variant", "seed", "accuracy"])?;
        for r in &self.runs {
            w.write_record([
                r.dataset.clone(),
                r.total.to_string(),
                r.ratio.to_string(),
                r.variant.as_str().to_string(),
                r.seed.to_string(),
                r.accuracy.to_string(),
            ])?;
        }
        w.flush()
    }

    pub fn summary_delta(&self, name: &str) -> Option<&PairedDelta> {
        self.deltas.iter().find(|d| d.name == name && d.total.is_none())
    }
}

/// Differences `a - b` paired by seed, in `a`'s seed order. Seeds missing
/// from `b` are skipped.
pub fn paired_deltas(a: &[AblationRun], b: &[AblationRun]) -> Vec<f64> {
    a.iter().filter_map(|x| b.iter().find(|y| y.seed == x.seed).map(|y| x.accuracy - y.accuracy)).collect()
}

fn delta(name: String, total: Option<usize>, ratio: Option<f64>, differences: Vec<f64>) -> PairedDelta {
    let mean = differences.iter().sum::<f64>() / differences.len().max(1) as f64;
    // A test needs two pairs; two identical vectors yield a degenerate result.
    let zeros = vec![0.0; differences.len()];
    let test = paired_t_test(&differences, &zeros).ok();
    PairedDelta { name, total, ratio, differences, mean, test }
}

fn validate(spec: &AblationSpec) -> Result<Vec<(usize, f64, MemoryVariant, MemoryConfig)>, EvalError> {
    let invalid = |m: String| Err(EvalError::InvalidVariantConfig(m));
    if !spec.variants.contains(&MemoryVariant::Dual) {
        return invalid("the variants must include dual".into());
    }
    if spec.totals.is_empty() || spec.ratios.is_empty() || spec.seeds.is_empty() {
        return invalid("capacities, ratios and seeds must all be non-empty".into());
    }
    let mut seen = spec.seeds.clone();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != spec.seeds.len() {
        return invalid("seeds must be distinct".into());
    }
    spec.predictor.validate()?;
    let mut cells = Vec::new();
    for &total in &spec.totals {
        for &ratio in &spec.ratios {
            for &variant in &spec.variants {
                match MemoryConfig::with_variant(total, ShortSize::Ratio(ratio), spec.t_warm, variant) {
                    Ok(cfg) => cells.push((total, ratio, variant, cfg)),
                    Err(e) => return invalid(format!("M={total}, ratio={ratio}, {}: {e}", variant.as_str())),
                }
            }
        }
    }
    Ok(cells)
}

/// Runs every (capacity, ratio, variant, seed) combination on the stream
/// produced by `make_stream(seed)`, so all variants of a seed see the same
/// instances. Runs execute on up to `jobs` threads.
pub fn ablation_grid<F>(spec: &AblationSpec, make_stream: F, jobs: usize) -> Result<AblationOutcome, EvalError>
where
    F: Fn(u64) -> Result<StreamSource, IngestError> + Sync,
{
    let cells = validate(spec)?;
    let work: Vec<_> = cells.iter().flat_map(|cell| spec.seeds.iter().map(move |&seed| (cell, seed))).collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().expect("thread pool");
    let runs: Vec<AblationRun> = pool.install(|| {
        work.par_iter()
            .map(|&(&(total, ratio, variant, cfg), seed)| {
                let stream = make_stream(seed).map_err(|source| EvalError::Ingest { arrival_index: 0, source })?;
                let options = RunOptions { seed, source: spec.dataset.clone(), ..RunOptions::default() };
                let report = run_prequential(stream, cfg, &spec.predictor, &options)?;
                let accuracy = report.accuracy.ok_or_else(|| {
                    EvalError::InvalidVariantConfig(format!("t_warm {} leaves nothing to evaluate", spec.t_warm))
                })?;
                Ok(AblationRun { dataset: spec.dataset.clone(), total, ratio, variant, seed, accuracy })
            })
            .collect::<Result<_, EvalError>>()
    })?;

    let mut by_cell: BTreeMap<(usize, u64, MemoryVariant), Vec<AblationRun>> = BTreeMap::new();
    for r in &runs {
        by_cell.entry((r.total, r.ratio.to_bits(), r.variant)).or_default().push(r.clone());
    }
    let get = |total: usize, ratio: f64, variant| by_cell.get(&(total, ratio.to_bits(), variant)).map(Vec::as_slice);

    let mut results = Vec::new();
    for &total in &spec.totals {
        for &ratio in &spec.ratios {
            for &variant in &spec.variants {
                let cell = get(total, ratio, variant).unwrap_or(&[]);
                let n = cell.len();
                let mean = cell.iter().map(|r| r.accuracy).sum::<f64>() / n.max(1) as f64;
                let var = if n > 1 {
                    cell.iter().map(|r| (r.accuracy - mean).powi(2)).sum::<f64>() / (n - 1) as f64
                } else {
                    0.0
                };
                results.push(AblationResult { total, ratio, variant, n, mean, std: var.sqrt() });
            }
        }
    }

    let mut deltas = Vec::new();
    // Per-seed sums over cells, for the grid-level summaries.
    let mut summaries: Vec<(String, Vec<Vec<f64>>)> = Vec::new();
    let mut add = |deltas: &mut Vec<PairedDelta>, name: String, total, ratio, diffs: Vec<f64>| {
        match summaries.iter_mut().find(|(n, _)| *n == name) {
            Some((_, acc)) => acc.push(diffs.clone()),
            None => summaries.push((name.clone(), vec![diffs.clone()])),
        }
        deltas.push(delta(name, total, ratio, diffs));
    };
    for &total in &spec.totals {
        for &ratio in &spec.ratios {
            let dual = get(total, ratio, MemoryVariant::Dual).unwrap_or(&[]);
            for other in [MemoryVariant::LongOnly, MemoryVariant::ShortOnly] {
                if let Some(b) = get(total, ratio, other) {
                    let name = format!("dual-{}", other.as_str());
                    add(&mut deltas, name, Some(total), Some(ratio), paired_deltas(dual, b));
                }
            }
        }
    }
    let max_m = *spec.totals.iter().max().expect("non-empty");
    let min_m = *spec.totals.iter().min().expect("non-empty");
    if max_m != min_m {
        for &ratio in &spec.ratios {
            let hi = get(max_m, ratio, MemoryVariant::Dual).unwrap_or(&[]);
            let lo = get(min_m, ratio, MemoryVariant::Dual).unwrap_or(&[]);
            add(&mut deltas, format!("M{max_m}-M{min_m}"), None, Some(ratio), paired_deltas(hi, lo));
        }
    }
    for (name, per_cell) in summaries {
        let n_seeds = per_cell.iter().map(Vec::len).min().unwrap_or(0);
        let averaged: Vec<f64> =
            (0..n_seeds).map(|s| per_cell.iter().map(|d| d[s]).sum::<f64>() / per_cell.len() as f64).collect();
        deltas.push(delta(name, None, None, averaged));
    }

    Ok(AblationOutcome { dataset: spec.dataset.clone(), runs, cells: results, deltas })
}
