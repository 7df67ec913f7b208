use std::io::{self, Write};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::ingestion::{IngestError, StreamSource};
use crate::memory::{DualMemory, EvictionKind, MemoryConfig};
use crate::predictor::{Predictor, PredictorConfig};
use crate::types::{argmax_label, LabeledExample, Query};

/// Version of the serialized [`RunReport`] layout.
pub const REPORT_VERSION: u32 = 1;

fn default_window() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Echoed into the report; streams and remote predictors are seeded from
    /// the same value by the caller.
    #[serde(default)]
    pub seed: u64,
    /// Evaluated instances per accuracy window.
    #[serde(default = "default_window")]
    pub window: usize,
    /// Queries per predictor call; `None` uses the predictor's preference.
    #[serde(default)]
    pub batch_size: Option<usize>,
    /// Free-form description of the stream, echoed into the report.
    #[serde(default)]
    pub source: String,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { seed: 0, window: default_window(), batch_size: None, source: String::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub arrival_index: u64,
    pub predicted: usize,
    pub truth: usize,
    /// Wall time of the predict call, divided evenly over its batch.
    pub latency_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowPoint {
    pub window_end_index: u64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvictionStats {
    pub short_to_long: u64,
    pub long_drops: u64,
    pub long_drops_by_class: Vec<u64>,
}

/// Memory occupancy after a given instance was memorized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemorySnapshot {
    pub arrival_index: u64,
    pub short_len: usize,
    pub long_len: usize,
    pub class_counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format_version: u32,
    pub source: String,
    pub predictor: String,
    pub memory: MemoryConfig,
    pub seed: u64,
    pub window: usize,
    pub batch_size: usize,
    /// Instances read from the stream, warm-up included.
    pub instances: u64,
    pub evaluated: u64,
    pub correct: u64,
    /// Prequential accuracy over evaluated instances; `None` if there were none.
    pub accuracy: Option<f64>,
    pub windowed: Vec<WindowPoint>,
    pub evictions: EvictionStats,
    /// Taken every `window` memorized instances, warm-up included.
    pub checkpoints: Vec<MemorySnapshot>,
    pub final_class_counts: Vec<usize>,
    pub records: Vec<InstanceRecord>,
}

impl RunReport {
    /// Accuracy recomputed from the per-instance trace.
    pub fn recomputed_accuracy(&self) -> Option<f64> {
        if self.records.is_empty() {
            return None;
        }
        let hits = self.records.iter().filter(|r| r.predicted == r.truth).count();
        Some(hits as f64 / self.records.len() as f64)
    }

    /// The report with wall-clock latencies zeroed; identical inputs give
    /// byte-identical serializations of this view.
    pub fn deterministic_view(&self) -> RunReport {
        let mut view = self.clone();
        view.records.iter_mut().for_each(|r| r.latency_ms = 0.0);
        view
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> io::Result<()> {
        serde_json::to_writer_pretty(&mut out, self)?;
        out.write_all(b"\n")
    }

    /// `window_end_index,accuracy` rows of the windowed series.
    pub fn write_window_csv<W: Write>(&self, out: W) -> io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["window_end_index", "accuracy"])?;
        for p in &self.windowed {
            w.write_record([p.window_end_index.to_string(), p.accuracy.to_string()])?;
        }
        w.flush()
    }
}

fn windowed_accuracy(records: &[InstanceRecord], window: usize) -> Vec<WindowPoint> {
    records
        .chunks(window.max(1))
        .map(|chunk| WindowPoint {
            window_end_index: chunk.last().expect("non-empty chunk").arrival_index,
            accuracy: chunk.iter().filter(|r| r.predicted == r.truth).count() as f64 / chunk.len() as f64,
        })
        .collect()
}

struct Loop<'p, P: ?Sized> {
    memory: DualMemory,
    predictor: &'p mut P,
    records: Vec<InstanceRecord>,
    evictions: EvictionStats,
    window: u64,
    memorized: u64,
    checkpoints: Vec<MemorySnapshot>,
}

impl<P: Predictor + ?Sized> Loop<'_, P> {
    fn memorize(&mut self, ex: LabeledExample) -> Result<(), EvalError> {
        self.predictor.record_label(&ex);
        let arrival_index = ex.arrival_index;
        let events = self.memory.observe(ex).map_err(|source| EvalError::Memory { arrival_index, source })?;
        for e in events {
            match e.kind {
                EvictionKind::ShortToLong => self.evictions.short_to_long += 1,
                EvictionKind::LongDrop => {
                    self.evictions.long_drops += 1;
                    self.evictions.long_drops_by_class[e.class] += 1;
                }
            }
        }
        self.memorized += 1;
        if self.memorized.is_multiple_of(self.window) {
            self.checkpoints.push(MemorySnapshot {
                arrival_index,
                short_len: self.memory.short_len(),
                long_len: self.memory.long_len(),
                class_counts: self.memory.class_counts().to_vec(),
            });
        }
        Ok(())
    }

    /// Predicts every pending instance from the current context, then
    /// reveals and memorizes them in arrival order.
    fn flush(&mut self, pending: &mut Vec<LabeledExample>) -> Result<(), EvalError> {
        if pending.is_empty() {
            return Ok(());
        }
        let ctx = self.memory.context();
        let queries: Vec<Query> = pending.iter().map(LabeledExample::query).collect();
        let start = Instant::now();
        let dists = self
            .predictor
            .predict(&ctx, &queries)
            .map_err(|source| EvalError::Predict { arrival_index: pending[0].arrival_index, source })?;
        let latency_ms = start.elapsed().as_secs_f64() * 1e3 / pending.len() as f64;
        if dists.len() != pending.len() {
            return Err(EvalError::BatchShape { expected: pending.len(), got: dists.len() });
        }
        for (ex, dist) in pending.iter().zip(&dists) {
            self.records.push(InstanceRecord {
                arrival_index: ex.arrival_index,
                predicted: argmax_label(dist),
                truth: ex.label,
                latency_ms,
            });
        }
        for ex in pending.drain(..) {
            self.memorize(ex)?;
        }
        Ok(())
    }
}

/// Test-then-memorize over `source` with a caller-owned predictor.
///
/// Per instance: the warm-up counter advances; if the memory is warm the
/// instance is predicted from the current context; then the predictor sees
/// its label and the memory observes it. With a batch size above one, up to
/// that many consecutive warm instances are predicted from the same context
/// before any of them is memorized.
pub fn run_prequential_with<I, P>(
    source: I,
    n_classes: usize,
    memory: MemoryConfig,
    predictor: &mut P,
    options: &RunOptions,
) -> Result<RunReport, EvalError>
where
    I: IntoIterator<Item = Result<LabeledExample, IngestError>>,
    P: Predictor + ?Sized,
{
    if predictor.n_classes() != n_classes {
        return Err(EvalError::ClassCountMismatch { schema: n_classes, predictor: predictor.n_classes() });
    }
    let batch = options.batch_size.unwrap_or_else(|| predictor.batch_size()).max(1);
    let name = predictor.name();
    let mut run = Loop {
        memory: DualMemory::new(memory, n_classes),
        predictor,
        records: Vec::new(),
        evictions: EvictionStats { long_drops_by_class: vec![0; n_classes], ..Default::default() },
        window: options.window.max(1) as u64,
        memorized: 0,
        checkpoints: Vec::new(),
    };
    let mut pending = Vec::with_capacity(batch);
    let mut next_index = 0u64;
    let mut instances = 0u64;
    for item in source {
        let ex = item.map_err(|source| EvalError::Ingest { arrival_index: next_index, source })?;
        next_index = ex.arrival_index + 1;
        instances += 1;
        if run.memory.admit() {
            pending.push(ex);
            if pending.len() == batch {
                run.flush(&mut pending)?;
            }
        } else {
            // Warm-up ends for good once reached, so nothing is pending here.
            run.memorize(ex)?;
        }
    }
    run.flush(&mut pending)?;

    let records = run.records;
    let correct = records.iter().filter(|r| r.predicted == r.truth).count() as u64;
    let evaluated = records.len() as u64;
    Ok(RunReport {
        format_version: REPORT_VERSION,
        source: options.source.clone(),
        predictor: name,
        memory,
        seed: options.seed,
        window: options.window,
        batch_size: batch,
        instances,
        evaluated,
        correct,
        accuracy: (evaluated > 0).then(|| correct as f64 / evaluated as f64),
        windowed: windowed_accuracy(&records, options.window),
        evictions: run.evictions,
        checkpoints: run.checkpoints,
        final_class_counts: run.memory.class_counts().to_vec(),
        records,
    })
}

/// Builds the configured predictor and runs it over a stream.
pub fn run_prequential(
    source: StreamSource,
    memory: MemoryConfig,
    predictor: &PredictorConfig,
    options: &RunOptions,
) -> Result<RunReport, EvalError> {
    predictor.validate()?;
    let n_classes = source.schema().n_classes();
    let mut p = predictor.build(n_classes).map_err(EvalError::PredictorBuild)?;
    let mut options = options.clone();
    if options.source.is_empty() {
        options.source = source.origin().to_string();
    }
    run_prequential_with(source, n_classes, memory, &mut p, &options)
}
