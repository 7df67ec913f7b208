use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::Duration;

use anyhow::Context as _;
use dualctx::eval::{
    ablation_grid, run_prequential, timing_report, AblationOutcome, EvalError, RunOptions, RunReport, TimingSummary,
};
use dualctx::predictor::conformance::run_conformance;
use dualctx::predictor::mock::{serve_stdio, MockAnswer, MockFault, MockOptions, MockServer};
use dualctx::predictor::PredictorConfig;
use dualctx::MemoryVariant;
use rayon::prelude::*;
use serde::Serialize;
use tempfile::NamedTempFile;

use crate::config::{ExperimentConfig, ReportFormat};
use crate::{AnswerKind, CliError, Command, Exit, FaultKind, MockServerArgs, ProtocolCheckArgs, RunArgs};

/// Runs one subcommand, writing its human-readable output to `out`.
pub fn execute(command: Command, out: &mut dyn Write) -> Result<Exit, CliError> {
    match command {
        Command::Run(args) => cmd_run(&args, out),
        Command::Ablate(args) => cmd_ablate(&args, out),
        Command::Bench(args) => cmd_bench(&args, out),
        Command::ProtocolCheck(args) => cmd_protocol_check(&args, out),
        Command::MockServer(args) => cmd_mock_server(&args, out),
    }
}

fn load(args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let cfg = ExperimentConfig::load(&args.config, &args.overrides()).map_err(CliError::config)?;
    if args.jobs == 0 {
        return Err(CliError::config(anyhow::anyhow!("--jobs must be at least 1")));
    }
    Ok(cfg)
}

fn classify(e: EvalError) -> CliError {
    match e {
        EvalError::PredictorConfig(_) | EvalError::InvalidVariantConfig(_) => CliError::config(e),
        other => CliError::runtime(other),
    }
}

fn io_err(e: impl Into<anyhow::Error>) -> CliError {
    CliError::runtime(e)
}

/// Writes `path` through a temporary file in the same directory, so readers
/// never see a partial file.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> anyhow::Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut tmp = NamedTempFile::new_in(dir).with_context(|| format!("cannot write in {}", dir.display()))?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        fill(&mut w)?;
        w.flush()?;
    }
    tmp.persist(path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    })
}

/// File-name-safe form of a label such as `knn(k=5)`.
pub fn slug(label: &str) -> String {
    let mut s = String::with_capacity(label.len());
    for c in label.chars() {
        if c.is_ascii_alphanumeric() {
            s.push(c.to_ascii_lowercase());
        } else if !s.ends_with('_') {
            s.push('_');
        }
    }
    s.trim_matches('_').to_string()
}

/// Every (predictor, seed) run of a configuration, in config order.
fn run_all(cfg: &ExperimentConfig, jobs: usize) -> Result<Vec<(PredictorConfig, RunReport)>, CliError> {
    let work: Vec<(PredictorConfig, u64)> =
        cfg.all_predictors().into_iter().flat_map(|p| cfg.seeds.iter().map(move |&s| (p.clone(), s))).collect();
    let one = |(p, seed): &(PredictorConfig, u64)| -> Result<(PredictorConfig, RunReport), CliError> {
        let source = cfg
            .source
            .open(*seed)
            .with_context(|| format!("cannot open source {}", cfg.source.label()))
            .map_err(CliError::runtime)?;
        let options =
            RunOptions { seed: *seed, window: cfg.window, batch_size: cfg.batch_size, source: cfg.source.label() };
        log::info!("running {} with seed {seed}", p.label());
        let report = run_prequential(source, cfg.memory_config(), p, &options).map_err(classify)?;
        Ok((p.clone(), report))
    };
    if jobs <= 1 {
        return work.iter().map(one).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(CliError::runtime)?;
    pool.install(|| work.par_iter().map(one).collect())
}

fn fmt_opt(v: Option<f64>, scale: f64, digits: usize) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{:.*}", digits, v * scale))
}

fn cmd_run(args: &RunArgs, out: &mut dyn Write) -> Result<Exit, CliError> {
    let cfg = load(args)?;
    let results = run_all(&cfg, args.jobs)?;
    let dataset = slug(&cfg.source.label());
    for (p, report) in &results {
        let stem = format!("{dataset}_{}_seed{}", slug(&p.label()), report.seed);
        for format in &cfg.formats {
            match format {
                ReportFormat::Json => {
                    write_atomic(&cfg.output_dir.join(format!("{stem}.json")), |w| report.write_json(w))
                }
                ReportFormat::Csv => {
                    write_atomic(&cfg.output_dir.join(format!("{stem}_windows.csv")), |w| report.write_window_csv(w))
                }
            }
            .map_err(io_err)?;
        }
    }
    print_accuracy_table(&cfg, &results, out).map_err(io_err)?;
    Ok(Exit::Ok)
}

fn print_accuracy_table(
    cfg: &ExperimentConfig,
    results: &[(PredictorConfig, RunReport)],
    out: &mut dyn Write,
) -> io::Result<()> {
    writeln!(out, "{:<28} {:>8} {:>10} {:>10} {:>9}", "predictor", "seed", "instances", "evaluated", "A_T(%)")?;
    for (p, r) in results {
        writeln!(
            out,
            "{:<28} {:>8} {:>10} {:>10} {:>9}",
            p.label(),
            r.seed,
            r.instances,
            r.evaluated,
            fmt_opt(r.accuracy, 100.0, 2)
        )?;
    }
    if cfg.seeds.len() > 1 {
        for p in cfg.all_predictors() {
            let accs: Vec<f64> = results.iter().filter(|(q, _)| *q == p).filter_map(|(_, r)| r.accuracy).collect();
            if accs.is_empty() {
                continue;
            }
            let mean = accs.iter().sum::<f64>() / accs.len() as f64;
            writeln!(out, "{:<28} {:>8} {:>10} {:>10} {:>9.2}", p.label(), "mean", "", "", mean * 100.0)?;
        }
    }
    Ok(())
}

fn cmd_ablate(args: &RunArgs, out: &mut dyn Write) -> Result<Exit, CliError> {
    let cfg = load(args)?;
    let spec = cfg.ablation_spec();
    let outcome = ablation_grid(&spec, |seed| cfg.source.open(seed), args.jobs).map_err(classify)?;
    write_atomic(&cfg.output_dir.join("ablation.csv"), |w| outcome.write_csv(w)).map_err(io_err)?;
    let spread = grid_spread(&outcome);
    write_json(&cfg.output_dir.join("ablation.json"), &AblationFile { outcome: &outcome, grid_spread: &spread })
        .map_err(io_err)?;
    print_ablation(&outcome, &spread, out).map_err(io_err)?;
    Ok(Exit::Ok)
}

/// Per-variant spread of accuracy, both across seeds and across the grid.
#[derive(Debug, Serialize)]
pub struct GridSpread {
    pub variant: MemoryVariant,
    pub cells: usize,
    /// Mean of the cell means.
    pub mean: f64,
    /// Mean of the per-cell sample standard deviations over seeds.
    pub std_over_seeds: f64,
    /// Sample standard deviation of the cell means over (M, ratio).
    pub std_over_grid: f64,
}

#[derive(Serialize)]
struct AblationFile<'a> {
    #[serde(flatten)]
    outcome: &'a AblationOutcome,
    grid_spread: &'a [GridSpread],
}

pub fn grid_spread(outcome: &AblationOutcome) -> Vec<GridSpread> {
    let mut variants: Vec<MemoryVariant> = outcome.cells.iter().map(|c| c.variant).collect();
    variants.sort();
    variants.dedup();
    variants
        .into_iter()
        .map(|variant| {
            let cells: Vec<_> = outcome.cells.iter().filter(|c| c.variant == variant).collect();
            let n = cells.len() as f64;
            let mean = cells.iter().map(|c| c.mean).sum::<f64>() / n;
            let std_over_grid = if cells.len() > 1 {
                (cells.iter().map(|c| (c.mean - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            let std_over_seeds = cells.iter().map(|c| c.std).sum::<f64>() / n;
            GridSpread { variant, cells: cells.len(), mean, std_over_seeds, std_over_grid }
        })
        .collect()
}

fn print_ablation(outcome: &AblationOutcome, spread: &[GridSpread], out: &mut dyn Write) -> io::Result<()> {
    writeln!(out, "{:>6} {:>6} {:<11} {:>4} {:>9} {:>8}", "M", "ratio", "variant", "n", "mean(%)", "std")?;
    for c in &outcome.cells {
        writeln!(
            out,
            "{:>6} {:>6.2} {:<11} {:>4} {:>9.2} {:>8.2}",
            c.total,
            c.ratio,
            c.variant.as_str(),
            c.n,
            c.mean * 100.0,
            c.std * 100.0
        )?;
    }
    writeln!(out)?;
    writeln!(out, "{:<11} {:>5} {:>9} {:>10} {:>9}", "variant", "cells", "mean(%)", "std_seeds", "std_grid")?;
    for g in spread {
        writeln!(
            out,
            "{:<11} {:>5} {:>9.2} {:>10.2} {:>9.2}",
            g.variant.as_str(),
            g.cells,
            g.mean * 100.0,
            g.std_over_seeds * 100.0,
            g.std_over_grid * 100.0
        )?;
    }
    writeln!(out)?;
    writeln!(out, "{:<18} {:>6} {:>6} {:>10} {:>9} {:>10}", "delta", "M", "ratio", "mean(pp)", "t", "p")?;
    for d in &outcome.deltas {
        let (t, p) = d.test.as_ref().map_or(("-".to_string(), "-".to_string()), |t| {
            (format!("{:.3}", t.statistic), format!("{:.3e}", t.p_value))
        });
        writeln!(
            out,
            "{:<18} {:>6} {:>6} {:>10.3} {:>9} {:>10}",
            d.name,
            d.total.map_or("all".into(), |m| m.to_string()),
            d.ratio.map_or("all".into(), |r| format!("{r:.2}")),
            d.mean * 100.0,
            t,
            p
        )?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct BenchRow {
    predictor: String,
    runs: usize,
    timing: TimingSummary,
}

fn cmd_bench(args: &RunArgs, out: &mut dyn Write) -> Result<Exit, CliError> {
    let cfg = load(args)?;
    let results = run_all(&cfg, args.jobs)?;
    let mut rows = Vec::new();
    for p in cfg.all_predictors() {
        let mut merged: Option<RunReport> = None;
        let mut runs = 0;
        for (_, r) in results.iter().filter(|(q, _)| *q == p) {
            runs += 1;
            match &mut merged {
                None => merged = Some(r.clone()),
                Some(m) => m.records.extend(r.records.iter().cloned()),
            }
        }
        if let Some(m) = merged {
            rows.push(BenchRow { predictor: p.label(), runs, timing: timing_report(&m) });
        }
    }
    write_json(&cfg.output_dir.join("bench.json"), &rows).map_err(io_err)?;
    (|| -> io::Result<()> {
        writeln!(
            out,
            "{:<28} {:>10} {:>10} {:>10} {:>10} {:>10} {:>12}",
            "predictor", "instances", "mean_ms", "p50_ms", "p99_ms", "max_ms", "inst/s"
        )?;
        for row in &rows {
            let t = &row.timing;
            writeln!(
                out,
                "{:<28} {:>10} {:>10} {:>10} {:>10} {:>10} {:>12}",
                row.predictor,
                t.count,
                fmt_opt(t.mean_ms, 1.0, 4),
                fmt_opt(t.p50_ms, 1.0, 4),
                fmt_opt(t.p99_ms, 1.0, 4),
                fmt_opt(t.max_ms, 1.0, 4),
                fmt_opt(t.throughput, 1.0, 0)
            )?;
        }
        Ok(())
    })()
    .map_err(io_err)?;
    Ok(Exit::Ok)
}

fn cmd_protocol_check(args: &ProtocolCheckArgs, out: &mut dyn Write) -> Result<Exit, CliError> {
    if args.timeout_ms == 0 {
        return Err(CliError::config(anyhow::anyhow!("--timeout-ms must be positive")));
    }
    let report = run_conformance(&args.endpoint, Duration::from_millis(args.timeout_ms));
    (|| -> io::Result<()> {
        writeln!(out, "endpoint {}", report.endpoint)?;
        for c in &report.checks {
            writeln!(out, "{} {:<20} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
        }
        let failed = report.checks.iter().filter(|c| !c.passed).count();
        writeln!(out, "{} of {} checks passed", report.checks.len() - failed, report.checks.len())
    })()
    .map_err(io_err)?;
    Ok(if report.passed() { Exit::Ok } else { Exit::Conformance })
}

fn mock_options(args: &MockServerArgs) -> MockOptions {
    MockOptions {
        max_context: args.max_context,
        max_batch: args.max_batch,
        delay: Duration::from_millis(args.delay_ms),
        answer: match args.answer {
            AnswerKind::Uniform => MockAnswer::Uniform,
            AnswerKind::Knn => MockAnswer::Knn { k: args.k },
        },
        fault: match args.fault {
            FaultKind::None => MockFault::None,
            FaultKind::DropId => MockFault::DropId,
            FaultKind::BadSum => MockFault::BadSum,
            FaultKind::IgnoreMaxBatch => MockFault::IgnoreMaxBatch,
        },
    }
}

fn cmd_mock_server(args: &MockServerArgs, out: &mut dyn Write) -> Result<Exit, CliError> {
    if args.max_context == 0 || args.max_batch == 0 || (args.answer == AnswerKind::Knn && args.k == 0) {
        return Err(CliError::config(anyhow::anyhow!("--max-context, --max-batch and --k must be positive")));
    }
    let options = mock_options(args);
    if args.stdio {
        serve_stdio(options).map_err(io_err)?;
        return Ok(Exit::Ok);
    }
    let server = MockServer::bind(&args.listen, options)
        .with_context(|| format!("cannot listen on {}", args.listen))
        .map_err(CliError::runtime)?;
    writeln!(out, "listening on {}", server.endpoint()).map_err(io_err)?;
    out.flush().map_err(io_err)?;
    server.wait();
    Ok(Exit::Ok)
}
