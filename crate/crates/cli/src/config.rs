//! Versioned experiment configuration.
//!
//! ```toml
//! version = 1
//! seeds = [1, 2, 3]
//! output_dir = "results"
//!
//! [source]
//! kind = "class_pair_cycle"
//! length = 20000
//!
//! [memory]
//! size = 1000
//! short_ratio = 0.75
//! t_warm = 100
//!
//! [predictor]
//! kind = "knn"
//! k = 5
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::Context as _;
use dualctx::eval::AblationSpec;
use dualctx::ingestion::{
    gaussian_drift_stream, open_arff, open_csv, rotating_hyperplane_stream, ArffOptions, CsvOptions, DriftSpec,
    GaussianConcept, HyperplaneSpec, IngestError, Segment, StreamSource, Transition,
};
use dualctx::predictor::PredictorConfig;
use dualctx::{MemoryConfig, MemoryVariant, ShortSize};
use serde::{Deserialize, Serialize};

pub const CONFIG_VERSION: u32 = 1;

/// Environment variable overriding every remote predictor endpoint.
pub const ENDPOINT_ENV: &str = "DUALCTX_ENDPOINT";

fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_output() -> PathBuf {
    PathBuf::from("results")
}
fn default_formats() -> Vec<ReportFormat> {
    vec![ReportFormat::Json, ReportFormat::Csv]
}
fn default_window() -> usize {
    1000
}
fn default_segment() -> u64 {
    1000
}
fn default_side() -> f64 {
    2.0
}
fn default_std() -> f64 {
    0.8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    /// Full run report.
    Json,
    /// Windowed accuracy series.
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceConfig {
    Csv {
        path: PathBuf,
        #[serde(flatten)]
        options: CsvOptions,
    },
    Arff {
        path: PathBuf,
        #[serde(flatten)]
        options: ArffOptions,
    },
    /// Four classes appearing in alternating pairs; see
    /// [`DriftSpec::class_pair_cycle`].
    ClassPairCycle {
        length: u64,
        #[serde(default = "default_segment")]
        segment_length: u64,
        #[serde(default = "default_side")]
        side: f64,
        #[serde(default = "default_std")]
        std: f64,
    },
    /// A single stationary Gaussian concept.
    Gaussian {
        length: u64,
        #[serde(flatten)]
        concept: GaussianConcept,
    },
    /// Explicit segments of Gaussian concepts.
    Drift {
        segments: Vec<Segment>,
        #[serde(default = "abrupt")]
        transition: Transition,
    },
    Hyperplane(HyperplaneSpec),
}

fn abrupt() -> Transition {
    Transition::Abrupt
}

impl SourceConfig {
    fn drift_spec(&self) -> Option<DriftSpec> {
        match self {
            SourceConfig::ClassPairCycle { length, segment_length, side, std } => {
                Some(DriftSpec::class_pair_cycle(*length, *segment_length, *side, *std))
            }
            SourceConfig::Gaussian { length, concept } => Some(DriftSpec {
                segments: vec![Segment { concept: concept.clone(), length: *length }],
                transition: Transition::Abrupt,
            }),
            SourceConfig::Drift { segments, transition } => {
                Some(DriftSpec { segments: segments.clone(), transition: *transition })
            }
            _ => None,
        }
    }

    /// Opens the stream; synthetic sources draw from `seed`.
    pub fn open(&self, seed: u64) -> Result<StreamSource, IngestError> {
        match self {
            SourceConfig::Csv { path, options } => open_csv(path, options),
            SourceConfig::Arff { path, options } => open_arff(path, options),
            SourceConfig::Hyperplane(spec) => rotating_hyperplane_stream(spec, seed),
            other => gaussian_drift_stream(&other.drift_spec().expect("synthetic"), seed),
        }
    }

    /// Short name for report files and tables.
    pub fn label(&self) -> String {
        match self {
            SourceConfig::Csv { path, .. } | SourceConfig::Arff { path, .. } => {
                path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "data".into())
            }
            SourceConfig::ClassPairCycle { .. } => "class_pair_cycle".into(),
            SourceConfig::Gaussian { .. } => "gaussian".into(),
            SourceConfig::Drift { .. } => "drift".into(),
            SourceConfig::Hyperplane(_) => "hyperplane".into(),
        }
    }

    fn check(&self, base: &Path, problems: &mut Vec<String>) {
        match self {
            SourceConfig::Csv { path, options } => {
                if !base.join(path).is_file() {
                    problems.push(format!("source: input file {} does not exist", base.join(path).display()));
                }
                if options.class_names.is_empty() {
                    problems.push("source: class_names must list every class for csv input".into());
                }
            }
            SourceConfig::Arff { path, .. } => {
                if !base.join(path).is_file() {
                    problems.push(format!("source: input file {} does not exist", base.join(path).display()));
                }
            }
            SourceConfig::Hyperplane(spec) => {
                if let Err(e) = spec.validate() {
                    problems.push(format!("source: {e}"));
                }
            }
            other => {
                let spec = other.drift_spec().expect("synthetic");
                if let Err(e) = spec.validate() {
                    problems.push(format!("source: {e}"));
                }
            }
        }
    }

    fn rebase(&mut self, base: &Path) {
        if let SourceConfig::Csv { path, .. } | SourceConfig::Arff { path, .. } = self {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemorySection {
    pub size: usize,
    #[serde(default)]
    pub short_ratio: Option<f64>,
    #[serde(default)]
    pub short_size: Option<usize>,
    #[serde(default)]
    pub t_warm: u64,
    #[serde(default = "dual")]
    pub variant: MemoryVariant,
}

fn dual() -> MemoryVariant {
    MemoryVariant::Dual
}

impl MemorySection {
    pub fn short(&self) -> Result<ShortSize, String> {
        match (self.short_ratio, self.short_size) {
            (Some(_), Some(_)) => Err("give either short_ratio or short_size, not both".into()),
            (None, Some(n)) => Ok(ShortSize::Absolute(n)),
            (Some(r), None) => Ok(ShortSize::Ratio(r)),
            (None, None) => Ok(ShortSize::Ratio(0.75)),
        }
    }

    pub fn build(&self) -> Result<MemoryConfig, String> {
        let short = self.short()?;
        MemoryConfig::with_variant(self.size, short, self.t_warm, self.variant).map_err(|e| e.to_string())
    }
}

fn default_sizes() -> Vec<usize> {
    vec![600, 800, 1000]
}
fn default_ratios() -> Vec<f64> {
    vec![0.65, 0.75, 0.85]
}
fn default_variants() -> Vec<MemoryVariant> {
    vec![MemoryVariant::Dual, MemoryVariant::LongOnly, MemoryVariant::ShortOnly]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationSection {
    #[serde(default = "default_sizes")]
    pub sizes: Vec<usize>,
    #[serde(default = "default_ratios")]
    pub ratios: Vec<f64>,
    #[serde(default = "default_variants")]
    pub variants: Vec<MemoryVariant>,
}

impl Default for AblationSection {
    fn default() -> Self {
        Self { sizes: default_sizes(), ratios: default_ratios(), variants: default_variants() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<ReportFormat>,
    /// Evaluated instances per accuracy window.
    #[serde(default = "default_window")]
    pub window: usize,
    /// Queries per predictor call; defaults to the predictor's preference.
    #[serde(default)]
    pub batch_size: Option<usize>,
    pub source: SourceConfig,
    pub memory: MemorySection,
    #[serde(default)]
    pub predictor: Option<PredictorConfig>,
    /// Additional predictors, e.g. to compare timings in one bench run.
    #[serde(default)]
    pub predictors: Vec<PredictorConfig>,
    #[serde(default)]
    pub ablation: Option<AblationSection>,
}

/// Every problem found in a configuration, reported together.
#[derive(Debug)]
pub struct ConfigProblems(pub Vec<String>);

impl fmt::Display for ConfigProblems {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration ({} problem{}):", self.0.len(), if self.0.len() == 1 { "" } else { "s" })?;
        for p in &self.0 {
            writeln!(f, "  - {p}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigProblems {}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seeds: Vec<u64>,
    pub output_dir: Option<PathBuf>,
    pub window: Option<usize>,
    pub memory_size: Option<usize>,
    pub short_ratio: Option<f64>,
    pub t_warm: Option<u64>,
    pub endpoint: Option<String>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Reads, overrides and validates a configuration file. Relative data
    /// paths are resolved against the file's directory.
    pub fn load(path: &Path, overrides: &Overrides) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg = Self::parse(&text).with_context(|| format!("cannot parse config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.source.rebase(base);
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if !o.seeds.is_empty() {
            self.seeds = o.seeds.clone();
        }
        if let Some(dir) = &o.output_dir {
            self.output_dir = dir.clone();
        }
        if let Some(w) = o.window {
            self.window = w;
        }
        if let Some(m) = o.memory_size {
            self.memory.size = m;
        }
        if let Some(r) = o.short_ratio {
            self.memory.short_ratio = Some(r);
            self.memory.short_size = None;
        }
        if let Some(t) = o.t_warm {
            self.memory.t_warm = t;
        }
        if let Some(endpoint) = &o.endpoint {
            for p in self.predictor.iter_mut().chain(self.predictors.iter_mut()) {
                if let PredictorConfig::Remote(opts) = p {
                    opts.endpoint = endpoint.clone();
                }
            }
        }
    }

    pub fn all_predictors(&self) -> Vec<PredictorConfig> {
        self.predictor.iter().chain(&self.predictors).cloned().collect()
    }

    pub fn memory_config(&self) -> MemoryConfig {
        self.memory.build().expect("validated")
    }

    pub fn validate(&self) -> Result<(), ConfigProblems> {
        let mut problems = Vec::new();
        if self.version != CONFIG_VERSION {
            problems.push(format!("version {} is not supported (expected {CONFIG_VERSION})", self.version));
        }
        if self.seeds.is_empty() {
            problems.push("seeds must not be empty".into());
        }
        let mut distinct = self.seeds.clone();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() != self.seeds.len() {
            problems.push("seeds must be distinct".into());
        }
        if self.window == 0 {
            problems.push("window must be at least 1".into());
        }
        if self.batch_size == Some(0) {
            problems.push("batch_size must be at least 1".into());
        }
        if self.formats.is_empty() {
            problems.push("formats must not be empty".into());
        }
        self.source.check(Path::new(""), &mut problems);
        if let Err(e) = self.memory.build() {
            problems.push(format!("memory: {e}"));
        }
        let predictors = self.all_predictors();
        if predictors.is_empty() {
            problems.push("no predictor configured".into());
        }
        for p in &predictors {
            if let Err(e) = p.validate() {
                problems.push(format!("predictor {}: {e}", p.label()));
            }
        }
        if let Some(ab) = &self.ablation {
            if !ab.variants.contains(&MemoryVariant::Dual) {
                problems.push("ablation: variants must include dual".into());
            }
            if ab.sizes.is_empty() || ab.ratios.is_empty() {
                problems.push("ablation: sizes and ratios must not be empty".into());
            }
            for &m in &ab.sizes {
                for &r in &ab.ratios {
                    for &v in &ab.variants {
                        if let Err(e) = MemoryConfig::with_variant(m, ShortSize::Ratio(r), self.memory.t_warm, v) {
                            problems.push(format!("ablation: M={m}, ratio={r}, {}: {e}", v.as_str()));
                        }
                    }
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigProblems(problems))
        }
    }

    /// The ablation grid for the first configured predictor.
    pub fn ablation_spec(&self) -> AblationSpec {
        let ab = self.ablation.clone().unwrap_or_default();
        AblationSpec {
            dataset: self.source.label(),
            totals: ab.sizes,
            ratios: ab.ratios,
            variants: ab.variants,
            seeds: self.seeds.clone(),
            t_warm: self.memory.t_warm,
            predictor: self.all_predictors().into_iter().next().expect("validated"),
        }
    }
}
