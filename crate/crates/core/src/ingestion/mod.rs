//! Example streams from files and synthetic generators.
//!
//! Every source yields encoded [`LabeledExample`]s one at a time with dense,
//! strictly increasing arrival indices starting at zero. File sources read
//! each row exactly once through a bounded buffer.

mod arff;
mod csv_source;
mod encoder;
mod synthetic;

use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

use crate::types::{ExampleError, LabeledExample, Schema, SchemaError};

pub use arff::{arff_from_reader, open_arff, ArffOptions};
pub use csv_source::{csv_from_reader, open_csv, ColumnRef, CsvOptions};
pub use encoder::{EncoderState, Normalization};
pub use synthetic::{
    gaussian_drift_stream, hyperplane_for, rotating_hyperplane_stream, DriftSpec, GaussianConcept, HyperplaneSpec,
    RotatingHyperplane, Segment, Transition, TruthfulConcept,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    ParseRow { line: u64, reason: String },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("ARFF syntax error on line {line}: {reason}")]
    ArffSyntax { line: u64, reason: String },
    #[error("unsupported ARFF attribute type {0:?}")]
    UnsupportedAttribute(String),
    #[error("feature {feature}: unknown categorical value {value:?}")]
    UnknownCategoricalValue { feature: usize, value: String },
    #[error("instance {arrival_index}: {source}")]
    Example {
        arrival_index: u64,
        #[source]
        source: ExampleError,
    },
    #[error("invalid generator specification: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

impl IngestError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IngestError::Io { path: path.into(), source }
    }
}

/// One field of a row before encoding.
#[derive(Debug, Clone, PartialEq)]
pub enum RawValue {
    Numeric(f64),
    Categorical(String),
    Missing,
}

/// A parsed row: raw feature values, resolved class index and, for synthetic
/// sources, the true conditional class distribution at this point.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub values: Vec<RawValue>,
    pub label: usize,
    pub truth: Option<Vec<f64>>,
}

pub(crate) trait RowReader: Send {
    fn next_row(&mut self) -> Option<Result<RawRow, IngestError>>;
}

#[derive(Debug, Clone, PartialEq)]
pub enum Origin {
    Csv(PathBuf),
    Arff(PathBuf),
    Synthetic { generator: String, seed: u64 },
    Memory,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Csv(p) => write!(f, "csv:{}", p.display()),
            Origin::Arff(p) => write!(f, "arff:{}", p.display()),
            Origin::Synthetic { generator, seed } => write!(f, "synthetic:{generator}:{seed}"),
            Origin::Memory => f.write_str("memory"),
        }
    }
}

/// A single-consumer stream of encoded examples.
pub struct StreamSource {
    schema: Schema,
    origin: Origin,
    rows: Box<dyn RowReader>,
    encoder: EncoderState,
    next_index: u64,
    last_truth: Option<Vec<f64>>,
}

impl StreamSource {
    pub(crate) fn new(
        schema: Schema,
        origin: Origin,
        rows: Box<dyn RowReader>,
        normalization: Normalization,
        strict_categories: bool,
    ) -> Self {
        let encoder = EncoderState::new(&schema, normalization, strict_categories);
        Self { schema, origin, rows, encoder, next_index: 0, last_truth: None }
    }

    /// In-memory source over already-numeric rows, without normalization.
    pub fn from_rows(schema: Schema, rows: Vec<(Vec<f64>, usize)>) -> Self {
        let rows = rows
            .into_iter()
            .map(|(x, label)| RawRow { values: x.into_iter().map(RawValue::Numeric).collect(), label, truth: None })
            .collect::<Vec<_>>();
        Self::new(schema, Origin::Memory, Box::new(VecRows(rows.into_iter())), Normalization::Identity, true)
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn origin(&self) -> &Origin {
        &self.origin
    }

    pub fn encoder(&self) -> &EncoderState {
        &self.encoder
    }

    /// True conditional class distribution of the most recently yielded
    /// example, when the source knows it.
    pub fn last_truth(&self) -> Option<&[f64]> {
        self.last_truth.as_deref()
    }
}

impl Iterator for StreamSource {
    type Item = Result<LabeledExample, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        let row = match self.rows.next_row()? {
            Ok(row) => row,
            Err(e) => return Some(Err(e)),
        };
        let arrival_index = self.next_index;
        let encoded = self.encoder.encode(&row.values, row.label, arrival_index);
        if encoded.is_ok() {
            self.next_index += 1;
            self.last_truth = row.truth;
        }
        Some(encoded)
    }
}

impl fmt::Debug for StreamSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StreamSource")
            .field("origin", &self.origin)
            .field("n_features", &self.schema.n_features())
            .field("n_classes", &self.schema.n_classes())
            .field("next_index", &self.next_index)
            .finish()
    }
}

struct VecRows(std::vec::IntoIter<RawRow>);

impl RowReader for VecRows {
    fn next_row(&mut self) -> Option<Result<RawRow, IngestError>> {
        self.0.next().map(Ok)
    }
}
