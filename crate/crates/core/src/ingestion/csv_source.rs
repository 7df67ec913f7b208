use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{IngestError, Normalization, Origin, RawRow, RawValue, RowReader, StreamSource};
use crate::types::{FeatureKind, Schema};

/// Identifies a column by header name or zero-based position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

impl Default for ColumnRef {
    fn default() -> Self {
        ColumnRef::Name(String::new())
    }
}

/// How to read a delimited file.
///
/// The class set must be declared up front. An empty `label` name means the
/// last column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CsvOptions {
    pub has_header: bool,
    pub label: ColumnRef,
    pub delimiter: char,
    pub class_names: Vec<String>,
    /// Columns holding nominal values; they are ordinal-encoded in order of
    /// first appearance.
    pub categorical: Vec<ColumnRef>,
    pub missing_tokens: Vec<String>,
    pub normalization: Normalization,
    pub strict_categories: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            has_header: true,
            label: ColumnRef::default(),
            delimiter: ',',
            class_names: Vec::new(),
            categorical: Vec::new(),
            missing_tokens: vec!["".into(), "?".into(), "NA".into()],
            normalization: Normalization::RunningZScore,
            strict_categories: false,
        }
    }
}

pub fn open_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<StreamSource, IngestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
    let mut source = csv_from_reader(file, options)?;
    source.origin = Origin::Csv(path.to_path_buf());
    Ok(source)
}

/// Streams CSV rows from any reader. Used by [`open_csv`] and by tests that
/// instrument the underlying reads.
pub fn csv_from_reader<R: Read + Send + 'static>(reader: R, options: &CsvOptions) -> Result<StreamSource, IngestError> {
    if !options.delimiter.is_ascii() {
        return Err(IngestError::SchemaMismatch(format!("delimiter {:?} is not a single byte", options.delimiter)));
    }
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(options.delimiter as u8)
        .from_reader(reader);

    let mut record = csv::StringRecord::new();
    let mut pending = None;
    let header: Option<Vec<String>> = if options.has_header {
        match read_record(&mut csv, &mut record)? {
            Some(_) => Some(record.iter().map(|s| s.trim().to_string()).collect()),
            None => return Err(IngestError::SchemaMismatch("file has no header row".into())),
        }
    } else {
        match read_record(&mut csv, &mut record)? {
            Some(line) => {
                pending = Some((record.clone(), line));
                None
            }
            None => return Err(IngestError::SchemaMismatch("file has no rows and no header".into())),
        }
    };

    let n_columns = match (&header, &pending) {
        (Some(h), _) => h.len(),
        (None, Some((r, _))) => r.len(),
        (None, None) => unreachable!(),
    };
    if n_columns < 2 {
        return Err(IngestError::SchemaMismatch(format!(
            "need at least one feature and a label column, found {n_columns} columns"
        )));
    }
    let resolve = |col: &ColumnRef| -> Result<usize, IngestError> {
        match col {
            ColumnRef::Index(i) if *i < n_columns => Ok(*i),
            ColumnRef::Index(i) => {
                Err(IngestError::SchemaMismatch(format!("column {i} out of range ({n_columns} columns)")))
            }
            ColumnRef::Name(name) if name.is_empty() => Ok(n_columns - 1),
            ColumnRef::Name(name) => header
                .as_ref()
                .and_then(|h| h.iter().position(|c| c == name))
                .ok_or_else(|| IngestError::SchemaMismatch(format!("no column named {name:?}"))),
        }
    };
    let label_column = resolve(&options.label)?;
    let mut categorical = vec![false; n_columns];
    for col in &options.categorical {
        categorical[resolve(col)?] = true;
    }

    let feature_columns: Vec<usize> = (0..n_columns).filter(|&c| c != label_column).collect();
    let feature_names = feature_columns
        .iter()
        .map(|&c| match &header {
            Some(h) => h[c].clone(),
            None => format!("col{c}"),
        })
        .collect();
    let feature_kinds =
        feature_columns
            .iter()
            .map(|&c| {
                if categorical[c] {
                    FeatureKind::Categorical { categories: Vec::new() }
                } else {
                    FeatureKind::Numeric
                }
            })
            .collect();
    let schema = Schema::new(feature_names, feature_kinds, options.class_names.clone())?;
    if options.strict_categories && categorical.iter().any(|&c| c) {
        return Err(IngestError::SchemaMismatch(
            "strict categories need declared categories; CSV columns learn theirs online".into(),
        ));
    }

    let rows = CsvRows {
        csv,
        record,
        pending,
        n_columns,
        label_column,
        feature_columns,
        categorical,
        schema: schema.clone(),
        missing: options.missing_tokens.clone(),
    };
    Ok(StreamSource::new(schema, Origin::Memory, Box::new(rows), options.normalization, options.strict_categories))
}

fn read_record<R: Read>(csv: &mut csv::Reader<R>, record: &mut csv::StringRecord) -> Result<Option<u64>, IngestError> {
    match csv.read_record(record) {
        Ok(true) => Ok(Some(record.position().map(|p| p.line()).unwrap_or(0))),
        Ok(false) => Ok(None),
        Err(e) => {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Err(IngestError::ParseRow { line, reason: e.to_string() })
        }
    }
}

struct CsvRows<R> {
    csv: csv::Reader<R>,
    record: csv::StringRecord,
    pending: Option<(csv::StringRecord, u64)>,
    n_columns: usize,
    label_column: usize,
    feature_columns: Vec<usize>,
    categorical: Vec<bool>,
    schema: Schema,
    missing: Vec<String>,
}

impl<R: Read> CsvRows<R> {
    fn parse(&self, record: &csv::StringRecord, line: u64) -> Result<RawRow, IngestError> {
        if record.len() != self.n_columns {
            return Err(IngestError::ParseRow {
                line,
                reason: format!("expected {} columns, found {}", self.n_columns, record.len()),
            });
        }
        let label_text = record[self.label_column].trim();
        let label = self
            .schema
            .class_index(label_text)
            .ok_or_else(|| IngestError::ParseRow { line, reason: format!("unknown class label {label_text:?}") })?;
        let mut values = Vec::with_capacity(self.feature_columns.len());
        for &c in &self.feature_columns {
            let field = record[c].trim();
            if self.missing.iter().any(|m| m == field) {
                values.push(RawValue::Missing);
            } else if self.categorical[c] {
                values.push(RawValue::Categorical(field.to_string()));
            } else {
                let v: f64 = field.parse().map_err(|_| IngestError::ParseRow {
                    line,
                    reason: format!("column {c}: {field:?} is not a number"),
                })?;
                values.push(RawValue::Numeric(v));
            }
        }
        Ok(RawRow { values, label, truth: None })
    }
}

impl<R: Read + Send> RowReader for CsvRows<R> {
    fn next_row(&mut self) -> Option<Result<RawRow, IngestError>> {
        if let Some((record, line)) = self.pending.take() {
            return Some(self.parse(&record, line));
        }
        let mut record = std::mem::take(&mut self.record);
        let result = match read_record(&mut self.csv, &mut record) {
            Ok(Some(line)) => Some(self.parse(&record, line)),
            Ok(None) => None,
            Err(e) => Some(Err(e)),
        };
        self.record = record;
        result
    }
}
