use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{IngestError, Normalization, Origin, RawRow, RawValue, RowReader, StreamSource};
use crate::types::{FeatureKind, Schema};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArffOptions {
    /// Name of the class attribute; the last attribute when `None`.
    pub class_attribute: Option<String>,
    pub normalization: Normalization,
    pub strict_categories: bool,
}

impl Default for ArffOptions {
    fn default() -> Self {
        Self { class_attribute: None, normalization: Normalization::RunningZScore, strict_categories: true }
    }
}

pub fn open_arff(path: impl AsRef<Path>, options: &ArffOptions) -> Result<StreamSource, IngestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
    let mut source = arff_from_reader(file, options)?;
    source.origin = Origin::Arff(path.to_path_buf());
    Ok(source)
}

#[derive(Debug, Clone)]
enum AttrType {
    Numeric,
    Nominal(Vec<String>),
}

pub fn arff_from_reader<R: Read + Send + 'static>(
    reader: R,
    options: &ArffOptions,
) -> Result<StreamSource, IngestError> {
    let mut reader = BufReader::new(reader);
    let mut line = String::new();
    let mut line_no = 0u64;
    let mut attributes: Vec<(String, AttrType)> = Vec::new();
    let mut saw_relation = false;

    loop {
        line.clear();
        let n = reader.read_line(&mut line).map_err(|e| IngestError::io("<arff>", e))?;
        if n == 0 {
            return Err(IngestError::ArffSyntax { line: line_no, reason: "missing @data section".into() });
        }
        line_no += 1;
        let text = line.trim();
        if text.is_empty() || text.starts_with('%') {
            continue;
        }
        let (keyword, rest) = split_keyword(text);
        match keyword.to_ascii_lowercase().as_str() {
            "@relation" => saw_relation = true,
            "@attribute" => {
                let (name, rest) = take_name(rest).ok_or_else(|| IngestError::ArffSyntax {
                    line: line_no,
                    reason: "attribute without a name".into(),
                })?;
                attributes.push((name, parse_type(rest, line_no)?));
            }
            "@data" => break,
            _ => {
                return Err(IngestError::ArffSyntax {
                    line: line_no,
                    reason: format!("unexpected header line {text:?}"),
                })
            }
        }
    }
    if !saw_relation {
        return Err(IngestError::ArffSyntax { line: line_no, reason: "missing @relation".into() });
    }
    if attributes.len() < 2 {
        return Err(IngestError::SchemaMismatch("need at least one feature attribute and a class attribute".into()));
    }

    let class_pos = match &options.class_attribute {
        None => attributes.len() - 1,
        Some(name) => attributes
            .iter()
            .position(|(n, _)| n.eq_ignore_ascii_case(name))
            .ok_or_else(|| IngestError::SchemaMismatch(format!("no attribute named {name:?}")))?,
    };
    let class_names = match &attributes[class_pos].1 {
        AttrType::Nominal(values) => values.clone(),
        AttrType::Numeric => return Err(IngestError::UnsupportedAttribute("numeric class".into())),
    };
    let mut feature_names = Vec::new();
    let mut feature_kinds = Vec::new();
    for (i, (name, ty)) in attributes.iter().enumerate() {
        if i == class_pos {
            continue;
        }
        feature_names.push(name.clone());
        feature_kinds.push(match ty {
            AttrType::Numeric => FeatureKind::Numeric,
            AttrType::Nominal(values) => FeatureKind::Categorical { categories: values.clone() },
        });
    }
    let schema = Schema::new(feature_names, feature_kinds, class_names)?;
    let types = attributes.into_iter().map(|(_, t)| t).collect();
    let rows = ArffRows { reader, line, line_no, types, class_pos, schema: schema.clone() };
    Ok(StreamSource::new(schema, Origin::Memory, Box::new(rows), options.normalization, options.strict_categories))
}

fn split_keyword(text: &str) -> (&str, &str) {
    match text.find(char::is_whitespace) {
        Some(i) => (&text[..i], text[i..].trim_start()),
        None => (text, ""),
    }
}

/// Reads a possibly quoted name; returns it and the remaining text.
fn take_name(text: &str) -> Option<(String, &str)> {
    let text = text.trim_start();
    let first = text.chars().next()?;
    if first == '\'' || first == '"' {
        let end = text[1..].find(first)? + 1;
        Some((text[1..end].to_string(), text[end + 1..].trim_start()))
    } else {
        let (name, rest) = split_keyword(text);
        Some((name.to_string(), rest))
    }
}

fn parse_type(text: &str, line: u64) -> Result<AttrType, IngestError> {
    let text = text.trim();
    if let Some(inner) = text.strip_prefix('{') {
        let inner = inner
            .strip_suffix('}')
            .ok_or_else(|| IngestError::ArffSyntax { line, reason: "unterminated nominal value list".into() })?;
        let values: Vec<String> = split_fields(inner).into_iter().filter(|v| !v.is_empty()).collect();
        if values.is_empty() {
            return Err(IngestError::ArffSyntax { line, reason: "empty nominal value list".into() });
        }
        return Ok(AttrType::Nominal(values));
    }
    let kind = text.split_whitespace().next().unwrap_or("");
    match kind.to_ascii_lowercase().as_str() {
        "numeric" | "real" | "integer" => Ok(AttrType::Numeric),
        "" => Err(IngestError::ArffSyntax { line, reason: "attribute without a type".into() }),
        other => Err(IngestError::UnsupportedAttribute(other.to_string())),
    }
}

/// Splits on commas outside single or double quotes, unquoting and
/// trimming each field.
fn split_fields(text: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut current = String::new();
    let mut quote: Option<char> = None;
    let mut was_quoted = false;
    let mut chars = text.chars().peekable();
    while let Some(c) = chars.next() {
        match quote {
            Some(q) if c == '\\' => {
                if let Some(&next) = chars.peek() {
                    if next == q || next == '\\' {
                        current.push(next);
                        chars.next();
                        continue;
                    }
                }
                current.push(c);
            }
            Some(q) if c == q => quote = None,
            Some(_) => current.push(c),
            None if c == '\'' || c == '"' => {
                if current.trim().is_empty() {
                    current.clear();
                }
                quote = Some(c);
                was_quoted = true;
            }
            None if c == ',' => {
                fields.push(finish_field(&mut current, was_quoted));
                was_quoted = false;
            }
            None => current.push(c),
        }
    }
    fields.push(finish_field(&mut current, was_quoted));
    fields
}

fn finish_field(current: &mut String, quoted: bool) -> String {
    let field = std::mem::take(current);
    if quoted {
        field.trim_end().to_string()
    } else {
        field.trim().to_string()
    }
}

struct ArffRows<R> {
    reader: BufReader<R>,
    line: String,
    line_no: u64,
    types: Vec<AttrType>,
    class_pos: usize,
    schema: Schema,
}

impl<R: Read> ArffRows<R> {
    fn parse(&self, text: &str) -> Result<RawRow, IngestError> {
        let line = self.line_no;
        if text.starts_with('{') {
            return Err(IngestError::ArffSyntax { line, reason: "sparse instances are not supported".into() });
        }
        let fields = split_fields(text);
        if fields.len() != self.types.len() {
            return Err(IngestError::ArffSyntax {
                line,
                reason: format!("expected {} values, found {}", self.types.len(), fields.len()),
            });
        }
        let class_text = &fields[self.class_pos];
        let label = self
            .schema
            .class_index(class_text)
            .ok_or_else(|| IngestError::ArffSyntax { line, reason: format!("unknown class value {class_text:?}") })?;
        let mut values = Vec::with_capacity(fields.len() - 1);
        for (i, (field, ty)) in fields.iter().zip(&self.types).enumerate() {
            if i == self.class_pos {
                continue;
            }
            if field == "?" {
                values.push(RawValue::Missing);
                continue;
            }
            values.push(match ty {
                AttrType::Numeric => RawValue::Numeric(
                    field
                        .parse()
                        .map_err(|_| IngestError::ArffSyntax { line, reason: format!("{field:?} is not a number") })?,
                ),
                AttrType::Nominal(_) => RawValue::Categorical(field.clone()),
            });
        }
        Ok(RawRow { values, label, truth: None })
    }
}

impl<R: Read + Send> RowReader for ArffRows<R> {
    fn next_row(&mut self) -> Option<Result<RawRow, IngestError>> {
        loop {
            self.line.clear();
            match self.reader.read_line(&mut self.line) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => return Some(Err(IngestError::io("<arff>", e))),
            }
            self.line_no += 1;
            let text = self.line.trim();
            if text.is_empty() || text.starts_with('%') {
                continue;
            }
            let text = text.to_string();
            return Some(self.parse(&text));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SIMPLE: &str = "% a comment\n@RELATION test\n\n@attribute x1 numeric\n@Attribute 'x 2' REAL\n@attribute class {a,b}\n\n@DATA\n1.0,2.0,b\n% inline comment\n3,4,a\n";

    fn parse(text: &'static str) -> Result<StreamSource, IngestError> {
        let opts = ArffOptions { normalization: Normalization::Identity, ..ArffOptions::default() };
        arff_from_reader(text.as_bytes(), &opts)
    }

    #[test]
    fn header_defines_schema() {
        let src = parse(SIMPLE).unwrap();
        assert_eq!(src.schema().class_names(), &["a".to_string(), "b".to_string()]);
        assert_eq!(src.schema().feature_names(), &["x1".to_string(), "x 2".to_string()]);
    }

    #[test]
    fn data_rows_resolve_labels() {
        let rows: Vec<_> = parse(SIMPLE).unwrap().map(Result::unwrap).collect();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].features.to_vec(), vec![1.0, 2.0]);
        assert_eq!(rows[0].label, 1);
        assert_eq!(rows[1].label, 0);
    }

    #[test]
    fn string_attribute_is_unsupported() {
        let err = parse("@relation r\n@attribute s string\n@attribute c {a}\n@data\n").unwrap_err();
        assert!(matches!(err, IngestError::UnsupportedAttribute(k) if k == "string"));
        let err = parse("@relation r\n@attribute d date 'yyyy'\n@attribute c {a}\n@data\n").unwrap_err();
        assert!(matches!(err, IngestError::UnsupportedAttribute(_)));
    }

    #[test]
    fn nominal_features_are_categorical() {
        let text = "@relation r\n@attribute color {red, 'dark green', blue}\n@attribute c {y,n}\n@data\n'dark green',n\nblue,y\n?,y\n";
        let src = parse(text).unwrap();
        assert_eq!(src.schema().feature_kinds()[0].cardinality(), Some(3));
        let rows: Vec<_> = src.map(Result::unwrap).collect();
        assert_eq!(rows.iter().map(|r| r.features[0]).collect::<Vec<_>>(), vec![1.0, 2.0, 1.0]);
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let mut src = parse("@relation r\n@attribute x numeric\n@attribute c {a}\n@data\n1,a\n1,2,a\n").unwrap();
        assert!(src.next().unwrap().is_ok());
        assert!(matches!(src.next(), Some(Err(IngestError::ArffSyntax { line: 6, .. }))));

        assert!(matches!(
            parse("@relation r\n@attribute x numeric\n@attribute c {a}\n"),
            Err(IngestError::ArffSyntax { .. })
        ));
        assert!(matches!(parse("@relation r\n@bogus\n"), Err(IngestError::ArffSyntax { line: 2, .. })));
        let mut sparse = parse("@relation r\n@attribute x numeric\n@attribute c {a}\n@data\n{0 1, 1 a}\n").unwrap();
        assert!(matches!(sparse.next(), Some(Err(IngestError::ArffSyntax { line: 5, .. }))));
    }

    #[test]
    fn numeric_class_is_rejected() {
        let err = parse("@relation r\n@attribute x numeric\n@attribute y numeric\n@data\n").unwrap_err();
        assert!(matches!(err, IngestError::UnsupportedAttribute(_)));
    }

    #[test]
    fn class_attribute_by_name() {
        let opts = ArffOptions {
            class_attribute: Some("C".into()),
            normalization: Normalization::Identity,
            ..ArffOptions::default()
        };
        let text = "@relation r\n@attribute c {p,q}\n@attribute x numeric\n@data\nq,5\n";
        let mut src = arff_from_reader(text.as_bytes(), &opts).unwrap();
        let ex = src.next().unwrap().unwrap();
        assert_eq!((ex.features.to_vec(), ex.label), (vec![5.0], 1));
    }
}
