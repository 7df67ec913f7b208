//! Wire records of the remote predictor protocol.
//!
//! Newline-delimited UTF-8 JSON, one object per line, over TCP or a child
//! process's stdio. Field order is irrelevant and unknown fields are ignored.
//!
//! ```text
//! -> {"op":"hello","protocol":1}
//! <- {"ok":true,"protocol":1,"max_context":1000,"max_batch":10}
//! -> {"id":1,"op":"predict","schema":{"n_features":2,"n_classes":3},
//!     "context":{"x":[[0.1,0.2]],"y":[2]},"queries":[[0.0,0.0]],
//!     "n_permutations":4,"seed":17}
//! <- {"id":1,"ok":true,"proba":[[0.2,0.3,0.5]],"model":"...","elapsed_ms":3.1}
//! <- {"id":1,"ok":false,"error":"context too large"}
//! ```

use serde::{Deserialize, Serialize};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireSchema {
    pub n_features: usize,
    pub n_classes: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WireContext {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictBody {
    pub id: u64,
    pub schema: WireSchema,
    pub context: WireContext,
    pub queries: Vec<Vec<f64>>,
    pub n_permutations: u32,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Request {
    Hello { protocol: u32 },
    Predict(PredictBody),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HelloResponse {
    pub ok: bool,
    pub protocol: u32,
    pub max_context: usize,
    pub max_batch: usize,
}

/// Either response shape. Every field except `ok` is optional so that a
/// misbehaving server still parses and can be diagnosed.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PredictResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<u64>,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proba: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl PredictResponse {
    pub fn success(id: u64, proba: Vec<Vec<f64>>, model: &str, elapsed_ms: f64) -> Self {
        Self {
            id: Some(id),
            ok: true,
            proba: Some(proba),
            model: Some(model.to_string()),
            elapsed_ms: Some(elapsed_ms),
            error: None,
        }
    }

    pub fn failure(id: Option<u64>, error: impl Into<String>) -> Self {
        Self { id, ok: false, error: Some(error.into()), ..Self::default() }
    }
}

/// Serializes a record followed by the line terminator.
pub fn to_line<T: Serialize>(record: &T) -> String {
    let mut line = serde_json::to_string(record).expect("wire records serialize");
    line.push('\n');
    line
}
