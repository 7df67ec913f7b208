//! Memory checkpoint files.
//!
//! Layout: one header line `DUALCTX-MEMORY <version>` followed by one JSON
//! document holding the configuration, the warm-up counter, the ledger and
//! both buffers in arrival order. The ledger is redundant with the long-term
//! buffer and is checked on load.

use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{DualMemory, MemoryConfig, MemoryError};
use crate::types::LabeledExample;

pub const SNAPSHOT_MAGIC: &str = "DUALCTX-MEMORY";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a memory snapshot (header {0:?})")]
    BadHeader(String),
    #[error("unsupported snapshot version {0}")]
    UnsupportedVersion(u32),
    #[error("malformed snapshot body: {0}")]
    Body(#[from] serde_json::Error),
    #[error("snapshot ledger {stored:?} disagrees with its long-term buffer {actual:?}")]
    LedgerMismatch { stored: Vec<usize>, actual: Vec<usize> },
    #[error("invalid snapshot contents: {0}")]
    Invalid(#[from] MemoryError),
}

#[derive(Serialize, Deserialize)]
struct Body {
    config: MemoryConfig,
    n_classes: usize,
    t_warm: u64,
    class_counts: Vec<usize>,
    long_term: Vec<LabeledExample>,
    short_term: Vec<LabeledExample>,
}

pub fn write_snapshot<W: Write>(mem: &DualMemory, mut out: W) -> Result<(), SnapshotError> {
    writeln!(out, "{SNAPSHOT_MAGIC} {SNAPSHOT_VERSION}")?;
    let body = Body {
        config: mem.config,
        n_classes: mem.n_classes(),
        t_warm: mem.t_warm,
        class_counts: mem.counts.clone(),
        long_term: mem.long_chronological(),
        short_term: mem.short.iter().cloned().collect(),
    };
    serde_json::to_writer(&mut out, &body)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn read_snapshot<R: Read>(input: R) -> Result<DualMemory, SnapshotError> {
    let mut reader = BufReader::new(input);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let header = header.trim_end();
    let version = header
        .strip_prefix(SNAPSHOT_MAGIC)
        .and_then(|rest| rest.trim().parse::<u32>().ok())
        .ok_or_else(|| SnapshotError::BadHeader(header.to_string()))?;
    if version != SNAPSHOT_VERSION {
        return Err(SnapshotError::UnsupportedVersion(version));
    }
    let body: Body = serde_json::from_reader(reader)?;
    let mem = DualMemory::from_parts(body.config, body.n_classes, body.short_term, body.long_term, body.t_warm)?;
    if mem.counts != body.class_counts {
        return Err(SnapshotError::LedgerMismatch { stored: body.class_counts, actual: mem.counts });
    }
    Ok(mem)
}
