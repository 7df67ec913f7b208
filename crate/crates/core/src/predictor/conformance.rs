//! Protocol conformance checks against a live model server.

use std::time::Duration;

use serde::Serialize;

use super::protocol::{
    to_line, HelloResponse, PredictBody, PredictResponse, Request, WireContext, WireSchema, PROTOCOL_VERSION,
};
use super::remote::{Connection, Endpoint};

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConformanceReport {
    pub endpoint: String,
    pub checks: Vec<CheckResult>,
}

impl ConformanceReport {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }
}

const N_FEATURES: usize = 2;
const N_CLASSES: usize = 3;

fn body(id: u64, n_queries: usize, n_context: usize) -> PredictBody {
    PredictBody {
        id,
        schema: WireSchema { n_features: N_FEATURES, n_classes: N_CLASSES },
        context: WireContext {
            x: (0..n_context).map(|i| vec![i as f64, -(i as f64) * 0.5]).collect(),
            y: (0..n_context).map(|i| i % N_CLASSES).collect(),
        },
        queries: (0..n_queries).map(|i| vec![i as f64 + 0.25, 0.0]).collect(),
        n_permutations: 1,
        seed: id,
    }
}

fn check_rows(resp: &PredictResponse, n: usize) -> Result<(), String> {
    if !resp.ok {
        return Err(format!("server error: {}", resp.error.as_deref().unwrap_or("?")));
    }
    let proba = resp.proba.as_ref().ok_or("no proba field")?;
    if proba.len() != n {
        return Err(format!("{} rows for {n} queries", proba.len()));
    }
    for row in proba {
        if row.len() != N_CLASSES {
            return Err(format!("row of length {}, expected {N_CLASSES}", row.len()));
        }
        if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(format!("invalid entry in {row:?}"));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(format!("row sums to {sum}"));
        }
    }
    Ok(())
}

struct Session {
    conn: Connection,
    next_id: u64,
    records: u64,
}

impl Session {
    fn raw(&mut self, line: &str) -> Result<String, String> {
        self.records += 1;
        self.conn.round_trip(line).map_err(|e| format!("transport: {e}"))
    }

    fn predict(&mut self, n_queries: usize, n_context: usize) -> Result<(u64, PredictResponse), String> {
        let id = self.next_id;
        self.next_id += 1;
        let reply = self.raw(&to_line(&Request::Predict(body(id, n_queries, n_context))))?;
        let resp = serde_json::from_str(&reply).map_err(|e| format!("unparsable response: {e}"))?;
        Ok((id, resp))
    }
}

/// Runs every check; the report lists each one whether or not it passed.
pub fn run_conformance(endpoint: &str, timeout: Duration) -> ConformanceReport {
    let mut checks = Vec::new();
    let mut push = |name, result: Result<String, String>| {
        let (passed, detail) = match result {
            Ok(d) => (true, d),
            Err(d) => (false, d),
        };
        checks.push(CheckResult { name, passed, detail });
    };

    let conn = Endpoint::parse(endpoint)
        .map_err(|e| e.to_string())
        .and_then(|ep| Connection::open(&ep, timeout).map_err(|e| format!("connect: {e}")));
    let mut session = match conn {
        Ok(conn) => Session { conn, next_id: 1, records: 0 },
        Err(e) => {
            push("handshake", Err(e));
            return ConformanceReport { endpoint: endpoint.to_string(), checks };
        }
    };

    let hello = session
        .raw(&to_line(&Request::Hello { protocol: PROTOCOL_VERSION }))
        .and_then(|r| serde_json::from_str::<HelloResponse>(&r).map_err(|e| format!("bad hello reply: {e}")))
        .and_then(|h| {
            if h.ok && h.protocol == PROTOCOL_VERSION && h.max_batch > 0 && h.max_context > 0 {
                Ok(h)
            } else {
                Err(format!("unacceptable hello reply {h:?}"))
            }
        });
    let hello = match hello {
        Ok(h) => {
            push("handshake", Ok(format!("max_context={} max_batch={}", h.max_context, h.max_batch)));
            h
        }
        Err(e) => {
            push("handshake", Err(e));
            return ConformanceReport { endpoint: endpoint.to_string(), checks };
        }
    };
    let n_context = hello.max_context.min(8);

    let first = session.predict(1, n_context);
    push(
        "valid_predict",
        first.as_ref().map_err(Clone::clone).and_then(|(_, r)| check_rows(r, 1).map(|_| "1 row".into())),
    );
    push(
        "id_echo",
        first.and_then(|(id, r)| match r.id {
            Some(got) if got == id => Ok(format!("id {id} echoed")),
            other => Err(format!("sent id {id}, got {other:?}")),
        }),
    );

    let malformed = session
        .raw("{\"op\":\"predict\",\"id\":\n")
        .and_then(|r| serde_json::from_str::<PredictResponse>(&r).map_err(|e| format!("unparsable error reply: {e}")))
        .and_then(|r| if r.ok { Err("malformed request was accepted".to_string()) } else { Ok(()) })
        .and_then(|_| session.predict(1, n_context))
        .and_then(|(_, r)| check_rows(&r, 1))
        .map(|_| "rejected; connection still usable".to_string());
    push("malformed_rejected", malformed);

    let over = hello.max_batch.saturating_add(1);
    let limit = if over > 100_000 {
        Ok(format!("max_batch {} too large to probe", hello.max_batch))
    } else {
        session.predict(over, n_context).and_then(|(_, r)| {
            if r.ok {
                Err(format!("batch of {over} accepted despite max_batch {}", hello.max_batch))
            } else {
                Ok(format!("batch of {over} rejected"))
            }
        })
    };
    push("batch_limit", limit);

    let batch = hello.max_batch.min(10);
    let before = session.records;
    let capacity = session.predict(batch, n_context).and_then(|(_, r)| {
        check_rows(&r, batch)?;
        let sent = session.records - before;
        if sent == 1 {
            Ok(format!("{batch} queries in one record"))
        } else {
            Err(format!("{sent} records for one batch"))
        }
    });
    push("batch_capacity", capacity);

    ConformanceReport { endpoint: endpoint.to_string(), checks }
}
