//! A reference model server speaking the remote protocol, for tests,
//! conformance checks and offline runs.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use super::knn::knn_distribution;
use super::protocol::{to_line, HelloResponse, PredictBody, PredictResponse, Request, PROTOCOL_VERSION};
use crate::types::LabeledExample;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MockAnswer {
    Uniform,
    Knn { k: usize },
}

/// Deliberate protocol violations, for exercising client error paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MockFault {
    None,
    /// Responds with a different id.
    DropId,
    /// Responds with rows that do not sum to one.
    BadSum,
    /// Accepts batches larger than the advertised maximum.
    IgnoreMaxBatch,
    /// Closes the connection after this many predict requests.
    HangUpAfter(u64),
}

#[derive(Debug, Clone)]
pub struct MockOptions {
    pub max_context: usize,
    pub max_batch: usize,
    pub delay: Duration,
    pub answer: MockAnswer,
    pub fault: MockFault,
}

impl Default for MockOptions {
    fn default() -> Self {
        Self {
            max_context: 1000,
            max_batch: 64,
            delay: Duration::ZERO,
            answer: MockAnswer::Knn { k: 5 },
            fault: MockFault::None,
        }
    }
}

/// What the connection loop should do after a line.
enum Reply {
    Send(String),
    HangUp,
}

struct Shared {
    options: MockOptions,
    predicts: AtomicU64,
}

impl Shared {
    fn handle(&self, line: &str) -> Reply {
        let value: serde_json::Value = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(e) => return Reply::Send(to_line(&PredictResponse::failure(None, format!("malformed request: {e}")))),
        };
        let id = value.get("id").and_then(|v| v.as_u64());
        let request: Request = match serde_json::from_value(value) {
            Ok(r) => r,
            Err(e) => return Reply::Send(to_line(&PredictResponse::failure(id, format!("malformed request: {e}")))),
        };
        match request {
            Request::Hello { protocol } => Reply::Send(to_line(&HelloResponse {
                ok: protocol == PROTOCOL_VERSION,
                protocol: PROTOCOL_VERSION,
                max_context: self.options.max_context,
                max_batch: self.options.max_batch,
            })),
            Request::Predict(body) => {
                let n = self.predicts.fetch_add(1, Ordering::SeqCst) + 1;
                if let MockFault::HangUpAfter(limit) = self.options.fault {
                    if n > limit {
                        return Reply::HangUp;
                    }
                }
                Reply::Send(to_line(&self.predict(body)))
            }
        }
    }

    fn predict(&self, body: PredictBody) -> PredictResponse {
        let start = Instant::now();
        let opts = &self.options;
        let id = body.id;
        if body.context.x.len() != body.context.y.len() {
            return PredictResponse::failure(Some(id), "context x and y differ in length");
        }
        if body.context.x.len() > opts.max_context {
            return PredictResponse::failure(Some(id), "context too large");
        }
        if body.queries.len() > opts.max_batch && opts.fault != MockFault::IgnoreMaxBatch {
            return PredictResponse::failure(Some(id), "batch too large");
        }
        let k = body.schema.n_classes;
        if k == 0 || body.context.y.iter().any(|&y| y >= k) {
            return PredictResponse::failure(Some(id), "label outside schema");
        }
        let widths_ok = body.context.x.iter().chain(&body.queries).all(|row| row.len() == body.schema.n_features);
        if !widths_ok {
            return PredictResponse::failure(Some(id), "row width disagrees with schema");
        }
        if !opts.delay.is_zero() {
            thread::sleep(opts.delay);
        }
        let examples: Vec<LabeledExample> = body
            .context
            .x
            .into_iter()
            .zip(body.context.y)
            .enumerate()
            .map(|(i, (features, label))| LabeledExample { features: features.into(), label, arrival_index: i as u64 })
            .collect();
        let mut proba: Vec<Vec<f64>> = body
            .queries
            .iter()
            .map(|q| match opts.answer {
                MockAnswer::Uniform => vec![1.0 / k as f64; k],
                MockAnswer::Knn { k: nn } => knn_distribution(&examples, q, nn, k).into_inner(),
            })
            .collect();
        let mut id_out = id;
        match opts.fault {
            MockFault::DropId => id_out = id.wrapping_add(1),
            MockFault::BadSum => proba.iter_mut().for_each(|row| row[0] += 0.5),
            _ => {}
        }
        let elapsed = start.elapsed().as_secs_f64() * 1e3;
        PredictResponse::success(id_out, proba, "mock", elapsed)
    }
}

fn serve_connection(shared: Arc<Shared>, stream: TcpStream) -> io::Result<()> {
    stream.set_nodelay(true)?;
    let mut writer = stream.try_clone()?;
    for line in BufReader::new(stream).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match shared.handle(&line) {
            Reply::Send(out) => {
                writer.write_all(out.as_bytes())?;
                writer.flush()?;
            }
            Reply::HangUp => return Ok(()),
        }
    }
    Ok(())
}

/// TCP mock server on a loopback port; stops when dropped.
pub struct MockServer {
    addr: SocketAddr,
    shared: Arc<Shared>,
    stop: Arc<AtomicBool>,
    accept: Option<JoinHandle<()>>,
}

impl MockServer {
    pub fn start(options: MockOptions) -> io::Result<Self> {
        Self::bind("127.0.0.1:0", options)
    }

    pub fn bind(addr: &str, options: MockOptions) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        let shared = Arc::new(Shared { options, predicts: AtomicU64::new(0) });
        let stop = Arc::new(AtomicBool::new(false));
        let accept = {
            let shared = Arc::clone(&shared);
            let stop = Arc::clone(&stop);
            thread::spawn(move || {
                for stream in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = stream else { continue };
                    let shared = Arc::clone(&shared);
                    thread::spawn(move || {
                        let _ = serve_connection(shared, stream);
                    });
                }
            })
        };
        Ok(Self { addr, shared, stop, accept: Some(accept) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Endpoint string accepted by the remote client.
    pub fn endpoint(&self) -> String {
        format!("tcp://{}", self.addr)
    }

    /// Predict requests received so far, across all connections.
    pub fn predict_requests(&self) -> u64 {
        self.shared.predicts.load(Ordering::SeqCst)
    }

    /// Blocks until the server is stopped from elsewhere (used by the CLI).
    pub fn wait(mut self) {
        if let Some(handle) = self.accept.take() {
            let _ = handle.join();
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Wake the accept loop so it observes the flag.
        let _ = TcpStream::connect_timeout(&self.addr, Duration::from_millis(200));
        if let Some(handle) = self.accept.take() {
            let _ = handle.join();
        }
    }
}

/// Serves the protocol over the given line streams until end of input.
pub fn serve_lines<R: BufRead, W: Write>(options: MockOptions, input: R, mut output: W) -> io::Result<()> {
    let shared = Shared { options, predicts: AtomicU64::new(0) };
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match shared.handle(&line) {
            Reply::Send(out) => {
                output.write_all(out.as_bytes())?;
                output.flush()?;
            }
            Reply::HangUp => break,
        }
    }
    Ok(())
}

pub fn serve_stdio(options: MockOptions) -> io::Result<()> {
    serve_lines(options, io::stdin().lock(), io::stdout().lock())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::{PredictError, Predictor, RemoteClient, RemoteOptions};
    use crate::types::{Context, Query};

    fn ctx(n: usize) -> Context {
        let long = (0..n)
            .map(|i| LabeledExample { features: vec![i as f64].into(), label: i % 2, arrival_index: i as u64 })
            .collect();
        Context::new(long, vec![]).unwrap()
    }

    fn queries(n: usize) -> Vec<Query> {
        (0..n).map(|i| Query { features: vec![i as f64 + 0.1].into(), arrival_index: 100 + i as u64 }).collect()
    }

    fn client(server: &MockServer) -> RemoteClient {
        let mut o = RemoteOptions::new(server.endpoint());
        o.timeout_ms = 5_000;
        RemoteClient::connect(o, 2).unwrap()
    }

    #[test]
    fn remote_knn_matches_local_knn() {
        let server = MockServer::start(MockOptions { answer: MockAnswer::Knn { k: 3 }, ..Default::default() }).unwrap();
        let mut remote = client(&server);
        let c = ctx(20);
        let q = queries(7);
        let got = remote.predict(&c, &q).unwrap();
        let want: Vec<_> = q.iter().map(|q| knn_distribution(c.examples(), &q.features, 3, 2)).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn batches_are_split_by_the_advertised_maximum() {
        let server = MockServer::start(MockOptions { max_batch: 3, ..Default::default() }).unwrap();
        let mut remote = client(&server);
        assert_eq!(remote.batch_size(), 3);
        assert_eq!(remote.predict(&ctx(5), &queries(10)).unwrap().len(), 10);
        assert_eq!(server.predict_requests(), 4);
    }

    #[test]
    fn empty_context_needs_no_round_trip() {
        let server = MockServer::start(MockOptions::default()).unwrap();
        let mut remote = client(&server);
        let out = remote.predict(&Context::empty(), &queries(2)).unwrap();
        assert_eq!(out[0].probs(), &[0.5, 0.5]);
        assert_eq!(server.predict_requests(), 0);
    }

    #[test]
    fn oversized_context_is_refused_locally() {
        let server = MockServer::start(MockOptions { max_context: 4, ..Default::default() }).unwrap();
        let mut remote = client(&server);
        let err = remote.predict(&ctx(5), &queries(1)).unwrap_err();
        assert!(matches!(err, PredictError::ContextTooLarge { size: 5, max: 4 }));
        assert_eq!(server.predict_requests(), 0);
    }

    #[test]
    fn protocol_faults_surface_as_errors() {
        for fault in [MockFault::DropId, MockFault::BadSum] {
            let server = MockServer::start(MockOptions { fault, ..Default::default() }).unwrap();
            let err = client(&server).predict(&ctx(4), &queries(1)).unwrap_err();
            assert!(matches!(err, PredictError::RemoteProtocol(_)), "{fault:?}: {err}");
        }
    }

    #[test]
    fn slow_server_times_out() {
        let server =
            MockServer::start(MockOptions { delay: Duration::from_millis(400), ..Default::default() }).unwrap();
        let mut o = RemoteOptions::new(server.endpoint());
        o.timeout_ms = 100;
        let mut remote = RemoteClient::connect(o, 2).unwrap();
        assert!(matches!(remote.predict(&ctx(3), &queries(1)), Err(PredictError::Timeout(100))));
    }

    #[test]
    fn dropped_connection_is_retried() {
        let server = MockServer::start(MockOptions { fault: MockFault::HangUpAfter(1), ..Default::default() }).unwrap();
        let mut remote = client(&server);
        remote.predict(&ctx(3), &queries(1)).unwrap();
        // The server now hangs up on every request, so retries run out.
        let err = remote.predict(&ctx(3), &queries(1)).unwrap_err();
        assert!(matches!(err, PredictError::RemoteUnavailable { .. }), "{err}");
        assert_eq!(server.predict_requests(), 1 + 3);
    }

    #[test]
    fn line_server_rejects_garbage_and_keeps_going() {
        let input = b"not json\n{\"op\":\"hello\",\"protocol\":1}\n".as_slice();
        let mut out = Vec::new();
        serve_lines(MockOptions::default(), input, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].contains("\"ok\":false"));
        let hello: HelloResponse = serde_json::from_str(lines[1]).unwrap();
        assert!(hello.ok);
    }
}
