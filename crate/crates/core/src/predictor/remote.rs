use std::fmt;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::process::{Child, Command, Stdio};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::protocol::{
    to_line, HelloResponse, PredictBody, PredictResponse, Request, WireContext, WireSchema, PROTOCOL_VERSION,
};
use super::{uniform_batch, ConfigError, PredictError, Predictor};
use crate::types::{ClassDistribution, Context, Query};

fn default_batch_size() -> usize {
    10
}
fn default_timeout_ms() -> u64 {
    30_000
}
fn default_permutations() -> u32 {
    4
}
fn default_retries() -> u32 {
    2
}

/// Settings of the remote predictor client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteOptions {
    /// `host:port`, `tcp://host:port` or `stdio:<command> [args..]`.
    pub endpoint: String,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_permutations")]
    pub n_permutations: u32,
    /// Reconnect-and-resend attempts after a transport failure.
    #[serde(default = "default_retries")]
    pub retries: u32,
    #[serde(default)]
    pub seed: u64,
}

impl RemoteOptions {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            batch_size: default_batch_size(),
            timeout_ms: default_timeout_ms(),
            n_permutations: default_permutations(),
            retries: default_retries(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.endpoint.trim().is_empty() {
            return Err(ConfigError::EmptyEndpoint);
        }
        if self.batch_size == 0 {
            return Err(ConfigError::ZeroBatch);
        }
        if self.n_permutations == 0 {
            return Err(ConfigError::ZeroPermutations);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    Tcp(String),
    Stdio(Vec<String>),
}

impl Endpoint {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let text = text.trim();
        if let Some(cmd) = text.strip_prefix("stdio:") {
            let parts: Vec<String> = cmd.split_whitespace().map(str::to_string).collect();
            if parts.is_empty() {
                return Err(ConfigError::EmptyEndpoint);
            }
            return Ok(Endpoint::Stdio(parts));
        }
        let addr = text.strip_prefix("tcp://").unwrap_or(text);
        if addr.is_empty() {
            return Err(ConfigError::EmptyEndpoint);
        }
        Ok(Endpoint::Tcp(addr.to_string()))
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Tcp(a) => write!(f, "tcp://{a}"),
            Endpoint::Stdio(cmd) => write!(f, "stdio:{}", cmd.join(" ")),
        }
    }
}

/// A line-oriented duplex connection.
pub struct Connection {
    reader: BufReader<Box<dyn Read + Send>>,
    writer: Box<dyn Write + Send>,
    child: Option<Child>,
}

impl Connection {
    pub fn open(endpoint: &Endpoint, timeout: Duration) -> io::Result<Self> {
        match endpoint {
            Endpoint::Tcp(addr) => {
                let mut last_err = io::Error::new(io::ErrorKind::NotFound, format!("{addr} did not resolve"));
                for sock in addr.to_socket_addrs()? {
                    match TcpStream::connect_timeout(&sock, timeout) {
                        Ok(stream) => {
                            stream.set_read_timeout(Some(timeout))?;
                            stream.set_write_timeout(Some(timeout))?;
                            stream.set_nodelay(true)?;
                            let reader: Box<dyn Read + Send> = Box::new(stream.try_clone()?);
                            return Ok(Self { reader: BufReader::new(reader), writer: Box::new(stream), child: None });
                        }
                        Err(e) => last_err = e,
                    }
                }
                Err(last_err)
            }
            Endpoint::Stdio(cmd) => {
                let mut child = Command::new(&cmd[0])
                    .args(&cmd[1..])
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()?;
                let stdin = child.stdin.take().expect("piped stdin");
                let stdout = child.stdout.take().expect("piped stdout");
                Ok(Self { reader: BufReader::new(Box::new(stdout)), writer: Box::new(stdin), child: Some(child) })
            }
        }
    }

    pub fn send_line(&mut self, line: &str) -> io::Result<()> {
        self.writer.write_all(line.as_bytes())?;
        self.writer.flush()
    }

    /// Reads one response line; end of stream is an error.
    pub fn read_line(&mut self) -> io::Result<String> {
        let mut line = String::new();
        let n = self.reader.read_line(&mut line)?;
        if n == 0 {
            return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "connection closed"));
        }
        Ok(line)
    }

    pub fn round_trip(&mut self, line: &str) -> io::Result<String> {
        self.send_line(line)?;
        self.read_line()
    }
}

impl Drop for Connection {
    fn drop(&mut self) {
        if let Some(child) = &mut self.child {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

fn is_timeout(e: &io::Error) -> bool {
    matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Client for an external in-context model.
pub struct RemoteClient {
    options: RemoteOptions,
    endpoint: Endpoint,
    n_classes: usize,
    conn: Option<Connection>,
    next_id: u64,
    max_context: usize,
    max_batch: usize,
    records_sent: u64,
}

impl RemoteClient {
    /// Connects and performs the handshake.
    pub fn connect(options: RemoteOptions, n_classes: usize) -> Result<Self, PredictError> {
        let endpoint = Endpoint::parse(&options.endpoint).map_err(|e| PredictError::RemoteUnavailable {
            endpoint: options.endpoint.clone(),
            reason: e.to_string(),
        })?;
        let mut client = Self {
            options,
            endpoint,
            n_classes,
            conn: None,
            next_id: 1,
            max_context: usize::MAX,
            max_batch: usize::MAX,
            records_sent: 0,
        };
        client.reconnect()?;
        Ok(client)
    }

    fn timeout(&self) -> Duration {
        Duration::from_millis(self.options.timeout_ms.max(1))
    }

    fn unavailable(&self, reason: impl fmt::Display) -> PredictError {
        PredictError::RemoteUnavailable { endpoint: self.endpoint.to_string(), reason: reason.to_string() }
    }

    fn reconnect(&mut self) -> Result<(), PredictError> {
        self.conn = None;
        let mut conn = Connection::open(&self.endpoint, self.timeout()).map_err(|e| self.unavailable(e))?;
        let reply = conn.round_trip(&to_line(&Request::Hello { protocol: PROTOCOL_VERSION })).map_err(|e| {
            if is_timeout(&e) {
                PredictError::Timeout(self.options.timeout_ms)
            } else {
                self.unavailable(e)
            }
        })?;
        self.records_sent += 1;
        let hello: HelloResponse = serde_json::from_str(&reply)
            .map_err(|e| PredictError::RemoteProtocol(format!("bad handshake reply: {e}")))?;
        if !hello.ok || hello.protocol != PROTOCOL_VERSION {
            return Err(PredictError::RemoteProtocol(format!(
                "server refused protocol {PROTOCOL_VERSION} (ok={}, protocol={})",
                hello.ok, hello.protocol
            )));
        }
        if hello.max_batch == 0 || hello.max_context == 0 {
            return Err(PredictError::RemoteProtocol("server advertised zero limits".into()));
        }
        self.max_context = hello.max_context;
        self.max_batch = hello.max_batch;
        self.conn = Some(conn);
        Ok(())
    }

    pub fn max_context(&self) -> usize {
        self.max_context
    }

    pub fn max_batch(&self) -> usize {
        self.max_batch
    }

    /// Records written to the wire so far, handshakes included.
    pub fn records_sent(&self) -> u64 {
        self.records_sent
    }

    /// Sends one record, reconnecting and resending on transport failure.
    fn exchange(&mut self, line: &str) -> Result<String, PredictError> {
        let mut attempts = 0;
        loop {
            if self.conn.is_none() {
                self.reconnect()?;
            }
            let conn = self.conn.as_mut().expect("connected");
            self.records_sent += 1;
            match conn.round_trip(line) {
                Ok(reply) => return Ok(reply),
                Err(e) if is_timeout(&e) => {
                    self.conn = None;
                    return Err(PredictError::Timeout(self.options.timeout_ms));
                }
                Err(e) => {
                    self.conn = None;
                    attempts += 1;
                    if attempts > self.options.retries {
                        return Err(self.unavailable(e));
                    }
                    log::warn!("remote transport failure ({e}); retry {attempts}");
                }
            }
        }
    }

    fn predict_chunk(
        &mut self,
        context: &WireContext,
        n_features: usize,
        chunk: &[Query],
    ) -> Result<Vec<ClassDistribution>, PredictError> {
        let id = self.next_id;
        self.next_id += 1;
        let body = PredictBody {
            id,
            schema: WireSchema { n_features, n_classes: self.n_classes },
            context: context.clone(),
            queries: chunk.iter().map(|q| q.features.to_vec()).collect(),
            n_permutations: self.options.n_permutations,
            seed: splitmix64(self.options.seed ^ chunk[0].arrival_index),
        };
        let reply = self.exchange(&to_line(&Request::Predict(body)))?;
        let resp: PredictResponse = serde_json::from_str(&reply)
            .map_err(|e| PredictError::RemoteProtocol(format!("unparsable response: {e}")))?;
        if resp.id != Some(id) {
            return Err(PredictError::RemoteProtocol(format!(
                "response id {:?} does not echo request id {id}",
                resp.id
            )));
        }
        if !resp.ok {
            return Err(PredictError::RemoteProtocol(resp.error.unwrap_or_else(|| "unspecified error".into())));
        }
        let proba = resp.proba.ok_or_else(|| PredictError::RemoteProtocol("success response without proba".into()))?;
        if proba.len() != chunk.len() {
            return Err(PredictError::RemoteProtocol(format!(
                "{} distributions for {} queries",
                proba.len(),
                chunk.len()
            )));
        }
        proba
            .into_iter()
            .map(|row| {
                if row.len() != self.n_classes {
                    return Err(PredictError::RemoteProtocol(format!(
                        "distribution over {} classes, expected {}",
                        row.len(),
                        self.n_classes
                    )));
                }
                ClassDistribution::new(row).map_err(|e| PredictError::RemoteProtocol(e.to_string()))
            })
            .collect()
    }
}

impl Predictor for RemoteClient {
    fn name(&self) -> String {
        format!("remote({})", self.endpoint)
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn batch_size(&self) -> usize {
        self.options.batch_size.min(self.max_batch)
    }

    fn predict(&mut self, ctx: &Context, queries: &[Query]) -> Result<Vec<ClassDistribution>, PredictError> {
        if queries.is_empty() {
            return Ok(Vec::new());
        }
        if ctx.is_empty() {
            return Ok(uniform_batch(self.n_classes, queries.len()));
        }
        if ctx.len() > self.max_context {
            return Err(PredictError::ContextTooLarge { size: ctx.len(), max: self.max_context });
        }
        let n_features = ctx.examples()[0].features.len();
        if let Some(q) = queries.iter().find(|q| q.features.len() != n_features) {
            return Err(PredictError::FeatureMismatch { expected: n_features, actual: q.features.len() });
        }
        let context = WireContext {
            x: ctx.examples().iter().map(|e| e.features.to_vec()).collect(),
            y: ctx.examples().iter().map(|e| e.label).collect(),
        };
        let mut out = Vec::with_capacity(queries.len());
        for chunk in queries.chunks(self.batch_size()) {
            out.extend(self.predict_chunk(&context, n_features, chunk)?);
        }
        Ok(out)
    }
}
