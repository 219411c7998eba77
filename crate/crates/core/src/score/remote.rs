//! HTTP client for an external scoring service.
//!
//! `POST {endpoint}/score` with the JSON netlist plus `"kind"`; the reply is
//! `{"kind": str, "security": number}`.

use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{checked, ScoreError, Scorer, ScorerKind};
use crate::json::NetlistDoc;
use crate::netlist::Netlist;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRequest {
    #[serde(flatten)]
    pub netlist: NetlistDoc,
    pub kind: ScorerKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReply {
    pub kind: String,
    pub security: f64,
}

/// Caps concurrent requests across clones of one client.
#[derive(Debug)]
struct Limiter {
    in_flight: Mutex<usize>,
    freed: Condvar,
    max: usize,
}

impl Limiter {
    fn acquire(&self) {
        let mut n = self.in_flight.lock().unwrap();
        while *n >= self.max {
            n = self.freed.wait(n).unwrap();
        }
        *n += 1;
    }

    fn release(&self) {
        *self.in_flight.lock().unwrap() -= 1;
        self.freed.notify_one();
    }
}

#[derive(Clone)]
pub struct RemoteScorer {
    url: String,
    kind: ScorerKind,
    agent: ureq::Agent,
    limiter: Arc<Limiter>,
    transcript: Arc<Mutex<Vec<(String, String)>>>,
}

impl std::fmt::Debug for RemoteScorer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RemoteScorer").field("url", &self.url).field("kind", &self.kind).finish()
    }
}

impl RemoteScorer {
    pub fn new(endpoint: &str, kind: ScorerKind) -> Self {
        Self::with_options(endpoint, kind, Duration::from_secs(60), 4)
    }

    pub fn with_options(endpoint: &str, kind: ScorerKind, timeout: Duration, max_in_flight: usize) -> Self {
        let agent: ureq::Agent =
            ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build().into();
        RemoteScorer {
            url: format!("{}/score", endpoint.trim_end_matches('/')),
            kind,
            agent,
            limiter: Arc::new(Limiter { in_flight: Mutex::new(0), freed: Condvar::new(), max: max_in_flight.max(1) }),
            transcript: Arc::default(),
        }
    }

    pub fn request_body(n: &Netlist, kind: ScorerKind) -> String {
        serde_json::to_string(&ScoreRequest { netlist: NetlistDoc::from(n), kind }).expect("request serializes")
    }

    /// Request/response bodies exchanged so far.
    pub fn transcript(&self) -> Vec<(String, String)> {
        self.transcript.lock().unwrap().clone()
    }

    fn post(&self, body: &str) -> Result<String, ScoreError> {
        self.limiter.acquire();
        let result = self
            .agent
            .post(&self.url)
            .header("content-type", "application/json")
            .send(body)
            .map_err(|e| ScoreError::Transport(e.to_string()))
            .and_then(|mut resp| {
                let status = resp.status();
                let text = resp.body_mut().read_to_string().map_err(|e| ScoreError::Transport(e.to_string()))?;
                if status.is_success() {
                    Ok(text)
                } else {
                    Err(ScoreError::Transport(format!("HTTP {status}: {text}")))
                }
            });
        self.limiter.release();
        result
    }

    pub fn parse_reply(&self, text: &str) -> Result<f64, ScoreError> {
        let reply: ScoreReply = serde_json::from_str(text).map_err(|e| ScoreError::Schema(e.to_string()))?;
        if reply.kind != self.kind.wire_name() {
            return Err(ScoreError::KindMismatch { expected: self.kind, got: reply.kind });
        }
        checked(self.kind, reply.security)
    }
}

impl Scorer for RemoteScorer {
    fn kind(&self) -> ScorerKind {
        self.kind
    }

    fn score(&mut self, n: &Netlist) -> Result<f64, ScoreError> {
        let body = Self::request_body(n, self.kind);
        let text = self.post(&body)?;
        self.transcript.lock().unwrap().push((body, text.clone()));
        self.parse_reply(&text)
    }
}
