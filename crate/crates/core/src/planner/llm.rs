//! JSON plan protocol spoken with an external language model.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{validate_plan, Mapping, PlanContext, PlanError, Planner, PlanningOrder, Provenance, RewritePlan};

pub const SYSTEM_PROMPT: &str = "You plan function-preserving rewrites of a gate-level netlist. \
Each request lists a candidate gate pool with features, the allowed mapping codes, a hop range, \
the order in which to decide gate selection (L), mapping (M) and hop size (H), and past iterations \
with their security score and area overhead. Choose exactly n_gates gate ids from the pool, one \
mapping code and one hop size shared by all of them. Mapping compositions: C01 INV,NAND,BUF; \
C02 INV,NOR,BUF; C03 INV,NAND,LOGIC,BUF; C04 INV,NAND,AND,BUF; C05 INV,NAND,OR,BUF; \
C06 INV,NAND,XOR,BUF; C07 INV,NAND,XNOR,BUF; C08 INV,NOR,LOGIC,BUF; C09 INV,NOR,AND,BUF; \
C10 INV,NOR,OR,BUF; C11 INV,NOR,XOR,BUF; C12 INV,NOR,XNOR,BUF; C13 INV,AND,OR,BUF; \
C14 INV,AND,OR,LOGIC,BUF; C15 INV,AND,OR,XOR,BUF; C16 INV,AND,OR,XNOR,BUF; \
C17 INV,NAND,LOGIC,XOR,BUF; C18 INV,NAND,LOGIC,XNOR,BUF; C19 INV,NOR,LOGIC,XOR,BUF; \
C20 INV,NOR,LOGIC,XNOR,BUF. Reply with a single JSON object only: \
{\"gates\": [ids], \"mapping\": \"Cxx\", \"hop\": integer, \"rationale\": string}.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolItem {
    pub id: String,
    #[serde(rename = "type")]
    pub kind: String,
    pub fanin: usize,
    pub fanout: usize,
    pub level: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryItem {
    pub iter: usize,
    pub mapping: Mapping,
    pub hop: u32,
    pub security: f64,
    pub area_overhead: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRequest {
    pub pool: Vec<PoolItem>,
    pub mappings: Vec<Mapping>,
    pub hop_range: [u32; 2],
    pub order: PlanningOrder,
    pub history: Vec<HistoryItem>,
    pub tool: String,
    pub n_gates: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanReply {
    pub gates: Vec<String>,
    pub mapping: String,
    pub hop: i64,
    #[serde(default)]
    pub rationale: Option<String>,
}

/// The request document for `ctx`. Deterministic byte-for-byte.
pub fn build_request(ctx: &PlanContext, order: PlanningOrder) -> String {
    let req = PlanRequest {
        pool: ctx
            .pool
            .iter()
            .map(|p| PoolItem {
                id: p.id.clone(),
                kind: p.features.gate_type.name().to_string(),
                fanin: p.features.fanin,
                fanout: p.features.fanout,
                level: p.features.level,
            })
            .collect(),
        mappings: Mapping::all().collect(),
        hop_range: [ctx.hop_range.0, ctx.hop_range.1],
        order,
        history: ctx
            .history
            .iter()
            .map(|h| HistoryItem {
                iter: h.iter,
                mapping: h.mapping,
                hop: h.hop,
                security: h.security,
                area_overhead: h.area_overhead,
            })
            .collect(),
        tool: ctx.tool.tool_tag().to_string(),
        n_gates: ctx.effective_n(),
        feedback: ctx.feedback.clone(),
    };
    serde_json::to_string(&req).expect("request serializes")
}

// Models often wrap JSON in a fenced block or surround it with prose.
fn extract_object(raw: &str) -> &str {
    match (raw.find('{'), raw.rfind('}')) {
        (Some(a), Some(b)) if a < b => &raw[a..=b],
        _ => raw.trim(),
    }
}

/// Parses and validates a reply against `ctx`.
pub fn parse_reply(raw: &str, ctx: &PlanContext, order: PlanningOrder) -> Result<RewritePlan, PlanError> {
    let schema = |message: String| PlanError::Schema { message, raw: raw.to_string() };
    let reply: PlanReply = serde_json::from_str(extract_object(raw)).map_err(|e| schema(e.to_string()))?;
    let mapping: Mapping = reply.mapping.parse().map_err(schema)?;
    let (lo, hi) = ctx.hop_range;
    if reply.hop < lo as i64 || reply.hop > hi as i64 {
        return Err(PlanError::HopRange { hop: reply.hop, lo, hi, raw: raw.to_string() });
    }
    let plan = RewritePlan {
        gates: reply.gates,
        mapping,
        hop: reply.hop as u32,
        order,
        provenance: Provenance::Llm,
        revision: 0,
    };
    validate_plan(&plan, ctx).map_err(|e| with_raw(e, raw))?;
    Ok(plan)
}

fn with_raw(e: PlanError, raw: &str) -> PlanError {
    let raw = raw.to_string();
    match e {
        PlanError::Transport { message, .. } => PlanError::Transport { message, raw },
        PlanError::Schema { message, .. } => PlanError::Schema { message, raw },
        PlanError::OutOfPool { gate, .. } => PlanError::OutOfPool { gate, raw },
        PlanError::HopRange { hop, lo, hi, .. } => PlanError::HopRange { hop, lo, hi, raw },
        PlanError::GateCount { got, expected, .. } => PlanError::GateCount { got, expected, raw },
        PlanError::EmptyPool => PlanError::EmptyPool,
    }
}

/// Carries one request document to a model and returns its raw reply text.
pub trait PlanTransport {
    fn complete(&mut self, request: &str) -> Result<String, String>;
}

/// Replays canned replies in order and records every request.
#[derive(Debug, Clone, Default)]
pub struct ScriptedTransport {
    replies: Vec<String>,
    next: usize,
    pub requests: Vec<String>,
}

impl ScriptedTransport {
    pub fn new<I: IntoIterator<Item = S>, S: Into<String>>(replies: I) -> Self {
        ScriptedTransport { replies: replies.into_iter().map(Into::into).collect(), next: 0, requests: Vec::new() }
    }
}

impl PlanTransport for ScriptedTransport {
    fn complete(&mut self, request: &str) -> Result<String, String> {
        self.requests.push(request.to_string());
        let reply = self.replies.get(self.next).cloned().ok_or_else(|| "script exhausted".to_string());
        self.next += 1;
        reply
    }
}

/// OpenAI-compatible chat-completions client.
pub struct HttpTransport {
    url: String,
    model: String,
    api_key: Option<String>,
    pub temperature: f64,
    pub max_tokens: u32,
    agent: ureq::Agent,
    log: Option<PathBuf>,
}

impl std::fmt::Debug for HttpTransport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpTransport").field("url", &self.url).field("model", &self.model).finish()
    }
}

impl HttpTransport {
    pub const ENV_ENDPOINT: &'static str = "NETMORPH_LLM_ENDPOINT";
    pub const ENV_MODEL: &'static str = "NETMORPH_LLM_MODEL";
    pub const ENV_API_KEY: &'static str = "NETMORPH_LLM_API_KEY";

    pub fn new(endpoint: &str, model: &str, api_key: Option<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .http_status_as_error(false)
            .build()
            .into();
        HttpTransport {
            url: format!("{}/chat/completions", endpoint.trim_end_matches('/')),
            model: model.to_string(),
            api_key,
            temperature: 0.8,
            max_tokens: 2048,
            agent,
            log: None,
        }
    }

    /// Reads endpoint, model and key from the environment.
    pub fn from_env() -> Option<Self> {
        let endpoint = std::env::var(Self::ENV_ENDPOINT).ok()?;
        let model = std::env::var(Self::ENV_MODEL).unwrap_or_else(|_| "gpt-4o".to_string());
        Some(Self::new(&endpoint, &model, std::env::var(Self::ENV_API_KEY).ok()))
    }

    /// Appends each request/reply pair to `path` as one JSON line.
    pub fn with_transcript(mut self, path: impl Into<PathBuf>) -> Self {
        self.log = Some(path.into());
        self
    }

    fn record(&self, request: &str, reply: &Result<String, String>) {
        let Some(path) = &self.log else { return };
        let line = serde_json::json!({
            "request": request,
            "reply": reply.as_ref().ok(),
            "error": reply.as_ref().err(),
        });
        if let Ok(mut f) = OpenOptions::new().create(true).append(true).open(path) {
            let _ = writeln!(f, "{line}");
        }
    }
}

impl PlanTransport for HttpTransport {
    fn complete(&mut self, request: &str) -> Result<String, String> {
        let body = serde_json::json!({
            "model": self.model,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
            "response_format": {"type": "json_object"},
            "messages": [
                {"role": "system", "content": SYSTEM_PROMPT},
                {"role": "user", "content": request},
            ],
        });
        let mut req = self.agent.post(&self.url).header("content-type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("authorization", &format!("Bearer {key}"));
        }
        let result = req.send(body.to_string()).map_err(|e| e.to_string()).and_then(|mut resp| {
            let status = resp.status();
            let text = resp.body_mut().read_to_string().map_err(|e| e.to_string())?;
            if !status.is_success() {
                return Err(format!("HTTP {status}: {text}"));
            }
            let v: Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
            v.pointer("/choices/0/message/content")
                .and_then(Value::as_str)
                .map(str::to_string)
                .ok_or_else(|| format!("no message content in {text}"))
        });
        self.record(request, &result);
        result
    }
}

#[derive(Debug, Clone)]
pub struct LlmPlanner<T> {
    transport: T,
}

impl<T: PlanTransport> LlmPlanner<T> {
    pub fn new(transport: T) -> Self {
        LlmPlanner { transport }
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }
}

impl<T: PlanTransport> Planner for LlmPlanner<T> {
    fn plan(&mut self, ctx: &PlanContext, order: PlanningOrder) -> Result<RewritePlan, PlanError> {
        if ctx.pool.is_empty() {
            return Err(PlanError::EmptyPool);
        }
        let request = build_request(ctx, order);
        let raw = self.transport.complete(&request).map_err(|message| PlanError::Transport { message, raw: String::new() })?;
        parse_reply(&raw, ctx, order)
    }
}

#[cfg(test)]
mod tests {
    use super::super::test_support::pool;
    use super::*;
    use crate::score::ScorerKind;

    #[test]
    fn valid_reply() {
        let ctx = PlanContext::new(pool(6), ScorerKind::Similarity);
        let raw = r#"{"gates":["g0","g1","g2","g3","g4"],"mapping":"C07","hop":3}"#;
        let plan = parse_reply(raw, &ctx, PlanningOrder::Lmh).unwrap();
        assert_eq!(plan.mapping.code(), "C07");
        assert_eq!(plan.hop, 3);
        assert_eq!(plan.provenance, Provenance::Llm);
    }

    #[test]
    fn fenced_reply_is_accepted() {
        let ctx = PlanContext::new(pool(2), ScorerKind::Similarity);
        let raw = "```json\n{\"gates\":[\"g1\",\"g0\"],\"mapping\":\"C13\",\"hop\":2,\"rationale\":\"x\"}\n```";
        assert_eq!(parse_reply(raw, &ctx, PlanningOrder::Lmh).unwrap().gates, vec!["g1", "g0"]);
    }

    #[test]
    fn reply_errors_carry_raw_payload() {
        let ctx = PlanContext::new(pool(6), ScorerKind::Similarity);
        let hop25 = r#"{"gates":["g0","g1","g2","g3","g4"],"mapping":"C07","hop":25}"#;
        let e = parse_reply(hop25, &ctx, PlanningOrder::Lmh).unwrap_err();
        assert!(matches!(e, PlanError::HopRange { hop: 25, .. }));
        assert_eq!(e.raw(), hop25);
        let e = parse_reply("sure, here is a plan", &ctx, PlanningOrder::Lmh).unwrap_err();
        assert!(matches!(e, PlanError::Schema { .. }));
        let bad_code = r#"{"gates":["g0","g1","g2","g3","g4"],"mapping":"C31","hop":2}"#;
        assert!(matches!(parse_reply(bad_code, &ctx, PlanningOrder::Lmh), Err(PlanError::Schema { .. })));
        let foreign = r#"{"gates":["g0","g1","g2","g3","q"],"mapping":"C01","hop":2}"#;
        let e = parse_reply(foreign, &ctx, PlanningOrder::Lmh).unwrap_err();
        assert!(matches!(e, PlanError::OutOfPool { .. }));
        assert_eq!(e.raw(), foreign);
    }

    #[test]
    fn request_fields() {
        let mut ctx = PlanContext::new(pool(2), ScorerKind::KeyAccuracy);
        let v: Value = serde_json::from_str(&build_request(&ctx, PlanningOrder::Mhl)).unwrap();
        assert_eq!(v["tool"], "omla");
        assert_eq!(v["order"], "MHL");
        assert_eq!(v["hop_range"], serde_json::json!([1, 20]));
        assert_eq!(v["mappings"].as_array().unwrap().len(), 20);
        assert_eq!(v["pool"][0]["type"], "NAND");
        assert!(v.get("feedback").is_none());
        ctx.feedback = Some("hop out of range".into());
        let v: Value = serde_json::from_str(&build_request(&ctx, PlanningOrder::Mhl)).unwrap();
        assert_eq!(v["feedback"], "hop out of range");
    }
}
