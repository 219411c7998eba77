//! Round trip through an external ABC executable.
//!
//! The region is written as bench, optimized by the configured script,
//! written back as BLIF and then covered with the mapping's gates.

use std::collections::HashMap;
use std::path::PathBuf;
use std::process::Command;

use thiserror::Error;

use super::expr::{Arena, ExprId};
use super::{emit, RewriteError, RewriteOptions};
use crate::bench::emit_bench;
use crate::netlist::Netlist;
use crate::planner::Mapping;

pub const DEFAULT_ABC_SCRIPT: &str = "strash; rewrite -z; refactor -z; resub -z";

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("synthesizer `{0}` is not available")]
    Unavailable(String),
    #[error("synthesizer exited with {status}: {stderr}")]
    Failed { status: String, stderr: String },
    #[error("cannot import synthesizer output: {0}")]
    Import(String),
    #[error("i/o: {0}")]
    Io(String),
}

#[derive(Debug, Clone)]
pub struct AbcConfig {
    pub executable: PathBuf,
    pub script: String,
}

impl Default for AbcConfig {
    fn default() -> Self {
        AbcConfig { executable: PathBuf::from("abc"), script: DEFAULT_ABC_SCRIPT.to_string() }
    }
}

pub fn abc_adapter(
    inner: &Netlist,
    mapping: Mapping,
    config: &AbcConfig,
    opts: &RewriteOptions,
) -> Result<Netlist, RewriteError> {
    let dir = tempfile::tempdir().map_err(|e| AdapterError::Io(e.to_string()))?;
    let src = dir.path().join("in.bench");
    let dst = dir.path().join("out.blif");
    std::fs::write(&src, emit_bench(inner)).map_err(|e| AdapterError::Io(e.to_string()))?;
    let script = format!("read_bench {}; {}; write_blif {}", src.display(), config.script, dst.display());
    let out = Command::new(&config.executable).arg("-c").arg(&script).output().map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            AdapterError::Unavailable(config.executable.display().to_string())
        } else {
            AdapterError::Io(e.to_string())
        }
    })?;
    if !out.status.success() {
        return Err(AdapterError::Failed {
            status: out.status.to_string(),
            stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
        }
        .into());
    }
    let blif = std::fs::read_to_string(&dst).map_err(|e| AdapterError::Import(e.to_string()))?;
    let mut arena = Arena::default();
    let roots = import_blif(&blif, inner, &mut arena)?;
    emit(inner, &mut arena, &roots, mapping, opts)
}

/// Reads a combinational BLIF whose interface matches `interface` and returns
/// one expression per primary output.
pub(crate) fn import_blif(
    text: &str,
    interface: &Netlist,
    arena: &mut Arena,
) -> Result<Vec<ExprId>, AdapterError> {
    let err = |m: String| AdapterError::Import(m);
    // join continuation lines and drop comments
    let mut lines: Vec<String> = Vec::new();
    let mut pending = String::new();
    for raw in text.lines() {
        let line = raw.split('#').next().unwrap_or("").trim_end();
        if let Some(stripped) = line.strip_suffix('\\') {
            pending.push_str(stripped);
            pending.push(' ');
            continue;
        }
        pending.push_str(line);
        if !pending.trim().is_empty() {
            lines.push(pending.trim().to_string());
        }
        pending.clear();
    }

    struct Node {
        ins: Vec<String>,
        cubes: Vec<(String, char)>,
    }
    let mut nodes: HashMap<String, Node> = HashMap::new();
    let mut current: Option<String> = None;
    for line in &lines {
        let mut toks = line.split_whitespace();
        let head = toks.next().unwrap_or("");
        if head == ".names" {
            let mut sigs: Vec<String> = toks.map(str::to_string).collect();
            let out = sigs.pop().ok_or_else(|| err(".names without signals".into()))?;
            nodes.insert(out.clone(), Node { ins: sigs, cubes: Vec::new() });
            current = Some(out);
        } else if head.starts_with('.') {
            current = None;
            if matches!(head, ".latch" | ".subckt" | ".gate") {
                return Err(err(format!("unsupported construct `{head}`")));
            }
        } else if let Some(out) = &current {
            let node = nodes.get_mut(out).expect("current node");
            let parts: Vec<&str> = line.split_whitespace().collect();
            let (mask, value) = match (node.ins.is_empty(), parts.as_slice()) {
                (true, [v]) => (String::new(), *v),
                (false, [m, v]) => (m.to_string(), *v),
                _ => return Err(err(format!("bad cube `{line}`"))),
            };
            if mask.len() != node.ins.len() || !matches!(value, "0" | "1") {
                return Err(err(format!("bad cube `{line}`")));
            }
            node.cubes.push((mask, value.chars().next().unwrap()));
        }
    }

    let mut table: HashMap<String, ExprId> =
        interface.inputs().iter().enumerate().map(|(i, pi)| (pi.clone(), arena.var(i))).collect();
    fn build(
        net: &str,
        nodes: &HashMap<String, Node>,
        table: &mut HashMap<String, ExprId>,
        arena: &mut Arena,
        depth: usize,
    ) -> Result<ExprId, AdapterError> {
        if let Some(&id) = table.get(net) {
            return Ok(id);
        }
        if depth > nodes.len() + 1 {
            return Err(AdapterError::Import(format!("cycle through `{net}`")));
        }
        let node = nodes.get(net).ok_or_else(|| AdapterError::Import(format!("undriven net `{net}`")))?;
        let mut ins = Vec::with_capacity(node.ins.len());
        for i in &node.ins {
            ins.push(build(i, nodes, table, arena, depth + 1)?);
        }
        let offset = node.cubes.first().is_some_and(|c| c.1 == '0');
        let mut sum = arena.constant(false);
        for (mask, _) in &node.cubes {
            let mut prod = arena.constant(true);
            for (c, &x) in mask.chars().zip(&ins) {
                let lit = match c {
                    '1' => x,
                    '0' => arena.not(x),
                    _ => continue,
                };
                prod = arena.and(prod, lit);
            }
            sum = arena.or(sum, prod);
        }
        let id = if offset { arena.not(sum) } else { sum };
        table.insert(net.to_string(), id);
        Ok(id)
    }
    interface.outputs().iter().map(|po| build(po, &nodes, &mut table, arena, 0)).collect()
}
