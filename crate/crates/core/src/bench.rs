//! ISCAS-style `.bench` reader and writer.
//!
//! Grammar, one statement per line:
//!
//! ```text
//! INPUT(<id>)
//! OUTPUT(<id>)
//! <id> = <GATE>(<id>{, <id>})
//! # comment
//! ```
//!
//! Two comment pragmas carry data the plain format has no slot for:
//! `#@key <net>` marks a key input and `#@label <net> <module>` labels the
//! gate driving `<net>`. Inputs whose names start with `keyinput` are key
//! inputs without a pragma, following the logic-locking benchmark convention.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::netlist::{Gate, GateType, Netlist, NetlistError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BenchError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("line {line}: net `{net}` has multiple drivers")]
    MultipleDrivers { net: String, line: usize },
    #[error("net `{net}` is used but never driven")]
    Undriven { net: String },
    #[error("combinational cycle through net `{net}`")]
    Cycle { net: String },
}

const KEY_PREFIX: &str = "keyinput";

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '[' | ']' | '$' | '\\' | '/' | ':' | '-')
}

struct Cursor<'a> {
    line: &'a str,
    pos: usize,
    lineno: usize,
}

impl<'a> Cursor<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T, BenchError> {
        Err(BenchError::Syntax { line: self.lineno, column: self.pos + 1, message: message.into() })
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.line[self.pos..].chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn ident(&mut self) -> Result<&'a str, BenchError> {
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.line[self.pos..].chars().next() {
            if is_ident_char(c) {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
        if self.pos == start {
            return self.err("expected identifier");
        }
        Ok(&self.line[start..self.pos])
    }

    fn expect(&mut self, ch: char) -> Result<(), BenchError> {
        self.skip_ws();
        if self.line[self.pos..].starts_with(ch) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected `{ch}`"))
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.line[self.pos..].chars().next()
    }

    fn end(&mut self) -> Result<(), BenchError> {
        match self.peek() {
            None => Ok(()),
            Some(c) => self.err(format!("unexpected `{c}`")),
        }
    }

    fn arg_list(&mut self) -> Result<Vec<String>, BenchError> {
        self.expect('(')?;
        let mut args = Vec::new();
        if self.peek() == Some(')') {
            self.pos += 1;
            return Ok(args);
        }
        loop {
            args.push(self.ident()?.to_string());
            match self.peek() {
                Some(',') => self.pos += 1,
                Some(')') => {
                    self.pos += 1;
                    return Ok(args);
                }
                _ => return self.err("expected `,` or `)`"),
            }
        }
    }
}

/// Parses bench text. Gate ids are `g0, g1, ...` in file order.
pub fn parse_bench(name: &str, text: &str) -> Result<Netlist, BenchError> {
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();
    let mut gates = Vec::new();
    let mut key_pragmas = Vec::new();
    let mut label_pragmas: Vec<(String, String)> = Vec::new();
    let mut driver_line: HashMap<String, usize> = HashMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let trimmed = raw.trim();
        if let Some(pragma) = trimmed.strip_prefix("#@") {
            let mut parts = pragma.split_whitespace();
            match (parts.next(), parts.next(), parts.next()) {
                (Some("key"), Some(net), None) => key_pragmas.push(net.to_string()),
                (Some("label"), Some(net), Some(label)) => label_pragmas.push((net.to_string(), label.to_string())),
                _ => {}
            }
            continue;
        }
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let mut cur = Cursor { line: content, pos: 0, lineno };
        let head = cur.ident()?;
        let head_col = cur.pos - head.len() + 1;
        match cur.peek() {
            Some('(') => {
                let args = cur.arg_list()?;
                cur.end()?;
                if args.len() != 1 {
                    return Err(BenchError::Syntax {
                        line: lineno,
                        column: head_col,
                        message: format!("{head} takes exactly one net"),
                    });
                }
                let net = args.into_iter().next().unwrap();
                match head.to_ascii_uppercase().as_str() {
                    "INPUT" => {
                        if driver_line.insert(net.clone(), lineno).is_some() {
                            return Err(BenchError::MultipleDrivers { net, line: lineno });
                        }
                        inputs.push(net);
                    }
                    "OUTPUT" => outputs.push(net),
                    _ => {
                        return Err(BenchError::Syntax {
                            line: lineno,
                            column: head_col,
                            message: format!("unknown declaration `{head}`"),
                        })
                    }
                }
            }
            Some('=') => {
                cur.pos += 1;
                let kw = cur.ident()?;
                let kw_col = cur.pos - kw.len() + 1;
                let kind: GateType = kw.parse().map_err(|e: crate::netlist::UnknownGateType| BenchError::Syntax {
                    line: lineno,
                    column: kw_col,
                    message: e.to_string(),
                })?;
                let args = cur.arg_list()?;
                cur.end()?;
                if !kind.arity_ok(args.len()) {
                    return Err(BenchError::Syntax {
                        line: lineno,
                        column: kw_col,
                        message: format!("{kind} does not accept {} input(s)", args.len()),
                    });
                }
                let out = head.to_string();
                if driver_line.insert(out.clone(), lineno).is_some() {
                    return Err(BenchError::MultipleDrivers { net: out, line: lineno });
                }
                gates.push(Gate::new(format!("g{}", gates.len()), kind, args, out));
            }
            _ => return cur.err("expected `(` or `=`"),
        }
    }

    let mut keys: Vec<String> = inputs
        .iter()
        .filter(|n| n.to_ascii_lowercase().starts_with(KEY_PREFIX) || key_pragmas.contains(n))
        .cloned()
        .collect();
    keys.dedup();

    let netlist = Netlist::unchecked(name, inputs, outputs, gates);
    netlist.check().map_err(|e| match e {
        NetlistError::MultipleDrivers(net) => {
            let line = driver_line.get(&net).copied().unwrap_or(0);
            BenchError::MultipleDrivers { net, line }
        }
        NetlistError::Undriven { net, .. } => BenchError::Undriven { net },
        NetlistError::Cycle(net) => BenchError::Cycle { net },
        other => BenchError::Syntax { line: 0, column: 0, message: other.to_string() },
    })?;

    let by_output: HashMap<&str, &str> =
        netlist.gates().iter().map(|g| (g.output.as_str(), g.id.as_str())).collect();
    let labels: BTreeMap<String, String> = label_pragmas
        .iter()
        .filter_map(|(net, label)| by_output.get(net.as_str()).map(|id| (id.to_string(), label.clone())))
        .collect();
    let netlist = netlist.with_labels(labels);
    netlist.with_key_inputs(keys).map_err(|_| BenchError::Syntax {
        line: 0,
        column: 0,
        message: "key pragma names a non-input net".into(),
    })
}

/// Writes bench text. Pragmas are emitted only for key inputs that the
/// naming convention would not recover and for labelled gates.
pub fn emit_bench(n: &Netlist) -> String {
    let mut out = String::new();
    let conventional: HashSet<&str> = n
        .inputs()
        .iter()
        .filter(|x| x.to_ascii_lowercase().starts_with(KEY_PREFIX))
        .map(String::as_str)
        .collect();
    for k in n.key_inputs() {
        if !conventional.contains(k.as_str()) {
            let _ = writeln!(out, "#@key {k}");
        }
    }
    for pi in n.inputs() {
        let _ = writeln!(out, "INPUT({pi})");
    }
    for po in n.outputs() {
        let _ = writeln!(out, "OUTPUT({po})");
    }
    for g in n.gates() {
        let _ = writeln!(out, "{} = {}({})", g.output, g.kind, g.inputs.join(", "));
    }
    for g in n.gates() {
        if let Some(label) = n.labels().get(&g.id) {
            let _ = writeln!(out, "#@label {} {}", g.output, label);
        }
    }
    // NOTE: inputs named keyinput* always re-parse as keys
    out
}
