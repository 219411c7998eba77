//! Gate-level combinational netlist IR.
//!
//! A [`Netlist`] is an immutable DAG of typed gates over named nets. Every
//! constructor that can produce a value for general use validates the four
//! structural invariants (single driver, no dangling inputs, acyclic, driven
//! outputs). [`Netlist::unchecked`] exists for tooling that must inspect
//! malformed designs, such as the structural validator.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateType {
    Inv,
    Buf,
    And,
    Nand,
    Or,
    Nor,
    Xor,
    Xnor,
    Const0,
    Const1,
}

impl GateType {
    pub const ALL: [GateType; 10] = [
        GateType::Inv,
        GateType::Buf,
        GateType::And,
        GateType::Nand,
        GateType::Or,
        GateType::Nor,
        GateType::Xor,
        GateType::Xnor,
        GateType::Const0,
        GateType::Const1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GateType::Inv => "INV",
            GateType::Buf => "BUF",
            GateType::And => "AND",
            GateType::Nand => "NAND",
            GateType::Or => "OR",
            GateType::Nor => "NOR",
            GateType::Xor => "XOR",
            GateType::Xnor => "XNOR",
            GateType::Const0 => "CONST0",
            GateType::Const1 => "CONST1",
        }
    }

    pub fn arity_ok(self, n: usize) -> bool {
        match self {
            GateType::Inv | GateType::Buf => n == 1,
            GateType::Const0 | GateType::Const1 => n == 0,
            _ => n >= 2,
        }
    }

    pub fn is_constant(self) -> bool {
        matches!(self, GateType::Const0 | GateType::Const1)
    }

    /// Evaluates the gate over bit-parallel input words.
    pub fn eval_words(self, inputs: &[u64]) -> u64 {
        match self {
            GateType::Inv => !inputs[0],
            GateType::Buf => inputs[0],
            GateType::And => inputs.iter().fold(!0, |a, &b| a & b),
            GateType::Nand => !inputs.iter().fold(!0, |a, &b| a & b),
            GateType::Or => inputs.iter().fold(0, |a, &b| a | b),
            GateType::Nor => !inputs.iter().fold(0, |a, &b| a | b),
            GateType::Xor => inputs.iter().fold(0, |a, &b| a ^ b),
            GateType::Xnor => !inputs.iter().fold(0, |a, &b| a ^ b),
            GateType::Const0 => 0,
            GateType::Const1 => !0,
        }
    }
}

impl fmt::Display for GateType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown gate type `{0}`")]
pub struct UnknownGateType(pub String);

impl FromStr for GateType {
    type Err = UnknownGateType;

    /// Case-insensitive; accepts the common bench aliases `NOT` and `BUFF`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let ty = match s.to_ascii_uppercase().as_str() {
            "INV" | "NOT" => GateType::Inv,
            "BUF" | "BUFF" => GateType::Buf,
            "AND" => GateType::And,
            "NAND" => GateType::Nand,
            "OR" => GateType::Or,
            "NOR" => GateType::Nor,
            "XOR" => GateType::Xor,
            "XNOR" => GateType::Xnor,
            "CONST0" | "GND" => GateType::Const0,
            "CONST1" | "VDD" => GateType::Const1,
            _ => return Err(UnknownGateType(s.to_string())),
        };
        Ok(ty)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Gate {
    pub id: String,
    #[serde(rename = "type")]
    pub kind: GateType,
    pub inputs: Vec<String>,
    pub output: String,
}

impl Gate {
    pub fn new(id: impl Into<String>, kind: GateType, inputs: Vec<String>, output: impl Into<String>) -> Self {
        Gate { id: id.into(), kind, inputs, output: output.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetlistError {
    #[error("gate `{gate}`: {kind} does not accept {arity} input(s)")]
    Arity { gate: String, kind: GateType, arity: usize },
    #[error("duplicate gate id `{0}`")]
    DuplicateGateId(String),
    #[error("net `{0}` has multiple drivers")]
    MultipleDrivers(String),
    #[error("net `{net}` (read by `{reader}`) is not driven")]
    Undriven { net: String, reader: String },
    #[error("combinational cycle through net `{0}`")]
    Cycle(String),
}

/// Immutable combinational netlist.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Netlist {
    name: String,
    inputs: Vec<String>,
    outputs: Vec<String>,
    gates: Vec<Gate>,
    key_inputs: Vec<String>,
    labels: BTreeMap<String, String>,
}

impl Netlist {
    pub fn new(
        name: impl Into<String>,
        inputs: Vec<String>,
        outputs: Vec<String>,
        gates: Vec<Gate>,
    ) -> Result<Self, NetlistError> {
        let n = Self::unchecked(name, inputs, outputs, gates);
        n.check()?;
        Ok(n)
    }

    /// Builds a netlist without checking any invariant.
    pub fn unchecked(name: impl Into<String>, inputs: Vec<String>, outputs: Vec<String>, gates: Vec<Gate>) -> Self {
        Netlist { name: name.into(), inputs, outputs, gates, key_inputs: Vec::new(), labels: BTreeMap::new() }
    }

    /// Attaches key inputs. Key nets that are not primary inputs are rejected
    /// as undriven.
    pub fn with_key_inputs(mut self, keys: Vec<String>) -> Result<Self, NetlistError> {
        for k in &keys {
            if !self.inputs.contains(k) {
                return Err(NetlistError::Undriven { net: k.clone(), reader: "key_inputs".into() });
            }
        }
        self.key_inputs = keys;
        Ok(self)
    }

    /// Attaches gate-id → module labels. Labels on unknown ids are dropped.
    pub fn with_labels(mut self, labels: BTreeMap<String, String>) -> Self {
        let ids: HashSet<&str> = self.gates.iter().map(|g| g.id.as_str()).collect();
        self.labels = labels.into_iter().filter(|(id, _)| ids.contains(id.as_str())).collect();
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn key_inputs(&self) -> &[String] {
        &self.key_inputs
    }

    pub fn labels(&self) -> &BTreeMap<String, String> {
        &self.labels
    }

    pub fn gate(&self, id: &str) -> Option<&Gate> {
        self.gates.iter().find(|g| g.id == id)
    }

    pub fn gate_index(&self) -> HashMap<&str, usize> {
        self.gates.iter().enumerate().map(|(i, g)| (g.id.as_str(), i)).collect()
    }

    /// Maps each gate output net to the index of its driving gate.
    pub fn driver_index(&self) -> HashMap<&str, usize> {
        self.gates.iter().enumerate().map(|(i, g)| (g.output.as_str(), i)).collect()
    }

    /// For each gate, the indices of gates reading its output (one entry per
    /// distinct consumer).
    pub fn consumers(&self) -> Vec<Vec<usize>> {
        let drivers = self.driver_index();
        let mut out = vec![Vec::new(); self.gates.len()];
        for (ci, g) in self.gates.iter().enumerate() {
            for net in &g.inputs {
                if let Some(&d) = drivers.get(net.as_str()) {
                    if out[d].last() != Some(&ci) {
                        out[d].push(ci);
                    }
                }
            }
        }
        out
    }

    /// For each gate, indices of the gates driving its inputs (deduplicated,
    /// PIs omitted).
    pub fn fanin_gates(&self) -> Vec<Vec<usize>> {
        let drivers = self.driver_index();
        self.gates
            .iter()
            .map(|g| {
                let mut v: Vec<usize> = g.inputs.iter().filter_map(|n| drivers.get(n.as_str()).copied()).collect();
                v.sort_unstable();
                v.dedup();
                v
            })
            .collect()
    }

    /// Gate indices in topological order (drivers first), stable with respect
    /// to declaration order.
    pub fn topo_order(&self) -> Result<Vec<usize>, NetlistError> {
        let drivers = self.driver_index();
        let fanin: Vec<Vec<usize>> = self
            .gates
            .iter()
            .map(|g| g.inputs.iter().filter_map(|n| drivers.get(n.as_str()).copied()).collect())
            .collect();
        let mut indeg: Vec<usize> = fanin.iter().map(|f| f.len()).collect();
        let mut readers = vec![Vec::new(); self.gates.len()];
        for (i, f) in fanin.iter().enumerate() {
            for &d in f {
                readers[d].push(i);
            }
        }
        let mut ready: std::collections::BinaryHeap<std::cmp::Reverse<usize>> =
            (0..self.gates.len()).filter(|&i| indeg[i] == 0).map(std::cmp::Reverse).collect();
        let mut order = Vec::with_capacity(self.gates.len());
        while let Some(std::cmp::Reverse(i)) = ready.pop() {
            order.push(i);
            for &r in &readers[i] {
                indeg[r] -= 1;
                if indeg[r] == 0 {
                    ready.push(std::cmp::Reverse(r));
                }
            }
        }
        if order.len() != self.gates.len() {
            let stuck = (0..self.gates.len()).find(|&i| indeg[i] > 0).unwrap();
            return Err(NetlistError::Cycle(self.gates[stuck].output.clone()));
        }
        Ok(order)
    }

    /// All net names: primary inputs followed by gate outputs.
    pub fn nets(&self) -> impl Iterator<Item = &str> {
        self.inputs.iter().map(String::as_str).chain(self.gates.iter().map(|g| g.output.as_str()))
    }

    /// Validates arity, unique ids, single drivers, driven reads and
    /// acyclicity, reporting the first violation found in that order.
    pub fn check(&self) -> Result<(), NetlistError> {
        self.check_arity()?;
        self.check_connectivity()?;
        self.topo_order().map(|_| ())
    }

    pub(crate) fn check_arity(&self) -> Result<(), NetlistError> {
        for g in &self.gates {
            if !g.kind.arity_ok(g.inputs.len()) {
                return Err(NetlistError::Arity { gate: g.id.clone(), kind: g.kind, arity: g.inputs.len() });
            }
        }
        Ok(())
    }

    pub(crate) fn check_connectivity(&self) -> Result<(), NetlistError> {
        let mut ids = HashSet::new();
        for g in &self.gates {
            if !ids.insert(g.id.as_str()) {
                return Err(NetlistError::DuplicateGateId(g.id.clone()));
            }
        }
        let mut driven = HashSet::new();
        for net in self.nets() {
            if !driven.insert(net) {
                return Err(NetlistError::MultipleDrivers(net.to_string()));
            }
        }
        for g in &self.gates {
            for net in &g.inputs {
                if !driven.contains(net.as_str()) {
                    return Err(NetlistError::Undriven { net: net.clone(), reader: g.id.clone() });
                }
            }
        }
        for po in &self.outputs {
            if !driven.contains(po.as_str()) {
                return Err(NetlistError::Undriven { net: po.clone(), reader: "OUTPUT".into() });
            }
        }
        Ok(())
    }

    /// Rebuilds with new gates and the same interface, keys and (filtered)
    /// labels, validating the result.
    pub fn with_gates(&self, gates: Vec<Gate>, labels: BTreeMap<String, String>) -> Result<Netlist, NetlistError> {
        let n = Netlist::new(self.name.clone(), self.inputs.clone(), self.outputs.clone(), gates)?;
        Ok(Netlist { key_inputs: self.key_inputs.clone(), ..n }.with_labels(labels))
    }
}

/// Produces names of the form `{prefix}{k}` that avoid a taken set.
#[derive(Debug)]
pub struct NameGen<'a> {
    prefix: String,
    next: usize,
    taken: &'a HashSet<String>,
}

impl<'a> NameGen<'a> {
    pub fn new(prefix: impl Into<String>, taken: &'a HashSet<String>) -> Self {
        NameGen { prefix: prefix.into(), next: 0, taken }
    }

    pub fn fresh(&mut self) -> String {
        loop {
            let candidate = format!("{}{}", self.prefix, self.next);
            self.next += 1;
            if !self.taken.contains(&candidate) {
                return candidate;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn arity_rules() {
        assert!(GateType::Inv.arity_ok(1));
        assert!(!GateType::Inv.arity_ok(2));
        assert!(GateType::Const0.arity_ok(0));
        assert!(!GateType::Nand.arity_ok(1));
        assert!(GateType::Xor.arity_ok(9));
    }

    #[test]
    fn aliases_parse_case_insensitively() {
        assert_eq!("not".parse::<GateType>().unwrap(), GateType::Inv);
        assert_eq!("BUFF".parse::<GateType>().unwrap(), GateType::Buf);
        assert_eq!("nAnD".parse::<GateType>().unwrap(), GateType::Nand);
        assert!("MUX".parse::<GateType>().is_err());
    }

    #[test]
    fn detects_each_invariant() {
        let g = |id: &str, k, i: &[&str], o: &str| Gate::new(id, k, s(i), o);
        let multi = Netlist::new("m", s(&["a"]), s(&["a"]), vec![g("g0", GateType::Inv, &["a"], "a")]);
        assert!(matches!(multi, Err(NetlistError::MultipleDrivers(_))));
        let undriven = Netlist::new("u", s(&["a"]), s(&["y"]), vec![g("g0", GateType::Nand, &["a", "z"], "y")]);
        assert!(matches!(undriven, Err(NetlistError::Undriven { .. })));
        let cyc = Netlist::new(
            "c",
            s(&["a"]),
            s(&["y"]),
            vec![g("g0", GateType::Nand, &["a", "z"], "y"), g("g1", GateType::Inv, &["y"], "z")],
        );
        assert!(matches!(cyc, Err(NetlistError::Cycle(_))));
        let po = Netlist::new("p", s(&["a"]), s(&["q"]), vec![]);
        assert!(matches!(po, Err(NetlistError::Undriven { .. })));
    }

    #[test]
    fn xor_is_parity() {
        assert_eq!(GateType::Xor.eval_words(&[!0, !0, !0]), !0);
        assert_eq!(GateType::Xnor.eval_words(&[!0, !0, !0]), 0);
        assert_eq!(GateType::Nand.eval_words(&[!0, !0]), 0);
    }
}
