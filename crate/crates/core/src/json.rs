//! JSON interchange format for netlists.
//!
//! ```json
//! { "name": "c17", "inputs": ["1"], "outputs": ["22"], "key_inputs": [],
//!   "gates": [{"id": "g0", "type": "NAND", "inputs": ["1", "3"], "output": "10", "label": "m"}] }
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{Gate, GateType, Netlist, NetlistError};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NetlistDoc {
    pub name: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub key_inputs: Vec<String>,
    pub gates: Vec<GateDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GateDoc {
    pub id: String,
    #[serde(rename = "type")]
    pub kind: String,
    pub inputs: Vec<String>,
    pub output: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Error)]
pub enum JsonError {
    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error(transparent)]
    Netlist(#[from] NetlistError),
}

impl From<&Netlist> for NetlistDoc {
    fn from(n: &Netlist) -> Self {
        NetlistDoc {
            name: n.name().to_string(),
            inputs: n.inputs().to_vec(),
            outputs: n.outputs().to_vec(),
            key_inputs: n.key_inputs().to_vec(),
            gates: n
                .gates()
                .iter()
                .map(|g| GateDoc {
                    id: g.id.clone(),
                    kind: g.kind.name().to_string(),
                    inputs: g.inputs.clone(),
                    output: g.output.clone(),
                    label: n.labels().get(&g.id).cloned(),
                })
                .collect(),
        }
    }
}

impl NetlistDoc {
    pub fn into_netlist(self) -> Result<Netlist, JsonError> {
        let mut labels = BTreeMap::new();
        let mut gates = Vec::with_capacity(self.gates.len());
        for (i, g) in self.gates.into_iter().enumerate() {
            let kind: GateType = g.kind.parse().map_err(|e: crate::netlist::UnknownGateType| JsonError::Schema {
                path: format!("gates[{i}].type"),
                message: e.to_string(),
            })?;
            if let Some(label) = g.label {
                labels.insert(g.id.clone(), label);
            }
            gates.push(Gate::new(g.id, kind, g.inputs, g.output));
        }
        let n = Netlist::new(self.name, self.inputs, self.outputs, gates)?;
        Ok(n.with_key_inputs(self.key_inputs)?.with_labels(labels))
    }
}

pub fn parse_json(text: &str) -> Result<Netlist, JsonError> {
    parse_json_value(text)?.into_netlist()
}

pub(crate) fn parse_json_value(text: &str) -> Result<NetlistDoc, JsonError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| JsonError::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

pub fn emit_json(n: &Netlist) -> String {
    serde_json::to_string_pretty(&NetlistDoc::from(n)).expect("netlist documents always serialize")
}
