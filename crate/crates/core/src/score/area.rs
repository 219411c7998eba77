use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{GateType, Netlist};

/// Per-type cell areas in arbitrary units. Serialized as `{"INV": 0.5, ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellAreaTable(pub BTreeMap<GateType, f64>);

impl Default for CellAreaTable {
    fn default() -> Self {
        use GateType::*;
        CellAreaTable(
            [
                (Inv, 0.5),
                (Buf, 0.5),
                (Nand, 0.8),
                (Nor, 0.8),
                (And, 1.0),
                (Or, 1.0),
                (Xor, 1.5),
                (Xnor, 1.5),
                (Const0, 0.0),
                (Const1, 0.0),
            ]
            .into(),
        )
    }
}

impl CellAreaTable {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn price(&self, kind: GateType, arity: usize) -> Result<f64, AreaError> {
        let base = *self.0.get(&kind).ok_or(AreaError::Unpriced(kind))?;
        Ok(if arity > 2 { base * (arity - 1) as f64 } else { base })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AreaError {
    #[error("no area for gate type {0}")]
    Unpriced(GateType),
}

/// Sum of cell prices; an n-input gate costs (n − 1) two-input cells.
pub fn area(n: &Netlist, table: &CellAreaTable) -> Result<f64, AreaError> {
    n.gates().iter().map(|g| table.price(g.kind, g.inputs.len())).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::parse_bench;

    #[test]
    fn single_nand() {
        let n = parse_bench("t", "INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = NAND(a, b)\n").unwrap();
        assert_eq!(area(&n, &CellAreaTable::default()).unwrap(), 0.8);
    }

    #[test]
    fn empty_netlist() {
        let n = parse_bench("t", "INPUT(a)\nOUTPUT(a)\n").unwrap();
        assert_eq!(area(&n, &CellAreaTable::default()).unwrap(), 0.0);
    }

    #[test]
    fn wide_gates_scale_with_arity() {
        let n = parse_bench("t", "INPUT(a)\nINPUT(b)\nINPUT(c)\nINPUT(d)\nOUTPUT(y)\ny = XOR(a, b, c, d)\n").unwrap();
        assert_eq!(area(&n, &CellAreaTable::default()).unwrap(), 4.5);
    }

    #[test]
    fn c17_default_area() {
        // six 2-input NANDs at 0.8
        let n = parse_bench("c17", include_str!("../../tests/fixtures/c17.bench")).unwrap();
        assert!((area(&n, &CellAreaTable::default()).unwrap() - 4.8).abs() < 1e-12);
    }

    #[test]
    fn unpriced_type() {
        let table = CellAreaTable::from_json(r#"{"INV": 0.5}"#).unwrap();
        let n = parse_bench("t", "INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = NAND(a, b)\n").unwrap();
        assert_eq!(area(&n, &table).unwrap_err(), AreaError::Unpriced(GateType::Nand));
    }
}
