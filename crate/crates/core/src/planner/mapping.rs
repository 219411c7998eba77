//! The twenty predefined target compositions (C01–C20).

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::netlist::GateType;

/// One element of a composition. `Logic` admits complex AND/OR logic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Element {
    Gate(GateType),
    Logic,
}

use Element::{Gate as G, Logic as L};
use GateType::{And, Buf, Inv, Nand, Nor, Or, Xnor, Xor};

const TABLE: [&[Element]; 20] = [
    &[G(Inv), G(Nand), G(Buf)],
    &[G(Inv), G(Nor), G(Buf)],
    &[G(Inv), G(Nand), L, G(Buf)],
    &[G(Inv), G(Nand), G(And), G(Buf)],
    &[G(Inv), G(Nand), G(Or), G(Buf)],
    &[G(Inv), G(Nand), G(Xor), G(Buf)],
    &[G(Inv), G(Nand), G(Xnor), G(Buf)],
    &[G(Inv), G(Nor), L, G(Buf)],
    &[G(Inv), G(Nor), G(And), G(Buf)],
    &[G(Inv), G(Nor), G(Or), G(Buf)],
    &[G(Inv), G(Nor), G(Xor), G(Buf)],
    &[G(Inv), G(Nor), G(Xnor), G(Buf)],
    &[G(Inv), G(And), G(Or), G(Buf)],
    &[G(Inv), G(And), G(Or), L, G(Buf)],
    &[G(Inv), G(And), G(Or), G(Xor), G(Buf)],
    &[G(Inv), G(And), G(Or), G(Xnor), G(Buf)],
    &[G(Inv), G(Nand), L, G(Xor), G(Buf)],
    &[G(Inv), G(Nand), L, G(Xnor), G(Buf)],
    &[G(Inv), G(Nor), L, G(Xor), G(Buf)],
    &[G(Inv), G(Nor), L, G(Xnor), G(Buf)],
];

/// Mapping option `C01`..`C20`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Mapping(u8);

impl Mapping {
    pub const COUNT: usize = 20;

    pub fn new(number: u8) -> Option<Self> {
        (1..=20).contains(&number).then_some(Mapping(number))
    }

    pub fn all() -> impl Iterator<Item = Mapping> {
        (1..=20).map(Mapping)
    }

    pub fn number(self) -> u8 {
        self.0
    }

    pub fn code(self) -> String {
        format!("C{:02}", self.0)
    }

    pub fn composition(self) -> &'static [Element] {
        TABLE[self.0 as usize - 1]
    }

    /// Concrete gate types permitted, with `Logic` expanded to AND and OR.
    pub fn allowed_gates(self) -> BTreeSet<GateType> {
        let mut out = BTreeSet::new();
        for e in self.composition() {
            match *e {
                G(t) => {
                    out.insert(t);
                }
                L => {
                    out.insert(And);
                    out.insert(Or);
                }
            }
        }
        out
    }

    pub fn allows(self, t: GateType) -> bool {
        self.allowed_gates().contains(&t)
    }
}

impl fmt::Display for Mapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C{:02}", self.0)
    }
}

impl FromStr for Mapping {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.strip_prefix(['C', 'c'])
            .and_then(|d| d.parse::<u8>().ok())
            .and_then(Mapping::new)
            .ok_or_else(|| format!("unknown mapping `{s}`"))
    }
}

impl Serialize for Mapping {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.code())
    }
}

impl<'de> Deserialize<'de> for Mapping {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
