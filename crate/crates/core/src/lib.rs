//! Function-preserving adversarial rewriting of gate-level netlists.
//!
//! The crate closes a loop around a black-box structural detector: gates are
//! binned by local features, a REINFORCE bandit samples candidate pools from
//! the bins, a planner picks target gates, a restricted gate basis and a hop
//! radius, the hop-bounded region is resynthesized into that basis, the result
//! is checked for equivalence against the original design, and the detector's
//! new score feeds the next round.

pub mod bench;
pub mod features;
pub mod hash;
pub mod json;
pub mod netlist;
pub mod orchestrate;
pub mod planner;
pub mod policy;
pub mod rewrite;
pub mod score;
pub mod subnetlist;
pub mod verify;
pub mod wl;

pub use bench::{emit_bench, parse_bench, BenchError};
pub use hash::structural_hash;
pub use json::{emit_json, parse_json, JsonError};
pub use netlist::{Gate, GateType, Netlist, NetlistError};
