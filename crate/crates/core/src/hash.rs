//! Renaming- and order-invariant structural digest, used to compare netlists
//! in tests.

use std::collections::HashMap;

use crate::netlist::{GateType, Netlist};

/// splitmix64 finalizer.
pub(crate) fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn combine(acc: u64, v: u64) -> u64 {
    mix(acc ^ v.rotate_left(17)).wrapping_add(v)
}

pub(crate) fn hash_str(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| combine(h, b as u64))
}

fn gate_tag(kind: GateType) -> u64 {
    hash_str(kind.name())
}

/// Digest that ignores net names, gate ids and gate declaration order but
/// respects PI/PO order and key-input positions. All supported gate types are
/// symmetric, so fanin hashes are sorted.
pub fn structural_hash(n: &Netlist) -> u64 {
    let mut net_hash: HashMap<&str, u64> = HashMap::new();
    for (i, pi) in n.inputs().iter().enumerate() {
        let key = n.key_inputs().contains(pi) as u64;
        net_hash.insert(pi.as_str(), combine(combine(hash_str("PI"), i as u64), key));
    }
    let order = n.topo_order().expect("structural_hash requires an acyclic netlist");
    let mut gate_hashes = Vec::with_capacity(order.len());
    for idx in order {
        let g = &n.gates()[idx];
        let mut fanin: Vec<u64> = g.inputs.iter().map(|x| net_hash[x.as_str()]).collect();
        fanin.sort_unstable();
        let h = fanin.iter().fold(gate_tag(g.kind), |acc, &f| combine(acc, f));
        net_hash.insert(g.output.as_str(), h);
        gate_hashes.push(h);
    }
    gate_hashes.sort_unstable();
    let mut acc = combine(hash_str("NETLIST"), n.inputs().len() as u64);
    for po in n.outputs() {
        acc = combine(acc, net_hash[po.as_str()]);
    }
    acc = combine(acc, gate_hashes.len() as u64);
    gate_hashes.into_iter().fold(acc, combine)
}
