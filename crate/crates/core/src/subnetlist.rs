//! Hop-bounded regions: extraction as a standalone circuit and splicing back.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use thiserror::Error;

use crate::netlist::{Gate, NameGen, Netlist, NetlistError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SubnetlistError {
    #[error("unknown gate id `{0}`")]
    UnknownGate(String),
    #[error("hop must be at least 1")]
    ZeroHop,
    #[error("no seed gates given")]
    NoSeeds,
    #[error("replacement {side} {got:?} do not match boundary {expected:?}")]
    BoundaryMismatch { side: &'static str, expected: Vec<String>, got: Vec<String> },
    #[error("reinsertion would create a combinational cycle through `{0}`")]
    Cycle(String),
    #[error(transparent)]
    Netlist(NetlistError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subnetlist {
    pub region: BTreeSet<String>,
    pub boundary_inputs: Vec<String>,
    pub boundary_outputs: Vec<String>,
    pub inner: Netlist,
}

/// Logic level of every net: PIs at 0, a gate output one above its deepest input.
fn net_levels(n: &Netlist) -> Result<HashMap<&str, usize>, NetlistError> {
    let mut level: HashMap<&str, usize> = n.inputs().iter().map(|i| (i.as_str(), 0)).collect();
    for gi in n.topo_order()? {
        let g = &n.gates()[gi];
        let l = g.inputs.iter().map(|i| level.get(i.as_str()).copied().unwrap_or(0)).max().map_or(1, |m| m + 1);
        level.insert(g.output.as_str(), l);
    }
    Ok(level)
}

fn bounded_bfs(starts: &[usize], edges: &[Vec<usize>], h: usize, seen: &mut BTreeSet<usize>) {
    let mut depth = vec![usize::MAX; edges.len()];
    let mut queue = VecDeque::new();
    for &s in starts {
        depth[s] = 0;
        queue.push_back(s);
    }
    while let Some(u) = queue.pop_front() {
        seen.insert(u);
        if depth[u] == h {
            continue;
        }
        for &v in &edges[u] {
            if depth[v] == usize::MAX {
                depth[v] = depth[u] + 1;
                queue.push_back(v);
            }
        }
    }
}

/// Gate indices within `h` levels of the seeds along fanin edges or along
/// fanout edges. Paths that change direction do not count.
pub fn region_indices(n: &Netlist, seeds: &[usize], h: usize) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    bounded_bfs(seeds, &n.fanin_gates(), h, &mut out);
    bounded_bfs(seeds, &n.consumers(), h, &mut out);
    out
}

pub fn extract(n: &Netlist, gates: &[String], h: u32) -> Result<Subnetlist, SubnetlistError> {
    if h == 0 {
        return Err(SubnetlistError::ZeroHop);
    }
    if gates.is_empty() {
        return Err(SubnetlistError::NoSeeds);
    }
    let index = n.gate_index();
    let seeds = gates
        .iter()
        .map(|g| index.get(g.as_str()).copied().ok_or_else(|| SubnetlistError::UnknownGate(g.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let region = region_indices(n, &seeds, h as usize);
    let level = net_levels(n).map_err(SubnetlistError::Netlist)?;

    let inside_nets: HashSet<&str> = region.iter().map(|&i| n.gates()[i].output.as_str()).collect();
    let mut b_in: BTreeSet<(usize, &str)> = BTreeSet::new();
    for &i in &region {
        for net in &n.gates()[i].inputs {
            if !inside_nets.contains(net.as_str()) {
                b_in.insert((level[net.as_str()], net.as_str()));
            }
        }
    }
    let mut read_outside: HashSet<&str> = n.outputs().iter().map(String::as_str).collect();
    for (i, g) in n.gates().iter().enumerate() {
        if !region.contains(&i) {
            read_outside.extend(g.inputs.iter().map(String::as_str));
        }
    }
    let b_out: BTreeSet<(usize, &str)> =
        inside_nets.iter().filter(|net| read_outside.contains(*net)).map(|&net| (level[net], net)).collect();

    let boundary_inputs: Vec<String> = b_in.into_iter().map(|(_, s)| s.to_string()).collect();
    let boundary_outputs: Vec<String> = b_out.into_iter().map(|(_, s)| s.to_string()).collect();
    let inner_gates: Vec<Gate> = region.iter().map(|&i| n.gates()[i].clone()).collect();
    let labels: BTreeMap<String, String> =
        inner_gates.iter().filter_map(|g| n.labels().get(&g.id).map(|l| (g.id.clone(), l.clone()))).collect();
    let inner = Netlist::new(
        format!("{}_region", n.name()),
        boundary_inputs.clone(),
        boundary_outputs.clone(),
        inner_gates,
    )
    .map_err(SubnetlistError::Netlist)?
    .with_labels(labels);
    Ok(Subnetlist {
        region: region.iter().map(|&i| n.gates()[i].id.clone()).collect(),
        boundary_inputs,
        boundary_outputs,
        inner,
    })
}

/// Replaces the region of `s` in `n` with `replacement`, whose interface must
/// name the boundary nets in order. Internal nets and gate ids are renamed to
/// fresh names. `n` is never modified; any failure leaves it as it was.
pub fn reinsert(n: &Netlist, s: &Subnetlist, replacement: &Netlist) -> Result<Netlist, SubnetlistError> {
    if replacement.inputs() != s.boundary_inputs.as_slice() {
        return Err(SubnetlistError::BoundaryMismatch {
            side: "inputs",
            expected: s.boundary_inputs.clone(),
            got: replacement.inputs().to_vec(),
        });
    }
    if replacement.outputs() != s.boundary_outputs.as_slice() {
        return Err(SubnetlistError::BoundaryMismatch {
            side: "outputs",
            expected: s.boundary_outputs.clone(),
            got: replacement.outputs().to_vec(),
        });
    }
    let drivers = replacement.driver_index();
    if let Some(po) = s.boundary_outputs.iter().find(|po| !drivers.contains_key(po.as_str())) {
        return Err(SubnetlistError::Netlist(NetlistError::Undriven { net: po.clone(), reader: "boundary".into() }));
    }

    let kept: Vec<Gate> = n.gates().iter().filter(|g| !s.region.contains(&g.id)).cloned().collect();
    let taken_nets: HashSet<String> =
        n.nets().map(str::to_string).chain(replacement.nets().map(str::to_string)).collect();
    let taken_ids: HashSet<String> =
        n.gates().iter().chain(replacement.gates()).map(|g| g.id.clone()).collect();
    let mut net_names = NameGen::new("rw_n", &taken_nets);
    let mut id_names = NameGen::new("rw_g", &taken_ids);

    let keep_net: HashSet<&str> =
        s.boundary_inputs.iter().chain(&s.boundary_outputs).map(String::as_str).collect();
    let mut rename: HashMap<&str, String> = HashMap::new();
    for g in replacement.gates() {
        if !keep_net.contains(g.output.as_str()) {
            rename.insert(g.output.as_str(), net_names.fresh());
        }
    }
    let net = |x: &str| rename.get(x).cloned().unwrap_or_else(|| x.to_string());
    let fresh: Vec<Gate> = replacement
        .gates()
        .iter()
        .map(|g| Gate::new(id_names.fresh(), g.kind, g.inputs.iter().map(|i| net(i)).collect(), net(&g.output)))
        .collect();

    let labels = splice_labels(n, s, replacement, &fresh);
    let mut gates = kept;
    gates.extend(fresh);
    n.with_gates(gates, labels).map_err(|e| match e {
        NetlistError::Cycle(net) => SubnetlistError::Cycle(net),
        other => SubnetlistError::Netlist(other),
    })
}

// Carries labels over: a gate driving a boundary output inherits the label of
// the original driver; other gates take the label of their first labelled
// consumer, then the region's most common label.
fn splice_labels(n: &Netlist, s: &Subnetlist, replacement: &Netlist, fresh: &[Gate]) -> BTreeMap<String, String> {
    let mut labels: BTreeMap<String, String> =
        n.labels().iter().filter(|(id, _)| !s.region.contains(*id)).map(|(a, b)| (a.clone(), b.clone())).collect();
    if n.labels().is_empty() {
        return labels;
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for id in &s.region {
        if let Some(l) = n.labels().get(id) {
            *counts.entry(l.as_str()).or_default() += 1;
        }
    }
    let majority = counts.iter().max_by_key(|(l, c)| (**c, std::cmp::Reverse(**l))).map(|(l, _)| l.to_string());
    let original = n.driver_index();
    let mut by_idx: Vec<Option<String>> = replacement
        .gates()
        .iter()
        .map(|g| {
            original.get(g.output.as_str()).and_then(|&i| n.labels().get(&n.gates()[i].id)).cloned()
        })
        .collect();
    let consumers = replacement.consumers();
    let order = replacement.topo_order().unwrap_or_else(|_| (0..replacement.gates().len()).collect());
    for &gi in order.iter().rev() {
        if by_idx[gi].is_none() {
            by_idx[gi] = consumers[gi].iter().find_map(|&c| by_idx[c].clone()).or_else(|| majority.clone());
        }
    }
    for (g, l) in fresh.iter().zip(by_idx) {
        if let Some(l) = l {
            labels.insert(g.id.clone(), l);
        }
    }
    labels
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::parse_bench;
    use crate::hash::structural_hash;
    use crate::verify::{check_equivalence, EquivBudget};

    const C17: &str = include_str!("../tests/fixtures/c17.bench");

    fn ids(s: &Subnetlist) -> Vec<&str> {
        s.region.iter().map(String::as_str).collect()
    }

    #[test]
    fn one_hop_is_drivers_and_consumers() {
        let n = parse_bench("c17", C17).unwrap();
        let g16 = n.gates().iter().find(|g| g.output == "16").unwrap().id.clone();
        let s = extract(&n, std::slice::from_ref(&g16), 1).unwrap();
        let mut expect: Vec<String> = vec![g16];
        for net in ["11", "22", "23"] {
            expect.push(n.gates().iter().find(|g| g.output == net).unwrap().id.clone());
        }
        expect.sort();
        assert_eq!(ids(&s), expect.iter().map(String::as_str).collect::<Vec<_>>());
    }

    #[test]
    fn saturated_hop_covers_everything() {
        let n = parse_bench("c17", C17).unwrap();
        let all: Vec<String> = n.gates().iter().map(|g| g.id.clone()).collect();
        let s_all = extract(&n, &all, 20).unwrap();
        assert_eq!(s_all.region.len(), 6);
        let mut pis = s_all.boundary_inputs.clone();
        pis.sort();
        let mut expect = n.inputs().to_vec();
        expect.sort();
        assert_eq!(pis, expect);
        assert_eq!(s_all.boundary_outputs, vec!["22", "23"]);
    }

    #[test]
    fn identity_splice_preserves_structure_and_function() {
        let n = parse_bench("c17", C17).unwrap();
        for g in n.gates() {
            for h in 1..4 {
                let s = extract(&n, std::slice::from_ref(&g.id), h).unwrap();
                let back = reinsert(&n, &s, &s.inner).unwrap();
                assert_eq!(structural_hash(&back), structural_hash(&n));
                assert!(check_equivalence(&n, &back, &EquivBudget::default()).unwrap().is_equal());
            }
        }
    }

    #[test]
    fn boundary_mismatch_is_rejected() {
        let n = parse_bench("c17", C17).unwrap();
        let s = extract(&n, &[n.gates()[5].id.clone()], 1).unwrap();
        let mut outs = s.boundary_outputs.clone();
        outs.push("extra".into());
        let wrong = Netlist::unchecked("w", s.boundary_inputs.clone(), outs, s.inner.gates().to_vec());
        assert!(matches!(reinsert(&n, &s, &wrong), Err(SubnetlistError::BoundaryMismatch { side: "outputs", .. })));
    }

    #[test]
    fn cycles_fail_atomically() {
        let text = "INPUT(a)\nINPUT(b)\nOUTPUT(z)\nu = AND(a, b)\nv = NOT(u)\nw = BUF(v)\nz = OR(w, u)\n";
        let n = parse_bench("t", text).unwrap();
        let u = n.gates().iter().find(|g| g.output == "u").unwrap().id.clone();
        let s = extract(&n, &[u], 1).unwrap();
        // region = {u, v, z}; w sits outside between v and z
        assert!(s.boundary_inputs.contains(&"w".to_string()));
        assert!(s.boundary_outputs.contains(&"v".to_string()));
        // feed the boundary input w back into v's driver: v = NOT(w)
        let bad_gates: Vec<Gate> = s
            .inner
            .gates()
            .iter()
            .map(|g| if g.output == "v" { Gate::new(g.id.clone(), g.kind, vec!["w".into()], "v") } else { g.clone() })
            .collect();
        let bad = Netlist::new("bad", s.boundary_inputs.clone(), s.boundary_outputs.clone(), bad_gates).unwrap();
        let before = n.clone();
        assert!(matches!(reinsert(&n, &s, &bad), Err(SubnetlistError::Cycle(_))));
        assert_eq!(n, before);
    }

    #[test]
    fn unknown_gate_and_zero_hop() {
        let n = parse_bench("c17", C17).unwrap();
        assert_eq!(extract(&n, &["nope".into()], 1).unwrap_err(), SubnetlistError::UnknownGate("nope".into()));
        assert_eq!(extract(&n, &[n.gates()[0].id.clone()], 0).unwrap_err(), SubnetlistError::ZeroHop);
    }
}
