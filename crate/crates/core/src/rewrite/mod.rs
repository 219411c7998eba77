//! Resynthesis of a region into a restricted gate basis.

mod abc;
mod expr;
mod map;
mod tt;

use std::collections::{HashMap, HashSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::netlist::{Gate, GateType, Netlist, NetlistError};
use crate::planner::Mapping;
use crate::score::CellAreaTable;
use crate::verify::Simulator;
use crate::wl::{cosine, wl_histogram, DEFAULT_ITERATIONS};

pub use abc::{abc_adapter, AbcConfig, AdapterError, DEFAULT_ABC_SCRIPT};
pub use tt::TruthTable;

use expr::{Arena, Decomposer, ExprId};
use map::{Builder, Mapper};

pub const DEFAULT_TT_WIDTH: usize = 12;
pub const MAX_TT_WIDTH: usize = 24;

#[derive(Debug, Error)]
pub enum RewriteError {
    #[error("{width} inputs exceed the truth-table width limit {limit}")]
    WidthExceeded { width: usize, limit: usize },
    #[error("cannot map into the basis: {0}")]
    Unmappable(String),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error(transparent)]
    Adapter(#[from] AdapterError),
}

#[derive(Debug, Clone)]
pub struct RewriteOptions {
    pub tt_width: usize,
    pub seed: u64,
    pub area: CellAreaTable,
}

impl RewriteOptions {
    pub fn new(seed: u64) -> Self {
        RewriteOptions { tt_width: DEFAULT_TT_WIDTH, seed, area: CellAreaTable::default() }
    }

    fn width(&self) -> usize {
        self.tt_width.min(MAX_TT_WIDTH)
    }
}

pub fn resynthesize(inner: &Netlist, mapping: Mapping, seed: u64) -> Result<Netlist, RewriteError> {
    resynthesize_with(inner, mapping, &RewriteOptions::new(seed))
}

/// Rebuilds `inner` using only the gates of `mapping`.
///
/// Two candidates are mapped: one from the per-output functions (truth-table
/// decomposition, or gate-by-gate translation for cones wider than the width
/// limit) and one from a direct translation of the region's own structure.
/// The functional one wins unless the structural one is strictly smaller.
pub fn resynthesize_with(inner: &Netlist, mapping: Mapping, opts: &RewriteOptions) -> Result<Netlist, RewriteError> {
    let allowed = mapping.allowed_gates();
    let allow_xor = allowed.contains(&GateType::Xor) || allowed.contains(&GateType::Xnor);
    let functional = functional_candidate(inner, mapping, allow_xor, opts);
    let structural = {
        let mut arena = Arena::default();
        let table = translate(inner, &mut arena, allow_xor);
        let roots: Vec<ExprId> = inner.outputs().iter().map(|po| table[po.as_str()]).collect();
        emit(inner, &mut arena, &roots, mapping, opts)
    };
    match (functional, structural) {
        (Ok(f), Ok(s)) => {
            let cost = |n: &Netlist| crate::score::area(n, &opts.area).unwrap_or(f64::INFINITY);
            Ok(if cost(&s) < cost(&f) { s } else { f })
        }
        (Ok(f), Err(_)) => Ok(f),
        (Err(_), Ok(s)) => Ok(s),
        (Err(e), Err(_)) => Err(e),
    }
}

fn functional_candidate(
    inner: &Netlist,
    mapping: Mapping,
    allow_xor: bool,
    opts: &RewriteOptions,
) -> Result<Netlist, RewriteError> {
    let sim = Simulator::new(inner)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut arena = Arena::default();
    let k = inner.inputs().len();

    let roots: Vec<ExprId> = if k <= opts.width() {
        let mut dec = Decomposer::new((0..k).collect(), allow_xor, &mut rng);
        sim.truth_tables()
            .into_iter()
            .map(|words| dec.synth(&mut arena, &TruthTable::from_words(k, words)))
            .collect()
    } else {
        let cones = Cones::new(inner);
        let mut structural: Option<HashMap<String, ExprId>> = None;
        let mut roots = Vec::new();
        for po in inner.outputs() {
            let support = cones.support(po);
            if support.len() <= opts.width() {
                let cone = cones.netlist(inner, po, &support)?;
                let words = Simulator::new(&cone)?.truth_tables().remove(0);
                let mut dec = Decomposer::new(support.clone(), allow_xor, &mut rng);
                roots.push(dec.synth(&mut arena, &TruthTable::from_words(support.len(), words)));
            } else {
                let table = structural.get_or_insert_with(|| translate(inner, &mut arena, allow_xor));
                roots.push(table[po.as_str()]);
            }
        }
        roots
    };
    emit(inner, &mut arena, &roots, mapping, opts)
}

/// Realizes per-output truth tables over `inputs` in the basis of `mapping`.
pub fn decompose_to_basis(
    inputs: &[String],
    outputs: &[(String, TruthTable)],
    mapping: Mapping,
    opts: &RewriteOptions,
) -> Result<Netlist, RewriteError> {
    if inputs.len() > opts.width() {
        return Err(RewriteError::WidthExceeded { width: inputs.len(), limit: opts.width() });
    }
    let allowed = mapping.allowed_gates();
    let allow_xor = allowed.contains(&GateType::Xor) || allowed.contains(&GateType::Xnor);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut arena = Arena::default();
    let mut dec = Decomposer::new((0..inputs.len()).collect(), allow_xor, &mut rng);
    let roots: Vec<ExprId> = outputs.iter().map(|(_, f)| dec.synth(&mut arena, f)).collect();
    let shell = Netlist::unchecked(
        "decomposed",
        inputs.to_vec(),
        outputs.iter().map(|(n, _)| n.clone()).collect(),
        Vec::new(),
    );
    emit(&shell, &mut arena, &roots, mapping, opts)
}

fn emit(
    interface: &Netlist,
    arena: &mut Arena,
    roots: &[ExprId],
    mapping: Mapping,
    opts: &RewriteOptions,
) -> Result<Netlist, RewriteError> {
    let allowed = mapping.allowed_gates();
    let anchor = (!interface.inputs().is_empty()).then(|| arena.var(0));
    let mapper = Mapper::new(arena, &allowed, &opts.area, anchor);
    let taken: HashSet<String> = interface.inputs().iter().chain(interface.outputs()).cloned().collect();
    let mut builder = Builder::new(&mapper, interface.inputs(), &taken);

    let mut rename: HashMap<String, String> = HashMap::new();
    let mut bufs = Vec::new();
    let mut done: HashSet<&str> = HashSet::new();
    for (po, &root) in interface.outputs().iter().zip(roots) {
        if !done.insert(po.as_str()) {
            continue;
        }
        let net = builder.realize(root, true)?;
        let own_gate = builder.gates.iter().any(|g| g.output == net);
        if own_gate && !rename.contains_key(&net) {
            rename.insert(net, po.clone());
        } else {
            bufs.push((net, po.clone()));
        }
    }
    let mut gates = std::mem::take(&mut builder.gates);
    let ids: HashSet<String> = gates.iter().map(|g| g.id.clone()).collect();
    let mut buf_ids = crate::netlist::NameGen::new("rb", &ids);
    for (net, po) in bufs {
        gates.push(Gate::new(buf_ids.fresh(), GateType::Buf, vec![net], po));
    }
    let rn = |x: &String| rename.get(x).cloned().unwrap_or_else(|| x.clone());
    for g in &mut gates {
        g.output = rn(&g.output);
        g.inputs = g.inputs.iter().map(rn).collect();
    }
    if let Some(g) = gates.iter().find(|g| !allowed.contains(&g.kind)) {
        return Err(RewriteError::Unmappable(format!("emitted {} outside {mapping}", g.kind.name())));
    }
    Ok(Netlist::new(
        interface.name().to_string(),
        interface.inputs().to_vec(),
        interface.outputs().to_vec(),
        gates,
    )?)
}

/// Structural fan-in cones of a netlist's nets.
struct Cones<'n> {
    drivers: HashMap<&'n str, usize>,
    input_pos: HashMap<&'n str, usize>,
    gates: &'n [Gate],
}

impl<'n> Cones<'n> {
    fn new(n: &'n Netlist) -> Self {
        Cones {
            drivers: n.driver_index(),
            input_pos: n.inputs().iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect(),
            gates: n.gates(),
        }
    }

    fn walk(&self, net: &'n str) -> (Vec<usize>, Vec<usize>) {
        let mut seen = HashSet::new();
        let mut stack = vec![net];
        let (mut gates, mut inputs) = (Vec::new(), Vec::new());
        while let Some(x) = stack.pop() {
            if !seen.insert(x) {
                continue;
            }
            if let Some(&i) = self.input_pos.get(x) {
                inputs.push(i);
            } else if let Some(&g) = self.drivers.get(x) {
                gates.push(g);
                stack.extend(self.gates[g].inputs.iter().map(String::as_str));
            }
        }
        inputs.sort_unstable();
        gates.sort_unstable();
        (gates, inputs)
    }

    fn support(&self, net: &'n str) -> Vec<usize> {
        self.walk(net).1
    }

    fn netlist(&self, n: &Netlist, po: &'n str, support: &[usize]) -> Result<Netlist, NetlistError> {
        let (gates, _) = self.walk(po);
        Netlist::new(
            "cone",
            support.iter().map(|&i| n.inputs()[i].clone()).collect(),
            vec![po.to_string()],
            gates.into_iter().map(|g| self.gates[g].clone()).collect(),
        )
    }
}

fn translate(n: &Netlist, arena: &mut Arena, allow_xor: bool) -> HashMap<String, ExprId> {
    let mut table: HashMap<String, ExprId> =
        n.inputs().iter().enumerate().map(|(i, pi)| (pi.clone(), arena.var(i))).collect();
    for gi in n.topo_order().expect("validated") {
        let g = &n.gates()[gi];
        let ins: Vec<ExprId> = g.inputs.iter().map(|x| table[x.as_str()]).collect();
        let id = arena.gate(g.kind, &ins, allow_xor);
        table.insert(g.output.clone(), id);
    }
    table
}

/// `1 − cosine` of the two designs' WL color histograms, clamped to [0, 1].
pub fn estimate_diversity(before: &Netlist, after: &Netlist) -> f64 {
    let a = wl_histogram(before, DEFAULT_ITERATIONS);
    let b = wl_histogram(after, DEFAULT_ITERATIONS);
    if a == b {
        return 0.0;
    }
    (1.0 - cosine(&a, &b)).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::parse_bench;
    use crate::verify::{check_equivalence, EquivBudget};

    fn m(k: u8) -> Mapping {
        Mapping::new(k).unwrap()
    }

    fn kinds(n: &Netlist) -> Vec<GateType> {
        let mut v: Vec<GateType> = n.gates().iter().map(|g| g.kind).collect();
        v.sort();
        v
    }

    #[test]
    fn and_under_nand_basis() {
        let n = parse_bench("t", "INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)\n").unwrap();
        let r = resynthesize(&n, m(1), 0).unwrap();
        assert_eq!(kinds(&r), vec![GateType::Inv, GateType::Nand]);
        assert!(check_equivalence(&n, &r, &EquivBudget::default()).unwrap().is_equal());
    }

    #[test]
    fn xor_already_in_basis() {
        let n = parse_bench("t", "INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = XOR(a, b)\n").unwrap();
        let r = resynthesize(&n, m(6), 0).unwrap();
        assert_eq!(kinds(&r), vec![GateType::Xor]);
    }

    #[test]
    fn identity_and_constant_outputs() {
        let n = parse_bench("t", "INPUT(a)\nINPUT(b)\nOUTPUT(y)\nOUTPUT(z)\ny = BUFF(a)\nna = NOT(a)\nz = AND(a, na)\n")
            .unwrap();
        let r = resynthesize(&n, m(2), 0).unwrap();
        assert!(check_equivalence(&n, &r, &EquivBudget::default()).unwrap().is_equal());
        let y = r.gates().iter().find(|g| g.output == "y").unwrap();
        assert_eq!(y.kind, GateType::Buf);
        assert_eq!(y.inputs, vec!["a"]);
    }

    #[test]
    fn majority_under_nor_basis() {
        let text = "INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(y)\nab = AND(a, b)\nbc = AND(b, c)\nac = AND(a, c)\ny = OR(ab, bc, ac)\n";
        let n = parse_bench("maj", text).unwrap();
        let r = resynthesize(&n, m(2), 7).unwrap();
        assert!(r.gates().iter().all(|g| matches!(g.kind, GateType::Inv | GateType::Nor | GateType::Buf)));
        assert!(check_equivalence(&n, &r, &EquivBudget::default()).unwrap().is_equal());
    }

    #[test]
    fn every_mapping_on_c17() {
        let n = parse_bench("c17", include_str!("../../tests/fixtures/c17.bench")).unwrap();
        for mapping in Mapping::all() {
            for seed in 0..3 {
                let r = resynthesize(&n, mapping, seed).unwrap();
                assert!(r.gates().iter().all(|g| mapping.allows(g.kind)), "{mapping}");
                assert!(check_equivalence(&n, &r, &EquivBudget::default()).unwrap().is_equal(), "{mapping}");
                assert_eq!(r, resynthesize(&n, mapping, seed).unwrap());
            }
        }
    }

    #[test]
    fn wide_regions_fall_back_per_cone() {
        let n = parse_bench("c17", include_str!("../../tests/fixtures/c17.bench")).unwrap();
        let opts = RewriteOptions { tt_width: 3, ..RewriteOptions::new(1) };
        for mapping in Mapping::all() {
            let r = resynthesize_with(&n, mapping, &opts).unwrap();
            assert!(r.gates().iter().all(|g| mapping.allows(g.kind)));
            assert!(check_equivalence(&n, &r, &EquivBudget::default()).unwrap().is_equal(), "{mapping}");
        }
    }

    #[test]
    fn width_limit_on_direct_decomposition() {
        let inputs: Vec<String> = (0..13).map(|i| format!("x{i}")).collect();
        let f = TruthTable::var(13, 0);
        let err = decompose_to_basis(&inputs, &[("y".into(), f)], m(1), &RewriteOptions::new(0)).unwrap_err();
        assert!(matches!(err, RewriteError::WidthExceeded { width: 13, limit: 12 }));
    }

    #[test]
    fn zero_input_constant_is_unmappable() {
        let n = Netlist::new("t", vec![], vec!["y".into()], vec![Gate::new("g0", GateType::Const0, vec![], "y")])
            .unwrap();
        assert!(matches!(resynthesize(&n, m(1), 0), Err(RewriteError::Unmappable(_))));
    }

    #[test]
    fn diversity_bounds() {
        let n = parse_bench("t", "INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = AND(a, b)\n").unwrap();
        assert_eq!(estimate_diversity(&n, &n), 0.0);
        let r = resynthesize(&n, m(1), 0).unwrap();
        assert!(estimate_diversity(&n, &r) > 0.0);
    }
}
