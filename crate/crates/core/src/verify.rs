//! Structural validation, simulation and tiered equivalence checking.

use std::collections::{HashMap, HashSet};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::{GateType, Netlist, NetlistError};

/// Netlist compiled to index form for bit-parallel evaluation. Signals
/// `0..n_inputs` are the primary inputs, followed by one signal per gate in
/// topological order.
#[derive(Debug, Clone)]
pub struct Simulator {
    n_inputs: usize,
    ops: Vec<(GateType, Vec<usize>)>,
    outputs: Vec<usize>,
}

impl Simulator {
    pub fn new(n: &Netlist) -> Result<Self, NetlistError> {
        let order = n.topo_order()?;
        let mut signal: HashMap<&str, usize> = HashMap::new();
        for (i, pi) in n.inputs().iter().enumerate() {
            signal.insert(pi.as_str(), i);
        }
        let mut ops = Vec::with_capacity(order.len());
        for idx in order {
            let g = &n.gates()[idx];
            let ins = g
                .inputs
                .iter()
                .map(|x| {
                    signal.get(x.as_str()).copied().ok_or_else(|| NetlistError::Undriven {
                        net: x.clone(),
                        reader: g.id.clone(),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            signal.insert(g.output.as_str(), n.inputs().len() + ops.len());
            ops.push((g.kind, ins));
        }
        let outputs = n
            .outputs()
            .iter()
            .map(|po| {
                signal
                    .get(po.as_str())
                    .copied()
                    .ok_or_else(|| NetlistError::Undriven { net: po.clone(), reader: "OUTPUT".into() })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Simulator { n_inputs: n.inputs().len(), ops, outputs })
    }

    pub fn num_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn num_outputs(&self) -> usize {
        self.outputs.len()
    }

    /// Evaluates 64 input patterns at once; `inputs[i]` holds PI `i`.
    pub fn eval_words(&self, inputs: &[u64]) -> Vec<u64> {
        let mut values = Vec::with_capacity(self.n_inputs + self.ops.len());
        values.extend_from_slice(&inputs[..self.n_inputs]);
        let mut buf = Vec::new();
        for (kind, ins) in &self.ops {
            buf.clear();
            buf.extend(ins.iter().map(|&i| values[i]));
            values.push(kind.eval_words(&buf));
        }
        self.outputs.iter().map(|&o| values[o]).collect()
    }

    pub fn eval_bits(&self, inputs: &[bool]) -> Vec<bool> {
        let words: Vec<u64> = inputs.iter().map(|&b| if b { !0 } else { 0 }).collect();
        self.eval_words(&words).into_iter().map(|w| w & 1 == 1).collect()
    }

    /// Per-output truth tables over all `2^n_inputs` patterns. Pattern `v`
    /// assigns bit `i` of `v` to input `i`; it is stored at bit `v % 64` of
    /// word `v / 64`.
    pub fn truth_tables(&self) -> Vec<Vec<u64>> {
        let k = self.n_inputs;
        let words = exhaustive_word_count(k);
        let mut tables = vec![Vec::with_capacity(words); self.outputs.len()];
        for w in 0..words {
            let inputs = exhaustive_inputs(k, w);
            let outs = self.eval_words(&inputs);
            let mask = valid_mask(k);
            for (t, o) in tables.iter_mut().zip(outs) {
                t.push(o & mask);
            }
        }
        tables
    }
}

pub(crate) fn exhaustive_word_count(k: usize) -> usize {
    if k <= 6 {
        1
    } else {
        1usize << (k - 6)
    }
}

pub(crate) fn valid_mask(k: usize) -> u64 {
    if k >= 6 {
        !0
    } else {
        (1u64 << (1 << k)) - 1
    }
}

pub(crate) const VAR_MASKS: [u64; 6] = [
    0xaaaa_aaaa_aaaa_aaaa,
    0xcccc_cccc_cccc_cccc,
    0xf0f0_f0f0_f0f0_f0f0,
    0xff00_ff00_ff00_ff00,
    0xffff_0000_ffff_0000,
    0xffff_ffff_0000_0000,
];

/// Input words for exhaustive word `w` over `k` inputs.
pub(crate) fn exhaustive_inputs(k: usize, w: usize) -> Vec<u64> {
    (0..k)
        .map(|i| {
            if i < 6 {
                VAR_MASKS[i]
            } else if (w >> (i - 6)) & 1 == 1 {
                !0
            } else {
                0
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("no value for primary input `{0}`")]
    MissingInput(String),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
}

/// Evaluates one input assignment given by PI name.
pub fn simulate(n: &Netlist, vector: &HashMap<String, bool>) -> Result<HashMap<String, bool>, SimError> {
    let bits = n
        .inputs()
        .iter()
        .map(|pi| vector.get(pi).copied().ok_or_else(|| SimError::MissingInput(pi.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let sim = Simulator::new(n)?;
    Ok(n.outputs().iter().cloned().zip(sim.eval_bits(&bits)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    ProvedEqualExhaustive,
    PassedRandom { vectors: usize },
    ProvedEqualMiter,
    Mismatch { counterexample: Vec<bool> },
}

impl Verdict {
    pub fn is_equal(&self) -> bool {
        !matches!(self, Verdict::Mismatch { .. })
    }

    pub fn tier(&self) -> &'static str {
        match self {
            Verdict::ProvedEqualExhaustive => "exhaustive",
            Verdict::PassedRandom { .. } => "random",
            Verdict::ProvedEqualMiter => "miter",
            Verdict::Mismatch { .. } => "mismatch",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub syntax_ok: bool,
    pub connectivity_ok: bool,
    pub acyclic_ok: bool,
    pub functional: Option<Verdict>,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl ValidationReport {
    pub fn structure_ok(&self) -> bool {
        self.syntax_ok && self.connectivity_ok && self.acyclic_ok
    }

    pub fn passed(&self) -> bool {
        self.structure_ok() && self.functional.as_ref().is_none_or(Verdict::is_equal)
    }
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(|c| c.is_whitespace() || matches!(c, '(' | ')' | ',' | '=' | '#'))
}

/// Structural checks only; never fails, the report encodes every problem.
pub fn validate_structure(n: &Netlist) -> ValidationReport {
    let start = Instant::now();
    let syntax_ok = n.check_arity().is_ok()
        && n.nets().all(valid_name)
        && n.outputs().iter().all(|o| valid_name(o))
        && n.gates().iter().all(|g| valid_name(&g.id) && g.inputs.iter().all(|i| valid_name(i)));
    let connectivity_ok = n.check_connectivity().is_ok();
    let acyclic_ok = n.topo_order().is_ok();
    ValidationReport { syntax_ok, connectivity_ok, acyclic_ok, functional: None, elapsed: start.elapsed() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EquivMode {
    /// Exhaustive up to the configured width, random vectors beyond.
    Exhaustive,
    Random(usize),
    /// As `Exhaustive`, with a SAT miter proof after the random tier.
    Miter,
}

impl std::str::FromStr for EquivMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exhaustive" => Ok(EquivMode::Exhaustive),
            "miter" => Ok(EquivMode::Miter),
            _ => match s.strip_prefix("random:") {
                Some(k) => k.parse().map(EquivMode::Random).map_err(|_| format!("bad vector count in `{s}`")),
                None => Err(format!("unknown equivalence mode `{s}`")),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivBudget {
    pub exhaustive_width: usize,
    pub random_vectors: usize,
    pub seed: u64,
    pub miter: bool,
}

impl Default for EquivBudget {
    fn default() -> Self {
        EquivBudget { exhaustive_width: 16, random_vectors: 10_000, seed: 0, miter: false }
    }
}

/// Hard cap for exhaustive simulation.
pub const MAX_EXHAUSTIVE_WIDTH: usize = 24;

impl EquivBudget {
    pub fn from_mode(mode: EquivMode, seed: u64) -> Self {
        let base = EquivBudget { seed, ..Default::default() };
        match mode {
            EquivMode::Exhaustive => base,
            EquivMode::Random(k) => EquivBudget { exhaustive_width: 0, random_vectors: k, ..base },
            EquivMode::Miter => EquivBudget { miter: true, ..base },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EquivError {
    #[error("interface mismatch: {0}")]
    Interface(String),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
}

/// Checks `a ≡ b`. Both must list the same PIs and POs in the same order.
pub fn check_equivalence(a: &Netlist, b: &Netlist, budget: &EquivBudget) -> Result<Verdict, EquivError> {
    if a.inputs() != b.inputs() {
        return Err(EquivError::Interface("primary inputs differ".into()));
    }
    if a.outputs() != b.outputs() {
        return Err(EquivError::Interface("primary outputs differ".into()));
    }
    let sa = Simulator::new(a)?;
    let sb = Simulator::new(b)?;
    let k = sa.num_inputs();
    if k <= budget.exhaustive_width.min(MAX_EXHAUSTIVE_WIDTH) {
        for w in 0..exhaustive_word_count(k) {
            let inputs = exhaustive_inputs(k, w);
            let diff = first_difference(&sa.eval_words(&inputs), &sb.eval_words(&inputs)) & valid_mask(k);
            if diff != 0 {
                let bit = diff.trailing_zeros() as usize;
                return Ok(Verdict::Mismatch { counterexample: extract_vector(&inputs, bit) });
            }
        }
        return Ok(Verdict::ProvedEqualExhaustive);
    }

    let vectors = stratified_vectors(k, budget.random_vectors, budget.seed);
    for chunk in vectors.chunks(64) {
        let mut inputs = vec![0u64; k];
        for (j, v) in chunk.iter().enumerate() {
            for (i, &bit) in v.iter().enumerate() {
                inputs[i] |= (bit as u64) << j;
            }
        }
        let mask = if chunk.len() == 64 { !0 } else { (1u64 << chunk.len()) - 1 };
        let diff = first_difference(&sa.eval_words(&inputs), &sb.eval_words(&inputs)) & mask;
        if diff != 0 {
            return Ok(Verdict::Mismatch { counterexample: chunk[diff.trailing_zeros() as usize].clone() });
        }
    }
    if budget.miter {
        if let Some(prover) = default_prover() {
            match prover.prove(a, b) {
                MiterOutcome::Equal => return Ok(Verdict::ProvedEqualMiter),
                MiterOutcome::Counterexample(cex) => return Ok(Verdict::Mismatch { counterexample: cex }),
                MiterOutcome::Unknown => {}
            }
        }
    }
    Ok(Verdict::PassedRandom { vectors: vectors.len() })
}

fn first_difference(a: &[u64], b: &[u64]) -> u64 {
    a.iter().zip(b).fold(0, |acc, (x, y)| acc | (x ^ y))
}

fn extract_vector(inputs: &[u64], bit: usize) -> Vec<bool> {
    inputs.iter().map(|w| (w >> bit) & 1 == 1).collect()
}

/// all-0, all-1, every one-hot, then uniform vectors, `count` in total.
pub fn stratified_vectors(k: usize, count: usize, seed: u64) -> Vec<Vec<bool>> {
    let mut out = Vec::with_capacity(count);
    out.push(vec![false; k]);
    out.push(vec![true; k]);
    for i in 0..k {
        let mut v = vec![false; k];
        v[i] = true;
        out.push(v);
    }
    out.truncate(count);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < count {
        out.push((0..k).map(|_| rng.gen::<bool>()).collect());
    }
    out
}

pub enum MiterOutcome {
    Equal,
    Counterexample(Vec<bool>),
    Unknown,
}

/// Proves or refutes equivalence of two netlists with identical interfaces.
pub trait MiterProver {
    fn prove(&self, a: &Netlist, b: &Netlist) -> MiterOutcome;
}

pub fn default_prover() -> Option<Box<dyn MiterProver>> {
    #[cfg(feature = "miter")]
    {
        Some(Box::new(sat::SatMiter))
    }
    #[cfg(not(feature = "miter"))]
    {
        None
    }
}

#[cfg(feature = "miter")]
pub mod sat {
    //! Tseitin-encoded miter solved with varisat.

    use std::collections::HashMap;

    use varisat::{ExtendFormula, Lit, Solver};

    use super::{MiterOutcome, MiterProver};
    use crate::netlist::{GateType, Netlist};

    pub struct SatMiter;

    fn encode(solver: &mut Solver, n: &Netlist, pis: &[Lit]) -> Option<Vec<Lit>> {
        let mut lit: HashMap<&str, Lit> = n.inputs().iter().map(String::as_str).zip(pis.iter().copied()).collect();
        for idx in n.topo_order().ok()? {
            let g = &n.gates()[idx];
            let ins: Vec<Lit> = g.inputs.iter().map(|x| lit[x.as_str()]).collect();
            let out = solver.new_lit();
            match g.kind {
                GateType::Const0 => solver.add_clause(&[!out]),
                GateType::Const1 => solver.add_clause(&[out]),
                GateType::Buf | GateType::Inv => {
                    let x = if g.kind == GateType::Inv { !ins[0] } else { ins[0] };
                    solver.add_clause(&[!out, x]);
                    solver.add_clause(&[out, !x]);
                }
                GateType::And | GateType::Nand | GateType::Or | GateType::Nor => {
                    // y = AND(xs) after optional input/output complement
                    let (neg_in, neg_out) = match g.kind {
                        GateType::And => (false, false),
                        GateType::Nand => (false, true),
                        GateType::Or => (true, true),
                        _ => (true, false),
                    };
                    let xs: Vec<Lit> = ins.iter().map(|&l| if neg_in { !l } else { l }).collect();
                    let y = if neg_out { !out } else { out };
                    let mut big = vec![y];
                    for &x in &xs {
                        solver.add_clause(&[!y, x]);
                        big.push(!x);
                    }
                    solver.add_clause(&big);
                }
                GateType::Xor | GateType::Xnor => {
                    let mut acc = ins[0];
                    for &x in &ins[1..] {
                        let t = solver.new_lit();
                        xor_clauses(solver, t, acc, x);
                        acc = t;
                    }
                    let target = if g.kind == GateType::Xnor { !acc } else { acc };
                    solver.add_clause(&[!out, target]);
                    solver.add_clause(&[out, !target]);
                }
            }
            lit.insert(g.output.as_str(), out);
        }
        Some(n.outputs().iter().map(|o| lit[o.as_str()]).collect())
    }

    fn xor_clauses(solver: &mut Solver, t: Lit, a: Lit, b: Lit) {
        solver.add_clause(&[!t, a, b]);
        solver.add_clause(&[!t, !a, !b]);
        solver.add_clause(&[t, !a, b]);
        solver.add_clause(&[t, a, !b]);
    }

    impl MiterProver for SatMiter {
        fn prove(&self, a: &Netlist, b: &Netlist) -> MiterOutcome {
            let mut solver = Solver::new();
            let pis: Vec<Lit> = (0..a.inputs().len()).map(|_| solver.new_lit()).collect();
            let (Some(oa), Some(ob)) = (encode(&mut solver, a, &pis), encode(&mut solver, b, &pis)) else {
                return MiterOutcome::Unknown;
            };
            let mut any = Vec::with_capacity(oa.len());
            for (&x, &y) in oa.iter().zip(&ob) {
                let d = solver.new_lit();
                xor_clauses(&mut solver, d, x, y);
                any.push(d);
            }
            solver.add_clause(&any);
            match solver.solve() {
                Ok(false) => MiterOutcome::Equal,
                Ok(true) => {
                    let model = solver.model().unwrap_or_default();
                    let truth: std::collections::HashSet<Lit> = model.into_iter().collect();
                    MiterOutcome::Counterexample(pis.iter().map(|l| truth.contains(l)).collect())
                }
                Err(_) => MiterOutcome::Unknown,
            }
        }
    }
}

/// Nets read by some gate or PO but driven by nothing.
pub fn dangling_nets(n: &Netlist) -> Vec<String> {
    let driven: HashSet<&str> = n.nets().collect();
    let mut out: Vec<String> = n
        .gates()
        .iter()
        .flat_map(|g| g.inputs.iter())
        .chain(n.outputs().iter())
        .filter(|x| !driven.contains(x.as_str()))
        .cloned()
        .collect();
    out.sort();
    out.dedup();
    out
}
