//! Desk-scale stand-ins for graph-learning detectors, all built on WL color
//! histograms.

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{checked, ScoreError, Scorer, ScorerKind};
use crate::netlist::{Gate, GateType, NameGen, Netlist};
use crate::wl::{self, Histogram, WlGraph, DEFAULT_ITERATIONS};

/// IP-piracy style: Pearson correlation between the candidate's WL histogram
/// and a reference design's.
#[derive(Debug, Clone)]
pub struct SimilaritySurrogate {
    reference: Histogram,
}

impl SimilaritySurrogate {
    pub fn new(reference: &Netlist) -> Self {
        SimilaritySurrogate { reference: wl::wl_histogram(reference, DEFAULT_ITERATIONS) }
    }

    pub fn similarity(&self, candidate: &Netlist) -> f64 {
        wl::pearson(&wl::wl_histogram(candidate, DEFAULT_ITERATIONS), &self.reference)
    }
}

impl Scorer for SimilaritySurrogate {
    fn kind(&self) -> ScorerKind {
        ScorerKind::Similarity
    }

    fn score(&mut self, n: &Netlist) -> Result<f64, ScoreError> {
        checked(ScorerKind::Similarity, self.similarity(n))
    }
}

/// Radius of the enclosing subgraph around each key gate.
pub const ENCLOSING_HOPS: usize = 3;

/// WL histogram of the subgraph within [`ENCLOSING_HOPS`] undirected hops of
/// each key input's first consumer, in key-input order.
pub fn key_signatures(n: &Netlist) -> Vec<Histogram> {
    let graph = WlGraph::from_netlist(n);
    let k = n.inputs().len();
    let node_of: HashMap<&str, usize> = n.inputs().iter().enumerate().map(|(i, x)| (x.as_str(), i)).collect();
    n.key_inputs()
        .iter()
        .map(|key| {
            let key_node = node_of[key.as_str()];
            let center = n
                .gates()
                .iter()
                .position(|g| g.inputs.iter().any(|x| x == key))
                .map(|i| k + i)
                .unwrap_or(key_node);
            let nodes = graph.neighborhood(center, ENCLOSING_HOPS);
            graph.induced(&nodes).histogram(DEFAULT_ITERATIONS, None)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeySample {
    pub signature: Histogram,
    pub bit: bool,
}

#[derive(Debug, Clone, Default)]
pub struct KeyCorpus {
    pub samples: Vec<KeySample>,
}

impl KeyCorpus {
    pub fn from_locked<'a>(designs: impl IntoIterator<Item = (&'a Netlist, &'a [bool])>) -> Self {
        let mut samples = Vec::new();
        for (n, key) in designs {
            for (signature, &bit) in key_signatures(n).into_iter().zip(key) {
                samples.push(KeySample { signature, bit });
            }
        }
        KeyCorpus { samples }
    }

    /// Bit of the L1-nearest sample; the earliest sample wins ties.
    pub fn predict(&self, signature: &Histogram) -> Option<bool> {
        let mut best: Option<(f64, bool)> = None;
        for s in &self.samples {
            let d = wl::l1(signature, &s.signature);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, s.bit));
            }
        }
        best.map(|(_, b)| b)
    }
}

/// Logic-locking attack style: nearest-neighbour key-bit prediction from the
/// enclosing subgraph of each key gate, scored against the true key.
#[derive(Debug, Clone)]
pub struct KeySurrogate {
    corpus: KeyCorpus,
    key: Vec<bool>,
}

impl KeySurrogate {
    pub fn new(corpus: KeyCorpus, key: Vec<bool>) -> Self {
        KeySurrogate { corpus, key }
    }

    pub fn accuracy(&self, locked: &Netlist) -> Result<f64, ScoreError> {
        if locked.key_inputs().is_empty() {
            return Err(ScoreError::MissingKeyInputs);
        }
        if locked.key_inputs().len() != self.key.len() {
            return Err(ScoreError::KeyLength { expected: locked.key_inputs().len(), got: self.key.len() });
        }
        if self.corpus.samples.is_empty() {
            // expected accuracy of an unbiased guess
            return Ok(0.5);
        }
        let sigs = key_signatures(locked);
        let correct = sigs.iter().zip(&self.key).filter(|(s, &bit)| self.corpus.predict(s) == Some(bit)).count();
        Ok(correct as f64 / self.key.len() as f64)
    }
}

impl Scorer for KeySurrogate {
    fn kind(&self) -> ScorerKind {
        ScorerKind::KeyAccuracy
    }

    fn score(&mut self, n: &Netlist) -> Result<f64, ScoreError> {
        checked(ScorerKind::KeyAccuracy, self.accuracy(n)?)
    }
}

/// Inserts `n_keys` XOR/XNOR key gates on randomly chosen gate outputs. A
/// key bit of 0 uses XOR and 1 uses XNOR, so the correct key restores the
/// original function. Key inputs are named `keyinput{i}`.
pub fn lock_with_xor_keys(n: &Netlist, n_keys: usize, seed: u64) -> (Netlist, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut candidates: Vec<usize> = (0..n.gates().len()).collect();
    candidates.shuffle(&mut rng);
    candidates.truncate(n_keys.min(n.gates().len()));
    candidates.sort_unstable();

    let taken: HashSet<String> = n.nets().map(str::to_string).chain(n.gates().iter().map(|g| g.id.clone())).collect();
    let mut nets = NameGen::new("lk_n", &taken);
    let mut ids = NameGen::new("lk_g", &taken);
    let mut gates: Vec<Gate> = n.gates().to_vec();
    let mut inputs = n.inputs().to_vec();
    let mut keys = Vec::new();
    let mut key_bits = Vec::new();
    for (i, &idx) in candidates.iter().enumerate() {
        let key_net = format!("keyinput{i}");
        let bit: bool = rng.gen();
        let original = gates[idx].output.clone();
        let inner = nets.fresh();
        gates[idx].output = inner.clone();
        let kind = if bit { GateType::Xnor } else { GateType::Xor };
        gates.push(Gate::new(ids.fresh(), kind, vec![inner, key_net.clone()], original));
        inputs.push(key_net.clone());
        keys.push(key_net);
        key_bits.push(bit);
    }
    let locked = Netlist::new(format!("{}_locked", n.name()), inputs, n.outputs().to_vec(), gates)
        .expect("locking preserves netlist invariants")
        .with_key_inputs(keys)
        .expect("key nets are inputs")
        .with_labels(n.labels().clone());
    (locked, key_bits)
}

/// Labelled WL colors (rounds 0..=2) of every labelled gate.
#[derive(Debug, Clone, Default)]
pub struct NodeCorpus {
    entries: Vec<([u64; 3], String)>,
}

fn gate_colors(n: &Netlist) -> Vec<[u64; 3]> {
    let rounds = WlGraph::from_netlist(n).refine(DEFAULT_ITERATIONS);
    let k = n.inputs().len();
    (0..n.gates().len()).map(|i| [rounds[0][k + i], rounds[1][k + i], rounds[2][k + i]]).collect()
}

impl NodeCorpus {
    pub fn from_labelled<'a>(designs: impl IntoIterator<Item = &'a Netlist>) -> Self {
        let mut entries = Vec::new();
        for n in designs {
            for (g, colors) in n.gates().iter().zip(gate_colors(n)) {
                if let Some(label) = n.labels().get(&g.id) {
                    entries.push((colors, label.clone()));
                }
            }
        }
        NodeCorpus { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Majority label among entries sharing the deepest matching WL round;
    /// ties go to the lexicographically smallest label. Falls back to the
    /// corpus-wide majority when not even the gate type matches.
    pub fn predict(&self, colors: &[u64; 3]) -> Option<String> {
        for round in (0..3).rev() {
            let votes = self.entries.iter().filter(|(c, _)| c[round] == colors[round]).map(|(_, l)| l);
            if let Some(label) = majority(votes) {
                return Some(label);
            }
        }
        majority(self.entries.iter().map(|(_, l)| l))
    }
}

fn majority<'a>(labels: impl Iterator<Item = &'a String>) -> Option<String> {
    let mut counts: BTreeMap<&String, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let max = counts.values().copied().max()?;
    counts.into_iter().find(|&(_, c)| c == max).map(|(l, _)| l.clone())
}

/// Reverse-engineering style: classifies each labelled gate of the candidate
/// by WL color against a labelled corpus and reports accuracy.
#[derive(Debug, Clone)]
pub struct NodeSurrogate {
    corpus: NodeCorpus,
}

impl NodeSurrogate {
    pub fn new(corpus: NodeCorpus) -> Self {
        NodeSurrogate { corpus }
    }

    pub fn accuracy(&self, candidate: &Netlist) -> Result<f64, ScoreError> {
        if candidate.labels().is_empty() {
            return Err(ScoreError::MissingLabels);
        }
        let mut total = 0usize;
        let mut correct = 0usize;
        for (g, colors) in candidate.gates().iter().zip(gate_colors(candidate)) {
            if let Some(truth) = candidate.labels().get(&g.id) {
                total += 1;
                if self.corpus.predict(&colors).as_ref() == Some(truth) {
                    correct += 1;
                }
            }
        }
        Ok(correct as f64 / total as f64)
    }
}

impl Scorer for NodeSurrogate {
    fn kind(&self) -> ScorerKind {
        ScorerKind::NodeAccuracy
    }

    fn score(&mut self, n: &Netlist) -> Result<f64, ScoreError> {
        checked(ScorerKind::NodeAccuracy, self.accuracy(n)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::parse_bench;
    use crate::verify::{check_equivalence, EquivBudget, Verdict};

    const C17: &str = include_str!("../../tests/fixtures/c17.bench");

    #[test]
    fn similarity_to_self_is_one() {
        let n = parse_bench("c17", C17).unwrap();
        let mut s = SimilaritySurrogate::new(&n);
        assert!((s.score(&n).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn similarity_drops_under_full_remap() {
        let r = parse_bench("c17", C17).unwrap();
        let remapped = parse_bench("c17", &C17.replace("NAND", "NOR")).unwrap();
        let s = SimilaritySurrogate::new(&r);
        assert!(s.similarity(&remapped) < 1.0);
    }

    #[test]
    fn locking_preserves_function_under_correct_key() {
        let n = parse_bench("c17", C17).unwrap();
        let (locked, key) = lock_with_xor_keys(&n, 4, 11);
        assert_eq!(locked.key_inputs().len(), 4);
        assert_eq!(key.len(), 4);
        // tie each key input to its correct value and compare with the original
        let mut gates = locked.gates().to_vec();
        for (k, &bit) in locked.key_inputs().iter().zip(&key) {
            for g in &mut gates {
                for x in &mut g.inputs {
                    if x == k {
                        *x = format!("tie_{k}");
                    }
                }
            }
            gates.push(Gate::new(format!("t_{k}"), if bit { GateType::Const1 } else { GateType::Const0 }, vec![], format!("tie_{k}")));
        }
        let tied = Netlist::new("tied", n.inputs().to_vec(), n.outputs().to_vec(), gates).unwrap();
        assert_eq!(check_equivalence(&n, &tied, &EquivBudget::default()).unwrap(), Verdict::ProvedEqualExhaustive);
    }

    #[test]
    fn key_self_match_is_perfect() {
        let n = parse_bench("c17", C17).unwrap();
        let (locked, key) = lock_with_xor_keys(&n, 4, 3);
        let corpus = KeyCorpus::from_locked([(&locked, key.as_slice())]);
        let mut s = KeySurrogate::new(corpus, key);
        assert_eq!(s.score(&locked).unwrap(), 1.0);
    }

    #[test]
    fn empty_key_corpus_is_a_coin() {
        let n = parse_bench("c17", C17).unwrap();
        let (locked, key) = lock_with_xor_keys(&n, 4, 3);
        let mut s = KeySurrogate::new(KeyCorpus::default(), key);
        assert_eq!(s.score(&locked).unwrap(), 0.5);
    }

    #[test]
    fn key_surrogate_needs_keys() {
        let n = parse_bench("c17", C17).unwrap();
        let mut s = KeySurrogate::new(KeyCorpus::default(), vec![]);
        assert!(matches!(s.score(&n), Err(ScoreError::MissingKeyInputs)));
    }

    fn labelled_c17() -> Netlist {
        let mut text = C17.to_string();
        for (net, label) in [("10", "a"), ("11", "b"), ("16", "c"), ("19", "d"), ("22", "e"), ("23", "f")] {
            text.push_str(&format!("#@label {net} {label}\n"));
        }
        parse_bench("c17", &text).unwrap()
    }

    #[test]
    fn node_self_corpus_is_perfect() {
        let n = labelled_c17();
        let mut s = NodeSurrogate::new(NodeCorpus::from_labelled([&n]));
        assert_eq!(s.score(&n).unwrap(), 1.0);
    }

    #[test]
    fn node_disjoint_corpus_is_deterministic() {
        let n = labelled_c17();
        let other = parse_bench("x", "INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = XOR(a, b)\n#@label y zeta\n").unwrap();
        let corpus = NodeCorpus::from_labelled([&other]);
        let a = NodeSurrogate::new(corpus.clone()).accuracy(&n).unwrap();
        let b = NodeSurrogate::new(corpus).accuracy(&n).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, 0.0);
    }

    #[test]
    fn node_surrogate_needs_labels() {
        let n = parse_bench("c17", C17).unwrap();
        let mut s = NodeSurrogate::new(NodeCorpus::default());
        assert!(matches!(s.score(&n), Err(ScoreError::MissingLabels)));
    }
}
