//! Hash-consed Boolean expressions and their construction from truth tables
//! or from existing gates.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;

use super::tt::TruthTable;
use crate::netlist::GateType;

pub(crate) type ExprId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) enum Op {
    Var(usize),
    Const(bool),
    Not(ExprId),
    And(ExprId, ExprId),
    Or(ExprId, ExprId),
    Xor(ExprId, ExprId),
}

#[derive(Debug, Default)]
pub(crate) struct Arena {
    nodes: Vec<Op>,
    index: HashMap<Op, ExprId>,
}

impl Arena {
    pub fn op(&self, id: ExprId) -> Op {
        self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    fn intern(&mut self, op: Op) -> ExprId {
        if let Some(&id) = self.index.get(&op) {
            return id;
        }
        self.nodes.push(op);
        self.index.insert(op, self.nodes.len() - 1);
        self.nodes.len() - 1
    }

    pub fn var(&mut self, i: usize) -> ExprId {
        self.intern(Op::Var(i))
    }

    pub fn constant(&mut self, v: bool) -> ExprId {
        self.intern(Op::Const(v))
    }

    pub fn not(&mut self, a: ExprId) -> ExprId {
        match self.nodes[a] {
            Op::Not(x) => x,
            Op::Const(v) => self.constant(!v),
            _ => self.intern(Op::Not(a)),
        }
    }

    fn complementary(&self, a: ExprId, b: ExprId) -> bool {
        self.nodes[a] == Op::Not(b) || self.nodes[b] == Op::Not(a)
    }

    pub fn and(&mut self, a: ExprId, b: ExprId) -> ExprId {
        match (self.nodes[a], self.nodes[b]) {
            (Op::Const(false), _) | (_, Op::Const(false)) => self.constant(false),
            (Op::Const(true), _) => b,
            (_, Op::Const(true)) => a,
            _ if a == b => a,
            _ if self.complementary(a, b) => self.constant(false),
            _ => self.intern(Op::And(a.min(b), a.max(b))),
        }
    }

    pub fn or(&mut self, a: ExprId, b: ExprId) -> ExprId {
        match (self.nodes[a], self.nodes[b]) {
            (Op::Const(true), _) | (_, Op::Const(true)) => self.constant(true),
            (Op::Const(false), _) => b,
            (_, Op::Const(false)) => a,
            _ if a == b => a,
            _ if self.complementary(a, b) => self.constant(true),
            _ => self.intern(Op::Or(a.min(b), a.max(b))),
        }
    }

    /// XOR node; callers only use this when the basis has XOR or XNOR.
    pub fn xor(&mut self, a: ExprId, b: ExprId) -> ExprId {
        match (self.nodes[a], self.nodes[b]) {
            (Op::Const(false), _) => b,
            (_, Op::Const(false)) => a,
            (Op::Const(true), _) => self.not(b),
            (_, Op::Const(true)) => self.not(a),
            _ if a == b => self.constant(false),
            _ if self.complementary(a, b) => self.constant(true),
            _ => self.intern(Op::Xor(a.min(b), a.max(b))),
        }
    }

    /// Sum-of-products style XOR for bases without parity gates.
    pub fn xor_or_expand(&mut self, a: ExprId, b: ExprId, allow_xor: bool) -> ExprId {
        if allow_xor {
            return self.xor(a, b);
        }
        let (na, nb) = (self.not(a), self.not(b));
        let l = self.and(a, nb);
        let r = self.and(na, b);
        self.or(l, r)
    }

    /// Expression for one existing gate over already-translated operands.
    pub fn gate(&mut self, kind: GateType, ins: &[ExprId], allow_xor: bool) -> ExprId {
        let fold = |arena: &mut Arena, f: fn(&mut Arena, ExprId, ExprId) -> ExprId| {
            let mut acc = ins[0];
            for &x in &ins[1..] {
                acc = f(arena, acc, x);
            }
            acc
        };
        match kind {
            GateType::Const0 => self.constant(false),
            GateType::Const1 => self.constant(true),
            GateType::Buf => ins[0],
            GateType::Inv => self.not(ins[0]),
            GateType::And => fold(self, Arena::and),
            GateType::Nand => {
                let x = fold(self, Arena::and);
                self.not(x)
            }
            GateType::Or => fold(self, Arena::or),
            GateType::Nor => {
                let x = fold(self, Arena::or);
                self.not(x)
            }
            GateType::Xor | GateType::Xnor => {
                let mut acc = ins[0];
                for &x in &ins[1..] {
                    acc = self.xor_or_expand(acc, x, allow_xor);
                }
                if kind == GateType::Xnor {
                    self.not(acc)
                } else {
                    acc
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Split {
    // f = v OR g, v' OR g, v AND g, v' AND g
    Unate { positive: bool, or: bool },
    // f = v XOR g
    Parity,
    // f = v g1 + v' g0
    Shannon,
}

/// Recursive cofactor decomposition of functions over a fixed variable space.
pub(crate) struct Decomposer<'r, R> {
    /// Global variable index of each local variable.
    globals: Vec<usize>,
    memo: HashMap<TruthTable, ExprId>,
    allow_xor: bool,
    rng: &'r mut R,
}

impl<'r, R: Rng> Decomposer<'r, R> {
    pub fn new(globals: Vec<usize>, allow_xor: bool, rng: &'r mut R) -> Self {
        Decomposer { globals, memo: HashMap::new(), allow_xor, rng }
    }

    fn known(&self, f: &TruthTable) -> bool {
        f.const_value().is_some() || self.memo.contains_key(f) || self.memo.contains_key(&f.not())
    }

    // Literal-count proxy for realizing `f` from scratch.
    fn weight(&self, f: &TruthTable) -> usize {
        if self.known(f) {
            0
        } else {
            f.support().len()
        }
    }

    pub fn synth(&mut self, arena: &mut Arena, f: &TruthTable) -> ExprId {
        if let Some(v) = f.const_value() {
            return arena.constant(v);
        }
        if let Some(&id) = self.memo.get(f) {
            return id;
        }
        if let Some(&id) = self.memo.get(&f.not()) {
            return arena.not(id);
        }
        let mut support = f.support();
        support.shuffle(self.rng);
        let mut best: Option<(usize, usize, Split, TruthTable, TruthTable)> = None;
        for v in support {
            let f0 = f.cofactor(v, false);
            let f1 = f.cofactor(v, true);
            let (cost, split) = match (f0.const_value(), f1.const_value()) {
                (_, Some(true)) => (self.weight(&f0) + 1, Split::Unate { positive: true, or: true }),
                (_, Some(false)) => (self.weight(&f0) + 1, Split::Unate { positive: false, or: false }),
                (Some(false), _) => (self.weight(&f1) + 1, Split::Unate { positive: true, or: false }),
                (Some(true), _) => (self.weight(&f1) + 1, Split::Unate { positive: false, or: true }),
                _ if self.allow_xor && f1 == f0.not() => (self.weight(&f0) + 1, Split::Parity),
                _ => (self.weight(&f0) + self.weight(&f1) + 3, Split::Shannon),
            };
            if best.as_ref().is_none_or(|b| cost < b.0) {
                best = Some((cost, v, split, f0, f1));
            }
        }
        let (_, v, split, f0, f1) = best.expect("non-constant function has support");
        let x = arena.var(self.globals[v]);
        let id = match split {
            Split::Unate { positive, or } => {
                // the non-constant cofactor is the one selected by the literal's absence
                let rest = if (positive && or) || (!positive && !or) { &f0 } else { &f1 };
                let g = self.synth(arena, rest);
                let lit = if positive { x } else { arena.not(x) };
                if or {
                    arena.or(lit, g)
                } else {
                    arena.and(lit, g)
                }
            }
            Split::Parity => {
                let g = self.synth(arena, &f0);
                arena.xor(x, g)
            }
            Split::Shannon => {
                let g0 = self.synth(arena, &f0);
                let g1 = self.synth(arena, &f1);
                let nx = arena.not(x);
                let hi = arena.and(x, g1);
                let lo = arena.and(nx, g0);
                arena.or(hi, lo)
            }
        };
        self.memo.insert(f.clone(), id);
        id
    }
}

#[cfg(test)]
pub(crate) fn eval(arena: &Arena, id: ExprId, inputs: &[bool]) -> bool {
    match arena.op(id) {
        Op::Var(i) => inputs[i],
        Op::Const(v) => v,
        Op::Not(a) => !eval(arena, a, inputs),
        Op::And(a, b) => eval(arena, a, inputs) && eval(arena, b, inputs),
        Op::Or(a, b) => eval(arena, a, inputs) || eval(arena, b, inputs),
        Op::Xor(a, b) => eval(arena, a, inputs) ^ eval(arena, b, inputs),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn check(f: &TruthTable, allow_xor: bool, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut arena = Arena::default();
        let vars = f.vars();
        let id = Decomposer::new((0..vars).collect(), allow_xor, &mut rng).synth(&mut arena, f);
        for p in 0..(1usize << vars) {
            let bits: Vec<bool> = (0..vars).map(|i| (p >> i) & 1 == 1).collect();
            assert_eq!(eval(&arena, id, &bits), f.bit(p), "pattern {p}");
        }
        if !allow_xor {
            assert!((0..arena.len()).all(|i| !matches!(arena.op(i), Op::Xor(..))));
        }
    }

    #[test]
    fn random_functions_decompose_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for vars in 1..=7 {
            for seed in 0..8 {
                let words = (0..crate::verify::exhaustive_word_count(vars)).map(|_| rng.gen()).collect();
                let f = TruthTable::from_words(vars, words);
                check(&f, false, seed);
                check(&f, true, seed);
            }
        }
    }

    #[test]
    fn parity_uses_xor_only_when_allowed() {
        let a = TruthTable::var(3, 0);
        let b = TruthTable::var(3, 1);
        let c = TruthTable::var(3, 2);
        let words: Vec<u64> =
            a.words().iter().zip(b.words()).zip(c.words()).map(|((x, y), z)| x ^ y ^ z).collect();
        let f = TruthTable::from_words(3, words);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut arena = Arena::default();
        Decomposer::new(vec![0, 1, 2], true, &mut rng).synth(&mut arena, &f);
        let xors = (0..arena.len()).filter(|&i| matches!(arena.op(i), Op::Xor(..))).count();
        assert_eq!(xors, 2);
        check(&f, false, 0);
    }

    #[test]
    fn simplifications() {
        let mut a = Arena::default();
        let x = a.var(0);
        let nx = a.not(x);
        assert_eq!(a.not(nx), x);
        assert_eq!(a.and(x, nx), a.constant(false));
        assert_eq!(a.or(x, nx), a.constant(true));
        let y = a.var(1);
        assert_eq!(a.and(x, y), a.and(y, x));
    }
}
