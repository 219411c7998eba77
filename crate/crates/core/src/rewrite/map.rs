//! Polarity-aware covering of an expression DAG with the gates of a basis.

use std::collections::{BTreeSet, HashMap, HashSet};

use super::expr::{Arena, ExprId, Op};
use super::RewriteError;
use crate::netlist::{Gate, GateType, NameGen};
use crate::score::CellAreaTable;

#[derive(Debug, Clone)]
struct Choice {
    gate: Option<GateType>,
    operands: Vec<(ExprId, bool)>,
}

#[derive(Debug, Clone, Copy)]
enum Best {
    Direct(usize),
    Swap,
}

pub(crate) struct Mapper<'a> {
    arena: &'a Arena,
    allowed: &'a BTreeSet<GateType>,
    area: &'a CellAreaTable,
    /// Variable node for the first boundary input, used to build constants.
    anchor: Option<ExprId>,
    choices: Vec<[Vec<Choice>; 2]>,
    cost: Vec<[f64; 2]>,
    best: Vec<[Best; 2]>,
}

fn pol(p: bool) -> usize {
    p as usize
}

impl<'a> Mapper<'a> {
    pub fn new(
        arena: &'a Arena,
        allowed: &'a BTreeSet<GateType>,
        area: &'a CellAreaTable,
        anchor: Option<ExprId>,
    ) -> Self {
        let mut m = Mapper {
            arena,
            allowed,
            area,
            anchor,
            choices: Vec::new(),
            cost: Vec::new(),
            best: Vec::new(),
        };
        m.solve();
        m
    }

    fn price(&self, t: GateType) -> f64 {
        let arity = if matches!(t, GateType::Inv | GateType::Buf) { 1 } else { 2 };
        self.area.price(t, arity).unwrap_or(1.0)
    }

    fn options(&self, op: Op, positive: bool) -> Vec<Choice> {
        use GateType::*;
        let g = |t: GateType, ops: Vec<(ExprId, bool)>| Choice { gate: Some(t), operands: ops };
        let raw: Vec<Choice> = match op {
            Op::Var(_) => {
                if positive {
                    vec![Choice { gate: None, operands: vec![] }]
                } else {
                    vec![]
                }
            }
            Op::Not(a) => vec![Choice { gate: None, operands: vec![(a, !positive)] }],
            Op::Const(v) => match self.anchor {
                None => vec![],
                Some(x) => {
                    let pair = vec![(x, true), (x, false)];
                    if v == positive {
                        vec![g(Or, pair.clone()), g(Nand, pair), g(Xnor, vec![(x, true), (x, true)])]
                    } else {
                        vec![g(And, pair.clone()), g(Nor, pair), g(Xor, vec![(x, true), (x, true)])]
                    }
                }
            },
            Op::And(a, b) => {
                if positive {
                    vec![g(And, vec![(a, true), (b, true)]), g(Nor, vec![(a, false), (b, false)])]
                } else {
                    vec![g(Nand, vec![(a, true), (b, true)]), g(Or, vec![(a, false), (b, false)])]
                }
            }
            Op::Or(a, b) => {
                if positive {
                    vec![g(Or, vec![(a, true), (b, true)]), g(Nand, vec![(a, false), (b, false)])]
                } else {
                    vec![g(Nor, vec![(a, true), (b, true)]), g(And, vec![(a, false), (b, false)])]
                }
            }
            Op::Xor(a, b) => {
                if positive {
                    vec![
                        g(Xor, vec![(a, true), (b, true)]),
                        g(Xnor, vec![(a, false), (b, true)]),
                        g(Xnor, vec![(a, true), (b, false)]),
                        g(Xor, vec![(a, false), (b, false)]),
                    ]
                } else {
                    vec![
                        g(Xnor, vec![(a, true), (b, true)]),
                        g(Xor, vec![(a, false), (b, true)]),
                        g(Xor, vec![(a, true), (b, false)]),
                        g(Xnor, vec![(a, false), (b, false)]),
                    ]
                }
            }
        };
        raw.into_iter().filter(|c| c.gate.is_none_or(|t| self.allowed.contains(&t))).collect()
    }

    // Children precede parents in the arena; the anchor may have been interned
    // after the constants that use it, so it is settled first.
    fn solve(&mut self) {
        let inv = if self.allowed.contains(&GateType::Inv) { self.price(GateType::Inv) } else { f64::INFINITY };
        let len = self.arena.len();
        self.choices = vec![[Vec::new(), Vec::new()]; len];
        self.cost = vec![[f64::INFINITY; 2]; len];
        self.best = vec![[Best::Swap; 2]; len];
        let order: Vec<usize> = self.anchor.into_iter().chain((0..len).filter(|&i| Some(i) != self.anchor)).collect();
        for id in order {
            let op = self.arena.op(id);
            let mut direct = [f64::INFINITY; 2];
            let mut best = [Best::Swap; 2];
            let mut choices: [Vec<Choice>; 2] = [Vec::new(), Vec::new()];
            for p in [false, true] {
                choices[pol(p)] = self.options(op, p);
                for (k, c) in choices[pol(p)].iter().enumerate() {
                    let own = c.gate.map_or(0.0, |t| self.price(t));
                    let total = own + c.operands.iter().map(|&(o, q)| self.cost[o][pol(q)]).sum::<f64>();
                    if total < direct[pol(p)] {
                        direct[pol(p)] = total;
                        best[pol(p)] = Best::Direct(k);
                    }
                }
            }
            let mut cost = direct;
            for p in [false, true] {
                let swapped = direct[pol(!p)] + inv;
                if swapped < cost[pol(p)] {
                    cost[pol(p)] = swapped;
                    best[pol(p)] = Best::Swap;
                }
            }
            self.choices[id] = choices;
            self.cost[id] = cost;
            self.best[id] = best;
        }
    }
}

/// Emits gates realizing expression roots as named outputs.
pub(crate) struct Builder<'m, 'a> {
    mapper: &'m Mapper<'a>,
    inputs: &'m [String],
    nets: NameGen<'m>,
    ids: NameGen<'m>,
    built: HashMap<(ExprId, bool), String>,
    pub gates: Vec<Gate>,
}

impl<'m, 'a> Builder<'m, 'a> {
    pub fn new(mapper: &'m Mapper<'a>, inputs: &'m [String], taken: &'m HashSet<String>) -> Self {
        Builder {
            mapper,
            inputs,
            nets: NameGen::new("t", taken),
            ids: NameGen::new("r", taken),
            built: HashMap::new(),
            gates: Vec::new(),
        }
    }

    fn emit(&mut self, kind: GateType, ins: Vec<String>) -> String {
        let out = self.nets.fresh();
        self.gates.push(Gate::new(self.ids.fresh(), kind, ins, out.clone()));
        out
    }

    pub fn realize(&mut self, id: ExprId, positive: bool) -> Result<String, RewriteError> {
        if let Some(net) = self.built.get(&(id, positive)) {
            return Ok(net.clone());
        }
        if !self.mapper.cost[id][pol(positive)].is_finite() {
            return Err(RewriteError::Unmappable(format!("{:?} has no realization in the basis", self.mapper.arena.op(id))));
        }
        let net = match self.mapper.best[id][pol(positive)] {
            Best::Swap => {
                let inner = self.realize_direct(id, !positive)?;
                self.emit(GateType::Inv, vec![inner])
            }
            Best::Direct(k) => self.realize_choice(id, positive, k)?,
        };
        self.built.insert((id, positive), net.clone());
        Ok(net)
    }

    fn realize_direct(&mut self, id: ExprId, positive: bool) -> Result<String, RewriteError> {
        if let Some(net) = self.built.get(&(id, positive)) {
            return Ok(net.clone());
        }
        let k = match self.mapper.best[id][pol(positive)] {
            Best::Direct(k) => k,
            Best::Swap => {
                // cheapest direct option; exists since the swap was costed from it
                let c = &self.mapper.choices[id][pol(positive)];
                (0..c.len())
                    .min_by(|&x, &y| self.choice_cost(&c[x]).total_cmp(&self.choice_cost(&c[y])))
                    .ok_or_else(|| RewriteError::Unmappable(format!("{:?}", self.mapper.arena.op(id))))?
            }
        };
        let net = self.realize_choice(id, positive, k)?;
        self.built.insert((id, positive), net.clone());
        Ok(net)
    }

    fn choice_cost(&self, c: &Choice) -> f64 {
        c.gate.map_or(0.0, |t| self.mapper.price(t)) + c.operands.iter().map(|&(o, q)| self.mapper.cost[o][pol(q)]).sum::<f64>()
    }

    fn realize_choice(&mut self, id: ExprId, positive: bool, k: usize) -> Result<String, RewriteError> {
        let choice = self.mapper.choices[id][pol(positive)][k].clone();
        match choice.gate {
            None => match self.mapper.arena.op(id) {
                Op::Var(i) => Ok(self.inputs[i].clone()),
                _ => {
                    let (o, q) = choice.operands[0];
                    self.realize(o, q)
                }
            },
            Some(kind) => {
                let mut ins = Vec::with_capacity(choice.operands.len());
                for (o, q) in choice.operands {
                    ins.push(self.realize(o, q)?);
                }
                Ok(self.emit(kind, ins))
            }
        }
    }
}
