//! Per-iteration rewrite plans: which gates, which basis, how far to reach.

mod heuristic;
mod llm;
mod mapping;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::NodeFeatures;
use crate::score::ScorerKind;

pub use heuristic::{
    heuristic_decide_hop, heuristic_decide_mapping, hop_prior, DecisionTrace, HeuristicPlanner, PartialPlan,
    COLD_START_HOP, COLD_START_MAPPING, DEFAULT_EPSILON, HOP_SHARPNESS,
};
pub use llm::{
    build_request, parse_reply, HttpTransport, LlmPlanner, PlanReply, PlanRequest, PlanTransport, ScriptedTransport,
    SYSTEM_PROMPT,
};
pub use mapping::{Element, Mapping};

pub const DEFAULT_N_GATES: usize = 5;
pub const HOP_LIMITS: (u32, u32) = (1, 20);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    Location,
    Mapping,
    Hop,
}

impl Decision {
    fn letter(self) -> char {
        match self {
            Decision::Location => 'L',
            Decision::Mapping => 'M',
            Decision::Hop => 'H',
        }
    }
}

/// The order in which location, mapping and hop are decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum PlanningOrder {
    #[default]
    Lmh,
    Lhm,
    Mlh,
    Mhl,
    Hlm,
    Hml,
}

impl PlanningOrder {
    pub const ALL: [PlanningOrder; 6] = [
        PlanningOrder::Lmh,
        PlanningOrder::Lhm,
        PlanningOrder::Mlh,
        PlanningOrder::Mhl,
        PlanningOrder::Hlm,
        PlanningOrder::Hml,
    ];

    pub fn decisions(self) -> [Decision; 3] {
        use Decision::*;
        match self {
            PlanningOrder::Lmh => [Location, Mapping, Hop],
            PlanningOrder::Lhm => [Location, Hop, Mapping],
            PlanningOrder::Mlh => [Mapping, Location, Hop],
            PlanningOrder::Mhl => [Mapping, Hop, Location],
            PlanningOrder::Hlm => [Hop, Location, Mapping],
            PlanningOrder::Hml => [Hop, Mapping, Location],
        }
    }
}

impl fmt::Display for PlanningOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in self.decisions() {
            write!(f, "{}", d.letter())?;
        }
        Ok(())
    }
}

impl FromStr for PlanningOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let up = s.to_ascii_uppercase();
        PlanningOrder::ALL
            .into_iter()
            .find(|o| o.to_string() == up)
            .ok_or_else(|| format!("unknown planning order `{s}`"))
    }
}

impl Serialize for PlanningOrder {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PlanningOrder {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Heuristic,
    Llm,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewritePlan {
    pub gates: Vec<String>,
    pub mapping: Mapping,
    pub hop: u32,
    pub order: PlanningOrder,
    pub provenance: Provenance,
    pub revision: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub id: String,
    pub features: NodeFeatures,
}

/// Outcome of one past iteration, as the planner sees it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iter: usize,
    pub mapping: Mapping,
    pub hop: u32,
    pub security: f64,
    pub area_overhead: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanContext {
    pub pool: Vec<PoolEntry>,
    pub history: Vec<HistoryEntry>,
    pub tool: ScorerKind,
    pub n_gates: usize,
    pub hop_range: (u32, u32),
    /// Reason the previous attempt at this iteration was rejected.
    pub feedback: Option<String>,
}

impl PlanContext {
    pub fn new(pool: Vec<PoolEntry>, tool: ScorerKind) -> Self {
        PlanContext { pool, history: Vec::new(), tool, n_gates: DEFAULT_N_GATES, hop_range: HOP_LIMITS, feedback: None }
    }

    /// Number of gates a plan must select.
    pub fn effective_n(&self) -> usize {
        self.n_gates.min(self.pool.len())
    }

    pub fn in_pool(&self, id: &str) -> bool {
        self.pool.iter().any(|p| p.id == id)
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PlanError {
    #[error("planner transport failed: {message}")]
    Transport { message: String, raw: String },
    #[error("plan reply violates schema: {message}")]
    Schema { message: String, raw: String },
    #[error("gate `{gate}` is not in the offered pool")]
    OutOfPool { gate: String, raw: String },
    #[error("hop {hop} outside [{lo}, {hi}]")]
    HopRange { hop: i64, lo: u32, hi: u32, raw: String },
    #[error("plan selects {got} gates, expected {expected}")]
    GateCount { got: usize, expected: usize, raw: String },
    #[error("candidate pool is empty")]
    EmptyPool,
}

impl PlanError {
    /// Raw backend payload that triggered the error, if any.
    pub fn raw(&self) -> &str {
        match self {
            PlanError::Transport { raw, .. }
            | PlanError::Schema { raw, .. }
            | PlanError::OutOfPool { raw, .. }
            | PlanError::HopRange { raw, .. }
            | PlanError::GateCount { raw, .. } => raw,
            PlanError::EmptyPool => "",
        }
    }

    pub fn is_retryable(&self) -> bool {
        !matches!(self, PlanError::EmptyPool)
    }
}

pub trait Planner {
    fn plan(&mut self, ctx: &PlanContext, order: PlanningOrder) -> Result<RewritePlan, PlanError>;
}

impl<P: Planner + ?Sized> Planner for Box<P> {
    fn plan(&mut self, ctx: &PlanContext, order: PlanningOrder) -> Result<RewritePlan, PlanError> {
        (**self).plan(ctx, order)
    }
}

/// The single validator every backend's plans go through.
pub fn validate_plan(plan: &RewritePlan, ctx: &PlanContext) -> Result<(), PlanError> {
    let raw = || serde_json::to_string(plan).unwrap_or_default();
    let expected = ctx.effective_n();
    if plan.gates.len() != expected {
        return Err(PlanError::GateCount { got: plan.gates.len(), expected, raw: raw() });
    }
    let mut seen = std::collections::HashSet::new();
    for g in &plan.gates {
        if !ctx.in_pool(g) {
            return Err(PlanError::OutOfPool { gate: g.clone(), raw: raw() });
        }
        if !seen.insert(g) {
            return Err(PlanError::Schema { message: format!("gate `{g}` selected twice"), raw: raw() });
        }
    }
    let (lo, hi) = ctx.hop_range;
    if plan.hop < lo || plan.hop > hi {
        return Err(PlanError::HopRange { hop: plan.hop as i64, lo, hi, raw: raw() });
    }
    Ok(())
}

/// Uninformed planner: pool head, uniform mapping, uniform hop.
#[derive(Debug, Clone)]
pub struct RandomPlanner {
    rng: ChaCha8Rng,
}

impl RandomPlanner {
    pub fn new(seed: u64) -> Self {
        RandomPlanner { rng: ChaCha8Rng::seed_from_u64(seed) }
    }
}

impl Planner for RandomPlanner {
    fn plan(&mut self, ctx: &PlanContext, order: PlanningOrder) -> Result<RewritePlan, PlanError> {
        if ctx.pool.is_empty() {
            return Err(PlanError::EmptyPool);
        }
        let all: Vec<Mapping> = Mapping::all().collect();
        let mapping = *all.choose(&mut self.rng).expect("twenty mappings");
        let hop = self.rng.gen_range(ctx.hop_range.0..=ctx.hop_range.1);
        let gates = ctx.pool.iter().take(ctx.effective_n()).map(|p| p.id.clone()).collect();
        Ok(RewritePlan { gates, mapping, hop, order, provenance: Provenance::Random, revision: 0 })
    }
}


#[cfg(test)]
mod tests {
    use super::test_support::pool;
    use super::*;

    #[test]
    fn orders_are_permutations() {
        for o in PlanningOrder::ALL {
            let mut d: Vec<char> = o.decisions().iter().map(|d| d.letter()).collect();
            d.sort();
            assert_eq!(d, vec!['H', 'L', 'M']);
            assert_eq!(o.to_string().parse::<PlanningOrder>().unwrap(), o);
        }
        assert_eq!(PlanningOrder::default().to_string(), "LMH");
    }

    #[test]
    fn validator_rejects_violations() {
        let ctx = PlanContext::new(pool(6), ScorerKind::Similarity);
        let ok = RewritePlan {
            gates: (0..5).map(|i| format!("g{i}")).collect(),
            mapping: Mapping::new(7).unwrap(),
            hop: 3,
            order: PlanningOrder::Lmh,
            provenance: Provenance::Llm,
            revision: 0,
        };
        validate_plan(&ok, &ctx).unwrap();
        let mut bad = ok.clone();
        bad.hop = 25;
        assert!(matches!(validate_plan(&bad, &ctx), Err(PlanError::HopRange { hop: 25, .. })));
        let mut bad = ok.clone();
        bad.gates[0] = "zz".into();
        assert!(matches!(validate_plan(&bad, &ctx), Err(PlanError::OutOfPool { .. })));
        let mut bad = ok.clone();
        bad.gates.pop();
        assert!(matches!(validate_plan(&bad, &ctx), Err(PlanError::GateCount { got: 4, .. })));
        let mut bad = ok;
        bad.gates[1] = "g0".into();
        assert!(matches!(validate_plan(&bad, &ctx), Err(PlanError::Schema { .. })));
    }

    #[test]
    fn random_planner_plans_are_valid() {
        let ctx = PlanContext::new(pool(3), ScorerKind::NodeAccuracy);
        let mut p = RandomPlanner::new(1);
        for _ in 0..100 {
            let plan = p.plan(&ctx, PlanningOrder::Hml).unwrap();
            validate_plan(&plan, &ctx).unwrap();
        }
    }
}
