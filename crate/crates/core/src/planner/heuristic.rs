use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand::distributions::{Distribution, WeightedIndex};

use super::{
    Decision, HistoryEntry, Mapping, PlanContext, PlanError, Planner, PlanningOrder, Provenance, RewritePlan,
};
use crate::score::ScorerKind;

pub const DEFAULT_EPSILON: f64 = 0.2;
pub const COLD_START_HOP: u32 = 4;
pub const COLD_START_MAPPING: u8 = 1;
/// Scales mean reward before exponentiation when reweighting hop priors.
pub const HOP_SHARPNESS: f64 = 5.0;

/// Decisions already fixed when a later decision is taken.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PartialPlan {
    pub gates: Option<Vec<String>>,
    pub mapping: Option<Mapping>,
    pub hop: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTrace {
    pub decision: Decision,
    pub known: PartialPlan,
}

#[derive(Debug, Clone)]
pub struct HeuristicPlanner {
    epsilon: f64,
    rng: ChaCha8Rng,
    trace: Vec<DecisionTrace>,
}

impl HeuristicPlanner {
    pub fn new(seed: u64) -> Self {
        Self::with_epsilon(seed, DEFAULT_EPSILON)
    }

    pub fn with_epsilon(seed: u64, epsilon: f64) -> Self {
        HeuristicPlanner { epsilon, rng: ChaCha8Rng::seed_from_u64(seed), trace: Vec::new() }
    }

    /// What each decision of the most recent plan could see.
    pub fn last_trace(&self) -> &[DecisionTrace] {
        &self.trace
    }

    fn select_gates(&self, ctx: &PlanContext, known: &PartialPlan) -> Vec<String> {
        let mut ranked: Vec<(bool, usize)> = ctx
            .pool
            .iter()
            .enumerate()
            .map(|(i, p)| {
                // gates already inside the basis change least under remapping
                let covered = known.mapping.is_some_and(|m| m.allows(p.features.gate_type));
                (covered, i)
            })
            .collect();
        ranked.sort();
        ranked.into_iter().take(ctx.effective_n()).map(|(_, i)| ctx.pool[i].id.clone()).collect()
    }

    fn decide_mapping(&mut self, ctx: &PlanContext, known: &PartialPlan) -> Mapping {
        if ctx.history.is_empty() {
            return Mapping::new(COLD_START_MAPPING).expect("valid code");
        }
        let relevant = conditioned(&ctx.history, |e| known.hop.is_none_or(|h| e.hop.abs_diff(h) <= 2));
        heuristic_decide_mapping(&relevant, self.epsilon, &mut self.rng)
    }

    fn decide_hop(&mut self, ctx: &PlanContext, known: &PartialPlan) -> u32 {
        let (lo, hi) = support(ctx.tool, ctx.hop_range);
        if ctx.history.is_empty() {
            return COLD_START_HOP.clamp(lo, hi);
        }
        let relevant = conditioned(&ctx.history, |e| known.mapping.is_none_or(|m| e.mapping == m));
        heuristic_decide_hop(&relevant, ctx.tool, ctx.hop_range, &mut self.rng)
    }
}

impl Planner for HeuristicPlanner {
    fn plan(&mut self, ctx: &PlanContext, order: PlanningOrder) -> Result<RewritePlan, PlanError> {
        if ctx.pool.is_empty() {
            return Err(PlanError::EmptyPool);
        }
        self.trace.clear();
        let mut known = PartialPlan::default();
        for decision in order.decisions() {
            self.trace.push(DecisionTrace { decision, known: known.clone() });
            match decision {
                Decision::Location => known.gates = Some(self.select_gates(ctx, &known)),
                Decision::Mapping => known.mapping = Some(self.decide_mapping(ctx, &known)),
                Decision::Hop => known.hop = Some(self.decide_hop(ctx, &known)),
            }
        }
        Ok(RewritePlan {
            gates: known.gates.expect("location decided"),
            mapping: known.mapping.expect("mapping decided"),
            hop: known.hop.expect("hop decided"),
            order,
            provenance: Provenance::Heuristic,
            revision: 0,
        })
    }
}

// Entries matching `keep`, or all of them when none match.
fn conditioned(history: &[HistoryEntry], keep: impl Fn(&HistoryEntry) -> bool) -> Vec<HistoryEntry> {
    let subset: Vec<HistoryEntry> = history.iter().filter(|e| keep(e)).cloned().collect();
    if subset.is_empty() {
        history.to_vec()
    } else {
        subset
    }
}

fn mean_rewards<K: Ord>(history: &[HistoryEntry], key: impl Fn(&HistoryEntry) -> K) -> BTreeMap<K, f64> {
    let mut acc: BTreeMap<K, (f64, usize)> = BTreeMap::new();
    for e in history {
        let slot = acc.entry(key(e)).or_default();
        slot.0 += e.reward;
        slot.1 += 1;
    }
    acc.into_iter().map(|(k, (s, c))| (k, s / c as f64)).collect()
}

/// ε-greedy over codes by mean historical reward. Untried codes are explored
/// before tried ones, and also win over a best code whose mean is not positive.
pub fn heuristic_decide_mapping(history: &[HistoryEntry], epsilon: f64, rng: &mut impl Rng) -> Mapping {
    let means = mean_rewards(history, |e| e.mapping);
    let untried: Vec<Mapping> = Mapping::all().filter(|m| !means.contains_key(m)).collect();
    let best = means
        .iter()
        .fold(None, |acc: Option<(Mapping, f64)>, (&m, &r)| match acc {
            Some((_, br)) if br >= r => acc,
            _ => Some((m, r)),
        });
    let Some((best, best_reward)) = best else {
        return *untried.choose(rng).expect("twenty mappings");
    };
    let explore = rng.gen::<f64>() < epsilon;
    if !explore && (best_reward > 0.0 || untried.is_empty()) {
        return best;
    }
    if !untried.is_empty() {
        return *untried.choose(rng).expect("nonempty");
    }
    let others: Vec<Mapping> = Mapping::all().filter(|&m| m != best).collect();
    *others.choose(rng).expect("nineteen others")
}

/// Tool-specific hop support, intersected with `range`.
pub fn hop_prior(tool: ScorerKind, range: (u32, u32)) -> (u32, u32) {
    support(tool, range)
}

fn support(tool: ScorerKind, range: (u32, u32)) -> (u32, u32) {
    let (plo, phi) = match tool {
        ScorerKind::KeyAccuracy => (4, 8),
        ScorerKind::NodeAccuracy => (12, 16),
        ScorerKind::Similarity => range,
    };
    let (lo, hi) = (plo.max(range.0), phi.min(range.1));
    if lo <= hi {
        (lo, hi)
    } else {
        range
    }
}

/// Samples a hop from the tool prior reweighted by `exp(κ · mean reward)`.
pub fn heuristic_decide_hop(
    history: &[HistoryEntry],
    tool: ScorerKind,
    range: (u32, u32),
    rng: &mut impl Rng,
) -> u32 {
    let (lo, hi) = support(tool, range);
    let means = mean_rewards(history, |e| e.hop);
    let hops: Vec<u32> = (lo..=hi).collect();
    let weights: Vec<f64> =
        hops.iter().map(|h| (HOP_SHARPNESS * means.get(h).copied().unwrap_or(0.0)).clamp(-50.0, 50.0).exp()).collect();
    let dist = WeightedIndex::new(&weights).expect("positive weights");
    hops[dist.sample(rng)]
}
