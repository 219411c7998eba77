//! The attack loop: bin, sample, plan, extract, rewrite, verify, splice,
//! score, learn.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{build_bins, compute_features, rebin_after_rewrite, BinId, BinScheme, DEFAULT_BIN_CAPACITY};
use crate::hash::{combine, mix};
use crate::netlist::Netlist;
use crate::planner::{
    validate_plan, HistoryEntry, Planner, PlanContext, PlanningOrder, PoolEntry, RandomPlanner, RewritePlan, HOP_LIMITS,
};
use crate::policy::{compute_reward, BinPolicy, PolicyConfig, DEFAULT_ALPHA, DEFAULT_BETA};
use crate::rewrite::{abc_adapter, resynthesize_with, AbcConfig, RewriteError, RewriteOptions, DEFAULT_TT_WIDTH};
use crate::score::{area, AreaError, CellAreaTable, ScoreError, ScoreReport, Scorer, ScorerKind, DEFAULT_KEY_BAND};
use crate::subnetlist::{extract, reinsert};
use crate::verify::{check_equivalence, validate_structure, EquivBudget, Verdict};

/// How the candidate pool is drawn each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Softmax over feature bins, updated by REINFORCE.
    #[default]
    Bins,
    /// Uniform over all gates; no learning.
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    pub tool: ScorerKind,
    pub max_iters: usize,
    pub revision_budget: u32,
    pub pool_size: usize,
    pub n_gates: usize,
    pub hop_range: (u32, u32),
    pub alpha: f64,
    pub beta: f64,
    pub order: PlanningOrder,
    pub seed: u64,
    pub stop_on_evasion: bool,
    /// Iterations to keep going after the first evasion, for area.
    pub polish_iters: usize,
    pub sampling: Sampling,
    pub bin_scheme: BinScheme,
    pub bin_capacity: usize,
    pub learning_rate: f64,
    pub temperature: f64,
    pub per_bin_quota: usize,
    pub baseline_decay: f64,
    pub tt_width: usize,
    pub equiv: EquivBudget,
    pub key_band: f64,
    pub area_table: CellAreaTable,
    /// ABC executable; the internal mapper is used when unset or missing.
    pub abc: Option<PathBuf>,
    pub abc_script: Option<String>,
}

impl Default for AttackConfig {
    fn default() -> Self {
        let policy = PolicyConfig::default();
        AttackConfig {
            tool: ScorerKind::Similarity,
            max_iters: 50,
            revision_budget: 3,
            pool_size: 20,
            n_gates: 5,
            hop_range: HOP_LIMITS,
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            order: PlanningOrder::default(),
            seed: 0,
            stop_on_evasion: true,
            polish_iters: 0,
            sampling: Sampling::Bins,
            bin_scheme: BinScheme::default(),
            bin_capacity: DEFAULT_BIN_CAPACITY,
            learning_rate: policy.learning_rate,
            temperature: policy.temperature,
            per_bin_quota: policy.per_bin_quota,
            baseline_decay: policy.baseline_decay,
            tt_width: DEFAULT_TT_WIDTH,
            equiv: EquivBudget::default(),
            key_band: DEFAULT_KEY_BAND,
            area_table: CellAreaTable::default(),
            abc: None,
            abc_script: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid attack configuration: {0}")]
pub struct ConfigError(pub String);

impl AttackConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError(m.to_string()));
        if self.max_iters == 0 || self.pool_size == 0 || self.n_gates == 0 || self.bin_capacity == 0 {
            return bad("iteration, pool, gate and bin bounds must be positive");
        }
        if self.n_gates > self.pool_size {
            return bad("n_gates exceeds pool_size");
        }
        let (lo, hi) = self.hop_range;
        if lo == 0 || lo > hi || hi > HOP_LIMITS.1 {
            return bad("hop range must satisfy 1 <= lo <= hi <= 20");
        }
        if self.temperature <= 0.0 || self.learning_rate <= 0.0 || self.per_bin_quota == 0 {
            return bad("temperature, learning rate and quota must be positive");
        }
        if !(0.0..=1.0).contains(&self.baseline_decay) {
            return bad("baseline decay must lie in [0, 1]");
        }
        Ok(())
    }

    fn policy(&self) -> PolicyConfig {
        PolicyConfig {
            learning_rate: self.learning_rate,
            temperature: self.temperature,
            per_bin_quota: self.per_bin_quota,
            baseline_decay: self.baseline_decay,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Error)]
pub enum AttackError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("input netlist is invalid: {0}")]
    Input(String),
    #[error("scorer failed: {0}")]
    Scorer(#[from] ScoreError),
    #[error(transparent)]
    Area(#[from] AreaError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub pool: Vec<String>,
    pub bins_sampled: Vec<usize>,
    /// The accepted plan, or the last rejected one.
    pub plan: Option<RewritePlan>,
    pub accepted: bool,
    pub rejections: Vec<String>,
    pub verdict: Option<Verdict>,
    pub security: Option<f64>,
    pub area: Option<f64>,
    pub overhead: Option<f64>,
    pub reward: Option<f64>,
    pub evaded: bool,
    pub query_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub evaded: bool,
    /// Iteration that produced the returned netlist; 0 means the input.
    pub best_iteration: usize,
    pub best_security: f64,
    pub best_area: f64,
    pub best_overhead: f64,
    pub baseline_security: f64,
    pub baseline_area: f64,
    pub iterations: usize,
    pub iterations_to_evasion: Option<usize>,
    pub total_queries: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub records: Vec<IterationRecord>,
    pub summary: Summary,
}

impl Trajectory {
    /// One JSON object per iteration, newline terminated.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary serializes")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,accepted,mapping,hop,security,area,overhead,reward,evaded,query_count\n");
        let f = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.iteration,
                r.accepted,
                r.plan.as_ref().map(|p| p.mapping.code()).unwrap_or_default(),
                r.plan.as_ref().map(|p| p.hop.to_string()).unwrap_or_default(),
                f(r.security),
                f(r.area),
                f(r.overhead),
                f(r.reward),
                r.evaded,
                r.query_count
            );
        }
        out
    }

    /// Writes `{stem}.jsonl`, `{stem}.summary.json` and `{stem}.csv` into `dir`.
    pub fn write(&self, dir: &Path, stem: &str) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{stem}.jsonl")), self.to_jsonl())?;
        std::fs::write(dir.join(format!("{stem}.summary.json")), self.summary_json())?;
        std::fs::write(dir.join(format!("{stem}.csv")), self.to_csv())
    }
}

#[derive(Debug, Clone)]
pub struct AttackOutcome {
    pub netlist: Netlist,
    pub trajectory: Trajectory,
}

struct Candidate {
    netlist: Netlist,
    verdict: Verdict,
}

fn try_plan(
    working: &Netlist,
    n0: &Netlist,
    plan: &RewritePlan,
    cfg: &AttackConfig,
    seed: u64,
) -> Result<Candidate, String> {
    let sub = extract(working, &plan.gates, plan.hop).map_err(|e| format!("extraction failed: {e}"))?;
    let opts = RewriteOptions { tt_width: cfg.tt_width, seed, area: cfg.area_table.clone() };
    let internal = || resynthesize_with(&sub.inner, plan.mapping, &opts);
    let replacement = match &cfg.abc {
        Some(exe) => {
            let abc = AbcConfig {
                executable: exe.clone(),
                script: cfg.abc_script.clone().unwrap_or_else(|| AbcConfig::default().script),
            };
            match abc_adapter(&sub.inner, plan.mapping, &abc, &opts) {
                Err(RewriteError::Adapter(e)) => {
                    log::warn!("synthesizer adapter unavailable, using internal mapper: {e}");
                    internal()
                }
                other => other,
            }
        }
        None => internal(),
    }
    .map_err(|e| format!("resynthesis into {} failed: {e}", plan.mapping))?;
    let candidate = reinsert(working, &sub, &replacement).map_err(|e| format!("reinsertion failed: {e}"))?;
    let report = validate_structure(&candidate);
    if !report.structure_ok() {
        return Err("rewritten netlist failed structural validation".into());
    }
    let verdict = check_equivalence(n0, &candidate, &cfg.equiv).map_err(|e| format!("equivalence check failed: {e}"))?;
    if !verdict.is_equal() {
        return Err(format!("rewrite changed the circuit function ({})", verdict.tier()));
    }
    Ok(Candidate { netlist: candidate, verdict })
}

fn pool_entries(n: &Netlist, gates: &[String]) -> Vec<PoolEntry> {
    let features = compute_features(n);
    gates.iter().filter_map(|g| features.get(g).map(|f| PoolEntry { id: g.clone(), features: *f })).collect()
}

// Lexicographic best: evaded first, then smaller area.
// Evaders rank by area; otherwise the closer to the threshold wins.
fn better(a: &ScoreReport, b: &ScoreReport) -> bool {
    match (a.evaded, b.evaded) {
        (true, false) => true,
        (false, true) => false,
        (true, true) => a.area < b.area,
        (false, false) => {
            let (da, db) = (a.normalized_distance(), b.normalized_distance());
            da < db || (da == db && a.area < b.area)
        }
    }
}

/// Runs the closed loop from `n0`. Every accepted netlist is checked for
/// equivalence against `n0` before it is scored.
pub fn run_attack<S: Scorer + ?Sized, P: Planner + ?Sized>(
    n0: &Netlist,
    cfg: &AttackConfig,
    scorer: &mut S,
    planner: &mut P,
) -> Result<AttackOutcome, AttackError> {
    cfg.validate()?;
    n0.check().map_err(|e| AttackError::Input(e.to_string()))?;
    if n0.gates().is_empty() {
        return Err(AttackError::Input("netlist has no gates".into()));
    }
    let kind = scorer.kind();
    let base_area = area(n0, &cfg.area_table)?;
    let base_security = scorer.score(n0)?;
    let mut queries = 1usize;
    let baseline = ScoreReport::with_band(kind, base_security, base_area, base_area, cfg.key_band);

    let mut policy = BinPolicy::new(cfg.policy());
    let mut uniform_rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed ^ 0x756e_6966));
    let mut working = n0.clone();
    let mut current = baseline;
    let mut table = build_bins(&compute_features(&working), cfg.bin_scheme, cfg.bin_capacity);
    let mut history: Vec<HistoryEntry> = Vec::new();
    let mut records = Vec::new();
    let mut best: Option<(usize, ScoreReport, Netlist)> = None;
    let mut first_evasion: Option<usize> = None;

    for it in 1..=cfg.max_iters {
        let (pool, bins): (Vec<String>, Vec<BinId>) = match cfg.sampling {
            Sampling::Bins => match policy.sample_pool(&table, cfg.pool_size) {
                Ok(p) => (p.gates, p.bins),
                Err(_) => break,
            },
            Sampling::Uniform => {
                let gates = working.gates();
                let k = cfg.pool_size.min(gates.len());
                let picks = sample(&mut uniform_rng, gates.len(), k);
                let ids: Vec<String> = picks.iter().map(|i| gates[i].id.clone()).collect();
                let bins = ids.iter().filter_map(|g| table.bin_of(g)).collect();
                (ids, bins)
            }
        };
        let mut ctx = PlanContext {
            pool: pool_entries(&working, &pool),
            history: history.clone(),
            tool: cfg.tool,
            n_gates: cfg.n_gates,
            hop_range: cfg.hop_range,
            feedback: None,
        };

        let mut rejections = Vec::new();
        let mut last_plan = None;
        let mut accepted: Option<(RewritePlan, Candidate)> = None;
        for revision in 0..=cfg.revision_budget {
            let outcome = planner.plan(&ctx, cfg.order).and_then(|mut p| {
                p.revision = revision;
                validate_plan(&p, &ctx).map(|_| p)
            });
            let plan = match outcome {
                Ok(p) => p,
                Err(e) => {
                    let reason = e.to_string();
                    rejections.push(reason.clone());
                    ctx.feedback = Some(reason);
                    continue;
                }
            };
            let seed = combine(combine(cfg.seed, it as u64), revision as u64);
            match try_plan(&working, n0, &plan, cfg, seed) {
                Ok(c) => {
                    accepted = Some((plan, c));
                    break;
                }
                Err(reason) => {
                    rejections.push(reason.clone());
                    ctx.feedback = Some(reason);
                    last_plan = Some(plan);
                }
            }
        }

        let bins_sampled: Vec<usize> = bins.iter().map(|b| b.0).collect();
        let Some((plan, cand)) = accepted else {
            records.push(IterationRecord {
                iteration: it,
                pool,
                bins_sampled,
                plan: last_plan,
                accepted: false,
                rejections,
                verdict: None,
                security: None,
                area: None,
                overhead: None,
                reward: None,
                evaded: false,
                query_count: queries,
            });
            continue;
        };

        let security = scorer.score(&cand.netlist)?;
        queries += 1;
        let new_area = area(&cand.netlist, &cfg.area_table)?;
        let report = ScoreReport::with_band(kind, security, new_area, base_area, cfg.key_band);
        let reward = compute_reward(&current, &report, cfg.alpha, cfg.beta).expect("one scorer kind per run");
        if cfg.sampling == Sampling::Bins {
            let active: Vec<BinId> = table.non_empty().map(|b| b.id).collect();
            let chosen: Vec<BinId> = plan.gates.iter().filter_map(|g| table.bin_of(g)).collect();
            policy.reinforce_update(&active, &chosen, reward.value);
        }
        history.push(HistoryEntry {
            iter: it,
            mapping: plan.mapping,
            hop: plan.hop,
            security,
            area_overhead: report.overhead,
            reward: reward.value,
        });
        working = cand.netlist;
        table = rebin_after_rewrite(&working, &table);
        current = report;
        if best.as_ref().is_none_or(|(_, b, _)| better(&report, b)) {
            best = Some((it, report, working.clone()));
        }
        records.push(IterationRecord {
            iteration: it,
            pool,
            bins_sampled,
            plan: Some(plan),
            accepted: true,
            rejections,
            verdict: Some(cand.verdict),
            security: Some(security),
            area: Some(new_area),
            overhead: Some(report.overhead),
            reward: Some(reward.value),
            evaded: report.evaded,
            query_count: queries,
        });
        if report.evaded && first_evasion.is_none() {
            first_evasion = Some(it);
        }
        if let Some(at) = first_evasion {
            if cfg.stop_on_evasion && it >= at + cfg.polish_iters {
                break;
            }
        }
    }

    let (best_iteration, best_report, netlist) = best.unwrap_or((0, baseline, n0.clone()));
    let summary = Summary {
        evaded: best_iteration > 0 && best_report.evaded,
        best_iteration,
        best_security: best_report.security,
        best_area: best_report.area,
        best_overhead: best_report.overhead,
        baseline_security: base_security,
        baseline_area: base_area,
        iterations: records.len(),
        iterations_to_evasion: first_evasion,
        total_queries: queries,
    };
    Ok(AttackOutcome { netlist, trajectory: Trajectory { records, summary } })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMode {
    Hybrid,
    RlOnly,
    LlmOnly,
}

impl AblationMode {
    pub const ALL: [AblationMode; 3] = [AblationMode::Hybrid, AblationMode::RlOnly, AblationMode::LlmOnly];

    pub fn name(self) -> &'static str {
        match self {
            AblationMode::Hybrid => "hybrid",
            AblationMode::RlOnly => "rl_only",
            AblationMode::LlmOnly => "llm_only",
        }
    }
}

impl FromStr for AblationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AblationMode::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| format!("unknown ablation mode `{s}`"))
    }
}

pub type ScorerFactory<'a> = dyn Fn() -> Box<dyn Scorer + Send> + Sync + 'a;
pub type PlannerFactory<'a> = dyn Fn(u64) -> Box<dyn Planner + Send> + Sync + 'a;

pub const DEFAULT_RUNS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub iteration: usize,
    pub mean_security: f64,
    pub var_security: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub mode: AblationMode,
    pub seeds: Vec<u64>,
    pub runs: Vec<Trajectory>,
    pub evasions: usize,
    /// Mean iterations to evasion; runs that never evade count as `max_iters`.
    pub mean_iterations: f64,
    pub var_iterations: f64,
    pub mean_final_overhead: f64,
    pub series: Vec<SeriesPoint>,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n)
}

// Security after each iteration, carrying the last accepted value forward.
fn security_series(t: &Trajectory, len: usize) -> Vec<f64> {
    let mut cur = t.summary.baseline_security;
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        if let Some(s) = t.records.get(i).and_then(|r| r.security) {
            cur = s;
        }
        out.push(cur);
    }
    out
}

fn run_seeds(
    cfg: &AttackConfig,
    seeds: &[u64],
    jobs: usize,
    run: impl Fn(&AttackConfig) -> Result<Trajectory, AttackError> + Sync,
) -> Result<Vec<Trajectory>, AttackError> {
    let one = |&seed: &u64| run(&AttackConfig { seed, ..cfg.clone() });
    if jobs > 1 {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().expect("thread pool");
        pool.install(|| seeds.par_iter().map(one).collect())
    } else {
        seeds.iter().map(one).collect()
    }
}

pub fn seeds_from(base: u64, runs: usize) -> Vec<u64> {
    (0..runs as u64).map(|k| base + k).collect()
}

/// Runs `mode` once per seed. `make_planner` supplies the planning backend
/// for the hybrid and planner-only modes; the RL-only mode always plans at
/// random.
pub fn run_ablation(
    n0: &Netlist,
    cfg: &AttackConfig,
    mode: AblationMode,
    seeds: &[u64],
    jobs: usize,
    make_scorer: &ScorerFactory<'_>,
    make_planner: &PlannerFactory<'_>,
) -> Result<AblationResult, AttackError> {
    let runs = run_seeds(cfg, seeds, jobs, |c| {
        let mut c = c.clone();
        let mut planner: Box<dyn Planner + Send> = match mode {
            AblationMode::RlOnly => Box::new(RandomPlanner::new(c.seed)),
            AblationMode::Hybrid | AblationMode::LlmOnly => make_planner(c.seed),
        };
        if mode == AblationMode::LlmOnly {
            c.sampling = Sampling::Uniform;
        }
        let mut scorer = make_scorer();
        run_attack(n0, &c, &mut scorer, &mut planner).map(|o| o.trajectory)
    })?;
    let iters: Vec<f64> = runs
        .iter()
        .map(|t| t.summary.iterations_to_evasion.unwrap_or(cfg.max_iters) as f64)
        .collect();
    let (mean_iterations, var_iterations) = mean_var(&iters);
    let overheads: Vec<f64> = runs.iter().map(|t| t.summary.best_overhead).collect();
    let series_len = cfg.max_iters;
    let all: Vec<Vec<f64>> = runs.iter().map(|t| security_series(t, series_len)).collect();
    let series = (0..series_len)
        .map(|i| {
            let col: Vec<f64> = all.iter().map(|s| s[i]).collect();
            let (m, v) = mean_var(&col);
            SeriesPoint { iteration: i + 1, mean_security: m, var_security: v }
        })
        .collect();
    Ok(AblationResult {
        mode,
        seeds: seeds.to_vec(),
        evasions: runs.iter().filter(|t| t.summary.evaded).count(),
        runs,
        mean_iterations,
        var_iterations,
        mean_final_overhead: mean_var(&overheads).0,
        series,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderRun {
    pub order: PlanningOrder,
    pub seed: u64,
    pub final_security: f64,
    pub final_area: f64,
    pub final_overhead: f64,
    pub evaded: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderRow {
    pub order: PlanningOrder,
    pub is_default: bool,
    pub runs: usize,
    pub evasions: usize,
    pub mean_security: f64,
    pub mean_area: f64,
    pub mean_overhead: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderStudy {
    pub runs: Vec<OrderRun>,
    pub rows: Vec<OrderRow>,
}

impl OrderStudy {
    /// Aggregates raw runs into one row per order, in canonical order.
    pub fn aggregate(runs: &[OrderRun]) -> Vec<OrderRow> {
        let mut by: BTreeMap<usize, Vec<&OrderRun>> = BTreeMap::new();
        for r in runs {
            let k = PlanningOrder::ALL.iter().position(|o| *o == r.order).expect("known order");
            by.entry(k).or_default().push(r);
        }
        by.into_iter()
            .map(|(k, rs)| {
                let col = |f: fn(&OrderRun) -> f64| mean_var(&rs.iter().map(|r| f(r)).collect::<Vec<_>>()).0;
                OrderRow {
                    order: PlanningOrder::ALL[k],
                    is_default: PlanningOrder::ALL[k] == PlanningOrder::default(),
                    runs: rs.len(),
                    evasions: rs.iter().filter(|r| r.evaded).count(),
                    mean_security: col(|r| r.final_security),
                    mean_area: col(|r| r.final_area),
                    mean_overhead: col(|r| r.final_overhead),
                }
            })
            .collect()
    }

    pub fn to_table(&self) -> String {
        let mut out = String::from("order  default  runs  evaded  mean_security  mean_area  mean_overhead\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<6} {:<8} {:>4} {:>7} {:>14.4} {:>10.2} {:>14.4}",
                r.order.to_string(),
                if r.is_default { "yes" } else { "" },
                r.runs,
                r.evasions,
                r.mean_security,
                r.mean_area,
                r.mean_overhead
            );
        }
        out
    }
}

/// Every planning order, once per seed.
pub fn run_order_study(
    n0: &Netlist,
    cfg: &AttackConfig,
    seeds: &[u64],
    jobs: usize,
    make_scorer: &ScorerFactory<'_>,
    make_planner: &PlannerFactory<'_>,
) -> Result<OrderStudy, AttackError> {
    let mut runs = Vec::new();
    for order in PlanningOrder::ALL {
        let c = AttackConfig { order, ..cfg.clone() };
        let trajectories = run_seeds(&c, seeds, jobs, |c| {
            let mut planner = make_planner(c.seed);
            let mut scorer = make_scorer();
            run_attack(n0, c, &mut scorer, &mut planner).map(|o| o.trajectory)
        })?;
        for (t, &seed) in trajectories.iter().zip(seeds) {
            runs.push(OrderRun {
                order,
                seed,
                final_security: t.summary.best_security,
                final_area: t.summary.best_area,
                final_overhead: t.summary.best_overhead,
                evaded: t.summary.evaded,
                iterations: t.summary.iterations,
            });
        }
    }
    let rows = OrderStudy::aggregate(&runs);
    Ok(OrderStudy { runs, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::parse_bench;
    use crate::planner::{HeuristicPlanner, PlanError};

    struct Fixed(f64, usize);

    impl Scorer for Fixed {
        fn kind(&self) -> ScorerKind {
            ScorerKind::Similarity
        }
        fn score(&mut self, _: &Netlist) -> Result<f64, ScoreError> {
            self.1 += 1;
            Ok(self.0)
        }
    }

    struct BadHop;

    impl Planner for BadHop {
        fn plan(&mut self, ctx: &PlanContext, order: PlanningOrder) -> Result<RewritePlan, PlanError> {
            Err(PlanError::HopRange { hop: 25, lo: ctx.hop_range.0, hi: ctx.hop_range.1, raw: order.to_string() })
        }
    }

    fn c17() -> Netlist {
        parse_bench("c17", include_str!("../tests/fixtures/c17.bench")).unwrap()
    }

    #[test]
    fn immediate_evasion_stops_after_one_iteration() {
        let mut s = Fixed(-0.5, 0);
        let out = run_attack(&c17(), &AttackConfig::default(), &mut s, &mut HeuristicPlanner::new(0)).unwrap();
        assert_eq!(out.trajectory.records.len(), 1);
        assert_eq!(out.trajectory.summary.total_queries, 2);
        assert_eq!(s.1, 2);
        assert!(out.trajectory.summary.evaded);
    }

    #[test]
    fn invalid_plans_exhaust_revisions_without_queries() {
        let n = c17();
        let mut s = Fixed(0.9, 0);
        let cfg = AttackConfig { max_iters: 4, ..AttackConfig::default() };
        let out = run_attack(&n, &cfg, &mut s, &mut BadHop).unwrap();
        assert_eq!(out.netlist, n);
        assert!(!out.trajectory.summary.evaded);
        assert_eq!(out.trajectory.summary.best_iteration, 0);
        assert_eq!(s.1, 1);
        for r in &out.trajectory.records {
            assert_eq!(r.rejections.len(), 4);
            assert_eq!(r.query_count, 1);
        }
    }

    #[test]
    fn config_bounds() {
        assert!(AttackConfig::default().validate().is_ok());
        assert!(AttackConfig { n_gates: 30, ..Default::default() }.validate().is_err());
        assert!(AttackConfig { hop_range: (3, 2), ..Default::default() }.validate().is_err());
        assert!(AttackConfig { hop_range: (0, 2), ..Default::default() }.validate().is_err());
    }

    #[test]
    fn aggregation_matches_recomputation() {
        let runs: Vec<OrderRun> = PlanningOrder::ALL
            .iter()
            .flat_map(|&order| {
                (0..5).map(move |seed| OrderRun {
                    order,
                    seed,
                    final_security: seed as f64 / 10.0,
                    final_area: 10.0 + seed as f64,
                    final_overhead: 0.0,
                    evaded: seed % 2 == 0,
                    iterations: 3,
                })
            })
            .collect();
        let rows = OrderStudy::aggregate(&runs);
        assert_eq!(rows.len(), 6);
        assert!(rows[0].is_default && rows[0].order == PlanningOrder::Lmh);
        assert!((rows[3].mean_security - 0.2).abs() < 1e-12);
        assert_eq!(rows[3].evasions, 3);
    }
}
