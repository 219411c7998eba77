//! Bin-preference bandit: softmax pool sampling with per-bin quotas, the
//! security/area reward, and REINFORCE updates with a moving-average
//! baseline.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{BinId, BinTable};
use crate::score::{ScoreReport, ScorerKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub learning_rate: f64,
    pub temperature: f64,
    pub per_bin_quota: usize,
    pub baseline_decay: f64,
    pub seed: u64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig { learning_rate: 0.1, temperature: 1.0, per_bin_quota: 5, baseline_decay: 0.9, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("every bin is empty; nothing to sample")]
    EmptyPool,
}

/// Candidate pool with the bin each gate was drawn from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampledPool {
    pub gates: Vec<String>,
    pub bins: Vec<BinId>,
}

impl SampledPool {
    pub fn bin_of(&self, gate: &str) -> Option<BinId> {
        self.gates.iter().position(|g| g == gate).map(|i| self.bins[i])
    }
}

#[derive(Debug, Clone)]
pub struct BinPolicy {
    theta: BTreeMap<BinId, f64>,
    config: PolicyConfig,
    baseline: f64,
    rng: ChaCha8Rng,
}

/// Numerically stable softmax of `scores / temperature`.
pub fn softmax(scores: &[f64], temperature: f64) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| ((s - max) / temperature).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

impl BinPolicy {
    pub fn new(config: PolicyConfig) -> Self {
        assert!(config.learning_rate > 0.0 && config.temperature > 0.0, "learning rate and temperature must be positive");
        BinPolicy { theta: BTreeMap::new(), rng: ChaCha8Rng::seed_from_u64(config.seed), baseline: 0.0, config }
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    pub fn theta(&self, bin: BinId) -> f64 {
        self.theta.get(&bin).copied().unwrap_or(0.0)
    }

    pub fn set_theta(&mut self, bin: BinId, value: f64) {
        self.theta.insert(bin, value);
    }

    pub fn baseline(&self) -> f64 {
        self.baseline
    }

    pub fn thetas(&self) -> &BTreeMap<BinId, f64> {
        &self.theta
    }

    pub fn probabilities(&self, bins: &[BinId]) -> Vec<f64> {
        let scores: Vec<f64> = bins.iter().map(|&b| self.theta(b)).collect();
        softmax(&scores, self.config.temperature)
    }

    /// ∂ log π(chosen) / ∂ θ over `bins`.
    pub fn log_prob_gradient(&self, bins: &[BinId], chosen: BinId) -> Vec<f64> {
        let probs = self.probabilities(bins);
        bins.iter()
            .zip(probs)
            .map(|(&b, p)| ((b == chosen) as u8 as f64 - p) / self.config.temperature)
            .collect()
    }

    fn draw(&mut self, bins: &[BinId]) -> usize {
        let probs = self.probabilities(bins);
        let u: f64 = self.rng.gen();
        let mut acc = 0.0;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        probs.len() - 1
    }

    /// Samples up to `pool_size` distinct gates: each draw picks a bin by
    /// softmax over bins that still have members and quota left, then a
    /// member of that bin uniformly.
    pub fn sample_pool(&mut self, table: &BinTable, pool_size: usize) -> Result<SampledPool, PolicyError> {
        let quota = self.config.per_bin_quota;
        let mut remaining: Vec<(BinId, Vec<String>, usize)> =
            table.non_empty().map(|b| (b.id, b.members.iter().cloned().collect(), 0)).collect();
        if remaining.is_empty() {
            return Err(PolicyError::EmptyPool);
        }
        let mut pool = SampledPool { gates: Vec::new(), bins: Vec::new() };
        while pool.gates.len() < pool_size {
            let eligible: Vec<usize> =
                (0..remaining.len()).filter(|&i| !remaining[i].1.is_empty() && remaining[i].2 < quota).collect();
            if eligible.is_empty() {
                break;
            }
            let ids: Vec<BinId> = eligible.iter().map(|&i| remaining[i].0).collect();
            let slot = eligible[self.draw(&ids)];
            let (bin, members, used) = &mut remaining[slot];
            let pick = self.rng.gen_range(0..members.len());
            pool.gates.push(members.remove(pick));
            pool.bins.push(*bin);
            *used += 1;
        }
        Ok(pool)
    }

    /// One REINFORCE step: θ += lr · (r − b) · Σ ∇ log π(draw) over the
    /// sampled draws, with the softmax taken over `active` bins. The baseline
    /// then moves toward `reward`.
    pub fn reinforce_update(&mut self, active: &[BinId], sampled: &[BinId], reward: f64) {
        let advantage = reward - self.baseline;
        if advantage != 0.0 && !active.is_empty() {
            let mut step = vec![0.0; active.len()];
            for &s in sampled {
                for (acc, g) in step.iter_mut().zip(self.log_prob_gradient(active, s)) {
                    *acc += g;
                }
            }
            for (&b, g) in active.iter().zip(step) {
                *self.theta.entry(b).or_insert(0.0) += self.config.learning_rate * advantage * g;
            }
        }
        let d = self.config.baseline_decay;
        self.baseline = d * self.baseline + (1.0 - d) * reward;
    }
}

pub const DEFAULT_ALPHA: f64 = 1.5;
pub const DEFAULT_BETA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reward {
    pub delta_security: f64,
    pub delta_area: f64,
    pub alpha: f64,
    pub beta: f64,
    pub value: f64,
}

impl Reward {
    pub fn new(delta_security: f64, delta_area: f64, alpha: f64, beta: f64) -> Self {
        Reward { delta_security, delta_area, alpha, beta, value: alpha * delta_security - beta * delta_area }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("reward compares {old:?} with {new:?} scores")]
pub struct KindMismatch {
    pub old: ScorerKind,
    pub new: ScorerKind,
}

/// ΔSecurity is the drop in range-normalized distance to the evasion region;
/// ΔArea is the change in overhead relative to the baseline design.
pub fn compute_reward(old: &ScoreReport, new: &ScoreReport, alpha: f64, beta: f64) -> Result<Reward, KindMismatch> {
    if old.kind != new.kind {
        return Err(KindMismatch { old: old.kind, new: new.kind });
    }
    let delta_security = old.normalized_distance() - new.normalized_distance();
    let delta_area = new.overhead - old.overhead;
    Ok(Reward::new(delta_security, delta_area, alpha, beta))
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use crate::features::{Bin, BinKey, BinScheme, GateFamily};

    fn table(sizes: &[usize]) -> BinTable {
        let families = [GateFamily::Inv, GateFamily::Nand, GateFamily::Nor, GateFamily::Xor];
        BinTable {
            scheme: BinScheme::Type,
            capacity: 24,
            level_cuts: (0, 0),
            bins: sizes
                .iter()
                .enumerate()
                .map(|(i, &n)| Bin {
                    id: BinId(i),
                    descriptor: BinKey { family: families[i], level_band: None, fanout_band: None },
                    aliases: vec![],
                    members: (0..n).map(|j| format!("b{i}_{j:02}")).collect::<BTreeSet<_>>(),
                })
                .collect(),
        }
    }

    #[test]
    fn single_bin_fills_pool() {
        let mut p = BinPolicy::new(PolicyConfig { per_bin_quota: 20, ..Default::default() });
        let pool = p.sample_pool(&table(&[30]), 20).unwrap();
        assert_eq!(pool.gates.len(), 20);
        let distinct: BTreeSet<_> = pool.gates.iter().collect();
        assert_eq!(distinct.len(), 20);
    }

    #[test]
    fn quota_forces_second_bin() {
        let mut p = BinPolicy::new(PolicyConfig { per_bin_quota: 10, ..Default::default() });
        p.set_theta(BinId(0), 50.0);
        let pool = p.sample_pool(&table(&[15, 15]), 20).unwrap();
        assert_eq!(pool.bins[..10], [BinId(0); 10]);
        assert_eq!(pool.bins[10..], [BinId(1); 10]);
    }

    #[test]
    fn empty_table_errors() {
        let mut p = BinPolicy::new(PolicyConfig::default());
        assert_eq!(p.sample_pool(&table(&[0, 0]), 5).unwrap_err(), PolicyError::EmptyPool);
    }

    #[test]
    fn pool_is_capped_by_available_gates() {
        let mut p = BinPolicy::new(PolicyConfig::default());
        let pool = p.sample_pool(&table(&[2, 3]), 20).unwrap();
        assert_eq!(pool.gates.len(), 5);
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let t = table(&[7, 7, 7, 7]);
        let mut a = BinPolicy::new(PolicyConfig { seed: 9, ..Default::default() });
        let mut b = BinPolicy::new(PolicyConfig { seed: 9, ..Default::default() });
        for _ in 0..5 {
            assert_eq!(a.sample_pool(&t, 12).unwrap(), b.sample_pool(&t, 12).unwrap());
        }
    }

    #[test]
    fn uniform_theta_is_uniform_over_bins() {
        let t = table(&[3, 3, 3, 3]);
        let mut p = BinPolicy::new(PolicyConfig { seed: 1, ..Default::default() });
        let draws = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..draws {
            counts[p.sample_pool(&t, 1).unwrap().bins[0].0] += 1;
        }
        let expected = draws as f64 / 4.0;
        let sigma = (draws as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - expected).abs() <= 3.0 * sigma, "{counts:?}");
        }
        // chi-square with 3 dof, 99.9% critical value 16.27
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 16.27, "chi2 = {chi2}");
    }

    #[test]
    fn positive_advantage_raises_sampled_bin() {
        let bins = [BinId(0), BinId(1), BinId(2)];
        let mut p = BinPolicy::new(PolicyConfig::default());
        p.reinforce_update(&bins, &[BinId(1)], 1.0);
        assert!(p.theta(BinId(1)) > 0.0);
        let others = p.theta(BinId(0)) + p.theta(BinId(2));
        assert!((others + p.theta(BinId(1))).abs() < 1e-12);
        assert!(others < 0.0);
        let total: f64 = p.probabilities(&bins).iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_advantage_leaves_theta() {
        let bins = [BinId(0), BinId(1)];
        let mut p = BinPolicy::new(PolicyConfig::default());
        p.set_theta(BinId(0), 0.3);
        p.reinforce_update(&bins, &[BinId(0)], 0.0);
        assert_eq!(p.theta(BinId(0)), 0.3);
        assert_eq!(p.theta(BinId(1)), 0.0);
    }

    #[test]
    fn reward_examples() {
        assert!((Reward::new(0.4, 0.2, 1.5, 0.5).value - 0.5).abs() < 1e-12);
        assert_eq!(Reward::new(0.0, 0.0, 1.5, 0.5).value, 0.0);
        assert!((Reward::new(-0.1, -0.05, 1.5, 0.5).value + 0.125).abs() < 1e-12);
    }

    #[test]
    fn reward_rejects_mixed_kinds() {
        let a = ScoreReport::new(ScorerKind::Similarity, 0.5, 1.0, 1.0);
        let b = ScoreReport::new(ScorerKind::NodeAccuracy, 0.5, 1.0, 1.0);
        assert!(compute_reward(&a, &b, 1.5, 0.5).is_err());
    }

    #[test]
    fn reward_from_reports() {
        let old = ScoreReport::new(ScorerKind::Similarity, 1.0, 10.0, 10.0);
        let new = ScoreReport::new(ScorerKind::Similarity, 0.2, 11.0, 10.0);
        let r = compute_reward(&old, &new, 1.5, 0.5).unwrap();
        // distances 1.0/2 and 0.2/2, overhead 0 → 0.1
        assert!((r.delta_security - 0.4).abs() < 1e-12);
        assert!((r.delta_area - 0.1).abs() < 1e-12);
        assert!((r.value - (1.5 * 0.4 - 0.5 * 0.1)).abs() < 1e-12);
    }
}
