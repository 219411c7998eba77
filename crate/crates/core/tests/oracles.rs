//! Second implementations of the detectors and learning rules, checked
//! against the library on generated inputs.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use netmorph::features::BinId;
use netmorph::netlist::Netlist;
use netmorph::policy::{compute_reward, softmax, BinPolicy, PolicyConfig};
use netmorph::score::{
    lock_with_xor_keys, KeyCorpus, KeySurrogate, NodeCorpus, NodeSurrogate, ScoreReport, ScorerKind,
    SimilaritySurrogate,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gate graph with string labels; node order is inputs then gates.
struct Graph {
    labels: Vec<String>,
    fanin: Vec<Vec<usize>>,
    fanout: Vec<Vec<usize>>,
}

fn graph(n: &Netlist) -> Graph {
    let k = n.inputs().len();
    let mut at = HashMap::new();
    let mut labels = Vec::new();
    for (i, pi) in n.inputs().iter().enumerate() {
        at.insert(pi.clone(), i);
        labels.push(if n.key_inputs().contains(pi) { "KEY".to_string() } else { "PI".to_string() });
    }
    for (i, g) in n.gates().iter().enumerate() {
        at.insert(g.output.clone(), k + i);
        labels.push(g.kind.name().to_string());
    }
    let mut fanin = vec![Vec::new(); labels.len()];
    let mut fanout = vec![Vec::new(); labels.len()];
    for (i, g) in n.gates().iter().enumerate() {
        for x in &g.inputs {
            let s = at[x];
            fanin[k + i].push(s);
            fanout[s].push(k + i);
        }
    }
    Graph { labels, fanin, fanout }
}

impl Graph {
    /// Colors as nested signature strings, one vector per round.
    fn rounds(&self, nodes: &[usize], iterations: usize) -> Vec<BTreeMap<usize, String>> {
        let keep: BTreeSet<usize> = nodes.iter().copied().collect();
        let mut cur: BTreeMap<usize, String> = nodes.iter().map(|&v| (v, self.labels[v].clone())).collect();
        let mut out = vec![cur.clone()];
        for _ in 0..iterations {
            let next = nodes
                .iter()
                .map(|&v| {
                    let side = |list: &Vec<usize>| {
                        let mut c: Vec<&String> = list.iter().filter(|u| keep.contains(u)).map(|u| &cur[u]).collect();
                        c.sort();
                        c.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(",")
                    };
                    (v, format!("({}|{}|{})", cur[&v], side(&self.fanin[v]), side(&self.fanout[v])))
                })
                .collect();
            cur = next;
            out.push(cur.clone());
        }
        out
    }

    fn histogram(&self, nodes: &[usize]) -> BTreeMap<String, f64> {
        let mut h = BTreeMap::new();
        for (r, round) in self.rounds(nodes, 2).into_iter().enumerate() {
            for c in round.into_values() {
                *h.entry(format!("{r}:{c}")).or_insert(0.0) += 1.0;
            }
        }
        h
    }

    fn all(&self) -> Vec<usize> {
        (0..self.labels.len()).collect()
    }
}

// Colors from different rounds never coincide in the hashed version either,
// so prefixing the round keeps the partition the same.
fn pearson(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    let keys: BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    let x: Vec<f64> = keys.iter().map(|k| a.get(*k).copied().unwrap_or(0.0)).collect();
    let y: Vec<f64> = keys.iter().map(|k| b.get(*k).copied().unwrap_or(0.0)).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let cov: f64 = x.iter().zip(&y).map(|(p, q)| (p - mx) * (q - my)).sum();
    let vx: f64 = x.iter().map(|p| (p - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|q| (q - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / (vx * vy).sqrt()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn similarity_matches_string_wl_oracle(a in 0u64..10_000, b in 0u64..10_000, pis in 2usize..8, gates in 1usize..40) {
        let x = common::random_circuit(a, pis, gates);
        let y = common::random_circuit(b, pis, gates / 2 + 1);
        let (gx, gy) = (graph(&x), graph(&y));
        let want = pearson(&gx.histogram(&gx.all()), &gy.histogram(&gy.all()));
        let got = SimilaritySurrogate::new(&y).similarity(&x);
        prop_assert!((want - got).abs() < 1e-9, "oracle {want} vs {got}");
    }
}

fn l1(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    let keys: BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    keys.iter().map(|k| (a.get(*k).copied().unwrap_or(0.0) - b.get(*k).copied().unwrap_or(0.0)).abs()).sum()
}

fn key_signatures(n: &Netlist) -> Vec<BTreeMap<String, f64>> {
    let g = graph(n);
    let k = n.inputs().len();
    n.key_inputs()
        .iter()
        .map(|key| {
            let center = n.gates().iter().position(|gate| gate.inputs.contains(key)).map(|i| k + i).unwrap();
            let mut depth = HashMap::from([(center, 0usize)]);
            let mut queue = VecDeque::from([center]);
            while let Some(v) = queue.pop_front() {
                if depth[&v] == 3 {
                    continue;
                }
                for &u in g.fanin[v].iter().chain(&g.fanout[v]) {
                    if !depth.contains_key(&u) {
                        depth.insert(u, depth[&v] + 1);
                        queue.push_back(u);
                    }
                }
            }
            let nodes: Vec<usize> = depth.into_keys().collect();
            g.histogram(&nodes)
        })
        .collect()
}

#[test]
fn key_accuracy_matches_brute_force_nearest_neighbour() {
    let base = common::fixture("adder4");
    for trial in 0..6u64 {
        let train: Vec<(Netlist, Vec<bool>)> = (0..4).map(|s| lock_with_xor_keys(&base, 8, 100 * trial + s)).collect();
        let (target, key) = lock_with_xor_keys(&base, 8, 100 * trial + 99);
        let corpus = KeyCorpus::from_locked(train.iter().map(|(n, k)| (n, k.as_slice())));
        let got = KeySurrogate::new(corpus, key.clone()).accuracy(&target).unwrap();

        let samples: Vec<(BTreeMap<String, f64>, bool)> = train
            .iter()
            .flat_map(|(n, k)| key_signatures(n).into_iter().zip(k.iter().copied()))
            .collect();
        let mut correct = 0;
        for (sig, &bit) in key_signatures(&target).iter().zip(&key) {
            let mut best = (f64::INFINITY, false);
            for (s, b) in &samples {
                let d = l1(sig, s);
                if d < best.0 {
                    best = (d, *b);
                }
            }
            correct += (best.1 == bit) as usize;
        }
        assert_eq!(got, correct as f64 / key.len() as f64, "trial {trial}");
    }
}

fn labelled(n: &Netlist, seed: u64) -> Netlist {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = n.gates().iter().map(|g| (g.id.clone(), ["adder", "mux", "ctrl"][rng.gen_range(0..3)].to_string()));
    n.clone().with_labels(labels.collect())
}

fn majority<'a>(labels: impl Iterator<Item = &'a String>) -> Option<String> {
    let mut counts: BTreeMap<&String, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let top = counts.values().max().copied()?;
    counts.into_iter().find(|(_, c)| *c == top).map(|(l, _)| l.clone())
}

#[test]
fn node_accuracy_matches_brute_force_classifier() {
    for seed in 0..8u64 {
        let corpus_designs: Vec<Netlist> =
            (0..3).map(|s| labelled(&common::random_circuit(seed * 10 + s, 5, 25), seed + s)).collect();
        let candidate = labelled(&common::random_circuit(seed * 10 + 7, 5, 25), seed + 50);
        let got = NodeSurrogate::new(NodeCorpus::from_labelled(&corpus_designs)).accuracy(&candidate).unwrap();

        let colors = |n: &Netlist| {
            let g = graph(n);
            let rounds = g.rounds(&g.all(), 2);
            let k = n.inputs().len();
            (0..n.gates().len()).map(|i| [0, 1, 2].map(|r| rounds[r][&(k + i)].clone())).collect::<Vec<_>>()
        };
        let mut entries: Vec<([String; 3], String)> = Vec::new();
        for d in &corpus_designs {
            for (g, c) in d.gates().iter().zip(colors(d)) {
                entries.push((c, d.labels()[&g.id].clone()));
            }
        }
        let mut correct = 0;
        let cand_colors = colors(&candidate);
        for (g, c) in candidate.gates().iter().zip(&cand_colors) {
            let mut guess = None;
            for r in (0..3).rev() {
                guess = majority(entries.iter().filter(|(e, _)| e[r] == c[r]).map(|(_, l)| l));
                if guess.is_some() {
                    break;
                }
            }
            let guess = guess.or_else(|| majority(entries.iter().map(|(_, l)| l)));
            correct += (guess.as_ref() == Some(&candidate.labels()[&g.id])) as usize;
        }
        assert_eq!(got, correct as f64 / candidate.gates().len() as f64, "seed {seed}");
    }
}

#[test]
fn log_prob_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..50 {
        let n = rng.gen_range(2..10);
        let temperature = rng.gen_range(0.3..3.0);
        let mut policy = BinPolicy::new(PolicyConfig { temperature, ..PolicyConfig::default() });
        let bins: Vec<BinId> = (0..n).map(BinId).collect();
        for &b in &bins {
            policy.set_theta(b, rng.gen_range(-2.0..2.0));
        }
        let chosen = bins[rng.gen_range(0..n)];
        let analytic = policy.log_prob_gradient(&bins, chosen);
        let theta: Vec<f64> = bins.iter().map(|&b| policy.theta(b)).collect();
        let log_p = |t: &[f64]| softmax(t, temperature)[chosen.0].ln();
        let h = 1e-6;
        for i in 0..n {
            let (mut up, mut down) = (theta.clone(), theta.clone());
            up[i] += h;
            down[i] -= h;
            let numeric = (log_p(&up) - log_p(&down)) / (2.0 * h);
            let rel = (numeric - analytic[i]).abs() / analytic[i].abs().max(1e-3);
            assert!(rel < 1e-5, "trial {trial} bin {i}: {numeric} vs {}", analytic[i]);
        }
    }
}

#[test]
fn reward_is_weighted_difference_of_distance_and_overhead() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for kind in [ScorerKind::Similarity, ScorerKind::KeyAccuracy, ScorerKind::NodeAccuracy] {
        let (lo, hi) = kind.range();
        for _ in 0..300 {
            let base = rng.gen_range(1.0..50.0);
            let old = ScoreReport::new(kind, rng.gen_range(lo..=hi), rng.gen_range(1.0..80.0), base);
            let new = ScoreReport::new(kind, rng.gen_range(lo..=hi), rng.gen_range(1.0..80.0), base);
            let (a, b) = (rng.gen_range(0.0..3.0), rng.gen_range(0.0..3.0));
            let dist = |s: f64| match kind {
                ScorerKind::Similarity => s.max(0.0) / 2.0,
                ScorerKind::KeyAccuracy => ((s - 0.5).abs() - 0.05).max(0.0),
                ScorerKind::NodeAccuracy => (s - 0.25).max(0.0),
            };
            let d_sec = dist(old.security) - dist(new.security);
            let d_area = (new.area - old.area) / base;
            let r = compute_reward(&old, &new, a, b).unwrap();
            assert!((r.value - (a * d_sec - b * d_area)).abs() < 1e-12);
        }
    }
}
