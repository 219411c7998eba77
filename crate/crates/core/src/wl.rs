//! Weisfeiler-Lehman color refinement over gate graphs.
//!
//! Nodes are primary inputs followed by gates in declaration order. A node's
//! next color hashes its current color with the sorted multisets of its fanin
//! and fanout colors, so colors are comparable across graphs.

use std::collections::{BTreeMap, HashMap, VecDeque};

use crate::hash::{combine, hash_str};
use crate::netlist::Netlist;

pub const DEFAULT_ITERATIONS: usize = 2;

#[derive(Debug, Clone)]
pub struct WlGraph {
    labels: Vec<u64>,
    fanin: Vec<Vec<usize>>,
    fanout: Vec<Vec<usize>>,
}

pub type Histogram = BTreeMap<u64, f64>;

impl WlGraph {
    /// Key inputs are labelled apart from ordinary inputs.
    pub fn from_netlist(n: &Netlist) -> Self {
        let k = n.inputs().len();
        let mut node: HashMap<&str, usize> = HashMap::new();
        let mut labels = Vec::with_capacity(k + n.gates().len());
        for (i, pi) in n.inputs().iter().enumerate() {
            node.insert(pi.as_str(), i);
            labels.push(hash_str(if n.key_inputs().contains(pi) { "KEY" } else { "PI" }));
        }
        for (i, g) in n.gates().iter().enumerate() {
            node.insert(g.output.as_str(), k + i);
            labels.push(hash_str(g.kind.name()));
        }
        let mut fanin = vec![Vec::new(); labels.len()];
        let mut fanout = vec![Vec::new(); labels.len()];
        for (i, g) in n.gates().iter().enumerate() {
            for net in &g.inputs {
                if let Some(&src) = node.get(net.as_str()) {
                    fanin[k + i].push(src);
                    fanout[src].push(k + i);
                }
            }
        }
        WlGraph { labels, fanin, fanout }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Colors after each round; index 0 holds the initial labels.
    pub fn refine(&self, iterations: usize) -> Vec<Vec<u64>> {
        let mut rounds = vec![self.labels.clone()];
        for _ in 0..iterations {
            let prev = rounds.last().unwrap();
            let next = (0..self.len())
                .map(|v| {
                    let mut ins: Vec<u64> = self.fanin[v].iter().map(|&u| prev[u]).collect();
                    let mut outs: Vec<u64> = self.fanout[v].iter().map(|&u| prev[u]).collect();
                    ins.sort_unstable();
                    outs.sort_unstable();
                    let mut h = combine(prev[v], 0x1);
                    h = ins.into_iter().fold(combine(h, 0x2), combine);
                    outs.into_iter().fold(combine(h, 0x3), combine)
                })
                .collect();
            rounds.push(next);
        }
        rounds
    }

    /// Color counts pooled over all rounds, restricted to `nodes` when given.
    pub fn histogram(&self, iterations: usize, nodes: Option<&[usize]>) -> Histogram {
        let rounds = self.refine(iterations);
        let mut hist = Histogram::new();
        let all: Vec<usize>;
        let nodes = match nodes {
            Some(n) => n,
            None => {
                all = (0..self.len()).collect();
                &all
            }
        };
        for colors in &rounds {
            for &v in nodes {
                *hist.entry(colors[v]).or_insert(0.0) += 1.0;
            }
        }
        hist
    }

    /// Nodes within `depth` undirected hops of `start`, in BFS order.
    pub fn neighborhood(&self, start: usize, depth: usize) -> Vec<usize> {
        let mut seen = vec![false; self.len()];
        let mut out = vec![start];
        seen[start] = true;
        let mut queue = VecDeque::from([(start, 0)]);
        while let Some((v, d)) = queue.pop_front() {
            if d == depth {
                continue;
            }
            for &u in self.fanin[v].iter().chain(&self.fanout[v]) {
                if !seen[u] {
                    seen[u] = true;
                    out.push(u);
                    queue.push_back((u, d + 1));
                }
            }
        }
        out
    }

    /// Subgraph induced by `nodes`, relabelled `0..nodes.len()` in the given
    /// order.
    pub fn induced(&self, nodes: &[usize]) -> WlGraph {
        let index: HashMap<usize, usize> = nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let keep = |list: &Vec<usize>| list.iter().filter_map(|u| index.get(u).copied()).collect::<Vec<_>>();
        WlGraph {
            labels: nodes.iter().map(|&v| self.labels[v]).collect(),
            fanin: nodes.iter().map(|&v| keep(&self.fanin[v])).collect(),
            fanout: nodes.iter().map(|&v| keep(&self.fanout[v])).collect(),
        }
    }

    pub fn relabel(&mut self, node: usize, label: &str) {
        self.labels[node] = hash_str(label);
    }
}

pub fn wl_histogram(n: &Netlist, iterations: usize) -> Histogram {
    WlGraph::from_netlist(n).histogram(iterations, None)
}

fn dense(a: &Histogram, b: &Histogram) -> (Vec<f64>, Vec<f64>) {
    let mut keys: Vec<u64> = a.keys().chain(b.keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();
    let x = keys.iter().map(|k| a.get(k).copied().unwrap_or(0.0)).collect();
    let y = keys.iter().map(|k| b.get(k).copied().unwrap_or(0.0)).collect();
    (x, y)
}

/// Cosine similarity; 0 when either histogram is empty.
pub fn cosine(a: &Histogram, b: &Histogram) -> f64 {
    let dot: f64 = a.iter().filter_map(|(k, x)| b.get(k).map(|y| x * y)).sum();
    let na: f64 = a.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.values().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

/// Pearson correlation over the union of colors; 0 when either side has
/// zero variance.
pub fn pearson(a: &Histogram, b: &Histogram) -> f64 {
    let (x, y) = dense(a, b);
    let n = x.len() as f64;
    if n < 2.0 {
        return 0.0;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (xi, yi) in x.iter().zip(&y) {
        sxy += (xi - mx) * (yi - my);
        sxx += (xi - mx) * (xi - mx);
        syy += (yi - my) * (yi - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

/// L1 distance between histograms.
pub fn l1(a: &Histogram, b: &Histogram) -> f64 {
    let (x, y) = dense(a, b);
    x.iter().zip(&y).map(|(p, q)| (p - q).abs()).sum()
}
