//! Per-gate structural features and the bin partition the policy samples
//! from.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::netlist::{GateType, Netlist};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeFeatures {
    pub gate_type: GateType,
    pub fanin: usize,
    pub fanout: usize,
    pub level: usize,
}

/// Features for every gate, keyed by gate id. PIs sit at level 0 and a gate
/// sits one level above its deepest driver.
pub fn compute_features(n: &Netlist) -> BTreeMap<String, NodeFeatures> {
    let order = n.topo_order().expect("features require an acyclic netlist");
    let drivers = n.driver_index();
    let consumers = n.consumers();
    let mut po_uses: HashMap<&str, usize> = HashMap::new();
    for po in n.outputs() {
        *po_uses.entry(po.as_str()).or_default() += 1;
    }
    let mut level = vec![0usize; n.gates().len()];
    for idx in order {
        let g = &n.gates()[idx];
        let deepest = g.inputs.iter().filter_map(|x| drivers.get(x.as_str())).map(|&d| level[d]).max().unwrap_or(0);
        level[idx] = deepest + 1;
    }
    n.gates()
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let f = NodeFeatures {
                gate_type: g.kind,
                fanin: g.inputs.len(),
                fanout: consumers[i].len() + po_uses.get(g.output.as_str()).copied().unwrap_or(0),
                level: level[i],
            };
            (g.id.clone(), f)
        })
        .collect()
}

/// Gate-type family; constants share the buffer family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateFamily {
    Inv,
    Buf,
    And,
    Nand,
    Or,
    Nor,
    Xor,
    Xnor,
}

impl From<GateType> for GateFamily {
    fn from(t: GateType) -> Self {
        match t {
            GateType::Inv => GateFamily::Inv,
            GateType::Buf | GateType::Const0 | GateType::Const1 => GateFamily::Buf,
            GateType::And => GateFamily::And,
            GateType::Nand => GateFamily::Nand,
            GateType::Or => GateFamily::Or,
            GateType::Nor => GateFamily::Nor,
            GateType::Xor => GateFamily::Xor,
            GateType::Xnor => GateFamily::Xnor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinScheme {
    Type,
    #[default]
    TypeLevel,
    TypeLevelFanout,
}

impl FromStr for BinScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "type" => Ok(BinScheme::Type),
            "type_level" => Ok(BinScheme::TypeLevel),
            "type_level_fanout" => Ok(BinScheme::TypeLevelFanout),
            _ => Err(format!("unknown bin scheme `{s}`")),
        }
    }
}

impl fmt::Display for BinScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BinScheme::Type => "type",
            BinScheme::TypeLevel => "type_level",
            BinScheme::TypeLevelFanout => "type_level_fanout",
        })
    }
}

pub const DEFAULT_BIN_CAPACITY: usize = 24;

/// Membership predicate of a bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BinKey {
    pub family: GateFamily,
    pub level_band: Option<u8>,
    pub fanout_band: Option<u8>,
}

impl BinKey {
    fn distance(&self, other: &BinKey) -> u32 {
        let band = |a: Option<u8>, b: Option<u8>| a.unwrap_or(0).abs_diff(b.unwrap_or(0)) as u32;
        (self.family != other.family) as u32 * 100
            + band(self.level_band, other.level_band) * 10
            + band(self.fanout_band, other.fanout_band)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BinId(pub usize);

impl fmt::Display for BinId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "b{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bin {
    pub id: BinId,
    pub descriptor: BinKey,
    /// Keys merged into this bin once capacity was reached.
    pub aliases: Vec<BinKey>,
    pub members: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinTable {
    pub scheme: BinScheme,
    pub capacity: usize,
    /// Upper bounds of the first two level terciles, frozen at build time.
    pub level_cuts: (usize, usize),
    pub bins: Vec<Bin>,
}

fn level_cuts(features: &BTreeMap<String, NodeFeatures>) -> (usize, usize) {
    let mut levels: Vec<usize> = features.values().map(|f| f.level).collect();
    if levels.is_empty() {
        return (0, 0);
    }
    levels.sort_unstable();
    let m = levels.len();
    (levels[m.div_ceil(3) - 1], levels[(2 * m).div_ceil(3) - 1])
}

fn key_for(f: &NodeFeatures, scheme: BinScheme, cuts: (usize, usize)) -> BinKey {
    let level_band = || {
        if f.level <= cuts.0 {
            0
        } else if f.level <= cuts.1 {
            1
        } else {
            2
        }
    };
    let family = GateFamily::from(f.gate_type);
    match scheme {
        BinScheme::Type => BinKey { family, level_band: None, fanout_band: None },
        BinScheme::TypeLevel => BinKey { family, level_band: Some(level_band()), fanout_band: None },
        BinScheme::TypeLevelFanout => {
            BinKey { family, level_band: Some(level_band()), fanout_band: Some((f.fanout > 1) as u8) }
        }
    }
}

/// Partitions gates by `scheme`, merging the smallest bins into their nearest
/// neighbour (same family and closest level band first) while the number of
/// distinct keys exceeds `capacity`.
pub fn build_bins(features: &BTreeMap<String, NodeFeatures>, scheme: BinScheme, capacity: usize) -> BinTable {
    assert!(capacity > 0, "bin capacity must be positive");
    let cuts = level_cuts(features);
    let mut groups: BTreeMap<BinKey, BTreeSet<String>> = BTreeMap::new();
    for (id, f) in features {
        groups.entry(key_for(f, scheme, cuts)).or_default().insert(id.clone());
    }
    let mut merged: BTreeMap<BinKey, (Vec<BinKey>, BTreeSet<String>)> =
        groups.into_iter().map(|(k, m)| (k, (Vec::new(), m))).collect();
    while merged.len() > capacity {
        let (&victim, _) = merged
            .iter()
            .min_by(|(ka, (_, ma)), (kb, (_, mb))| ma.len().cmp(&mb.len()).then(kb.cmp(ka)))
            .unwrap();
        let (aliases, members) = merged.remove(&victim).unwrap();
        let target = *merged
            .keys()
            .min_by(|a, b| victim.distance(a).cmp(&victim.distance(b)).then(a.cmp(b)))
            .unwrap();
        let entry = merged.get_mut(&target).unwrap();
        entry.0.push(victim);
        entry.0.extend(aliases);
        entry.1.extend(members);
    }
    let bins = merged
        .into_iter()
        .enumerate()
        .map(|(i, (descriptor, (mut aliases, members)))| {
            aliases.sort();
            Bin { id: BinId(i), descriptor, aliases, members }
        })
        .collect();
    BinTable { scheme, capacity, level_cuts: cuts, bins }
}

impl BinTable {
    pub fn bin(&self, id: BinId) -> Option<&Bin> {
        self.bins.iter().find(|b| b.id == id)
    }

    pub fn bin_of(&self, gate: &str) -> Option<BinId> {
        self.bins.iter().find(|b| b.members.contains(gate)).map(|b| b.id)
    }

    pub fn non_empty(&self) -> impl Iterator<Item = &Bin> {
        self.bins.iter().filter(|b| !b.members.is_empty())
    }

    pub fn total_members(&self) -> usize {
        self.bins.iter().map(|b| b.members.len()).sum()
    }

    fn lookup(&self, key: &BinKey) -> Option<usize> {
        self.bins.iter().position(|b| b.descriptor == *key || b.aliases.contains(key))
    }
}

/// Re-partitions the gates of a rewritten netlist into the existing bins.
/// Bins keep their ids and descriptors (possibly emptied); keys never seen
/// before open a new bin while under capacity and are otherwise aliased to
/// the nearest bin.
pub fn rebin_after_rewrite(n: &Netlist, table: &BinTable) -> BinTable {
    let features = compute_features(n);
    let mut out = table.clone();
    for b in &mut out.bins {
        b.members.clear();
    }
    let mut keyed: BTreeMap<BinKey, Vec<String>> = BTreeMap::new();
    for (id, f) in &features {
        keyed.entry(key_for(f, table.scheme, table.level_cuts)).or_default().push(id.clone());
    }
    for (key, ids) in keyed {
        let slot = match out.lookup(&key) {
            Some(i) => i,
            None if out.bins.len() < out.capacity => {
                let next = out.bins.iter().map(|b| b.id.0 + 1).max().unwrap_or(0);
                out.bins.push(Bin { id: BinId(next), descriptor: key, aliases: Vec::new(), members: BTreeSet::new() });
                out.bins.len() - 1
            }
            None => {
                let i = (0..out.bins.len())
                    .min_by(|&a, &b| {
                        key.distance(&out.bins[a].descriptor)
                            .cmp(&key.distance(&out.bins[b].descriptor))
                            .then(out.bins[a].id.cmp(&out.bins[b].id))
                    })
                    .unwrap();
                out.bins[i].aliases.push(key);
                out.bins[i].aliases.sort();
                i
            }
        };
        out.bins[slot].members.extend(ids);
    }
    out
}
