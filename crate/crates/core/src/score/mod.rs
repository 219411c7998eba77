//! Black-box security scoring and the area model.

mod area;
mod remote;
mod surrogate;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netlist::Netlist;

pub use area::{area, AreaError, CellAreaTable};
pub use remote::{RemoteScorer, ScoreReply, ScoreRequest};
pub use surrogate::{
    key_signatures, lock_with_xor_keys, KeyCorpus, KeySample, KeySurrogate, NodeCorpus, NodeSurrogate,
    SimilaritySurrogate, ENCLOSING_HOPS,
};

/// Half-width of the "about 50 %" evasion band for key accuracy.
pub const DEFAULT_KEY_BAND: f64 = 0.05;

// absorbs rounding in |s - 0.5| so 0.45 and 0.55 sit inside the band
const BAND_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScorerKind {
    /// Range [-1, 1]; evaded at ≤ 0.
    Similarity,
    /// Range [0, 1]; evaded within the band around 0.5.
    KeyAccuracy,
    /// Range [0, 1]; evaded at ≤ 0.25.
    NodeAccuracy,
}

impl ScorerKind {
    pub fn range(self) -> (f64, f64) {
        match self {
            ScorerKind::Similarity => (-1.0, 1.0),
            ScorerKind::KeyAccuracy | ScorerKind::NodeAccuracy => (0.0, 1.0),
        }
    }

    pub fn in_range(self, s: f64) -> bool {
        let (lo, hi) = self.range();
        s.is_finite() && (lo..=hi).contains(&s)
    }

    /// Distance from `s` to the evasion region, 0 inside it.
    pub fn evasion_distance(self, s: f64, key_band: f64) -> f64 {
        if self.is_evaded(s, key_band) {
            return 0.0;
        }
        match self {
            ScorerKind::Similarity => s.max(0.0),
            ScorerKind::KeyAccuracy => ((s - 0.5).abs() - key_band).max(0.0),
            ScorerKind::NodeAccuracy => (s - 0.25).max(0.0),
        }
    }

    pub fn normalized_distance(self, s: f64, key_band: f64) -> f64 {
        let (lo, hi) = self.range();
        self.evasion_distance(s, key_band) / (hi - lo)
    }

    pub fn is_evaded(self, s: f64, key_band: f64) -> bool {
        match self {
            ScorerKind::Similarity => s <= 0.0,
            ScorerKind::KeyAccuracy => (s - 0.5).abs() <= key_band + BAND_EPS,
            ScorerKind::NodeAccuracy => s <= 0.25,
        }
    }

    pub fn wire_name(self) -> &'static str {
        match self {
            ScorerKind::Similarity => "similarity",
            ScorerKind::KeyAccuracy => "key_accuracy",
            ScorerKind::NodeAccuracy => "node_accuracy",
        }
    }

    /// Short tool tag used in planner requests.
    pub fn tool_tag(self) -> &'static str {
        match self {
            ScorerKind::Similarity => "ip",
            ScorerKind::KeyAccuracy => "omla",
            ScorerKind::NodeAccuracy => "re",
        }
    }
}

impl fmt::Display for ScorerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.wire_name())
    }
}

impl FromStr for ScorerKind {
    type Err = String;

    /// Accepts wire names and the tool tags `ip`, `omla`, `re`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "similarity" | "ip" => Ok(ScorerKind::Similarity),
            "key_accuracy" | "omla" => Ok(ScorerKind::KeyAccuracy),
            "node_accuracy" | "re" => Ok(ScorerKind::NodeAccuracy),
            _ => Err(format!("unknown scorer kind `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub kind: ScorerKind,
    pub security: f64,
    pub area: f64,
    pub overhead: f64,
    pub evaded: bool,
    pub key_band: f64,
}

impl ScoreReport {
    pub fn new(kind: ScorerKind, security: f64, area: f64, baseline_area: f64) -> Self {
        Self::with_band(kind, security, area, baseline_area, DEFAULT_KEY_BAND)
    }

    pub fn with_band(kind: ScorerKind, security: f64, area: f64, baseline_area: f64, key_band: f64) -> Self {
        let overhead = if baseline_area > 0.0 { (area - baseline_area) / baseline_area } else { 0.0 };
        ScoreReport { kind, security, area, overhead, evaded: kind.is_evaded(security, key_band), key_band }
    }

    pub fn normalized_distance(&self) -> f64 {
        self.kind.normalized_distance(self.security, self.key_band)
    }
}

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("scorer transport failed: {0}")]
    Transport(String),
    #[error("malformed scorer reply: {0}")]
    Schema(String),
    #[error("{kind} score {value} outside its range")]
    OutOfRange { kind: ScorerKind, value: f64 },
    #[error("scorer returned kind `{got}`, expected `{expected}`")]
    KindMismatch { expected: ScorerKind, got: String },
    #[error("netlist has no key inputs")]
    MissingKeyInputs,
    #[error("key length {got} does not match {expected} key inputs")]
    KeyLength { expected: usize, got: usize },
    #[error("netlist carries no gate labels")]
    MissingLabels,
}

/// A black-box detector: netlist in, real-valued score out.
pub trait Scorer {
    fn kind(&self) -> ScorerKind;
    fn score(&mut self, n: &Netlist) -> Result<f64, ScoreError>;
}

impl<S: Scorer + ?Sized> Scorer for Box<S> {
    fn kind(&self) -> ScorerKind {
        (**self).kind()
    }

    fn score(&mut self, n: &Netlist) -> Result<f64, ScoreError> {
        (**self).score(n)
    }
}

pub(crate) fn checked(kind: ScorerKind, value: f64) -> Result<f64, ScoreError> {
    if kind.in_range(value) {
        Ok(value)
    } else {
        Err(ScoreError::OutOfRange { kind, value })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evasion_table() {
        let cases = [
            (ScorerKind::Similarity, 0.0, true),
            (ScorerKind::Similarity, 1e-9, false),
            (ScorerKind::Similarity, -0.7, true),
            (ScorerKind::KeyAccuracy, 0.5, true),
            (ScorerKind::KeyAccuracy, 0.45, true),
            (ScorerKind::KeyAccuracy, 0.55, true),
            (ScorerKind::KeyAccuracy, 0.56, false),
            (ScorerKind::KeyAccuracy, 0.3, false),
            (ScorerKind::KeyAccuracy, 0.9, false),
            (ScorerKind::NodeAccuracy, 0.25, true),
            (ScorerKind::NodeAccuracy, 0.2501, false),
            (ScorerKind::NodeAccuracy, 0.0, true),
        ];
        for (kind, s, evaded) in cases {
            assert_eq!(kind.is_evaded(s, DEFAULT_KEY_BAND), evaded, "{kind} at {s}");
            assert_eq!(kind.evasion_distance(s, DEFAULT_KEY_BAND) == 0.0, evaded, "{kind} at {s}");
        }
    }

    #[test]
    fn overhead_is_exact() {
        let r = ScoreReport::new(ScorerKind::NodeAccuracy, 0.6, 12.0, 10.0);
        assert_eq!(r.overhead, 0.2);
        assert!(!r.evaded);
    }

    #[test]
    fn kind_names() {
        assert_eq!("omla".parse::<ScorerKind>().unwrap(), ScorerKind::KeyAccuracy);
        assert_eq!("node_accuracy".parse::<ScorerKind>().unwrap(), ScorerKind::NodeAccuracy);
        assert!("gnn".parse::<ScorerKind>().is_err());
        assert_eq!(serde_json::to_string(&ScorerKind::KeyAccuracy).unwrap(), "\"key_accuracy\"");
    }
}
