//! Detector selection: a remote service when an endpoint is given, otherwise
//! the matching local surrogate.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use netmorph::score::{
    area, lock_with_xor_keys, CellAreaTable, KeyCorpus, KeySurrogate, NodeCorpus, NodeSurrogate, RemoteScorer, ScoreReport, Scorer,
    ScorerKind, SimilaritySurrogate,
};
use netmorph::Netlist;

use crate::read_netlist;

#[derive(Args, Clone)]
pub struct ScorerArgs {
    /// similarity (ip), key_accuracy (omla) or node_accuracy (re).
    #[arg(long = "kind", visible_alias = "tool", default_value = "similarity")]
    pub kind: ScorerKind,
    /// Scoring service base URL; `POST {url}/score`.
    #[arg(long, env = "NETMORPH_SCORER_URL")]
    pub endpoint: Option<String>,
    /// Reference design for the similarity surrogate; defaults to the input.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Training designs for the key and node surrogates.
    #[arg(long, value_delimiter = ',')]
    pub corpus: Vec<PathBuf>,
    /// Correct key of a locked input as a bit string, e.g. 0110.
    #[arg(long)]
    pub key: Option<String>,
}

pub enum ScorerSpec {
    Remote { url: String, kind: ScorerKind },
    Similarity(SimilaritySurrogate),
    Key(KeySurrogate),
    Node(NodeSurrogate),
}

fn parse_key(bits: &str) -> Result<Vec<bool>> {
    bits.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            _ => bail!("key must be a string of 0 and 1, got `{bits}`"),
        })
        .collect()
}

impl ScorerSpec {
    pub fn build(args: &ScorerArgs, input: &Netlist, seed: u64) -> Result<Self> {
        if let Some(url) = &args.endpoint {
            return Ok(ScorerSpec::Remote { url: url.clone(), kind: args.kind });
        }
        Ok(match args.kind {
            ScorerKind::Similarity => {
                let reference = match &args.reference {
                    Some(p) => read_netlist(p)?,
                    None => input.clone(),
                };
                ScorerSpec::Similarity(SimilaritySurrogate::new(&reference))
            }
            ScorerKind::KeyAccuracy => {
                let key = parse_key(args.key.as_deref().context("--key is required for the key surrogate")?)?;
                if args.corpus.is_empty() {
                    bail!("--corpus is required for the key surrogate");
                }
                // corpus designs are locked locally with the same key width
                let designs: Vec<(Netlist, Vec<bool>)> = args
                    .corpus
                    .iter()
                    .enumerate()
                    .map(|(i, p)| Ok(lock_with_xor_keys(&read_netlist(p)?, key.len(), seed ^ i as u64)))
                    .collect::<Result<_>>()?;
                let corpus = KeyCorpus::from_locked(designs.iter().map(|(n, k)| (n, k.as_slice())));
                ScorerSpec::Key(KeySurrogate::new(corpus, key))
            }
            ScorerKind::NodeAccuracy => {
                let designs: Vec<Netlist> = args.corpus.iter().map(|p| read_netlist(p)).collect::<Result<_>>()?;
                let corpus = NodeCorpus::from_labelled(&designs);
                if corpus.is_empty() {
                    bail!("--corpus must contain labelled gates for the node surrogate");
                }
                ScorerSpec::Node(NodeSurrogate::new(corpus))
            }
        })
    }

    pub fn make(&self) -> Box<dyn Scorer + Send> {
        match self {
            ScorerSpec::Remote { url, kind } => Box::new(RemoteScorer::new(url, *kind)),
            ScorerSpec::Similarity(s) => Box::new(s.clone()),
            ScorerSpec::Key(s) => Box::new(s.clone()),
            ScorerSpec::Node(s) => Box::new(s.clone()),
        }
    }

    /// Scores `n` once, with overhead measured against `n` itself.
    pub fn report(&self, n: &Netlist) -> Result<ScoreReport> {
        let mut s = self.make();
        let security = s.score(n)?;
        let a = area(n, &CellAreaTable::default())?;
        Ok(ScoreReport::new(s.kind(), security, a, a))
    }
}
