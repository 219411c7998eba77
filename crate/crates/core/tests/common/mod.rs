#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};

use netmorph::netlist::{Gate, GateType, Netlist};
use netmorph::parse_bench;
use netmorph::score::{ScoreError, Scorer, ScorerKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> Netlist {
    let path = format!("{}/tests/fixtures/{name}.bench", env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    parse_bench(name, &text).unwrap()
}

const KINDS: [GateType; 8] = [
    GateType::And,
    GateType::Nand,
    GateType::Or,
    GateType::Nor,
    GateType::Xor,
    GateType::Xnor,
    GateType::Inv,
    GateType::Buf,
];

/// Random DAG over `pis` inputs. Every gate reads earlier nets; nets nobody
/// reads become outputs, plus the last gate.
pub fn random_circuit(seed: u64, pis: usize, gates: usize) -> Netlist {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<String> = (0..pis).map(|i| format!("x{i}")).collect();
    let mut nets = inputs.clone();
    let mut read = vec![false; pis + gates];
    let mut out = Vec::new();
    for g in 0..gates {
        let kind = KINDS[rng.gen_range(0..KINDS.len())];
        let arity = match kind {
            GateType::Inv | GateType::Buf => 1,
            _ => rng.gen_range(2..=3.min(nets.len()).max(2)),
        };
        // bias toward recent nets so the circuit gets some depth
        let mut ins = Vec::new();
        while ins.len() < arity {
            let lo = nets.len().saturating_sub(8);
            let k = if rng.gen_bool(0.7) { rng.gen_range(lo..nets.len()) } else { rng.gen_range(0..nets.len()) };
            if !ins.contains(&nets[k]) || nets.len() < arity {
                read[k] = true;
                ins.push(nets[k].clone());
            }
        }
        let name = format!("n{g}");
        out.push(Gate::new(format!("g{g}"), kind, ins, name.clone()));
        nets.push(name);
    }
    let mut outputs: Vec<String> =
        (pis..pis + gates).filter(|&k| !read[k]).map(|k| nets[k].clone()).collect();
    if outputs.is_empty() {
        outputs.push(nets.last().unwrap().clone());
    }
    Netlist::new(format!("rand{seed}"), inputs, outputs, out).unwrap()
}

/// Minimal HTTP/1.1 server answering every POST with `respond(path, body)`.
pub struct MockServer {
    pub url: String,
    pub requests: Arc<Mutex<Vec<(String, String)>>>,
}

impl MockServer {
    pub fn start(respond: impl Fn(&str, &str) -> (u16, String) + Send + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let requests: Arc<Mutex<Vec<(String, String)>>> = Arc::default();
        let log = requests.clone();
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut line = String::new();
                if reader.read_line(&mut line).is_err() {
                    continue;
                }
                let path = line.split_whitespace().nth(1).unwrap_or("/").to_string();
                let mut len = 0usize;
                loop {
                    let mut h = String::new();
                    reader.read_line(&mut h).unwrap();
                    if h.trim().is_empty() {
                        break;
                    }
                    if let Some((k, v)) = h.split_once(':') {
                        if k.eq_ignore_ascii_case("content-length") {
                            len = v.trim().parse().unwrap();
                        }
                    }
                }
                let mut body = vec![0u8; len];
                reader.read_exact(&mut body).unwrap();
                let body = String::from_utf8(body).unwrap();
                log.lock().unwrap().push((path.clone(), body.clone()));
                let (status, reply) = respond(&path, &body);
                let _ = write!(
                    stream,
                    "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{reply}",
                    reply.len()
                );
            }
        });
        MockServer { url, requests }
    }
}

/// Synthetic detector that flags any design whose two-input logic is not
/// predominantly NOR: security is the share of non-NOR logic gates.
pub struct NorVocabulary;

impl Scorer for NorVocabulary {
    fn kind(&self) -> ScorerKind {
        ScorerKind::NodeAccuracy
    }

    fn score(&mut self, n: &Netlist) -> Result<f64, ScoreError> {
        let logic = n.gates().iter().filter(|g| !matches!(g.kind, GateType::Inv | GateType::Buf)).count();
        let other = n.gates().iter().filter(|g| !matches!(g.kind, GateType::Inv | GateType::Buf | GateType::Nor)).count();
        Ok(if logic == 0 { 0.0 } else { other as f64 / logic as f64 })
    }
}

/// Wraps a scorer and counts calls.
pub struct Counting<S> {
    pub inner: S,
    pub calls: Arc<Mutex<usize>>,
}

impl<S: Scorer> Scorer for Counting<S> {
    fn kind(&self) -> ScorerKind {
        self.inner.kind()
    }

    fn score(&mut self, n: &Netlist) -> Result<f64, ScoreError> {
        *self.calls.lock().unwrap() += 1;
        self.inner.score(n)
    }
}
