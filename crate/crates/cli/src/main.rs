mod scorer;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use netmorph::features::BinScheme;
use netmorph::orchestrate::{
    run_ablation, run_attack, run_order_study, seeds_from, AblationMode, AttackConfig, DEFAULT_RUNS,
};
use netmorph::planner::{HeuristicPlanner, HttpTransport, LlmPlanner, Planner, PlanningOrder, RandomPlanner};
use netmorph::verify::{check_equivalence, validate_structure, EquivBudget, EquivMode};
use netmorph::{emit_bench, emit_json, parse_bench, parse_json, Netlist};
use serde_json::json;

use scorer::{ScorerArgs, ScorerSpec};

#[derive(Parser)]
#[command(name = "netmorph", version, about = "Function-preserving adversarial netlist rewriting")]
struct Cli {
    /// Master seed; every command is reproducible under it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse a netlist and re-emit it, optionally in the other format.
    Convert {
        #[arg(long = "in")]
        input: PathBuf,
        /// Output file; the extension picks the format. Stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_parser = ["bench", "json"])]
        to: Option<String>,
    },
    /// Structural checks on one netlist, or functional equivalence of two.
    Validate {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: Option<PathBuf>,
        /// exhaustive, random:K or miter.
        #[arg(long, default_value = "exhaustive")]
        equiv: EquivMode,
    },
    /// Score one netlist with a detector.
    Score {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        scorer: ScorerArgs,
    },
    /// Run the closed-loop attack on one netlist.
    Attack {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Compare hybrid, RL-only and planner-only runs over several seeds.
    Ablate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "hybrid,rl_only,llm_only")]
        modes: Vec<AblationMode>,
        #[arg(long, default_value_t = DEFAULT_RUNS)]
        runs: usize,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run every planning order over several seeds.
    OrderStudy {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_RUNS)]
        runs: usize,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum PlannerChoice {
    Heuristic,
    Random,
    /// Chat-completions backend from NETMORPH_LLM_ENDPOINT / _MODEL / _API_KEY.
    Llm,
}

#[derive(Args, Clone)]
struct RunArgs {
    #[command(flatten)]
    scorer: ScorerArgs,
    /// TOML attack configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "heuristic")]
    planner: PlannerChoice,
    /// Append planner request/reply pairs to this file.
    #[arg(long)]
    llm_transcript: Option<PathBuf>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Inclusive hop bounds, e.g. 1:20.
    #[arg(long, value_parser = parse_hop_range)]
    hop_range: Option<(u32, u32)>,
    #[arg(long)]
    bin_scheme: Option<BinScheme>,
    #[arg(long)]
    equiv: Option<EquivMode>,
    #[arg(long)]
    order: Option<PlanningOrder>,
    #[arg(long)]
    n_gates: Option<usize>,
    #[arg(long)]
    pool_size: Option<usize>,
    #[arg(long)]
    polish_iters: Option<usize>,
    /// ABC executable used for resynthesis instead of the internal mapper.
    #[arg(long)]
    abc: Option<PathBuf>,
    #[arg(long, default_value = "netmorph-out")]
    out_dir: PathBuf,
}

fn parse_hop_range(s: &str) -> Result<(u32, u32), String> {
    let (a, b) = s.split_once(':').ok_or("expected LO:HI")?;
    let lo: u32 = a.parse().map_err(|_| format!("bad lower bound `{a}`"))?;
    let hi: u32 = b.parse().map_err(|_| format!("bad upper bound `{b}`"))?;
    if lo == 0 || lo > hi {
        return Err(format!("empty or invalid hop range {lo}:{hi}"));
    }
    Ok((lo, hi))
}

fn read_netlist(path: &Path) -> Result<Netlist> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("netlist");
    if path.extension().is_some_and(|e| e == "json") {
        Ok(parse_json(&text).with_context(|| format!("parsing {}", path.display()))?)
    } else {
        Ok(parse_bench(name, &text).with_context(|| format!("parsing {}", path.display()))?)
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("netlist").to_string()
}

impl RunArgs {
    fn config(&self, seed: u64) -> Result<AttackConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => AttackConfig::default(),
        };
        cfg.seed = seed;
        cfg.tool = self.scorer.kind;
        if let Some(v) = self.max_iters {
            cfg.max_iters = v;
        }
        if let Some(v) = self.hop_range {
            cfg.hop_range = v;
        }
        if let Some(v) = self.bin_scheme {
            cfg.bin_scheme = v;
        }
        if let Some(v) = self.equiv {
            cfg.equiv = EquivBudget::from_mode(v, seed);
        }
        if let Some(v) = self.order {
            cfg.order = v;
        }
        if let Some(v) = self.n_gates {
            cfg.n_gates = v;
        }
        if let Some(v) = self.pool_size {
            cfg.pool_size = v;
        }
        if let Some(v) = self.polish_iters {
            cfg.polish_iters = v;
        }
        if self.abc.is_some() {
            cfg.abc = self.abc.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn planner(&self, seed: u64) -> Result<Box<dyn Planner + Send>> {
        Ok(match self.planner {
            PlannerChoice::Heuristic => Box::new(HeuristicPlanner::new(seed)),
            PlannerChoice::Random => Box::new(RandomPlanner::new(seed)),
            PlannerChoice::Llm => {
                let mut t = HttpTransport::from_env()
                    .with_context(|| format!("{} is not set", HttpTransport::ENV_ENDPOINT))?;
                if let Some(p) = &self.llm_transcript {
                    t = t.with_transcript(p);
                }
                Box::new(LlmPlanner::new(t))
            }
        })
    }

    fn planner_factory(&self) -> Result<impl Fn(u64) -> Box<dyn Planner + Send> + Sync + '_> {
        // fail early on a missing backend rather than inside a worker
        self.planner(0)?;
        Ok(move |seed| self.planner(seed).expect("checked above"))
    }
}

fn emit(json_mode: bool, value: serde_json::Value, text: impl FnOnce() -> String) {
    if json_mode {
        println!("{}", serde_json::to_string_pretty(&value).expect("json"));
    } else {
        print!("{}", text());
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let seed = cli.seed;
    match cli.cmd {
        Cmd::Convert { input, out, to } => {
            let n = read_netlist(&input)?;
            let format = to
                .or_else(|| out.as_ref().and_then(|p| p.extension()).map(|e| e.to_string_lossy().into_owned()))
                .unwrap_or_else(|| "bench".into());
            let text = if format == "json" { emit_json(&n) } else { emit_bench(&n) };
            match out {
                Some(p) => std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{text}"),
            }
        }
        Cmd::Validate { a, b, equiv } => {
            let na = read_netlist(&a)?;
            let structure = validate_structure(&na);
            let verdict = match &b {
                Some(b) => Some(check_equivalence(&na, &read_netlist(b)?, &EquivBudget::from_mode(equiv, seed))?),
                None => None,
            };
            let ok = structure.structure_ok() && verdict.as_ref().is_none_or(|v| v.is_equal());
            let value = json!({
                "syntax_ok": structure.syntax_ok,
                "connectivity_ok": structure.connectivity_ok,
                "acyclic_ok": structure.acyclic_ok,
                "tier": verdict.as_ref().map(|v| v.tier()),
                "verdict": verdict,
                "equal": verdict.as_ref().map(|v| v.is_equal()),
            });
            emit(cli.json, value, || match &verdict {
                Some(v) => format!("{}\n", serde_json::to_value(v).expect("json")["verdict"].as_str().unwrap_or("")),
                None => format!("structure {}\n", if ok { "ok" } else { "invalid" }),
            });
            if !ok {
                return Ok(ExitCode::from(2));
            }
        }
        Cmd::Score { input, scorer } => {
            let n = read_netlist(&input)?;
            let spec = ScorerSpec::build(&scorer, &n, seed)?;
            let report = spec.report(&n)?;
            emit(cli.json, serde_json::to_value(report)?, || format!("{}\n", report.security));
        }
        Cmd::Attack { input, run } => {
            let n = read_netlist(&input)?;
            let cfg = run.config(seed)?;
            let spec = ScorerSpec::build(&run.scorer, &n, seed)?;
            let mut scorer = spec.make();
            let mut planner = run.planner(seed)?;
            let out = run_attack(&n, &cfg, &mut scorer, &mut planner)?;
            let name = stem(&input);
            out.trajectory.write(&run.out_dir, &name)?;
            let rewritten = run.out_dir.join(format!("{name}.rewritten.bench"));
            std::fs::write(&rewritten, emit_bench(&out.netlist))?;
            let s = &out.trajectory.summary;
            emit(cli.json, serde_json::to_value(s)?, || {
                format!(
                    "evaded={} security={:.4} overhead={:.3} iterations={} queries={} -> {}\n",
                    s.evaded,
                    s.best_security,
                    s.best_overhead,
                    s.iterations,
                    s.total_queries,
                    rewritten.display()
                )
            });
            return Ok(if s.evaded { ExitCode::SUCCESS } else { ExitCode::from(2) });
        }
        Cmd::Ablate { input, modes, runs, jobs, run } => {
            let n = read_netlist(&input)?;
            let cfg = run.config(seed)?;
            let spec = ScorerSpec::build(&run.scorer, &n, seed)?;
            let planners = run.planner_factory()?;
            let seeds = seeds_from(seed, runs);
            let name = stem(&input);
            let mut rows = Vec::new();
            for mode in modes {
                let r = run_ablation(&n, &cfg, mode, &seeds, jobs, &|| spec.make(), &planners)?;
                let dir = run.out_dir.join(mode.name());
                for (t, s) in r.runs.iter().zip(&seeds) {
                    t.write(&dir, &format!("{name}.seed{s}"))?;
                }
                std::fs::write(dir.join("ablation.json"), serde_json::to_string_pretty(&r)?)?;
                rows.push(json!({
                    "mode": mode.name(),
                    "seeds": r.seeds,
                    "evasions": r.evasions,
                    "mean_iterations": r.mean_iterations,
                    "var_iterations": r.var_iterations,
                    "mean_final_overhead": r.mean_final_overhead,
                    "dir": dir,
                }));
            }
            let value = json!({ "runs": runs, "max_iters": cfg.max_iters, "modes": rows });
            emit(cli.json, value.clone(), || {
                let mut s = String::from("mode      evaded  mean_iters  var_iters  mean_overhead\n");
                for r in value["modes"].as_array().unwrap() {
                    s += &format!(
                        "{:<9} {:>4}/{:<2} {:>10.2} {:>10.2} {:>14.4}\n",
                        r["mode"].as_str().unwrap(),
                        r["evasions"],
                        runs,
                        r["mean_iterations"].as_f64().unwrap(),
                        r["var_iterations"].as_f64().unwrap(),
                        r["mean_final_overhead"].as_f64().unwrap()
                    );
                }
                s
            });
        }
        Cmd::OrderStudy { input, runs, jobs, run } => {
            let n = read_netlist(&input)?;
            let cfg = run.config(seed)?;
            let spec = ScorerSpec::build(&run.scorer, &n, seed)?;
            let planners = run.planner_factory()?;
            let study = run_order_study(&n, &cfg, &seeds_from(seed, runs), jobs, &|| spec.make(), &planners)?;
            std::fs::create_dir_all(&run.out_dir)?;
            std::fs::write(run.out_dir.join("order_study.json"), serde_json::to_string_pretty(&study)?)?;
            std::fs::write(run.out_dir.join("order_study.txt"), study.to_table())?;
            emit(cli.json, serde_json::to_value(&study)?, || study.to_table());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hop_range_parsing() {
        assert_eq!(parse_hop_range("1:20"), Ok((1, 20)));
        assert_eq!(parse_hop_range("4:4"), Ok((4, 4)));
        for bad in ["1:0", "0:3", "5", "a:b", "3:"] {
            assert!(parse_hop_range(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn flags_override_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "max_iters = 7\nhop_range = [2, 9]\npool_size = 12\n").unwrap();
        let cli = Cli::try_parse_from([
            "netmorph", "attack", "--in", "x.bench", "--config", path.to_str().unwrap(), "--max-iters", "30",
        ])
        .unwrap();
        let Cmd::Attack { run, .. } = cli.cmd else { unreachable!() };
        let cfg = run.config(5).unwrap();
        assert_eq!((cfg.max_iters, cfg.hop_range, cfg.pool_size, cfg.seed), (30, (2, 9), 12, 5));
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "max_iter = 7\n").unwrap();
        let cli = Cli::try_parse_from(["netmorph", "attack", "--in", "x", "--config", path.to_str().unwrap()]).unwrap();
        let Cmd::Attack { run, .. } = cli.cmd else { unreachable!() };
        assert!(run.config(0).is_err());
    }
}
