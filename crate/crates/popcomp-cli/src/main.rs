//! Command line for population computers: compile predicates, convert the
//! results to two-agent consensus protocols, simulate, benchmark and verify.
//!
//! Every subcommand is a thin adapter over the library: arguments are parsed
//! and marshalled, one library call does the work, and the result is printed
//! as text, JSON or CSV. Exit codes: 0 success, 1 negative verdict from a
//! verification, 2 usage error, 3 internal invariant violation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use popcomp::computer::{Config, PopulationComputer};
use popcomp::convert::{pipeline, PipelineMode};
use popcomp::{qfpa, sim, synth, verify};

#[derive(Parser)]
#[command(
    name = "popcomp",
    version,
    about = "Build, convert, simulate and verify population computers for Presburger predicates"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PipelineArg {
    Fast,
    Full,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate a predicate on an input assignment and print 0 or 1.
    Eval {
        /// Predicate, e.g. "8x+2y+z = 4 mod 11" or "-2x+y >= 5".
        formula: String,
        /// Input assignment, e.g. x=0,y=2,z=0; missing variables are 0.
        #[arg(long)]
        input: String,
    },
    /// Compile a predicate into a population computer document.
    Compile {
        formula: String,
        /// Replace the predicate by its doubled form before compiling.
        #[arg(long)]
        double: bool,
        /// Per-threshold-atom degree overrides, comma separated.
        #[arg(long, value_name = "D,D,...")]
        threshold_degree: Option<String>,
        /// Write the computer JSON here instead of stdout.
        #[arg(short, long, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Print size statistics of a computer document.
    Info {
        path: PathBuf,
    },
    /// Run the conversion pipeline down to a binary consensus protocol.
    Convert {
        path: PathBuf,
        #[arg(long, value_enum, default_value_t = PipelineArg::Fast)]
        pipeline: PipelineArg,
        /// Write the final protocol JSON here instead of stdout.
        #[arg(short, long, value_name = "FILE")]
        output: Option<PathBuf>,
        /// Also write each stage computer and its refinement-map sidecar
        /// next to the output file.
        #[arg(long, requires = "output")]
        stages: bool,
    },
    /// Simulate a computer document from an input assignment.
    Simulate {
        path: PathBuf,
        /// Either variables (x=3,y=1: builds the input and adds the helper
        /// block) or exact state labels (the configuration as given).
        #[arg(long)]
        input: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long, default_value_t = 1_000_000_000)]
        max_interactions: u64,
        /// Print one CSV line per trial instead of the summary.
        #[arg(long)]
        csv: bool,
        /// Run trials on this many threads; results match the sequential
        /// order.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Exhaustively check a computer against a predicate on all small inputs.
    Verify {
        path: PathBuf,
        #[arg(long)]
        predicate: String,
        /// Check every input whose counts sum to at most this.
        #[arg(long, default_value_t = 3)]
        inputs_up_to: u64,
        /// Extra helper agents to tolerate, in every distribution.
        #[arg(long, default_value_t = 2)]
        helper_slack: u64,
        /// Exploration cap per input, in configurations.
        #[arg(long, default_value_t = 1_000_000)]
        max_configs: usize,
    },
    /// Derive a potential certificate, or synthesize one by linear
    /// programming with --synthesize.
    Potential {
        path: PathBuf,
        #[arg(long)]
        synthesize: bool,
    },
    /// Sweep population sizes and print interaction statistics as CSV.
    Bench {
        path: PathBuf,
        /// Population sizes, comma separated.
        #[arg(long, value_name = "N,N,...")]
        sizes: String,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1_000_000_000)]
        max_interactions: u64,
        /// Run the trials of each size on this many threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(code)) => code,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(_) => {
            eprintln!("internal error");
            ExitCode::from(3)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::Eval { formula, input } => {
            let phi = parse_formula(&formula)?;
            let x = parse_assignment(&input)?;
            println!("{}", u8::from(phi.eval(&x)));
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Compile {
            formula,
            double,
            threshold_degree,
            output,
        } => {
            let mut phi = parse_formula(&formula)?;
            if double {
                phi = phi.double().map_err(|e| anyhow!("{e}"))?;
            }
            let degrees = parse_u32_list(threshold_degree.as_deref())?;
            let p = synth::compile(&phi, &degrees).map_err(|e| anyhow!("{e}"))?;
            write_computer(&p, output.as_deref())?;
            eprintln!("{}", p.stats());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Info { path } => {
            let p = load(&path)?;
            println!("{}", p.stats());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Convert {
            path,
            pipeline: mode,
            output,
            stages,
        } => {
            let p = load(&path)?;
            let mode = match mode {
                PipelineArg::Fast => PipelineMode::Fast,
                PipelineArg::Full => PipelineMode::Full,
            };
            let result = pipeline(&p, mode).map_err(|e| anyhow!("{e}"))?;
            let report = serde_json::to_string_pretty(&result.report)?;
            match &output {
                Some(path) => {
                    result
                        .protocol()
                        .to_file(path)
                        .map_err(|e| anyhow!("{e}"))?;
                    if stages {
                        write_stage_files(&result, path)?;
                    }
                    println!("{report}");
                }
                None => {
                    println!(
                        "{}",
                        serde_json::to_string_pretty(&result.protocol().to_json())?
                    );
                    eprintln!("{report}");
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Simulate {
            path,
            input,
            seed,
            trials,
            max_interactions,
            csv,
            jobs,
        } => {
            let p = load(&path)?;
            let c0 = starting_configuration(&p, &input)?;
            let results = simulate_trials(&p, &c0, trials, seed, max_interactions, jobs)?;
            if csv {
                print!("{}", sim::trials_csv(&results));
            } else {
                print_stats(&sim::aggregate(&results));
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Verify {
            path,
            predicate,
            inputs_up_to,
            helper_slack,
            max_configs,
        } => {
            let p = load(&path)?;
            let phi = parse_formula(&predicate)?;
            let vars: Vec<String> = phi.vars().into_iter().collect();
            let mut all_pass = true;
            let mut rows = Vec::new();
            for input in assignments_up_to(&vars, inputs_up_to) {
                let report = verify::check_correct(&p, &phi, &input, helper_slack, max_configs)
                    .map_err(|e| anyhow!("{e}"))?;
                all_pass &= report.pass;
                rows.push(serde_json::json!({
                    "input": input,
                    "pass": report.pass,
                    "expected": u8::from(report.expected),
                    "variants": report.variants,
                    "nodes": report.nodes,
                    "edges": report.edges,
                    "failures": report.failures,
                }));
            }
            let doc = serde_json::json!({ "pass": all_pass, "inputs": rows });
            println!("{}", serde_json::to_string_pretty(&doc)?);
            Ok(verdict(all_pass))
        }
        Cmd::Potential { path, synthesize } => {
            let p = load(&path)?;
            if synthesize {
                match verify::synthesize_potential(&p).map_err(|e| anyhow!("{e}"))? {
                    verify::PotentialOutcome::Weights(w) => {
                        let doc = serde_json::json!({ "weights": w });
                        println!("{}", serde_json::to_string_pretty(&doc)?);
                        Ok(ExitCode::SUCCESS)
                    }
                    verify::PotentialOutcome::Unbounded(witness) => {
                        let y: BTreeMap<String, String> = witness
                            .nonzero()
                            .map(|(i, c)| (i.to_string(), c.to_string()))
                            .collect();
                        let doc = serde_json::json!({ "unbounded_witness": y });
                        println!("{}", serde_json::to_string_pretty(&doc)?);
                        Ok(verdict(false))
                    }
                }
            } else {
                let weights = synth::potential(&p).map_err(|e| {
                    anyhow!("{e}; --synthesize derives one by linear programming instead")
                })?;
                match synth::check_potential(&p, &weights) {
                    Ok(()) => {
                        let doc = serde_json::json!({ "weights": weights });
                        println!("{}", serde_json::to_string_pretty(&doc)?);
                        Ok(ExitCode::SUCCESS)
                    }
                    Err(violations) => {
                        let doc = serde_json::json!({
                            "weights": weights,
                            "violations": violations,
                        });
                        println!("{}", serde_json::to_string_pretty(&doc)?);
                        Ok(verdict(false))
                    }
                }
            }
        }
        Cmd::Bench {
            path,
            sizes,
            trials,
            seed,
            max_interactions,
            jobs,
        } => {
            let p = load(&path)?;
            let sizes: Vec<u64> = parse_u64_list(&sizes)?;
            let rows = bench(&p, &sizes, trials, seed, max_interactions, jobs)?;
            print!("{}", sim::bench_csv(&rows));
            match sim::log_log_slope(&rows) {
                Some(s) => eprintln!("log-log slope: {s:.3}"),
                None => eprintln!("log-log slope: undefined"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn verdict(pass: bool) -> ExitCode {
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn parse_formula(s: &str) -> Result<qfpa::Predicate> {
    qfpa::parse(s).map_err(|e| anyhow!("{e}"))
}

fn parse_assignment(s: &str) -> Result<BTreeMap<String, u64>> {
    let mut out = BTreeMap::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| anyhow!("expected name=count, got {part:?}"))?;
        let count: u64 = value
            .trim()
            .parse()
            .with_context(|| format!("count in {part:?}"))?;
        if out.insert(key.trim().to_string(), count).is_some() {
            bail!("duplicate assignment for {:?}", key.trim());
        }
    }
    if out.is_empty() {
        bail!("empty input assignment");
    }
    Ok(out)
}

fn parse_u32_list(s: Option<&str>) -> Result<Vec<u32>> {
    let Some(s) = s else {
        return Ok(Vec::new());
    };
    s.split(',')
        .map(|p| p.trim().parse::<u32>().with_context(|| format!("{p:?}")))
        .collect()
}

fn parse_u64_list(s: &str) -> Result<Vec<u64>> {
    s.split(',')
        .map(|p| p.trim().parse::<u64>().with_context(|| format!("{p:?}")))
        .collect()
}

fn load(path: &Path) -> Result<PopulationComputer> {
    PopulationComputer::from_file(path)
        .map_err(|e| anyhow!("{e}"))
        .with_context(|| format!("reading {}", path.display()))
}

fn write_computer(p: &PopulationComputer, output: Option<&Path>) -> Result<()> {
    match output {
        Some(path) => p.to_file(path).map_err(|e| anyhow!("{e}")),
        None => {
            println!("{}", serde_json::to_string_pretty(&p.to_json())?);
            Ok(())
        }
    }
}

fn write_stage_files(result: &popcomp::convert::PipelineResult, protocol_path: &Path) -> Result<()> {
    let stem = protocol_path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("pipeline");
    let dir = protocol_path.parent().unwrap_or(Path::new("."));
    for stage in &result.stages {
        let base = dir.join(format!("{stem}.{}", stage.name));
        stage
            .computer
            .to_file(&base.with_extension("json"))
            .map_err(|e| anyhow!("{e}"))?;
        if let Some(map) = &stage.refinement {
            let path = dir.join(format!("{stem}.{}.map.json", stage.name));
            std::fs::write(&path, serde_json::to_string_pretty(&map.to_json())?)
                .with_context(|| format!("writing {}", path.display()))?;
        }
    }
    Ok(())
}

/// Builds the starting configuration from the --input argument: variable
/// names construct the input block and add the helper block; exact state
/// labels give the configuration verbatim.
fn starting_configuration(p: &PopulationComputer, input: &str) -> Result<Config> {
    let map = parse_assignment(input)?;
    if let Ok(c) = synth::input_config(p, &map) {
        return p.initial(&c, &Config::new()).map_err(|e| anyhow!("{e}"));
    }
    let all_inputs = map.keys().all(|label| {
        p.state(label)
            .is_some_and(|q| p.inputs().contains(&q))
    });
    let c = p.config_from_labels(&map).map_err(|e| anyhow!("{e}"))?;
    if all_inputs {
        return p.initial(&c, &Config::new()).map_err(|e| anyhow!("{e}"));
    }
    Ok(c)
}

/// Runs the trials of one simulation, on `jobs` threads when asked; the
/// per-trial seeds come from the library's splitting rule either way, so the
/// results match the sequential order exactly.
fn simulate_trials(
    p: &PopulationComputer,
    c0: &Config,
    trials: usize,
    seed: u64,
    cap: u64,
    jobs: usize,
) -> Result<Vec<sim::TrialResult>> {
    let pairwise = p.helper_total() == 0 && p.transitions().iter().all(|t| t.arity() == 2);
    let seeds = sim::trial_seeds(seed, trials);
    let one = |s: u64| -> Result<sim::TrialResult> {
        if pairwise {
            sim::run_protocol(p, c0, s, cap).map_err(|e| anyhow!("{e}"))
        } else {
            let r = sim::run_computer_fair(p, c0, s, cap);
            Ok(sim::TrialResult {
                seed: r.seed,
                n: r.n,
                interactions: r.steps,
                capped: r.capped,
                output: r.output,
                wall: r.wall,
            })
        }
    };
    run_indexed(&seeds, jobs, one)
}

/// Benchmarks a pairwise protocol over population sizes, distributing each
/// population uniformly at random over the input states.
fn bench(
    p: &PopulationComputer,
    sizes: &[u64],
    trials: usize,
    seed: u64,
    cap: u64,
    jobs: usize,
) -> Result<Vec<sim::BenchRow>> {
    use rand::{Rng, RngCore, SeedableRng};
    let inputs: Vec<_> = p.inputs().iter().copied().collect();
    if inputs.is_empty() {
        bail!("computer has no input states");
    }
    let make = |n: u64, rng: &mut rand_chacha::ChaCha8Rng| {
        let mut c = Config::new();
        for _ in 0..n {
            c.add(inputs[rng.gen_range(0..inputs.len())], 1);
        }
        c
    };
    if jobs <= 1 {
        return sim::scaling_bench(p, make, sizes, trials, seed, cap).map_err(|e| anyhow!("{e}"));
    }
    if sizes.is_empty() || trials == 0 {
        bail!("{}", sim::SimError::EmptyBench);
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let starts: Vec<(Config, u64)> = (0..trials)
            .map(|_| {
                let c0 = make(n, &mut rng);
                let s = rng.next_u64();
                (c0, s)
            })
            .collect();
        let results = run_indexed(&starts, jobs, |(c0, s)| {
            sim::run_protocol(p, c0, *s, cap).map_err(|e| anyhow!("{e}"))
        })?;
        let stats = sim::aggregate(&results);
        rows.push(sim::BenchRow {
            n,
            trials,
            mean: stats.mean_interactions,
            stddev: stats.stddev_interactions,
            min: stats.min_interactions,
            max: stats.max_interactions,
        });
    }
    Ok(rows)
}

/// Maps `work` over the items on up to `jobs` threads, preserving order.
fn run_indexed<T: Sync, R: Send>(
    items: &[T],
    jobs: usize,
    work: impl Fn(&T) -> Result<R> + Sync,
) -> Result<Vec<R>> {
    let jobs = jobs.max(1).min(items.len().max(1));
    if jobs == 1 {
        return items.iter().map(&work).collect();
    }
    let mut slots: Vec<Option<Result<R>>> = (0..items.len()).map(|_| None).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots_mutex = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = work(&items[i]);
                slots_mutex.lock().expect("no poisoned lock")[i] = Some(r);
            });
        }
    });
    drop(slots_mutex);
    slots
        .into_iter()
        .map(|s| s.expect("every slot filled"))
        .collect()
}

/// All assignments of the variables with counts summing to at most `total`.
fn assignments_up_to(vars: &[String], total: u64) -> Vec<BTreeMap<String, u64>> {
    let mut out = Vec::new();
    let mut acc = BTreeMap::new();
    fn rec(
        vars: &[String],
        left: u64,
        acc: &mut BTreeMap<String, u64>,
        out: &mut Vec<BTreeMap<String, u64>>,
    ) {
        match vars {
            [] => out.push(acc.clone()),
            [v, rest @ ..] => {
                for k in 0..=left {
                    acc.insert(v.clone(), k);
                    rec(rest, left - k, acc, out);
                }
                acc.remove(v);
            }
        }
    }
    rec(vars, total, &mut acc, &mut out);
    out
}

fn print_stats(s: &sim::RunStats) {
    println!("trials: {}", s.trials);
    println!("mean interactions: {:.3}", s.mean_interactions);
    println!("stddev interactions: {:.3}", s.stddev_interactions);
    println!("min interactions: {}", s.min_interactions);
    println!("max interactions: {}", s.max_interactions);
    println!(
        "outputs: 0 -> {}, 1 -> {}, undefined -> {}",
        s.outputs_false, s.outputs_true, s.outputs_none
    );
    println!("capped: {}", s.capped);
}
