//! Command-line front end: simulation, flooding, metrics, formula oracles,
//! experiments, and trajectory replay validation.
//!
//! Exit status: 0 on success, 1 on validation or usage errors, 2 when an
//! assertion or statistical check fails. Machine-readable output goes to
//! stdout or files; log text goes to stderr.

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use churngraph::churn::PoissonChurnParams;
use churngraph::flooding::{flood, FloodOptions, FloodVariant};
use churngraph::harness::{
    aggregate, predefined, run_experiment, write_records_csv, ExperimentConfig, Rule,
};
use churngraph::metrics::{
    degree_stats, edge_prob_empirical, edge_prob_pdgr_buckets, edge_prob_streaming_regen,
    h_out_exact, h_out_sampled, isolated_count,
};
use churngraph::model::{
    replay_check, snapshot_at, ModelKind, ModelParams, NodeId, Snapshot, Time, Trajectory,
};
use churngraph::{churn, stats, Error};

#[derive(Parser)]
#[command(
    name = "churngraph",
    about = "Dynamic random graphs with node churn: simulation, flooding, expansion metrics",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a trajectory and write it as JSONL.
    Simulate(SimulateArgs),
    /// Run a flooding process over a trajectory and export the trace CSV.
    Flood(FloodArgs),
    /// Vertex expansion of a snapshot (exact for small graphs, else sampled).
    Expansion(ExpansionArgs),
    /// Degree statistics and isolated-node count of a snapshot.
    Stats(StatsArgs),
    /// Closed-form formulas checked against Monte-Carlo simulation.
    Oracle(OracleArgs),
    /// Run a multi-trial experiment from a JSON config or a predefined suite.
    Experiment(ExperimentArgs),
    /// Replay a trajectory and verify the model invariants.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// sdg | sdgr | pdg | pdgr
    #[arg(long)]
    model: String,
    /// Streaming lifetime, or expected size for canonical Poisson (lambda=1,
    /// mu=1/n).
    #[arg(long)]
    n: Option<u64>,
    /// Poisson arrival rate (overrides --n together with --mu).
    #[arg(long)]
    lambda: Option<f64>,
    /// Poisson per-node death rate.
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    d: u32,
    /// Rounds (streaming) or churn events (Poisson).
    #[arg(long)]
    horizon: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output JSONL path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FloodArgs {
    #[arg(long)]
    traj: PathBuf,
    /// sync | async | discretized
    #[arg(long)]
    variant: String,
    /// Start rule against n ("2n", "7nlogn") or an absolute value. Streaming:
    /// round; Poisson: event index.
    #[arg(long)]
    t0: String,
    /// "born-at-t0" or a node id.
    #[arg(long, default_value = "born-at-t0")]
    source: String,
    /// Grid steps to run; defaults to the end of the log.
    #[arg(long)]
    max_steps: Option<u64>,
    /// Keep sampling after the first completion.
    #[arg(long)]
    run_past_completion: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExpansionArgs {
    #[arg(long, conflicts_with = "snapshot")]
    traj: Option<PathBuf>,
    /// JSON snapshot file (as produced by `stats --dump-snapshot`).
    #[arg(long)]
    snapshot: Option<PathBuf>,
    /// Snapshot instant (rule or absolute); required with --traj.
    #[arg(long)]
    at: Option<String>,
    /// exact | sampled
    #[arg(long, default_value = "sampled")]
    method: String,
    #[arg(long)]
    min_size: Option<usize>,
    #[arg(long)]
    max_size: Option<usize>,
    #[arg(long, default_value_t = 10_000)]
    samples: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    traj: PathBuf,
    #[arg(long)]
    at: String,
    /// Also write the snapshot as JSON to this path.
    #[arg(long)]
    dump_snapshot: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    /// edge-prob-sdgr | edge-prob-pdgr | jump-chain | concentration
    #[arg(long)]
    check: String,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    d: Option<u32>,
    /// Requester age parameter k for edge-prob-sdgr.
    #[arg(long)]
    k: Option<u64>,
    #[arg(long, default_value_t = 1_000_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Pinned population sizes for jump-chain (comma-separated).
    #[arg(long, default_value = "900,1000,1100")]
    pinned: String,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long, conflicts_with = "predefined")]
    config: Option<PathBuf>,
    /// sdgr-floodtime-scaling | pdgr-floodtime
    #[arg(long)]
    predefined: Option<String>,
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Output prefix; writes <out>.csv and <out>.summary.json per config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed override for predefined suites.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    traj: PathBuf,
    #[arg(long)]
    assert_invariants: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> churngraph::Result<ExitCode> {
    match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Flood(args) => do_flood(args),
        Command::Expansion(args) => expansion(args),
        Command::Stats(args) => do_stats(args),
        Command::Oracle(args) => oracle(args),
        Command::Experiment(args) => experiment(args),
        Command::Replay(args) => replay(args),
    }
}

fn model_params(
    model: &str,
    n: Option<u64>,
    lambda: Option<f64>,
    mu: Option<f64>,
    d: u32,
) -> churngraph::Result<ModelParams> {
    let kind = ModelKind::parse(model)?;
    match (kind.is_streaming(), n, lambda, mu) {
        (true, Some(n), None, None) => ModelParams::streaming(kind, n, d),
        (false, Some(n), None, None) => ModelParams::poisson(kind, n, d),
        (false, _, Some(lambda), Some(mu)) => ModelParams::poisson_rates(kind, lambda, mu, d),
        _ => Err(Error::InvalidParams(
            "specify --n (streaming/canonical Poisson) or --lambda with --mu".into(),
        )),
    }
}

fn simulate(args: SimulateArgs) -> churngraph::Result<ExitCode> {
    let params = model_params(&args.model, args.n, args.lambda, args.mu, args.d)?;
    let traj = churngraph::engine::run_model(params, args.horizon, args.seed)?;
    traj.write_file(&args.out)?;
    eprintln!(
        "wrote {} events ({} nodes) to {}",
        traj.len(),
        traj.node_count(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

/// Resolve a t0 rule to (time, default source) on a loaded trajectory.
fn resolve_t0(traj: &Trajectory, rule: &str) -> churngraph::Result<(Time, NodeId)> {
    let r = Rule::parse(rule)?.eval_ceil(traj.params().n);
    if traj.params().kind.is_streaming() {
        let t = Time::from_round(r);
        let source = traj
            .node_born_at(t)
            .ok_or_else(|| Error::HorizonTooShort(format!("no birth at round {r}")))?;
        Ok((t, source))
    } else {
        let upto = r as usize;
        if upto >= traj.len() {
            return Err(Error::HorizonTooShort(format!(
                "event {r} beyond {} recorded events",
                traj.len()
            )));
        }
        for ev in &traj.events()[upto..] {
            if let churngraph::model::Event::Birth { id, .. } = ev.event {
                return Ok((ev.time, id));
            }
        }
        Err(Error::HorizonTooShort("no birth at or after t0".into()))
    }
}

fn do_flood(args: FloodArgs) -> churngraph::Result<ExitCode> {
    let traj = Trajectory::read_file(&args.traj)?;
    let variant = FloodVariant::parse(&args.variant)?;
    let (t0, default_source) = resolve_t0(&traj, &args.t0)?;
    let source = if args.source == "born-at-t0" {
        default_source
    } else {
        NodeId(
            args.source
                .parse::<u64>()
                .map_err(|_| Error::InvalidParams(format!("bad source '{}'", args.source)))?,
        )
    };
    let opts = FloodOptions {
        max_steps: args.max_steps,
        keep_sets: false,
        stop_at_completion: !args.run_past_completion,
    };
    let trace = flood(&traj, variant, t0, source, opts)?;
    let f = std::fs::File::create(&args.out)?;
    churngraph::flooding::write_traces_csv(std::io::BufWriter::new(f), &[(0, &trace)])?;
    match trace.completed_at {
        Some(t) => eprintln!(
            "completed at offset {} ({} samples)",
            t.value() - t0.value(),
            trace.samples.len()
        ),
        None => eprintln!("did not complete within {} samples", trace.samples.len()),
    }
    Ok(ExitCode::SUCCESS)
}

fn load_snapshot(args: &ExpansionArgs) -> churngraph::Result<Snapshot> {
    match (&args.traj, &args.snapshot) {
        (Some(path), None) => {
            let traj = Trajectory::read_file(path)?;
            let at = args
                .at
                .as_ref()
                .ok_or_else(|| Error::InvalidParams("--at is required with --traj".into()))?;
            let t = resolve_snapshot_time(&traj, at)?;
            snapshot_at(&traj, t)
        }
        (None, Some(path)) => {
            let f = std::fs::File::open(path)?;
            Ok(serde_json::from_reader(std::io::BufReader::new(f))?)
        }
        _ => Err(Error::InvalidParams("provide exactly one of --traj or --snapshot".into())),
    }
}

/// Rules resolve to a round (streaming) or an event index (Poisson).
fn resolve_snapshot_time(traj: &Trajectory, rule: &str) -> churngraph::Result<Time> {
    let r = Rule::parse(rule)?.eval_ceil(traj.params().n);
    if traj.params().kind.is_streaming() {
        Ok(Time::from_round(r))
    } else {
        traj.time_of_event(r as usize)
    }
}

fn expansion(args: ExpansionArgs) -> churngraph::Result<ExitCode> {
    let snap = load_snapshot(&args)?;
    let half = snap.node_count() / 2;
    let min_size = args.min_size.unwrap_or(1);
    let max_size = args.max_size.unwrap_or(half.max(1));
    let report = match args.method.as_str() {
        "exact" => h_out_exact(&snap, min_size, max_size)?,
        "sampled" => {
            let mut rng = churngraph::trial_rng(args.seed, 0);
            h_out_sampled(&snap, min_size, max_size, args.samples, &mut rng)?
        }
        other => return Err(Error::InvalidParams(format!("unknown method '{other}'"))),
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(ExitCode::SUCCESS)
}

fn do_stats(args: StatsArgs) -> churngraph::Result<ExitCode> {
    let traj = Trajectory::read_file(&args.traj)?;
    let t = resolve_snapshot_time(&traj, &args.at)?;
    let snap = snapshot_at(&traj, t)?;
    if let Some(path) = &args.dump_snapshot {
        let f = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(f), &snap)?;
    }
    #[derive(serde::Serialize)]
    struct StatsOut {
        v: &'static str,
        time: f64,
        nodes: usize,
        edges: usize,
        isolated: usize,
        degrees: churngraph::metrics::DegreeStats,
    }
    let out = StatsOut {
        v: "v1",
        time: t.value(),
        nodes: snap.node_count(),
        edges: snap.edge_count(),
        isolated: isolated_count(&snap),
        degrees: degree_stats(&snap),
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(ExitCode::SUCCESS)
}

fn oracle(args: OracleArgs) -> churngraph::Result<ExitCode> {
    match args.check.as_str() {
        "edge-prob-sdgr" => {
            let (n, d, k) = (req(args.n, "--n")?, req(args.d, "--d")?, req(args.k, "--k")?);
            let formula = edge_prob_streaming_regen(n, k)?;
            let est = edge_prob_empirical(ModelKind::Sdgr, n, d, k, args.trials, args.seed)?;
            let z = stats::z_score(est.hits, est.samples, formula.older);
            let pass = z.abs() < 3.0;
            print_json(&serde_json::json!({
                "v": "v1", "check": "edge-prob-sdgr", "n": n, "d": d, "k": k,
                "formula": formula.older, "frequency": est.frequency,
                "samples": est.samples, "z": z, "pass": pass,
            }))?;
            Ok(status(pass))
        }
        "edge-prob-pdgr" => {
            let (n, d) = (req(args.n, "--n")?, req(args.d, "--d")?);
            let buckets = edge_prob_pdgr_buckets(n, d, 40, 2 * n, args.seed)?;
            let pass = buckets.iter().all(|b| b.frequency <= b.bound);
            print_json(&serde_json::json!({
                "v": "v1", "check": "edge-prob-pdgr", "n": n, "d": d,
                "buckets": buckets, "pass": pass,
            }))?;
            Ok(status(pass))
        }
        "jump-chain" => {
            let lambda = args.lambda.unwrap_or(1.0);
            let mu = match (args.mu, args.n) {
                (Some(mu), _) => mu,
                (None, Some(n)) => 1.0 / n as f64,
                _ => return Err(Error::InvalidParams("need --mu or --n".into())),
            };
            let params = PoissonChurnParams::new(lambda, mu)?;
            let pinned: Vec<usize> = args
                .pinned
                .split(',')
                .map(|s| s.trim().parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::InvalidParams("bad --pinned list".into()))?;
            let mut reports = Vec::new();
            let mut all_pass = true;
            for (i, &pin) in pinned.iter().enumerate() {
                let mut rng = churngraph::trial_rng(args.seed, i as u64);
                let mut births = 0u64;
                let mut dts = Vec::with_capacity(args.trials as usize);
                for _ in 0..args.trials {
                    let (dt, kind) = churn::poisson_next_event(pin, params, &mut rng);
                    dts.push(dt);
                    if matches!(kind, churn::NextEvent::Birth) {
                        births += 1;
                    }
                }
                let rate = pin as f64 * mu + lambda;
                let p = lambda / rate;
                let z = stats::z_score(births, args.trials, p);
                let (ks_d, ks_crit, ks_pass) = stats::ks_exponential_001(&dts, rate);
                let pass = z.abs() < 3.0 && ks_pass;
                all_pass &= pass;
                reports.push(serde_json::json!({
                    "pinned_n": pin, "expected_birth_prob": p,
                    "birth_frequency": births as f64 / args.trials as f64,
                    "z": z, "ks_d": ks_d, "ks_crit": ks_crit, "pass": pass,
                }));
            }
            print_json(&serde_json::json!({
                "v": "v1", "check": "jump-chain", "lambda": lambda, "mu": mu,
                "draws_per_pin": args.trials, "pins": reports, "pass": all_pass,
            }))?;
            Ok(status(all_pass))
        }
        "concentration" => {
            let n = req(args.n, "--n")?;
            let trials = if args.trials == 1_000_000 { 200 } else { args.trials };
            let params = PoissonChurnParams::canonical(n)?;
            let r_max = (20.0 * n as f64 * (n as f64).ln()).ceil() as u64;
            let mut ok = 0u64;
            for trial in 0..trials {
                let mut rng = churngraph::trial_rng(args.seed, trial);
                let events = churn::poisson_events(params, r_max, &mut rng);
                let mut alive = 0i64;
                for e in &events {
                    match e.kind {
                        churn::ChurnKind::Birth(_) => alive += 1,
                        churn::ChurnKind::Death(_) => alive -= 1,
                    }
                }
                let lo = (0.9 * n as f64) as i64;
                let hi = (1.1 * n as f64).ceil() as i64;
                if alive >= lo && alive <= hi {
                    ok += 1;
                }
            }
            let need = ((trials as f64) * 0.99).floor() as u64;
            let pass = ok >= need;
            print_json(&serde_json::json!({
                "v": "v1", "check": "concentration", "n": n, "trials": trials,
                "events_per_trial": r_max, "in_band": ok, "required": need, "pass": pass,
            }))?;
            Ok(status(pass))
        }
        other => Err(Error::InvalidParams(format!("unknown check '{other}'"))),
    }
}

fn req<T>(v: Option<T>, flag: &str) -> churngraph::Result<T> {
    v.ok_or_else(|| Error::InvalidParams(format!("{flag} is required for this check")))
}

fn print_json(v: &serde_json::Value) -> churngraph::Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn status(pass: bool) -> ExitCode {
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn experiment(args: ExperimentArgs) -> churngraph::Result<ExitCode> {
    let configs: Vec<ExperimentConfig> = match (&args.config, &args.predefined) {
        (Some(path), None) => {
            let f = std::fs::File::open(path)?;
            vec![ExperimentConfig::from_json_reader(std::io::BufReader::new(f))?]
        }
        (None, Some(name)) => predefined(name, args.seed)?,
        _ => {
            return Err(Error::InvalidParams(
                "provide exactly one of --config or --predefined".into(),
            ))
        }
    };
    let threads = if args.threads == 0 {
        std::thread::available_parallelism().map(|p| p.get()).unwrap_or(1)
    } else {
        args.threads
    };
    for config in configs {
        let run = run_experiment(&config, threads)?;
        let summary = aggregate(&run.metric_names, &run.records, &config.name)?;
        let prefix: PathBuf = match (&config.out, &args.out) {
            (Some(out), _) => PathBuf::from(out),
            (None, Some(out)) => {
                let mut p = out.clone();
                p.set_file_name(format!(
                    "{}-{}",
                    out.file_name().and_then(|s| s.to_str()).unwrap_or("exp"),
                    config.name
                ));
                p
            }
            (None, None) => PathBuf::from(&config.name),
        };
        let csv_path = prefix.with_extension("csv");
        let json_path = prefix.with_extension("summary.json");
        let f = std::fs::File::create(&csv_path)?;
        write_records_csv(std::io::BufWriter::new(f), &run)?;
        let mut jf = std::fs::File::create(&json_path)?;
        writeln!(jf, "{}", serde_json::to_string_pretty(&summary)?)?;
        eprintln!("{}: wrote {} and {}", config.name, csv_path.display(), json_path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn replay(args: ReplayArgs) -> churngraph::Result<ExitCode> {
    let traj = Trajectory::read_file(&args.traj)?;
    if args.assert_invariants {
        match replay_check(&traj) {
            Ok(report) => {
                print_json(&serde_json::json!({
                    "v": "v1", "ok": true, "events": report.events,
                    "groups": report.groups, "final_nodes": report.final_nodes,
                    "final_edges": report.final_edges,
                }))?;
                Ok(ExitCode::SUCCESS)
            }
            Err(e) => {
                print_json(&serde_json::json!({ "v": "v1", "ok": false, "error": e.to_string() }))?;
                Ok(ExitCode::from(2))
            }
        }
    } else {
        let snap = snapshot_at(&traj, traj.last_time())?;
        print_json(&serde_json::json!({
            "v": "v1", "events": traj.len(), "final_nodes": snap.node_count(),
            "final_edges": snap.edge_count(),
        }))?;
        Ok(ExitCode::SUCCESS)
    }
}
