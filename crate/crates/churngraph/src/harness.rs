//! Multi-trial experiment orchestration: seeded trajectory generation,
//! per-trial metric evaluation, deterministic parallel execution, CSV/JSON
//! output, and aggregation.
//!
//! Time-like quantities in configs are *rules* evaluated against the model
//! size n, e.g. `"2n"`, `"7nlogn"`, `"10logn"`, `"2n+120"`, or a plain
//! number; log is the natural logarithm and results round up. For streaming
//! models the start rule resolves to a round; for Poisson models it resolves
//! to an event index (matching the theorems' hypotheses), and the flooding
//! clock then runs in continuous time units.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::engine::run_model;
use crate::flooding::{flood, FloodOptions, FloodVariant};
use crate::metrics;
use crate::model::{snapshot_at, Event, ModelKind, ModelParams, NodeId, Time, Trajectory};
use crate::stats;
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Rules
// ---------------------------------------------------------------------------

/// A sum of terms `coef * n^a * (ln n)^b` with (a, b) in {0,1}^2.
#[derive(Clone, Debug, PartialEq)]
pub struct Rule {
    terms: Vec<(f64, bool, bool)>, // (coef, times n, times ln n)
    source: String,
}

impl Rule {
    pub fn parse(s: &str) -> Result<Rule> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(Error::BadRule(s.into()));
        }
        let mut terms = Vec::new();
        for part in compact.split('+') {
            let lower = part.to_ascii_lowercase();
            let (suffix, with_n, with_log) = if lower.ends_with("nlogn") || lower.ends_with("nlnn")
            {
                (if lower.ends_with("nlogn") { "nlogn" } else { "nlnn" }, true, true)
            } else if lower.ends_with("logn") || lower.ends_with("lnn") {
                (if lower.ends_with("logn") { "logn" } else { "lnn" }, false, true)
            } else if lower.ends_with('n') {
                ("n", true, false)
            } else {
                ("", false, false)
            };
            let coef_str = &lower[..lower.len() - suffix.len()];
            let coef = if coef_str.is_empty() {
                if suffix.is_empty() {
                    return Err(Error::BadRule(s.into()));
                }
                1.0
            } else {
                coef_str.parse::<f64>().map_err(|_| Error::BadRule(s.into()))?
            };
            if !coef.is_finite() || coef < 0.0 {
                return Err(Error::BadRule(s.into()));
            }
            terms.push((coef, with_n, with_log));
        }
        Ok(Rule { terms, source: s.to_string() })
    }

    pub fn eval(&self, n: u64) -> f64 {
        let n = n as f64;
        self.terms
            .iter()
            .map(|&(c, with_n, with_log)| {
                c * if with_n { n } else { 1.0 } * if with_log { n.ln() } else { 1.0 }
            })
            .sum()
    }

    pub fn eval_ceil(&self, n: u64) -> u64 {
        self.eval(n).ceil() as u64
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

/// One metric to evaluate per trial. Flooding metrics start at the config's
/// t0 from the node born there; snapshot metrics evaluate on the snapshot at
/// t0.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "metric", rename_all = "kebab-case")]
pub enum MetricSpec {
    /// Completion offset of a flooding run; null when it does not complete
    /// within `cap` grid steps (or the log end without a cap).
    FloodingTime {
        variant: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cap: Option<String>,
    },
    /// |I|/|N| at offset `at` from t0.
    InformedFraction { variant: String, at: String },
    /// 1.0 when the informed set never exceeds d+1 nodes and the run does not
    /// complete within `cap` steps.
    #[serde(rename = "stall")]
    Stall { variant: String, cap: String },
    IsolatedCount,
    IsolatedFraction,
    DegreeMean,
    DegreeMax,
    /// Sampled expansion over subset sizes [min_size, max_size] (rules).
    HOutSampled { min_size: String, max_size: String, samples: u64 },
}

impl MetricSpec {
    pub fn name(&self) -> String {
        match self {
            MetricSpec::FloodingTime { variant, .. } => format!("flooding_time_{variant}"),
            MetricSpec::InformedFraction { variant, at } => {
                format!("informed_fraction_{variant}_at_{}", sanitize(at))
            }
            MetricSpec::Stall { variant, .. } => format!("stall_{variant}"),
            MetricSpec::IsolatedCount => "isolated_count".into(),
            MetricSpec::IsolatedFraction => "isolated_fraction".into(),
            MetricSpec::DegreeMean => "degree_mean".into(),
            MetricSpec::DegreeMax => "degree_max".into(),
            MetricSpec::HOutSampled { .. } => "h_out_sampled".into(),
        }
    }
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}

fn default_v() -> String {
    "v1".into()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_v")]
    pub v: String,
    pub name: String,
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    pub d: u32,
    /// Start rule: round (streaming) or event index (Poisson).
    pub t0: String,
    /// Horizon rule: rounds (streaming) or events (Poisson).
    pub horizon: String,
    pub trials: u64,
    pub base_seed: u64,
    pub metrics: Vec<MetricSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

impl ExperimentConfig {
    pub fn from_json_reader<R: std::io::Read>(r: R) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = serde_json::from_reader(r)?;
        cfg.validated()
    }

    pub fn validated(self) -> Result<ExperimentConfig> {
        if self.v != "v1" {
            return Err(Error::Config(format!("unsupported config version '{}'", self.v)));
        }
        if self.trials < 1 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.metrics.is_empty() {
            return Err(Error::Config("no metrics configured".into()));
        }
        self.params()?;
        Rule::parse(&self.t0)?;
        Rule::parse(&self.horizon)?;
        for m in &self.metrics {
            match m {
                MetricSpec::FloodingTime { variant, cap } => {
                    FloodVariant::parse(variant)?;
                    if let Some(cap) = cap {
                        Rule::parse(cap)?;
                    }
                }
                MetricSpec::InformedFraction { variant, at } => {
                    FloodVariant::parse(variant)?;
                    Rule::parse(at)?;
                }
                MetricSpec::Stall { variant, cap } => {
                    FloodVariant::parse(variant)?;
                    Rule::parse(cap)?;
                }
                MetricSpec::HOutSampled { min_size, max_size, samples } => {
                    Rule::parse(min_size)?;
                    Rule::parse(max_size)?;
                    if *samples < 1 {
                        return Err(Error::Config("samples must be >= 1".into()));
                    }
                }
                _ => {}
            }
        }
        Ok(self)
    }

    pub fn params(&self) -> Result<ModelParams> {
        let kind = ModelKind::parse(&self.model)?;
        match (kind.is_streaming(), self.n, self.lambda, self.mu) {
            (true, Some(n), None, None) => ModelParams::streaming(kind, n, self.d),
            (false, Some(n), None, None) => ModelParams::poisson(kind, n, self.d),
            (false, _, Some(lambda), Some(mu)) => {
                ModelParams::poisson_rates(kind, lambda, mu, self.d)
            }
            _ => Err(Error::Config(
                "specify n (streaming or canonical Poisson) or lambda+mu (Poisson)".into(),
            )),
        }
    }
}

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub trial: u64,
    pub seed: u64,
    /// One slot per configured metric; null carries a reason.
    pub values: Vec<std::result::Result<f64, String>>,
}

/// Records plus the metric column names.
#[derive(Clone, Debug)]
pub struct ExperimentRun {
    pub config: ExperimentConfig,
    pub metric_names: Vec<String>,
    pub records: Vec<TrialRecord>,
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

/// First birth at or after the given event index; the flooding source "born
/// at t0".
fn source_at(traj: &Trajectory, event_index: usize) -> Result<(Time, NodeId)> {
    for ev in &traj.events()[event_index.min(traj.len())..] {
        if let Event::Birth { id, .. } = ev.event {
            return Ok((ev.time, id));
        }
    }
    Err(Error::HorizonTooShort("no birth at or after t0".into()))
}

fn eval_trial(
    config: &ExperimentConfig,
    params: ModelParams,
    trial: u64,
) -> Result<TrialRecord> {
    let seed = config.base_seed ^ trial;
    let horizon = Rule::parse(&config.horizon)?.eval_ceil(params.n);
    let traj = run_model(params, horizon, seed)?;
    let t0_rule = Rule::parse(&config.t0)?.eval_ceil(params.n);
    let streaming = params.kind.is_streaming();

    // resolve the start instant and default flooding source
    let start: Result<(Time, NodeId)> = if streaming {
        if t0_rule > horizon {
            Err(Error::HorizonTooShort(format!("t0 {t0_rule} beyond horizon {horizon}")))
        } else {
            Ok((Time::from_round(t0_rule), NodeId(t0_rule)))
        }
    } else if (t0_rule as usize) < traj.len() {
        source_at(&traj, t0_rule as usize)
    } else {
        Err(Error::HorizonTooShort(format!("t0 event {t0_rule} beyond {} events", traj.len())))
    };

    let mut values = Vec::with_capacity(config.metrics.len());
    let mut flood_cache: BTreeMap<(String, u64, bool), crate::flooding::FloodTrace> =
        BTreeMap::new();
    let mut snap_cache: Option<crate::model::Snapshot> = None;

    for spec in &config.metrics {
        let value = eval_metric(spec, &traj, params, &start, &mut flood_cache, &mut snap_cache);
        values.push(value.map_err(|e| e.to_string()));
    }
    Ok(TrialRecord { trial, seed, values })
}

fn eval_metric(
    spec: &MetricSpec,
    traj: &Trajectory,
    params: ModelParams,
    start: &Result<(Time, NodeId)>,
    flood_cache: &mut BTreeMap<(String, u64, bool), crate::flooding::FloodTrace>,
    snap_cache: &mut Option<crate::model::Snapshot>,
) -> Result<f64> {
    let start = match start {
        Ok(s) => *s,
        Err(e) => return Err(Error::HorizonTooShort(e.to_string())),
    };
    let (t0, source) = start;
    let n = params.n;
    let mut run_flood = |variant: &str,
                         cap: Option<u64>,
                         stop_at_completion: bool|
     -> Result<crate::flooding::FloodTrace> {
        let key = (variant.to_string(), cap.unwrap_or(u64::MAX), stop_at_completion);
        if let Some(trace) = flood_cache.get(&key) {
            return Ok(trace.clone());
        }
        let v = FloodVariant::parse(variant)?;
        let opts = FloodOptions { max_steps: cap, keep_sets: false, stop_at_completion };
        let trace = flood(traj, v, t0, source, opts)?;
        flood_cache.insert(key, trace.clone());
        Ok(trace)
    };
    match spec {
        MetricSpec::FloodingTime { variant, cap } => {
            let cap = cap.as_ref().map(|c| Rule::parse(c)).transpose()?.map(|r| r.eval_ceil(n));
            let trace = run_flood(variant, cap, true)?;
            trace
                .completion_offset()
                .ok_or_else(|| Error::Config("not-completed".into()))
        }
        MetricSpec::InformedFraction { variant, at } => {
            let off = Rule::parse(at)?.eval_ceil(n);
            let trace = run_flood(variant, Some(off), false)?;
            let t = Time::new(t0.value() + off as f64);
            crate::flooding::informed_fraction(&trace, t)
        }
        MetricSpec::Stall { variant, cap } => {
            let cap = Rule::parse(cap)?.eval_ceil(n);
            let trace = run_flood(variant, Some(cap), true)?;
            let stalled = trace.completed_at.is_none()
                && trace.max_informed() <= (params.d + 1) as u64;
            Ok(f64::from(u8::from(stalled)))
        }
        MetricSpec::IsolatedCount | MetricSpec::IsolatedFraction => {
            let snap = cached_snapshot(traj, t0, snap_cache)?;
            let count = metrics::isolated_count(snap) as f64;
            if matches!(spec, MetricSpec::IsolatedCount) {
                Ok(count)
            } else {
                Ok(count / snap.node_count().max(1) as f64)
            }
        }
        MetricSpec::DegreeMean => {
            Ok(metrics::degree_stats(cached_snapshot(traj, t0, snap_cache)?).mean)
        }
        MetricSpec::DegreeMax => {
            Ok(metrics::degree_stats(cached_snapshot(traj, t0, snap_cache)?).max as f64)
        }
        MetricSpec::HOutSampled { min_size, max_size, samples } => {
            let snap = cached_snapshot(traj, t0, snap_cache)?;
            let lo = Rule::parse(min_size)?.eval_ceil(n).max(1) as usize;
            let hi = (Rule::parse(max_size)?.eval(n).floor() as usize)
                .min(snap.node_count() / 2);
            // metric evaluation draws from a stream independent of the
            // trajectory generator but fixed by the trial seed
            let mut rng = crate::trial_rng(traj.seed(), u64::MAX);
            Ok(metrics::h_out_sampled(snap, lo, hi, *samples, &mut rng)?.h_out)
        }
    }
}

fn cached_snapshot<'a>(
    traj: &Trajectory,
    t0: Time,
    cache: &'a mut Option<crate::model::Snapshot>,
) -> Result<&'a crate::model::Snapshot> {
    if cache.is_none() {
        *cache = Some(snapshot_at(traj, t0)?);
    }
    Ok(cache.as_ref().unwrap())
}

/// Run all trials. Trials are independent (seed_i = base_seed XOR i) and the
/// record order is by trial index, so the output is identical for any worker
/// count.
pub fn run_experiment(config: &ExperimentConfig, threads: usize) -> Result<ExperimentRun> {
    let config = config.clone().validated()?;
    let params = config.params()?;
    let metric_names = config.metrics.iter().map(|m| m.name()).collect();
    let trials = config.trials;
    let threads = threads.max(1).min(trials.max(1) as usize);
    let next = AtomicU64::new(0);
    let results: Mutex<Vec<Option<Result<TrialRecord>>>> =
        Mutex::new((0..trials).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let trial = next.fetch_add(1, Ordering::Relaxed);
                if trial >= trials {
                    break;
                }
                let rec = eval_trial(&config, params, trial);
                results.lock().unwrap()[trial as usize] = Some(rec);
            });
        }
    });
    let mut records = Vec::with_capacity(trials as usize);
    for slot in results.into_inner().unwrap() {
        records.push(slot.expect("trial executed")?);
    }
    Ok(ExperimentRun { config, metric_names, records })
}

// ---------------------------------------------------------------------------
// Output and aggregation
// ---------------------------------------------------------------------------

/// Records CSV: trial, seed, then one column per metric (empty cell = null).
pub fn write_records_csv<W: Write>(mut w: W, run: &ExperimentRun) -> Result<()> {
    writeln!(w, "# churngraph records v1")?;
    writeln!(w, "trial,seed,{}", run.metric_names.join(","))?;
    for rec in &run.records {
        write!(w, "{},{}", rec.trial, rec.seed)?;
        for v in &rec.values {
            match v {
                Ok(x) => write!(w, ",{x}")?,
                Err(_) => write!(w, ",")?,
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Reload records written by [`write_records_csv`]. Null reasons are not
/// stored in the CSV; they come back as generic nulls.
pub fn read_records_csv<R: BufRead>(r: R) -> Result<(Vec<String>, Vec<TrialRecord>)> {
    let mut names = Vec::new();
    let mut records = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if names.is_empty() {
            if cells.len() < 2 || cells[0] != "trial" {
                return Err(Error::Config("bad records header".into()));
            }
            names = cells[2..].iter().map(|s| s.to_string()).collect();
            continue;
        }
        let parse_u64 = |s: &str| {
            s.parse::<u64>().map_err(|_| Error::Config(format!("bad integer '{s}'")))
        };
        let trial = parse_u64(cells[0])?;
        let seed = parse_u64(cells[1])?;
        let values = cells[2..]
            .iter()
            .map(|s| {
                if s.is_empty() {
                    Err("null".to_string())
                } else {
                    s.parse::<f64>().map_err(|e| e.to_string())
                }
            })
            .collect();
        records.push(TrialRecord { trial, seed, values });
    }
    if names.is_empty() {
        return Err(Error::Config("empty records file".into()));
    }
    Ok((names, records))
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct MetricSummary {
    pub count: u64,
    pub nulls: u64,
    /// Fraction of trials with a value; the completion rate for flooding-time
    /// metrics.
    pub value_rate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub median: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q05: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q95: Option<f64>,
    /// Set when quantiles cover only the trials with a value.
    pub completers_only: bool,
    /// Wilson 99% interval, present when every value is 0 or 1.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wilson99: Option<(f64, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub v: String,
    pub name: String,
    pub trials: u64,
    pub metrics: BTreeMap<String, MetricSummary>,
    /// metric -> reason -> count for null values
    pub null_reasons: BTreeMap<String, BTreeMap<String, u64>>,
}

pub fn aggregate(names: &[String], records: &[TrialRecord], name: &str) -> Result<Summary> {
    if records.is_empty() {
        return Err(Error::Config("cannot aggregate zero records".into()));
    }
    let mut metrics = BTreeMap::new();
    let mut null_reasons: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();
    for (mi, metric) in names.iter().enumerate() {
        let mut vals: Vec<f64> = Vec::new();
        let mut nulls = 0u64;
        for rec in records {
            match &rec.values[mi] {
                Ok(x) => vals.push(*x),
                Err(reason) => {
                    nulls += 1;
                    *null_reasons
                        .entry(metric.clone())
                        .or_default()
                        .entry(reason.clone())
                        .or_insert(0) += 1;
                }
            }
        }
        vals.sort_by(|a, b| a.total_cmp(b));
        let count = vals.len() as u64;
        let boolish = !vals.is_empty() && vals.iter().all(|&x| x == 0.0 || x == 1.0);
        let summary = MetricSummary {
            count,
            nulls,
            value_rate: count as f64 / records.len() as f64,
            mean: (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / count as f64),
            median: (!vals.is_empty()).then(|| stats::median(&vals)),
            q05: (!vals.is_empty()).then(|| stats::quantile(&vals, 0.05)),
            q95: (!vals.is_empty()).then(|| stats::quantile(&vals, 0.95)),
            completers_only: nulls > 0,
            wilson99: boolish
                .then(|| stats::wilson_99(vals.iter().filter(|&&x| x == 1.0).count() as u64, count)),
        };
        metrics.insert(metric.clone(), summary);
    }
    Ok(Summary {
        v: "v1".into(),
        name: name.to_string(),
        trials: records.len() as u64,
        metrics,
        null_reasons,
    })
}

// ---------------------------------------------------------------------------
// Predefined experiments
// ---------------------------------------------------------------------------

/// Named experiment suites used by the acceptance checks and the CLI.
pub fn predefined(name: &str, base_seed: u64) -> Result<Vec<ExperimentConfig>> {
    match name {
        "sdgr-floodtime-scaling" => Ok([256u64, 1024, 4096]
            .iter()
            .map(|&n| ExperimentConfig {
                v: "v1".into(),
                name: format!("sdgr-floodtime-{n}"),
                model: "sdgr".into(),
                n: Some(n),
                lambda: None,
                mu: None,
                d: 21,
                t0: "2n".into(),
                horizon: "2n+150".into(),
                trials: 100,
                base_seed,
                metrics: vec![MetricSpec::FloodingTime { variant: "sync".into(), cap: None }],
                out: None,
            })
            .collect()),
        "pdgr-floodtime" => Ok([250u64, 1000]
            .iter()
            .map(|&n| ExperimentConfig {
                v: "v1".into(),
                name: format!("pdgr-floodtime-{n}"),
                model: "pdgr".into(),
                n: Some(n),
                lambda: None,
                mu: None,
                d: 35,
                t0: "7nlogn".into(),
                horizon: "7nlogn+300logn".into(),
                trials: 100,
                base_seed,
                metrics: vec![MetricSpec::FloodingTime {
                    variant: "discretized".into(),
                    cap: Some("50logn".into()),
                }],
                out: None,
            })
            .collect()),
        other => Err(Error::Config(format!("unknown predefined experiment '{other}'"))),
    }
}

/// Completion-time scaling across sizes: medians, completion rates, affine
/// fit in ln n, worst relative residual, and the last/first median ratio.
#[derive(Clone, Debug, Serialize)]
pub struct ScalingReport {
    pub v: String,
    pub ns: Vec<u64>,
    pub completion_rates: Vec<f64>,
    pub medians: Vec<f64>,
    pub fit_intercept: f64,
    pub fit_slope: f64,
    pub max_residual_frac: f64,
    pub ratio_last_first: f64,
}

pub fn floodtime_scaling_report(runs: &[(u64, &ExperimentRun)]) -> Result<ScalingReport> {
    if runs.len() < 2 {
        return Err(Error::Config("scaling report needs >= 2 sizes".into()));
    }
    let mut ns = Vec::new();
    let mut medians = Vec::new();
    let mut rates = Vec::new();
    for (n, run) in runs {
        let summary = aggregate(&run.metric_names, &run.records, &run.config.name)?;
        let m = summary
            .metrics
            .values()
            .next()
            .ok_or_else(|| Error::Config("no metrics in run".into()))?;
        ns.push(*n);
        rates.push(m.value_rate);
        medians.push(m.median.ok_or_else(|| Error::Config("no completions".into()))?);
    }
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let (a, b) = stats::linear_fit(&xs, &medians);
    let max_residual_frac = xs
        .iter()
        .zip(&medians)
        .map(|(&x, &m)| ((a + b * x) - m).abs() / m)
        .fold(0.0f64, f64::max);
    Ok(ScalingReport {
        v: "v1".into(),
        ns,
        completion_rates: rates,
        medians: medians.clone(),
        fit_intercept: a,
        fit_slope: b,
        max_residual_frac,
        ratio_last_first: medians.last().unwrap() / medians.first().unwrap(),
    })
}
