//! Acceptance suite: one test per numbered criterion, each printing a
//! pass/fail line. Thresholds and tolerances are pinned in the constants
//! below. Statistical checks run on fixed seeds, so every run is
//! deterministic; z-scores use |z| < 3 and KS tests run at alpha = 0.01.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::collections::BTreeSet;
use std::process::Command;

use churngraph::churn::{self, PoissonChurnParams};
use churngraph::engine::{run_model, static_dout_graph};
use churngraph::flooding::{flood_discretized, flood_sync, FloodOptions};
use churngraph::harness::{
    aggregate, floodtime_scaling_report, predefined, run_experiment, Rule,
};
use churngraph::metrics::{
    edge_prob_empirical, edge_prob_empirical_multi, edge_prob_streaming_regen, h_out_exact,
    h_out_sampled, isolated_count, isolated_forever,
};
use churngraph::model::{snapshot_at, Event, ModelKind, ModelParams, NodeId, Time, Trajectory};
use churngraph::onionskin::onion_skin_run;
use churngraph::{stats, trial_rng, Error};

fn pass(id: u32, name: &str, detail: String) {
    println!("ACCEPTANCE {id:02} {name}: PASS — {detail}");
}

macro_rules! require {
    ($id:expr, $name:expr, $cond:expr, $($arg:tt)+) => {
        assert!($cond, "ACCEPTANCE {:02} {}: FAIL — {}", $id, $name, format!($($arg)+));
    };
}

fn streaming(kind: ModelKind, n: u64, d: u32) -> ModelParams {
    ModelParams::streaming(kind, n, d).unwrap()
}

fn poisson(kind: ModelKind, n: u64, d: u32) -> ModelParams {
    ModelParams::poisson(kind, n, d).unwrap()
}

/// 1. Request-destination probability under streaming regeneration:
///    Monte-Carlo frequency over >= 10^6 request histories matches
///    (1/(n-1))(1+1/(n-1))^k with |z| < 3, for k in {0, 10, 25, 48}.
///
///    The k = 49 point of the nominal grid is unobservable: ages run 1..=n,
///    so an age-50 requester (k = 49 at n = 50) coexists with no strictly
///    older node. The largest measurable age gap is k = n-2 = 48, checked
///    here, and the suite asserts that the oracle reports the k = 49
///    boundary as infeasible rather than fabricating samples.
#[test]
fn acceptance_01_edge_probability_formula() {
    const ID: u32 = 1;
    const NAME: &str = "edge-probability formula (sdgr)";
    let (n, d) = (50u64, 3u32);
    let ks = [0u64, 10, 25, 48];
    let ests = edge_prob_empirical_multi(ModelKind::Sdgr, n, d, &ks, 1_000_000, 2024).unwrap();
    let mut zs = Vec::new();
    for est in &ests {
        let formula = edge_prob_streaming_regen(n, est.k).unwrap().older;
        let z = stats::z_score(est.hits, est.samples, formula);
        require!(
            ID,
            NAME,
            z.abs() < 3.0,
            "k = {}: z = {z:.2} (freq {:.6} vs formula {formula:.6}, {} samples)",
            est.k,
            est.frequency,
            est.samples
        );
        zs.push(format!("k={}: z={z:+.2}", est.k));
    }
    let boundary = edge_prob_empirical(ModelKind::Sdgr, n, d, 49, 1_000, 0);
    require!(
        ID,
        NAME,
        matches!(boundary, Err(Error::InfeasibleAge(_))),
        "k = 49 must be reported infeasible (no strictly older node exists)"
    );
    pass(ID, NAME, format!("{}; k=49 correctly infeasible", zs.join(", ")));
}

/// 2. Jump-chain law: at pinned N in {900, 1000, 1100} with lambda = 1,
///    mu = 1/1000, birth frequency matches lambda/(N mu + lambda) with
///    |z| < 3 over 10^6 draws, and inter-event times pass a KS test against
///    Exponential(N mu + lambda) at alpha = 0.01.
#[test]
fn acceptance_02_jump_chain_law() {
    const ID: u32 = 2;
    const NAME: &str = "jump-chain law";
    let params = PoissonChurnParams::new(1.0, 1e-3).unwrap();
    let draws = 1_000_000u64;
    let mut details = Vec::new();
    for (i, &pin) in [900usize, 1000, 1100].iter().enumerate() {
        let mut rng = trial_rng(40, i as u64);
        let mut births = 0u64;
        let mut dts = Vec::with_capacity(draws as usize);
        for _ in 0..draws {
            let (dt, kind) = churn::poisson_next_event(pin, params, &mut rng);
            dts.push(dt);
            if matches!(kind, churn::NextEvent::Birth) {
                births += 1;
            }
        }
        let rate = pin as f64 * params.mu + params.lambda;
        let p = params.lambda / rate;
        let z = stats::z_score(births, draws, p);
        require!(ID, NAME, z.abs() < 3.0, "N = {pin}: birth-frequency z = {z:.2}");
        let (ks_d, ks_crit, ks_pass) = stats::ks_exponential_001(&dts, rate);
        require!(ID, NAME, ks_pass, "N = {pin}: KS D = {ks_d:.5} >= {ks_crit:.5}");
        details.push(format!("N={pin}: z={z:+.2}, KS D*sqrt(m)={:.2}", ks_d * (draws as f64).sqrt()));
    }
    pass(ID, NAME, details.join("; "));
}

/// 3. Population concentration: n = 1000, 200 trials, measured at event
///    index ceil(20 n ln n): |N| in [0.9n, 1.1n] in at least 198 trials.
#[test]
fn acceptance_03_population_concentration() {
    const ID: u32 = 3;
    const NAME: &str = "population concentration";
    let n = 1000u64;
    let trials = 200u64;
    let params = PoissonChurnParams::canonical(n).unwrap();
    let r_max = (20.0 * n as f64 * (n as f64).ln()).ceil() as u64;
    let (lo, hi) = ((0.9 * n as f64) as i64, (1.1 * n as f64).ceil() as i64);
    let mut ok = 0u64;
    for trial in 0..trials {
        let mut rng = trial_rng(7, trial);
        let mut alive = 0i64;
        for ev in churn::poisson_events(params, r_max, &mut rng) {
            match ev.kind {
                churn::ChurnKind::Birth(_) => alive += 1,
                churn::ChurnKind::Death(_) => alive -= 1,
            }
        }
        if (lo..=hi).contains(&alive) {
            ok += 1;
        }
    }
    require!(ID, NAME, ok >= 198, "in band in only {ok}/{trials} trials");
    pass(ID, NAME, format!("|N| in [0.9n, 1.1n] in {ok}/{trials} trials at event {r_max}"));
}

/// 4. Isolated nodes without regeneration. SDG at t = 2n: isolated fraction
///    >= (1/6) e^(-2d) in >= 95/100 trials, and the nodes isolated at t that
///    never regain an edge clear the same floor. PDG at event index
///    ceil(7 n ln n): isolated fraction >= (1/18) e^(-2d) in >= 95/100.
#[test]
fn acceptance_04_isolated_nodes() {
    const ID: u32 = 4;
    const NAME: &str = "isolated nodes without regeneration";
    let n = 2000u64;
    let trials = 100u64;
    let mut details = Vec::new();

    for d in [1u32, 2] {
        let floor = (1.0 / 6.0) * (-2.0 * d as f64).exp();
        let params = streaming(ModelKind::Sdg, n, d);
        let (mut ok_now, mut ok_forever) = (0u64, 0u64);
        for trial in 0..trials {
            let traj = run_model(params, 3 * n, 1000 + trial).unwrap();
            let t = Time::from_round(2 * n);
            let snap = snapshot_at(&traj, t).unwrap();
            let frac = isolated_count(&snap) as f64 / snap.node_count() as f64;
            if frac >= floor {
                ok_now += 1;
            }
            let forever = isolated_forever(&traj, t).unwrap();
            if forever.len() as f64 / snap.node_count() as f64 >= floor {
                ok_forever += 1;
            }
        }
        require!(ID, NAME, ok_now >= 95, "sdg d={d}: isolated floor met in {ok_now}/{trials}");
        require!(
            ID,
            NAME,
            ok_forever >= 95,
            "sdg d={d}: isolated-forever floor met in {ok_forever}/{trials}"
        );
        details.push(format!("sdg d={d}: now {ok_now}/100, forever {ok_forever}/100"));
    }

    for d in [1u32, 2] {
        let floor = (1.0 / 18.0) * (-2.0 * d as f64).exp();
        let params = poisson(ModelKind::Pdg, n, d);
        let horizon = (7.0 * n as f64 * (n as f64).ln()).ceil() as u64;
        let mut ok = 0u64;
        for trial in 0..trials {
            let traj = run_model(params, horizon, 2000 + trial).unwrap();
            let snap = snapshot_at(&traj, traj.last_time()).unwrap();
            let frac = isolated_count(&snap) as f64 / snap.node_count().max(1) as f64;
            if frac >= floor {
                ok += 1;
            }
        }
        require!(ID, NAME, ok >= 95, "pdg d={d}: isolated floor met in {ok}/{trials}");
        details.push(format!("pdg d={d}: {ok}/100"));
    }
    pass(ID, NAME, details.join("; "));
}

/// 5. Expansion with regeneration: SDGR n=2000 d=14 at t = 2n and PDGR
///    n=1000 d=35 at event ceil(7 n ln n); the sampled estimator (10^4 mixed
///    subsets over sizes 1..=|N|/2) reports ratio >= 0.1 for every sampled
///    subset in every one of 50 trials.
#[test]
fn acceptance_05_expansion_with_regeneration() {
    const ID: u32 = 5;
    const NAME: &str = "expansion with regeneration";
    let trials = 50u64;
    let samples = 10_000u64;
    let mut mins = Vec::new();

    let params = streaming(ModelKind::Sdgr, 2000, 14);
    let mut worst_sdgr = f64::INFINITY;
    for trial in 0..trials {
        let traj = run_model(params, 2 * 2000, 3000 + trial).unwrap();
        let snap = snapshot_at(&traj, Time::from_round(2 * 2000)).unwrap();
        let half = snap.node_count() / 2;
        let mut rng = trial_rng(31, trial);
        let rep = h_out_sampled(&snap, 1, half, samples, &mut rng).unwrap();
        require!(
            ID,
            NAME,
            rep.h_out >= 0.1,
            "sdgr trial {trial}: sampled subset with ratio {:.4} (witness size {})",
            rep.h_out,
            rep.witness.len()
        );
        worst_sdgr = worst_sdgr.min(rep.h_out);
    }
    mins.push(format!("sdgr d=14 worst sampled ratio {worst_sdgr:.3}"));

    let params = poisson(ModelKind::Pdgr, 1000, 35);
    let horizon = (7.0 * 1000.0 * (1000.0f64).ln()).ceil() as u64;
    let mut worst_pdgr = f64::INFINITY;
    for trial in 0..trials {
        let traj = run_model(params, horizon, 4000 + trial).unwrap();
        let snap = snapshot_at(&traj, traj.last_time()).unwrap();
        let half = snap.node_count() / 2;
        let mut rng = trial_rng(37, trial);
        let rep = h_out_sampled(&snap, 1, half, samples, &mut rng).unwrap();
        require!(
            ID,
            NAME,
            rep.h_out >= 0.1,
            "pdgr trial {trial}: sampled subset with ratio {:.4}",
            rep.h_out
        );
        worst_pdgr = worst_pdgr.min(rep.h_out);
    }
    mins.push(format!("pdgr d=35 worst sampled ratio {worst_pdgr:.3}"));
    pass(ID, NAME, mins.join("; "));
}

/// Companion spot check (large-subset expansion without regeneration): SDG
/// n=1000 d=20, sampled subsets restricted to sizes [ceil(n e^-2), n/2]
/// report ratio >= 0.1 in every trial.
#[test]
fn invariant_sdg_large_subset_expansion() {
    let n = 1000u64;
    let params = streaming(ModelKind::Sdg, n, 20);
    let min_size = (n as f64 * (-2.0f64).exp()).ceil() as usize; // 136
    for trial in 0..20 {
        let traj = run_model(params, 2 * n, 5000 + trial).unwrap();
        let snap = snapshot_at(&traj, Time::from_round(2 * n)).unwrap();
        let mut rng = trial_rng(41, trial);
        let rep = h_out_sampled(&snap, min_size, snap.node_count() / 2, 2000, &mut rng).unwrap();
        assert!(
            rep.h_out >= 0.1,
            "sdg large-subset trial {trial}: ratio {:.4} below 0.1",
            rep.h_out
        );
    }
}

/// 6. Exact-expansion oracle correctness: on 100 random 12-node graphs the
///    sampled estimator with an exhaustive budget equals the exact scan, and
///    with 200 samples it never reports below the exact minimum.
#[test]
fn acceptance_06_expansion_oracle_correctness() {
    const ID: u32 = 6;
    const NAME: &str = "exact-expansion oracle";
    let mut exhaustive_equal = 0u32;
    for seed in 0..100u64 {
        let d = 1 + (seed % 3) as u32;
        let mut rng = trial_rng(500 + seed, 0);
        let snap = static_dout_graph(12, d, &mut rng).unwrap();
        let exact = h_out_exact(&snap, 1, 6).unwrap();
        let exhaustive = h_out_sampled(&snap, 1, 6, 1 << 20, &mut rng).unwrap();
        require!(
            ID,
            NAME,
            exhaustive.h_out == exact.h_out,
            "seed {seed}: exhaustive sample {} != exact {}",
            exhaustive.h_out,
            exact.h_out
        );
        exhaustive_equal += 1;
        let sampled = h_out_sampled(&snap, 1, 6, 200, &mut rng).unwrap();
        require!(
            ID,
            NAME,
            sampled.h_out >= exact.h_out,
            "seed {seed}: sampled {} below exact {}",
            sampled.h_out,
            exact.h_out
        );
    }
    pass(ID, NAME, format!("{exhaustive_equal}/100 exhaustive-equal, dominance everywhere"));
}

/// 7. Flooding-time scaling with regeneration. SDGR d=21, n in {256, 1024,
///    4096}, 100 trials each: completion rate >= 95%, medians fit
///    a + b ln n with per-point residual <= 25% of the median, and
///    median(4096)/median(256) <= 2.2. PDGR d=35, n in {250, 1000}:
///    completion rate >= 90% under discretized flooding within 50 ln n time
///    units.
#[test]
fn acceptance_07_floodtime_scaling() {
    const ID: u32 = 7;
    const NAME: &str = "flooding-time scaling";
    let configs = predefined("sdgr-floodtime-scaling", 11).unwrap();
    let mut runs = Vec::new();
    for cfg in &configs {
        let run = run_experiment(cfg, 1).unwrap();
        let summary = aggregate(&run.metric_names, &run.records, &cfg.name).unwrap();
        let m = &summary.metrics["flooding_time_sync"];
        require!(
            ID,
            NAME,
            m.value_rate >= 0.95,
            "{}: completion rate {:.2}",
            cfg.name,
            m.value_rate
        );
        runs.push((cfg.n.unwrap(), run));
    }
    let report =
        floodtime_scaling_report(&runs.iter().map(|(n, r)| (*n, r)).collect::<Vec<_>>()).unwrap();
    require!(
        ID,
        NAME,
        report.max_residual_frac <= 0.25,
        "ln-fit residual {:.3} of median exceeds 25% (medians {:?})",
        report.max_residual_frac,
        report.medians
    );
    require!(
        ID,
        NAME,
        report.ratio_last_first <= 2.2,
        "median ratio {:.2} exceeds 2.2",
        report.ratio_last_first
    );
    require!(
        ID,
        NAME,
        report.medians.windows(2).all(|w| w[0] <= w[1])
            && report.medians.last() > report.medians.first(),
        "medians not increasing: {:?}",
        report.medians
    );

    let mut pdgr_rates = Vec::new();
    for cfg in predefined("pdgr-floodtime", 11).unwrap() {
        let run = run_experiment(&cfg, 1).unwrap();
        let summary = aggregate(&run.metric_names, &run.records, &cfg.name).unwrap();
        let m = &summary.metrics["flooding_time_discretized"];
        require!(
            ID,
            NAME,
            m.value_rate >= 0.90,
            "{}: discretized completion rate {:.2}",
            cfg.name,
            m.value_rate
        );
        pdgr_rates.push(format!("{}: {:.0}%", cfg.name, m.value_rate * 100.0));
    }
    pass(
        ID,
        NAME,
        format!(
            "sdgr medians {:?} (fit {:.2} + {:.2} ln n, residual {:.1}%, ratio {:.2}); pdgr {}",
            report.medians,
            report.fit_intercept,
            report.fit_slope,
            report.max_residual_frac * 100.0,
            report.ratio_last_first,
            pdgr_rates.join(", ")
        ),
    );
}

/// 8. Flooding stall without regeneration: SDG n=1000, d in {1, 2}; the
///    empirical probability that the informed set never exceeds d+1 nodes
///    has a positive Wilson 99% lower bound, and the d=1 stall probability
///    strictly exceeds the d=2 one.
///
///    d=1 runs the nominal 10^4 trials. The d=2 stall event requires both of
///    the source's requests to land on permanently isolated nodes and the
///    source itself to stay request-free, which is a ~2e-4 event; resolving
///    a positive lower bound needs more data, so that leg runs 4 * 10^4
///    trials and the comparison is on rates.
#[test]
fn acceptance_08_flooding_stall() {
    const ID: u32 = 8;
    const NAME: &str = "flooding stall without regeneration";
    let n = 1000u64;
    let mut rates = Vec::new();
    for (d, trials) in [(1u32, 10_000u64), (2, 40_000)] {
        let params = streaming(ModelKind::Sdg, n, d);
        let mut stalls = 0u64;
        for trial in 0..trials {
            let traj = run_model(params, 3 * n, (d as u64) << 32 | trial).unwrap();
            let t0 = Time::from_round(n);
            let source = NodeId(n);
            let opts = FloodOptions {
                max_steps: Some(2 * n),
                keep_sets: false,
                stop_at_completion: true,
            };
            let trace = flood_sync(&traj, t0, source, opts).unwrap();
            if trace.completed_at.is_none() && trace.max_informed() <= (d + 1) as u64 {
                stalls += 1;
            }
        }
        let (lo, hi) = stats::wilson_99(stalls, trials);
        require!(
            ID,
            NAME,
            lo > 0.0,
            "d={d}: Wilson 99% lower bound not positive ({stalls}/{trials})"
        );
        rates.push((d, stalls, trials, lo, hi));
    }
    let rate = |i: usize| rates[i].1 as f64 / rates[i].2 as f64;
    require!(
        ID,
        NAME,
        rate(0) > rate(1),
        "stall rate d=1 ({:.5}) not greater than d=2 ({:.5})",
        rate(0),
        rate(1)
    );
    pass(
        ID,
        NAME,
        rates
            .iter()
            .map(|(d, s, t, lo, hi)| {
                format!("d={d}: {s}/{t} (Wilson99 [{lo:.5}, {hi:.5}])")
            })
            .collect::<Vec<_>>()
            .join("; "),
    );
}

/// 9. Partial flooding without regeneration: SDG n=4096 d=10, 200 trials:
///    informed fraction >= 0.8 within floor(10 ln n) rounds in >= 60% of
///    trials; the median achieved fraction is non-decreasing over
///    d in {6, 10, 14}.
#[test]
fn acceptance_09_partial_flooding() {
    const ID: u32 = 9;
    const NAME: &str = "partial flooding without regeneration";
    let n = 4096u64;
    let trials = 200u64;
    let deadline = (10.0 * (n as f64).ln()).floor() as u64; // 83 rounds
    let mut medians = Vec::new();
    let mut d10_successes = 0u64;
    for d in [6u32, 10, 14] {
        let params = streaming(ModelKind::Sdg, n, d);
        let mut fractions = Vec::new();
        for trial in 0..trials {
            let traj = run_model(params, 2 * n + deadline + 2, 7000 + trial).unwrap();
            let t0 = Time::from_round(2 * n);
            let opts = FloodOptions {
                max_steps: Some(deadline),
                keep_sets: false,
                stop_at_completion: false,
            };
            let trace = flood_sync(&traj, t0, NodeId(2 * n), opts).unwrap();
            let last = trace.samples.last().unwrap();
            let frac =
                if last.alive == 0 { 0.0 } else { last.informed as f64 / last.alive as f64 };
            if d == 10 && frac >= 0.8 {
                d10_successes += 1;
            }
            fractions.push(frac);
        }
        fractions.sort_by(|a, b| a.total_cmp(b));
        medians.push((d, stats::median(&fractions)));
    }
    require!(
        ID,
        NAME,
        d10_successes * 10 >= trials * 6,
        "d=10 reached 0.8 within {deadline} rounds in only {d10_successes}/{trials}"
    );
    require!(
        ID,
        NAME,
        medians.windows(2).all(|w| w[0].1 <= w[1].1),
        "median fractions not non-decreasing in d: {medians:?}"
    );
    pass(
        ID,
        NAME,
        format!(
            "d=10: {d10_successes}/{trials} reached 0.8 by round {deadline}; medians {}",
            medians
                .iter()
                .map(|(d, m)| format!("d={d}: {m:.3}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
    );
}

/// 10. Dominance and equivalence properties: discretized informed sets are
///     contained in asynchronous ones on 100 paired PDG runs; all three
///     variants walk BFS layers on 50 churn-free windows; onion-skin layers
///     are contained in the synchronous informed sets on 50 SDG runs.
#[test]
fn acceptance_10_dominance_and_equivalence() {
    const ID: u32 = 10;
    const NAME: &str = "dominance and equivalence";

    // discretized ⊆ async, pointwise at integer offsets
    let n = 250u64;
    let params = poisson(ModelKind::Pdg, n, 3);
    let r0 = (7.0 * n as f64 * (n as f64).ln()).ceil() as u64;
    for trial in 0..100u64 {
        let traj = run_model(params, r0 + 300, 8000 + trial).unwrap();
        let (t0, source) = traj.events()[r0 as usize..]
            .iter()
            .find_map(|ev| match ev.event {
                Event::Birth { id, .. } => Some((ev.time, id)),
                _ => None,
            })
            .expect("a birth after r0");
        let opts =
            FloodOptions { max_steps: Some(60), keep_sets: true, stop_at_completion: false };
        let disc = flood_discretized(&traj, t0, source, opts).unwrap();
        let asy = churngraph::flooding::flood_async(&traj, t0, source, opts).unwrap();
        let (ds, asets) = (disc.sets.as_ref().unwrap(), asy.sets.as_ref().unwrap());
        for (k, dset) in ds.iter().enumerate() {
            let ok = if k < asets.len() {
                dset.is_subset(&asets[k])
            } else {
                dset.is_empty()
            };
            require!(ID, NAME, ok, "trial {trial}: containment broken at offset {k}");
        }
    }

    // churn-free windows: all variants equal BFS layers
    for trial in 0..50u64 {
        let traj = run_model(streaming(ModelKind::Sdg, 100, 3), 60, 9000 + trial).unwrap();
        let t0 = Time::from_round(60);
        let source = NodeId(60);
        let opts =
            FloodOptions { max_steps: Some(70), keep_sets: true, stop_at_completion: false };
        let sync = flood_sync(&traj, t0, source, opts).unwrap();
        let asy = churngraph::flooding::flood_async(&traj, t0, source, opts).unwrap();
        let disc = flood_discretized(&traj, t0, source, opts).unwrap();
        let snap = snapshot_at(&traj, t0).unwrap();
        let layers = bfs_layers(&snap, source);
        for (k, expect) in layers.iter().enumerate() {
            for (label, trace) in [("sync", &sync), ("async", &asy), ("disc", &disc)] {
                let got = &trace.sets.as_ref().unwrap()[k];
                require!(
                    ID,
                    NAME,
                    got == expect,
                    "trial {trial} {label}: offset {k} diverges from BFS"
                );
            }
        }
    }

    // onion-skin layers inside the synchronous informed sets
    let n = 512u64;
    let params = streaming(ModelKind::Sdg, n, 20);
    for trial in 0..50u64 {
        let traj = run_model(params, 2 * n + 64, 10_000 + trial).unwrap();
        let t0 = 2 * n;
        let source = NodeId(t0);
        let layers = onion_skin_run(&traj, t0, source).unwrap();
        let steps = 2 * layers.phases() as u64 + 1;
        let opts = FloodOptions {
            max_steps: Some(steps),
            keep_sets: true,
            stop_at_completion: false,
        };
        let trace = flood_sync(&traj, Time::from_round(t0), source, opts).unwrap();
        let sets = trace.sets.as_ref().unwrap();
        for k in 0..layers.phases() {
            let (y, o) = layers.layer(k);
            let offset = (2 * k + 1).min(sets.len() - 1);
            let informed = &sets[offset];
            let t = trace.samples[offset].time;
            for id in y.iter().chain(o.iter()) {
                if traj.is_alive_at(*id, t).unwrap() {
                    require!(
                        ID,
                        NAME,
                        informed.contains(id),
                        "trial {trial}: onion phase {k} node {id} not informed at offset {offset}"
                    );
                }
            }
        }
    }
    pass(ID, NAME, "100 containment runs, 50 BFS windows, 50 onion runs clean".into());
}

fn bfs_layers(snap: &churngraph::model::Snapshot, source: NodeId) -> Vec<BTreeSet<NodeId>> {
    let s = snap.index_of(source).unwrap();
    let mut dist = vec![usize::MAX; snap.node_count()];
    dist[s] = 0;
    let mut queue = std::collections::VecDeque::from([s]);
    let mut max_d = 0;
    while let Some(u) = queue.pop_front() {
        for &v in snap.neighbors_at(u) {
            if dist[v as usize] == usize::MAX {
                dist[v as usize] = dist[u] + 1;
                max_d = max_d.max(dist[u] + 1);
                queue.push_back(v as usize);
            }
        }
    }
    (0..=max_d + 2)
        .map(|k| {
            (0..snap.node_count())
                .filter(|&i| dist[i] <= k)
                .map(|i| snap.id_at(i))
                .collect()
        })
        .collect()
}

/// 11. Static baseline: the 16-node, d=3 random out-graph has exact
///     h_out >= 0.1 in >= 198/200 seeds (and d=1 produces disconnected
///     graphs with h_out = 0 for some seeds).
#[test]
fn acceptance_11_static_baseline() {
    const ID: u32 = 11;
    const NAME: &str = "static d-out baseline";
    let mut ok = 0u64;
    for seed in 0..200u64 {
        let mut rng = trial_rng(600 + seed, 0);
        let snap = static_dout_graph(16, 3, &mut rng).unwrap();
        let rep = h_out_exact(&snap, 1, 8).unwrap();
        if rep.h_out >= 0.1 {
            ok += 1;
        }
    }
    require!(ID, NAME, ok >= 198, "expander in only {ok}/200 seeds");
    let mut zero_seen = false;
    for seed in 0..200u64 {
        let mut rng = trial_rng(900 + seed, 0);
        let snap = static_dout_graph(16, 1, &mut rng).unwrap();
        if h_out_exact(&snap, 1, 8).unwrap().h_out == 0.0 {
            zero_seen = true;
            break;
        }
    }
    require!(ID, NAME, zero_seen, "d=1 never produced a disconnected graph in 200 seeds");
    pass(ID, NAME, format!("d=3 expander in {ok}/200 seeds; d=1 disconnects occur"));
}

/// 12. Determinism: every CLI command with a fixed seed produces
///     byte-identical output across two runs, and experiment outputs are
///     identical across thread-pool sizes 1 and 8.
#[test]
fn acceptance_12_cli_determinism() {
    const ID: u32 = 12;
    const NAME: &str = "CLI determinism";
    let bin = env!("CARGO_BIN_EXE_churngraph");
    let dir = std::env::temp_dir().join(format!("churngraph-acc12-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    let run = |args: &[&str]| {
        let out = Command::new(bin).current_dir(&dir).args(args).output().unwrap();
        assert!(
            out.status.code() == Some(0),
            "ACCEPTANCE 12 {NAME}: FAIL — `{}` exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        );
        out.stdout
    };
    let read = |name: &str| std::fs::read(dir.join(name)).unwrap();

    // simulate: all four models
    for model in ["sdg", "sdgr", "pdg", "pdgr"] {
        let mut bytes = Vec::new();
        for pass_idx in 0..2 {
            let file = format!("{model}-{pass_idx}.jsonl");
            run(&[
                "simulate", "--model", model, "--n", "64", "--d", "4", "--horizon", "400",
                "--seed", "5", "--out", &file,
            ]);
            bytes.push(read(&file));
        }
        require!(ID, NAME, bytes[0] == bytes[1], "simulate {model} differs across runs");
    }

    // flood + stats + expansion stdout/file stability
    run(&[
        "simulate", "--model", "sdgr", "--n", "64", "--d", "4", "--horizon", "400", "--seed",
        "5", "--out", "base.jsonl",
    ]);
    for pass_idx in 0..2u32 {
        let file = format!("trace-{pass_idx}.csv");
        run(&["flood", "--traj", "base.jsonl", "--variant", "sync", "--t0", "2n", "--out", &file]);
    }
    require!(ID, NAME, read("trace-0.csv") == read("trace-1.csv"), "flood trace differs");

    let s1 = run(&["stats", "--traj", "base.jsonl", "--at", "2n"]);
    let s2 = run(&["stats", "--traj", "base.jsonl", "--at", "2n"]);
    require!(ID, NAME, s1 == s2, "stats output differs");

    let e1 = run(&[
        "expansion", "--traj", "base.jsonl", "--at", "2n", "--method", "sampled", "--samples",
        "500", "--seed", "3",
    ]);
    let e2 = run(&[
        "expansion", "--traj", "base.jsonl", "--at", "2n", "--method", "sampled", "--samples",
        "500", "--seed", "3",
    ]);
    require!(ID, NAME, e1 == e2, "expansion output differs");

    let o1 = run(&[
        "oracle", "--check", "edge-prob-sdgr", "--n", "30", "--d", "2", "--k", "5", "--trials",
        "60000", "--seed", "1",
    ]);
    let o2 = run(&[
        "oracle", "--check", "edge-prob-sdgr", "--n", "30", "--d", "2", "--k", "5", "--trials",
        "60000", "--seed", "1",
    ]);
    require!(ID, NAME, o1 == o2, "oracle output differs");

    // experiment across thread-pool sizes 1 and 8
    std::fs::write(
        dir.join("exp.json"),
        serde_json::json!({
            "name": "acc12",
            "model": "pdgr",
            "n": 50, "d": 5, "t0": "7nlogn", "horizon": "7nlogn+200",
            "trials": 10, "base_seed": 77,
            "metrics": [
                {"metric": "flooding-time", "variant": "discretized", "cap": "50logn"},
                {"metric": "degree-mean"},
                {"metric": "h-out-sampled", "min_size": "1", "max_size": "0.5n", "samples": 300}
            ]
        })
        .to_string(),
    )
    .unwrap();
    run(&["experiment", "--config", "exp.json", "--threads", "1", "--out", "t1"]);
    run(&["experiment", "--config", "exp.json", "--threads", "8", "--out", "t8"]);
    require!(
        ID,
        NAME,
        read("t1-acc12.csv") == read("t8-acc12.csv"),
        "experiment records differ across thread pools"
    );
    require!(
        ID,
        NAME,
        read("t1-acc12.summary.json") == read("t8-acc12.summary.json"),
        "experiment summaries differ across thread pools"
    );
    let _ = std::fs::remove_dir_all(&dir);
    pass(ID, NAME, "simulate/flood/stats/expansion/oracle/experiment byte-stable".into());
}

/// Companion: the PDGR example run used in the engine contract (10^5 events
/// at n=500, d=35) replays with zero invariant violations.
#[test]
fn invariant_pdgr_long_run_replays_clean() {
    let params = poisson(ModelKind::Pdgr, 500, 35);
    let traj = run_model(params, 100_000, 123).unwrap();
    let report = churngraph::model::replay_check(&traj).unwrap();
    assert_eq!(report.events, 100_000);
}

/// Companion: streaming-regeneration flooding example at spec scale —
/// SDGR n=1024 d=21 from t0 = 2n completes within c log2(n) rounds in at
/// least 95/100 trials (c = 3 pinned from the scaling data).
#[test]
fn invariant_sdgr_completion_within_c_log() {
    let n = 1024u64;
    let params = streaming(ModelKind::Sdgr, n, 21);
    let cap = 3.0 * (n as f64).log2();
    let mut ok = 0;
    for trial in 0..100u64 {
        let traj = run_model(params, 2 * n + 80, 11_000 + trial).unwrap();
        let trace = flood_sync(
            &traj,
            Time::from_round(2 * n),
            NodeId(2 * n),
            FloodOptions { max_steps: Some(80), ..Default::default() },
        )
        .unwrap();
        if trace.completion_offset().is_some_and(|c| c <= cap) {
            ok += 1;
        }
    }
    assert!(ok >= 95, "completed within {cap:.0} rounds in only {ok}/100 trials");
}

/// Companion: PDGR empirical request frequencies stay under the closed-form
/// age bound in every sampled bucket.
#[test]
fn invariant_pdgr_edge_frequency_bounded() {
    let reports =
        churngraph::metrics::edge_prob_pdgr_buckets(300, 10, 30, 600, 55).unwrap();
    assert!(!reports.is_empty());
    for b in &reports {
        assert!(
            b.frequency <= b.bound,
            "bucket [{}, {}): frequency {:.5} exceeds bound {:.5} ({} samples)",
            b.age_lo,
            b.age_hi,
            b.frequency,
            b.bound,
            b.samples
        );
    }
}
