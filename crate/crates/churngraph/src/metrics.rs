//! Measured quantities on snapshots and trajectories: isolated nodes, degree
//! statistics, vertex expansion (exact and sampled), and the edge-probability
//! formulas with their Monte-Carlo oracles.

use std::collections::BTreeSet;

use rand::Rng;
use serde::Serialize;

use crate::model::{
    snapshot_at, Event, ModelKind, ModelParams, NodeId, Replayer, Snapshot, Time, Trajectory,
};
use crate::{Error, Result};

/// Hard cap for the exhaustive 2^N expansion scan.
pub const EXACT_EXPANSION_MAX_NODES: usize = 24;

// ---------------------------------------------------------------------------
// Isolation and degrees
// ---------------------------------------------------------------------------

/// Number of alive nodes with zero undirected neighbors.
pub fn isolated_count(snap: &Snapshot) -> usize {
    (0..snap.node_count()).filter(|&i| snap.degree_at(i) == 0).count()
}

/// Nodes isolated at `t` that never regain an incident edge for the rest of
/// their lives. Requires the trajectory to extend past the death of every
/// node alive at `t`.
pub fn isolated_forever(traj: &Trajectory, t: Time) -> Result<BTreeSet<NodeId>> {
    let snap = snapshot_at(traj, t)?;
    for &id in snap.ids() {
        if traj.death_time(id)?.is_none() {
            return Err(Error::HorizonTooShort(format!(
                "node {id} alive at {t} has no recorded death"
            )));
        }
    }
    let mut candidates: BTreeSet<NodeId> = (0..snap.node_count())
        .filter(|&i| snap.degree_at(i) == 0)
        .map(|i| snap.id_at(i))
        .collect();
    // A lost out-slot never refills (no regeneration) or never empties while
    // candidates exist (regeneration), so isolation can only end through an
    // incoming request.
    let from = traj.events_up_to(t);
    for ev in &traj.events()[from..] {
        if candidates.is_empty() {
            break;
        }
        match &ev.event {
            Event::Birth { targets, .. } => {
                for tgt in targets {
                    candidates.remove(tgt);
                }
            }
            Event::Rewire { new_target, .. } => {
                candidates.remove(new_target);
            }
            Event::Death { .. } => {}
        }
    }
    Ok(candidates)
}

#[derive(Clone, Debug, Serialize)]
pub struct DegreeStats {
    pub v: String,
    pub nodes: usize,
    pub edges: usize,
    pub mean: f64,
    pub max: usize,
    /// histogram[k] = number of nodes with degree k
    pub histogram: Vec<usize>,
}

pub fn degree_stats(snap: &Snapshot) -> DegreeStats {
    let n = snap.node_count();
    let mut max = 0usize;
    let mut total = 0usize;
    let mut histogram = Vec::new();
    for i in 0..n {
        let d = snap.degree_at(i);
        max = max.max(d);
        total += d;
        if histogram.len() <= d {
            histogram.resize(d + 1, 0);
        }
        histogram[d] += 1;
    }
    DegreeStats {
        v: "v1".into(),
        nodes: n,
        edges: total / 2,
        mean: if n == 0 { 0.0 } else { total as f64 / n as f64 },
        max,
        histogram,
    }
}

// ---------------------------------------------------------------------------
// Vertex expansion
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpansionMethod {
    Exact,
    Sampled,
}

/// Result of an expansion scan. `exact` reports the true minimum of
/// |boundary(S)|/|S| over all subset sizes in range; `sampled` reports an
/// upper bound on that minimum (it minimizes over a subset of candidates).
#[derive(Clone, Debug, Serialize)]
pub struct ExpansionReport {
    pub v: String,
    pub method: ExpansionMethod,
    pub h_out: f64,
    /// Minimizing subset (exact) or worst sampled subset.
    pub witness: Vec<NodeId>,
    pub size_range: (usize, usize),
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
}

fn validate_range(snap: &Snapshot, min_size: usize, max_size: usize) -> Result<()> {
    let half = snap.node_count() / 2;
    if min_size < 1 || min_size > max_size || max_size > half {
        return Err(Error::InvalidSizeRange {
            min: min_size,
            max: max_size,
            nodes: snap.node_count(),
        });
    }
    Ok(())
}

/// Exact vertex isoperimetric minimum over all subsets with size in
/// [min_size, max_size], by exhaustive bitmask enumeration (|N| <= 24).
pub fn h_out_exact(snap: &Snapshot, min_size: usize, max_size: usize) -> Result<ExpansionReport> {
    let n = snap.node_count();
    if n > EXACT_EXPANSION_MAX_NODES {
        return Err(Error::GraphTooLarge { nodes: n, max: EXACT_EXPANSION_MAX_NODES });
    }
    validate_range(snap, min_size, max_size)?;
    let nbr = neighbor_masks(snap);
    let mut best = f64::INFINITY;
    let mut best_mask = 0u32;
    for mask in 1u32..(1u32 << n) {
        let size = mask.count_ones() as usize;
        if size < min_size || size > max_size {
            continue;
        }
        let ratio = boundary_size(&nbr, mask) as f64 / size as f64;
        if ratio < best {
            best = ratio;
            best_mask = mask;
        }
    }
    Ok(ExpansionReport {
        v: "v1".into(),
        method: ExpansionMethod::Exact,
        h_out: best,
        witness: mask_to_ids(snap, best_mask),
        size_range: (min_size, max_size),
        samples: None,
    })
}

fn neighbor_masks(snap: &Snapshot) -> Vec<u32> {
    (0..snap.node_count())
        .map(|i| snap.neighbors_at(i).iter().fold(0u32, |m, &j| m | (1 << j)))
        .collect()
}

fn boundary_size(nbr: &[u32], mask: u32) -> u32 {
    let mut out = 0u32;
    let mut bits = mask;
    while bits != 0 {
        let i = bits.trailing_zeros();
        out |= nbr[i as usize];
        bits &= bits - 1;
    }
    (out & !mask).count_ones()
}

fn mask_to_ids(snap: &Snapshot, mask: u32) -> Vec<NodeId> {
    (0..snap.node_count()).filter(|&i| mask & (1 << i) != 0).map(|i| snap.id_at(i)).collect()
}

/// Sampled upper bound on the isoperimetric minimum.
///
/// Candidates alternate between uniform random subsets and BFS balls grown
/// from random roots (connected subsets probe the weak direction), each with
/// a uniform size in range. When the range holds no more subsets than the
/// sample budget (and the graph is small enough to enumerate), the scan is
/// exhaustive and the result equals [`h_out_exact`].
pub fn h_out_sampled<R: Rng>(
    snap: &Snapshot,
    min_size: usize,
    max_size: usize,
    samples: u64,
    rng: &mut R,
) -> Result<ExpansionReport> {
    validate_range(snap, min_size, max_size)?;
    if samples < 1 {
        return Err(Error::InvalidParams("samples must be >= 1".into()));
    }
    let n = snap.node_count();
    if n <= EXACT_EXPANSION_MAX_NODES {
        if let Some(total) = subsets_in_range(n, min_size, max_size, samples) {
            let mut report = h_out_exact(snap, min_size, max_size)?;
            report.method = ExpansionMethod::Sampled;
            report.samples = Some(total);
            return Ok(report);
        }
    }

    let mut best = f64::INFINITY;
    let mut witness: Vec<NodeId> = Vec::new();
    // epoch-stamped membership marks, reused across samples
    let mut member = vec![0u64; n];
    let mut seen = vec![0u64; n];
    let mut epoch = 0u64;
    let mut subset: Vec<usize> = Vec::new();
    let mut pool: Vec<usize> = (0..n).collect();
    let mut queue: std::collections::VecDeque<usize> = std::collections::VecDeque::new();

    for i in 0..samples {
        epoch += 1;
        let size = rng.random_range(min_size..=max_size);
        subset.clear();
        if i % 2 == 0 {
            // uniform random subset via partial Fisher-Yates
            for k in 0..size {
                let j = rng.random_range(k..n);
                pool.swap(k, j);
                subset.push(pool[k]);
                member[pool[k]] = epoch;
            }
        } else {
            // BFS ball from a random root, truncated to the target size;
            // if the component runs out below min_size, pad at random
            let root = rng.random_range(0..n);
            queue.clear();
            queue.push_back(root);
            member[root] = epoch;
            subset.push(root);
            'grow: while let Some(u) = queue.pop_front() {
                for &v in snap.neighbors_at(u) {
                    let v = v as usize;
                    if member[v] != epoch {
                        member[v] = epoch;
                        subset.push(v);
                        queue.push_back(v);
                        if subset.len() >= size {
                            break 'grow;
                        }
                    }
                }
            }
            while subset.len() < min_size {
                let cand = rng.random_range(0..n);
                if member[cand] != epoch {
                    member[cand] = epoch;
                    subset.push(cand);
                }
            }
        }
        // boundary = neighbors of the subset that are outside it
        let mut boundary = 0usize;
        for &u in &subset {
            for &v in snap.neighbors_at(u) {
                let v = v as usize;
                if member[v] != epoch && seen[v] != epoch {
                    seen[v] = epoch;
                    boundary += 1;
                }
            }
        }
        let ratio = boundary as f64 / subset.len() as f64;
        if ratio < best {
            best = ratio;
            witness = subset.iter().map(|&u| snap.id_at(u)).collect();
            witness.sort();
        }
    }
    Ok(ExpansionReport {
        v: "v1".into(),
        method: ExpansionMethod::Sampled,
        h_out: best,
        witness,
        size_range: (min_size, max_size),
        samples: Some(samples),
    })
}

/// Total subsets with size in range if it does not exceed `cap`, else None.
fn subsets_in_range(n: usize, min_size: usize, max_size: usize, cap: u64) -> Option<u64> {
    let mut total: u64 = 0;
    for k in min_size..=max_size {
        let mut c: u64 = 1;
        for j in 1..=k {
            c = c.checked_mul((n - j + 1) as u64)? / j as u64;
            if c > cap {
                return None;
            }
        }
        total = total.checked_add(c)?;
        if total > cap {
            return None;
        }
    }
    Some(total)
}

// ---------------------------------------------------------------------------
// Edge-probability formulas and oracles
// ---------------------------------------------------------------------------

/// Request-destination probabilities in the streaming model with edge
/// regeneration, for a requester of age k+1 observed in steady state.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct StreamingEdgeProb {
    /// Probability that a fixed request points at a fixed older node:
    /// (1/(n-1)) * (1 + 1/(n-1))^k.
    pub older: f64,
    /// Upper bound for a fixed younger target: 1/(n-1).
    pub younger_bound: f64,
}

pub fn edge_prob_streaming_regen(n: u64, k: u64) -> Result<StreamingEdgeProb> {
    if n < 2 {
        return Err(Error::InvalidParams("n must be >= 2".into()));
    }
    if k + 1 > n {
        return Err(Error::InfeasibleAge(format!("age k+1 = {} exceeds lifetime {n}", k + 1)));
    }
    let base = 1.0 / (n - 1) as f64;
    Ok(StreamingEdgeProb {
        older: base * (1.0 + base).powi(k as i32),
        younger_bound: base,
    })
}

/// Upper bound on the request-destination probability in the Poisson model
/// with edge regeneration, for a requester of age i (in events) and a fixed
/// older target: (1/(0.8 n)) * (1 + i/(1.7 n)).
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PoissonEdgeBound {
    pub bound: f64,
    /// Bound for a fixed younger target: 1/(0.8 n).
    pub younger_bound: f64,
}

pub fn edge_prob_poisson_regen_bound(n: u64, age_events: f64) -> Result<PoissonEdgeBound> {
    if n < 2 {
        return Err(Error::InvalidParams("n must be >= 2".into()));
    }
    if !age_events.is_finite() || age_events < 0.0 {
        return Err(Error::InvalidParams("age must be non-negative".into()));
    }
    let base = 1.0 / (0.8 * n as f64);
    Ok(PoissonEdgeBound { bound: base * (1.0 + age_events / (1.7 * n as f64)), younger_bound: base })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EdgeProbEstimate {
    pub k: u64,
    pub hits: u64,
    pub samples: u64,
    pub frequency: f64,
    pub std_error: f64,
}

/// Monte-Carlo frequency of the event "a request slot of the node of age k+1
/// points at the designated older target", measured over a long streaming
/// run.
///
/// The designated target is the oldest node in each observed snapshot (the
/// formula is independent of which older node is fixed). Ages run 1..=n, so
/// the oldest valid k is n-2: an age-n requester coexists with no strictly
/// older node, and `Error::InfeasibleAge` reports that boundary.
pub fn edge_prob_empirical(
    kind: ModelKind,
    n: u64,
    d: u32,
    k: u64,
    min_samples: u64,
    seed: u64,
) -> Result<EdgeProbEstimate> {
    Ok(edge_prob_empirical_multi(kind, n, d, &[k], min_samples, seed)?.remove(0))
}

/// Shared-replay variant: one simulation observed at every steady-state
/// round serves all requested ages.
pub fn edge_prob_empirical_multi(
    kind: ModelKind,
    n: u64,
    d: u32,
    ks: &[u64],
    min_samples: u64,
    seed: u64,
) -> Result<Vec<EdgeProbEstimate>> {
    if !kind.is_streaming() {
        return Err(Error::UnsupportedModel { expected: "streaming", got: kind.as_str() });
    }
    if min_samples < 1 {
        return Err(Error::InvalidParams("need at least one sample".into()));
    }
    for &k in ks {
        if k + 1 > n {
            return Err(Error::InfeasibleAge(format!(
                "age k+1 = {} exceeds lifetime {n}",
                k + 1
            )));
        }
        if k + 1 == n {
            return Err(Error::InfeasibleAge(format!(
                "k = {k}: an age-{n} requester has no strictly older alive node \
                 (ages run 1..={n}); the largest measurable k is {}",
                n - 2
            )));
        }
    }
    let params = ModelParams::streaming(kind, n, d)?;
    let warmup = 2 * n;
    let rounds_needed = min_samples.div_ceil(d as u64);
    let horizon = warmup + rounds_needed;
    let traj = crate::engine::run_model(params, horizon, seed)?;
    let mut rp = Replayer::new(&traj);
    let mut hits = vec![0u64; ks.len()];
    let mut samples = vec![0u64; ks.len()];
    for t in 1..=horizon {
        rp.advance_to(Time::from_round(t))?;
        if t <= warmup {
            continue;
        }
        let oldest = NodeId(t - n + 1); // age n
        debug_assert!(rp.state().is_alive(oldest));
        for (ki, &k) in ks.iter().enumerate() {
            let u = NodeId(t - k); // age k+1
            let slots = rp.state().slot_targets(u).expect("requester alive");
            for s in &slots {
                samples[ki] += 1;
                if *s == Some(oldest) {
                    hits[ki] += 1;
                }
            }
        }
    }
    Ok(ks
        .iter()
        .zip(hits.iter().zip(samples.iter()))
        .map(|(&k, (&h, &m))| {
            let p = h as f64 / m as f64;
            EdgeProbEstimate {
                k,
                hits: h,
                samples: m,
                frequency: p,
                std_error: (p * (1.0 - p) / m as f64).sqrt(),
            }
        })
        .collect())
}

/// One age bucket of the Poisson regeneration dominance check.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PdgrBucketReport {
    /// age range in events, inclusive-exclusive
    pub age_lo: u64,
    pub age_hi: u64,
    pub samples: u64,
    pub hits: u64,
    pub frequency: f64,
    /// formula bound evaluated at the oldest age in the bucket
    pub bound: f64,
}

/// Empirical per-(requester, designated-older-target) request frequencies in
/// a PDGR run, bucketed by requester age in events, each compared against the
/// closed-form upper bound. The designated target in every observed snapshot
/// is the oldest-born alive node.
pub fn edge_prob_pdgr_buckets(
    n: u64,
    d: u32,
    observations: u64,
    spacing_events: u64,
    seed: u64,
) -> Result<Vec<PdgrBucketReport>> {
    let params = ModelParams::poisson(ModelKind::Pdgr, n, d)?;
    let r0 = (7.0 * n as f64 * (n as f64).ln()).ceil() as u64;
    let horizon = r0 + observations * spacing_events;
    let traj = crate::engine::run_model(params, horizon, seed)?;
    // bucket edges in units of n events
    let edges: Vec<u64> = vec![0, n / 2, n, 2 * n, 4 * n, 8 * n, u64::MAX];
    let mut buckets: Vec<(u64, u64)> = vec![(0, 0); edges.len() - 1];
    let mut rp = Replayer::new(&traj);
    for obs in 0..observations {
        let upto = (r0 + obs * spacing_events) as usize;
        rp.advance_to_event(upto)?;
        let state = rp.state();
        let oldest = state
            .alive_ids()
            .min()
            .ok_or_else(|| Error::HorizonTooShort("empty network at observation".into()))?;
        let r = rp.position() as u64;
        let ids: Vec<NodeId> = state.alive_ids().collect();
        for u in ids {
            if u == oldest {
                continue;
            }
            let age = r - traj.birth_event_index(u)? as u64;
            let b = edges.partition_point(|&e| e <= age) - 1;
            let slots = state.slot_targets(u).expect("alive");
            for s in &slots {
                buckets[b].1 += 1;
                if *s == Some(oldest) {
                    buckets[b].0 += 1;
                }
            }
        }
    }
    let mut reports = Vec::new();
    for (b, &(h, m)) in buckets.iter().enumerate() {
        if m == 0 {
            continue;
        }
        let age_hi = edges[b + 1];
        let bound_age = if age_hi == u64::MAX { horizon as f64 } else { age_hi as f64 };
        reports.push(PdgrBucketReport {
            age_lo: edges[b],
            age_hi,
            samples: m,
            hits: h,
            frequency: h as f64 / m as f64,
            bound: edge_prob_poisson_regen_bound(n, bound_age)?.bound,
        });
    }
    Ok(reports)
}
