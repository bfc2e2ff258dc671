//! Core domain types: node identities, clocks, the trajectory event log, and
//! deterministic replay into graph states and snapshots.
//!
//! A [`Trajectory`] is the single source of truth for one simulated run.
//! Every other module (flooding, metrics, onion-skin) is a pure function of a
//! trajectory, obtained by replaying its events from the empty graph.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::stats::splitmix64;
use crate::{Error, Result};

/// Node identity. Ids are dense, assigned in birth order starting at 1, and
/// never reused.
#[derive(
    Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct NodeId(pub u64);

impl fmt::Debug for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A point on the trajectory clock.
///
/// Streaming models use integer-valued rounds; Poisson models use
/// non-negative continuous times. Both are carried as finite `f64` values
/// (integers below 2^53 are exact), so one type serves the round clock, the
/// continuous clock, and interpolation between them. Event-index clocks are
/// plain `usize` positions into the event log (see
/// [`Trajectory::time_of_event`]).
#[derive(Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Time(f64);

impl Time {
    pub const ZERO: Time = Time(0.0);

    pub fn new(t: f64) -> Time {
        assert!(t.is_finite() && t >= 0.0, "time must be finite and non-negative");
        // normalize -0.0
        Time(t + 0.0)
    }

    pub fn from_round(r: u64) -> Time {
        Time(r as f64)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_integral(self) -> bool {
        self.0.fract() == 0.0 && self.0 <= 9_007_199_254_740_992.0
    }

    /// Integer round value; panics if the time is not integral.
    pub fn round_index(self) -> u64 {
        assert!(self.is_integral(), "time {} is not a round", self.0);
        self.0 as u64
    }
}

impl Eq for Time {}

#[allow(clippy::derive_ord_xor_partial_ord)]
impl Ord for Time {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl fmt::Debug for Time {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={}", self.0)
    }
}

impl fmt::Display for Time {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The four graph dynamics.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    /// Streaming churn, edges created at birth only.
    Sdg,
    /// Streaming churn with edge regeneration.
    Sdgr,
    /// Poisson churn, edges created at birth only.
    Pdg,
    /// Poisson churn with edge regeneration.
    Pdgr,
}

impl ModelKind {
    pub fn is_streaming(self) -> bool {
        matches!(self, ModelKind::Sdg | ModelKind::Sdgr)
    }

    pub fn regenerates(self) -> bool {
        matches!(self, ModelKind::Sdgr | ModelKind::Pdgr)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Sdg => "sdg",
            ModelKind::Sdgr => "sdgr",
            ModelKind::Pdg => "pdg",
            ModelKind::Pdgr => "pdgr",
        }
    }

    pub fn parse(s: &str) -> Result<ModelKind> {
        match s {
            "sdg" => Ok(ModelKind::Sdg),
            "sdgr" => Ok(ModelKind::Sdgr),
            "pdg" => Ok(ModelKind::Pdg),
            "pdgr" => Ok(ModelKind::Pdgr),
            other => Err(Error::InvalidParams(format!("unknown model '{other}'"))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Model parameters attached to a trajectory.
///
/// Streaming models are parameterized by the lifetime `n`; Poisson models by
/// the arrival rate `lambda` and per-node death rate `mu`, with
/// `n = lambda / mu` as the expected steady-state size. The canonical Poisson
/// setting is `lambda = 1`, `mu = 1/n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub kind: ModelKind,
    pub n: u64,
    pub lambda: f64,
    pub mu: f64,
    pub d: u32,
}

impl ModelParams {
    pub fn streaming(kind: ModelKind, n: u64, d: u32) -> Result<ModelParams> {
        if !kind.is_streaming() {
            return Err(Error::InvalidParams(format!(
                "{kind} is not a streaming model"
            )));
        }
        if n < 1 {
            return Err(Error::InvalidParams("lifetime n must be >= 1".into()));
        }
        if d < 1 {
            return Err(Error::InvalidParams("d must be >= 1".into()));
        }
        Ok(ModelParams { kind, n, lambda: 0.0, mu: 0.0, d })
    }

    /// Canonical Poisson setting: lambda = 1, mu = 1/n.
    pub fn poisson(kind: ModelKind, n: u64, d: u32) -> Result<ModelParams> {
        Self::poisson_rates(kind, 1.0, 1.0 / n as f64, d)
    }

    pub fn poisson_rates(kind: ModelKind, lambda: f64, mu: f64, d: u32) -> Result<ModelParams> {
        if kind.is_streaming() {
            return Err(Error::InvalidParams(format!(
                "{kind} is not a Poisson model"
            )));
        }
        if !(lambda > 0.0 && lambda.is_finite()) || !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::InvalidParams(
                "lambda and mu must be positive and finite".into(),
            ));
        }
        if d < 1 {
            return Err(Error::InvalidParams("d must be >= 1".into()));
        }
        Ok(ModelParams { kind, n: (lambda / mu).round() as u64, lambda, mu, d })
    }

    pub fn is_canonical_poisson(&self) -> bool {
        !self.kind.is_streaming()
            && self.lambda == 1.0
            && self.n > 0
            && self.mu == 1.0 / self.n as f64
    }
}

/// One entry of the event log.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Event {
    /// A node joins and issues its connection requests (owned out-slots).
    Birth { id: NodeId, targets: Vec<NodeId> },
    /// A node leaves; all incident edges disappear.
    Death { id: NodeId },
    /// A surviving node refills one out-slot lost to a neighbor's death.
    Rewire { owner: NodeId, slot: u32, new_target: NodeId },
}

impl Event {
    pub fn kind_str(&self) -> &'static str {
        match self {
            Event::Birth { .. } => "birth",
            Event::Death { .. } => "death",
            Event::Rewire { .. } => "rewire",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimedEvent {
    pub time: Time,
    pub event: Event,
}

/// A directed request slot as materialized in a snapshot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutSlot {
    pub owner: NodeId,
    pub slot_index: u32,
    pub target: NodeId,
    pub established_at: Time,
}

/// Identity plus birth/death times of one node.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: NodeId,
    pub birth: Time,
    pub death: Option<Time>,
}

// ---------------------------------------------------------------------------
// Trajectory
// ---------------------------------------------------------------------------

/// An ordered event log plus the parameters and seed that produced it.
///
/// Replaying the events from the empty graph reproduces every intermediate
/// state deterministically; all accessors below are derived from that replay
/// or from the birth/death index built at construction time.
#[derive(Clone, Debug)]
pub struct Trajectory {
    params: ModelParams,
    seed: u64,
    events: Vec<TimedEvent>,
    times: Vec<Time>,
    birth_time: Vec<Time>,
    death_time: Vec<Option<Time>>,
    birth_event: Vec<usize>,
    birth_at: BTreeMap<Time, NodeId>,
}

impl Trajectory {
    pub fn new(params: ModelParams, seed: u64, events: Vec<TimedEvent>) -> Result<Trajectory> {
        let mut birth_time = Vec::new();
        let mut death_time: Vec<Option<Time>> = Vec::new();
        let mut birth_event = Vec::new();
        let mut birth_at = BTreeMap::new();
        let mut last = Time::ZERO;
        for (i, ev) in events.iter().enumerate() {
            if ev.time < last {
                return Err(Error::MalformedTrajectory(format!(
                    "event {i} at time {} precedes time {}",
                    ev.time, last
                )));
            }
            last = ev.time;
            match &ev.event {
                Event::Birth { id, .. } => {
                    let expected = NodeId(birth_time.len() as u64 + 1);
                    if *id != expected {
                        return Err(Error::MalformedTrajectory(format!(
                            "birth ids must be dense; expected {expected}, got {id}"
                        )));
                    }
                    birth_time.push(ev.time);
                    death_time.push(None);
                    birth_event.push(i);
                    birth_at.insert(ev.time, *id);
                }
                Event::Death { id } => {
                    let idx = (id.0 as usize)
                        .checked_sub(1)
                        .filter(|&k| k < birth_time.len())
                        .ok_or(Error::UnknownNode(*id))?;
                    if death_time[idx].is_some() {
                        return Err(Error::MalformedTrajectory(format!(
                            "node {id} dies twice"
                        )));
                    }
                    death_time[idx] = Some(ev.time);
                }
                Event::Rewire { owner, new_target, .. } => {
                    for id in [owner, new_target] {
                        if id.0 == 0 || id.0 as usize > birth_time.len() {
                            return Err(Error::UnknownNode(*id));
                        }
                    }
                }
            }
        }
        let times = events.iter().map(|e| e.time).collect();
        Ok(Trajectory {
            params,
            seed,
            events,
            times,
            birth_time,
            death_time,
            birth_event,
            birth_at,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn events(&self) -> &[TimedEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Time of the last event; `Time::ZERO` for an empty log.
    pub fn last_time(&self) -> Time {
        self.times.last().copied().unwrap_or(Time::ZERO)
    }

    /// Total number of births in the log.
    pub fn node_count(&self) -> usize {
        self.birth_time.len()
    }

    fn idx(&self, id: NodeId) -> Result<usize> {
        (id.0 as usize)
            .checked_sub(1)
            .filter(|&k| k < self.birth_time.len())
            .ok_or(Error::UnknownNode(id))
    }

    pub fn birth_time(&self, id: NodeId) -> Result<Time> {
        Ok(self.birth_time[self.idx(id)?])
    }

    pub fn death_time(&self, id: NodeId) -> Result<Option<Time>> {
        Ok(self.death_time[self.idx(id)?])
    }

    pub fn record(&self, id: NodeId) -> Result<NodeRecord> {
        let i = self.idx(id)?;
        Ok(NodeRecord { id, birth: self.birth_time[i], death: self.death_time[i] })
    }

    /// Ordinal of the node's birth among all events (0-based).
    pub fn birth_event_index(&self, id: NodeId) -> Result<usize> {
        Ok(self.birth_event[self.idx(id)?])
    }

    /// Alive at instant `t` (states are right-continuous: the instant of an
    /// event reflects the event already applied).
    pub fn is_alive_at(&self, id: NodeId, t: Time) -> Result<bool> {
        let i = self.idx(id)?;
        Ok(self.birth_time[i] <= t && self.death_time[i].is_none_or(|dt| dt > t))
    }

    pub fn alive_throughout(&self, id: NodeId, start: Time, end: Time) -> Result<bool> {
        let i = self.idx(id)?;
        Ok(self.birth_time[i] <= start && self.death_time[i].is_none_or(|dt| dt > end))
    }

    pub fn node_born_at(&self, t: Time) -> Option<NodeId> {
        self.birth_at.get(&t).copied()
    }

    /// Number of events with time <= t (also: index of the first later event).
    pub fn events_up_to(&self, t: Time) -> usize {
        self.times.partition_point(|&x| x <= t)
    }

    /// Time of the r-th churn-or-rewire step, 1-based; `time_of_event(0)` is 0.
    pub fn time_of_event(&self, r: usize) -> Result<Time> {
        if r == 0 {
            return Ok(Time::ZERO);
        }
        self.times
            .get(r - 1)
            .copied()
            .ok_or(Error::TimeOutOfRange { t: r as f64, last: self.times.len() as f64 })
    }

    // -- JSONL serialization -------------------------------------------------

    /// Write the JSONL representation: a header line followed by one event
    /// per line. Lines are formatted by hand to pin the key order of the
    /// schema.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        write!(
            w,
            r#"{{"model":"{}","n":{},"d":{},"seed":{}"#,
            self.params.kind.as_str(),
            self.params.n,
            self.params.d,
            self.seed
        )?;
        if !self.params.kind.is_streaming() && !self.params.is_canonical_poisson() {
            write!(w, r#","lambda":{},"mu":{}"#, self.params.lambda, self.params.mu)?;
        }
        writeln!(w, "}}")?;
        let mut time_buf = String::new();
        for ev in &self.events {
            time_buf.clear();
            if ev.time.is_integral() {
                time_buf.push_str(&format!("{}", ev.time.value() as u64));
            } else {
                time_buf.push_str(&format!("{}", ev.time.value()));
            }
            match &ev.event {
                Event::Birth { id, targets } => {
                    write!(w, r#"{{"t":{time_buf},"kind":"birth","id":{},"targets":["#, id.0)?;
                    for (i, t) in targets.iter().enumerate() {
                        if i > 0 {
                            write!(w, ",")?;
                        }
                        write!(w, "{}", t.0)?;
                    }
                    writeln!(w, "]}}")?;
                }
                Event::Death { id } => {
                    writeln!(w, r#"{{"t":{time_buf},"kind":"death","id":{}}}"#, id.0)?;
                }
                Event::Rewire { owner, slot, new_target } => {
                    writeln!(
                        w,
                        r#"{{"t":{time_buf},"kind":"rewire","owner":{},"slot":{slot},"new_target":{}}}"#,
                        owner.0, new_target.0
                    )?;
                }
            }
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Trajectory> {
        let mut lines = r.lines();
        let header_line = lines
            .next()
            .ok_or_else(|| Error::MalformedTrajectory("empty file".into()))??;
        let header: serde_json::Value = serde_json::from_str(&header_line)?;
        let kind = ModelKind::parse(
            header
                .get("model")
                .and_then(|v| v.as_str())
                .ok_or_else(|| Error::MalformedTrajectory("header missing 'model'".into()))?,
        )?;
        let n = header
            .get("n")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::MalformedTrajectory("header missing 'n'".into()))?;
        let d = header
            .get("d")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::MalformedTrajectory("header missing 'd'".into()))?
            as u32;
        let seed = header
            .get("seed")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::MalformedTrajectory("header missing 'seed'".into()))?;
        let params = if kind.is_streaming() {
            ModelParams::streaming(kind, n, d)?
        } else {
            match (header.get("lambda"), header.get("mu")) {
                (Some(l), Some(m)) => ModelParams::poisson_rates(
                    kind,
                    l.as_f64().ok_or_else(|| {
                        Error::MalformedTrajectory("bad lambda".into())
                    })?,
                    m.as_f64().ok_or_else(|| Error::MalformedTrajectory("bad mu".into()))?,
                    d,
                )?,
                _ => ModelParams::poisson(kind, n, d)?,
            }
        };
        let mut events = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let v: serde_json::Value = serde_json::from_str(&line)?;
            let bad = |what: &str| {
                Error::MalformedTrajectory(format!("line {}: {}", lineno + 2, what))
            };
            let t = v.get("t").and_then(|x| x.as_f64()).ok_or_else(|| bad("missing 't'"))?;
            let time = Time::new(t);
            let kind = v.get("kind").and_then(|x| x.as_str()).ok_or_else(|| bad("missing 'kind'"))?;
            let get_id = |key: &str| -> Result<NodeId> {
                v.get(key)
                    .and_then(|x| x.as_u64())
                    .map(NodeId)
                    .ok_or_else(|| bad(&format!("missing '{key}'")))
            };
            let event = match kind {
                "birth" => Event::Birth {
                    id: get_id("id")?,
                    targets: v
                        .get("targets")
                        .and_then(|x| x.as_array())
                        .ok_or_else(|| bad("missing 'targets'"))?
                        .iter()
                        .map(|x| x.as_u64().map(NodeId).ok_or_else(|| bad("bad target")))
                        .collect::<Result<Vec<_>>>()?,
                },
                "death" => Event::Death { id: get_id("id")? },
                "rewire" => Event::Rewire {
                    owner: get_id("owner")?,
                    slot: v
                        .get("slot")
                        .and_then(|x| x.as_u64())
                        .ok_or_else(|| bad("missing 'slot'"))? as u32,
                    new_target: get_id("new_target")?,
                },
                other => return Err(bad(&format!("unknown kind '{other}'"))),
            };
            events.push(TimedEvent { time, event });
        }
        Trajectory::new(params, seed, events)
    }

    pub fn write_file(&self, path: &std::path::Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_jsonl(std::io::BufWriter::new(f))
    }

    pub fn read_file(path: &std::path::Path) -> Result<Trajectory> {
        let f = std::fs::File::open(path)?;
        Self::read_jsonl(std::io::BufReader::new(f))
    }
}

// ---------------------------------------------------------------------------
// Live graph state and replay
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
struct NodeState {
    birth: Time,
    /// Slot i holds (target, established_at); `None` marks a slot lost to a
    /// neighbor death and not (yet) regenerated.
    slots: Vec<Option<(NodeId, Time)>>,
}

/// Mutable graph state produced by replaying a trajectory prefix.
///
/// Maintains per-node out-slots, the reverse slot index, and the undirected
/// adjacency with per-edge support counts (parallel slots collapse into one
/// edge that disappears only when no live slot supports it).
///
/// Ids are dense by construction, so per-node storage is indexed by id;
/// the sorted alive set keeps iteration order (and thus replay-derived
/// output) deterministic.
#[derive(Clone, Debug)]
pub struct GraphState {
    time: Time,
    d: u32,
    nodes: Vec<Option<NodeState>>,
    in_slots: Vec<BTreeSet<(NodeId, u32)>>,
    adj: Vec<BTreeMap<NodeId, u32>>,
    alive: BTreeSet<NodeId>,
}

impl GraphState {
    pub fn new(d: u32) -> GraphState {
        GraphState {
            time: Time::ZERO,
            d,
            nodes: Vec::new(),
            in_slots: Vec::new(),
            adj: Vec::new(),
            alive: BTreeSet::new(),
        }
    }

    fn ensure(&mut self, id: NodeId) -> usize {
        let idx = id.0 as usize;
        if self.nodes.len() <= idx {
            self.nodes.resize_with(idx + 1, || None);
            self.in_slots.resize_with(idx + 1, BTreeSet::new);
            self.adj.resize_with(idx + 1, BTreeMap::new);
        }
        idx
    }

    fn node(&self, id: NodeId) -> Option<&NodeState> {
        self.nodes.get(id.0 as usize).and_then(|n| n.as_ref())
    }

    pub fn time(&self) -> Time {
        self.time
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn alive_count(&self) -> usize {
        self.alive.len()
    }

    pub fn is_alive(&self, id: NodeId) -> bool {
        self.node(id).is_some()
    }

    pub fn alive_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.alive.iter().copied()
    }

    pub fn birth_of(&self, id: NodeId) -> Option<Time> {
        self.node(id).map(|n| n.birth)
    }

    pub fn neighbors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.adj.get(id.0 as usize).into_iter().flat_map(|m| m.keys().copied())
    }

    pub fn degree(&self, id: NodeId) -> usize {
        self.adj.get(id.0 as usize).map_or(0, |m| m.len())
    }

    pub fn edge_exists(&self, u: NodeId, v: NodeId) -> bool {
        self.adj.get(u.0 as usize).is_some_and(|m| m.contains_key(&v))
    }

    /// Number of live slots supporting the undirected edge {u, v}.
    pub fn edge_support(&self, u: NodeId, v: NodeId) -> u32 {
        self.adj.get(u.0 as usize).and_then(|m| m.get(&v)).copied().unwrap_or(0)
    }

    /// Targets of `id`'s slots, `None` for lost slots.
    pub fn slot_targets(&self, id: NodeId) -> Option<Vec<Option<NodeId>>> {
        self.node(id).map(|n| n.slots.iter().map(|s| s.map(|(t, _)| t)).collect())
    }

    fn add_support(&mut self, a: NodeId, b: NodeId) {
        *self.adj[a.0 as usize].entry(b).or_insert(0) += 1;
        *self.adj[b.0 as usize].entry(a).or_insert(0) += 1;
    }

    fn drop_support(&mut self, a: NodeId, b: NodeId) {
        for (x, y) in [(a, b), (b, a)] {
            let m = &mut self.adj[x.0 as usize];
            let c = m.get_mut(&y).expect("support bookkeeping");
            *c -= 1;
            if *c == 0 {
                m.remove(&y);
            }
        }
    }

    /// Apply one recorded event, validating its preconditions.
    pub fn apply(&mut self, ev: &TimedEvent) -> Result<()> {
        if ev.time < self.time {
            return Err(Error::MalformedTrajectory(format!(
                "event at {} applied to state at {}",
                ev.time, self.time
            )));
        }
        self.time = ev.time;
        match &ev.event {
            Event::Birth { id, targets } => self.insert_node(*id, targets, ev.time)?,
            Event::Death { id } => {
                self.remove_node(*id)?;
            }
            Event::Rewire { owner, slot, new_target } => {
                self.fill_slot(*owner, *slot, *new_target, ev.time)?
            }
        }
        Ok(())
    }

    fn insert_node(&mut self, id: NodeId, targets: &[NodeId], t: Time) -> Result<()> {
        if id.0 == 0 {
            return Err(Error::MalformedTrajectory("node ids start at 1".into()));
        }
        if self.is_alive(id) {
            return Err(Error::MalformedTrajectory(format!("{id} born twice")));
        }
        if targets.len() > self.d as usize {
            return Err(Error::MalformedTrajectory(format!(
                "{id} issues {} requests, d = {}",
                targets.len(),
                self.d
            )));
        }
        for &tgt in targets {
            if tgt == id {
                return Err(Error::MalformedTrajectory(format!("{id} targets itself")));
            }
            if !self.is_alive(tgt) {
                return Err(Error::MalformedTrajectory(format!(
                    "birth of {id} targets dead or unborn {tgt}"
                )));
            }
        }
        let idx = self.ensure(id);
        let slots: Vec<_> = targets.iter().map(|&tgt| Some((tgt, t))).collect();
        self.nodes[idx] = Some(NodeState { birth: t, slots });
        self.alive.insert(id);
        for (i, &tgt) in targets.iter().enumerate() {
            self.in_slots[tgt.0 as usize].insert((id, i as u32));
            self.add_support(id, tgt);
        }
        Ok(())
    }

    /// Death with the cleared in-slots reported back; advances the clock.
    pub(crate) fn remove_node_at(&mut self, t: Time, id: NodeId) -> Result<Vec<(NodeId, u32)>> {
        if t < self.time {
            return Err(Error::MalformedTrajectory(format!(
                "death at {} applied to state at {}",
                t, self.time
            )));
        }
        self.time = t;
        self.remove_node(id)
    }

    /// Remove a node. Returns the (owner, slot) pairs that lost their target,
    /// in sorted order; under regeneration these are the slots to refill.
    pub(crate) fn remove_node(&mut self, id: NodeId) -> Result<Vec<(NodeId, u32)>> {
        let idx = id.0 as usize;
        let node = self
            .nodes
            .get_mut(idx)
            .and_then(Option::take)
            .ok_or(Error::UnknownNode(id))?;
        self.alive.remove(&id);
        // outgoing slots
        for (i, slot) in node.slots.iter().enumerate() {
            if let Some((tgt, _)) = slot {
                self.in_slots[tgt.0 as usize].remove(&(id, i as u32));
                self.drop_support(id, *tgt);
            }
        }
        // incoming slots
        let owners: Vec<(NodeId, u32)> =
            std::mem::take(&mut self.in_slots[idx]).into_iter().collect();
        for &(owner, slot) in &owners {
            let st =
                self.nodes[owner.0 as usize].as_mut().expect("in-slot owner alive");
            st.slots[slot as usize] = None;
            self.drop_support(owner, id);
        }
        debug_assert!(self.adj[idx].is_empty());
        Ok(owners)
    }

    fn fill_slot(&mut self, owner: NodeId, slot: u32, target: NodeId, t: Time) -> Result<()> {
        if target == owner {
            return Err(Error::MalformedTrajectory(format!("{owner} rewires to itself")));
        }
        if !self.is_alive(target) {
            return Err(Error::MalformedTrajectory(format!(
                "rewire of {owner} targets dead {target}"
            )));
        }
        let st = self
            .nodes
            .get_mut(owner.0 as usize)
            .and_then(Option::as_mut)
            .ok_or(Error::UnknownNode(owner))?;
        let cell =
            st.slots.get_mut(slot as usize).ok_or_else(|| {
                Error::MalformedTrajectory(format!("{owner} has no slot {slot}"))
            })?;
        if cell.is_some() {
            return Err(Error::MalformedTrajectory(format!(
                "rewire into occupied slot {slot} of {owner}"
            )));
        }
        *cell = Some((target, t));
        self.in_slots[target.0 as usize].insert((owner, slot));
        self.add_support(owner, target);
        Ok(())
    }

    /// Structural invariants: slot-target liveness, reverse-index and
    /// adjacency consistency, symmetry, no self-loops, slot count bounded by
    /// d. The regeneration out-degree law is event-order sensitive and is
    /// enforced by [`replay_check`] instead.
    pub fn check_invariants(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::MalformedTrajectory(msg));
        let mut support: BTreeMap<(NodeId, NodeId), u32> = BTreeMap::new();
        for &id in &self.alive {
            let node = self.node(id).expect("alive index consistent");
            if node.slots.len() > self.d as usize {
                return fail(format!("{id} owns {} slots, d = {}", node.slots.len(), self.d));
            }
            for (i, slot) in node.slots.iter().enumerate() {
                if let Some((tgt, _)) = slot {
                    if *tgt == id {
                        return fail(format!("{id} has a self-loop slot"));
                    }
                    if !self.is_alive(*tgt) {
                        return fail(format!("slot {i} of {id} dangles on {tgt}"));
                    }
                    if !self.in_slots[tgt.0 as usize].contains(&(id, i as u32)) {
                        return fail(format!("in-slot index misses {id}:{i} -> {tgt}"));
                    }
                    let key = if id < *tgt { (id, *tgt) } else { (*tgt, id) };
                    *support.entry(key).or_insert(0) += 1;
                }
            }
        }
        for (tgt_idx, set) in self.in_slots.iter().enumerate() {
            let tgt = NodeId(tgt_idx as u64);
            for (owner, slot) in set {
                let ok = self.node(*owner).is_some_and(|n| {
                    n.slots.get(*slot as usize).copied().flatten().map(|(t, _)| t)
                        == Some(tgt)
                });
                if !ok {
                    return fail(format!("stale in-slot {owner}:{slot} -> {tgt}"));
                }
            }
        }
        let mut seen = 0usize;
        for (u_idx, row) in self.adj.iter().enumerate() {
            let u = NodeId(u_idx as u64);
            for (&v, &c) in row {
                if u == v {
                    return fail(format!("self-loop in adjacency at {u}"));
                }
                if self.adj[v.0 as usize].get(&u) != Some(&c) {
                    return fail(format!("asymmetric adjacency {u}-{v}"));
                }
                if u < v {
                    if support.get(&(u, v)) != Some(&c) {
                        return fail(format!("support count mismatch on {u}-{v}"));
                    }
                    seen += 1;
                }
            }
        }
        if seen != support.len() {
            return fail("adjacency misses supported edges".into());
        }
        Ok(())
    }

    /// Freeze into an immutable snapshot.
    pub fn to_snapshot(&self) -> Snapshot {
        let ids: Vec<NodeId> = self.alive.iter().copied().collect();
        let index_of: BTreeMap<NodeId, u32> =
            ids.iter().enumerate().map(|(i, &id)| (id, i as u32)).collect();
        let nodes = ids
            .iter()
            .map(|&id| SnapshotNode { id, birth: self.node(id).unwrap().birth })
            .collect();
        let neighbors = ids
            .iter()
            .map(|&id| self.neighbors(id).map(|n| index_of[&n]).collect())
            .collect();
        let mut out_slots = Vec::new();
        for &id in &ids {
            for (i, slot) in self.node(id).unwrap().slots.iter().enumerate() {
                if let Some((tgt, at)) = slot {
                    out_slots.push(OutSlot {
                        owner: id,
                        slot_index: i as u32,
                        target: *tgt,
                        established_at: *at,
                    });
                }
            }
        }
        Snapshot { time: self.time, nodes, ids, index_of, neighbors, out_slots }
    }
}

/// Incremental replay cursor over a trajectory.
pub struct Replayer<'a> {
    traj: &'a Trajectory,
    state: GraphState,
    next: usize,
}

impl<'a> Replayer<'a> {
    pub fn new(traj: &'a Trajectory) -> Replayer<'a> {
        Replayer { traj, state: GraphState::new(traj.params().d), next: 0 }
    }

    pub fn state(&self) -> &GraphState {
        &self.state
    }

    pub fn position(&self) -> usize {
        self.next
    }

    pub fn done(&self) -> bool {
        self.next >= self.traj.len()
    }

    /// Apply all events with time <= t.
    pub fn advance_to(&mut self, t: Time) -> Result<()> {
        while let Some(ev) = self.traj.events().get(self.next) {
            if ev.time > t {
                break;
            }
            self.state.apply(ev)?;
            self.next += 1;
        }
        Ok(())
    }

    /// Apply events until `count` total events have been applied.
    pub fn advance_to_event(&mut self, count: usize) -> Result<()> {
        while self.next < count.min(self.traj.len()) {
            let ev = &self.traj.events()[self.next];
            self.state.apply(ev)?;
            self.next += 1;
        }
        Ok(())
    }

    /// Apply the next group of equal-time events. Returns the group time, or
    /// `None` when the log is exhausted. Invariants are meaningful only at
    /// group boundaries (a death and its regenerations share a timestamp).
    pub fn step_group(&mut self) -> Result<Option<Time>> {
        let Some(first) = self.traj.events().get(self.next) else {
            return Ok(None);
        };
        let t = first.time;
        while let Some(ev) = self.traj.events().get(self.next) {
            if ev.time != t {
                break;
            }
            self.state.apply(ev)?;
            self.next += 1;
        }
        Ok(Some(t))
    }
}

// ---------------------------------------------------------------------------
// Snapshot
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotNode {
    pub id: NodeId,
    pub birth: Time,
}

/// Frozen graph G_t: alive nodes, collapsed undirected adjacency, and the raw
/// directed slots, at one instant.
#[derive(Clone, Debug)]
pub struct Snapshot {
    time: Time,
    nodes: Vec<SnapshotNode>,
    ids: Vec<NodeId>,
    index_of: BTreeMap<NodeId, u32>,
    neighbors: Vec<Vec<u32>>,
    out_slots: Vec<OutSlot>,
}

impl Snapshot {
    /// Build a snapshot directly from parts; used by generators that produce
    /// static graphs without an event log.
    pub fn from_edges(
        time: Time,
        nodes: Vec<SnapshotNode>,
        edges: &[(NodeId, NodeId)],
        out_slots: Vec<OutSlot>,
    ) -> Result<Snapshot> {
        let ids: Vec<NodeId> = nodes.iter().map(|n| n.id).collect();
        let index_of: BTreeMap<NodeId, u32> =
            ids.iter().enumerate().map(|(i, &id)| (id, i as u32)).collect();
        if index_of.len() != ids.len() {
            return Err(Error::MalformedTrajectory("duplicate snapshot ids".into()));
        }
        let mut sets: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); ids.len()];
        for &(u, v) in edges {
            if u == v {
                return Err(Error::MalformedTrajectory("self-loop edge".into()));
            }
            let iu = *index_of.get(&u).ok_or(Error::UnknownNode(u))?;
            let iv = *index_of.get(&v).ok_or(Error::UnknownNode(v))?;
            sets[iu as usize].insert(iv);
            sets[iv as usize].insert(iu);
        }
        let neighbors = sets.into_iter().map(|s| s.into_iter().collect()).collect();
        Ok(Snapshot { time, nodes, ids, index_of, neighbors, out_slots })
    }

    pub fn time(&self) -> Time {
        self.time
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[NodeId] {
        &self.ids
    }

    pub fn nodes(&self) -> &[SnapshotNode] {
        &self.nodes
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.index_of.contains_key(&id)
    }

    pub fn index_of(&self, id: NodeId) -> Option<usize> {
        self.index_of.get(&id).map(|&i| i as usize)
    }

    pub fn id_at(&self, index: usize) -> NodeId {
        self.ids[index]
    }

    pub fn neighbors_at(&self, index: usize) -> &[u32] {
        &self.neighbors[index]
    }

    pub fn neighbors_of(&self, id: NodeId) -> Option<impl Iterator<Item = NodeId> + '_> {
        self.index_of(id)
            .map(|i| self.neighbors[i].iter().map(|&j| self.ids[j as usize]))
    }

    pub fn degree_at(&self, index: usize) -> usize {
        self.neighbors[index].len()
    }

    pub fn edge_exists(&self, u: NodeId, v: NodeId) -> bool {
        match (self.index_of(u), self.index_of(v)) {
            (Some(iu), Some(iv)) => self.neighbors[iu].binary_search(&(iv as u32)).is_ok(),
            _ => false,
        }
    }

    pub fn out_slots(&self) -> &[OutSlot] {
        &self.out_slots
    }

    /// Slot targets of one owner, indexed by slot position (length d for a
    /// fully-slotted node; `None` where the slot is lost).
    pub fn slot_targets_of(&self, owner: NodeId, d: u32) -> Vec<Option<NodeId>> {
        let mut v = vec![None; d as usize];
        for s in &self.out_slots {
            if s.owner == owner {
                v[s.slot_index as usize] = Some(s.target);
            }
        }
        v
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(|n| n.len()).sum::<usize>() / 2
    }

    /// Order-independent 64-bit digest of the node set.
    pub fn node_digest(&self) -> u64 {
        self.ids.iter().fold(0u64, |acc, id| acc ^ splitmix64(id.0))
    }
}

impl Serialize for Snapshot {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let edges: Vec<(u64, u64)> = self
            .ids
            .iter()
            .enumerate()
            .flat_map(|(i, &u)| {
                self.neighbors[i]
                    .iter()
                    .filter(move |&&j| (j as usize) > i)
                    .map(move |&j| (u.0, self.ids[j as usize].0))
            })
            .collect();
        SnapshotSerde {
            v: "v1".into(),
            time: self.time,
            nodes: self.nodes.clone(),
            edges,
            out_slots: self.out_slots.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Snapshot {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = SnapshotSerde::deserialize(d)?;
        let edges: Vec<(NodeId, NodeId)> =
            raw.edges.iter().map(|&(u, v)| (NodeId(u), NodeId(v))).collect();
        Snapshot::from_edges(raw.time, raw.nodes, &edges, raw.out_slots)
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct SnapshotSerde {
    v: String,
    time: Time,
    nodes: Vec<SnapshotNode>,
    edges: Vec<(u64, u64)>,
    out_slots: Vec<OutSlot>,
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Summary of a validated full replay.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ReplayReport {
    pub events: usize,
    pub groups: usize,
    pub final_nodes: usize,
    pub final_edges: usize,
}

/// Replay the whole log enforcing the model invariants:
///
/// - every event applies cleanly (liveness of targets, no self-loops, no
///   double births/deaths, rewires only into slots just lost to a death);
/// - rewires appear only in regeneration models;
/// - under regeneration, every slot cleared by a death is refilled within the
///   same timestamp group, except when the owner is the only survivor (then
///   the slot is permanently retired, mirroring the zero-slot bootstrap);
/// - streaming population law |N_t| = min(t, n) at every round boundary;
/// - structural state invariants (checked on sampled groups and at the end).
pub fn replay_check(traj: &Trajectory) -> Result<ReplayReport> {
    let regen = traj.params().kind.regenerates();
    let streaming = traj.params().kind.is_streaming();
    let n = traj.params().n;
    let mut state = GraphState::new(traj.params().d);
    let mut pending: BTreeSet<(NodeId, u32)> = BTreeSet::new();
    let mut groups = 0usize;
    let events = traj.events();
    let stride = (events.len() / 64).max(1);
    let mut i = 0usize;
    while i < events.len() {
        let t = events[i].time;
        while i < events.len() && events[i].time == t {
            let ev = &events[i];
            match &ev.event {
                Event::Birth { .. } => state.apply(ev)?,
                Event::Death { id } => {
                    let cleared = state.remove_node_at(ev.time, *id)?;
                    pending.extend(cleared);
                }
                Event::Rewire { owner, slot, .. } => {
                    if !regen {
                        return Err(Error::MalformedTrajectory(format!(
                            "rewire event in non-regenerating model {}",
                            traj.params().kind
                        )));
                    }
                    if !pending.remove(&(*owner, *slot)) {
                        return Err(Error::MalformedTrajectory(format!(
                            "rewire of {owner}:{slot} outside its death group"
                        )));
                    }
                    state.apply(ev)?;
                }
            }
            i += 1;
        }
        groups += 1;
        if !pending.is_empty() {
            if !regen {
                pending.clear(); // lost slots stay lost without regeneration
            } else if state.alive_count() > 1 {
                let (owner, slot) = pending.iter().next().unwrap();
                return Err(Error::MalformedTrajectory(format!(
                    "slot {owner}:{slot} not regenerated at time {t}"
                )));
            } else {
                pending.clear(); // no candidate target existed; slot retires
            }
        }
        if streaming {
            let round = t.round_index();
            let expect = round.min(n) as usize;
            if state.alive_count() != expect {
                return Err(Error::MalformedTrajectory(format!(
                    "population {} at round {round}, expected {expect}",
                    state.alive_count()
                )));
            }
        }
        if groups.is_multiple_of(stride) {
            state.check_invariants()?;
        }
    }
    state.check_invariants()?;
    let snap = state.to_snapshot();
    Ok(ReplayReport {
        events: events.len(),
        groups,
        final_nodes: snap.node_count(),
        final_edges: snap.edge_count(),
    })
}

/// Graph state immediately after all events with time <= t, as a snapshot.
pub fn snapshot_at(traj: &Trajectory, t: Time) -> Result<Snapshot> {
    if t > traj.last_time() {
        return Err(Error::TimeOutOfRange { t: t.value(), last: traj.last_time().value() });
    }
    let mut rp = Replayer::new(traj);
    rp.advance_to(t)?;
    let mut snap = rp.state().to_snapshot();
    snap.time = t;
    Ok(snap)
}

/// True iff an undirected edge between u and v exists at every instant of
/// [t_start, t_end] and both nodes are alive throughout.
///
/// States are right-continuous: an event at exactly t_end counts, an event at
/// exactly t_start is part of the starting state.
pub fn edge_present_throughout(
    traj: &Trajectory,
    u: NodeId,
    v: NodeId,
    t_start: Time,
    t_end: Time,
) -> Result<bool> {
    if t_start >= t_end {
        return Err(Error::InvalidInterval { start: t_start.value(), end: t_end.value() });
    }
    if !traj.alive_throughout(u, t_start, t_end)? || !traj.alive_throughout(v, t_start, t_end)? {
        return Ok(false);
    }
    let mut rp = Replayer::new(traj);
    rp.advance_to(t_start)?;
    let state = rp.state();
    let mut support = state.edge_support(u, v);
    if support == 0 {
        return Ok(false);
    }
    let mut u_slots = state.slot_targets(u).expect("u alive");
    let mut v_slots = state.slot_targets(v).expect("v alive");
    let from = traj.events_up_to(t_start);
    let to = traj.events_up_to(t_end);
    for ev in &traj.events()[from..to] {
        match &ev.event {
            Event::Death { id } => {
                // u and v outlive the interval; a third node's death can only
                // clear slots pointing at it.
                for slots in [&mut u_slots, &mut v_slots] {
                    for s in slots.iter_mut() {
                        if *s == Some(*id) {
                            *s = None;
                        }
                    }
                }
            }
            Event::Rewire { owner, slot, new_target } => {
                let (slots, peer) = if *owner == u {
                    (&mut u_slots, v)
                } else if *owner == v {
                    (&mut v_slots, u)
                } else {
                    continue;
                };
                let cell = &mut slots[*slot as usize];
                if *cell == Some(peer) {
                    support -= 1;
                    if support == 0 {
                        return Ok(false);
                    }
                }
                if *new_target == peer {
                    support += 1;
                }
                *cell = Some(*new_target);
            }
            Event::Birth { .. } => {}
        }
    }
    Ok(support > 0)
}

/// Order-independent digest of a node set.
pub fn set_digest<'a, I: IntoIterator<Item = &'a NodeId>>(ids: I) -> u64 {
    ids.into_iter().fold(0u64, |acc, id| acc ^ splitmix64(id.0))
}
