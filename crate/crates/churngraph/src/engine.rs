//! Topology dynamics applied to the churn stream: edge creation at birth,
//! edge loss at death, optional regeneration. Produces trajectories for all
//! four models plus the static d-out baseline graph.

use rand::Rng;

use crate::churn::{self, PoissonChurnParams};
use crate::model::{
    Event, GraphState, ModelKind, ModelParams, NodeId, OutSlot, Snapshot, SnapshotNode, Time,
    TimedEvent, Trajectory,
};
use crate::{Error, Result};

/// Position of same-round regeneration relative to the round's birth in the
/// streaming models.
///
/// With `NewbornEligible` (the default) the new node joins before the lost
/// slots are resampled, so it can be picked as a regeneration target and
/// every assignment draws uniformly from n-1 candidates. `NewbornExcluded`
/// resamples before the birth, shrinking the candidate set to n-2; it is kept
/// as a switch for sensitivity runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RegenTiming {
    #[default]
    NewbornEligible,
    NewbornExcluded,
}

/// Stateful simulator: a [`GraphState`] plus an O(1)-sampling view of the
/// alive set and the recorded event log.
pub struct Simulator {
    state: GraphState,
    alive: Vec<NodeId>,
    pos: std::collections::BTreeMap<NodeId, usize>,
    events: Vec<TimedEvent>,
    next_id: u64,
}

impl Simulator {
    pub fn new(d: u32) -> Simulator {
        Simulator {
            state: GraphState::new(d),
            alive: Vec::new(),
            pos: std::collections::BTreeMap::new(),
            events: Vec::new(),
            next_id: 1,
        }
    }

    pub fn state(&self) -> &GraphState {
        &self.state
    }

    pub fn alive_count(&self) -> usize {
        self.alive.len()
    }

    pub fn events(&self) -> &[TimedEvent] {
        &self.events
    }

    pub fn into_events(self) -> Vec<TimedEvent> {
        self.events
    }

    pub fn next_id(&mut self) -> NodeId {
        let id = NodeId(self.next_id);
        self.next_id += 1;
        id
    }

    pub fn alive_at(&self, index: usize) -> NodeId {
        self.alive[index]
    }

    /// Uniform over alive nodes excluding `exclude`; `None` when no candidate
    /// exists.
    fn sample_other<R: Rng>(&self, exclude: NodeId, rng: &mut R) -> Option<NodeId> {
        let k = self.alive.len();
        if k == 0 || (k == 1 && self.alive[0] == exclude) {
            return None;
        }
        loop {
            let cand = self.alive[rng.random_range(0..k)];
            if cand != exclude {
                return Some(cand);
            }
        }
    }

    /// Birth: the node joins and issues d independent requests, each uniform
    /// over the previously-alive nodes (with replacement). A node born into
    /// an empty network creates no slots.
    pub fn apply_birth<R: Rng>(&mut self, id: NodeId, t: Time, rng: &mut R) -> Result<()> {
        let d = self.state.d();
        // the newborn is not yet in `alive`, so draws are over the others
        let targets: Vec<NodeId> = if self.alive.is_empty() {
            Vec::new()
        } else {
            (0..d).map(|_| self.alive[rng.random_range(0..self.alive.len())]).collect()
        };
        let ev = TimedEvent { time: t, event: Event::Birth { id, targets } };
        self.state.apply(&ev)?;
        self.pos.insert(id, self.alive.len());
        self.alive.push(id);
        self.events.push(ev);
        Ok(())
    }

    fn unregister(&mut self, id: NodeId) {
        let i = self.pos.remove(&id).expect("alive bookkeeping");
        let last = self.alive.len() - 1;
        self.alive.swap_remove(i);
        if i <= last && i < self.alive.len() {
            self.pos.insert(self.alive[i], i);
        }
    }

    /// Death: the node and all incident edges disappear. With `regenerate`,
    /// each surviving owner of a lost slot immediately resamples it uniformly
    /// over the post-death alive set (excluding itself); one Rewire event per
    /// regenerated slot. A slot retires unfilled only when no candidate
    /// exists.
    pub fn apply_death<R: Rng>(
        &mut self,
        id: NodeId,
        t: Time,
        regenerate: bool,
        rng: &mut R,
    ) -> Result<()> {
        let pending = self.remove_only(id, t)?;
        if regenerate {
            self.regenerate(&pending, t, rng)?;
        }
        Ok(())
    }

    /// Death without regeneration; returns the slots awaiting refill.
    fn remove_only(&mut self, id: NodeId, t: Time) -> Result<Vec<(NodeId, u32)>> {
        let pending = self.state.remove_node_at(t, id)?;
        self.unregister(id);
        self.events.push(TimedEvent { time: t, event: Event::Death { id } });
        Ok(pending)
    }

    fn regenerate<R: Rng>(
        &mut self,
        pending: &[(NodeId, u32)],
        t: Time,
        rng: &mut R,
    ) -> Result<()> {
        for &(owner, slot) in pending {
            let Some(target) = self.sample_other(owner, rng) else {
                continue; // sole survivor: slot retires
            };
            let ev =
                TimedEvent { time: t, event: Event::Rewire { owner, slot, new_target: target } };
            self.state.apply(&ev)?;
            self.events.push(ev);
        }
        Ok(())
    }
}

/// Simulate one model into a trajectory with the default regeneration timing.
///
/// `horizon` counts rounds for streaming models and churn events for Poisson
/// models.
pub fn run_model(params: ModelParams, horizon: u64, seed: u64) -> Result<Trajectory> {
    run_model_with(params, horizon, seed, RegenTiming::default())
}

pub fn run_model_with(
    params: ModelParams,
    horizon: u64,
    seed: u64,
    timing: RegenTiming,
) -> Result<Trajectory> {
    if horizon < 1 {
        return Err(Error::InvalidParams("horizon must be >= 1".into()));
    }
    let mut rng = crate::trial_rng(seed, 0);
    let mut sim = Simulator::new(params.d);
    match params.kind {
        ModelKind::Sdg | ModelKind::Sdgr => {
            let regen = params.kind.regenerates();
            for round in 1..=horizon {
                let t = Time::from_round(round);
                let mut pending = Vec::new();
                if round > params.n {
                    let oldest = NodeId(round - params.n);
                    if regen && timing == RegenTiming::NewbornEligible {
                        pending = sim.remove_only(oldest, t)?;
                    } else {
                        sim.apply_death(oldest, t, regen, &mut rng)?;
                    }
                }
                let id = sim.next_id();
                debug_assert_eq!(id.0, round);
                sim.apply_birth(id, t, &mut rng)?;
                if !pending.is_empty() {
                    sim.regenerate(&pending, t, &mut rng)?;
                }
            }
        }
        ModelKind::Pdg | ModelKind::Pdgr => {
            let regen = params.kind.regenerates();
            let churn_params = PoissonChurnParams::new(params.lambda, params.mu)?;
            let mut t = 0.0f64;
            for _ in 0..horizon {
                let (dt, kind) = churn::poisson_next_event(sim.alive_count(), churn_params, &mut rng);
                t += dt;
                let time = Time::new(t);
                match kind {
                    churn::NextEvent::Birth => {
                        let id = sim.next_id();
                        sim.apply_birth(id, time, &mut rng)?;
                    }
                    churn::NextEvent::Death { victim_index } => {
                        let victim = sim.alive_at(victim_index);
                        sim.apply_death(victim, time, regen, &mut rng)?;
                    }
                }
            }
        }
    }
    Trajectory::new(params, seed, sim.into_events())
}

/// Static baseline: n nodes, each with d i.i.d. uniform out-choices among the
/// other n-1; undirected collapse.
pub fn static_dout_graph<R: Rng>(n: u64, d: u32, rng: &mut R) -> Result<Snapshot> {
    if n < 2 {
        return Err(Error::InvalidParams("static graph needs n >= 2".into()));
    }
    if d < 1 {
        return Err(Error::InvalidParams("d must be >= 1".into()));
    }
    let nodes: Vec<SnapshotNode> =
        (1..=n).map(|i| SnapshotNode { id: NodeId(i), birth: Time::ZERO }).collect();
    let mut edges = Vec::new();
    let mut out_slots = Vec::new();
    for i in 1..=n {
        for slot in 0..d {
            let target = loop {
                let cand = rng.random_range(1..=n);
                if cand != i {
                    break cand;
                }
            };
            edges.push((NodeId(i), NodeId(target)));
            out_slots.push(OutSlot {
                owner: NodeId(i),
                slot_index: slot,
                target: NodeId(target),
                established_at: Time::ZERO,
            });
        }
    }
    Snapshot::from_edges(Time::ZERO, nodes, &edges, out_slots)
}
