//! The onion-skin diagnostic process on streaming trajectories: layered
//! bipartite growth of informed young/old node sets, used to study the
//! bootstrap phase of flooding without regeneration.
//!
//! The process is an analyzer over a recorded trajectory: layers are computed
//! from the slot targets frozen in the snapshot at t0, with no fresh
//! randomness, so every layer can be checked against the informed sets of an
//! actual flooding run from the same source.
//!
//! Phase k corresponds to flooding rounds t0+2k (young layer) and t0+2k+1
//! (old layer). A candidate joins a layer only if it is still alive at its
//! informing round and its informing link's endpoint was alive one round
//! earlier; this keeps the dominance property exact: alive layer members are
//! always informed by the synchronous flooding at the matching round.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::Serialize;

use crate::model::{snapshot_at, NodeId, Snapshot, Time, Trajectory};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AgeClass {
    Young,
    Old,
    VeryOld,
}

/// Which quantity the class thresholds apply to.
///
/// The young/old/very-old bands are defined over a per-node life value l with
/// young 2 <= l < n/2, old n/2 <= l <= n - ceil(ln n), very old above. With
/// `ElapsedAge`, l is the node's age (t0 - birth + 1): young nodes are the
/// recently born, and their birth requests point into the older bands, which
/// is what the layered process consumes. With `RemainingLife`, l is n - age + 1:
/// the labels attach to the opposite end of the age axis (a node's requests
/// then always point at smaller-l nodes, so the process cannot grow); it is
/// kept for sensitivity analysis of the classification itself.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LifeReading {
    ElapsedAge,
    #[default]
    RemainingLife,
}

/// Class per node; nodes with life value below 2 are unclassified and absent
/// from the map (in steady state that is exactly one node per snapshot).
pub fn classify_ages(
    snap: &Snapshot,
    n: u64,
    reading: LifeReading,
) -> Result<BTreeMap<NodeId, AgeClass>> {
    if !snap.time().is_integral() {
        return Err(Error::UnsupportedModel { expected: "streaming", got: "continuous" });
    }
    let t0 = snap.time().round_index();
    if t0 < n {
        return Err(Error::InvalidParams(format!(
            "classification needs t0 >= n, got t0 = {t0}, n = {n}"
        )));
    }
    let very_old_floor = n - (n as f64).ln().ceil() as u64; // l > this is very old
    let mut classes = BTreeMap::new();
    for node in snap.nodes() {
        if !node.birth.is_integral() {
            return Err(Error::UnsupportedModel { expected: "streaming", got: "continuous" });
        }
        let age = t0 - node.birth.round_index() + 1;
        if age > n {
            return Err(Error::InvalidParams(format!(
                "node {} has age {age} beyond lifetime {n}",
                node.id
            )));
        }
        let l = match reading {
            LifeReading::ElapsedAge => age,
            LifeReading::RemainingLife => n - age + 1,
        };
        let class = if l < 2 {
            continue;
        } else if 2 * l < n {
            AgeClass::Young
        } else if l <= very_old_floor {
            AgeClass::Old
        } else {
            AgeClass::VeryOld
        };
        classes.insert(node.id, class);
    }
    Ok(classes)
}

/// Nested informed layers produced by one onion-skin run.
#[derive(Clone, Debug)]
pub struct OnionLayers {
    pub source: NodeId,
    pub t0: u64,
    /// Cumulative young layers Y_0 subset Y_1 subset ...; Y_0 = {source}.
    pub young_layers: Vec<BTreeSet<NodeId>>,
    /// Cumulative old layers O_0 subset O_1 subset ...
    pub old_layers: Vec<BTreeSet<NodeId>>,
    pub classes: BTreeMap<NodeId, AgeClass>,
}

impl OnionLayers {
    pub fn phases(&self) -> usize {
        self.young_layers.len()
    }

    /// |Y_k union O_k| for the final phase.
    pub fn final_informed(&self) -> usize {
        let y = self.young_layers.last().map_or(0, |s| s.len());
        let o = self.old_layers.last().map_or(0, |s| s.len());
        y + o
    }

    pub fn layer(&self, k: usize) -> (&BTreeSet<NodeId>, &BTreeSet<NodeId>) {
        (&self.young_layers[k], &self.old_layers[k])
    }
}

/// Run the onion-skin process from the node born at t0.
///
/// Phase 0 takes the old-class targets of the source's d requests (links to
/// other classes are discarded). In phase k >= 1, step 1 adds the young nodes
/// reaching the previous old layer by a request indexed in the second half
/// {d/2+1, ..., d}; step 2 adds the old nodes hit by a first-half request
/// {1, ..., d/2} of a newly added young node. Defaults to the elapsed-age
/// reading (see [`LifeReading`]).
pub fn onion_skin_run(traj: &Trajectory, t0: u64, source: NodeId) -> Result<OnionLayers> {
    onion_skin_run_with(traj, t0, source, LifeReading::ElapsedAge)
}

pub fn onion_skin_run_with(
    traj: &Trajectory,
    t0: u64,
    source: NodeId,
    reading: LifeReading,
) -> Result<OnionLayers> {
    let params = traj.params();
    if !params.kind.is_streaming() {
        return Err(Error::UnsupportedModel {
            expected: "streaming",
            got: params.kind.as_str(),
        });
    }
    let d = params.d;
    if !d.is_multiple_of(2) {
        return Err(Error::OddD(d));
    }
    let t0_time = Time::from_round(t0);
    if traj.birth_time(source)? != t0_time {
        return Err(Error::SourceNotBornAtT0 { id: source, t0: t0 as f64 });
    }
    let snap = snapshot_at(traj, t0_time)?;
    let classes = classify_ages(&snap, params.n, reading)?;

    // slot targets at t0, per owner, indexed by slot position
    let mut slots: BTreeMap<NodeId, Vec<Option<NodeId>>> = BTreeMap::new();
    for s in snap.out_slots() {
        let v = slots.entry(s.owner).or_insert_with(|| vec![None; d as usize]);
        v[s.slot_index as usize] = Some(s.target);
    }
    let empty: Vec<Option<NodeId>> = vec![None; d as usize];
    let young: Vec<NodeId> = classes
        .iter()
        .filter(|(_, c)| **c == AgeClass::Young)
        .map(|(id, _)| *id)
        .collect();
    let alive = |id: NodeId, round: u64| -> bool {
        traj.is_alive_at(id, Time::from_round(round)).unwrap_or(false)
    };
    let is_old = |id: NodeId| classes.get(&id) == Some(&AgeClass::Old);

    // phase 0
    let mut y_cum: BTreeSet<NodeId> = BTreeSet::from([source]);
    let mut o_cum: BTreeSet<NodeId> = BTreeSet::new();
    for tgt in slots.get(&source).unwrap_or(&empty).iter().flatten() {
        if is_old(*tgt) && alive(*tgt, t0 + 1) {
            o_cum.insert(*tgt);
        }
    }
    let mut young_layers = vec![y_cum.clone()];
    let mut old_layers = vec![o_cum.clone()];

    let half = (d / 2) as usize;
    for k in 1..=params.n as usize {
        let inform_y = t0 + 2 * k as u64;
        // step 1: uninformed young with a second-half request into O_{k-1}
        let new_y: BTreeSet<NodeId> = young
            .iter()
            .filter(|v| !y_cum.contains(v) && alive(**v, inform_y))
            .filter(|v| {
                slots.get(v).unwrap_or(&empty)[half..].iter().any(|s| {
                    s.is_some_and(|u| o_cum.contains(&u) && alive(u, inform_y - 1))
                })
            })
            .copied()
            .collect();
        // step 2: uninformed old hit by a first-half request of a new young
        let mut new_o: BTreeSet<NodeId> = BTreeSet::new();
        for v in &new_y {
            for s in slots.get(v).unwrap_or(&empty)[..half].iter().flatten() {
                if is_old(*s) && !o_cum.contains(s) && alive(*s, inform_y + 1) {
                    new_o.insert(*s);
                }
            }
        }
        if new_y.is_empty() && new_o.is_empty() {
            break;
        }
        y_cum.extend(new_y);
        o_cum.extend(new_o);
        young_layers.push(y_cum.clone());
        old_layers.push(o_cum.clone());
    }

    Ok(OnionLayers { source, t0, young_layers, old_layers, classes })
}

/// Layer sizes per phase: trial, phase, |Y_k|, |O_k|.
pub fn write_layers_csv<W: Write>(mut w: W, runs: &[(u64, &OnionLayers)]) -> Result<()> {
    writeln!(w, "# churngraph onion v1")?;
    writeln!(w, "trial,phase,y_size,o_size")?;
    for (trial, layers) in runs {
        for k in 0..layers.phases() {
            let (y, o) = layers.layer(k);
            writeln!(w, "{trial},{k},{},{}", y.len(), o.len())?;
        }
    }
    Ok(())
}
