//! The three flooding processes over a recorded trajectory.
//!
//! All variants advance on a unit-spaced grid from the start time t0 and
//! evaluate neighborhoods in the snapshot one grid step back, matching a
//! one-time-unit message transmission:
//!
//! - `sync` (round-based): I_t = (I_{t-1} ∪ ∂(I_{t-1})) ∩ N_t, complete when
//!   I_t covers N_{t-1} ∩ N_t (the node born in round t is exempt);
//! - `async`: I_t = ((∪_{t'<t} I_{t'}) ∪ ∂(I_{t-1})) ∩ N_t, complete when
//!   I_t ⊇ N_t;
//! - `discretized`: transmission u → v in (t-1, t] additionally requires u
//!   and v alive through the whole interval with the edge present throughout
//!   (see [`crate::model::edge_present_throughout`]); complete when I_t ⊇ N_t.
//!
//! Since an edge can vanish only through the death of an endpoint, requiring
//! "edge present at t-1 and both endpoints alive at t" is equivalent to the
//! interval condition; the paired-run tests check this against the
//! event-scan oracle directly.
//!
//! A completion with an empty informed set is vacuous and does not count: an
//! extinct broadcast never completes.

use std::collections::BTreeSet;
use std::io::Write;

use crate::model::{set_digest, Event, NodeId, Replayer, Time, Trajectory};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FloodVariant {
    Sync,
    Async,
    Discretized,
}

impl FloodVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            FloodVariant::Sync => "sync",
            FloodVariant::Async => "async",
            FloodVariant::Discretized => "discretized",
        }
    }

    pub fn parse(s: &str) -> Result<FloodVariant> {
        match s {
            "sync" => Ok(FloodVariant::Sync),
            "async" => Ok(FloodVariant::Async),
            "discretized" => Ok(FloodVariant::Discretized),
            other => Err(Error::InvalidParams(format!("unknown variant '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FloodOptions {
    /// Grid steps to run past t0. `None` runs until the last event time.
    /// With a cap the process may run into the frozen region past the log.
    pub max_steps: Option<u64>,
    /// Retain the full informed set per sample (needed for containment
    /// checks; sizes and digests are always recorded).
    pub keep_sets: bool,
    /// Stop at the first completion instead of sampling through the cap.
    pub stop_at_completion: bool,
}

impl Default for FloodOptions {
    fn default() -> Self {
        FloodOptions { max_steps: None, keep_sets: false, stop_at_completion: true }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FloodSample {
    pub time: Time,
    pub alive: u64,
    pub informed: u64,
    pub digest: u64,
}

/// Time-indexed informed-set evolution of one flooding run.
#[derive(Clone, Debug)]
pub struct FloodTrace {
    pub variant: FloodVariant,
    pub source: NodeId,
    pub t0: Time,
    pub samples: Vec<FloodSample>,
    pub completed_at: Option<Time>,
    /// Full informed sets, parallel to `samples`; present iff requested.
    pub sets: Option<Vec<BTreeSet<NodeId>>>,
}

impl FloodTrace {
    /// Completion offset in grid steps, if the run completed.
    pub fn completion_offset(&self) -> Option<f64> {
        self.completed_at.map(|t| t.value() - self.t0.value())
    }

    pub fn sample_at(&self, t: Time) -> Option<&FloodSample> {
        self.samples.iter().find(|s| s.time == t)
    }

    pub fn max_informed(&self) -> u64 {
        self.samples.iter().map(|s| s.informed).max().unwrap_or(0)
    }

    pub fn final_informed(&self) -> u64 {
        self.samples.last().map(|s| s.informed).unwrap_or(0)
    }
}

/// |I_t| / |N_t| at a sampled time.
pub fn informed_fraction(trace: &FloodTrace, t: Time) -> Result<f64> {
    let s = trace.sample_at(t).ok_or(Error::UnsampledTime(t.value()))?;
    if s.alive == 0 {
        return Ok(0.0);
    }
    Ok(s.informed as f64 / s.alive as f64)
}

pub fn flood_sync(
    traj: &Trajectory,
    t0: Time,
    source: NodeId,
    opts: FloodOptions,
) -> Result<FloodTrace> {
    if !t0.is_integral() {
        return Err(Error::InvalidParams("sync flooding needs an integral t0".into()));
    }
    run_flood(traj, t0, source, opts, FloodVariant::Sync)
}

pub fn flood_async(
    traj: &Trajectory,
    t0: Time,
    source: NodeId,
    opts: FloodOptions,
) -> Result<FloodTrace> {
    run_flood(traj, t0, source, opts, FloodVariant::Async)
}

pub fn flood_discretized(
    traj: &Trajectory,
    t0: Time,
    source: NodeId,
    opts: FloodOptions,
) -> Result<FloodTrace> {
    run_flood(traj, t0, source, opts, FloodVariant::Discretized)
}

pub fn flood(
    traj: &Trajectory,
    variant: FloodVariant,
    t0: Time,
    source: NodeId,
    opts: FloodOptions,
) -> Result<FloodTrace> {
    match variant {
        FloodVariant::Sync => flood_sync(traj, t0, source, opts),
        FloodVariant::Async => flood_async(traj, t0, source, opts),
        FloodVariant::Discretized => flood_discretized(traj, t0, source, opts),
    }
}

fn run_flood(
    traj: &Trajectory,
    t0: Time,
    source: NodeId,
    opts: FloodOptions,
    variant: FloodVariant,
) -> Result<FloodTrace> {
    if !traj.is_alive_at(source, t0)? {
        return Err(Error::NodeNotAlive { id: source, t: t0.value() });
    }
    let mut rp = Replayer::new(traj);
    rp.advance_to(t0)?;
    debug_assert!(rp.state().is_alive(source));

    let mut informed: BTreeSet<NodeId> = BTreeSet::from([source]);
    let mut ever: BTreeSet<NodeId> = informed.clone();
    let mut samples = Vec::new();
    let mut sets: Option<Vec<BTreeSet<NodeId>>> = opts.keep_sets.then(Vec::new);
    let mut completed_at = None;

    let record =
        |samples: &mut Vec<FloodSample>, sets: &mut Option<Vec<_>>, t: Time, alive: u64, i: &BTreeSet<NodeId>| {
            samples.push(FloodSample {
                time: t,
                alive,
                informed: i.len() as u64,
                digest: set_digest(i.iter()),
            });
            if let Some(sets) = sets {
                sets.push(i.clone());
            }
        };
    record(&mut samples, &mut sets, t0, rp.state().alive_count() as u64, &informed);

    let last = traj.last_time();
    // epoch-stamped scratch for boundary collection (ids are dense)
    let mut stamp = vec![0u32; traj.node_count() + 2];
    let mut boundary: Vec<NodeId> = Vec::new();
    let mut m = 0u64;
    loop {
        m += 1;
        let t = Time::new(t0.value() + m as f64);
        match opts.max_steps {
            Some(cap) if m > cap => break,
            None if t > last => break,
            _ => {}
        }
        let t_prev = Time::new(t0.value() + (m - 1) as f64);

        // neighborhoods in the snapshot at t-1 (current replay position)
        let epoch = m as u32;
        boundary.clear();
        let state = rp.state();
        for &u in &informed {
            // under the discretized rule only senders that survive the whole
            // interval transmit
            if variant == FloodVariant::Discretized && !traj.alive_throughout(u, t_prev, t)? {
                continue;
            }
            for v in state.neighbors(u) {
                let cell = &mut stamp[v.0 as usize];
                if *cell != epoch {
                    *cell = epoch;
                    boundary.push(v);
                }
            }
        }

        let births_in_window = {
            let from = rp.position();
            rp.advance_to(t)?;
            traj.events()[from..rp.position()]
                .iter()
                .filter(|ev| matches!(ev.event, Event::Birth { .. }))
                .count()
        };
        let state = rp.state();

        let retained: &BTreeSet<NodeId> =
            if variant == FloodVariant::Async { &ever } else { &informed };
        let next: BTreeSet<NodeId> = retained
            .iter()
            .chain(boundary.iter())
            .filter(|id| state.is_alive(**id))
            .copied()
            .collect();
        informed = next;
        ever.extend(informed.iter().copied());

        record(&mut samples, &mut sets, t, state.alive_count() as u64, &informed);

        // completion target: everyone alive at t for the continuous variants;
        // N_{t-1} ∩ N_t = {alive at t, born at or before t-1} for sync
        let complete = !informed.is_empty()
            && match variant {
                FloodVariant::Sync => {
                    informed.len() + births_in_window >= state.alive_count()
                        && state.alive_ids().all(|id| {
                            traj.birth_time(id).is_ok_and(|b| b > t_prev)
                                || informed.contains(&id)
                        })
                }
                _ => informed.len() == state.alive_count(),
            };
        if complete && completed_at.is_none() {
            completed_at = Some(t);
            if opts.stop_at_completion {
                break;
            }
        }
        if informed.is_empty() {
            break; // extinct: the informed set can never regrow
        }
    }

    Ok(FloodTrace { variant, source, t0, samples, completed_at, sets })
}

/// Trace export: one CSV row per sample, with the owning trial index.
/// Columns: trial, variant, t_offset, alive, informed, fraction, completed.
pub fn write_traces_csv<W: Write>(mut w: W, traces: &[(u64, &FloodTrace)]) -> Result<()> {
    writeln!(w, "# churngraph trace v1")?;
    writeln!(w, "trial,variant,t_offset,alive,informed,fraction,completed")?;
    for (trial, trace) in traces {
        for s in &trace.samples {
            let offset = s.time.value() - trace.t0.value();
            let offset_str = if offset.fract() == 0.0 {
                format!("{}", offset as u64)
            } else {
                format!("{offset}")
            };
            let fraction = if s.alive == 0 { 0.0 } else { s.informed as f64 / s.alive as f64 };
            let completed = u8::from(trace.completed_at.is_some_and(|c| s.time >= c));
            writeln!(
                w,
                "{trial},{},{offset_str},{},{},{fraction},{completed}",
                trace.variant.as_str(),
                s.alive,
                s.informed,
            )?;
        }
    }
    Ok(())
}
