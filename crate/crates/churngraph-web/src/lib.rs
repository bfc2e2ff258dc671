//! Browser bindings for the interactive demo page (see `www/`): three
//! operations over freshly simulated trajectories, each returning JSON for
//! the page to plot. Everything is seeded and deterministic, so a URL with
//! the same parameters always shows the same picture.
//!
//! The string-in/JSON-out core lives in [`ops`] and is target-independent;
//! the `#[wasm_bindgen]` exports are thin wrappers over it.

use wasm_bindgen::prelude::*;

pub mod ops {
    use churngraph::engine::run_model;
    use churngraph::flooding::{flood, FloodOptions, FloodVariant};
    use churngraph::harness::Rule;
    use churngraph::metrics::{degree_stats, h_out_sampled, isolated_count};
    use churngraph::model::{
        snapshot_at, Event, ModelKind, ModelParams, NodeId, Time, Trajectory,
    };

    const MAX_N: u64 = 4096;
    const MAX_D: u32 = 64;

    fn params_for(model: &str, n: u64, d: u32) -> Result<ModelParams, String> {
        if !(2..=MAX_N).contains(&n) {
            return Err(format!("n must be in 2..={MAX_N}"));
        }
        if !(1..=MAX_D).contains(&d) {
            return Err(format!("d must be in 1..={MAX_D}"));
        }
        let kind = ModelKind::parse(model).map_err(|e| e.to_string())?;
        if kind.is_streaming() {
            ModelParams::streaming(kind, n, d).map_err(|e| e.to_string())
        } else {
            ModelParams::poisson(kind, n, d).map_err(|e| e.to_string())
        }
    }

    /// Simulate into steady state; returns the trajectory and the
    /// observation instant (round 2n, or the event-index point 7 n ln n).
    fn simulate_steady(
        params: ModelParams,
        seed: u64,
        extra: u64,
    ) -> Result<(Trajectory, Time), String> {
        let n = params.n;
        if params.kind.is_streaming() {
            let traj = run_model(params, 2 * n + extra, seed).map_err(|e| e.to_string())?;
            Ok((traj, Time::from_round(2 * n)))
        } else {
            let r0 = Rule::parse("7nlogn").unwrap().eval_ceil(n) as usize;
            let traj =
                run_model(params, r0 as u64 + extra, seed).map_err(|e| e.to_string())?;
            let t0 = traj.time_of_event(r0.min(traj.len())).map_err(|e| e.to_string())?;
            Ok((traj, t0))
        }
    }

    fn first_birth_at_or_after(traj: &Trajectory, t0: Time) -> Result<(Time, NodeId), String> {
        for ev in traj.events() {
            if ev.time >= t0 {
                if let Event::Birth { id, .. } = ev.event {
                    return Ok((ev.time, id));
                }
            }
        }
        Err("no birth after t0".into())
    }

    pub fn snapshot_stats(model: &str, n: u64, d: u32, seed: u64) -> Result<String, String> {
        let params = params_for(model, n, d)?;
        let (traj, t0) = simulate_steady(params, seed, 1)?;
        let snap = snapshot_at(&traj, t0).map_err(|e| e.to_string())?;
        let stats = degree_stats(&snap);
        Ok(serde_json::json!({
            "v": "v1",
            "model": model,
            "time": t0.value(),
            "nodes": snap.node_count(),
            "edges": snap.edge_count(),
            "isolated": isolated_count(&snap),
            "mean_degree": stats.mean,
            "max_degree": stats.max,
            "histogram": stats.histogram,
        })
        .to_string())
    }

    pub fn flood_curve(
        model: &str,
        n: u64,
        d: u32,
        seed: u64,
        variant: &str,
        max_steps: u32,
    ) -> Result<String, String> {
        let params = params_for(model, n, d)?;
        let steps = max_steps.clamp(4, 512) as u64;
        let extra = if params.kind.is_streaming() { steps + 2 } else { 3 * steps + 64 };
        let (t_steady, variant) = (
            simulate_steady(params, seed, extra)?,
            FloodVariant::parse(variant).map_err(|e| e.to_string())?,
        );
        let (traj, t0_hint) = t_steady;
        let (t0, source) = first_birth_at_or_after(&traj, t0_hint)?;
        let opts = FloodOptions {
            max_steps: Some(steps),
            keep_sets: false,
            stop_at_completion: false,
        };
        let trace = flood(&traj, variant, t0, source, opts).map_err(|e| e.to_string())?;
        let rows: Vec<serde_json::Value> = trace
            .samples
            .iter()
            .map(|s| {
                serde_json::json!({
                    "t": s.time.value() - t0.value(),
                    "alive": s.alive,
                    "informed": s.informed,
                    "fraction":
                        if s.alive == 0 { 0.0 } else { s.informed as f64 / s.alive as f64 },
                })
            })
            .collect();
        Ok(serde_json::json!({
            "v": "v1",
            "model": model,
            "variant": variant.as_str(),
            "source": source.0,
            "t0": t0.value(),
            "completed_at_offset": trace.completion_offset(),
            "rows": rows,
        })
        .to_string())
    }

    pub fn expansion_probe(
        model: &str,
        n: u64,
        d: u32,
        seed: u64,
        samples: u32,
    ) -> Result<String, String> {
        let params = params_for(model, n, d)?;
        let (traj, t0) = simulate_steady(params, seed, 1)?;
        let snap = snapshot_at(&traj, t0).map_err(|e| e.to_string())?;
        let half = (snap.node_count() / 2).max(1);
        let samples = samples.clamp(16, 100_000) as u64;
        let mut rng = churngraph::trial_rng(seed, 1);
        // per-bucket minima give the page a curve rather than a single number
        let buckets = 8usize.min(half);
        let mut curve = Vec::new();
        for b in 0..buckets {
            let lo = (1 + b * half / buckets).max(1);
            let hi = (((b + 1) * half) / buckets).max(lo).min(half);
            let rep = h_out_sampled(&snap, lo, hi, samples / buckets as u64 + 1, &mut rng)
                .map_err(|e| e.to_string())?;
            curve.push(serde_json::json!({
                "min_size": lo, "max_size": hi, "h_out": rep.h_out,
                "witness_size": rep.witness.len(),
            }));
        }
        let mut rng = churngraph::trial_rng(seed, 2);
        let overall =
            h_out_sampled(&snap, 1, half, samples, &mut rng).map_err(|e| e.to_string())?;
        Ok(serde_json::json!({
            "v": "v1",
            "model": model,
            "nodes": snap.node_count(),
            "h_out_sampled": overall.h_out,
            "witness_size": overall.witness.len(),
            "curve": curve,
        })
        .to_string())
    }
}

/// Degree histogram, isolated-node count, and basic sizes of a steady-state
/// snapshot.
#[wasm_bindgen]
pub fn snapshot_stats(model: &str, n: u64, d: u32, seed: u64) -> Result<String, JsValue> {
    ops::snapshot_stats(model, n, d, seed).map_err(|e| JsValue::from_str(&e))
}

/// Informed-fraction curve of one flooding run from the node born at the
/// steady-state point.
#[wasm_bindgen]
pub fn flood_curve(
    model: &str,
    n: u64,
    d: u32,
    seed: u64,
    variant: &str,
    max_steps: u32,
) -> Result<String, JsValue> {
    ops::flood_curve(model, n, d, seed, variant, max_steps).map_err(|e| JsValue::from_str(&e))
}

/// Sampled vertex-expansion probe: worst boundary/size ratio per subset-size
/// bucket, plus the overall sampled h_out.
#[wasm_bindgen]
pub fn expansion_probe(
    model: &str,
    n: u64,
    d: u32,
    seed: u64,
    samples: u32,
) -> Result<String, JsValue> {
    ops::expansion_probe(model, n, d, seed, samples).map_err(|e| JsValue::from_str(&e))
}
