use churngraph::engine::run_model;
use churngraph::flooding::{flood_sync, FloodOptions};
use churngraph::model::{snapshot_at, ModelKind, ModelParams, NodeId, Time};
fn main() {
    // d = 1 stall rate, plus diagnostics on the first few stalls
    let params = ModelParams::streaming(ModelKind::Sdg, 1000, 1).unwrap();
    let trials = 4000u64;
    let mut stalls = 0u64;
    for trial in 0..trials {
        let traj = run_model(params, 3000, (1u64) << 32 | trial).unwrap();
        let trace = flood_sync(&traj, Time::from_round(1000), NodeId(1000),
            FloodOptions { max_steps: Some(2000), ..Default::default() }).unwrap();
        if trace.completed_at.is_none() && trace.max_informed() <= 2 { stalls += 1; }
    }
    println!("d=1: {stalls}/{trials} stalls (rate {:.4})", stalls as f64 / trials as f64);

    // d = 2: how often does the source's neighborhood stay at <= 3 for the
    // first few rounds, and what breaks it?
    let params = ModelParams::streaming(ModelKind::Sdg, 1000, 2).unwrap();
    let mut by_round = [0u64; 6];
    for trial in 0..4000u64 {
        let traj = run_model(params, 3000, (9u64) << 32 | trial).unwrap();
        let trace = flood_sync(&traj, Time::from_round(1000), NodeId(1000),
            FloodOptions { max_steps: Some(5), stop_at_completion: false, keep_sets: false }).unwrap();
        for (i, s) in trace.samples.iter().enumerate().take(6) {
            if trace.samples.iter().take(i + 1).all(|x| x.informed <= 3) {
                by_round[i] += 1;
            }
        }
    }
    println!("d=2: trials with |I| <= 3 through offset k: {by_round:?}");
    // and the isolated-at-snapshot fraction for reference
    let traj = run_model(params, 3000, 1).unwrap();
    let snap = snapshot_at(&traj, Time::from_round(2000)).unwrap();
    let iso = churngraph::metrics::isolated_count(&snap);
    println!("d=2 isolated fraction at one snapshot: {}", iso as f64 / snap.node_count() as f64);
}
