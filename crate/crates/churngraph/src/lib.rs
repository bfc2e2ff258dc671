//! Simulator and measurement toolkit for sparse dynamic random graphs with
//! node churn.
//!
//! The crate covers four graph dynamics built from two churn processes
//! (deterministic streaming and Poisson arrivals with exponential lifetimes)
//! crossed with an optional edge-regeneration rule:
//!
//! | model  | churn     | regeneration |
//! |--------|-----------|--------------|
//! | `sdg`  | streaming | no           |
//! | `sdgr` | streaming | yes          |
//! | `pdg`  | Poisson   | no           |
//! | `pdgr` | Poisson   | yes          |
//!
//! On top of the simulators sit three flooding processes (synchronous,
//! asynchronous, discretized), vertex-expansion and isolation metrics with
//! small-graph brute-force oracles, the onion-skin diagnostic process, and a
//! seeded multi-trial experiment harness.
//!
//! Everything is deterministic given a seed: trajectories are event logs that
//! replay bit-identically, and all downstream measurements are pure functions
//! of a trajectory.

pub mod churn;
pub mod engine;
pub mod flooding;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod onionskin;
pub mod stats;

use model::NodeId;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("time {t} is outside the trajectory range [0, {last}]")]
    TimeOutOfRange { t: f64, last: f64 },
    #[error("unknown node id {0}")]
    UnknownNode(NodeId),
    #[error("invalid interval: start {start} must be strictly before end {end}")]
    InvalidInterval { start: f64, end: f64 },
    #[error("node {id} is not alive at time {t}")]
    NodeNotAlive { id: NodeId, t: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("graph has {nodes} nodes; exact expansion scan is limited to {max}")]
    GraphTooLarge { nodes: usize, max: usize },
    #[error("invalid subset size range [{min}, {max}] for {nodes} nodes")]
    InvalidSizeRange { min: usize, max: usize, nodes: usize },
    #[error("trajectory horizon too short: {0}")]
    HorizonTooShort(String),
    #[error("onion-skin process requires an even d, got {0}")]
    OddD(u32),
    #[error("source {id} was not born at t0 {t0}")]
    SourceNotBornAtT0 { id: NodeId, t0: f64 },
    #[error("operation requires a {expected} trajectory, got {got}")]
    UnsupportedModel { expected: &'static str, got: &'static str },
    #[error("no sample recorded at time {0}")]
    UnsampledTime(f64),
    #[error("infeasible age parameter: {0}")]
    InfeasibleAge(String),
    #[error("cannot parse rule '{0}'")]
    BadRule(String),
    #[error("malformed trajectory: {0}")]
    MalformedTrajectory(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Deterministic per-trial generator. ChaCha8 is counter-based, so streams
/// are reproducible across platforms and independent across sub-seeds.
pub type TrialRng = rand_chacha::ChaCha8Rng;

/// Derive the generator for one trial: `seed_i = base_seed XOR trial_index`.
pub fn trial_rng(base_seed: u64, trial: u64) -> TrialRng {
    use rand::SeedableRng;
    TrialRng::seed_from_u64(base_seed ^ trial)
}
