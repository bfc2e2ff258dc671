//! Node birth/death event streams for both churn processes, independent of
//! topology.
//!
//! Streaming churn is deterministic: one birth per round, lifetime exactly
//! `n` rounds. Poisson churn is simulated as its jump chain: with `N` alive
//! nodes the wait to the next event is Exponential(N*mu + lambda), the event
//! is a birth with probability lambda/(N*mu + lambda), and a death hits a
//! uniformly random alive node. By memorylessness this is distributionally
//! exact for i.i.d. exponential lifetimes while keeping O(1) state per event.

use rand::Rng;

use crate::model::{NodeId, Time};
use crate::{Error, Result};

/// Streaming churn: lifetime in rounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StreamingChurnParams {
    pub n: u64,
}

impl StreamingChurnParams {
    pub fn new(n: u64) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidParams("lifetime n must be >= 1".into()));
        }
        Ok(StreamingChurnParams { n })
    }
}

/// Poisson churn: arrival rate lambda, per-node death rate mu.
/// The canonical setting is lambda = 1, mu = 1/n.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoissonChurnParams {
    pub lambda: f64,
    pub mu: f64,
}

impl PoissonChurnParams {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite() && mu > 0.0 && mu.is_finite()) {
            return Err(Error::InvalidParams(
                "lambda and mu must be positive and finite".into(),
            ));
        }
        Ok(PoissonChurnParams { lambda, mu })
    }

    pub fn canonical(n: u64) -> Result<Self> {
        Self::new(1.0, 1.0 / n as f64)
    }

    /// Expected steady-state population lambda/mu.
    pub fn expected_n(&self) -> f64 {
        self.lambda / self.mu
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChurnKind {
    Birth(NodeId),
    Death(NodeId),
}

/// One point of change of the node set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChurnEvent {
    pub time: Time,
    pub kind: ChurnKind,
}

/// Deterministic streaming schedule over `horizon` rounds.
///
/// Round t carries one birth (the node with id t); from round n+1 on it also
/// carries the death of the unique oldest node, the one born at round t - n.
/// The death precedes the birth within the round.
pub fn streaming_events(params: StreamingChurnParams, horizon: u64) -> Vec<ChurnEvent> {
    let mut events = Vec::with_capacity(horizon as usize * 2);
    for t in 1..=horizon {
        let time = Time::from_round(t);
        if t > params.n {
            events.push(ChurnEvent { time, kind: ChurnKind::Death(NodeId(t - params.n)) });
        }
        events.push(ChurnEvent { time, kind: ChurnKind::Birth(NodeId(t)) });
    }
    events
}

/// Outcome of one jump-chain draw.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NextEvent {
    Birth,
    /// Death of the alive node at this uniformly drawn position.
    Death { victim_index: usize },
}

/// Sample the next jump-chain transition given the current population.
///
/// Draw order is pinned for reproducibility: waiting time, then event kind,
/// then (for deaths) the victim position.
pub fn poisson_next_event<R: Rng>(
    alive_count: usize,
    params: PoissonChurnParams,
    rng: &mut R,
) -> (f64, NextEvent) {
    let rate = alive_count as f64 * params.mu + params.lambda;
    let dt = sample_exp(rate, rng);
    let p_birth = params.lambda / rate;
    let kind = if alive_count == 0 || rng.random::<f64>() < p_birth {
        NextEvent::Birth
    } else {
        NextEvent::Death { victim_index: rng.random_range(0..alive_count) }
    };
    (dt, kind)
}

/// Exponential(rate) via inverse transform; strictly positive.
pub fn sample_exp<R: Rng>(rate: f64, rng: &mut R) -> f64 {
    assert!(rate > 0.0 && rate.is_finite(), "exponential rate must be positive");
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return -u.ln() / rate;
        }
    }
}

/// Jump-chain schedule of `r_max` churn events with strictly increasing
/// continuous times. Ids are assigned densely in birth order.
pub fn poisson_events<R: Rng>(
    params: PoissonChurnParams,
    r_max: u64,
    rng: &mut R,
) -> Vec<ChurnEvent> {
    let mut events = Vec::with_capacity(r_max as usize);
    let mut alive: Vec<NodeId> = Vec::new();
    let mut next_id = 1u64;
    let mut t = 0.0f64;
    for _ in 0..r_max {
        let (dt, kind) = poisson_next_event(alive.len(), params, rng);
        t += dt;
        let time = Time::new(t);
        match kind {
            NextEvent::Birth => {
                let id = NodeId(next_id);
                next_id += 1;
                alive.push(id);
                events.push(ChurnEvent { time, kind: ChurnKind::Birth(id) });
            }
            NextEvent::Death { victim_index } => {
                let id = alive.swap_remove(victim_index);
                events.push(ChurnEvent { time, kind: ChurnKind::Death(id) });
            }
        }
    }
    events
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;
    use crate::trial_rng;
    use std::collections::BTreeSet;

    #[test]
    fn streaming_no_deaths_before_lifetime() {
        let params = StreamingChurnParams::new(3).unwrap();
        let ev = streaming_events(params, 3);
        assert_eq!(ev.len(), 3);
        assert!(ev.iter().all(|e| matches!(e.kind, ChurnKind::Birth(_))));
        let births: Vec<u64> = ev
            .iter()
            .map(|e| match e.kind {
                ChurnKind::Birth(id) => id.0,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(births, vec![1, 2, 3]);
    }

    #[test]
    fn streaming_lifetime_exact() {
        let params = StreamingChurnParams::new(3).unwrap();
        let ev = streaming_events(params, 5);
        let deaths: Vec<(u64, u64)> = ev
            .iter()
            .filter_map(|e| match e.kind {
                ChurnKind::Death(id) => Some((e.time.round_index(), id.0)),
                _ => None,
            })
            .collect();
        assert_eq!(deaths, vec![(4, 1), (5, 2)]);
    }

    #[test]
    fn streaming_population_fixed_after_warmup() {
        let params = StreamingChurnParams::new(100).unwrap();
        let ev = streaming_events(params, 10_000);
        let mut alive: BTreeSet<NodeId> = BTreeSet::new();
        let mut round_events = std::collections::BTreeMap::<u64, (u32, u32)>::new();
        for e in &ev {
            let slot = round_events.entry(e.time.round_index()).or_insert((0, 0));
            match e.kind {
                ChurnKind::Birth(id) => {
                    alive.insert(id);
                    slot.0 += 1;
                }
                ChurnKind::Death(id) => {
                    assert!(alive.remove(&id), "death of non-alive node");
                    slot.1 += 1;
                }
            }
            let t = e.time.round_index();
            let expect = t.min(100);
            // population check only meaningful at end of a round; births come
            // after deaths so checking after a birth is safe.
            if matches!(e.kind, ChurnKind::Birth(_)) {
                assert_eq!(alive.len() as u64, expect, "at round {t}");
            }
        }
        for (t, (b, d)) in round_events {
            assert_eq!(b, 1);
            assert_eq!(d, u32::from(t >= 101));
        }
    }

    #[test]
    fn streaming_is_deterministic() {
        let params = StreamingChurnParams::new(7).unwrap();
        assert_eq!(streaming_events(params, 50), streaming_events(params, 50));
    }

    #[test]
    fn next_event_from_empty_network_is_birth() {
        let params = PoissonChurnParams::new(1.0, 0.5).unwrap();
        let mut rng = trial_rng(1, 0);
        for _ in 0..100 {
            let (dt, kind) = poisson_next_event(0, params, &mut rng);
            assert!(dt > 0.0);
            assert_eq!(kind, NextEvent::Birth);
        }
    }

    #[test]
    fn birth_probability_half_at_equilibrium() {
        // lambda = 1, mu = 1/n, N = n: P(birth) = lambda/(N*mu + lambda) = 1/2.
        let n = 1000usize;
        let params = PoissonChurnParams::canonical(n as u64).unwrap();
        let mut rng = trial_rng(7, 0);
        let draws = 200_000u64;
        let births = (0..draws)
            .filter(|_| matches!(poisson_next_event(n, params, &mut rng).1, NextEvent::Birth))
            .count() as u64;
        let z = stats::z_score(births, draws, 0.5);
        assert!(z.abs() < 4.0, "z = {z}");
    }

    #[test]
    fn birth_probability_off_equilibrium() {
        // N = 900, lambda = 1, mu = 1/1000: P(birth) = 1/1.9.
        let params = PoissonChurnParams::new(1.0, 1e-3).unwrap();
        let p = 1.0 / 1.9;
        let mut rng = trial_rng(11, 0);
        let draws = 200_000u64;
        let births = (0..draws)
            .filter(|_| matches!(poisson_next_event(900, params, &mut rng).1, NextEvent::Birth))
            .count() as u64;
        let z = stats::z_score(births, draws, p);
        assert!(z.abs() < 4.0, "z = {z}");
    }

    #[test]
    fn single_event_is_birth_at_exp_time() {
        let params = PoissonChurnParams::new(1.0, 1e-3).unwrap();
        let mut rng = trial_rng(3, 0);
        let ev = poisson_events(params, 1, &mut rng);
        assert_eq!(ev.len(), 1);
        assert!(matches!(ev[0].kind, ChurnKind::Birth(NodeId(1))));
        assert!(ev[0].time.value() > 0.0);
    }

    #[test]
    fn poisson_times_strictly_increase_and_population_steps_by_one() {
        let params = PoissonChurnParams::canonical(50).unwrap();
        let mut rng = trial_rng(5, 0);
        let ev = poisson_events(params, 20_000, &mut rng);
        let mut alive = BTreeSet::new();
        let mut last = Time::ZERO;
        for e in &ev {
            assert!(e.time > last);
            last = e.time;
            let before = alive.len() as i64;
            match e.kind {
                ChurnKind::Birth(id) => assert!(alive.insert(id)),
                ChurnKind::Death(id) => assert!(alive.remove(&id)),
            }
            assert_eq!((alive.len() as i64 - before).abs(), 1);
        }
    }

    #[test]
    fn completed_lifetimes_are_exponential() {
        // KS at alpha = 0.01 on >= 10^4 completed lifetimes, lambda=1, mu=1/n.
        let n = 100u64;
        let params = PoissonChurnParams::canonical(n).unwrap();
        let mut rng = trial_rng(13, 0);
        let ev = poisson_events(params, 60_000, &mut rng);
        let mut born = std::collections::BTreeMap::new();
        let mut lifetimes = Vec::new();
        for e in &ev {
            match e.kind {
                ChurnKind::Birth(id) => {
                    born.insert(id, e.time.value());
                }
                ChurnKind::Death(id) => {
                    lifetimes.push(e.time.value() - born[&id]);
                }
            }
        }
        assert!(lifetimes.len() >= 10_000, "only {} lifetimes", lifetimes.len());
        let (d, crit, pass) = stats::ks_exponential_001(&lifetimes, params.mu);
        assert!(pass, "KS d = {d} >= {crit}");
    }

    #[test]
    fn oldest_age_bound_in_events() {
        // At event r >= 7 n ln n, all alive nodes were born within the last
        // 7 n ln n events in nearly all trials.
        let n = 50u64;
        let params = PoissonChurnParams::canonical(n).unwrap();
        let window = (7.0 * n as f64 * (n as f64).ln()).ceil() as usize; // ~1370
        let r_max = 2 * window;
        let trials = 100;
        let mut ok = 0;
        for trial in 0..trials {
            let mut rng = trial_rng(17, trial);
            let ev = poisson_events(params, r_max as u64, &mut rng);
            let mut birth_event = std::collections::BTreeMap::new();
            let mut alive = BTreeSet::new();
            for (r, e) in ev.iter().enumerate() {
                match e.kind {
                    ChurnKind::Birth(id) => {
                        birth_event.insert(id, r);
                        alive.insert(id);
                    }
                    ChurnKind::Death(id) => {
                        alive.remove(&id);
                    }
                }
            }
            let r = r_max - 1;
            if alive.iter().all(|id| birth_event[id] + window > r) {
                ok += 1;
            }
        }
        assert!(ok >= 99, "oldest-age bound held in only {ok}/{trials} trials");
    }
}
