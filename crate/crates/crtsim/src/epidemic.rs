//! Discrete-time SI spread on a cluster pair.
//!
//! Every infected node contacts neighbors each step: one uniformly random
//! neighbor under unit infectivity, all neighbors under degree infectivity.
//! Each contacted susceptible is infected at the next step with the
//! infector's arm-specific probability; updates are synchronous. A pair's
//! trial ends at the first step where the pair-wide infected fraction
//! reaches the stop fraction.

use std::io::{self, Write};

use rand::Rng;
use thiserror::Error;

use crate::graph::Network;
use crate::mixing::{Arm, ClusterPair};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid spread parameters: {0}")]
    InvalidParams(String),
    #[error("seed nodes must be distinct and in range")]
    BadSeeds,
    #[error(
        "epidemic stalled at {infected}/{nodes} infected after {steps} steps \
         (stop fraction {stop_fraction})"
    )]
    StalledEpidemic {
        infected: usize,
        nodes: usize,
        steps: usize,
        stop_fraction: f64,
    },
}

/// How many neighbors an infected node contacts per step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Infectivity {
    /// One uniformly random neighbor; contacts landing on an already
    /// infected neighbor are wasted.
    Unit,
    /// Every neighbor.
    Degree,
}

impl Infectivity {
    pub fn label(self) -> &'static str {
        match self {
            Infectivity::Unit => "unit",
            Infectivity::Degree => "degree",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpreadParams {
    /// Transmission probability for control-arm infectors.
    pub p0: f64,
    /// Transmission probability for treatment-arm infectors.
    pub p1: f64,
    pub infectivity: Infectivity,
    /// Initially infected share per cluster.
    pub seed_fraction: f64,
    /// Cumulative pair-wide incidence ending the trial.
    pub stop_fraction: f64,
    /// Safety cap on simulated steps.
    pub max_steps: usize,
}

impl SpreadParams {
    /// Parameters with the standard seeding (1%), stopping (10%), and step
    /// cap (10 * n) conventions.
    pub fn standard(p0: f64, p1: f64, infectivity: Infectivity, cluster_size: usize) -> Self {
        SpreadParams {
            p0,
            p1,
            infectivity,
            seed_fraction: 0.01,
            stop_fraction: 0.10,
            max_steps: default_max_steps(cluster_size),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(0.0..=1.0).contains(&self.p0)
            || !(0.0..=1.0).contains(&self.p1)
            || self.p1 > self.p0
        {
            return Err(SimError::InvalidParams(format!(
                "need 0 <= p1 <= p0 <= 1, got p0={} p1={}",
                self.p0, self.p1
            )));
        }
        if !(self.seed_fraction > 0.0
            && self.seed_fraction < self.stop_fraction
            && self.stop_fraction <= 1.0)
        {
            return Err(SimError::InvalidParams(format!(
                "need 0 < seed fraction < stop fraction <= 1, got {} and {}",
                self.seed_fraction, self.stop_fraction
            )));
        }
        if self.max_steps == 0 {
            return Err(SimError::InvalidParams("max_steps must be positive".into()));
        }
        Ok(())
    }

    fn transmission(&self, arm: Arm) -> f64 {
        match arm {
            Arm::Control => self.p0,
            Arm::Treatment => self.p1,
        }
    }
}

pub fn default_max_steps(cluster_size: usize) -> usize {
    10 * cluster_size
}

/// Seeds per cluster: round(seed_fraction * n), at least one.
pub fn seeds_per_cluster(seed_fraction: f64, cluster_size: usize) -> usize {
    ((seed_fraction * cluster_size as f64).round() as usize).max(1)
}

/// Per-node infection times and end-of-trial summary for one pair.
#[derive(Debug, Clone)]
pub struct InfectionRecord {
    /// Step at which each node became infected; `None` = never infected.
    pub infected_at: Vec<Option<u32>>,
    /// Infected counts per arm at the end of the trial.
    pub final_count_by_arm: [usize; 2],
    /// Step at which the stop fraction was reached.
    pub end_time: u32,
}

impl InfectionRecord {
    /// Infected count of one arm at step `t` given the node arm labels.
    pub fn arm_count_at(&self, t: u32, arms: &[Arm], arm: Arm) -> usize {
        self.infected_at
            .iter()
            .zip(arms)
            .filter(|(time, a)| **a == arm && time.is_some_and(|ti| ti <= t))
            .count()
    }

    pub fn is_seed(&self, node: usize) -> bool {
        self.infected_at[node] == Some(0)
    }
}

/// When the process ends.
enum StopRule {
    /// Stop once the infected fraction reaches `stop_fraction`; stall out
    /// at `max_steps`.
    Incidence,
    /// Run exactly this many steps with no incidence rule; used for
    /// trajectory comparisons.
    Horizon(u32),
}

/// Runs SI spread on an arbitrary graph from an explicit seed set. The
/// lower-level entry point behind [`simulate_si`]; tests drive it directly.
pub fn spread<R: Rng + ?Sized>(
    graph: &Network,
    arms: &[Arm],
    seeds: &[usize],
    params: &SpreadParams,
    rng: &mut R,
) -> Result<InfectionRecord, SimError> {
    run_process(graph, arms, seeds, params, StopRule::Incidence, rng)
}

/// Runs the process for exactly `steps` steps (sooner only if no further
/// infection is possible), ignoring the stop fraction. The record's end
/// time is always `steps`.
pub fn spread_for_steps<R: Rng + ?Sized>(
    graph: &Network,
    arms: &[Arm],
    seeds: &[usize],
    params: &SpreadParams,
    steps: u32,
    rng: &mut R,
) -> Result<InfectionRecord, SimError> {
    run_process(graph, arms, seeds, params, StopRule::Horizon(steps), rng)
}

fn run_process<R: Rng + ?Sized>(
    graph: &Network,
    arms: &[Arm],
    seeds: &[usize],
    params: &SpreadParams,
    stop: StopRule,
    rng: &mut R,
) -> Result<InfectionRecord, SimError> {
    params.validate()?;
    let n = graph.node_count();
    if seeds.is_empty() || seeds.iter().any(|&s| s >= n) {
        return Err(SimError::BadSeeds);
    }
    let adjacency = graph.adjacency();
    let mut infected = vec![false; n];
    let mut infected_at: Vec<Option<u32>> = vec![None; n];
    let mut counts = [0usize; 2];
    // Deterministic processing order: seeds sorted, later arrivals appended
    // in node-id order per step.
    let mut order: Vec<usize> = seeds.to_vec();
    order.sort_unstable();
    order.dedup();
    if order.len() != seeds.len() {
        return Err(SimError::BadSeeds);
    }
    for &s in &order {
        infected[s] = true;
        infected_at[s] = Some(0);
        counts[arms[s].index()] += 1;
    }

    let stop_count = (params.stop_fraction * n as f64).ceil() as usize;
    let mut newly: Vec<usize> = Vec::new();
    let mut pending = vec![false; n];
    let mut t: u32 = 0;
    loop {
        match stop {
            StopRule::Incidence => {
                if counts[0] + counts[1] >= stop_count {
                    return Ok(InfectionRecord {
                        infected_at,
                        final_count_by_arm: counts,
                        end_time: t,
                    });
                }
                if t as usize >= params.max_steps {
                    return Err(SimError::StalledEpidemic {
                        infected: counts[0] + counts[1],
                        nodes: n,
                        steps: params.max_steps,
                        stop_fraction: params.stop_fraction,
                    });
                }
            }
            StopRule::Horizon(steps) => {
                if t >= steps || counts[0] + counts[1] == n {
                    return Ok(InfectionRecord {
                        infected_at,
                        final_count_by_arm: counts,
                        end_time: steps,
                    });
                }
            }
        }

        newly.clear();
        for &i in &order {
            let p = params.transmission(arms[i]);
            match params.infectivity {
                Infectivity::Unit => {
                    let neighbors = &adjacency[i];
                    if neighbors.is_empty() {
                        continue;
                    }
                    let j = neighbors[rng.random_range(0..neighbors.len())];
                    if !infected[j] && rng.random_bool(p) && !pending[j] {
                        pending[j] = true;
                        newly.push(j);
                    }
                }
                Infectivity::Degree => {
                    for &j in &adjacency[i] {
                        if !infected[j] && rng.random_bool(p) && !pending[j] {
                            pending[j] = true;
                            newly.push(j);
                        }
                    }
                }
            }
        }

        if newly.is_empty() {
            // Bail out early when progress is impossible: nobody infectious
            // can transmit, or no infected node still has a susceptible
            // neighbor.
            let transmissible = |i: &usize| params.transmission(arms[*i]) > 0.0;
            let reachable = order
                .iter()
                .filter(|i| transmissible(i))
                .any(|&i| adjacency[i].iter().any(|&j| !infected[j]));
            if !reachable {
                return match stop {
                    StopRule::Incidence => Err(SimError::StalledEpidemic {
                        infected: counts[0] + counts[1],
                        nodes: n,
                        steps: t as usize,
                        stop_fraction: params.stop_fraction,
                    }),
                    StopRule::Horizon(steps) => Ok(InfectionRecord {
                        infected_at,
                        final_count_by_arm: counts,
                        end_time: steps,
                    }),
                };
            }
        }

        newly.sort_unstable();
        for &j in &newly {
            pending[j] = false;
            infected[j] = true;
            infected_at[j] = Some(t + 1);
            counts[arms[j].index()] += 1;
            order.push(j);
        }
        t += 1;
    }
}

/// Simulates one pair's trial: seeds `round(seed_fraction * n)` uniformly
/// random nodes per cluster, then runs the SI process to the stop fraction.
pub fn simulate_si<R: Rng + ?Sized>(
    pair: &ClusterPair,
    params: &SpreadParams,
    rng: &mut R,
) -> Result<InfectionRecord, SimError> {
    params.validate()?;
    let n = pair.cluster_size();
    let per_cluster = seeds_per_cluster(params.seed_fraction, n);
    let mut seeds = Vec::with_capacity(2 * per_cluster);
    for offset in [0, n] {
        let picks = rand::seq::index::sample(rng, n, per_cluster);
        seeds.extend(picks.iter().map(|v| v + offset));
    }
    let arms = pair.arms();
    spread(pair.graph(), &arms, &seeds, params, rng)
}

/// Per-replicate record export: `replicate,pair,node,arm,infected_at`
/// (empty `infected_at` for never-infected nodes).
pub fn write_records_csv<W: Write>(
    mut w: W,
    replicate: usize,
    pair_index: usize,
    record: &InfectionRecord,
    arms: &[Arm],
) -> io::Result<()> {
    for (node, time) in record.infected_at.iter().enumerate() {
        let arm = arms[node].index();
        match time {
            Some(t) => writeln!(w, "{replicate},{pair_index},{node},{arm},{t}")?,
            None => writeln!(w, "{replicate},{pair_index},{node},{arm},")?,
        }
    }
    Ok(())
}

/// Header for [`write_records_csv`].
pub const RECORDS_CSV_HEADER: &str = "replicate,pair,node,arm,infected_at";
