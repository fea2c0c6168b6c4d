//! Coupled mass-action SI equations with mixing-weighted cross-infection,
//! and their comparison against network simulation on complete graphs.
//!
//! The pair of equations integrated here is
//!
//! ```text
//! dI0/dt = [(1 - gamma) I0 p0 + gamma I1 p1] (1 - I0)
//! dI1/dt = [(1 - gamma) I1 p1 + gamma I0 p0] (1 - I1)
//! ```
//!
//! with one simulation step identified with one time unit.

use rayon::prelude::*;
use thiserror::Error;

use crate::epidemic::{spread_for_steps, Infectivity, SpreadParams};
use crate::graph::Network;
use crate::mixing::{rewire_to_gamma, ClusterPair, RewireError};
use crate::rng::replicate_rng;

#[derive(Debug, Error, PartialEq)]
pub enum OdeError {
    #[error("invalid ODE parameters: {0}")]
    InvalidParams(String),
    #[error("integration left [0, 1] at t = {t}; step size {dt} too large")]
    Unstable { t: f64, dt: f64 },
}

#[derive(Debug, Error)]
pub enum CompareError {
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Rewire(#[from] RewireError),
    #[error(transparent)]
    Sim(#[from] crate::epidemic::SimError),
    #[error("invalid comparison setup: {0}")]
    InvalidSetup(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeParams {
    pub p0: f64,
    pub p1: f64,
    pub gamma: f64,
    /// Initial infected fraction in both arms.
    pub i0: f64,
    pub t_end: f64,
    pub dt: f64,
}

impl OdeParams {
    pub fn validate(&self) -> Result<(), OdeError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(OdeError::InvalidParams(format!("dt must be positive, got {}", self.dt)));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(OdeError::InvalidParams(format!(
                "gamma {} outside [0, 1]",
                self.gamma
            )));
        }
        if !(self.i0 > 0.0 && self.i0 < 1.0) {
            return Err(OdeError::InvalidParams(format!(
                "initial fraction {} outside (0, 1)",
                self.i0
            )));
        }
        if !(0.0..=1.0).contains(&self.p0) || !(0.0..=1.0).contains(&self.p1) {
            return Err(OdeError::InvalidParams(format!(
                "rates must lie in [0, 1], got p0={} p1={}",
                self.p0, self.p1
            )));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(OdeError::InvalidParams(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        Ok(())
    }
}

/// Infected fractions of the two arms over time.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub control: Vec<f64>,
    pub treatment: Vec<f64>,
    dt: f64,
}

impl Trajectory {
    /// Sample closest to time `t`.
    pub fn at(&self, t: f64) -> (f64, f64) {
        let idx = ((t / self.dt).round() as usize).min(self.times.len() - 1);
        (self.control[idx], self.treatment[idx])
    }

    /// First time at which the pair-wide infected fraction reaches `stop`.
    pub fn time_reaching(&self, stop: f64) -> Option<f64> {
        self.times
            .iter()
            .zip(self.control.iter().zip(&self.treatment))
            .find(|(_, (c, t))| (*c + *t) / 2.0 >= stop)
            .map(|(t, _)| *t)
    }
}

fn derivatives(params: &OdeParams, i0: f64, i1: f64) -> (f64, f64) {
    let g = params.gamma;
    let d0 = ((1.0 - g) * i0 * params.p0 + g * i1 * params.p1) * (1.0 - i0);
    let d1 = ((1.0 - g) * i1 * params.p1 + g * i0 * params.p0) * (1.0 - i1);
    (d0, d1)
}

/// Integrates the coupled pair with classical fixed-step RK4.
pub fn solve_pair_ode(params: &OdeParams) -> Result<Trajectory, OdeError> {
    params.validate()?;
    let steps = (params.t_end / params.dt).ceil() as usize;
    let dt = params.dt;
    let mut i0 = params.i0;
    let mut i1 = params.i0;
    let mut traj = Trajectory {
        times: Vec::with_capacity(steps + 1),
        control: Vec::with_capacity(steps + 1),
        treatment: Vec::with_capacity(steps + 1),
        dt,
    };
    traj.times.push(0.0);
    traj.control.push(i0);
    traj.treatment.push(i1);
    for step in 0..steps {
        let (k1a, k1b) = derivatives(params, i0, i1);
        let (k2a, k2b) = derivatives(params, i0 + 0.5 * dt * k1a, i1 + 0.5 * dt * k1b);
        let (k3a, k3b) = derivatives(params, i0 + 0.5 * dt * k2a, i1 + 0.5 * dt * k2b);
        let (k4a, k4b) = derivatives(params, i0 + dt * k3a, i1 + dt * k3b);
        i0 += dt / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
        i1 += dt / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b);
        let t = (step + 1) as f64 * dt;
        if !(0.0..=1.0).contains(&i0) || !(0.0..=1.0).contains(&i1) {
            return Err(OdeError::Unstable { t, dt });
        }
        traj.times.push(t);
        traj.control.push(i0);
        traj.treatment.push(i1);
    }
    Ok(traj)
}

/// Closed-form logistic solution of `dI/dt = p I (1 - I)` from `i0`.
pub fn logistic_closed_form(p: f64, i0: f64, t: f64) -> f64 {
    1.0 / (1.0 + (1.0 - i0) / i0 * (-p * t).exp())
}

/// One row of the simulation-vs-ODE comparison at an integer time step.
#[derive(Debug, Clone, Copy)]
pub struct ComparisonRow {
    pub t: u32,
    pub ode_control: f64,
    pub ode_treatment: f64,
    pub sim_control: f64,
    pub sim_treatment: f64,
}

#[derive(Debug, Clone)]
pub struct OdeComparison {
    pub rows: Vec<ComparisonRow>,
    pub replicates: usize,
}

impl OdeComparison {
    /// Largest |simulation - ODE| over both arms, restricted to times where
    /// the ODE pair-wide fraction is still below `stop`; the second value
    /// is the signed gap of largest magnitude (negative = simulation slower).
    pub fn max_abs_gap_until(&self, stop: f64) -> (f64, f64) {
        let mut max_abs = 0.0;
        let mut signed = 0.0;
        for row in &self.rows {
            if (row.ode_control + row.ode_treatment) / 2.0 >= stop {
                break;
            }
            for (sim, ode) in [
                (row.sim_control, row.ode_control),
                (row.sim_treatment, row.ode_treatment),
            ] {
                let gap = sim - ode;
                if gap.abs() > max_abs {
                    max_abs = gap.abs();
                    signed = gap;
                }
            }
        }
        (max_abs, signed)
    }

    /// True when the simulated mean never exceeds the ODE curve (within
    /// `slack`) before the ODE reaches `stop`.
    pub fn simulation_at_or_below_ode(&self, stop: f64, slack: f64) -> bool {
        self.rows
            .iter()
            .take_while(|row| (row.ode_control + row.ode_treatment) / 2.0 < stop)
            .all(|row| {
                row.sim_control <= row.ode_control + slack
                    && row.sim_treatment <= row.ode_treatment + slack
            })
    }
}

/// Builds complete-graph clusters, rewires them to `params.gamma`, runs the
/// unit-infectivity process to the integer horizon `t_end` with no stopping
/// rule, and averages the per-arm infected fraction per step over
/// `replicates` runs seeded from `master_seed`.
pub fn compare_ode_vs_network(
    params: &OdeParams,
    cluster_size: usize,
    replicates: usize,
    master_seed: u64,
) -> Result<OdeComparison, CompareError> {
    params.validate()?;
    if replicates == 0 {
        return Err(CompareError::InvalidSetup("need at least one replicate".into()));
    }
    let seeds_per_cluster = (params.i0 * cluster_size as f64).round() as usize;
    if seeds_per_cluster == 0 {
        return Err(CompareError::InvalidSetup(format!(
            "initial fraction {} seeds nobody in clusters of {cluster_size}",
            params.i0
        )));
    }
    let ode = solve_pair_ode(params)?;
    let horizon = params.t_end.floor() as u32;

    // The horizon, not incidence, ends these runs.
    let spread_params = SpreadParams {
        p0: params.p0,
        p1: params.p1,
        infectivity: Infectivity::Unit,
        seed_fraction: params.i0,
        stop_fraction: 1.0,
        max_steps: horizon as usize + 1,
    };

    let totals: Vec<(Vec<u64>, Vec<u64>)> = (0..replicates)
        .into_par_iter()
        .map(|rep| -> Result<(Vec<u64>, Vec<u64>), CompareError> {
            let mut rng = replicate_rng(master_seed, 0, rep as u64);
            let pair = ClusterPair::from_clusters(
                Network::complete(cluster_size),
                Network::complete(cluster_size),
            )
            .expect("equal cluster sizes");
            let pair = rewire_to_gamma(&pair, params.gamma, &mut rng)?;
            let arms = pair.arms();
            let mut seeds: Vec<usize> = Vec::with_capacity(2 * seeds_per_cluster);
            for offset in [0, cluster_size] {
                let picks = rand::seq::index::sample(&mut rng, cluster_size, seeds_per_cluster);
                seeds.extend(picks.iter().map(|v| v + offset));
            }
            let record =
                spread_for_steps(pair.graph(), &arms, &seeds, &spread_params, horizon, &mut rng)?;
            let mut control = vec![0u64; horizon as usize + 1];
            let mut treatment = vec![0u64; horizon as usize + 1];
            for (node, infected_at) in record.infected_at.iter().enumerate() {
                let Some(ti) = infected_at else { continue };
                let start = (*ti).min(horizon);
                for t in start..=horizon {
                    if node < cluster_size {
                        control[t as usize] += 1;
                    } else {
                        treatment[t as usize] += 1;
                    }
                }
            }
            Ok((control, treatment))
        })
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::with_capacity(horizon as usize + 1);
    let n = cluster_size as f64 * replicates as f64;
    for t in 0..=horizon {
        let sim_control = totals.iter().map(|(c, _)| c[t as usize]).sum::<u64>() as f64 / n;
        let sim_treatment = totals.iter().map(|(_, tr)| tr[t as usize]).sum::<u64>() as f64 / n;
        let (ode_control, ode_treatment) = ode.at(t as f64);
        rows.push(ComparisonRow {
            t,
            ode_control,
            ode_treatment,
            sim_control,
            sim_treatment,
        });
    }
    Ok(OdeComparison { rows, replicates })
}
