//! One simulated trial: C independently generated cluster pairs, each
//! rewired to the target mixing fraction and run through the SI process.

use rand::Rng;
use thiserror::Error;

use crate::epidemic::{self, simulate_si, InfectionRecord, Infectivity, SpreadParams};
use crate::mixing::{rewire_to_gamma, Arm, ClusterPair, RewireError};
use crate::netgen::{sample_matched_pair, EnsembleSpec, NetGenError};

#[derive(Debug, Error)]
pub enum TrialError {
    #[error(transparent)]
    NetGen(#[from] NetGenError),
    #[error(transparent)]
    Rewire(#[from] RewireError),
    #[error(transparent)]
    Sim(#[from] epidemic::SimError),
    #[error("invalid trial config: {0}")]
    InvalidConfig(String),
}

impl TrialError {
    pub fn is_stalled(&self) -> bool {
        matches!(
            self,
            TrialError::Sim(epidemic::SimError::StalledEpidemic { .. })
        )
    }
}

/// Everything needed to simulate one trial replicate.
#[derive(Debug, Clone, Copy)]
pub struct TrialConfig {
    pub ensemble: EnsembleSpec,
    /// Number of cluster pairs C.
    pub pairs: usize,
    /// Target between-cluster mixing fraction.
    pub gamma: f64,
    pub infectivity: Infectivity,
    pub p0: f64,
    pub p1: f64,
    pub seed_fraction: f64,
    pub stop_fraction: f64,
    pub max_steps: usize,
}

impl TrialConfig {
    /// Paper-style config with 1% seeding, 10% stopping, 10n step cap.
    pub fn standard(
        ensemble: EnsembleSpec,
        pairs: usize,
        gamma: f64,
        infectivity: Infectivity,
        p0: f64,
        p1: f64,
    ) -> Self {
        TrialConfig {
            ensemble,
            pairs,
            gamma,
            infectivity,
            p0,
            p1,
            seed_fraction: 0.01,
            stop_fraction: 0.10,
            max_steps: epidemic::default_max_steps(ensemble.nodes),
        }
    }

    /// The same config with no treatment effect (p1 = p0).
    pub fn null_hypothesis(&self) -> Self {
        TrialConfig {
            p1: self.p0,
            ..*self
        }
    }

    pub fn spread_params(&self) -> SpreadParams {
        SpreadParams {
            p0: self.p0,
            p1: self.p1,
            infectivity: self.infectivity,
            seed_fraction: self.seed_fraction,
            stop_fraction: self.stop_fraction,
            max_steps: self.max_steps,
        }
    }

    pub fn validate(&self) -> Result<(), TrialError> {
        self.ensemble.validate()?;
        if self.pairs == 0 {
            return Err(TrialError::InvalidConfig("need at least one pair".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(TrialError::InvalidConfig(format!(
                "gamma {} outside [0, 1]",
                self.gamma
            )));
        }
        self.spread_params().validate()?;
        Ok(())
    }
}

/// Outcome of one trial replicate: per-pair infection records plus the
/// config echo needed to interpret them.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub records: Vec<InfectionRecord>,
    pub cluster_size: usize,
}

impl TrialOutcome {
    pub fn pair_count(&self) -> usize {
        self.records.len()
    }

    /// Arm labels shared by every pair (nodes 0..n control, n..2n treatment).
    pub fn arms(&self) -> Vec<Arm> {
        let n = self.cluster_size;
        (0..2 * n)
            .map(|v| if v < n { Arm::Control } else { Arm::Treatment })
            .collect()
    }

    /// Final infected proportion per arm for each pair.
    pub fn arm_proportions(&self) -> Vec<[f64; 2]> {
        let n = self.cluster_size as f64;
        self.records
            .iter()
            .map(|r| {
                [
                    r.final_count_by_arm[0] as f64 / n,
                    r.final_count_by_arm[1] as f64 / n,
                ]
            })
            .collect()
    }

    /// Final infected proportions of all 2C clusters (control, treatment,
    /// pair by pair).
    pub fn cluster_proportions(&self) -> Vec<f64> {
        self.arm_proportions()
            .into_iter()
            .flatten()
            .collect()
    }
}

/// Generates, rewires, and infects one cluster pair.
pub fn simulate_pair<R: Rng + ?Sized>(
    config: &TrialConfig,
    rng: &mut R,
) -> Result<(ClusterPair, InfectionRecord), TrialError> {
    let (control, treatment) = sample_matched_pair(&config.ensemble, rng)?;
    let pair = ClusterPair::from_clusters(control, treatment)
        .expect("matched pair clusters have equal sizes");
    let pair = rewire_to_gamma(&pair, config.gamma, rng)?;
    let record = simulate_si(&pair, &config.spread_params(), rng)?;
    Ok((pair, record))
}

/// Simulates all C pairs of one trial replicate.
pub fn simulate_trial<R: Rng + ?Sized>(
    config: &TrialConfig,
    rng: &mut R,
) -> Result<TrialOutcome, TrialError> {
    config.validate()?;
    let mut records = Vec::with_capacity(config.pairs);
    for _ in 0..config.pairs {
        let (_, record) = simulate_pair(config, rng)?;
        records.push(record);
    }
    Ok(TrialOutcome {
        records,
        cluster_size: config.ensemble.nodes,
    })
}
