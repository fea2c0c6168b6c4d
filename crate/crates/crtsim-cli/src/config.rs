//! Experiment configuration: one JSON document drives the sweep commands;
//! command-line flags override individual fields.

use serde::{Deserialize, Serialize};

use crtsim::epidemic::default_max_steps;
use crtsim::netgen::{EnsembleKind, EnsembleSpec};
use crtsim::trial::TrialConfig;
use crtsim::Infectivity;

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Ensembles to sweep: "er", "ba", "sbm".
    pub ensembles: Vec<String>,
    /// Cluster sizes n.
    pub n_values: Vec<usize>,
    /// Pair counts C.
    pub pair_counts: Vec<usize>,
    pub mean_degree: f64,
    /// Mixing targets.
    pub gammas: Vec<f64>,
    /// "unit", "degree".
    pub infectivities: Vec<String>,
    /// Analysis scenarios: 1 (log risk ratio, simulated cutoffs),
    /// 2 (logrank permutation test).
    pub scenarios: Vec<u8>,
    pub p0: f64,
    pub p1: f64,
    pub alpha: f64,
    pub null_replicates: usize,
    pub alt_replicates: usize,
    pub scenario2_trials: usize,
    pub permutations: usize,
    pub metrics_replicates: usize,
    pub icc_replicates: usize,
    pub seed_fraction: f64,
    pub stop_fraction: f64,
    /// 0 selects the 10n default.
    pub max_steps: usize,
    pub master_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ExperimentConfig {
    /// Desk-scale defaults: the full sweep grid at replicate counts that run
    /// in minutes on one machine.
    pub fn desk() -> Self {
        ExperimentConfig {
            ensembles: vec!["er".into(), "ba".into(), "sbm".into()],
            n_values: vec![300],
            pair_counts: vec![20],
            mean_degree: 4.0,
            gammas: (0..=10).map(|i| i as f64 / 10.0).collect(),
            infectivities: vec!["unit".into(), "degree".into()],
            scenarios: vec![1, 2],
            p0: 0.30,
            p1: 0.25,
            alpha: 0.05,
            null_replicates: 2_000,
            alt_replicates: 2_000,
            scenario2_trials: 500,
            permutations: 512,
            metrics_replicates: 2_000,
            icc_replicates: 500,
            seed_fraction: 0.01,
            stop_fraction: 0.10,
            max_steps: 0,
            master_seed: 1,
        }
    }

    /// Full-scale replicate counts (20,000 per phase, 2,000 permutation
    /// trials); hours of compute.
    pub fn full() -> Self {
        ExperimentConfig {
            null_replicates: 20_000,
            alt_replicates: 20_000,
            scenario2_trials: 2_000,
            metrics_replicates: 20_000,
            ..Self::desk()
        }
    }

    /// Cluster size and count sensitivity grid, 3,000 simulations per cell.
    pub fn table2() -> Self {
        ExperimentConfig {
            n_values: vec![100, 300, 1000],
            pair_counts: vec![5, 10, 20],
            gammas: vec![0.0, 0.25, 0.5],
            null_replicates: 3_000,
            alt_replicates: 3_000,
            metrics_replicates: 3_000,
            ..Self::desk()
        }
    }

    /// The sensitivity grid at desk scale (300 simulations per cell).
    pub fn table2_desk() -> Self {
        ExperimentConfig {
            null_replicates: 300,
            alt_replicates: 300,
            metrics_replicates: 300,
            scenario2_trials: 100,
            ..Self::table2()
        }
    }

    pub fn preset(name: &str) -> Result<Self, CliError> {
        match name {
            "desk" => Ok(Self::desk()),
            "full" => Ok(Self::full()),
            "table2" => Ok(Self::table2()),
            "table2-desk" => Ok(Self::table2_desk()),
            other => Err(CliError::Config(format!(
                "unknown preset {other:?} (expected desk, full, table2, table2-desk)"
            ))),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config JSON: {e}")))
    }

    /// Field-path validation of everything the sweep will touch.
    pub fn validate(&self) -> Result<(), CliError> {
        let field = |name: &str, message: String| CliError::Config(format!("{name}: {message}"));
        if self.ensembles.is_empty() {
            return Err(field("ensembles", "must name at least one ensemble".into()));
        }
        for e in &self.ensembles {
            parse_ensemble(e)?;
        }
        if self.n_values.is_empty() {
            return Err(field("n_values", "must contain at least one size".into()));
        }
        if self.pair_counts.is_empty() || self.pair_counts.contains(&0) {
            return Err(field("pair_counts", "pair counts must be positive".into()));
        }
        if self.gammas.is_empty() || self.gammas.iter().any(|g| !(0.0..=1.0).contains(g)) {
            return Err(field("gammas", "mixing targets must lie in [0, 1]".into()));
        }
        if self.infectivities.is_empty() {
            return Err(field("infectivities", "must name at least one mode".into()));
        }
        for i in &self.infectivities {
            parse_infectivity(i)?;
        }
        if self.scenarios.is_empty() || self.scenarios.iter().any(|s| !matches!(s, 1 | 2)) {
            return Err(field("scenarios", "scenarios are 1 and/or 2".into()));
        }
        if !(0.0..=1.0).contains(&self.p1) || !(0.0..=1.0).contains(&self.p0) || self.p1 > self.p0
        {
            return Err(field("p1", "must satisfy 0 <= p1 <= p0 <= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(field("alpha", "must lie in (0, 1)".into()));
        }
        if self.null_replicates < 100 || self.alt_replicates < 100 {
            return Err(field(
                "null_replicates",
                "scenario 1 needs at least 100 null and alternative replicates".into(),
            ));
        }
        if self.scenario2_trials == 0 || self.permutations == 0 {
            return Err(field(
                "scenario2_trials",
                "scenario 2 needs trials and permutations".into(),
            ));
        }
        if self.metrics_replicates == 0 || self.icc_replicates == 0 {
            return Err(field(
                "metrics_replicates",
                "metric sweeps need at least one replicate".into(),
            ));
        }
        if !(self.seed_fraction > 0.0 && self.seed_fraction < self.stop_fraction
            && self.stop_fraction <= 1.0)
        {
            return Err(field(
                "seed_fraction",
                "must satisfy 0 < seed_fraction < stop_fraction <= 1".into(),
            ));
        }
        // Every grid cell must be constructible.
        for cell in self.cells()? {
            cell.trial
                .validate()
                .map_err(|e| CliError::Config(format!("grid cell {}: {e}", cell.label())))?;
        }
        Ok(())
    }

    /// The sweep grid in deterministic order; the cell index salts the
    /// replicate seeds.
    pub fn cells(&self) -> Result<Vec<GridCell>, CliError> {
        let mut cells = Vec::new();
        let mut index = 0u64;
        for ensemble_name in &self.ensembles {
            let kind = parse_ensemble(ensemble_name)?;
            for &n in &self.n_values {
                for &pairs in &self.pair_counts {
                    for infectivity_name in &self.infectivities {
                        let infectivity = parse_infectivity(infectivity_name)?;
                        for &gamma in &self.gammas {
                            let ensemble =
                                EnsembleSpec::new(kind, n, self.mean_degree).map_err(|e| {
                                    CliError::Config(format!("ensembles/{ensemble_name}: {e}"))
                                })?;
                            let max_steps = if self.max_steps == 0 {
                                default_max_steps(n)
                            } else {
                                self.max_steps
                            };
                            cells.push(GridCell {
                                trial: TrialConfig {
                                    ensemble,
                                    pairs,
                                    gamma,
                                    infectivity,
                                    p0: self.p0,
                                    p1: self.p1,
                                    seed_fraction: self.seed_fraction,
                                    stop_fraction: self.stop_fraction,
                                    max_steps,
                                },
                                seed: crtsim::rng::mix(self.master_seed, index),
                                ensemble_label: kind.label(),
                                infectivity_label: infectivity.label(),
                            });
                            index += 1;
                        }
                    }
                }
            }
        }
        Ok(cells)
    }
}

/// One cell of the sweep grid with its derived seed.
#[derive(Debug, Clone)]
pub struct GridCell {
    pub trial: TrialConfig,
    pub seed: u64,
    pub ensemble_label: &'static str,
    pub infectivity_label: &'static str,
}

impl GridCell {
    pub fn label(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.ensemble_label,
            self.infectivity_label,
            self.trial.gamma,
            self.trial.ensemble.nodes,
            self.trial.pairs
        )
    }
}

pub fn parse_ensemble(name: &str) -> Result<EnsembleKind, CliError> {
    match name.to_ascii_lowercase().as_str() {
        "er" | "erdos-renyi" => Ok(EnsembleKind::ErdosRenyi),
        "ba" | "barabasi-albert" => Ok(EnsembleKind::BarabasiAlbert),
        "sbm" | "sbm-lattice" => Ok(EnsembleKind::SbmLattice),
        other => Err(CliError::Config(format!(
            "ensembles: unknown ensemble {other:?} (expected er, ba, sbm)"
        ))),
    }
}

pub fn parse_infectivity(name: &str) -> Result<Infectivity, CliError> {
    match name.to_ascii_lowercase().as_str() {
        "unit" => Ok(Infectivity::Unit),
        "degree" => Ok(Infectivity::Degree),
        other => Err(CliError::Config(format!(
            "infectivities: unknown mode {other:?} (expected unit, degree)"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_validates() {
        ExperimentConfig::desk().validate().unwrap();
        ExperimentConfig::table2_desk().validate().unwrap();
    }

    #[test]
    fn validation_reports_field_paths() {
        let mut config = ExperimentConfig::desk();
        config.p1 = 0.9;
        let err = config.validate().unwrap_err().to_string();
        assert!(err.contains("p1"), "{err}");

        let mut config = ExperimentConfig::desk();
        config.gammas = vec![1.5];
        let err = config.validate().unwrap_err().to_string();
        assert!(err.contains("gammas"), "{err}");
    }

    #[test]
    fn cell_grid_shape_and_distinct_seeds() {
        let mut config = ExperimentConfig::desk();
        config.ensembles = vec!["er".into(), "ba".into()];
        config.gammas = vec![0.0, 0.5];
        config.infectivities = vec!["unit".into()];
        let cells = config.cells().unwrap();
        assert_eq!(cells.len(), 2 * 2);
        let mut seeds: Vec<u64> = cells.iter().map(|c| c.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 4);
    }

    #[test]
    fn table2_preset_covers_the_sensitivity_grid() {
        let config = ExperimentConfig::table2();
        let cells = config.cells().unwrap();
        // 3 ensembles x 3 sizes x 3 pair counts x 2 infectivities x 3 gammas.
        assert_eq!(cells.len(), 3 * 3 * 3 * 2 * 3);
        assert_eq!(config.null_replicates, 3000);
        assert_eq!(ExperimentConfig::table2_desk().null_replicates, 300);
    }

    #[test]
    fn json_round_trip() {
        let config = ExperimentConfig::table2();
        let text = serde_json::to_string(&config).unwrap();
        let back = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(back.n_values, config.n_values);
        assert_eq!(back.master_seed, config.master_seed);
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(ExperimentConfig::from_json("{\"bogus\": 1}").is_err());
    }
}
