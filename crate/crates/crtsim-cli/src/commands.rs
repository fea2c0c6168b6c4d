//! Implementations behind the subcommands. Each writes CSV deterministically
//! for a fixed master seed, independent of thread count.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crtsim::analysis::{
    self, scenario1_power, scenario2_power, simulate_iccs, simulate_log_risk_ratios,
};
use crtsim::empirical::{
    degree_distribution, estimate_gamma_distribution, write_gamma_row, CallEdgeList,
    GAMMA_CSV_HEADER,
};
use crtsim::epidemic::{write_records_csv, RECORDS_CSV_HEADER};
use crtsim::fixtures;
use crtsim::netgen::{self, EnsembleKind, EnsembleSpec};
use crtsim::ode::{compare_ode_vs_network, OdeParams};
use crtsim::rng;
use crtsim::stats;
use crtsim::trial::simulate_trial;

use crate::config::{ExperimentConfig, GridCell};
use crate::CliError;

pub const POWER_CSV_HEADER: &str =
    "ensemble,infectivity,gamma,n,C,scenario,power,ci_low,ci_high,replicates,stalled";
pub const METRICS_CSV_HEADER: &str =
    "ensemble,infectivity,gamma,n,C,mean_log_risk_ratio,sd_log_risk_ratio,replicates,stalled";
pub const ICC_CSV_HEADER: &str = "ensemble,infectivity,gamma,n,C,mean_icc,replicates,stalled";
pub const ODE_CSV_HEADER: &str = "t,I0_ode,I1_ode,I0_sim_mean,I1_sim_mean";

/// Record-dump replicates use their own seed phase so they never overlap
/// the power or metrics streams.
const DUMP_PHASE: u64 = 17;

fn cell_prefix(cell: &GridCell) -> String {
    format!(
        "{},{},{},{},{}",
        cell.ensemble_label,
        cell.infectivity_label,
        cell.trial.gamma,
        cell.trial.ensemble.nodes,
        cell.trial.pairs
    )
}

/// Power sweep over the whole grid, one row per (cell, scenario).
pub fn run_power(config: &ExperimentConfig, verbose: bool) -> Result<String, CliError> {
    config.validate()?;
    let mut out = String::from(POWER_CSV_HEADER);
    out.push('\n');
    for cell in config.cells()? {
        for &scenario in &config.scenarios {
            let estimate = match scenario {
                1 => scenario1_power(
                    &cell.trial,
                    config.null_replicates,
                    config.alt_replicates,
                    config.alpha,
                    cell.seed,
                )?,
                2 => scenario2_power(
                    &cell.trial,
                    config.scenario2_trials,
                    config.permutations,
                    config.alpha,
                    cell.seed,
                )?,
                _ => unreachable!("validated scenarios"),
            };
            writeln!(
                out,
                "{},{},{:.6},{:.6},{:.6},{},{}",
                cell_prefix(&cell),
                scenario,
                estimate.power,
                estimate.ci95.0,
                estimate.ci95.1,
                estimate.replicates,
                estimate.stalled
            )
            .expect("string write");
            if verbose {
                eprintln!(
                    "power {} scenario {scenario}: {:.3}",
                    cell.label(),
                    estimate.power
                );
            }
        }
    }
    Ok(out)
}

/// Mean and standard deviation of the log risk ratio per cell, under the
/// configured alternative.
pub fn run_metrics(config: &ExperimentConfig, verbose: bool) -> Result<String, CliError> {
    config.validate()?;
    let mut out = String::from(METRICS_CSV_HEADER);
    out.push('\n');
    for cell in config.cells()? {
        let (ratios, stalled) =
            simulate_log_risk_ratios(&cell.trial, config.metrics_replicates, cell.seed, false)?;
        writeln!(
            out,
            "{},{:.6},{:.6},{},{}",
            cell_prefix(&cell),
            stats::mean(&ratios),
            stats::sample_sd(&ratios),
            ratios.len(),
            stalled
        )
        .expect("string write");
        if verbose {
            eprintln!("metrics {}: mean={:.4}", cell.label(), stats::mean(&ratios));
        }
    }
    Ok(out)
}

/// Per-replicate infection records for the (single) configured cell.
pub fn run_record_dump(config: &ExperimentConfig, replicates: usize) -> Result<String, CliError> {
    config.validate()?;
    let cells = config.cells()?;
    let [cell] = cells.as_slice() else {
        return Err(CliError::Config(format!(
            "record dumps need a single-cell config, grid has {} cells",
            cells.len()
        )));
    };
    let mut out = Vec::from(RECORDS_CSV_HEADER.as_bytes());
    out.push(b'\n');
    let arms = {
        let n = cell.trial.ensemble.nodes;
        (0..2 * n)
            .map(|v| {
                if v < n {
                    crtsim::Arm::Control
                } else {
                    crtsim::Arm::Treatment
                }
            })
            .collect::<Vec<_>>()
    };
    for rep in 0..replicates {
        let mut rng = rng::replicate_rng(cell.seed, DUMP_PHASE, rep as u64);
        let outcome = simulate_trial(&cell.trial, &mut rng).map_err(analysis::PowerError::from)?;
        for (pair_index, record) in outcome.records.iter().enumerate() {
            write_records_csv(&mut out, rep, pair_index, record, &arms)?;
        }
    }
    Ok(String::from_utf8(out).expect("csv is utf-8"))
}

/// Mean trial ICC per cell under the null hypothesis (p1 = p0), matching
/// how the correlation is read off a trial without a treatment effect.
pub fn run_icc(config: &ExperimentConfig, verbose: bool) -> Result<String, CliError> {
    config.validate()?;
    let mut out = String::from(ICC_CSV_HEADER);
    out.push('\n');
    for cell in config.cells()? {
        let null_trial = cell.trial.null_hypothesis();
        let (iccs, stalled) = simulate_iccs(&null_trial, config.icc_replicates, cell.seed)?;
        writeln!(
            out,
            "{},{:.6},{},{}",
            cell_prefix(&cell),
            stats::mean(&iccs),
            iccs.len(),
            stalled
        )
        .expect("string write");
        if verbose {
            eprintln!("icc {}: {:.5}", cell.label(), stats::mean(&iccs));
        }
    }
    Ok(out)
}

/// Analytic power band over the plausible ICC range, with expected arm
/// proportions estimated from simulation at gamma = 0.
pub fn run_hayes_band(config: &ExperimentConfig) -> Result<String, CliError> {
    config.validate()?;
    let mut out = String::from("n,C,p0_expected,p1_expected,icc_low,icc_high,power_low,power_high");
    out.push('\n');
    let kind = crate::config::parse_ensemble(&config.ensembles[0])?;
    let infectivity = crate::config::parse_infectivity(&config.infectivities[0])?;
    for &n in &config.n_values {
        for &pairs in &config.pair_counts {
            let ensemble = EnsembleSpec::new(kind, n, config.mean_degree)
                .map_err(|e| CliError::Config(format!("ensembles: {e}")))?;
            let mut trial = crtsim::TrialConfig::standard(
                ensemble,
                pairs,
                0.0,
                infectivity,
                config.p0,
                config.p1,
            );
            trial.seed_fraction = config.seed_fraction;
            trial.stop_fraction = config.stop_fraction;
            let replicates = config.icc_replicates.max(100);
            let seed = rng::mix(config.master_seed, 0xBA4D);
            let (p0e, p1e) = expected_arm_proportions(&trial, replicates, seed)?;
            let (lo, hi) = analysis::hayes_band(pairs, n, p0e, p1e, config.alpha)
                .map_err(analysis::PowerError::from)?;
            let (icc_lo, icc_hi) = analysis::PLAUSIBLE_ICC_RANGE;
            writeln!(
                out,
                "{n},{pairs},{p0e:.6},{p1e:.6},{icc_lo},{icc_hi},{lo:.6},{hi:.6}"
            )
            .expect("string write");
        }
    }
    Ok(out)
}

fn expected_arm_proportions(
    trial: &crtsim::TrialConfig,
    replicates: usize,
    seed: u64,
) -> Result<(f64, f64), CliError> {
    let mut sums = [0.0f64; 2];
    let mut count = 0usize;
    for rep in 0..replicates {
        let mut rng = rng::replicate_rng(seed, DUMP_PHASE + 1, rep as u64);
        match simulate_trial(trial, &mut rng) {
            Ok(outcome) => {
                for [c, t] in outcome.arm_proportions() {
                    sums[0] += c;
                    sums[1] += t;
                    count += 1;
                }
            }
            Err(e) if e.is_stalled() => continue,
            Err(e) => return Err(analysis::PowerError::from(e).into()),
        }
    }
    if count == 0 {
        return Err(CliError::Config(
            "no completed replicates to estimate proportions".into(),
        ));
    }
    Ok((sums[0] / count as f64, sums[1] / count as f64))
}

/// ODE-vs-simulation trajectories, one CSV per mixing value.
pub struct OdeArgs {
    pub p0: f64,
    pub p1: f64,
    pub gammas: Vec<f64>,
    pub i0: f64,
    pub t_end: f64,
    pub dt: f64,
    pub cluster_size: usize,
    pub replicates: usize,
    pub master_seed: u64,
}

pub fn run_ode(args: &OdeArgs, output: &Path) -> Result<Vec<PathBuf>, CliError> {
    if args.gammas.is_empty() {
        return Err(CliError::Config("gammas: need at least one value".into()));
    }
    let mut written = Vec::new();
    for (idx, &gamma) in args.gammas.iter().enumerate() {
        let params = OdeParams {
            p0: args.p0,
            p1: args.p1,
            gamma,
            i0: args.i0,
            t_end: args.t_end,
            dt: args.dt,
        };
        let comparison = compare_ode_vs_network(
            &params,
            args.cluster_size,
            args.replicates,
            rng::mix(args.master_seed, idx as u64),
        )?;
        let mut out = String::from(ODE_CSV_HEADER);
        out.push('\n');
        for row in &comparison.rows {
            writeln!(
                out,
                "{},{:.6},{:.6},{:.6},{:.6}",
                row.t, row.ode_control, row.ode_treatment, row.sim_control, row.sim_treatment
            )
            .expect("string write");
        }
        let path = suffixed_path(output, &format!("gamma_{gamma}"));
        fs::write(&path, out)?;
        written.push(path);
    }
    Ok(written)
}

/// `ode.csv` -> `ode_gamma_0.25.csv`.
fn suffixed_path(base: &Path, suffix: &str) -> PathBuf {
    let stem = base.file_stem().unwrap_or_default().to_string_lossy();
    let ext = base.extension().map(|e| e.to_string_lossy().into_owned());
    let name = match ext {
        Some(ext) => format!("{stem}_{suffix}.{ext}"),
        None => format!("{stem}_{suffix}"),
    };
    base.with_file_name(name)
}

/// Mixing-from-data estimation over a list of pair counts.
pub struct GammaArgs {
    pub edges: PathBuf,
    pub zips: PathBuf,
    pub pair_counts: Vec<usize>,
    pub randomizations: usize,
    pub weighted: WeightMode,
    pub master_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    Unweighted,
    Weighted,
    Both,
}

impl WeightMode {
    pub fn parse(name: &str) -> Result<Self, CliError> {
        match name {
            "unweighted" => Ok(WeightMode::Unweighted),
            "weighted" => Ok(WeightMode::Weighted),
            "both" => Ok(WeightMode::Both),
            other => Err(CliError::Config(format!(
                "mode: unknown weighting {other:?} (expected unweighted, weighted, both)"
            ))),
        }
    }

    fn flags(self) -> &'static [bool] {
        match self {
            WeightMode::Unweighted => &[false],
            WeightMode::Weighted => &[true],
            WeightMode::Both => &[false, true],
        }
    }
}

pub fn run_gamma(args: &GammaArgs) -> Result<String, CliError> {
    if args.pair_counts.is_empty() {
        return Err(CliError::Config("pairs: need at least one count".into()));
    }
    let data = CallEdgeList::from_csv_paths(&args.edges, &args.zips)?;
    let mut out = Vec::from(GAMMA_CSV_HEADER.as_bytes());
    out.push(b'\n');
    for (idx, &pairs) in args.pair_counts.iter().enumerate() {
        for (w, &weighted) in args.weighted.flags().iter().enumerate() {
            let mut rng = rng::replicate_rng(args.master_seed, idx as u64, w as u64);
            let summary = estimate_gamma_distribution(
                &data,
                pairs,
                args.randomizations,
                weighted,
                &mut rng,
            )?;
            write_gamma_row(&mut out, &summary)?;
        }
    }
    Ok(String::from_utf8(out).expect("csv is utf-8"))
}

/// Degree histogram export for the loaded call data.
pub fn run_degree_histogram(
    edges: &Path,
    zips: &Path,
    weighted: bool,
) -> Result<String, CliError> {
    let data = CallEdgeList::from_csv_paths(edges, zips)?;
    let mut out = Vec::new();
    degree_distribution(&data, weighted).write_csv(&mut out)?;
    Ok(String::from_utf8(out).expect("csv is utf-8"))
}

/// Synthetic data generation.
pub enum FixtureKind {
    Local,
    SingleZip { nodes: usize, calls_per_node: usize },
    CrossOnly,
    PowerLaw { nodes: usize, alpha: f64 },
    Network { ensemble: EnsembleKind, n: usize, mean_degree: f64 },
}

pub fn run_fixtures(
    kind: &FixtureKind,
    out_dir: &Path,
    seed: u64,
) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(out_dir)?;
    let mut rng = rng::seeded(seed);
    let write_calls = |data: &CallEdgeList, stem: &str| -> Result<Vec<PathBuf>, CliError> {
        let edges_path = out_dir.join(format!("{stem}_edges.csv"));
        let zips_path = out_dir.join(format!("{stem}_zips.csv"));
        let mut edges_buf = Vec::new();
        let mut zips_buf = Vec::new();
        data.write_csv(&mut edges_buf, &mut zips_buf)?;
        fs::write(&edges_path, edges_buf)?;
        fs::write(&zips_path, zips_buf)?;
        Ok(vec![edges_path, zips_path])
    };
    match kind {
        FixtureKind::Local => {
            let data = fixtures::spatially_local(&fixtures::LocalCallParams::default(), &mut rng);
            write_calls(&data, "local")
        }
        FixtureKind::SingleZip {
            nodes,
            calls_per_node,
        } => {
            let data = fixtures::single_zip(*nodes, *calls_per_node, &mut rng);
            write_calls(&data, "single_zip")
        }
        FixtureKind::CrossOnly => write_calls(&fixtures::cross_only(), "cross_only"),
        FixtureKind::PowerLaw { nodes, alpha } => {
            let data = fixtures::power_law_calls(*nodes, *alpha, 3, 300, 10, &mut rng);
            write_calls(&data, "powerlaw")
        }
        FixtureKind::Network {
            ensemble,
            n,
            mean_degree,
        } => {
            let spec = EnsembleSpec::new(*ensemble, *n, *mean_degree)
                .map_err(|e| CliError::Config(format!("ensemble: {e}")))?;
            let network = match ensemble {
                EnsembleKind::ErdosRenyi => netgen::generate_er(&spec, &mut rng),
                EnsembleKind::BarabasiAlbert => netgen::generate_ba(&spec, &mut rng),
                EnsembleKind::SbmLattice => netgen::generate_sbm_lattice(&spec, &mut rng),
            }
            .map_err(|e| CliError::Config(format!("ensemble: {e}")))?;
            let path = out_dir.join(format!("{}_n{}.edgelist", ensemble.label(), n));
            let mut buf = Vec::new();
            network.write_edge_list(&mut buf)?;
            fs::write(&path, buf)?;
            Ok(vec![path])
        }
    }
}
