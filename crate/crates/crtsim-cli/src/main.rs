use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crtsim_cli::commands::{self, FixtureKind, GammaArgs, OdeArgs, WeightMode};
use crtsim_cli::config::{parse_ensemble, ExperimentConfig};
use crtsim_cli::CliError;

/// Simulates statistical power of matched-pair cluster randomized trials
/// for infections spreading on contact networks.
#[derive(Parser)]
#[command(name = "crtsim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Print per-cell progress to stderr.
    #[arg(long, global = true)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Empirical power sweep over the configured grid.
    Power(SweepArgs),
    /// Mean and standard deviation of the log risk ratio per grid cell.
    Metrics(MetricsArgs),
    /// ODE trajectories compared against complete-graph simulation.
    Ode(OdeCliArgs),
    /// Mixing estimates from call data under repeated randomizations.
    Gamma(GammaCliArgs),
    /// Mean trial ICC per grid cell, plus an optional analytic power band.
    Icc(IccArgs),
    /// Synthetic datasets for tests and demos.
    Fixtures(FixturesArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON experiment config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from a named preset: desk, full, table2, table2-desk.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Ensembles to sweep (comma separated: er,ba,sbm).
    #[arg(long, value_delimiter = ',')]
    ensembles: Option<Vec<String>>,
    /// Cluster sizes n (comma separated).
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Pair counts C (comma separated).
    #[arg(long, value_delimiter = ',')]
    pairs: Option<Vec<usize>>,
    /// Mixing targets (comma separated).
    #[arg(long, value_delimiter = ',')]
    gammas: Option<Vec<f64>>,
    /// Infectivity modes (comma separated: unit,degree).
    #[arg(long, value_delimiter = ',')]
    infectivities: Option<Vec<String>>,
    /// Analysis scenarios (comma separated: 1,2).
    #[arg(long, value_delimiter = ',')]
    scenarios: Option<Vec<u8>>,
    #[arg(long)]
    p0: Option<f64>,
    #[arg(long)]
    p1: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    null_replicates: Option<usize>,
    #[arg(long)]
    alt_replicates: Option<usize>,
    #[arg(long)]
    scenario2_trials: Option<usize>,
    #[arg(long)]
    permutations: Option<usize>,
    #[arg(long)]
    metrics_replicates: Option<usize>,
    #[arg(long)]
    icc_replicates: Option<usize>,
    #[arg(long)]
    master_seed: Option<u64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut config = match (&self.config, &self.preset) {
            (Some(path), _) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    CliError::Config(format!("cannot read {}: {e}", path.display()))
                })?;
                ExperimentConfig::from_json(&text)?
            }
            (None, Some(name)) => ExperimentConfig::preset(name)?,
            (None, None) => ExperimentConfig::desk(),
        };
        if let Some(v) = &self.ensembles {
            config.ensembles = v.clone();
        }
        if let Some(v) = &self.n {
            config.n_values = v.clone();
        }
        if let Some(v) = &self.pairs {
            config.pair_counts = v.clone();
        }
        if let Some(v) = &self.gammas {
            config.gammas = v.clone();
        }
        if let Some(v) = &self.infectivities {
            config.infectivities = v.clone();
        }
        if let Some(v) = &self.scenarios {
            config.scenarios = v.clone();
        }
        if let Some(v) = self.p0 {
            config.p0 = v;
        }
        if let Some(v) = self.p1 {
            config.p1 = v;
        }
        if let Some(v) = self.alpha {
            config.alpha = v;
        }
        if let Some(v) = self.null_replicates {
            config.null_replicates = v;
        }
        if let Some(v) = self.alt_replicates {
            config.alt_replicates = v;
        }
        if let Some(v) = self.scenario2_trials {
            config.scenario2_trials = v;
        }
        if let Some(v) = self.permutations {
            config.permutations = v;
        }
        if let Some(v) = self.metrics_replicates {
            config.metrics_replicates = v;
        }
        if let Some(v) = self.icc_replicates {
            config.icc_replicates = v;
        }
        if let Some(v) = self.master_seed {
            config.master_seed = v;
        }
        Ok(config)
    }
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output CSV path.
    #[arg(long, default_value = "power.csv")]
    output: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, default_value = "metrics.csv")]
    output: PathBuf,
    /// Also dump per-replicate infection records (single-cell configs only).
    #[arg(long)]
    dump_records: Option<PathBuf>,
    /// Replicates to dump.
    #[arg(long, default_value_t = 5)]
    dump_limit: usize,
}

#[derive(Args)]
struct OdeCliArgs {
    #[arg(long, default_value_t = 0.30)]
    p0: f64,
    #[arg(long, default_value_t = 0.25)]
    p1: f64,
    /// Mixing values; one output file per value.
    #[arg(long, value_delimiter = ',', default_value = "0.0,0.1,0.2,1.0")]
    gammas: Vec<f64>,
    /// Initial infected fraction.
    #[arg(long, default_value_t = 0.01)]
    i0: f64,
    #[arg(long, default_value_t = 60.0)]
    t_end: f64,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    /// Nodes per (complete-graph) cluster in the simulation arm.
    #[arg(long, default_value_t = 300)]
    n: usize,
    #[arg(long, default_value_t = 200)]
    replicates: usize,
    #[arg(long, default_value_t = 1)]
    master_seed: u64,
    #[arg(long, default_value = "ode.csv")]
    output: PathBuf,
}

#[derive(Args)]
struct GammaCliArgs {
    /// Call edge list CSV: src,dst,count.
    #[arg(long)]
    edges: PathBuf,
    /// Zip map CSV: node,zip.
    #[arg(long)]
    zips: PathBuf,
    /// Pair counts C to evaluate.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8,16")]
    pairs: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    randomizations: usize,
    /// Edge weighting: unweighted, weighted, or both.
    #[arg(long, default_value = "both")]
    mode: String,
    #[arg(long, default_value_t = 1)]
    master_seed: u64,
    #[arg(long, default_value = "gamma.csv")]
    output: PathBuf,
    /// Also write degree histograms (unweighted and weighted).
    #[arg(long)]
    degree_histogram: Option<PathBuf>,
}

#[derive(Args)]
struct IccArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, default_value = "icc.csv")]
    output: PathBuf,
    /// Also write the analytic power band over the plausible ICC range.
    #[arg(long)]
    hayes_band: Option<PathBuf>,
}

#[derive(Args)]
struct FixturesArgs {
    /// Fixture kind: local, single-zip, cross-only, powerlaw, network.
    #[arg(long)]
    kind: String,
    #[arg(long, default_value = "fixtures")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Nodes (single-zip and powerlaw kinds).
    #[arg(long, default_value_t = 500)]
    nodes: usize,
    /// Calls per node (single-zip kind).
    #[arg(long, default_value_t = 4)]
    calls_per_node: usize,
    /// Tail exponent (powerlaw kind).
    #[arg(long, default_value_t = 2.5)]
    alpha: f64,
    /// Ensemble for the network kind: er, ba, sbm.
    #[arg(long, default_value = "er")]
    ensemble: String,
    /// Cluster size for the network kind.
    #[arg(long, default_value_t = 300)]
    n: usize,
    /// Mean degree for the network kind.
    #[arg(long, default_value_t = 4.0)]
    mean_degree: f64,
}

fn main() -> ExitCode {
    // Worker count for replicate parallelism; unset uses all cores.
    if let Ok(threads) = std::env::var("CRTSIM_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        } else {
            eprintln!("warning: ignoring unparsable CRTSIM_THREADS={threads}");
        }
    }
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Power(args) => {
            let config = args.config.resolve()?;
            let csv = commands::run_power(&config, cli.verbose)?;
            fs::write(&args.output, csv)?;
            eprintln!("wrote {}", args.output.display());
        }
        Command::Metrics(args) => {
            let config = args.config.resolve()?;
            let csv = commands::run_metrics(&config, cli.verbose)?;
            fs::write(&args.output, csv)?;
            eprintln!("wrote {}", args.output.display());
            if let Some(path) = &args.dump_records {
                let dump = commands::run_record_dump(&config, args.dump_limit)?;
                fs::write(path, dump)?;
                eprintln!("wrote {}", path.display());
            }
        }
        Command::Ode(args) => {
            let ode_args = OdeArgs {
                p0: args.p0,
                p1: args.p1,
                gammas: args.gammas.clone(),
                i0: args.i0,
                t_end: args.t_end,
                dt: args.dt,
                cluster_size: args.n,
                replicates: args.replicates,
                master_seed: args.master_seed,
            };
            for path in commands::run_ode(&ode_args, &args.output)? {
                eprintln!("wrote {}", path.display());
            }
        }
        Command::Gamma(args) => {
            let gamma_args = GammaArgs {
                edges: args.edges.clone(),
                zips: args.zips.clone(),
                pair_counts: args.pairs.clone(),
                randomizations: args.randomizations,
                weighted: WeightMode::parse(&args.mode)?,
                master_seed: args.master_seed,
            };
            let csv = commands::run_gamma(&gamma_args)?;
            fs::write(&args.output, csv)?;
            eprintln!("wrote {}", args.output.display());
            if let Some(path) = &args.degree_histogram {
                for (suffix, weighted) in [("unweighted", false), ("weighted", true)] {
                    let csv = commands::run_degree_histogram(&args.edges, &args.zips, weighted)?;
                    let out = path.with_file_name(format!(
                        "{}_{suffix}.csv",
                        path.file_stem().unwrap_or_default().to_string_lossy()
                    ));
                    fs::write(&out, csv)?;
                    eprintln!("wrote {}", out.display());
                }
            }
        }
        Command::Icc(args) => {
            let config = args.config.resolve()?;
            let csv = commands::run_icc(&config, cli.verbose)?;
            fs::write(&args.output, csv)?;
            eprintln!("wrote {}", args.output.display());
            if let Some(path) = &args.hayes_band {
                let csv = commands::run_hayes_band(&config)?;
                fs::write(path, csv)?;
                eprintln!("wrote {}", path.display());
            }
        }
        Command::Fixtures(args) => {
            let kind = match args.kind.as_str() {
                "local" => FixtureKind::Local,
                "single-zip" => FixtureKind::SingleZip {
                    nodes: args.nodes,
                    calls_per_node: args.calls_per_node,
                },
                "cross-only" => FixtureKind::CrossOnly,
                "powerlaw" => FixtureKind::PowerLaw {
                    nodes: args.nodes,
                    alpha: args.alpha,
                },
                "network" => FixtureKind::Network {
                    ensemble: parse_ensemble(&args.ensemble)?,
                    n: args.n,
                    mean_degree: args.mean_degree,
                },
                other => {
                    return Err(CliError::Config(format!(
                        "kind: unknown fixture {other:?} \
                         (expected local, single-zip, cross-only, powerlaw, network)"
                    )))
                }
            };
            for path in commands::run_fixtures(&kind, &args.out_dir, args.seed)? {
                eprintln!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}
