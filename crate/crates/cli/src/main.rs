//! Command-line experiment runner: single replays, Table-style sweeps, PCA
//! exports, and dataset acquisition instructions.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mlinucb::harness::{
    self, load_file_config, Algorithm, ExperimentConfig, FileConfig, OutputFormat,
};
use mlinucb::{
    bound_trace, load_csv, min_max_scale, pca2_variance, run_experiment, sweep, synth_linear,
    BanditDataset, CellResult, ClusterConfig, ClusterModel, DatasetSpec, LabelColumn, MaskMode,
};

#[derive(Parser)]
#[command(name = "mlinucb", version, about = "Contextual bandit replay experiments with missing-reward imputation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write per-round logs plus a summary row.
    Run(RunArgs),
    /// Run an algorithm x clusters x missing-rate grid and write the
    /// summary matrix.
    Sweep(SweepArgs),
    /// Export the 2D PCA projection of a dataset joined with k-means
    /// cluster assignments.
    Pca(PcaArgs),
    /// Print download and preparation instructions for the benchmark
    /// datasets.
    FetchInstructions,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Dataset: a preset (covertype, cnae9, internet_ads, warfarin,
    /// synthetic) or a path to a delimited file.
    #[arg(long)]
    dataset: Option<String>,

    /// Directory holding the prepared data files.
    #[arg(long, default_value = "data")]
    data_dir: PathBuf,

    /// Label column for file datasets: "last", a 0-based index, or a header
    /// name.
    #[arg(long)]
    label_column: Option<String>,

    /// Field delimiter for file datasets (single character).
    #[arg(long, default_value = ",")]
    delimiter: char,

    /// Min-max scale every feature into [0, 1] before the replay.
    #[arg(long)]
    scale_features: bool,

    /// Optional flat TOML config file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,

    /// Round-log format: ndjson or csv.
    #[arg(long, default_value = "ndjson")]
    format: String,

    /// Rows to keep (seeded subsample). Defaults to 20000 for covertype,
    /// unlimited otherwise.
    #[arg(long)]
    subsample: Option<usize>,

    /// Synthetic dataset shape.
    #[arg(long, default_value_t = 5000)]
    synth_rows: usize,
    #[arg(long, default_value_t = 10)]
    synth_dim: usize,
    #[arg(long, default_value_t = 3)]
    synth_arms: usize,
    #[arg(long, default_value_t = 0.0)]
    synth_noise: f64,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Algorithm: linucb, mlinucb, or random.
    #[arg(long)]
    algo: Option<String>,

    /// Exploration weight.
    #[arg(long)]
    alpha: Option<f64>,

    /// Number of clusters N (mlinucb).
    #[arg(long)]
    clusters: Option<usize>,

    /// Imputation neighbors m (mlinucb).
    #[arg(long)]
    neighbors: Option<usize>,

    /// Fraction of rewards hidden from the policy.
    #[arg(long)]
    missing_rate: Option<f64>,

    #[arg(long)]
    seed: Option<u64>,

    /// Passes over the shuffled dataset.
    #[arg(long)]
    passes: Option<usize>,

    /// Bound-trace confidence parameter.
    #[arg(long)]
    delta: Option<f64>,

    /// Bound-trace noise scale.
    #[arg(long)]
    sigma: Option<f64>,

    /// Reward masking: bernoulli or fixed_count.
    #[arg(long)]
    mask_mode: Option<String>,

    /// Re-cluster the full context history every round (fidelity mode).
    #[arg(long)]
    full_recluster: bool,

    /// Also dump the final centroids (mlinucb).
    #[arg(long)]
    dump_centroids: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Algorithms to sweep.
    #[arg(long, value_delimiter = ',', default_values_t = ["linucb".to_string(), "mlinucb".to_string()])]
    algos: Vec<String>,

    /// Cluster counts for mlinucb cells.
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 5, 10, 15, 20])]
    clusters: Vec<usize>,

    /// Imputation neighbors m.
    #[arg(long)]
    neighbors: Option<usize>,

    /// Missing-reward rates.
    #[arg(long, value_delimiter = ',', default_values_t = [0.1f64, 0.5, 0.75])]
    missing_rates: Vec<f64>,

    /// Exploration weights (a single value reproduces the accuracy tables;
    /// a list gives the alpha-sweep series).
    #[arg(long, value_delimiter = ',', default_values_t = [0.25f64])]
    alphas: Vec<f64>,

    /// Base seed; runs use seed, seed+1, ...
    #[arg(long)]
    seed: Option<u64>,

    /// Seeds (runs) per cell.
    #[arg(long)]
    seeds: Option<usize>,

    #[arg(long)]
    passes: Option<usize>,

    #[arg(long)]
    mask_mode: Option<String>,

    #[arg(long)]
    full_recluster: bool,

    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    jobs: usize,

    /// Also write per-round logs for every cell and seed.
    #[arg(long)]
    rounds: bool,
}

#[derive(Args)]
struct PcaArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Clusters for the joined k-means assignment column.
    #[arg(long, default_value_t = 5)]
    clusters: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Pca(args) => cmd_pca(args),
        Command::FetchInstructions => {
            print!("{}", mlinucb::ingest::fetch_instructions());
            Ok(())
        }
    }
}

fn file_config(common: &CommonArgs) -> Result<FileConfig> {
    match &common.config {
        Some(path) => {
            load_file_config(path).with_context(|| format!("reading {}", path.display()))
        }
        None => Ok(FileConfig::default()),
    }
}

/// Load the dataset named by flags/config. `apply_scale` is for commands
/// that consume the dataset directly (pca); run/sweep leave scaling to the
/// experiment runner, which honors the config flag.
fn resolve_dataset(
    common: &CommonArgs,
    file: &FileConfig,
    seed: u64,
    apply_scale: bool,
) -> Result<BanditDataset> {
    let name = common
        .dataset
        .clone()
        .or_else(|| file.dataset.clone())
        .unwrap_or_else(|| "synthetic".to_string());
    let data_dir = file
        .data_dir
        .as_ref()
        .map(PathBuf::from)
        .unwrap_or_else(|| common.data_dir.clone());

    let ds = if name == "synthetic" {
        synth_linear(
            common.synth_rows,
            common.synth_dim,
            common.synth_arms,
            common.synth_noise,
            seed,
        )?
        .0
    } else if matches!(
        name.as_str(),
        "covertype" | "cnae9" | "internet_ads" | "warfarin"
    ) {
        let spec = DatasetSpec::preset(&name, &data_dir)?;
        if !spec.path.exists() {
            bail!(
                "{} not found at {}; run `mlinucb fetch-instructions` for download steps",
                name,
                spec.path.display()
            );
        }
        load_csv(&spec)?
    } else {
        let path = Path::new(&name);
        if !path.exists() {
            bail!(
                "'{}' is neither a dataset preset nor an existing file; run `mlinucb fetch-instructions`",
                name
            );
        }
        let label = common
            .label_column
            .clone()
            .or_else(|| file.label_column.clone())
            .map(|s| LabelColumn::parse(&s))
            .unwrap_or(LabelColumn::Last);
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_else(|| "custom".to_string());
        let mut spec = DatasetSpec::custom(stem, path, label);
        if !common.delimiter.is_ascii() {
            bail!("--delimiter must be a single ASCII character");
        }
        spec.delimiter = common.delimiter as u8;
        // a header row is required to address a label column by name
        if matches!(spec.label_column, LabelColumn::Name(_)) {
            spec.has_header = true;
        }
        load_csv(&spec)?
    };

    let scale = apply_scale && (common.scale_features || file.scale_features.unwrap_or(false));
    Ok(if scale { min_max_scale(&ds)? } else { ds })
}

fn scale_flag(common: &CommonArgs, file: &FileConfig) -> bool {
    common.scale_features || file.scale_features.unwrap_or(false)
}

fn default_subsample(dataset: &str, explicit: Option<usize>) -> Option<usize> {
    // Covertype is far beyond desk scale; cap it unless told otherwise.
    explicit.or(if dataset == "covertype" {
        Some(20_000)
    } else {
        None
    })
}

fn parse_mask_mode(s: &str) -> Result<MaskMode> {
    match s.to_ascii_lowercase().as_str() {
        "bernoulli" => Ok(MaskMode::Bernoulli),
        "fixed_count" | "fixed-count" => Ok(MaskMode::FixedCount),
        other => bail!("unknown mask mode '{other}'; expected bernoulli or fixed_count"),
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let file = file_config(&args.common)?;
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let ds = resolve_dataset(&args.common, &file, seed, false)?;
    let dataset_name = ds.name().to_string();
    let defaults = ExperimentConfig::default();

    let cfg = ExperimentConfig {
        dataset: dataset_name.clone(),
        algorithm: Algorithm::from_str(
            &args
                .algo
                .clone()
                .or_else(|| file.algo.clone())
                .unwrap_or_else(|| "mlinucb".to_string()),
        )?,
        alpha: args.alpha.or(file.alpha).unwrap_or(defaults.alpha),
        clusters: args
            .clusters
            .or(file.clusters)
            .unwrap_or(defaults.clusters),
        neighbors: args
            .neighbors
            .or(file.neighbors)
            .unwrap_or(defaults.neighbors),
        missing_rate: args
            .missing_rate
            .or(file.missing_rate)
            .unwrap_or(defaults.missing_rate),
        seed,
        subsample: default_subsample(&dataset_name, args.common.subsample.or(file.subsample)),
        passes: args.passes.or(file.passes).unwrap_or(defaults.passes),
        delta: args.delta.or(file.delta).unwrap_or(defaults.delta),
        sigma: args.sigma.or(file.sigma).unwrap_or(defaults.sigma),
        mask_mode: match args.mask_mode.clone().or_else(|| file.mask_mode.clone()) {
            Some(s) => parse_mask_mode(&s)?,
            None => defaults.mask_mode,
        },
        full_recluster: args.full_recluster || file.full_recluster.unwrap_or(false),
        scale_features: scale_flag(&args.common, &file),
    };
    cfg.validate()?;

    let format = OutputFormat::from_str(&args.common.format)?;
    let out_dir = file
        .out_dir
        .as_ref()
        .map(PathBuf::from)
        .unwrap_or_else(|| args.common.out_dir.clone());
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;

    let artifacts = harness::run_experiment_full(&cfg, &ds)?;
    let (summary, logs) = (artifacts.summary, artifacts.logs);
    let cell = cfg.cell_id();

    let rounds_path = out_dir.join(match format {
        OutputFormat::Ndjson => format!("rounds-{cell}.ndjson"),
        OutputFormat::Csv => format!("rounds-{cell}.csv"),
    });
    harness::write_rounds(&logs, &rounds_path, format)?;

    if cfg.algorithm != Algorithm::Random {
        let trace = bound_trace(&logs, &cfg, ds.dim());
        harness::write_bound_trace(&trace, &out_dir.join(format!("trace-{cell}.csv")))?;
    }

    let cell_result = CellResult {
        config: cfg.clone(),
        seeds: vec![seed],
        accuracies: vec![summary.total_average_accuracy],
        acc_mean: summary.total_average_accuracy,
        acc_std: 0.0,
        regret_mean: summary.cumulative_regret as f64,
        error: None,
    };
    harness::write_summary_csv(&[cell_result], &out_dir.join("summary.csv"))?;

    if args.dump_centroids {
        match &artifacts.clusters {
            Some(model) => harness::write_centroids(
                model,
                ds.num_arms(),
                &out_dir.join(format!("centroids-{cell}.ndjson")),
            )?,
            None => log::warn!("--dump-centroids only applies to mlinucb; skipping"),
        }
    }

    println!(
        "{cell}: rounds={} accuracy={:.4} regret={} missing={:.3} wall={:.2}s",
        summary.rounds,
        summary.total_average_accuracy,
        summary.cumulative_regret,
        summary.missing_fraction_realized,
        summary.wall_time_secs
    );
    println!("wrote {}", rounds_path.display());
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let file = file_config(&args.common)?;
    let base_seed = args.seed.or(file.seed).unwrap_or(0);
    let ds = resolve_dataset(&args.common, &file, base_seed, false)?;
    let dataset_name = ds.name().to_string();
    let n_seeds = args.seeds.or(file.seeds).unwrap_or(5);
    let seeds: Vec<u64> = (0..n_seeds as u64).map(|i| base_seed + i).collect();
    let defaults = ExperimentConfig::default();

    let template = ExperimentConfig {
        dataset: dataset_name.clone(),
        algorithm: Algorithm::LinUcb,
        alpha: defaults.alpha,
        clusters: defaults.clusters,
        neighbors: args
            .neighbors
            .or(file.neighbors)
            .unwrap_or(defaults.neighbors),
        missing_rate: defaults.missing_rate,
        seed: base_seed,
        subsample: default_subsample(&dataset_name, args.common.subsample.or(file.subsample)),
        passes: args.passes.or(file.passes).unwrap_or(defaults.passes),
        delta: file.delta.unwrap_or(defaults.delta),
        sigma: file.sigma.unwrap_or(defaults.sigma),
        mask_mode: match args.mask_mode.clone().or_else(|| file.mask_mode.clone()) {
            Some(s) => parse_mask_mode(&s)?,
            None => defaults.mask_mode,
        },
        full_recluster: args.full_recluster || file.full_recluster.unwrap_or(false),
        scale_features: scale_flag(&args.common, &file),
    };

    let mut cells = Vec::new();
    for algo_name in &args.algos {
        let algorithm = Algorithm::from_str(algo_name)?;
        for &alpha in &args.alphas {
            for &missing_rate in &args.missing_rates {
                match algorithm {
                    Algorithm::MlinUcb => {
                        for &n in &args.clusters {
                            cells.push(ExperimentConfig {
                                algorithm,
                                alpha,
                                missing_rate,
                                clusters: n,
                                ..template.clone()
                            });
                        }
                    }
                    _ => cells.push(ExperimentConfig {
                        algorithm,
                        alpha,
                        missing_rate,
                        ..template.clone()
                    }),
                }
            }
        }
    }
    for cell in &cells {
        cell.validate()?;
    }

    let out_dir = file
        .out_dir
        .as_ref()
        .map(PathBuf::from)
        .unwrap_or_else(|| args.common.out_dir.clone());
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;

    log::info!(
        "sweeping {} cells x {} seeds over {} ({} rows, d={}, K={})",
        cells.len(),
        seeds.len(),
        ds.name(),
        ds.rows(),
        ds.dim(),
        ds.num_arms()
    );
    let results = sweep(&ds, &cells, &seeds, args.jobs);

    let summary_path = out_dir.join("summary.csv");
    harness::write_summary_csv(&results, &summary_path)?;

    if args.rounds {
        let format = OutputFormat::from_str(&args.common.format)?;
        for cell in &results {
            for &seed in &cell.seeds {
                let mut cfg = cell.config.clone();
                cfg.seed = seed;
                let (_, logs) = run_experiment(&cfg, &ds)?;
                let name = match format {
                    OutputFormat::Ndjson => format!("rounds-{}.ndjson", cfg.cell_id()),
                    OutputFormat::Csv => format!("rounds-{}.csv", cfg.cell_id()),
                };
                harness::write_rounds(&logs, &out_dir.join(name), format)?;
            }
        }
    }

    for cell in &results {
        match &cell.error {
            Some(err) => println!("{}: ERROR {err}", cell.config.cell_id()),
            None => println!(
                "{}-{}{}: p={} acc={:.4} +/- {:.4} regret={:.1}",
                cell.config.dataset,
                cell.config.algorithm,
                match cell.config.algorithm {
                    Algorithm::MlinUcb => format!("-N{}", cell.config.clusters),
                    _ => String::new(),
                },
                cell.config.missing_rate,
                cell.acc_mean,
                cell.acc_std,
                cell.regret_mean
            ),
        }
    }
    println!("wrote {}", summary_path.display());
    Ok(())
}

fn cmd_pca(args: PcaArgs) -> Result<()> {
    let file = file_config(&args.common)?;
    let ds = resolve_dataset(&args.common, &file, args.seed, true)?;
    let pca = pca2_variance(&ds)?;

    let mut model = ClusterModel::new(
        ClusterConfig::new(args.clusters, 1, args.seed),
        ds.num_arms(),
    )?;
    let points: Vec<Vec<f64>> = (0..ds.rows()).map(|t| ds.context(t).to_vec()).collect();
    model.initialize(&points)?;
    let cluster_ids = (0..ds.rows())
        .map(|t| model.assign(ds.context(t)).map(|(j, _)| j))
        .collect::<mlinucb::Result<Vec<_>>>()?;

    let out_dir = file
        .out_dir
        .as_ref()
        .map(PathBuf::from)
        .unwrap_or_else(|| args.common.out_dir.clone());
    std::fs::create_dir_all(&out_dir)?;
    let path = out_dir.join(format!("pca-{}.csv", ds.name()));
    let labels: Vec<usize> = (0..ds.rows()).map(|t| ds.label(t)).collect();
    harness::write_pca_csv(&pca, &labels, Some(&cluster_ids), &path)?;

    println!(
        "{}: 2D PCA captures {:.1}% of the variance (lambda = {:.6}, {:.6})",
        ds.name(),
        100.0 * pca.explained_fraction,
        pca.eigenvalues[0],
        pca.eigenvalues[1]
    );
    println!("wrote {}", path.display());
    Ok(())
}
