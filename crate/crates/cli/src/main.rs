//! `temponet` — temporal cluster discovery in dynamic networks.
//!
//! Subcommands cover the full workflow: generate synthetic benchmark
//! networks, fit the tensor decomposition, cluster and rank memberships,
//! detect cluster lifetimes, score detections against planted truth, run
//! the whole pipeline in one step, or sweep a batch experiment. Every
//! stage writes plain JSON/CSV files that the next stage (or external
//! tooling) can load independently.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use temponet_core::baseline::ec_detected_views;
use temponet_core::cluster::{cluster_component, rank_and_filter};
use temponet_core::decomp::{cp_als, normalize_components};
use temponet_core::error::Error;
use temponet_core::eval::DetectedView;
use temponet_core::lifetime::network_threshold;
use temponet_core::pipeline::{
    cluster_lifetime, effective_window, fit_component_rate, load_input, rates_csv, read_json_file,
    run_experiment, run_pipeline, score_views, write_json_file, ClusterDumpEntry, ExperimentConfig,
    GroundTruthDump, InputSource, LifetimeDumpEntry, Method, PipelineConfig,
};
use temponet_core::synth::average_density;
use temponet_core::tensor::write_events_csv;
use temponet_core::{
    ClusterOptions, ClusterRecord, CpModel, CpOptions, DynTensor, LifetimeSet, PiecewiseRate,
    Result, SynthSpec,
};

#[derive(Parser)]
#[command(
    name = "temponet",
    version,
    about = "Temporal cluster discovery in dynamic networks",
    long_about = "Discovers groups of nodes with correlated interaction patterns in \
                  timestamped networks, estimates each group's activity rate over time, \
                  and reports the intervals during which it was active. Includes a \
                  synthetic benchmark generator, two reference baselines, and batch \
                  experiment drivers. Set TEMPONET_WORKERS to bound experiment \
                  concurrency."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic network with planted ground truth
    Synth(SynthArgs),
    /// Fit the non-negative tensor decomposition to a network
    Decompose(DecomposeArgs),
    /// Split component memberships into ranked clusters
    Cluster(ClusterArgs),
    /// Fit piecewise rates and detect cluster lifetimes
    Lifetimes(LifetimesArgs),
    /// Score detected clusters against planted ground truth
    Evaluate(EvaluateArgs),
    /// Run every stage on one network
    Pipeline(PipelineArgs),
    /// Run a batch experiment over synthetic networks
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Directory for tensor.json, ground_truth.json, and events.csv
    #[arg(long)]
    out_dir: PathBuf,
    /// Generator preset: "small" or "paper"
    #[arg(long, default_value = "small")]
    preset: String,
    /// Generator settings as JSON (partial files override the preset)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed
    #[arg(long)]
    seed: Option<u64>,
    /// Restrict planted rates to an average-density bucket, e.g. "0.3,0.4"
    #[arg(long)]
    density_bucket: Option<String>,
}

#[derive(Args)]
struct DecomposeArgs {
    /// Input network: a tensor .json or an edge-event .csv
    #[arg(long)]
    input: PathBuf,
    /// Directory for models.json and the aggregated tensor.json
    #[arg(long)]
    out_dir: PathBuf,
    /// Number of components to fit
    #[arg(long, default_value_t = 5)]
    rank: usize,
    /// Aggregation window in base time steps
    #[arg(long, default_value_t = 1)]
    granularity: usize,
    /// Fitting seed
    #[arg(long)]
    seed: Option<u64>,
    /// Solver settings as JSON
    #[arg(long)]
    config: Option<PathBuf>,
    /// Node count for event input (inferred when omitted)
    #[arg(long)]
    node_count: Option<usize>,
    /// Horizon for event input (inferred when omitted)
    #[arg(long)]
    horizon: Option<usize>,
    /// Keep self-loop events instead of dropping them
    #[arg(long)]
    self_loops: bool,
}

#[derive(Args)]
struct ClusterArgs {
    /// Fitted model file (models.json)
    #[arg(long)]
    model: PathBuf,
    /// Directory for clusters.json
    #[arg(long)]
    out_dir: PathBuf,
    /// Clustering seed
    #[arg(long)]
    seed: Option<u64>,
    /// Clustering settings as JSON: {"cluster": {...}, "drop_factor": ...}
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct LifetimesArgs {
    /// Fitted model file (models.json)
    #[arg(long)]
    model: PathBuf,
    /// The tensor the model was fitted to (tensor.json)
    #[arg(long)]
    tensor: PathBuf,
    /// Ranked cluster file (clusters.json)
    #[arg(long)]
    clusters: PathBuf,
    /// Directory for lifetimes.json and rates.csv
    #[arg(long)]
    out_dir: PathBuf,
    /// Sliding-window width for rate smoothing
    #[arg(long, default_value_t = 5)]
    window: usize,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Fitted model file (models.json)
    #[arg(long)]
    model: PathBuf,
    /// Cluster file to score (clusters.json / bc_clusters.json / ec_clusters.json)
    #[arg(long)]
    clusters: PathBuf,
    /// Ground-truth file (ground_truth.json)
    #[arg(long)]
    truth: PathBuf,
    /// Lifetime file matching the cluster file (enables lifetime scoring)
    #[arg(long)]
    lifetimes: Option<PathBuf>,
    /// Aggregated tensor file; required when scoring EC clusters
    #[arg(long)]
    tensor: Option<PathBuf>,
    /// Aggregation window the detections were computed at
    #[arg(long, default_value_t = 1)]
    granularity: usize,
    /// Directory for metrics.json and pr_curve.csv
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    /// Full pipeline configuration as JSON
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input network (.json tensor or .csv events); overrides the config
    #[arg(long)]
    input: Option<PathBuf>,
    /// Use a synthetic input from this preset when no config/input is given
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    granularity: Option<usize>,
    /// Also run the threshold-classification baseline at this cutoff
    #[arg(long)]
    bc_threshold: Option<f64>,
    /// Also run the evolutionary-clustering baseline with this many clusters
    #[arg(long)]
    ec_k: Option<usize>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Full experiment configuration as JSON
    #[arg(long)]
    config: Option<PathBuf>,
    /// Generator preset for the batch: "small" or "paper"
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Number of networks in the batch
    #[arg(long)]
    networks: Option<usize>,
    /// Worker bound (TEMPONET_WORKERS overrides)
    #[arg(long)]
    workers: Option<usize>,
    /// Restrict planted rates to an average-density bucket, e.g. "0.3,0.4"
    #[arg(long)]
    density_bucket: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Decompose(args) => cmd_decompose(args),
        Command::Cluster(args) => cmd_cluster(args),
        Command::Lifetimes(args) => cmd_lifetimes(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Pipeline(args) => cmd_pipeline(args),
        Command::Experiment(args) => cmd_experiment(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn spec_from_preset(preset: &str, seed: u64) -> Result<SynthSpec> {
    match preset {
        "small" => Ok(SynthSpec::small(seed)),
        "paper" => Ok(SynthSpec::paper(seed)),
        other => Err(Error::InvalidArgument(format!(
            "unknown preset \"{other}\" (expected \"small\" or \"paper\")"
        ))),
    }
}

fn parse_bucket(text: &str) -> Result<(f64, f64)> {
    let parts: Vec<&str> = text.split(',').collect();
    let err = || {
        Error::InvalidArgument(format!(
            "density bucket \"{text}\" must be \"lo,hi\" with lo < hi"
        ))
    };
    if parts.len() != 2 {
        return Err(err());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| err())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| err())?;
    if !(lo < hi) {
        return Err(err());
    }
    Ok((lo, hi))
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let mut spec = match &args.config {
        Some(path) => read_json_file(path)?,
        None => spec_from_preset(&args.preset, 0)?,
    };
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(text) = &args.density_bucket {
        let (lo, hi) = parse_bucket(text)?;
        spec = spec.with_density_bucket(lo, hi);
    }
    let (tensor, truth) = temponet_core::synth::generate(&spec)?;
    fs::create_dir_all(&args.out_dir)?;
    write_json_file(&args.out_dir.join("tensor.json"), &tensor)?;
    write_json_file(
        &args.out_dir.join("ground_truth.json"),
        &GroundTruthDump::new(&truth, &spec),
    )?;
    let file = fs::File::create(args.out_dir.join("events.csv"))?;
    write_events_csv(&tensor, std::io::BufWriter::new(file))?;
    let mean_density = if truth.clusters.is_empty() {
        0.0
    } else {
        truth.clusters.iter().map(average_density).sum::<f64>() / truth.clusters.len() as f64
    };
    println!(
        "generated {} nodes x {} steps, {} planted clusters, mean cluster density {:.3}",
        truth.node_count,
        truth.horizon,
        truth.clusters.len(),
        mean_density
    );
    println!("wrote {}", args.out_dir.join("tensor.json").display());
    println!("wrote {}", args.out_dir.join("ground_truth.json").display());
    println!("wrote {}", args.out_dir.join("events.csv").display());
    Ok(())
}

fn input_from_path(
    path: &Path,
    node_count: Option<usize>,
    horizon: Option<usize>,
    self_loops: bool,
) -> InputSource {
    if path.extension().and_then(|e| e.to_str()) == Some("csv") {
        InputSource::Events {
            path: path.to_path_buf(),
            node_count,
            horizon,
            self_loops,
        }
    } else {
        InputSource::Tensor {
            path: path.to_path_buf(),
        }
    }
}

fn cmd_decompose(args: DecomposeArgs) -> Result<()> {
    let mut options: CpOptions = match &args.config {
        Some(path) => read_json_file(path)?,
        None => CpOptions::default(),
    };
    if let Some(seed) = args.seed {
        options.seed = seed;
    }
    let input = input_from_path(&args.input, args.node_count, args.horizon, args.self_loops);
    let (raw, _) = load_input(&input)?;
    let tensor = raw.aggregate_granularity(args.granularity)?;
    let model = cp_als(&tensor, args.rank, &options)?;
    fs::create_dir_all(&args.out_dir)?;
    write_json_file(&args.out_dir.join("tensor.json"), &tensor)?;
    write_json_file(&args.out_dir.join("models.json"), &model)?;
    println!(
        "fitted rank {} to {} nodes x {} steps: fit error {:.6} after {} sweeps",
        model.rank,
        tensor.node_count(),
        tensor.horizon(),
        model.fit_error,
        model.iterations
    );
    println!("wrote {}", args.out_dir.join("tensor.json").display());
    println!("wrote {}", args.out_dir.join("models.json").display());
    Ok(())
}

/// Settings file for the cluster stage.
#[derive(serde::Serialize, serde::Deserialize, Default)]
#[serde(default)]
struct ClusterStageConfig {
    cluster: ClusterOptions,
    drop_factor: Option<f64>,
}

fn cmd_cluster(args: ClusterArgs) -> Result<()> {
    let mut cfg: ClusterStageConfig = match &args.config {
        Some(path) => read_json_file(path)?,
        None => ClusterStageConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.cluster.seed = seed;
    }
    let drop_factor = cfg.drop_factor.unwrap_or(5.0);
    let model: CpModel = read_json_file(&args.model)?;
    let components = normalize_components(&model);
    let mut clusters = Vec::new();
    for gm in &components {
        clusters.extend(cluster_component(gm, &cfg.cluster)?);
    }
    let ranked = rank_and_filter(clusters, drop_factor)?;
    let entries: Vec<ClusterDumpEntry> = ranked
        .iter()
        .map(|r| ClusterDumpEntry::from_record("TC", r))
        .collect();
    fs::create_dir_all(&args.out_dir)?;
    write_json_file(&args.out_dir.join("clusters.json"), &entries)?;
    let retained = ranked.iter().filter(|r| !r.filtered).count();
    println!(
        "{} clusters from {} components, {} retained after ranking",
        ranked.len(),
        components.len(),
        retained
    );
    println!("wrote {}", args.out_dir.join("clusters.json").display());
    Ok(())
}

/// Rebuilds an in-memory cluster record from a dump entry, deriving the
/// membership statistics from the component it points at.
fn record_from_dump(
    entry: &ClusterDumpEntry,
    memberships: &[f64],
) -> ClusterRecord {
    let mean = if entry.members.is_empty() {
        0.0
    } else {
        entry.members.iter().map(|&i| memberships[i]).sum::<f64>() / entry.members.len() as f64
    };
    ClusterRecord {
        model_index: entry.model_index,
        members: entry.members.clone(),
        so_score: entry.so_score,
        rank_position: entry.rank_position,
        mean_membership: mean,
        silhouette: None,
        filtered: entry.filtered,
    }
}

fn cmd_lifetimes(args: LifetimesArgs) -> Result<()> {
    let model: CpModel = read_json_file(&args.model)?;
    let tensor: DynTensor = read_json_file(&args.tensor)?;
    let entries: Vec<ClusterDumpEntry> = read_json_file(&args.clusters)?;
    if tensor.node_count() != model.node_count() || tensor.horizon() != model.horizon() {
        return Err(Error::InvalidArgument(format!(
            "tensor is {} nodes x {} steps but the model was fitted to {} x {}",
            tensor.node_count(),
            tensor.horizon(),
            model.node_count(),
            model.horizon()
        )));
    }
    let components = normalize_components(&model);
    let mut rates: Vec<Option<PiecewiseRate>> = Vec::with_capacity(components.len());
    for gm in &components {
        rates.push(fit_component_rate(&gm.rate_samples, args.window, gm.index)?);
    }
    let window = effective_window(tensor.horizon(), args.window);
    let threshold = network_threshold(&tensor, window)?;

    let mut dumps = Vec::new();
    for entry in entries.iter().filter(|e| !e.filtered) {
        if entry.model_index >= components.len() {
            return Err(Error::InvalidArgument(format!(
                "cluster references component {} but the model has rank {}",
                entry.model_index, model.rank
            )));
        }
        let gm = &components[entry.model_index];
        let record = record_from_dump(entry, &gm.memberships);
        let set = cluster_lifetime(&record, gm, &rates[entry.model_index], &threshold);
        dumps.push(LifetimeDumpEntry {
            method: entry.method.clone(),
            model_index: entry.model_index,
            members: entry.members.clone(),
            segments: rates[entry.model_index]
                .as_ref()
                .map(|r| r.segments.clone())
                .unwrap_or_default(),
            active_intervals: set.intervals.clone(),
        });
    }
    fs::create_dir_all(&args.out_dir)?;
    write_json_file(&args.out_dir.join("lifetimes.json"), &dumps)?;
    fs::write(
        args.out_dir.join("rates.csv"),
        rates_csv(&components, &rates, &threshold),
    )?;
    println!("detected lifetimes for {} clusters", dumps.len());
    println!("wrote {}", args.out_dir.join("lifetimes.json").display());
    println!("wrote {}", args.out_dir.join("rates.csv").display());
    Ok(())
}

fn expand_intervals(intervals: &[(usize, usize)]) -> Vec<usize> {
    let mut steps = Vec::new();
    for &(s, e) in intervals {
        steps.extend(s..=e);
    }
    steps
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let model: CpModel = read_json_file(&args.model)?;
    let entries: Vec<ClusterDumpEntry> = read_json_file(&args.clusters)?;
    let truth = read_json_file::<GroundTruthDump>(&args.truth)?.into_truth();
    let lifetime_entries: Vec<LifetimeDumpEntry> = match &args.lifetimes {
        Some(path) => read_json_file(path)?,
        None => Vec::new(),
    };
    let w = args.granularity;
    if w == 0 {
        return Err(Error::InvalidArgument(
            "granularity must be at least 1".to_string(),
        ));
    }
    let horizon = model.horizon();
    if truth.horizon.div_ceil(w) != horizon {
        return Err(Error::InvalidArgument(format!(
            "truth horizon {} at granularity {w} gives {} steps but the model has {}",
            truth.horizon,
            truth.horizon.div_ceil(w),
            horizon
        )));
    }

    let methods: BTreeSet<&str> = entries.iter().map(|e| e.method.as_str()).collect();
    if methods.len() > 1 {
        return Err(Error::InvalidArgument(format!(
            "cluster file mixes methods {methods:?}; evaluate one method at a time"
        )));
    }
    let method = methods.into_iter().next().unwrap_or("TC");

    let steps_for = |model_index: usize| -> Option<Vec<usize>> {
        lifetime_entries
            .iter()
            .find(|l| l.model_index == model_index)
            .map(|l| expand_intervals(&l.active_intervals))
    };

    let (views, lifetimes): (Vec<DetectedView>, Vec<Option<Vec<usize>>>) = match method {
        "EC" => {
            let tensor: DynTensor = match &args.tensor {
                Some(path) => read_json_file(path)?,
                None => {
                    return Err(Error::InvalidArgument(
                        "--tensor is required to evaluate EC clusters".to_string(),
                    ))
                }
            };
            let pairs: Vec<(ClusterRecord, LifetimeSet)> = entries
                .iter()
                .map(|e| {
                    let steps = steps_for(e.model_index).unwrap_or_default();
                    let intervals = temponet_core::lifetime::steps_to_intervals(&steps);
                    (
                        ClusterRecord {
                            model_index: e.model_index,
                            members: e.members.clone(),
                            so_score: e.so_score,
                            rank_position: e.rank_position,
                            mean_membership: 1.0,
                            silhouette: None,
                            filtered: e.filtered,
                        },
                        LifetimeSet {
                            model_index: e.model_index,
                            active_steps: steps,
                            intervals,
                        },
                    )
                })
                .collect();
            let views = ec_detected_views(&pairs, &tensor);
            let lifetimes = pairs
                .iter()
                .map(|(_, set)| Some(set.active_steps.clone()))
                .collect();
            (views, lifetimes)
        }
        _ => {
            let components = normalize_components(&model);
            let mut views = Vec::new();
            let mut lifetimes = Vec::new();
            for entry in entries.iter().filter(|e| !e.filtered) {
                if entry.model_index >= components.len() {
                    return Err(Error::InvalidArgument(format!(
                        "cluster references component {} but the model has rank {}",
                        entry.model_index, model.rank
                    )));
                }
                let gm = &components[entry.model_index];
                let segments = lifetime_entries
                    .iter()
                    .find(|l| l.model_index == entry.model_index)
                    .map(|l| l.segments.clone())
                    .unwrap_or_default();
                let rate: Vec<f64> = if segments.is_empty() {
                    gm.rate_samples.clone()
                } else {
                    let fit = PiecewiseRate {
                        segments,
                        source_model: entry.model_index,
                    };
                    (0..horizon).map(|t| fit.eval(t)).collect()
                };
                views.push(DetectedView {
                    members: entry.members.clone(),
                    memberships: gm.memberships.clone(),
                    rate,
                    model_index: entry.model_index,
                });
                lifetimes.push(steps_for(entry.model_index));
            }
            (views, lifetimes)
        }
    };

    let (_, report) = score_views(&views, &lifetimes, &truth, w)?;
    fs::create_dir_all(&args.out_dir)?;
    write_json_file(&args.out_dir.join("metrics.json"), &report)?;
    let mut curve = String::from("k,precision,recall\n");
    for (k, pt) in report.pr_curve.iter().enumerate() {
        curve.push_str(&format!("{},{},{}\n", k + 1, pt.precision, pt.recall));
    }
    fs::write(args.out_dir.join("pr_curve.csv"), curve)?;
    println!(
        "{method}: member F1 {:.4} (precision {:.4}, recall {:.4}), cluster F1 {:.4}",
        report.member_f1, report.member_precision, report.member_recall, report.cluster_f1
    );
    println!("wrote {}", args.out_dir.join("metrics.json").display());
    println!("wrote {}", args.out_dir.join("pr_curve.csv").display());
    Ok(())
}

fn cmd_pipeline(args: PipelineArgs) -> Result<()> {
    let mut config: PipelineConfig = match &args.config {
        Some(path) => read_json_file(path)?,
        None => {
            let input = match (&args.input, &args.preset) {
                (Some(path), _) => input_from_path(path, None, None, false),
                (None, preset) => InputSource::Synth {
                    spec: spec_from_preset(preset.as_deref().unwrap_or("small"), 0)?,
                },
            };
            PipelineConfig {
                input,
                granularity: 1,
                rank: 5,
                decomp: CpOptions::default(),
                cluster: ClusterOptions::default(),
                drop_factor: 5.0,
                smoothing_window: 5,
                bc_threshold: None,
                ec: None,
                out_dir: None,
                seed: 0,
            }
        }
    };
    if let Some(path) = &args.input {
        config.input = input_from_path(path, None, None, false);
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(dir) = &args.out_dir {
        config.out_dir = Some(dir.clone());
    }
    if let Some(rank) = args.rank {
        config.rank = rank;
    }
    if let Some(w) = args.granularity {
        config.granularity = w;
    }
    if let Some(t) = args.bc_threshold {
        config.bc_threshold = Some(t);
    }
    if let Some(k) = args.ec_k {
        let mut ec = config.ec.clone().unwrap_or_default();
        ec.k = k;
        config.ec = Some(ec);
    }

    let out = run_pipeline(&config)?;
    let retained: Vec<&ClusterRecord> = out.clusters.iter().filter(|c| !c.filtered).collect();
    println!(
        "decomposed {} nodes x {} steps at rank {}: fit error {:.6}",
        out.tensor.node_count(),
        out.tensor.horizon(),
        out.model.rank,
        out.model.fit_error
    );
    println!(
        "{} clusters, {} retained after ranking",
        out.clusters.len(),
        retained.len()
    );
    for (idx, set) in &out.lifetimes {
        let record = &out.clusters[*idx];
        println!(
            "  cluster #{} ({} nodes): active {} of {} steps over {} intervals",
            record.rank_position.unwrap_or(0),
            record.members.len(),
            set.active_steps.len(),
            out.tensor.horizon(),
            set.intervals.len()
        );
    }
    if let Some(dir) = &config.out_dir {
        println!("wrote outputs under {}", dir.display());
    }
    Ok(())
}

fn cmd_experiment(args: ExperimentArgs) -> Result<()> {
    let mut config: ExperimentConfig = match &args.config {
        Some(path) => read_json_file(path)?,
        None => serde_json::from_str("{}")?,
    };
    if let Some(preset) = &args.preset {
        config.spec = spec_from_preset(preset, config.spec.seed)?;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(dir) = &args.out_dir {
        config.out_dir = Some(dir.clone());
    }
    if let Some(n) = args.networks {
        config.networks = n;
    }
    if let Some(workers) = args.workers {
        config.workers = Some(workers);
    }
    if let Some(text) = &args.density_bucket {
        config.density_bucket = Some(parse_bucket(text)?);
    }

    let report = run_experiment(&config)?;
    println!(
        "{} networks, {} grid cells ({} failed)",
        report.networks,
        report.cells.len(),
        report.cells.iter().filter(|c| c.error.is_some()).count()
    );
    println!("method  w     rank_frac  member_f1  cluster_f1  lifetime_f1  ok");
    for row in &report.summary {
        let method = match row.method {
            Method::Tc => "TC",
            Method::Bc => "BC",
            Method::Ec => "EC",
        };
        println!(
            "{:<7} {:<5} {:<10} {:<10.4} {:<11.4} {:<12} {}",
            method,
            row.granularity,
            row.rank_fraction
                .map(|f| format!("{f:.2}"))
                .unwrap_or_else(|| "-".to_string()),
            row.mean_member_f1,
            row.mean_cluster_f1,
            row.mean_lifetime_f1
                .map(|f| format!("{f:.4}"))
                .unwrap_or_else(|| "-".to_string()),
            row.networks_ok
        );
    }
    if let Some(dir) = &config.out_dir {
        println!("wrote outputs under {}", dir.display());
    }
    Ok(())
}
