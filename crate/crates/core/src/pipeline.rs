//! End-to-end orchestration: configuration, stage sequencing, file dumps,
//! and batch experiments over synthetic networks.
//!
//! `run_pipeline` drives ingest → aggregate → decompose → normalize →
//! cluster → rank → segment → lifetimes for one network, writing each
//! stage's output as a machine-readable file so any stage can be resumed
//! from disk. `run_experiment` generates a batch of synthetic networks and
//! scores the main method and the baselines over a (granularity, rank)
//! grid, emitting metric tables and plot-ready CSVs. All randomness
//! derives from one root seed through named stages, so identical
//! configurations reproduce identical outputs byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::baseline::{bc_ranked_list, ec_clustering, ec_detected_views, ec_to_clusters, EcConfig};
use crate::cluster::{cluster_component, rank_and_filter, ClusterOptions, ClusterRecord};
use crate::decomp::{cp_als, normalize_components, CpModel, CpOptions, GenerativeModel};
use crate::error::{Error, Result};
use crate::eval::{
    build_report, lifetime_f1, map_clusters, ClusterMapping, DetectedView, LifetimeScore,
    MetricsReport, TruthView,
};
use crate::lifetime::{
    default_threshold, detect_lifetime, estimate_noise, network_threshold, segment_series,
    sliding_window_filter, steps_to_intervals, LifetimeSet, PiecewiseRate, Segment,
};
use crate::seed::derive_seed;
use crate::synth::{generate, GroundTruth, GroundTruthCluster, SynthSpec};
use crate::tensor::{read_events_csv, DynTensor, EdgeEvent};

/// Where the pipeline's input network comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputSource {
    /// Edge-event CSV; shape is inferred from the events when not given.
    Events {
        path: PathBuf,
        #[serde(default)]
        node_count: Option<usize>,
        #[serde(default)]
        horizon: Option<usize>,
        #[serde(default)]
        self_loops: bool,
    },
    /// A serialized tensor file.
    Tensor { path: PathBuf },
    /// Generate a synthetic network from a specification.
    Synth { spec: SynthSpec },
}

/// Full configuration for one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub input: InputSource,
    /// Time-aggregation window in base steps.
    #[serde(default = "default_granularity")]
    pub granularity: usize,
    /// Decomposition rank.
    #[serde(default = "default_rank")]
    pub rank: usize,
    #[serde(default)]
    pub decomp: CpOptions,
    #[serde(default)]
    pub cluster: ClusterOptions,
    /// Score-drop factor for the ranking cut.
    #[serde(default = "default_drop_factor")]
    pub drop_factor: f64,
    /// Sliding-window width for rate smoothing and noise estimation.
    #[serde(default = "default_smoothing_window")]
    pub smoothing_window: usize,
    /// Run the threshold-classification baseline at this cutoff.
    #[serde(default)]
    pub bc_threshold: Option<f64>,
    /// Run the evolutionary-clustering baseline with this configuration.
    #[serde(default)]
    pub ec: Option<EcConfig>,
    /// Directory for output files; `None` keeps the run in memory.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Root seed; every stage derives its own stream from it.
    #[serde(default)]
    pub seed: u64,
}

fn default_granularity() -> usize {
    1
}
fn default_rank() -> usize {
    5
}
fn default_drop_factor() -> f64 {
    5.0
}
fn default_smoothing_window() -> usize {
    5
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.granularity == 0 {
            return Err(Error::InvalidArgument(
                "granularity must be at least 1".to_string(),
            ));
        }
        if self.rank == 0 {
            return Err(Error::InvalidArgument("rank must be at least 1".to_string()));
        }
        if !(self.drop_factor > 1.0) {
            return Err(Error::InvalidArgument(
                "drop_factor must exceed 1".to_string(),
            ));
        }
        if self.smoothing_window == 0 {
            return Err(Error::InvalidArgument(
                "smoothing_window must be at least 1".to_string(),
            ));
        }
        if let Some(t) = self.bc_threshold {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "bc_threshold must lie strictly between 0 and 1, got {t}"
                )));
            }
        }
        match &self.input {
            InputSource::Events { path, .. } | InputSource::Tensor { path } => {
                if !path.exists() {
                    return Err(Error::InvalidArgument(format!(
                        "input file {} does not exist",
                        path.display()
                    )));
                }
            }
            InputSource::Synth { spec } => spec.validate()?,
        }
        Ok(())
    }
}

/// All stage products of one run, kept in memory for direct inspection.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// The aggregated tensor the model was fitted to.
    pub tensor: DynTensor,
    /// Planted ground truth when the input was synthetic.
    pub truth: Option<GroundTruth>,
    pub model: CpModel,
    pub components: Vec<GenerativeModel>,
    /// Ranked cluster list, filtered entries included.
    pub clusters: Vec<ClusterRecord>,
    /// Fitted rate per component; `None` when the horizon is too short.
    pub rates: Vec<Option<PiecewiseRate>>,
    /// Network-average rate series used as the lifetime threshold.
    pub threshold: Vec<f64>,
    /// Lifetime per retained cluster, keyed by index into `clusters`.
    pub lifetimes: Vec<(usize, LifetimeSet)>,
    pub bc: Option<Vec<ClusterRecord>>,
    pub ec: Option<Vec<(ClusterRecord, LifetimeSet)>>,
}

/// One entry of the clusters dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterDumpEntry {
    pub method: String,
    pub model_index: usize,
    pub members: Vec<usize>,
    pub so_score: f64,
    pub rank_position: Option<usize>,
    pub filtered: bool,
}

impl ClusterDumpEntry {
    pub fn from_record(method: &str, record: &ClusterRecord) -> Self {
        ClusterDumpEntry {
            method: method.to_string(),
            model_index: record.model_index,
            members: record.members.clone(),
            so_score: record.so_score,
            rank_position: record.rank_position,
            filtered: record.filtered,
        }
    }
}

/// One entry of the lifetimes dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifetimeDumpEntry {
    pub method: String,
    pub model_index: usize,
    pub members: Vec<usize>,
    pub segments: Vec<Segment>,
    pub active_intervals: Vec<(usize, usize)>,
}

/// Ground-truth file layout: planted clusters plus the generating spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthDump {
    pub clusters: Vec<GroundTruthCluster>,
    pub noise_rate: f64,
    pub seed: u64,
    pub spec: SynthSpec,
}

impl GroundTruthDump {
    pub fn new(truth: &GroundTruth, spec: &SynthSpec) -> Self {
        GroundTruthDump {
            clusters: truth.clusters.clone(),
            noise_rate: truth.noise_rate,
            seed: truth.seed,
            spec: spec.clone(),
        }
    }

    pub fn into_truth(self) -> GroundTruth {
        GroundTruth {
            node_count: self.spec.node_count,
            horizon: self.spec.horizon,
            noise_rate: self.noise_rate,
            seed: self.seed,
            clusters: self.clusters,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StageStatus {
    status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stage: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

/// Serializes a value as pretty JSON with a trailing newline.
pub fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Reads a JSON file into a value.
pub fn read_json_file<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Largest odd window not exceeding the series length (at least 1).
pub fn effective_window(len: usize, window: usize) -> usize {
    let mut w = window.min(len).max(1);
    if w % 2 == 0 {
        w -= 1;
    }
    w.max(1)
}

/// Smooths a component's rate samples, estimates the noise level, and
/// segments the smoothed series into a piecewise-linear rate. Returns
/// `None` when fewer than two samples exist.
pub fn fit_component_rate(
    samples: &[f64],
    window: usize,
    source_model: usize,
) -> Result<Option<PiecewiseRate>> {
    if samples.len() < 2 {
        return Ok(None);
    }
    let w = effective_window(samples.len(), window);
    let noise = estimate_noise(samples, w)?;
    let e_max = default_threshold(&noise);
    let smoothed = sliding_window_filter(samples, w)?;
    let mut fit = segment_series(&smoothed, e_max)?;
    fit.source_model = source_model;
    Ok(Some(fit))
}

fn zero_model(node_count: usize, horizon: usize, rank: usize, options: &CpOptions) -> CpModel {
    CpModel {
        rank,
        scales: vec![0.0; rank],
        node_loadings: Array2::zeros((node_count, rank)),
        time_loadings: Array2::zeros((horizon, rank)),
        fit_error: 0.0,
        iterations: 0,
        objective_trace: vec![0.0],
        seed: options.seed,
        options: options.clone(),
    }
}

/// The core method stages on an already-aggregated tensor: decompose,
/// normalize, cluster, rank, fit rates, detect lifetimes.
pub struct TcRun {
    pub model: CpModel,
    pub components: Vec<GenerativeModel>,
    pub clusters: Vec<ClusterRecord>,
    pub rates: Vec<Option<PiecewiseRate>>,
    pub threshold: Vec<f64>,
    pub lifetimes: Vec<(usize, LifetimeSet)>,
}

/// Runs decomposition through lifetime detection on one tensor.
pub fn tc_run(
    tensor: &DynTensor,
    rank: usize,
    decomp: &CpOptions,
    cluster_opts: &ClusterOptions,
    drop_factor: f64,
    smoothing_window: usize,
) -> Result<TcRun> {
    let model = if tensor.nnz() == 0 {
        zero_model(tensor.node_count(), tensor.horizon(), rank, decomp)
    } else {
        cp_als(tensor, rank, decomp).map_err(|e| e.in_stage("decompose"))?
    };
    let components = normalize_components(&model);

    let mut clusters = Vec::new();
    for gm in &components {
        clusters.extend(cluster_component(gm, cluster_opts).map_err(|e| e.in_stage("cluster"))?);
    }
    let clusters = rank_and_filter(clusters, drop_factor).map_err(|e| e.in_stage("rank"))?;

    let mut rates = Vec::with_capacity(components.len());
    for gm in &components {
        rates.push(
            fit_component_rate(&gm.rate_samples, smoothing_window, gm.index)
                .map_err(|e| e.in_stage("segment"))?,
        );
    }

    let window = effective_window(tensor.horizon(), smoothing_window);
    let threshold = if tensor.horizon() == 0 {
        Vec::new()
    } else {
        network_threshold(tensor, window).map_err(|e| e.in_stage("lifetimes"))?
    };

    let mut lifetimes = Vec::new();
    for (idx, record) in clusters.iter().enumerate() {
        if record.filtered {
            continue;
        }
        let gm = &components[record.model_index];
        lifetimes.push((
            idx,
            cluster_lifetime(record, gm, &rates[record.model_index], &threshold),
        ));
    }

    Ok(TcRun {
        model,
        components,
        clusters,
        rates,
        threshold,
        lifetimes,
    })
}

/// A cluster's lifetime from its fitted rate when one exists, otherwise
/// from thresholding the raw rate samples directly (horizons too short to
/// segment).
pub fn cluster_lifetime(
    record: &ClusterRecord,
    gm: &GenerativeModel,
    rate: &Option<PiecewiseRate>,
    threshold: &[f64],
) -> LifetimeSet {
    match rate {
        Some(fit) => detect_lifetime(record, gm, fit, threshold),
        None => {
            let mean = if record.members.is_empty() {
                0.0
            } else {
                record.members.iter().map(|&i| gm.memberships[i]).sum::<f64>()
                    / record.members.len() as f64
            };
            let active_steps: Vec<usize> = threshold
                .iter()
                .enumerate()
                .filter(|&(t, &thr)| mean * mean * gm.rate_samples[t] > thr)
                .map(|(t, _)| t)
                .collect();
            let intervals = steps_to_intervals(&active_steps);
            LifetimeSet {
                model_index: gm.index,
                active_steps,
                intervals,
            }
        }
    }
}

/// Loads a network from any input source; synthetic sources also return
/// their planted ground truth.
pub fn load_input(input: &InputSource) -> Result<(DynTensor, Option<GroundTruth>)> {
    match input {
        InputSource::Events {
            path,
            node_count,
            horizon,
            self_loops,
        } => {
            let file = fs::File::open(path)?;
            let events = read_events_csv(std::io::BufReader::new(file))?;
            let (n, h) = match (node_count, horizon) {
                (Some(n), Some(h)) => (*n, *h),
                _ => infer_shape(&events),
            };
            let allow_loops = *self_loops || events.iter().any(|e| e.src == e.dst);
            Ok((
                DynTensor::from_edge_events(&events, n, h, allow_loops)?,
                None,
            ))
        }
        InputSource::Tensor { path } => {
            let tensor: DynTensor = read_json_file(path)?;
            Ok((tensor, None))
        }
        InputSource::Synth { spec } => {
            let (tensor, truth) = generate(spec)?;
            Ok((tensor, Some(truth)))
        }
    }
}

fn infer_shape(events: &[EdgeEvent]) -> (usize, usize) {
    let mut n = 0;
    let mut h = 0;
    for e in events {
        n = n.max(e.src + 1).max(e.dst + 1);
        h = h.max(e.t + 1);
    }
    (n, h)
}

/// Runs the full pipeline for one configuration, writing stage outputs to
/// the configured directory. On failure a status file names the failed
/// stage and any files already written remain for inspection.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutput> {
    config.validate()?;
    if let Some(dir) = &config.out_dir {
        fs::create_dir_all(dir)?;
    }
    let result = run_pipeline_inner(config);
    if let Some(dir) = &config.out_dir {
        let status = match &result {
            Ok(_) => StageStatus {
                status: "complete".to_string(),
                stage: None,
                error: None,
            },
            Err(e) => StageStatus {
                status: "incomplete".to_string(),
                stage: match e {
                    Error::Stage { stage, .. } => Some(stage.clone()),
                    _ => None,
                },
                error: Some(e.to_string()),
            },
        };
        write_json_file(&dir.join("status.json"), &status)?;
    }
    result
}

fn run_pipeline_inner(config: &PipelineConfig) -> Result<PipelineOutput> {
    // Every stage draws from its own derived stream so a stage can be
    // re-run in isolation with the same outcome.
    let mut input = config.input.clone();
    if let InputSource::Synth { spec } = &mut input {
        spec.seed = derive_seed(config.seed, "pipeline-synth", 0);
    }
    let mut decomp = config.decomp.clone();
    decomp.seed = derive_seed(config.seed, "pipeline-decompose", 0);
    let mut cluster_opts = config.cluster.clone();
    cluster_opts.seed = derive_seed(config.seed, "pipeline-cluster", 0);

    let (raw, truth) = load_input(&input).map_err(|e| e.in_stage("ingest"))?;
    if let (Some(dir), Some(t), InputSource::Synth { spec }) =
        (&config.out_dir, &truth, &input)
    {
        write_json_file(&dir.join("ground_truth.json"), &GroundTruthDump::new(t, spec))?;
    }

    let tensor = raw
        .aggregate_granularity(config.granularity)
        .map_err(|e| e.in_stage("aggregate"))?;
    if let Some(dir) = &config.out_dir {
        write_json_file(&dir.join("tensor.json"), &tensor)?;
    }

    let run = tc_run(
        &tensor,
        config.rank,
        &decomp,
        &cluster_opts,
        config.drop_factor,
        config.smoothing_window,
    )?;
    if let Some(dir) = &config.out_dir {
        write_json_file(&dir.join("models.json"), &run.model)?;
        let entries: Vec<ClusterDumpEntry> = run
            .clusters
            .iter()
            .map(|r| ClusterDumpEntry::from_record("TC", r))
            .collect();
        write_json_file(&dir.join("clusters.json"), &entries)?;
        let lifetimes: Vec<LifetimeDumpEntry> = run
            .lifetimes
            .iter()
            .map(|(idx, set)| LifetimeDumpEntry {
                method: "TC".to_string(),
                model_index: set.model_index,
                members: run.clusters[*idx].members.clone(),
                segments: run.rates[set.model_index]
                    .as_ref()
                    .map(|r| r.segments.clone())
                    .unwrap_or_default(),
                active_intervals: set.intervals.clone(),
            })
            .collect();
        write_json_file(&dir.join("lifetimes.json"), &lifetimes)?;
        fs::write(
            dir.join("rates.csv"),
            rates_csv(&run.components, &run.rates, &run.threshold),
        )?;
    }

    let bc = match config.bc_threshold {
        Some(threshold) => {
            let list =
                bc_ranked_list(&run.model, threshold).map_err(|e| e.in_stage("baseline-bc"))?;
            if let Some(dir) = &config.out_dir {
                let entries: Vec<ClusterDumpEntry> = list
                    .iter()
                    .map(|r| ClusterDumpEntry::from_record("BC", r))
                    .collect();
                write_json_file(&dir.join("bc_clusters.json"), &entries)?;
            }
            Some(list)
        }
        None => None,
    };

    let ec = match &config.ec {
        Some(cfg) => {
            let mut cfg = cfg.clone();
            cfg.seed = derive_seed(config.seed, "pipeline-ec", 0);
            let assignments =
                ec_clustering(&tensor, &cfg).map_err(|e| e.in_stage("baseline-ec"))?;
            let unified =
                ec_to_clusters(&assignments, None).map_err(|e| e.in_stage("baseline-ec"))?;
            if let Some(dir) = &config.out_dir {
                let entries: Vec<ClusterDumpEntry> = unified
                    .iter()
                    .map(|(r, _)| ClusterDumpEntry::from_record("EC", r))
                    .collect();
                write_json_file(&dir.join("ec_clusters.json"), &entries)?;
                let lifetimes: Vec<LifetimeDumpEntry> = unified
                    .iter()
                    .map(|(r, set)| LifetimeDumpEntry {
                        method: "EC".to_string(),
                        model_index: r.model_index,
                        members: r.members.clone(),
                        segments: Vec::new(),
                        active_intervals: set.intervals.clone(),
                    })
                    .collect();
                write_json_file(&dir.join("ec_lifetimes.json"), &lifetimes)?;
            }
            Some(unified)
        }
        None => None,
    };

    Ok(PipelineOutput {
        tensor,
        truth,
        model: run.model,
        components: run.components,
        clusters: run.clusters,
        rates: run.rates,
        threshold: run.threshold,
        lifetimes: run.lifetimes,
        bc,
        ec,
    })
}

/// Renders the per-component rate table: raw sample, fitted value, and the
/// network threshold at every step.
pub fn rates_csv(
    components: &[GenerativeModel],
    rates: &[Option<PiecewiseRate>],
    threshold: &[f64],
) -> String {
    let mut out = String::from("t,model_index,rate_sample,fitted_rate,network_threshold\n");
    for gm in components {
        for (t, &sample) in gm.rate_samples.iter().enumerate() {
            let fitted = match &rates[gm.index] {
                Some(fit) => fit.eval(t),
                None => sample,
            };
            let thr = threshold.get(t).copied().unwrap_or(0.0);
            out.push_str(&format!("{t},{},{sample},{fitted},{thr}\n", gm.index));
        }
    }
    out
}

/// Expands planted clusters into mapping views at an aggregation window:
/// expected counts sum over each window.
pub fn truth_views_at(truth: &GroundTruth, w: usize) -> Vec<TruthView> {
    let horizon = truth.horizon.div_ceil(w.max(1));
    truth
        .clusters
        .iter()
        .map(|c| {
            let mut rate = vec![0.0; horizon];
            for t in 0..truth.horizon {
                rate[t / w] += c.planted_rate(t);
            }
            TruthView {
                members: c.members.clone(),
                rate,
            }
        })
        .collect()
}

/// A planted cluster's active steps re-indexed to an aggregation window:
/// a window is active when any base step inside it is.
pub fn truth_active_steps_at(cluster: &GroundTruthCluster, w: usize) -> Vec<usize> {
    let mut steps: Vec<usize> = cluster.true_lifetime.iter().map(|&t| t / w.max(1)).collect();
    steps.dedup();
    steps
}

/// Mapping views for the retained clusters of a main-method run, paired
/// with their detected lifetimes. Rates come from the fitted piecewise
/// model when available, raw samples otherwise.
pub fn tc_detected_views(run: &TcRun, horizon: usize) -> (Vec<DetectedView>, Vec<Option<Vec<usize>>>) {
    let lifetime_by_cluster: std::collections::BTreeMap<usize, &LifetimeSet> =
        run.lifetimes.iter().map(|(idx, set)| (*idx, set)).collect();
    let mut views = Vec::new();
    let mut lifetimes = Vec::new();
    for (idx, record) in run.clusters.iter().enumerate() {
        if record.filtered {
            continue;
        }
        let gm = &run.components[record.model_index];
        let rate = match &run.rates[record.model_index] {
            Some(fit) => (0..horizon).map(|t| fit.eval(t)).collect(),
            None => gm.rate_samples.clone(),
        };
        views.push(DetectedView {
            members: record.members.clone(),
            memberships: gm.memberships.clone(),
            rate,
            model_index: record.model_index,
        });
        lifetimes.push(lifetime_by_cluster.get(&idx).map(|s| s.active_steps.clone()));
    }
    (views, lifetimes)
}

/// Mapping views for the retained entries of a threshold-classification
/// list (component memberships, raw rate samples).
pub fn bc_detected_views(
    components: &[GenerativeModel],
    list: &[ClusterRecord],
) -> Vec<DetectedView> {
    list.iter()
        .filter(|r| !r.filtered)
        .map(|r| DetectedView {
            members: r.members.clone(),
            memberships: components[r.model_index].memberships.clone(),
            rate: components[r.model_index].rate_samples.clone(),
            model_index: r.model_index,
        })
        .collect()
}

/// Maps detected views against planted truth at aggregation `w` and
/// assembles the metrics report, scoring lifetimes where provided.
pub fn score_views(
    views: &[DetectedView],
    detected_lifetimes: &[Option<Vec<usize>>],
    truth: &GroundTruth,
    w: usize,
) -> Result<(ClusterMapping, MetricsReport)> {
    let truth_views = truth_views_at(truth, w);
    let mapping = map_clusters(views, &truth_views)?;
    let mut scores = Vec::new();
    for pair in &mapping.pairs {
        let (Some(truth_idx), Some(Some(det_steps))) = (
            pair.matched_truth,
            detected_lifetimes.get(pair.rank_index),
        ) else {
            continue;
        };
        let truth_steps = truth_active_steps_at(&truth.clusters[truth_idx], w);
        scores.push(LifetimeScore {
            rank_index: pair.rank_index,
            model_index: pair.model_index,
            matched_truth: truth_idx,
            f1: lifetime_f1(det_steps, &truth_steps),
        });
    }
    Ok((mapping.clone(), build_report(&mapping, scores)))
}

/// Comparison methods selectable in experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "TC")]
    Tc,
    #[serde(rename = "BC")]
    Bc,
    #[serde(rename = "EC")]
    Ec,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Tc => "TC",
            Method::Bc => "BC",
            Method::Ec => "EC",
        })
    }
}

/// Batch experiment over synthetic networks: methods × granularities ×
/// rank settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Networks in the batch.
    #[serde(default = "default_networks")]
    pub networks: usize,
    /// Template specification; each network derives its own seed.
    #[serde(default = "SynthSpec::default")]
    pub spec: SynthSpec,
    /// Restrict planted rates to this average-density bucket.
    #[serde(default)]
    pub density_bucket: Option<(f64, f64)>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    /// Aggregation windows to sweep.
    #[serde(default = "default_granularities")]
    pub granularities: Vec<usize>,
    /// Decomposition ranks as fractions of the planted cluster count.
    #[serde(default = "default_rank_fractions")]
    pub rank_fractions: Vec<f64>,
    #[serde(default)]
    pub decomp: CpOptions,
    #[serde(default)]
    pub cluster: ClusterOptions,
    #[serde(default = "default_drop_factor")]
    pub drop_factor: f64,
    #[serde(default = "default_smoothing_window")]
    pub smoothing_window: usize,
    #[serde(default = "default_bc_threshold")]
    pub bc_threshold: f64,
    #[serde(default = "default_ec_beta")]
    pub ec_beta: f64,
    /// Worker bound for concurrent cells; the `TEMPONET_WORKERS`
    /// environment variable overrides it.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

fn default_networks() -> usize {
    5
}
fn default_methods() -> Vec<Method> {
    vec![Method::Tc]
}
fn default_granularities() -> Vec<usize> {
    vec![1]
}
fn default_rank_fractions() -> Vec<f64> {
    vec![1.0]
}
fn default_bc_threshold() -> f64 {
    0.5
}
fn default_ec_beta() -> f64 {
    0.5
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.networks == 0 {
            return Err(Error::InvalidArgument(
                "networks must be at least 1".to_string(),
            ));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidArgument(
                "method list must not be empty".to_string(),
            ));
        }
        if self.granularities.is_empty() || self.granularities.contains(&0) {
            return Err(Error::InvalidArgument(
                "granularities must be non-empty positive integers".to_string(),
            ));
        }
        if self.rank_fractions.is_empty() || self.rank_fractions.iter().any(|&f| !(f > 0.0)) {
            return Err(Error::InvalidArgument(
                "rank fractions must be non-empty and positive".to_string(),
            ));
        }
        if !(self.drop_factor > 1.0) {
            return Err(Error::InvalidArgument(
                "drop_factor must exceed 1".to_string(),
            ));
        }
        if !(self.bc_threshold > 0.0 && self.bc_threshold < 1.0) {
            return Err(Error::InvalidArgument(
                "bc_threshold must lie strictly between 0 and 1".to_string(),
            ));
        }
        if !(0.0..=1.0).contains(&self.ec_beta) {
            return Err(Error::InvalidArgument(
                "ec_beta must lie in [0, 1]".to_string(),
            ));
        }
        let mut spec = self.spec.clone();
        if let Some((lo, hi)) = self.density_bucket {
            spec = spec.with_density_bucket(lo, hi);
        }
        spec.validate()
    }
}

/// Result of one (network, method, granularity, rank) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub network: usize,
    pub method: Method,
    pub granularity: usize,
    /// Rank as a fraction of the planted cluster count; absent for
    /// methods that take no rank.
    pub rank_fraction: Option<f64>,
    /// The rank actually used, after rounding and capping.
    pub rank: Option<usize>,
    pub elapsed_ms: u64,
    pub report: Option<MetricsReport>,
    pub error: Option<String>,
}

/// Mean scores for one (method, granularity, rank) setting across the batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub granularity: usize,
    pub rank_fraction: Option<f64>,
    pub networks_ok: usize,
    pub networks_failed: usize,
    pub mean_member_f1: f64,
    pub mean_cluster_f1: f64,
    pub mean_lifetime_f1: Option<f64>,
}

/// Everything an experiment produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub networks: usize,
    pub seed: u64,
    pub density_bucket: Option<(f64, f64)>,
    pub summary: Vec<SummaryRow>,
    pub cells: Vec<CellResult>,
}

/// Resolves the worker bound: environment override first, then the
/// configured value; 0 lets the scheduler decide.
pub fn worker_bound(configured: Option<usize>) -> usize {
    if let Ok(text) = std::env::var("TEMPONET_WORKERS") {
        if let Ok(n) = text.trim().parse::<usize>() {
            return n;
        }
    }
    configured.unwrap_or(0)
}

fn run_cell_group(
    cfg: &ExperimentConfig,
    network: usize,
    tensor: &DynTensor,
    truth: &GroundTruth,
    w: usize,
) -> Vec<CellResult> {
    let mut results = Vec::new();
    let net_seed = derive_seed(cfg.seed, "experiment-network", network as u64);
    let agg = match tensor.aggregate_granularity(w) {
        Ok(t) => t,
        Err(e) => {
            for &method in &cfg.methods {
                results.push(CellResult {
                    network,
                    method,
                    granularity: w,
                    rank_fraction: None,
                    rank: None,
                    elapsed_ms: 0,
                    report: None,
                    error: Some(e.to_string()),
                });
            }
            return results;
        }
    };
    let planted_k = truth.clusters.len();
    let max_rank = agg.node_count().min(agg.horizon());

    let wants_tc = cfg.methods.contains(&Method::Tc);
    let wants_bc = cfg.methods.contains(&Method::Bc);
    if wants_tc || wants_bc {
        for (fidx, &fraction) in cfg.rank_fractions.iter().enumerate() {
            let rank = (((planted_k as f64) * fraction).round() as usize)
                .clamp(1, max_rank.max(1));
            let mut decomp = cfg.decomp.clone();
            decomp.seed = derive_seed(net_seed, "experiment-decompose", pack_cell(w, fidx));
            let mut cluster_opts = cfg.cluster.clone();
            cluster_opts.seed = derive_seed(net_seed, "experiment-cluster", pack_cell(w, fidx));
            let started = std::time::Instant::now();
            let run = tc_run(
                &agg,
                rank,
                &decomp,
                &cluster_opts,
                cfg.drop_factor,
                cfg.smoothing_window,
            );
            match run {
                Ok(run) => {
                    if wants_tc {
                        let (views, lifetimes) = tc_detected_views(&run, agg.horizon());
                        let scored = score_views(&views, &lifetimes, truth, w);
                        results.push(cell_from(
                            network,
                            Method::Tc,
                            w,
                            Some(fraction),
                            Some(rank),
                            started.elapsed(),
                            scored.map(|(_, r)| r),
                        ));
                    }
                    if wants_bc {
                        let bc_started = std::time::Instant::now();
                        let scored = bc_ranked_list(&run.model, cfg.bc_threshold).and_then(|list| {
                            let views = bc_detected_views(&run.components, &list);
                            let no_lifetimes = vec![None; views.len()];
                            score_views(&views, &no_lifetimes, truth, w)
                        });
                        results.push(cell_from(
                            network,
                            Method::Bc,
                            w,
                            Some(fraction),
                            Some(rank),
                            bc_started.elapsed(),
                            scored.map(|(_, r)| r),
                        ));
                    }
                }
                Err(e) => {
                    for &method in &cfg.methods {
                        if method == Method::Ec {
                            continue;
                        }
                        results.push(CellResult {
                            network,
                            method,
                            granularity: w,
                            rank_fraction: Some(fraction),
                            rank: Some(rank),
                            elapsed_ms: started.elapsed().as_millis() as u64,
                            report: None,
                            error: Some(e.to_string()),
                        });
                    }
                }
            }
        }
    }

    if cfg.methods.contains(&Method::Ec) {
        let started = std::time::Instant::now();
        let ec_cfg = EcConfig {
            beta: cfg.ec_beta,
            k: planted_k.clamp(1, agg.node_count()),
            seed: derive_seed(net_seed, "experiment-ec", w as u64),
        };
        let scored = ec_clustering(&agg, &ec_cfg)
            .and_then(|assignments| ec_to_clusters(&assignments, None))
            .and_then(|unified| {
                let views = ec_detected_views(&unified, &agg);
                let lifetimes: Vec<Option<Vec<usize>>> = unified
                    .iter()
                    .map(|(_, set)| Some(set.active_steps.clone()))
                    .collect();
                score_views(&views, &lifetimes, truth, w)
            });
        results.push(cell_from(
            network,
            Method::Ec,
            w,
            None,
            None,
            started.elapsed(),
            scored.map(|(_, r)| r),
        ));
    }

    results
}

fn pack_cell(w: usize, fidx: usize) -> u64 {
    ((w as u64) << 16) | (fidx as u64 & 0xffff)
}

fn cell_from(
    network: usize,
    method: Method,
    w: usize,
    fraction: Option<f64>,
    rank: Option<usize>,
    elapsed: std::time::Duration,
    scored: Result<MetricsReport>,
) -> CellResult {
    match scored {
        Ok(report) => CellResult {
            network,
            method,
            granularity: w,
            rank_fraction: fraction,
            rank,
            elapsed_ms: elapsed.as_millis() as u64,
            report: Some(report),
            error: None,
        },
        Err(e) => CellResult {
            network,
            method,
            granularity: w,
            rank_fraction: fraction,
            rank,
            elapsed_ms: elapsed.as_millis() as u64,
            report: None,
            error: Some(e.to_string()),
        },
    }
}

/// Generates the batch and runs the full method grid, writing the metrics
/// report and plot CSVs when an output directory is configured.
/// Per-network failures are recorded and the batch continues.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;

    let mut spec = cfg.spec.clone();
    if let Some((lo, hi)) = cfg.density_bucket {
        spec = spec.with_density_bucket(lo, hi);
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_bound(cfg.workers))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("worker pool: {e}")))?;

    // Generate every network (derived seeds make order irrelevant).
    let networks: Vec<Result<(DynTensor, GroundTruth)>> = pool.install(|| {
        (0..cfg.networks)
            .into_par_iter()
            .map(|n| {
                let mut s = spec.clone();
                s.seed = derive_seed(cfg.seed, "experiment-network", n as u64);
                generate(&s)
            })
            .collect()
    });

    let grid: Vec<(usize, usize)> = (0..cfg.networks)
        .flat_map(|n| cfg.granularities.iter().map(move |&w| (n, w)))
        .collect();
    let cells: Vec<CellResult> = pool.install(|| {
        grid.par_iter()
            .map(|&(n, w)| match &networks[n] {
                Ok((tensor, truth)) => run_cell_group(cfg, n, tensor, truth, w),
                Err(e) => cfg
                    .methods
                    .iter()
                    .map(|&method| CellResult {
                        network: n,
                        method,
                        granularity: w,
                        rank_fraction: None,
                        rank: None,
                        elapsed_ms: 0,
                        report: None,
                        error: Some(e.to_string()),
                    })
                    .collect(),
            })
            .collect::<Vec<Vec<CellResult>>>()
            .into_iter()
            .flatten()
            .collect()
    });

    let summary = summarize(cfg, &cells);
    let report = ExperimentReport {
        networks: cfg.networks,
        seed: cfg.seed,
        density_bucket: cfg.density_bucket,
        summary,
        cells,
    };

    if let Some(dir) = &cfg.out_dir {
        fs::create_dir_all(dir)?;
        write_json_file(&dir.join("metrics.json"), &report)?;
        fs::write(dir.join("f1_vs_granularity.csv"), summary_csv(&report))?;
        fs::write(dir.join("pr_curves.csv"), pr_curves_csv(&report))?;
        fs::write(dir.join("lifetime_f1.csv"), lifetime_csv(&report))?;
    }
    Ok(report)
}

fn summarize(cfg: &ExperimentConfig, cells: &[CellResult]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for &method in &cfg.methods {
        for &w in &cfg.granularities {
            let fractions: Vec<Option<f64>> = if method == Method::Ec {
                vec![None]
            } else {
                cfg.rank_fractions.iter().map(|&f| Some(f)).collect()
            };
            for fraction in fractions {
                let group: Vec<&CellResult> = cells
                    .iter()
                    .filter(|c| {
                        c.method == method && c.granularity == w && c.rank_fraction == fraction
                    })
                    .collect();
                if group.is_empty() {
                    continue;
                }
                let ok: Vec<&&CellResult> =
                    group.iter().filter(|c| c.report.is_some()).collect();
                let mean = |f: &dyn Fn(&MetricsReport) -> f64| -> f64 {
                    if ok.is_empty() {
                        0.0
                    } else {
                        ok.iter()
                            .map(|c| f(c.report.as_ref().unwrap()))
                            .sum::<f64>()
                            / ok.len() as f64
                    }
                };
                let lifetime_means: Vec<f64> = ok
                    .iter()
                    .filter_map(|c| {
                        let scores = &c.report.as_ref().unwrap().lifetime_f1;
                        if scores.is_empty() {
                            None
                        } else {
                            Some(
                                scores.iter().map(|s| s.f1).sum::<f64>() / scores.len() as f64,
                            )
                        }
                    })
                    .collect();
                rows.push(SummaryRow {
                    method,
                    granularity: w,
                    rank_fraction: fraction,
                    networks_ok: ok.len(),
                    networks_failed: group.len() - ok.len(),
                    mean_member_f1: mean(&|r| r.member_f1),
                    mean_cluster_f1: mean(&|r| r.cluster_f1),
                    mean_lifetime_f1: if lifetime_means.is_empty() {
                        None
                    } else {
                        Some(lifetime_means.iter().sum::<f64>() / lifetime_means.len() as f64)
                    },
                });
            }
        }
    }
    rows
}

fn fraction_text(f: Option<f64>) -> String {
    f.map(|v| v.to_string()).unwrap_or_default()
}

fn summary_csv(report: &ExperimentReport) -> String {
    let (lo, hi) = report
        .density_bucket
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .unwrap_or_default();
    let mut out = String::from(
        "method,granularity,rank_fraction,density_lo,density_hi,member_f1,cluster_f1,lifetime_f1,networks\n",
    );
    for row in &report.summary {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            row.method,
            row.granularity,
            fraction_text(row.rank_fraction),
            lo,
            hi,
            row.mean_member_f1,
            row.mean_cluster_f1,
            row.mean_lifetime_f1.map(|v| v.to_string()).unwrap_or_default(),
            row.networks_ok,
        ));
    }
    out
}

fn pr_curves_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("method,granularity,rank_fraction,network,k,precision,recall\n");
    for cell in &report.cells {
        let Some(r) = &cell.report else { continue };
        for (k, pt) in r.pr_curve.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                cell.method,
                cell.granularity,
                fraction_text(cell.rank_fraction),
                cell.network,
                k + 1,
                pt.precision,
                pt.recall,
            ));
        }
    }
    out
}

fn lifetime_csv(report: &ExperimentReport) -> String {
    let mut out = String::from("method,granularity,rank_fraction,network,model_index,matched_truth,f1\n");
    for cell in &report.cells {
        let Some(r) = &cell.report else { continue };
        for score in &r.lifetime_f1 {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                cell.method,
                cell.granularity,
                fraction_text(cell.rank_fraction),
                cell.network,
                score.model_index,
                score.matched_truth,
                score.f1,
            ));
        }
    }
    out
}
