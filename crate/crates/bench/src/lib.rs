//! Shared fixtures for the benchmarks: deterministic synthetic networks
//! and pre-fitted models so each benchmark times exactly one stage.

use temponet_core::decomp::{cp_als, normalize_components, GenerativeModel};
use temponet_core::synth::generate;
use temponet_core::{CpModel, CpOptions, DynTensor, SynthSpec};

/// A compact planted network: 30 nodes, 60 steps, 3 disjoint clusters.
pub fn small_network(seed: u64) -> DynTensor {
    let spec = SynthSpec {
        node_count: 30,
        horizon: 60,
        cluster_count: 3,
        cluster_size: (6, 9),
        overlap_allowed: false,
        periodic_fraction: 0.0,
        period_range: (10, 20),
        background_noise_max: 0.002,
        ..SynthSpec::small(seed)
    };
    generate(&spec).expect("benchmark fixture generates").0
}

/// A desk-scale network from the standard preset: 100 nodes, 1000 steps.
pub fn preset_network(seed: u64) -> DynTensor {
    generate(&SynthSpec::small(seed)).expect("benchmark fixture generates").0
}

/// Fits the decomposition once so downstream stages can be benchmarked
/// in isolation.
pub fn fitted_model(tensor: &DynTensor, rank: usize) -> CpModel {
    cp_als(tensor, rank, &CpOptions::default()).expect("benchmark fixture fits")
}

/// The strongest normalized component of a fitted model.
pub fn leading_component(model: &CpModel) -> GenerativeModel {
    normalize_components(model)
        .into_iter()
        .max_by(|a, b| {
            let mass = |g: &GenerativeModel| g.rate_samples.iter().sum::<f64>();
            mass(a).total_cmp(&mass(b))
        })
        .expect("model has at least one component")
}

/// A noisy two-segment rate series for segmentation benchmarks.
pub fn piecewise_series(len: usize) -> Vec<f64> {
    (0..len)
        .map(|t| {
            let base = if t < len / 2 { 0.2 } else { 0.6 };
            // Small deterministic ripple stands in for sampling noise.
            base + 0.01 * ((t * 2654435761) % 1000) as f64 / 1000.0
        })
        .collect()
}
