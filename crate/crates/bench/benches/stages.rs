//! Stage-level benchmarks: decomposition sweeps, membership clustering,
//! rate segmentation, time aggregation, and cluster-truth mapping.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use temponet_bench::{
    fitted_model, leading_component, piecewise_series, preset_network, small_network,
};
use temponet_core::cluster::cluster_component;
use temponet_core::decomp::cp_als;
use temponet_core::eval::{map_clusters, DetectedView, TruthView};
use temponet_core::lifetime::{segment_series, sliding_window_filter};
use temponet_core::{ClusterOptions, CpOptions};

fn bench_decompose(c: &mut Criterion) {
    let tensor = small_network(7);
    c.bench_function("decompose_rank3_30x60", |b| {
        b.iter(|| cp_als(black_box(&tensor), 3, &CpOptions::default()).unwrap())
    });
}

fn bench_cluster(c: &mut Criterion) {
    let tensor = small_network(7);
    let model = fitted_model(&tensor, 3);
    let component = leading_component(&model);
    c.bench_function("cluster_component_30_nodes", |b| {
        b.iter(|| cluster_component(black_box(&component), &ClusterOptions::default()).unwrap())
    });
}

fn bench_segment(c: &mut Criterion) {
    let series = piecewise_series(1000);
    let smoothed = sliding_window_filter(&series, 5).unwrap();
    c.bench_function("segment_series_1000_steps", |b| {
        b.iter(|| segment_series(black_box(&smoothed), 1e-4).unwrap())
    });
}

fn bench_aggregate(c: &mut Criterion) {
    let tensor = preset_network(7);
    c.bench_function("aggregate_100x1000_w8", |b| {
        b.iter(|| black_box(&tensor).aggregate_granularity(8).unwrap())
    });
}

fn bench_mapping(c: &mut Criterion) {
    // Forty detected clusters against twenty planted ones, 100 nodes.
    let truth: Vec<TruthView> = (0..20)
        .map(|k| TruthView {
            members: (5 * k..5 * k + 5).collect(),
            rate: vec![0.5; 200],
        })
        .collect();
    let detected: Vec<DetectedView> = (0..40)
        .map(|k| {
            let members: Vec<usize> = (5 * (k % 20)..5 * (k % 20) + 5).collect();
            let mut memberships = vec![0.0; 100];
            for &m in &members {
                memberships[m] = 0.9;
            }
            DetectedView {
                members,
                memberships,
                rate: vec![0.45 + 0.001 * k as f64; 200],
                model_index: k,
            }
        })
        .collect();
    c.bench_function("map_40_detected_onto_20_planted", |b| {
        b.iter(|| map_clusters(black_box(&detected), black_box(&truth)).unwrap())
    });
}

criterion_group!(
    benches,
    bench_decompose,
    bench_cluster,
    bench_segment,
    bench_aggregate,
    bench_mapping
);
criterion_main!(benches);
