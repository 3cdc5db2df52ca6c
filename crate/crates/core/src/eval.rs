//! Mapping detected clusters to planted truth and scoring the result.
//!
//! Detected clusters are greedily mapped, in rank order, to the planted
//! cluster minimizing a normalized expected-count distance E; a distance of
//! 1 or more for every candidate maps the cluster to the empty set. The
//! mapping then yields member precision/recall/F1 (per pair, pooled, and as
//! a cumulative precision-recall curve), cluster-level recall/precision,
//! per-step lifetime F1, and a tensor-mass norm per cluster.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::DynTensor;

/// A detected cluster prepared for mapping: its member set, the component's
/// full membership vector, a dense rate series (fitted rate evaluated per
/// step, or raw rate samples when segmentation has not run), and the
/// component index the cluster came from.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectedView {
    pub members: Vec<usize>,
    pub memberships: Vec<f64>,
    pub rate: Vec<f64>,
    pub model_index: usize,
}

/// A planted cluster prepared for mapping: members and the expected
/// per-pair rate at every step (zero outside the lifetime).
#[derive(Debug, Clone, PartialEq)]
pub struct TruthView {
    pub members: Vec<usize>,
    pub rate: Vec<f64>,
}

impl TruthView {
    /// Expands a planted cluster into dense per-step expected rates.
    pub fn from_ground_truth(gt: &crate::synth::GroundTruthCluster, horizon: usize) -> Self {
        TruthView {
            members: gt.members.clone(),
            rate: (0..horizon).map(|t| gt.planted_rate(t)).collect(),
        }
    }
}

/// One mapped detected cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MappingPair {
    /// Position in the ranked detected list.
    pub rank_index: usize,
    /// Component the detected cluster came from.
    pub model_index: usize,
    /// Detected member count.
    pub detected_size: usize,
    /// Index of the matched planted cluster, or `None` for the empty set.
    pub matched_truth: Option<usize>,
    /// Member overlap with the matched truth (0 when unmatched).
    pub intersection: usize,
    /// The effective distance the match was chosen at.
    pub distance: f64,
}

/// The full mapping, with the truth-side totals needed by the metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterMapping {
    pub pairs: Vec<MappingPair>,
    pub truth_count: usize,
    /// Σ over all planted clusters of their member counts.
    pub total_truth_members: usize,
}

/// One precision-recall point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub precision: f64,
    pub recall: f64,
}

/// Aggregate evaluation of one mapping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub member_precision: f64,
    pub member_recall: f64,
    pub member_f1: f64,
    pub cluster_recall: f64,
    pub cluster_precision: f64,
    pub cluster_f1: f64,
    /// False when no detected clusters were retained, making precision a
    /// 0/0 that is reported as 0.
    pub cluster_precision_defined: bool,
    pub pr_curve: Vec<PrPoint>,
    /// Per matched cluster: lifetime agreement, when lifetimes were run.
    pub lifetime_f1: Vec<LifetimeScore>,
}

/// Lifetime agreement of one matched pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifetimeScore {
    pub rank_index: usize,
    pub model_index: usize,
    pub matched_truth: usize,
    pub f1: f64,
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn harmonic_f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn sorted_intersection_count(a: &[usize], b: &[usize]) -> usize {
    let mut i = 0;
    let mut j = 0;
    let mut n = 0;
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Normalized expected-count distance between a detected cluster and a
/// planted cluster.
///
/// Over every step and every ordered pair of distinct nodes drawn from the
/// union of the two member sets, the squared difference between the
/// detected model's expected count (membership product times rate, zero
/// for non-members) and the planted expected count is accumulated, then
/// divided by the planted side's own squared mass. Equal clusters with
/// identical rates score exactly 0; an empty detected cluster scores
/// exactly 1.
pub fn mapping_distance(detected: &DetectedView, truth: &TruthView) -> Result<f64> {
    if detected.rate.len() != truth.rate.len() {
        return Err(Error::InvalidArgument(format!(
            "rate series lengths differ: {} vs {}",
            detected.rate.len(),
            truth.rate.len()
        )));
    }
    let n_star = truth.members.len() as f64;
    let delta = n_star * n_star - n_star;
    let truth_mass: f64 = truth.rate.iter().map(|r| r * r).sum();
    if delta == 0.0 || truth_mass == 0.0 {
        return Err(Error::DegenerateInput(
            "planted cluster has no positive pair mass".to_string(),
        ));
    }

    // Reduce the pair sums to per-step scalars: with b the memberships
    // restricted to the detected members, Σ_{m≠o} b_m²b_o² = (Σb²)² − Σb⁴
    // multiplies the squared detected rate, and the cross term runs over
    // the intersection only (the planted rate is zero elsewhere).
    let mut sum_b2 = 0.0;
    let mut sum_b4 = 0.0;
    for &m in &detected.members {
        let a = detected.memberships[m];
        sum_b2 += a * a;
        sum_b4 += a * a * a * a;
    }
    let alpha = sum_b2 * sum_b2 - sum_b4;

    let mut sum_i = 0.0;
    let mut sum_i2 = 0.0;
    let mut ti = 0;
    for &m in &detected.members {
        while ti < truth.members.len() && truth.members[ti] < m {
            ti += 1;
        }
        if ti < truth.members.len() && truth.members[ti] == m {
            let a = detected.memberships[m];
            sum_i += a;
            sum_i2 += a * a;
        }
    }
    let beta = sum_i * sum_i - sum_i2;

    let det_sq: f64 = detected.rate.iter().map(|r| r * r).sum();
    let cross: f64 = detected
        .rate
        .iter()
        .zip(&truth.rate)
        .map(|(d, t)| d * t)
        .sum();

    let numerator = alpha * det_sq - 2.0 * beta * cross + delta * truth_mass;
    Ok(numerator / (delta * truth_mass))
}

/// Greedily maps ranked detected clusters to planted clusters.
///
/// Each detected cluster takes the truth with the smallest distance. A
/// truth already claimed by a cluster from a different component is off
/// limits (its distance is treated as 1); clusters from the same component
/// may share a truth, covering the case where one component was split into
/// sub-clusters. A cluster whose every effective distance reaches 1 maps
/// to the empty set.
pub fn map_clusters(detected: &[DetectedView], truths: &[TruthView]) -> Result<ClusterMapping> {
    let mut claimed_by: Vec<Option<usize>> = vec![None; truths.len()];
    let mut pairs = Vec::with_capacity(detected.len());
    for (idx, det) in detected.iter().enumerate() {
        let mut best: Option<(f64, usize)> = None;
        for (n, truth) in truths.iter().enumerate() {
            let blocked = matches!(claimed_by[n], Some(r) if r != det.model_index);
            let e = if blocked {
                1.0
            } else {
                mapping_distance(det, truth)?
            };
            if best.map_or(true, |(b, _)| e < b) {
                best = Some((e, n));
            }
        }
        let pair = match best {
            Some((e, n)) if e < 1.0 => {
                claimed_by[n] = Some(claimed_by[n].unwrap_or(det.model_index));
                MappingPair {
                    rank_index: idx,
                    model_index: det.model_index,
                    detected_size: det.members.len(),
                    matched_truth: Some(n),
                    intersection: sorted_intersection_count(&det.members, &truths[n].members),
                    distance: e,
                }
            }
            other => MappingPair {
                rank_index: idx,
                model_index: det.model_index,
                detected_size: det.members.len(),
                matched_truth: None,
                intersection: 0,
                distance: other.map_or(1.0, |(e, _)| e),
            },
        };
        pairs.push(pair);
    }
    Ok(ClusterMapping {
        pairs,
        truth_count: truths.len(),
        total_truth_members: truths.iter().map(|t| t.members.len()).sum(),
    })
}

/// Per-pair member precision/recall/F1 for one matched pair.
pub fn member_prf_pair(pair: &MappingPair, truth_size: usize) -> (f64, f64, f64) {
    let p = if pair.detected_size == 0 {
        0.0
    } else {
        pair.intersection as f64 / pair.detected_size as f64
    };
    let r = if truth_size == 0 {
        0.0
    } else {
        pair.intersection as f64 / truth_size as f64
    };
    (p, r, harmonic_f1(p, r))
}

/// Pooled member precision/recall/F1 over the whole mapping: summed
/// intersections against summed detected sizes (empty-set matches included)
/// and against the total planted membership. Identical to the final point
/// of [`pr_curve`].
pub fn member_prf_pooled(mapping: &ClusterMapping) -> (f64, f64, f64) {
    let hits: usize = mapping.pairs.iter().map(|p| p.intersection).sum();
    let det: usize = mapping.pairs.iter().map(|p| p.detected_size).sum();
    let p = if det == 0 { 0.0 } else { hits as f64 / det as f64 };
    let r = if mapping.total_truth_members == 0 {
        0.0
    } else {
        hits as f64 / mapping.total_truth_members as f64
    };
    (p, r, harmonic_f1(p, r))
}

/// Cluster-level recall `P/N`, precision `P/M`, and their harmonic mean,
/// where `P` counts distinct matched truths. When `M` is 0 precision is
/// reported as 0 with the accompanying flag in [`MetricsReport`] cleared.
pub fn cluster_prf(mapping: &ClusterMapping, truth_count: usize, retained: usize) -> (f64, f64, f64) {
    let mut matched: Vec<usize> = mapping
        .pairs
        .iter()
        .filter_map(|p| p.matched_truth)
        .collect();
    matched.sort_unstable();
    matched.dedup();
    let p_count = matched.len() as f64;
    let recall = if truth_count == 0 {
        0.0
    } else {
        p_count / truth_count as f64
    };
    let precision = if retained == 0 {
        0.0
    } else {
        p_count / retained as f64
    };
    (recall, precision, harmonic_f1(precision, recall))
}

/// Cumulative precision-recall curve down the ranked mapping: at position
/// k, precision is the summed intersection of the first k clusters over
/// their summed sizes, and recall is that intersection over the total
/// planted membership.
pub fn pr_curve(mapping: &ClusterMapping) -> Vec<PrPoint> {
    let mut hits = 0usize;
    let mut det = 0usize;
    let mut points = Vec::with_capacity(mapping.pairs.len());
    for pair in &mapping.pairs {
        hits += pair.intersection;
        det += pair.detected_size;
        points.push(PrPoint {
            precision: if det == 0 { 0.0 } else { hits as f64 / det as f64 },
            recall: if mapping.total_truth_members == 0 {
                0.0
            } else {
                hits as f64 / mapping.total_truth_members as f64
            },
        });
    }
    points
}

/// Per-step lifetime F1 between detected and planted active steps (both
/// sorted). Two empty lifetimes agree perfectly; a detected lifetime for a
/// truth that was never active scores 0.
pub fn lifetime_f1(detected: &[usize], truth: &[usize]) -> f64 {
    if truth.is_empty() {
        return if detected.is_empty() { 1.0 } else { 0.0 };
    }
    if detected.is_empty() {
        return 0.0;
    }
    let tp = sorted_intersection_count(detected, truth) as f64;
    let p = tp / detected.len() as f64;
    let r = tp / truth.len() as f64;
    harmonic_f1(p, r)
}

/// Mass of the tensor restricted to a cluster's pairs at the steps where a
/// time-loading column is positive: the square root of the summed squared
/// counts, mirrored entries counted on both sides.
pub fn cluster_norm(members: &[usize], tensor: &DynTensor, time_col: &[f64]) -> f64 {
    let set: std::collections::BTreeSet<usize> = members.iter().copied().collect();
    let mut total = 0.0;
    for (i, j, t, c) in tensor.iter() {
        if t < time_col.len() && time_col[t] > 0.0 && set.contains(&i) && set.contains(&j) {
            let weight = if i == j { 1.0 } else { 2.0 };
            total += weight * c * c;
        }
    }
    total.sqrt()
}

/// Assembles the aggregate report from a mapping and optional per-pair
/// lifetime scores.
pub fn build_report(mapping: &ClusterMapping, lifetime_f1: Vec<LifetimeScore>) -> MetricsReport {
    let (mp, mr, mf) = member_prf_pooled(mapping);
    let retained = mapping.pairs.len();
    let (cr, cp, cf) = cluster_prf(mapping, mapping.truth_count, retained);
    MetricsReport {
        member_precision: mp,
        member_recall: mr,
        member_f1: mf,
        cluster_recall: cr,
        cluster_precision: cp,
        cluster_f1: cf,
        cluster_precision_defined: retained > 0,
        pr_curve: pr_curve(mapping),
        lifetime_f1,
    }
}
