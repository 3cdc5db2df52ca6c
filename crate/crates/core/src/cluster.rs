//! Splitting normalized components into clusters and ranking them.
//!
//! A component's memberships induce a similarity `s(i, j) = a_i * a_j`
//! between nodes. Memberships are grouped by one-dimensional K-means over
//! their distinct values, the number of groups is chosen by the mean
//! similarity-based Silhouette, and every resulting cluster is scored by how
//! strongly and how long its members participate in the component. Ranked
//! scores are cut at the sharpest sufficiently-large drop; clusters below
//! the cut stay in the output flagged as filtered.

use serde::{Deserialize, Serialize};

use crate::decomp::GenerativeModel;
use crate::error::{Error, Result};
use crate::kmeans::kmeans_1d_weighted;
use crate::seed::rng_from;

/// Options for [`cluster_component`].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct ClusterOptions {
    /// Largest K considered; the effective ceiling is also bounded by the
    /// number of distinct membership values.
    pub k_max: usize,
    /// K-means restarts per candidate K.
    pub restarts: usize,
    /// Root seed for K-means initialization.
    pub seed: u64,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        ClusterOptions {
            k_max: 10,
            restarts: 10,
            seed: 0,
        }
    }
}

/// One detected cluster of a component.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterRecord {
    /// Index of the component (generative model) the cluster came from.
    pub model_index: usize,
    /// Member node ids, ascending. Empty only for baseline records that
    /// preserve list positions; clustering never emits an empty record.
    pub members: Vec<usize>,
    /// Strength-times-duration score used for ranking.
    pub so_score: f64,
    /// 1-based position in the ranked list; `None` before ranking.
    pub rank_position: Option<usize>,
    /// Mean membership of the members.
    pub mean_membership: f64,
    /// Mean Silhouette of the adopted split; `None` when the component was
    /// emitted as a single group (uniform memberships or no multi-group
    /// structure).
    pub silhouette: Option<f64>,
    /// Set by ranking for clusters below the elbow cut.
    pub filtered: bool,
}

/// Similarity of two nodes under a component: the product of their
/// memberships.
pub fn node_similarity(gm: &GenerativeModel, i: usize, j: usize) -> f64 {
    gm.memberships[i] * gm.memberships[j]
}

/// Mean similarity-based Silhouette of an assignment.
///
/// With `d(i, C) = sum_{j in C} s(i, j) / |C|` (self included), each node
/// scores `(d(i, own) - max_other d(i, other)) / max_all d(i, C)`, or 0 when
/// every `d` is 0. Requires at least two non-empty clusters.
pub fn silhouette(assignments: &[usize], gm: &GenerativeModel) -> Result<f64> {
    let n = gm.memberships.len();
    if assignments.len() != n {
        return Err(Error::InvalidArgument(format!(
            "assignment length {} does not match node count {n}",
            assignments.len()
        )));
    }
    let k = assignments.iter().map(|&c| c + 1).max().unwrap_or(0);
    let mut sizes = vec![0usize; k];
    let mut sums = vec![0.0f64; k];
    for (i, &c) in assignments.iter().enumerate() {
        sizes[c] += 1;
        sums[c] += gm.memberships[i];
    }
    let live: Vec<usize> = (0..k).filter(|&c| sizes[c] > 0).collect();
    if live.len() < 2 {
        return Err(Error::DegenerateInput(
            "silhouette requires at least two non-empty clusters".to_string(),
        ));
    }
    let mut total = 0.0;
    for i in 0..n {
        let a_i = gm.memberships[i];
        let own = assignments[i];
        let mut d_own = 0.0;
        let mut d_other = 0.0;
        let mut d_max = 0.0f64;
        for &c in &live {
            let d = a_i * sums[c] / sizes[c] as f64;
            if c == own {
                d_own = d;
            } else if d > d_other {
                d_other = d;
            }
            if d > d_max {
                d_max = d;
            }
        }
        if d_max > 0.0 {
            total += (d_own - d_other) / d_max;
        }
    }
    Ok(total / n as f64)
}

/// Strength-times-duration score of a cluster under a component:
/// `(mean member membership)^2 * sum_t rate_samples[t]`.
pub fn so_score(members: &[usize], gm: &GenerativeModel) -> Result<f64> {
    if members.is_empty() {
        return Err(Error::DegenerateInput(
            "so_score of an empty cluster is undefined".to_string(),
        ));
    }
    let mean: f64 =
        members.iter().map(|&i| gm.memberships[i]).sum::<f64>() / members.len() as f64;
    let duration: f64 = gm.rate_samples.iter().sum();
    Ok(mean * mean * duration)
}

/// Splits one component into clusters.
///
/// Zero components yield no clusters. Components whose memberships take a
/// single value yield one unsplit cluster (Silhouette undefined). Otherwise
/// K runs over `2..=min(k_max, distinct values, node count − 1)` and the
/// split with the best mean Silhouette wins unconditionally — a negative
/// best score still splits, because low-participation cells are meant to be
/// removed later by score ranking, not kept fused here. Each K-means cell
/// becomes one record. Deterministic for fixed seed, and equivariant under
/// node relabeling because K-means sees only the membership value multiset.
pub fn cluster_component(gm: &GenerativeModel, opts: &ClusterOptions) -> Result<Vec<ClusterRecord>> {
    if opts.k_max < 2 {
        return Err(Error::InvalidArgument("k_max must be at least 2".to_string()));
    }
    if gm.is_zero() {
        return Ok(Vec::new());
    }
    let n = gm.memberships.len();

    // Distinct membership values with multiplicities, ascending.
    let mut sorted: Vec<f64> = gm.memberships.clone();
    sorted.sort_by(f64::total_cmp);
    let mut values = Vec::new();
    let mut weights = Vec::new();
    for &v in &sorted {
        if values.last() == Some(&v) {
            *weights.last_mut().unwrap() += 1.0;
        } else {
            values.push(v);
            weights.push(1.0);
        }
    }

    let k_hi = opts.k_max.min(values.len()).min(n.saturating_sub(1));
    if values.len() < 2 || k_hi < 2 {
        return Ok(vec![single_cluster(gm, None)]);
    }

    let mut best: Option<(f64, Vec<usize>)> = None;
    for k in 2..=k_hi {
        let mut rng = rng_from(
            opts.seed,
            &format!("cluster-kmeans-c{}", gm.index),
            k as u64,
        );
        let (value_cells, _) =
            kmeans_1d_weighted(&values, &weights, k, &mut rng, opts.restarts, 100);
        let assignments = assign_nodes(&gm.memberships, &values, &value_cells);
        let sil = silhouette(&assignments, gm)?;
        let better = match &best {
            Some((s, _)) => sil > *s,
            None => true,
        };
        if better {
            best = Some((sil, assignments));
        }
    }
    let (best_sil, assignments) = best.unwrap();

    // Relabel cells by their smallest member so record order is canonical.
    let k = assignments.iter().map(|&c| c + 1).max().unwrap();
    let mut first_member = vec![usize::MAX; k];
    for (i, &c) in assignments.iter().enumerate() {
        if first_member[c] == usize::MAX {
            first_member[c] = i;
        }
    }
    let mut cells: Vec<usize> = (0..k).filter(|&c| first_member[c] != usize::MAX).collect();
    cells.sort_by_key(|&c| first_member[c]);

    let mut records = Vec::with_capacity(cells.len());
    for &cell in &cells {
        let members: Vec<usize> = (0..n).filter(|&i| assignments[i] == cell).collect();
        let score = so_score(&members, gm)?;
        let mean = members.iter().map(|&i| gm.memberships[i]).sum::<f64>() / members.len() as f64;
        records.push(ClusterRecord {
            model_index: gm.index,
            members,
            so_score: score,
            rank_position: None,
            mean_membership: mean,
            silhouette: Some(best_sil),
            filtered: false,
        });
    }
    Ok(records)
}

fn single_cluster(gm: &GenerativeModel, sil: Option<f64>) -> ClusterRecord {
    let members: Vec<usize> = (0..gm.memberships.len()).collect();
    let mean = gm.memberships.iter().sum::<f64>() / members.len() as f64;
    let duration: f64 = gm.rate_samples.iter().sum();
    ClusterRecord {
        model_index: gm.index,
        members,
        so_score: mean * mean * duration,
        rank_position: None,
        mean_membership: mean,
        silhouette: sil,
        filtered: false,
    }
}

fn assign_nodes(memberships: &[f64], values: &[f64], value_cells: &[usize]) -> Vec<usize> {
    memberships
        .iter()
        .map(|&m| {
            let idx = values.partition_point(|&v| v < m);
            // Exact match is guaranteed: values were built from memberships.
            debug_assert!(idx < values.len() && values[idx] == m);
            value_cells[idx]
        })
        .collect()
}

/// Sorts clusters by descending score, assigns 1-based rank positions, and
/// flags everything below the sharpest score drop.
///
/// The cut sits after position `k` where `score_k / score_{k+1}` attains its
/// maximum among ratios exceeding `drop_factor` (first occurrence wins
/// ties). A drop onto zero counts as an infinite ratio; runs of equal or
/// gently decaying scores produce no cut. Ties in score order break by
/// `(model_index, smallest member)`.
pub fn rank_and_filter(
    mut clusters: Vec<ClusterRecord>,
    drop_factor: f64,
) -> Result<Vec<ClusterRecord>> {
    if !(drop_factor > 1.0) {
        return Err(Error::InvalidArgument(
            "drop_factor must exceed 1".to_string(),
        ));
    }
    clusters.sort_by(|a, b| {
        b.so_score
            .total_cmp(&a.so_score)
            .then(a.model_index.cmp(&b.model_index))
            .then(first_member(a).cmp(&first_member(b)))
    });
    for (pos, c) in clusters.iter_mut().enumerate() {
        c.rank_position = Some(pos + 1);
        c.filtered = false;
    }
    let mut cut: Option<(f64, usize)> = None;
    for k in 0..clusters.len().saturating_sub(1) {
        let hi = clusters[k].so_score;
        let lo = clusters[k + 1].so_score;
        let ratio = if lo > 0.0 {
            hi / lo
        } else if hi > 0.0 {
            f64::INFINITY
        } else {
            1.0
        };
        if ratio > drop_factor && cut.map_or(true, |(best, _)| ratio > best) {
            cut = Some((ratio, k));
        }
    }
    if let Some((_, k)) = cut {
        for c in clusters.iter_mut().skip(k + 1) {
            c.filtered = true;
        }
    }
    Ok(clusters)
}

fn first_member(c: &ClusterRecord) -> usize {
    c.members.first().copied().unwrap_or(usize::MAX)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn gm(memberships: Vec<f64>, rate_samples: Vec<f64>) -> GenerativeModel {
        GenerativeModel {
            index: 0,
            memberships,
            rate_samples,
        }
    }

    #[test]
    fn similarity_is_membership_product() {
        let g = gm(vec![0.5, 0.8, 0.0], vec![1.0]);
        assert_eq!(node_similarity(&g, 0, 1), 0.4);
        assert_eq!(node_similarity(&g, 1, 0), 0.4);
        assert_eq!(node_similarity(&g, 0, 2), 0.0);
        assert_eq!(node_similarity(&g, 1, 1), 0.8 * 0.8);
    }

    #[test]
    fn silhouette_hand_example() {
        // Memberships {1, 1, 0, 0}, split as {0,1} vs {2,3}.
        // High nodes: d(own) = 1, d(other) = 0, S = 1. Zero nodes: S = 0.
        let g = gm(vec![1.0, 1.0, 0.0, 0.0], vec![1.0]);
        let s = silhouette(&[0, 0, 1, 1], &g).unwrap();
        assert_abs_diff_eq!(s, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn silhouette_zero_when_similarities_uniform() {
        let g = gm(vec![1.0; 4], vec![1.0]);
        let s = silhouette(&[0, 0, 1, 1], &g).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn silhouette_rejects_single_cluster() {
        let g = gm(vec![1.0, 0.5], vec![1.0]);
        assert!(silhouette(&[0, 0], &g).is_err());
    }

    #[test]
    fn silhouette_rejects_length_mismatch() {
        let g = gm(vec![1.0, 0.5], vec![1.0]);
        assert!(silhouette(&[0, 1, 0], &g).is_err());
    }

    #[test]
    fn two_level_component_splits_in_two() {
        let mut memberships = vec![1.0; 10];
        memberships.extend(vec![0.0; 10]);
        let g = gm(memberships, vec![2.0; 5]);
        let records = cluster_component(&g, &ClusterOptions::default()).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].members, (0..10).collect::<Vec<_>>());
        assert_eq!(records[1].members, (10..20).collect::<Vec<_>>());
        assert_abs_diff_eq!(records[0].mean_membership, 1.0);
        // High cluster scores 1^2 * 10, zero cluster scores 0.
        assert_abs_diff_eq!(records[0].so_score, 10.0, epsilon = 1e-12);
        assert_eq!(records[1].so_score, 0.0);
        assert_eq!(records[0].silhouette, Some(0.5));
    }

    #[test]
    fn uniform_component_is_single_degenerate_cluster() {
        let g = gm(vec![0.7; 6], vec![1.0; 3]);
        let records = cluster_component(&g, &ClusterOptions::default()).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].members, (0..6).collect::<Vec<_>>());
        assert_eq!(records[0].silhouette, None);
    }

    #[test]
    fn zero_component_yields_no_clusters() {
        let g = gm(vec![0.0; 5], vec![0.0; 4]);
        let records = cluster_component(&g, &ClusterOptions::default()).unwrap();
        assert!(records.is_empty());
    }

    #[test]
    fn product_similarity_keeps_top_level_separate() {
        // Three equal-size membership levels {1.0, 0.5, 0.02}. Under the
        // product similarity, only clusters whose members out-value the
        // rest look coherent, so the best mean score is K=2 separating the
        // top level: level-set K=3 scores (5*0.5 - 5*0.5 - 5*0.98)/15 and
        // the adopted split ({0.02, 0.5} | {1.0}) scores -0.74/3, which is
        // larger. The merged low cells are left for ranking to discard.
        let mut memberships = vec![1.0; 5];
        memberships.extend(vec![0.5; 5]);
        memberships.extend(vec![0.02; 5]);
        let g = gm(memberships, vec![1.0; 4]);
        let records = cluster_component(&g, &ClusterOptions::default()).unwrap();
        assert_eq!(records.len(), 2, "records: {records:?}");
        assert_eq!(records[0].members, (0..5).collect::<Vec<_>>());
        assert_eq!(records[1].members, (5..15).collect::<Vec<_>>());
        assert_abs_diff_eq!(
            records[0].silhouette.unwrap(),
            -0.74 / 3.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn chosen_k_matches_brute_force_silhouette() {
        // Independent Silhouette implementation over explicit pair sums.
        fn brute_sil(assignments: &[usize], memberships: &[f64]) -> f64 {
            let n = memberships.len();
            let k = assignments.iter().map(|&c| c + 1).max().unwrap();
            let mut total = 0.0;
            for i in 0..n {
                let mut ds = Vec::new();
                for c in 0..k {
                    let members: Vec<usize> =
                        (0..n).filter(|&j| assignments[j] == c).collect();
                    if members.is_empty() {
                        continue;
                    }
                    let sum: f64 = members
                        .iter()
                        .map(|&j| memberships[i] * memberships[j])
                        .sum();
                    ds.push((c, sum / members.len() as f64));
                }
                let own = ds.iter().find(|(c, _)| *c == assignments[i]).unwrap().1;
                let other = ds
                    .iter()
                    .filter(|(c, _)| *c != assignments[i])
                    .map(|(_, d)| *d)
                    .fold(0.0f64, f64::max);
                let denom = ds.iter().map(|(_, d)| *d).fold(0.0f64, f64::max);
                if denom > 0.0 {
                    total += (own - other) / denom;
                }
            }
            total / n as f64
        }

        let mut memberships = vec![1.0; 4];
        memberships.extend(vec![0.45; 6]);
        memberships.extend(vec![0.05; 8]);
        let g = gm(memberships.clone(), vec![1.0; 3]);
        let opts = ClusterOptions {
            k_max: 5,
            ..Default::default()
        };
        let records = cluster_component(&g, &opts).unwrap();
        let impl_k = records.len();

        // Brute force: rebuild each candidate assignment the same way the
        // implementation does and score it independently.
        let mut distinct: Vec<f64> = memberships.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        let k_hi = 5usize.min(distinct.len());
        let mut best_k = 0;
        let mut best_s = f64::NEG_INFINITY;
        for k in 2..=k_hi {
            let values = distinct.clone();
            let mut rng = rng_from(0, "cluster-kmeans-c0", k as u64);
            let weights: Vec<f64> = values
                .iter()
                .map(|v| memberships.iter().filter(|m| *m == v).count() as f64)
                .collect();
            let (cells, _) = kmeans_1d_weighted(&values, &weights, k, &mut rng, 10, 100);
            let assignments: Vec<usize> = memberships
                .iter()
                .map(|m| cells[values.iter().position(|v| v == m).unwrap()])
                .collect();
            let s = brute_sil(&assignments, &memberships);
            if s > best_s {
                best_s = s;
                best_k = assignments.iter().collect::<std::collections::BTreeSet<_>>().len();
            }
        }
        assert_eq!(impl_k, best_k);
        assert_abs_diff_eq!(records[0].silhouette.unwrap(), best_s, epsilon = 1e-12);
    }

    #[test]
    fn so_score_frozen_examples() {
        // Unit membership pair over rates summing 4: (1.5/2)^2 * 4 = 2.25.
        let g = gm(vec![1.0, 0.5], vec![1.0, 3.0]);
        assert_abs_diff_eq!(so_score(&[0, 1], &g).unwrap(), 2.25, epsilon = 1e-15);
        // All-unit cluster scores exactly the rate mass.
        let g2 = gm(vec![1.0; 3], vec![2.0, 2.0]);
        assert_abs_diff_eq!(so_score(&[0, 1, 2], &g2).unwrap(), 4.0, epsilon = 1e-15);
        // Zero rates give zero score regardless of memberships.
        let g3 = gm(vec![1.0, 1.0], vec![0.0; 4]);
        assert_eq!(so_score(&[0, 1], &g3).unwrap(), 0.0);
    }

    #[test]
    fn so_score_rejects_empty_cluster() {
        let g = gm(vec![1.0], vec![1.0]);
        assert!(so_score(&[], &g).is_err());
    }

    fn record(model: usize, members: Vec<usize>, score: f64) -> ClusterRecord {
        ClusterRecord {
            model_index: model,
            members,
            so_score: score,
            rank_position: None,
            mean_membership: 0.0,
            silhouette: None,
            filtered: false,
        }
    }

    #[test]
    fn ranking_cuts_at_sharpest_drop() {
        let clusters = vec![
            record(0, vec![0], 8.0),
            record(1, vec![1], 10.0),
            record(2, vec![2], 0.1),
            record(3, vec![3], 9.0),
        ];
        let ranked = rank_and_filter(clusters, 5.0).unwrap();
        let scores: Vec<f64> = ranked.iter().map(|c| c.so_score).collect();
        assert_eq!(scores, vec![10.0, 9.0, 8.0, 0.1]);
        assert_eq!(
            ranked.iter().map(|c| c.filtered).collect::<Vec<_>>(),
            vec![false, false, false, true]
        );
        assert_eq!(ranked[3].rank_position, Some(4));
    }

    #[test]
    fn equal_scores_produce_no_cut() {
        let clusters = vec![
            record(0, vec![0], 3.0),
            record(1, vec![1], 3.0),
            record(2, vec![2], 3.0),
        ];
        let ranked = rank_and_filter(clusters, 5.0).unwrap();
        assert!(ranked.iter().all(|c| !c.filtered));
    }

    #[test]
    fn single_cluster_is_retained() {
        let ranked = rank_and_filter(vec![record(0, vec![0], 1.0)], 5.0).unwrap();
        assert_eq!(ranked.len(), 1);
        assert!(!ranked[0].filtered);
        assert_eq!(ranked[0].rank_position, Some(1));
    }

    #[test]
    fn drop_onto_zero_cuts() {
        let clusters = vec![record(0, vec![0], 1.0), record(0, vec![1], 0.0)];
        let ranked = rank_and_filter(clusters, 5.0).unwrap();
        assert!(!ranked[0].filtered);
        assert!(ranked[1].filtered);
    }

    #[test]
    fn score_ties_break_by_model_then_member() {
        let clusters = vec![
            record(2, vec![0], 5.0),
            record(1, vec![9], 5.0),
            record(1, vec![3], 5.0),
        ];
        let ranked = rank_and_filter(clusters, 5.0).unwrap();
        let order: Vec<(usize, usize)> = ranked
            .iter()
            .map(|c| (c.model_index, c.members[0]))
            .collect();
        assert_eq!(order, vec![(1, 3), (1, 9), (2, 0)]);
    }

    #[test]
    fn relabeling_nodes_permutes_clusters() {
        // Equivariance: permuting node labels permutes members identically.
        let memberships = vec![1.0, 0.1, 0.9, 0.15, 0.85, 0.05];
        let g = gm(memberships.clone(), vec![1.0; 3]);
        let opts = ClusterOptions {
            seed: 42,
            ..Default::default()
        };
        let base = cluster_component(&g, &opts).unwrap();

        // Reverse permutation: node i -> 5 - i.
        let permuted: Vec<f64> = (0..6).map(|i| memberships[5 - i]).collect();
        let g2 = gm(permuted, vec![1.0; 3]);
        let moved = cluster_component(&g2, &opts).unwrap();

        let base_sets: std::collections::BTreeSet<Vec<usize>> = base
            .iter()
            .map(|c| {
                let mut m: Vec<usize> = c.members.iter().map(|&i| 5 - i).collect();
                m.sort_unstable();
                m
            })
            .collect();
        let moved_sets: std::collections::BTreeSet<Vec<usize>> =
            moved.iter().map(|c| c.members.clone()).collect();
        assert_eq!(base_sets, moved_sets);
    }
}
