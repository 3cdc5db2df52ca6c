//! Comparison methods: threshold classification on decomposition
//! components (BC) and blended-similarity evolutionary clustering (EC).
//!
//! BC turns each normalized component into a above-threshold community and
//! its complement, concatenated into one list ordered by component mass.
//! EC clusters every snapshot independently on a similarity matrix that
//! blends the current snapshot with the previous one, then unifies
//! recurring node sets across snapshots into clusters with occurrence-step
//! lifetimes. Both emit the same cluster records as the main pipeline so
//! they flow through the same evaluation.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::cluster::{self, ClusterRecord};
use crate::decomp::{normalize_components, CpModel, GenerativeModel};
use crate::error::{Error, Result};
use crate::eval::DetectedView;
use crate::kmeans::kmeans_restarts;
use crate::lifetime::{steps_to_intervals, LifetimeSet};
use crate::linalg::symmetric_eig;
use crate::seed::rng_from;
use crate::tensor::DynTensor;

/// Configuration for evolutionary clustering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EcConfig {
    /// Blend weight on the previous snapshot, in `[0, 1]`.
    pub beta: f64,
    /// Cluster count per snapshot.
    pub k: usize,
    pub seed: u64,
}

impl Default for EcConfig {
    fn default() -> Self {
        EcConfig {
            beta: 0.5,
            k: 10,
            seed: 0,
        }
    }
}

/// Frobenius norm of one component's full reconstruction: membership
/// self-product times rate, summed over all cells.
pub fn component_frobenius_norm(gm: &GenerativeModel) -> f64 {
    let memb_sq: f64 = gm.memberships.iter().map(|a| a * a).sum();
    let rate_sq: f64 = gm.rate_samples.iter().map(|r| r * r).sum();
    memb_sq * rate_sq.sqrt()
}

/// Threshold classification over all components.
///
/// Per component, nodes with normalized membership strictly above the
/// threshold form the community and the rest its complement. Components
/// are ordered by descending reconstruction norm (ties keep the original
/// component order) and the list concatenates every community first, then
/// every complement. Empty communities stay in the list as empty records;
/// complements and empty communities are flagged filtered so downstream
/// scoring sees the communities alone by default.
pub fn bc_ranked_list(model: &CpModel, threshold: f64) -> Result<Vec<ClusterRecord>> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold must lie strictly between 0 and 1, got {threshold}"
        )));
    }
    let components = normalize_components(model);
    let mut order: Vec<usize> = (0..components.len()).collect();
    order.sort_by(|&a, &b| {
        let na = component_frobenius_norm(&components[a]);
        let nb = component_frobenius_norm(&components[b]);
        nb.partial_cmp(&na)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });

    let n = model.node_count();
    let record = |gm: &GenerativeModel, members: Vec<usize>, filtered: bool| ClusterRecord {
        model_index: gm.index,
        so_score: if members.is_empty() {
            0.0
        } else {
            cluster::so_score(&members, gm).expect("non-empty members")
        },
        mean_membership: if members.is_empty() {
            0.0
        } else {
            members.iter().map(|&i| gm.memberships[i]).sum::<f64>() / members.len() as f64
        },
        members,
        rank_position: None,
        silhouette: None,
        filtered,
    };

    let mut list = Vec::with_capacity(2 * components.len());
    for &r in &order {
        let gm = &components[r];
        let members: Vec<usize> = (0..n).filter(|&i| gm.memberships[i] > threshold).collect();
        let filtered = members.is_empty();
        list.push(record(gm, members, filtered));
    }
    for &r in &order {
        let gm = &components[r];
        let complement: Vec<usize> = (0..n).filter(|&i| gm.memberships[i] <= threshold).collect();
        list.push(record(gm, complement, true));
    }
    for (pos, rec) in list.iter_mut().enumerate() {
        rec.rank_position = Some(pos + 1);
    }
    Ok(list)
}

fn dense_snapshots(tensor: &DynTensor) -> Vec<Array2<f64>> {
    let n = tensor.node_count();
    let mut mats = vec![Array2::<f64>::zeros((n, n)); tensor.horizon()];
    for (i, j, t, c) in tensor.iter() {
        mats[t][[i, j]] += c;
        if i != j {
            mats[t][[j, i]] += c;
        }
    }
    mats
}

fn canonical_labels(raw: &[usize]) -> Vec<usize> {
    let mut next = 0usize;
    let mut map = std::collections::BTreeMap::new();
    raw.iter()
        .map(|&l| {
            *map.entry(l).or_insert_with(|| {
                let id = next;
                next += 1;
                id
            })
        })
        .collect()
}

/// Clusters every snapshot on the blended similarity matrix.
///
/// The first snapshot is clustered as-is; later ones on
/// `(1 - beta) * X_t + beta * X_{t-1}`. Nodes are embedded in the top-k
/// eigenvector coordinates of the blend and grouped by seeded K-means.
/// Returns one label per node per snapshot, labels renumbered by first
/// appearance in node order.
pub fn ec_clustering(tensor: &DynTensor, cfg: &EcConfig) -> Result<Vec<Vec<usize>>> {
    if !(0.0..=1.0).contains(&cfg.beta) {
        return Err(Error::InvalidArgument(format!(
            "beta must lie in [0, 1], got {}",
            cfg.beta
        )));
    }
    let n = tensor.node_count();
    if cfg.k == 0 || cfg.k > n {
        return Err(Error::InvalidArgument(format!(
            "cluster count {} out of range for {} nodes",
            cfg.k, n
        )));
    }
    if tensor.horizon() == 0 {
        return Err(Error::DegenerateInput("empty horizon".to_string()));
    }

    let snapshots = dense_snapshots(tensor);
    let mut assignments = Vec::with_capacity(snapshots.len());
    for t in 0..snapshots.len() {
        let blend = if t == 0 {
            snapshots[0].clone()
        } else {
            (1.0 - cfg.beta) * &snapshots[t] + cfg.beta * &snapshots[t - 1]
        };
        let (_, vectors) = symmetric_eig(&blend);
        let mut points = Array2::<f64>::zeros((n, cfg.k));
        for i in 0..n {
            for c in 0..cfg.k {
                points[[i, c]] = vectors[[i, c]];
            }
        }
        let mut rng = rng_from(cfg.seed, "ec-kmeans", t as u64);
        let fit = kmeans_restarts(&points, cfg.k, &mut rng, 5, 100);
        assignments.push(canonical_labels(&fit.assignments));
    }
    Ok(assignments)
}

/// Unifies per-snapshot clusters into recurring clusters with lifetimes.
///
/// By default two snapshot cells are the same cluster exactly when their
/// node sets are equal; `jaccard` relaxes that to a minimum Jaccard
/// overlap against the first-seen representative. Clusters are ranked by
/// occurrence count (ties by size, then members), each with its own
/// model index, and the lifetime is the set of snapshots where the
/// cluster appears.
pub fn ec_to_clusters(
    assignments: &[Vec<usize>],
    jaccard: Option<f64>,
) -> Result<Vec<(ClusterRecord, LifetimeSet)>> {
    if let Some(theta) = jaccard {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "jaccard threshold must lie in (0, 1], got {theta}"
            )));
        }
    }
    let mut unified: Vec<(Vec<usize>, Vec<usize>)> = Vec::new();
    for (t, labels) in assignments.iter().enumerate() {
        let mut cells: std::collections::BTreeMap<usize, Vec<usize>> =
            std::collections::BTreeMap::new();
        for (node, &label) in labels.iter().enumerate() {
            cells.entry(label).or_default().push(node);
        }
        for cell in cells.into_values() {
            let slot = match jaccard {
                None => unified.iter().position(|(rep, _)| *rep == cell),
                Some(theta) => {
                    let mut best: Option<(f64, usize)> = None;
                    for (idx, (rep, _)) in unified.iter().enumerate() {
                        let inter = intersection_size(rep, &cell);
                        let union = rep.len() + cell.len() - inter;
                        let j = inter as f64 / union as f64;
                        if j >= theta && best.map_or(true, |(bj, _)| j > bj) {
                            best = Some((j, idx));
                        }
                    }
                    best.map(|(_, idx)| idx)
                }
            };
            match slot {
                Some(idx) => {
                    if unified[idx].1.last() != Some(&t) {
                        unified[idx].1.push(t);
                    }
                }
                None => unified.push((cell, vec![t])),
            }
        }
    }

    unified.sort_by(|a, b| {
        b.1.len()
            .cmp(&a.1.len())
            .then(b.0.len().cmp(&a.0.len()))
            .then(a.0.cmp(&b.0))
    });

    Ok(unified
        .into_iter()
        .enumerate()
        .map(|(idx, (members, steps))| {
            let intervals = steps_to_intervals(&steps);
            (
                ClusterRecord {
                    model_index: idx,
                    members,
                    so_score: steps.len() as f64,
                    rank_position: Some(idx + 1),
                    mean_membership: 1.0,
                    silhouette: None,
                    filtered: false,
                },
                LifetimeSet {
                    model_index: idx,
                    active_steps: steps,
                    intervals,
                },
            )
        })
        .collect())
}

fn intersection_size(a: &[usize], b: &[usize]) -> usize {
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

/// Prepares unified clusters for mapping: crisp memberships and, per
/// occurrence step, the cluster's empirical mean rate per ordered node
/// pair (zero elsewhere and for singletons).
pub fn ec_detected_views(
    clusters: &[(ClusterRecord, LifetimeSet)],
    tensor: &DynTensor,
) -> Vec<DetectedView> {
    let horizon = tensor.horizon();
    let n = tensor.node_count();
    let mut per_step: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); horizon];
    for (i, j, t, c) in tensor.iter() {
        per_step[t].push((i, j, c));
    }
    clusters
        .iter()
        .map(|(record, lifetime)| {
            let mut memberships = vec![0.0; n];
            for &m in &record.members {
                memberships[m] = 1.0;
            }
            let size = record.members.len() as f64;
            let pairs = size * size - size;
            let mut rate = vec![0.0; horizon];
            if pairs > 0.0 {
                for &t in &lifetime.active_steps {
                    let mut mass = 0.0;
                    for &(i, j, c) in &per_step[t] {
                        if memberships[i] > 0.0 && memberships[j] > 0.0 {
                            mass += if i == j { c } else { 2.0 * c };
                        }
                    }
                    rate[t] = mass / pairs;
                }
            }
            DetectedView {
                members: record.members.clone(),
                memberships,
                rate,
                model_index: record.model_index,
            }
        })
        .collect()
}
