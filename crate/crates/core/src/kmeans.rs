//! Seeded K-means over dense row vectors.
//!
//! Shared by membership clustering (one-dimensional points) and the
//! evolutionary spectral baseline (spectral embeddings). Deterministic for a
//! given RNG: ties in seeding, assignment, and empty-cell repair all break
//! toward the lowest index.

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub struct KmeansFit {
    pub assignments: Vec<usize>,
    pub sse: f64,
}

/// Runs Lloyd's algorithm with k-means++ seeding once.
pub fn kmeans(points: &Array2<f64>, k: usize, rng: &mut ChaCha8Rng, max_iters: usize) -> KmeansFit {
    let n = points.nrows();
    let d = points.ncols();
    debug_assert!(k >= 1 && k <= n);
    let mut centers = seed_centers(points, k, rng);
    let mut assignments = vec![0usize; n];
    for _ in 0..max_iters {
        let mut changed = false;
        for i in 0..n {
            let a = nearest_center(points, &centers, i);
            if a != assignments[i] {
                assignments[i] = a;
                changed = true;
            }
        }
        // Recompute means; repair empty cells with the worst-fit point.
        let mut counts = vec![0usize; k];
        let mut sums = Array2::<f64>::zeros((k, d));
        for i in 0..n {
            counts[assignments[i]] += 1;
            for c in 0..d {
                sums[(assignments[i], c)] += points[(i, c)];
            }
        }
        for cell in 0..k {
            if counts[cell] == 0 {
                let far = farthest_point(points, &centers, &assignments);
                assignments[far] = cell;
                for c in 0..d {
                    centers[(cell, c)] = points[(far, c)];
                }
                changed = true;
            } else {
                for c in 0..d {
                    centers[(cell, c)] = sums[(cell, c)] / counts[cell] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut sse = 0.0;
    for i in 0..n {
        sse += sq_dist(points, &centers, i, assignments[i]);
    }
    KmeansFit { assignments, sse }
}

/// Best of `restarts` runs by within-cluster squared error; ties keep the
/// earliest run.
pub fn kmeans_restarts(
    points: &Array2<f64>,
    k: usize,
    rng: &mut ChaCha8Rng,
    restarts: usize,
    max_iters: usize,
) -> KmeansFit {
    let mut best: Option<KmeansFit> = None;
    for _ in 0..restarts.max(1) {
        let fit = kmeans(points, k, rng, max_iters);
        match &best {
            Some(b) if b.sse <= fit.sse => {}
            _ => best = Some(fit),
        }
    }
    best.unwrap()
}

/// Weighted one-dimensional K-means over sorted distinct values.
///
/// Operating on the value multiset (values plus multiplicities) rather than
/// per-point rows makes the result invariant under any relabeling of the
/// underlying points. Returns the cell of each distinct value and the
/// weighted within-cell squared error.
pub fn kmeans_1d_weighted(
    values: &[f64],
    weights: &[f64],
    k: usize,
    rng: &mut ChaCha8Rng,
    restarts: usize,
    max_iters: usize,
) -> (Vec<usize>, f64) {
    debug_assert_eq!(values.len(), weights.len());
    debug_assert!(k >= 1 && k <= values.len());
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..restarts.max(1) {
        let run = kmeans_1d_once(values, weights, k, rng, max_iters);
        match &best {
            Some((_, sse)) if *sse <= run.1 => {}
            _ => best = Some(run),
        }
    }
    best.unwrap()
}

fn kmeans_1d_once(
    values: &[f64],
    weights: &[f64],
    k: usize,
    rng: &mut ChaCha8Rng,
    max_iters: usize,
) -> (Vec<usize>, f64) {
    let d = values.len();
    let mut centers = Vec::with_capacity(k);
    // k-means++ over the weighted multiset.
    let total_w: f64 = weights.iter().sum();
    let first = weighted_pick(weights, total_w * rng.gen::<f64>());
    centers.push(values[first]);
    let mut min_d2: Vec<f64> = values.iter().map(|v| (v - values[first]).powi(2)).collect();
    for _ in 1..k {
        let score: Vec<f64> = min_d2.iter().zip(weights).map(|(d2, w)| d2 * w).collect();
        let total: f64 = score.iter().sum();
        let pick = if total > 0.0 {
            weighted_pick(&score, total * rng.gen::<f64>())
        } else {
            weighted_pick(weights, total_w * rng.gen::<f64>())
        };
        centers.push(values[pick]);
        for (i, v) in values.iter().enumerate() {
            let d2 = (v - values[pick]).powi(2);
            if d2 < min_d2[i] {
                min_d2[i] = d2;
            }
        }
    }
    let mut assignments = vec![0usize; d];
    for _ in 0..max_iters {
        let mut changed = false;
        for (i, v) in values.iter().enumerate() {
            let mut cell = 0usize;
            let mut best_d = f64::INFINITY;
            for (c, center) in centers.iter().enumerate() {
                let d2 = (v - center).powi(2);
                if d2 < best_d {
                    best_d = d2;
                    cell = c;
                }
            }
            if assignments[i] != cell {
                assignments[i] = cell;
                changed = true;
            }
        }
        let mut wsum = vec![0.0f64; k];
        let mut vsum = vec![0.0f64; k];
        for i in 0..d {
            wsum[assignments[i]] += weights[i];
            vsum[assignments[i]] += weights[i] * values[i];
        }
        for c in 0..k {
            if wsum[c] == 0.0 {
                // Repair: seize the farthest value from its center.
                let far = (0..d)
                    .max_by(|&a, &b| {
                        let da = (values[a] - centers[assignments[a]]).powi(2);
                        let db = (values[b] - centers[assignments[b]]).powi(2);
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .unwrap();
                assignments[far] = c;
                centers[c] = values[far];
                changed = true;
            } else {
                centers[c] = vsum[c] / wsum[c];
            }
        }
        if !changed {
            break;
        }
    }
    let sse = (0..d)
        .map(|i| weights[i] * (values[i] - centers[assignments[i]]).powi(2))
        .sum();
    (assignments, sse)
}

fn weighted_pick(weights: &[f64], mut target: f64) -> usize {
    for (i, w) in weights.iter().enumerate() {
        target -= w;
        if target <= 0.0 {
            return i;
        }
    }
    weights.len() - 1
}

fn seed_centers(points: &Array2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = points.nrows();
    let d = points.ncols();
    let mut centers = Array2::<f64>::zeros((k, d));
    let first = rng.gen_range(0..n);
    centers.row_mut(0).assign(&points.row(first));
    let mut min_d2 = vec![0.0f64; n];
    for i in 0..n {
        min_d2[i] = sq_dist(points, &centers, i, 0);
    }
    for cell in 1..k {
        let total: f64 = min_d2.iter().sum();
        let chosen = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, w) in min_d2.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            // All remaining points coincide with a chosen center.
            rng.gen_range(0..n)
        };
        centers.row_mut(cell).assign(&points.row(chosen));
        for i in 0..n {
            let dnew = sq_dist(points, &centers, i, cell);
            if dnew < min_d2[i] {
                min_d2[i] = dnew;
            }
        }
    }
    centers
}

fn nearest_center(points: &Array2<f64>, centers: &Array2<f64>, i: usize) -> usize {
    let mut best = 0usize;
    let mut best_d = f64::INFINITY;
    for cell in 0..centers.nrows() {
        let d2 = sq_dist(points, centers, i, cell);
        if d2 < best_d {
            best_d = d2;
            best = cell;
        }
    }
    best
}

fn farthest_point(points: &Array2<f64>, centers: &Array2<f64>, assignments: &[usize]) -> usize {
    let mut far = 0usize;
    let mut far_d = -1.0f64;
    for i in 0..points.nrows() {
        let d2 = sq_dist(points, centers, i, assignments[i]);
        if d2 > far_d {
            far_d = d2;
            far = i;
        }
    }
    far
}

fn sq_dist(points: &Array2<f64>, centers: &Array2<f64>, i: usize, cell: usize) -> f64 {
    let mut s = 0.0;
    for c in 0..points.ncols() {
        let d = points[(i, c)] - centers[(cell, c)];
        s += d * d;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from;
    use ndarray::Array2;

    fn column(vals: &[f64]) -> Array2<f64> {
        Array2::from_shape_vec((vals.len(), 1), vals.to_vec()).unwrap()
    }

    #[test]
    fn separates_two_well_spaced_groups() {
        let pts = column(&[0.0, 0.1, 0.05, 5.0, 5.1, 4.9]);
        let mut rng = rng_from(1, "kmeans-test", 0);
        let fit = kmeans_restarts(&pts, 2, &mut rng, 5, 100);
        assert_eq!(fit.assignments[0], fit.assignments[1]);
        assert_eq!(fit.assignments[0], fit.assignments[2]);
        assert_eq!(fit.assignments[3], fit.assignments[4]);
        assert_eq!(fit.assignments[3], fit.assignments[5]);
        assert_ne!(fit.assignments[0], fit.assignments[3]);
        assert!(fit.sse < 0.1);
    }

    #[test]
    fn k_equals_n_gives_zero_error() {
        let pts = column(&[0.0, 1.0, 2.0]);
        let mut rng = rng_from(2, "kmeans-test", 0);
        let fit = kmeans_restarts(&pts, 3, &mut rng, 5, 100);
        assert_eq!(fit.sse, 0.0);
        let mut cells = fit.assignments.clone();
        cells.sort_unstable();
        cells.dedup();
        assert_eq!(cells.len(), 3);
    }

    #[test]
    fn identical_seed_identical_result() {
        let pts = column(&[0.3, 0.7, 0.1, 0.9, 0.5, 0.2]);
        let mut a = rng_from(3, "kmeans-test", 7);
        let mut b = rng_from(3, "kmeans-test", 7);
        let fa = kmeans_restarts(&pts, 3, &mut a, 10, 100);
        let fb = kmeans_restarts(&pts, 3, &mut b, 10, 100);
        assert_eq!(fa.assignments, fb.assignments);
        assert_eq!(fa.sse, fb.sse);
    }

    #[test]
    fn weighted_1d_splits_two_value_groups() {
        let values = [0.0, 0.05, 0.95, 1.0];
        let weights = [10.0, 3.0, 2.0, 10.0];
        let mut rng = rng_from(4, "kmeans-test", 0);
        let (cells, sse) = kmeans_1d_weighted(&values, &weights, 2, &mut rng, 5, 100);
        assert_eq!(cells[0], cells[1]);
        assert_eq!(cells[2], cells[3]);
        assert_ne!(cells[0], cells[2]);
        assert!(sse < 0.1);
    }

    #[test]
    fn weighted_1d_exact_when_k_matches_distinct() {
        let values = [0.0, 0.4, 1.0];
        let weights = [5.0, 2.0, 7.0];
        let mut rng = rng_from(5, "kmeans-test", 0);
        let (cells, sse) = kmeans_1d_weighted(&values, &weights, 3, &mut rng, 5, 100);
        assert_eq!(sse, 0.0);
        let mut seen = cells.to_vec();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 3);
    }
}
