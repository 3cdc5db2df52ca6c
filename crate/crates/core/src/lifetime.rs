//! Piecewise-linear rate reconstruction and cluster lifetime detection.
//!
//! A component's rate samples are denoised into a piecewise-linear function
//! by bottom-up segmentation: start from length-2 segments, repeatedly merge
//! the adjacent pair whose merged least-squares line has the smallest mean
//! squared residual, and stop when the best candidate exceeds a threshold.
//! The threshold is calibrated from the series' own smoothing residuals. A
//! cluster is considered alive at the steps where its average pairwise rate
//! strictly exceeds the network-wide average rate.

use serde::{Deserialize, Serialize};

use crate::cluster::ClusterRecord;
use crate::decomp::GenerativeModel;
use crate::error::{Error, Result};
use crate::linalg::fit_line;
use crate::tensor::DynTensor;

/// One fitted segment: the least-squares line over `[start, end]`
/// (inclusive, global time coordinates).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub slope: f64,
    pub intercept: f64,
}

impl Segment {
    /// Raw line value at `t` (not clamped).
    fn line(&self, t: usize) -> f64 {
        self.slope * t as f64 + self.intercept
    }
}

/// A piecewise-linear rate function over `[0, horizon)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseRate {
    /// Contiguous segments partitioning the fitted range.
    pub segments: Vec<Segment>,
    /// Index of the component the rate belongs to.
    pub source_model: usize,
}

impl PiecewiseRate {
    /// Number of segments.
    pub fn segment_count(&self) -> usize {
        self.segments.len()
    }

    /// One past the last fitted time step.
    pub fn horizon(&self) -> usize {
        self.segments.last().map_or(0, |s| s.end + 1)
    }

    /// Rate at `t`, clamped at zero. Times outside the fitted range
    /// extrapolate the nearest segment's line.
    pub fn eval(&self, t: usize) -> f64 {
        let seg = match self
            .segments
            .binary_search_by(|s| {
                if t < s.start {
                    std::cmp::Ordering::Greater
                } else if t > s.end {
                    std::cmp::Ordering::Less
                } else {
                    std::cmp::Ordering::Equal
                }
            }) {
            Ok(idx) => &self.segments[idx],
            Err(idx) => {
                if idx == 0 {
                    &self.segments[0]
                } else {
                    &self.segments[idx - 1]
                }
            }
        };
        seg.line(t).max(0.0)
    }

    /// Total squared residual against a series (over the common range).
    pub fn residual_sq(&self, series: &[f64]) -> f64 {
        series
            .iter()
            .enumerate()
            .take(self.horizon())
            .map(|(t, &y)| {
                let d = y - self.eval_unclamped(t);
                d * d
            })
            .sum()
    }

    fn eval_unclamped(&self, t: usize) -> f64 {
        for s in &self.segments {
            if t >= s.start && t <= s.end {
                return s.line(t);
            }
        }
        self.segments.last().map_or(0.0, |s| s.line(t))
    }
}

/// Smoothing-residual noise statistics of a rate series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseEstimate {
    /// Mean of the residuals (smoothed minus raw).
    pub mean: f64,
    /// Sample standard deviation of the residuals.
    pub std: f64,
    /// Smoothing window the residuals came from.
    pub window: usize,
}

/// Time steps where one cluster is active.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifetimeSet {
    /// Component the cluster came from.
    pub model_index: usize,
    /// Active steps, ascending.
    pub active_steps: Vec<usize>,
    /// Maximal runs of consecutive active steps, as inclusive bounds.
    pub intervals: Vec<(usize, usize)>,
}

/// Centered moving average with the window clipped at the boundaries.
///
/// The window must be odd and no longer than the series; near the edges the
/// averaging range is intersected with the valid index range, so the first
/// and last points average over roughly half a window.
pub fn sliding_window_filter(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 || window % 2 == 0 {
        return Err(Error::InvalidArgument(format!(
            "smoothing window must be odd and positive, got {window}"
        )));
    }
    if window > series.len() {
        return Err(Error::InvalidArgument(format!(
            "smoothing window {window} exceeds series length {}",
            series.len()
        )));
    }
    let half = window / 2;
    let n = series.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i.saturating_sub(half);
        let hi = (i + half).min(n - 1);
        let sum: f64 = series[lo..=hi].iter().sum();
        out.push(sum / (hi - lo + 1) as f64);
    }
    Ok(out)
}

/// Estimates the noise level of a series as the statistics of its smoothing
/// residuals `smoothed - raw`.
pub fn estimate_noise(series: &[f64], window: usize) -> Result<NoiseEstimate> {
    if series.len() < 2 {
        return Err(Error::DegenerateInput(
            "noise estimation needs at least two samples".to_string(),
        ));
    }
    let smoothed = sliding_window_filter(series, window)?;
    let n = series.len();
    let deltas: Vec<f64> = smoothed
        .iter()
        .zip(series)
        .map(|(s, r)| s - r)
        .collect();
    let mean = deltas.iter().sum::<f64>() / n as f64;
    let var = deltas.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1) as f64;
    Ok(NoiseEstimate {
        mean,
        std: var.max(0.0).sqrt(),
        window,
    })
}

/// Segment-error bound derived from a noise estimate: `(mean + 3·std)²`.
pub fn default_threshold(noise: &NoiseEstimate) -> f64 {
    let b = noise.mean + 3.0 * noise.std;
    b * b
}

/// Total squared residual of the least-squares line over `series[start..=end]`
/// (global coordinates), together with the line.
fn segment_fit(series: &[f64], start: usize, end: usize) -> (f64, f64, f64) {
    let xs: Vec<f64> = (start..=end).map(|t| t as f64).collect();
    let ys = &series[start..=end];
    let (slope, intercept) = fit_line(&xs, ys);
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let d = y - (slope * x + intercept);
            d * d
        })
        .sum();
    (sse, slope, intercept)
}

/// Numerical slack added to the merge admissibility test so that exactly
/// collinear data merges even at a zero threshold: floating-point residuals
/// of a collinear fit are tiny but not exactly zero.
fn merge_slack(series: &[f64], start: usize, end: usize) -> f64 {
    let sum_sq: f64 = series[start..=end].iter().map(|y| y * y).sum::<f64>();
    1e-15 * (1.0 + sum_sq)
}

/// Bottom-up segmentation of a series into a piecewise-linear function.
///
/// Initial segments have length 2 (the final one length 3 when the length
/// is odd), so every initial line is exact or near-exact. Each round
/// evaluates every adjacent pair, keeps the candidates whose merged line
/// has total squared error within `e_max` (plus a tiny numerical slack),
/// and applies the one with the smallest error increase over the two
/// segments it replaces; the process stops when no candidate qualifies.
/// Every merged segment therefore respects the bound; the only exception
/// is a length-3 initial remainder that never merged.
pub fn segment_series(series: &[f64], e_max: f64) -> Result<PiecewiseRate> {
    if series.len() < 2 {
        return Err(Error::DegenerateInput(
            "segmentation needs at least two samples".to_string(),
        ));
    }
    if !(e_max >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "segment error threshold must be non-negative, got {e_max}"
        )));
    }
    let n = series.len();
    // Inclusive (start, end) bounds of the current segments.
    let mut bounds: Vec<(usize, usize)> = Vec::new();
    let mut t = 0;
    while t < n {
        let rem = n - t;
        if rem == 3 || rem == 2 {
            bounds.push((t, n - 1));
            break;
        }
        bounds.push((t, t + 1));
        t += 2;
    }

    let mut seg_sse: Vec<f64> = bounds
        .iter()
        .map(|&(s, e)| segment_fit(series, s, e).0)
        .collect();
    loop {
        if bounds.len() < 2 {
            break;
        }
        // (error increase, merged error, pair index) of the best admissible merge.
        let mut best: Option<(f64, f64, usize)> = None;
        for k in 0..bounds.len() - 1 {
            let (s, _) = bounds[k];
            let (_, e) = bounds[k + 1];
            let (sse, _, _) = segment_fit(series, s, e);
            if sse > e_max + merge_slack(series, s, e) {
                continue;
            }
            let delta = sse - seg_sse[k] - seg_sse[k + 1];
            if best.map_or(true, |(b, _, _)| delta < b) {
                best = Some((delta, sse, k));
            }
        }
        let Some((_, sse, k)) = best else { break };
        let (s, _) = bounds[k];
        let (_, e) = bounds[k + 1];
        bounds[k] = (s, e);
        bounds.remove(k + 1);
        seg_sse[k] = sse;
        seg_sse.remove(k + 1);
    }

    let segments = bounds
        .into_iter()
        .map(|(s, e)| {
            let (_, slope, intercept) = segment_fit(series, s, e);
            Segment {
                start: s,
                end: e,
                slope,
                intercept,
            }
        })
        .collect();
    Ok(PiecewiseRate {
        segments,
        source_model: 0,
    })
}

/// Average pairwise edge-generating rate of a cluster at `t`:
/// `((Σ_{i∈C} a_i)/|C|)²` times the fitted component rate (clamped at 0).
/// An empty member set yields 0.
pub fn cluster_rate(
    cluster: &ClusterRecord,
    gm: &GenerativeModel,
    rate: &PiecewiseRate,
    t: usize,
) -> f64 {
    if cluster.members.is_empty() {
        return 0.0;
    }
    let mean: f64 = cluster
        .members
        .iter()
        .map(|&i| gm.memberships[i])
        .sum::<f64>()
        / cluster.members.len() as f64;
    mean * mean * rate.eval(t)
}

/// Network-average rate series used as the lifetime threshold: the smoothed
/// empirical per-pair rate of the observed tensor.
pub fn network_threshold(tensor: &DynTensor, window: usize) -> Result<Vec<f64>> {
    sliding_window_filter(&tensor.empirical_rate_series(), window)
}

/// Model-based network-average rate (diagnostic alternative to
/// [`network_threshold`]): sums every component's expected pairwise rate,
/// `λ(t) = Σ_r (Σ_i a_ir)²·f_r(t) / |V|²`, using the fitted rates.
pub fn model_threshold(
    models: &[GenerativeModel],
    rates: &[PiecewiseRate],
    node_count: usize,
    horizon: usize,
) -> Result<Vec<f64>> {
    if models.len() != rates.len() {
        return Err(Error::InvalidArgument(format!(
            "{} models but {} fitted rates",
            models.len(),
            rates.len()
        )));
    }
    if node_count == 0 {
        return Err(Error::DegenerateInput(
            "model threshold needs at least one node".to_string(),
        ));
    }
    let denom = (node_count * node_count) as f64;
    let mut out = vec![0.0; horizon];
    for (gm, rate) in models.iter().zip(rates) {
        let total: f64 = gm.memberships.iter().sum();
        let weight = total * total / denom;
        for (t, v) in out.iter_mut().enumerate() {
            *v += weight * rate.eval(t);
        }
    }
    Ok(out)
}

/// Detects the steps where a cluster's rate strictly exceeds the threshold
/// series, and groups them into maximal intervals.
pub fn detect_lifetime(
    cluster: &ClusterRecord,
    gm: &GenerativeModel,
    rate: &PiecewiseRate,
    threshold: &[f64],
) -> LifetimeSet {
    let active_steps: Vec<usize> = threshold
        .iter()
        .enumerate()
        .filter(|&(t, &thr)| cluster_rate(cluster, gm, rate, t) > thr)
        .map(|(t, _)| t)
        .collect();
    let intervals = steps_to_intervals(&active_steps);
    LifetimeSet {
        model_index: gm.index,
        active_steps,
        intervals,
    }
}

/// Groups sorted steps into maximal runs of consecutive values.
pub fn steps_to_intervals(steps: &[usize]) -> Vec<(usize, usize)> {
    let mut intervals: Vec<(usize, usize)> = Vec::new();
    for &t in steps {
        match intervals.last_mut() {
            Some((_, end)) if *end + 1 == t => *end = t,
            _ => intervals.push((t, t)),
        }
    }
    intervals
}
