//! Non-negative symmetric CP decomposition of dynamic-network tensors.
//!
//! Fits `X[i,j,t] ~ sum_r scale_r * A[i,r] * A[j,r] * T[t,r]` with all
//! factors non-negative and the two node modes tied to the same matrix, by
//! alternating least squares: each sweep solves the Khatri-Rao normal
//! equations for one mode, clamps negatives to zero, and reuses the node
//! factor for both node roles. A damped backtracking step guards the sweep:
//! if even the smallest damping fails to keep the objective from rising, the
//! sweep is rejected and the fit stops, so the recorded objective trace is
//! non-increasing for every run.
//!
//! Diagonal cells of self-loop-free tensors can be excluded from the fit
//! (`mask_diagonal`): each sweep imputes them with the current
//! reconstruction, then runs the unweighted update on the completed tensor;
//! the reported objective covers off-diagonal cells only.

use ndarray::{Array2, Array3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from;
use crate::tensor::DynTensor;

/// Options for [`cp_als`].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct CpOptions {
    /// Maximum full ALS sweeps per start.
    pub max_iters: usize,
    /// Convergence: stop when the per-sweep objective decrement drops to
    /// `tol * ||X||_F`.
    pub tol: f64,
    /// Root seed for factor initialization (one derived stream per start).
    pub seed: u64,
    /// Exclude diagonal cells from the fit (self-loop-free tensors only).
    pub mask_diagonal: bool,
    /// Independent random starts; the best final objective wins.
    pub n_starts: usize,
}

impl Default for CpOptions {
    fn default() -> Self {
        CpOptions {
            max_iters: 500,
            tol: 1e-9,
            seed: 0,
            mask_diagonal: false,
            n_starts: 1,
        }
    }
}

/// A fitted decomposition. Node loadings are `node_count x rank` with
/// unit-norm columns, time loadings `horizon x rank` with unit-norm columns,
/// and `scales` carries each component's magnitude; columns are sorted by
/// descending scale. `fit_error` is the final Frobenius residual norm
/// (off-diagonal cells only under masking).
#[derive(Debug, Clone, PartialEq)]
pub struct CpModel {
    pub rank: usize,
    pub scales: Vec<f64>,
    pub node_loadings: Array2<f64>,
    pub time_loadings: Array2<f64>,
    pub fit_error: f64,
    pub iterations: usize,
    /// Objective value at initialization and after each accepted sweep.
    /// Not serialized.
    pub objective_trace: Vec<f64>,
    pub seed: u64,
    pub options: CpOptions,
}

impl CpModel {
    pub fn node_count(&self) -> usize {
        self.node_loadings.nrows()
    }

    pub fn horizon(&self) -> usize {
        self.time_loadings.nrows()
    }

    /// Indices of components that collapsed to zero during fitting.
    pub fn degenerate_components(&self) -> Vec<usize> {
        (0..self.rank).filter(|&r| self.scales[r] == 0.0).collect()
    }
}

/// One normalized component: memberships in `[0, 1]` (maximum exactly 1 for
/// a nonzero component) and non-negative per-step rate samples, scaled so
/// that `memb[i] * memb[j] * rate[t]` reproduces the component's
/// contribution to the reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerativeModel {
    pub index: usize,
    pub memberships: Vec<f64>,
    pub rate_samples: Vec<f64>,
}

impl GenerativeModel {
    pub fn is_zero(&self) -> bool {
        self.memberships.iter().all(|&a| a == 0.0)
    }
}

/// Serialized model layout: loading matrices flattened row-major; the
/// objective trace is an in-memory diagnostic and is not persisted.
#[derive(Serialize, Deserialize)]
struct ModelDump {
    rank: usize,
    scales: Vec<f64>,
    node_loadings: Vec<f64>,
    time_loadings: Vec<f64>,
    fit_error: f64,
    iterations: usize,
    seed: u64,
    options: CpOptions,
}

impl Serialize for CpModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ModelDump {
            rank: self.rank,
            scales: self.scales.clone(),
            node_loadings: self.node_loadings.iter().copied().collect(),
            time_loadings: self.time_loadings.iter().copied().collect(),
            fit_error: self.fit_error,
            iterations: self.iterations,
            seed: self.seed,
            options: self.options.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CpModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as DeError;
        let dump = ModelDump::deserialize(d)?;
        if dump.rank == 0 || dump.scales.len() != dump.rank {
            return Err(D::Error::custom("model dump has inconsistent rank/scales"));
        }
        if dump.node_loadings.len() % dump.rank != 0 || dump.time_loadings.len() % dump.rank != 0 {
            return Err(D::Error::custom(
                "loading matrix length is not a multiple of rank",
            ));
        }
        let n = dump.node_loadings.len() / dump.rank;
        let horizon = dump.time_loadings.len() / dump.rank;
        let node_loadings = Array2::from_shape_vec((n, dump.rank), dump.node_loadings)
            .map_err(D::Error::custom)?;
        let time_loadings = Array2::from_shape_vec((horizon, dump.rank), dump.time_loadings)
            .map_err(D::Error::custom)?;
        Ok(CpModel {
            rank: dump.rank,
            scales: dump.scales,
            node_loadings,
            time_loadings,
            fit_error: dump.fit_error,
            iterations: dump.iterations,
            objective_trace: Vec::new(),
            seed: dump.seed,
            options: dump.options,
        })
    }
}

struct SparseView {
    entries: Vec<(usize, usize, usize, f64)>,
    n: usize,
    horizon: usize,
    norm_x_sq: f64,
}

impl SparseView {
    fn new(tensor: &DynTensor, masked: bool) -> Self {
        let entries: Vec<_> = tensor
            .iter()
            .filter(|&(i, j, _, _)| !(masked && i == j))
            .collect();
        let norm_x_sq = entries
            .iter()
            .map(|&(i, j, _, c)| if i == j { c * c } else { 2.0 * c * c })
            .sum();
        SparseView {
            entries,
            n: tensor.node_count(),
            horizon: tensor.horizon(),
            norm_x_sq,
        }
    }
}

struct Factors {
    u: Array2<f64>,
    v: Array2<f64>,
}

/// Fits a rank-`rank` non-negative symmetric CP model to `tensor`.
///
/// Deterministic: identical tensor, rank, and options give an identical
/// model. Fails when `rank` is outside `1..=min(node_count, horizon)`, when
/// masking is requested for a tensor that allows self-loops, or when the
/// solve produces a non-finite value.
pub fn cp_als(tensor: &DynTensor, rank: usize, options: &CpOptions) -> Result<CpModel> {
    let max_rank = tensor.node_count().min(tensor.horizon());
    if rank < 1 || rank > max_rank {
        return Err(Error::RankOutOfRange {
            rank,
            max: max_rank,
        });
    }
    if options.mask_diagonal && tensor.self_loops_allowed() {
        return Err(Error::InvalidArgument(
            "mask_diagonal requires a tensor without self-loops".to_string(),
        ));
    }
    if options.n_starts == 0 {
        return Err(Error::InvalidArgument(
            "n_starts must be at least 1".to_string(),
        ));
    }
    let view = SparseView::new(tensor, options.mask_diagonal);

    let mut best: Option<(f64, Factors, Vec<f64>, usize)> = None;
    for start in 0..options.n_starts {
        let (factors, trace, iterations) = run_start(&view, rank, options, start as u64)?;
        let final_obj = *trace.last().unwrap();
        let better = match &best {
            Some((obj, _, _, _)) => final_obj < *obj,
            None => true,
        };
        if better {
            best = Some((final_obj, factors, trace, iterations));
        }
    }
    let (fit_error, factors, objective_trace, iterations) = best.unwrap();
    let (scales, node_loadings, time_loadings) = finalize(factors, rank);
    Ok(CpModel {
        rank,
        scales,
        node_loadings,
        time_loadings,
        fit_error,
        iterations,
        objective_trace,
        seed: options.seed,
        options: options.clone(),
    })
}

fn run_start(
    view: &SparseView,
    rank: usize,
    options: &CpOptions,
    start: u64,
) -> Result<(Factors, Vec<f64>, usize)> {
    let mut rng = rng_from(options.seed, "cp-als-start", start);
    let mut u = Array2::<f64>::zeros((view.n, rank));
    let mut v = Array2::<f64>::zeros((view.horizon, rank));
    // Entries in (0, 1]: strictly positive so no component is born dead.
    for x in u.iter_mut() {
        *x = 1.0 - rng.gen::<f64>();
    }
    for x in v.iter_mut() {
        *x = 1.0 - rng.gen::<f64>();
    }

    let masked = options.mask_diagonal;
    let norm_x = view.norm_x_sq.sqrt();
    let decrement_floor = options.tol * norm_x.max(f64::MIN_POSITIVE);

    let mut prev_obj = objective(view, &u, &v, masked);
    if !prev_obj.is_finite() {
        return Err(Error::NonFinite {
            stage: "cp-als objective",
            sweep: 0,
        });
    }
    let mut trace = vec![prev_obj];
    let mut iterations = 0usize;

    for sweep in 1..=options.max_iters {
        let (cu, cv) = sweep_candidate(view, &u, &v, masked);
        if cu.iter().chain(cv.iter()).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                stage: "cp-als factors",
                sweep,
            });
        }
        // Backtracking: accept the first damping of the sweep that does not
        // increase the objective; reject the sweep entirely if none does.
        let mut alpha = 1.0f64;
        let mut accepted = None;
        for _ in 0..4 {
            let tu = blend(&u, &cu, alpha);
            let tv = blend(&v, &cv, alpha);
            let obj = objective(view, &tu, &tv, masked);
            if !obj.is_finite() {
                return Err(Error::NonFinite {
                    stage: "cp-als objective",
                    sweep,
                });
            }
            if obj <= prev_obj {
                accepted = Some((tu, tv, obj));
                break;
            }
            alpha *= 0.5;
        }
        let Some((tu, tv, obj)) = accepted else {
            break;
        };
        u = tu;
        v = tv;
        trace.push(obj);
        iterations = sweep;
        let decrement = prev_obj - obj;
        prev_obj = obj;
        if obj == 0.0 || decrement <= decrement_floor {
            break;
        }
    }
    Ok((Factors { u, v }, trace, iterations))
}

fn blend(old: &Array2<f64>, new: &Array2<f64>, alpha: f64) -> Array2<f64> {
    if alpha == 1.0 {
        new.clone()
    } else {
        old * (1.0 - alpha) + new * alpha
    }
}

/// One imputed ALS sweep: returns candidate factors without touching the
/// current ones.
fn sweep_candidate(
    view: &SparseView,
    u: &Array2<f64>,
    v: &Array2<f64>,
    masked: bool,
) -> (Array2<f64>, Array2<f64>) {
    let rank = u.ncols();
    // E-step: impute unobserved diagonal cells from the current model.
    let fill = masked.then(|| diagonal_reconstruction(u, v));

    // Node mode: U [(U^T U) . (V^T V)] = MTTKRP_1.
    let m1 = mttkrp_node(view, u, v, fill.as_ref());
    let g1 = gram(u) * &gram(v);
    let mut cu = match crate::linalg::solve_gram(&g1, &m1) {
        Some(x) => x,
        None => Array2::zeros((view.n, rank)),
    };
    cu.mapv_inplace(|x| x.max(0.0));

    // Time mode uses the updated node factor for both node roles.
    let m3 = mttkrp_time(view, &cu, fill.as_ref());
    let gu = gram(&cu);
    let g3 = &gu * &gu;
    let mut cv = match crate::linalg::solve_gram(&g3, &m3) {
        Some(x) => x,
        None => Array2::zeros((view.horizon, rank)),
    };
    cv.mapv_inplace(|x| x.max(0.0));

    rebalance(&mut cu, &mut cv);
    (cu, cv)
}

/// `fill[i, t] = sum_r U[i,r]^2 V[t,r]`, the model's diagonal.
fn diagonal_reconstruction(u: &Array2<f64>, v: &Array2<f64>) -> Array2<f64> {
    let (n, rank) = u.dim();
    let horizon = v.nrows();
    let mut fill = Array2::<f64>::zeros((n, horizon));
    for i in 0..n {
        for t in 0..horizon {
            let mut s = 0.0;
            for r in 0..rank {
                s += u[(i, r)] * u[(i, r)] * v[(t, r)];
            }
            fill[(i, t)] = s;
        }
    }
    fill
}

fn gram(m: &Array2<f64>) -> Array2<f64> {
    m.t().dot(m)
}

/// `M1[i, r] = sum_{j,t} X[i,j,t] U[j,r] V[t,r]` over ordered pairs.
fn mttkrp_node(
    view: &SparseView,
    u: &Array2<f64>,
    v: &Array2<f64>,
    fill: Option<&Array2<f64>>,
) -> Array2<f64> {
    let rank = u.ncols();
    let mut m = Array2::<f64>::zeros((view.n, rank));
    for &(i, j, t, c) in &view.entries {
        for r in 0..rank {
            m[(i, r)] += c * u[(j, r)] * v[(t, r)];
        }
        if i != j {
            for r in 0..rank {
                m[(j, r)] += c * u[(i, r)] * v[(t, r)];
            }
        }
    }
    if let Some(fill) = fill {
        for i in 0..view.n {
            for t in 0..view.horizon {
                let c = fill[(i, t)];
                if c != 0.0 {
                    for r in 0..rank {
                        m[(i, r)] += c * u[(i, r)] * v[(t, r)];
                    }
                }
            }
        }
    }
    m
}

/// `M3[t, r] = sum_{i,j} X[i,j,t] U[i,r] U[j,r]` over ordered pairs.
fn mttkrp_time(view: &SparseView, u: &Array2<f64>, fill: Option<&Array2<f64>>) -> Array2<f64> {
    let rank = u.ncols();
    let mut m = Array2::<f64>::zeros((view.horizon, rank));
    for &(i, j, t, c) in &view.entries {
        let w = if i == j { c } else { 2.0 * c };
        for r in 0..rank {
            m[(t, r)] += w * u[(i, r)] * u[(j, r)];
        }
    }
    if let Some(fill) = fill {
        for i in 0..view.n {
            for t in 0..view.horizon {
                let c = fill[(i, t)];
                if c != 0.0 {
                    for r in 0..rank {
                        m[(t, r)] += c * u[(i, r)] * u[(i, r)];
                    }
                }
            }
        }
    }
    m
}

/// Rescales each component so `||u_r||^2 == ||v_r||` without changing the
/// reconstruction; components with a vanished factor are zeroed outright.
fn rebalance(u: &mut Array2<f64>, v: &mut Array2<f64>) {
    for r in 0..u.ncols() {
        let nu = u.column(r).dot(&u.column(r)).sqrt();
        let nv = v.column(r).dot(&v.column(r)).sqrt();
        if nu > 0.0 && nv > 0.0 {
            let magnitude = nu * nu * nv;
            let su = magnitude.powf(0.25) / nu;
            let sv = magnitude.sqrt() / nv;
            u.column_mut(r).mapv_inplace(|x| x * su);
            v.column_mut(r).mapv_inplace(|x| x * sv);
        } else {
            u.column_mut(r).fill(0.0);
            v.column_mut(r).fill(0.0);
        }
    }
}

/// Frobenius residual norm of the current factors against the sparse view.
fn objective(view: &SparseView, u: &Array2<f64>, v: &Array2<f64>, masked: bool) -> f64 {
    let rank = u.ncols();
    // <X, Xhat> over ordered pairs.
    let mut inner = 0.0;
    for &(i, j, t, c) in &view.entries {
        let mut xhat = 0.0;
        for r in 0..rank {
            xhat += u[(i, r)] * u[(j, r)] * v[(t, r)];
        }
        inner += if i == j { c * xhat } else { 2.0 * c * xhat };
    }
    // ||Xhat||^2 = sum_{r,s} (U^T U)_{rs}^2 (V^T V)_{rs}.
    let gu = gram(u);
    let gv = gram(v);
    let mut model_sq = 0.0;
    for r in 0..rank {
        for s in 0..rank {
            model_sq += gu[(r, s)] * gu[(r, s)] * gv[(r, s)];
        }
    }
    if masked {
        let fill = diagonal_reconstruction(u, v);
        model_sq -= fill.iter().map(|x| x * x).sum::<f64>();
    }
    (view.norm_x_sq - 2.0 * inner + model_sq).max(0.0).sqrt()
}

/// Splits magnitudes from directions and orders components by scale.
fn finalize(factors: Factors, rank: usize) -> (Vec<f64>, Array2<f64>, Array2<f64>) {
    let Factors { u, v } = factors;
    let mut cols: Vec<(f64, usize)> = (0..rank)
        .map(|r| {
            let nu = u.column(r).dot(&u.column(r)).sqrt();
            let nv = v.column(r).dot(&v.column(r)).sqrt();
            (nu * nu * nv, r)
        })
        .collect();
    cols.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut scales = Vec::with_capacity(rank);
    let mut node = Array2::<f64>::zeros(u.raw_dim());
    let mut time = Array2::<f64>::zeros(v.raw_dim());
    for (dst, &(scale, src)) in cols.iter().enumerate() {
        scales.push(scale);
        if scale > 0.0 {
            let nu = u.column(src).dot(&u.column(src)).sqrt();
            let nv = v.column(src).dot(&v.column(src)).sqrt();
            for i in 0..u.nrows() {
                node[(i, dst)] = u[(i, src)] / nu;
            }
            for t in 0..v.nrows() {
                time[(t, dst)] = v[(t, src)] / nv;
            }
        }
    }
    (scales, node, time)
}

/// Dense reconstruction `Xhat[i, j, t]`; intended for desk-scale inputs.
pub fn reconstruct(model: &CpModel) -> Array3<f64> {
    let n = model.node_count();
    let horizon = model.horizon();
    let mut x = Array3::<f64>::zeros((n, n, horizon));
    for r in 0..model.rank {
        let scale = model.scales[r];
        if scale == 0.0 {
            continue;
        }
        for i in 0..n {
            for j in 0..n {
                let aij = scale * model.node_loadings[(i, r)] * model.node_loadings[(j, r)];
                if aij == 0.0 {
                    continue;
                }
                for t in 0..horizon {
                    x[(i, j, t)] += aij * model.time_loadings[(t, r)];
                }
            }
        }
    }
    x
}

/// Relative residual `||X - Xhat||_F / ||X||_F`, defined as 0 for the zero
/// tensor. Honors the model's diagonal mask: masked cells are excluded from
/// both numerator and denominator.
pub fn relative_fit(model: &CpModel, tensor: &DynTensor) -> f64 {
    let masked = model.options.mask_diagonal && !tensor.self_loops_allowed();
    let view = SparseView::new(tensor, masked);
    if view.norm_x_sq == 0.0 {
        return 0.0;
    }
    // Absorb scales into the time mode so the shared objective applies.
    let mut v = model.time_loadings.clone();
    for r in 0..model.rank {
        v.column_mut(r).mapv_inplace(|x| x * model.scales[r]);
    }
    objective(&view, &model.node_loadings, &v, masked) / view.norm_x_sq.sqrt()
}

/// Normalizes each component to memberships in `[0, 1]` and per-step rate
/// samples, preserving the reconstruction:
/// `scale * a_i a_j t_k == memb_i memb_j rate_k` for every cell.
pub fn normalize_components(model: &CpModel) -> Vec<GenerativeModel> {
    (0..model.rank)
        .map(|r| {
            let col = model.node_loadings.column(r);
            let m = col.iter().fold(0.0f64, |acc, &x| acc.max(x));
            if m <= 0.0 || model.scales[r] == 0.0 {
                return GenerativeModel {
                    index: r,
                    memberships: vec![0.0; model.node_count()],
                    rate_samples: vec![0.0; model.horizon()],
                };
            }
            let memberships = col.iter().map(|&x| (x / m).clamp(0.0, 1.0)).collect();
            let factor = model.scales[r] * m * m;
            let rate_samples = model
                .time_loadings
                .column(r)
                .iter()
                .map(|&x| factor * x)
                .collect();
            GenerativeModel {
                index: r,
                memberships,
                rate_samples,
            }
        })
        .collect()
}

/// Core consistency of a fitted model against its tensor.
///
/// Fits an unconstrained Tucker core to the fixed loadings (scales absorbed
/// into the time mode) and scores how close it is to the identity core a
/// pure CP structure implies: `100 * (1 - ||G - I||^2 / rank)`. At most 100;
/// can be negative. Values near 100 support the chosen rank. Undefined when
/// any loading matrix is rank-deficient. Builds a `rank * n * horizon`
/// intermediate, so intended for desk-scale diagnostics.
pub fn core_consistency(tensor: &DynTensor, model: &CpModel) -> Result<f64> {
    let rank = model.rank;
    let n = model.node_count();
    let horizon = model.horizon();
    if tensor.node_count() != n || tensor.horizon() != horizon {
        return Err(Error::InvalidArgument(
            "tensor shape does not match model".to_string(),
        ));
    }
    for r in 0..rank {
        if model.scales[r] == 0.0 {
            return Err(Error::CoreConsistencyUndefined {
                reason: format!("component {r} is zero, loading matrices are rank-deficient"),
            });
        }
    }
    let a = &model.node_loadings;
    let mut c = model.time_loadings.clone();
    for r in 0..rank {
        c.column_mut(r).mapv_inplace(|x| x * model.scales[r]);
    }
    let pa = pseudo_inverse(a, "node")?;
    let pc = pseudo_inverse(&c, "time")?;

    // G = X x1 A+ x2 A+ x3 C+, staged to keep products at rank * n * horizon.
    let mut y = vec![0.0f64; rank * n * horizon];
    let idx = |d: usize, j: usize, t: usize| (d * n + j) * horizon + t;
    for (i, j, t, count) in tensor.iter() {
        for d in 0..rank {
            y[idx(d, j, t)] += pa[(d, i)] * count;
            if i != j {
                y[idx(d, i, t)] += pa[(d, j)] * count;
            }
        }
    }
    let mut z = vec![0.0f64; rank * rank * horizon];
    let zidx = |d: usize, e: usize, t: usize| (d * rank + e) * horizon + t;
    for d in 0..rank {
        for e in 0..rank {
            for j in 0..n {
                let w = pa[(e, j)];
                if w == 0.0 {
                    continue;
                }
                for t in 0..horizon {
                    z[zidx(d, e, t)] += w * y[idx(d, j, t)];
                }
            }
        }
    }
    let mut deviation = 0.0f64;
    for d in 0..rank {
        for e in 0..rank {
            for f in 0..rank {
                let mut g = 0.0;
                for t in 0..horizon {
                    g += pc[(f, t)] * z[zidx(d, e, t)];
                }
                let target = if d == e && e == f { 1.0 } else { 0.0 };
                deviation += (g - target) * (g - target);
            }
        }
    }
    Ok(100.0 * (1.0 - deviation / rank as f64))
}

/// `(M^T M)^{-1} M^T` via Cholesky; fails when `M^T M` is not positive
/// definite, which signals rank-deficient loadings.
fn pseudo_inverse(m: &Array2<f64>, label: &str) -> Result<Array2<f64>> {
    let g = gram(m);
    let l = crate::linalg::cholesky(&g).ok_or_else(|| Error::CoreConsistencyUndefined {
        reason: format!("{label} loading matrix is rank-deficient"),
    })?;
    let rank = g.nrows();
    let rows = m.nrows();
    let mut p = Array2::<f64>::zeros((rank, rows));
    let mut col = ndarray::Array1::<f64>::zeros(rank);
    for i in 0..rows {
        col.assign(&m.row(i));
        crate::linalg::cholesky_solve(&l, &mut col);
        for d in 0..rank {
            p[(d, i)] = col[d];
        }
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::DynTensor;
    use approx::assert_abs_diff_eq;

    /// Expected-count tensor from explicit components, diagonal included.
    fn tensor_from_components(
        comps: &[(Vec<f64>, Vec<f64>)],
        n: usize,
        horizon: usize,
    ) -> DynTensor {
        let mut t = DynTensor::zeros(n, horizon, true);
        for i in 0..n {
            for j in i..n {
                for k in 0..horizon {
                    let v: f64 = comps.iter().map(|(a, tau)| a[i] * a[j] * tau[k]).sum();
                    if v > 0.0 {
                        t.add_count(i, j, k, v);
                    }
                }
            }
        }
        t
    }

    /// Same, with the diagonal left out (for masked fitting).
    fn offdiag_tensor_from_components(
        comps: &[(Vec<f64>, Vec<f64>)],
        n: usize,
        horizon: usize,
    ) -> DynTensor {
        let mut t = DynTensor::zeros(n, horizon, false);
        for i in 0..n {
            for j in (i + 1)..n {
                for k in 0..horizon {
                    let v: f64 = comps.iter().map(|(a, tau)| a[i] * a[j] * tau[k]).sum();
                    if v > 0.0 {
                        t.add_count(i, j, k, v);
                    }
                }
            }
        }
        t
    }

    #[test]
    fn rank_bounds_are_enforced() {
        let t = DynTensor::zeros(4, 3, false);
        assert!(cp_als(&t, 0, &CpOptions::default()).is_err());
        assert!(cp_als(&t, 4, &CpOptions::default()).is_err());
        assert!(cp_als(&t, 3, &CpOptions::default()).is_ok());
    }

    #[test]
    fn zero_tensor_fits_to_zero_model() {
        let t = DynTensor::zeros(3, 3, false);
        let model = cp_als(&t, 1, &CpOptions::default()).unwrap();
        assert_eq!(model.scales, vec![0.0]);
        assert_eq!(model.fit_error, 0.0);
        assert!(model.node_loadings.iter().all(|&x| x == 0.0));
        assert_eq!(model.degenerate_components(), vec![0]);
    }

    #[test]
    fn exact_rank_one_recovery() {
        let a = vec![1.0, 2.0, 0.0, 1.0];
        let tau = vec![3.0, 1.0, 2.0];
        let t = tensor_from_components(&[(a.clone(), tau.clone())], 4, 3);
        let opts = CpOptions {
            seed: 11,
            ..Default::default()
        };
        let model = cp_als(&t, 1, &opts).unwrap();
        assert!(relative_fit(&model, &t) <= 1e-6, "fit {}", model.fit_error);

        let gm = &normalize_components(&model)[0];
        // Memberships recover a / max(a) = [0.5, 1, 0, 0.5].
        for (got, want) in gm.memberships.iter().zip([0.5, 1.0, 0.0, 0.5]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-5);
        }
        // Rate samples recover max(a)^2 * tau = [12, 4, 8].
        for (got, want) in gm.rate_samples.iter().zip([12.0, 4.0, 8.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-4);
        }
    }

    #[test]
    fn disjoint_blocks_land_in_separate_components() {
        // Nodes 0-3 active early, nodes 4-7 active late.
        let a1 = vec![1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        let a2 = vec![0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0];
        let t1 = vec![2.0, 2.0, 2.0, 0.0, 0.0, 0.0];
        let t2 = vec![0.0, 0.0, 0.0, 3.0, 3.0, 3.0];
        let t = tensor_from_components(&[(a1, t1), (a2, t2)], 8, 6);
        let opts = CpOptions {
            seed: 5,
            n_starts: 3,
            ..Default::default()
        };
        let model = cp_als(&t, 2, &opts).unwrap();
        assert!(relative_fit(&model, &t) <= 1e-5);
        let gms = normalize_components(&model);
        let sets: Vec<Vec<usize>> = gms
            .iter()
            .map(|gm| {
                (0..8)
                    .filter(|&i| gm.memberships[i] > 0.5)
                    .collect::<Vec<_>>()
            })
            .collect();
        assert!(sets.contains(&vec![0, 1, 2, 3]), "sets: {sets:?}");
        assert!(sets.contains(&vec![4, 5, 6, 7]), "sets: {sets:?}");
    }

    #[test]
    fn objective_trace_never_increases() {
        // A tensor that is not exactly low-rank: clamping and the symmetric
        // substitution must still never push the objective up.
        let mut t = DynTensor::zeros(6, 5, false);
        let mut state = 123u64;
        for i in 0..6usize {
            for j in (i + 1)..6 {
                for k in 0..5usize {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                    let c = (state >> 33) % 7;
                    if c > 0 {
                        t.add_count(i, j, k, c as f64);
                    }
                }
            }
        }
        for seed in 0..5u64 {
            let opts = CpOptions {
                seed,
                max_iters: 200,
                ..Default::default()
            };
            let model = cp_als(&t, 2, &opts).unwrap();
            for w in model.objective_trace.windows(2) {
                assert!(
                    w[1] <= w[0] + 1e-9,
                    "objective rose from {} to {} (seed {seed})",
                    w[0],
                    w[1]
                );
            }
        }
    }

    #[test]
    fn identical_options_give_bitwise_identical_models() {
        let a = vec![1.0, 0.5, 0.0, 0.2, 0.9];
        let tau = vec![1.0, 2.0, 0.5, 0.0];
        let t = tensor_from_components(&[(a, tau)], 5, 4);
        let opts = CpOptions {
            seed: 99,
            n_starts: 2,
            ..Default::default()
        };
        let m1 = cp_als(&t, 2, &opts).unwrap();
        let m2 = cp_als(&t, 2, &opts).unwrap();
        assert_eq!(m1.node_loadings, m2.node_loadings);
        assert_eq!(m1.time_loadings, m2.time_loadings);
        assert_eq!(m1.scales, m2.scales);
        assert_eq!(m1.fit_error, m2.fit_error);
    }

    #[test]
    fn masked_fit_ignores_diagonal() {
        let a = vec![1.0, 0.8, 0.6, 0.9];
        let tau = vec![2.0, 1.0, 3.0];
        let t = offdiag_tensor_from_components(&[(a.clone(), tau.clone())], 4, 3);
        let opts = CpOptions {
            seed: 3,
            mask_diagonal: true,
            ..Default::default()
        };
        let model = cp_als(&t, 1, &opts).unwrap();
        // With the diagonal imputed, the planted component fits the
        // off-diagonal cells essentially exactly.
        assert!(
            relative_fit(&model, &t) <= 1e-5,
            "masked relative fit {}",
            relative_fit(&model, &t)
        );
    }

    #[test]
    fn masked_objective_matches_brute_force_off_diagonal_residual() {
        // Rank-1 fit to a rank-2 tensor leaves an O(1) residual, away from
        // the cancellation floor of the factored norm identity.
        let a1 = vec![1.0, 0.8, 0.6, 0.9];
        let a2 = vec![0.1, 0.9, 0.2, 0.7];
        let t1 = vec![2.0, 1.0, 3.0];
        let t2 = vec![1.0, 2.0, 0.5];
        let t = offdiag_tensor_from_components(&[(a1, t1), (a2, t2)], 4, 3);
        let opts = CpOptions {
            seed: 3,
            mask_diagonal: true,
            ..Default::default()
        };
        let model = cp_als(&t, 1, &opts).unwrap();
        assert!(model.fit_error > 0.1, "fixture should not fit exactly");

        let xhat = reconstruct(&model);
        let mut sq = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                if i == j {
                    continue;
                }
                for k in 0..3 {
                    let d = t.get(i, j, k) - xhat[(i, j, k)];
                    sq += d * d;
                }
            }
        }
        assert_abs_diff_eq!(model.fit_error, sq.sqrt(), epsilon = 1e-9);
    }

    #[test]
    fn mask_requires_self_loop_free_tensor() {
        let t = DynTensor::zeros(3, 3, true);
        let opts = CpOptions {
            mask_diagonal: true,
            ..Default::default()
        };
        assert!(cp_als(&t, 1, &opts).is_err());
    }

    #[test]
    fn huge_counts_fail_loudly_not_silently() {
        let mut t = DynTensor::zeros(2, 1, false);
        t.add_count(0, 1, 0, 1e200);
        let err = cp_als(&t, 1, &CpOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }), "got: {err}");
    }

    #[test]
    fn reconstruct_hand_built_model() {
        let model = CpModel {
            rank: 1,
            scales: vec![2.0],
            node_loadings: Array2::from_shape_vec((2, 1), vec![1.0, 1.0]).unwrap(),
            time_loadings: Array2::from_shape_vec((1, 1), vec![1.0]).unwrap(),
            fit_error: 0.0,
            iterations: 0,
            objective_trace: vec![],
            seed: 0,
            options: CpOptions::default(),
        };
        let x = reconstruct(&model);
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(x[(i, j, 0)], 2.0);
            }
        }
    }

    #[test]
    fn normalization_preserves_reconstruction() {
        let a = vec![0.3, 1.7, 0.0, 0.4];
        let tau = vec![0.2, 0.9];
        let t = tensor_from_components(&[(a, tau)], 4, 2);
        let model = cp_als(&t, 1, &CpOptions { seed: 1, ..Default::default() }).unwrap();
        let gm = &normalize_components(&model)[0];
        assert_abs_diff_eq!(
            gm.memberships.iter().fold(0.0f64, |m, &x| m.max(x)),
            1.0,
            epsilon = 0.0
        );
        for i in 0..4 {
            for j in 0..4 {
                for k in 0..2 {
                    let direct = model.scales[0]
                        * model.node_loadings[(i, 0)]
                        * model.node_loadings[(j, 0)]
                        * model.time_loadings[(k, 0)];
                    let normalized = gm.memberships[i] * gm.memberships[j] * gm.rate_samples[k];
                    assert_abs_diff_eq!(direct, normalized, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_component_normalizes_to_zero_model() {
        let model = CpModel {
            rank: 1,
            scales: vec![0.0],
            node_loadings: Array2::zeros((3, 1)),
            time_loadings: Array2::zeros((2, 1)),
            fit_error: 0.0,
            iterations: 0,
            objective_trace: vec![],
            seed: 0,
            options: CpOptions::default(),
        };
        let gm = &normalize_components(&model)[0];
        assert!(gm.is_zero());
        assert_eq!(gm.rate_samples, vec![0.0, 0.0]);
    }

    #[test]
    fn relative_fit_of_zero_tensor_is_zero() {
        let t = DynTensor::zeros(3, 3, false);
        let model = cp_als(&t, 1, &CpOptions::default()).unwrap();
        assert_eq!(relative_fit(&model, &t), 0.0);
    }

    #[test]
    fn model_json_round_trip() {
        let a = vec![1.0, 0.4, 0.7];
        let tau = vec![0.5, 1.5];
        let t = tensor_from_components(&[(a, tau)], 3, 2);
        let model = cp_als(&t, 1, &CpOptions { seed: 4, ..Default::default() }).unwrap();
        let json = serde_json::to_string(&model).unwrap();
        let back: CpModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back.rank, model.rank);
        assert_eq!(back.scales, model.scales);
        assert_eq!(back.node_loadings, model.node_loadings);
        assert_eq!(back.time_loadings, model.time_loadings);
        assert_eq!(back.fit_error, model.fit_error);
        assert_eq!(back.seed, model.seed);
        assert_eq!(back.options, model.options);
    }

    #[test]
    fn core_consistency_near_100_for_exact_rank() {
        let a = vec![1.0, 0.6, 0.2, 0.9, 0.1];
        let tau = vec![1.0, 0.5, 2.0, 0.1];
        let t = tensor_from_components(&[(a, tau)], 5, 4);
        let model = cp_als(&t, 1, &CpOptions { seed: 7, ..Default::default() }).unwrap();
        let score = core_consistency(&t, &model).unwrap();
        assert!(score > 99.9, "score {score}");
    }

    #[test]
    fn core_consistency_undefined_for_zero_component() {
        let t = DynTensor::zeros(3, 3, false);
        let model = cp_als(&t, 1, &CpOptions::default()).unwrap();
        let err = core_consistency(&t, &model).unwrap_err();
        assert!(err.to_string().contains("undefined"), "got: {err}");
    }
}
