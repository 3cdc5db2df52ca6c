//! Small dense linear-algebra kernels.
//!
//! Every system solved in this crate is tiny (rank x rank normal equations,
//! two-parameter line fits) or moderate (node x node spectral embeddings), so
//! the kernels are implemented directly instead of linking a LAPACK backend.

use ndarray::{Array1, Array2};

/// Cholesky factorization of a symmetric positive-definite matrix.
///
/// Returns the lower-triangular factor, or `None` when the matrix is not
/// positive definite within a small pivot tolerance.
pub fn cholesky(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let scale = a.diag().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = scale.max(1.0) * 1e-13;
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > tol) {
            return None;
        }
        let dj = d.sqrt();
        l[(j, j)] = dj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / dj;
        }
    }
    Some(l)
}

/// Solves `L L^T x = b` in place given the Cholesky factor `L`.
pub fn cholesky_solve(l: &Array2<f64>, b: &mut Array1<f64>) {
    let n = l.nrows();
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

/// Solves `G X^T = B^T` for `X` where `G` is symmetric positive semidefinite,
/// i.e. computes `X = B G^{-1}` row by row.
///
/// Falls back to a ridge-regularized factorization when `G` is singular;
/// returns `None` only if the matrix stays unfactorable (all-zero `G`).
pub fn solve_gram(g: &Array2<f64>, b: &Array2<f64>) -> Option<Array2<f64>> {
    let n = g.nrows();
    debug_assert_eq!(b.ncols(), n);
    let l = cholesky(g).or_else(|| {
        let trace: f64 = g.diag().sum();
        if trace <= 0.0 {
            return None;
        }
        let mut g2 = g.clone();
        let ridge = trace / n as f64 * 1e-10;
        for i in 0..n {
            g2[(i, i)] += ridge;
        }
        cholesky(&g2)
    })?;
    let mut x = Array2::<f64>::zeros(b.raw_dim());
    let mut col = Array1::<f64>::zeros(n);
    for i in 0..b.nrows() {
        col.assign(&b.row(i));
        cholesky_solve(&l, &mut col);
        x.row_mut(i).assign(&col);
    }
    Some(x)
}

/// Eigendecomposition of a symmetric matrix by the cyclic Jacobi method.
///
/// Returns `(eigenvalues, eigenvectors)` sorted by descending eigenvalue;
/// eigenvectors are columns, each canonicalized so its largest-magnitude
/// entry is positive. Deterministic for a given input.
pub fn symmetric_eig(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    let mut m = a.clone();
    let mut v = Array2::<f64>::eye(n);
    let frob: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol = frob.max(f64::MIN_POSITIVE) * 1e-12;
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[(p, q)] * m[(p, q)];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= tol * 1e-3 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]).then(i.cmp(&j)));
    let mut vals = Vec::with_capacity(n);
    let mut vecs = Array2::<f64>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        vals.push(m[(src, src)]);
        let mut best = 0usize;
        let mut best_abs = -1.0f64;
        for k in 0..n {
            let a = v[(k, src)].abs();
            if a > best_abs {
                best_abs = a;
                best = k;
            }
        }
        let sign = if v[(best, src)] < 0.0 { -1.0 } else { 1.0 };
        for k in 0..n {
            vecs[(k, dst)] = sign * v[(k, src)];
        }
    }
    (vals, vecs)
}

/// Least-squares line `y = slope * x + intercept` through `(x_i, y_i)`.
///
/// Requires at least two distinct `x` values; callers guarantee this.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    debug_assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    (slope, intercept)
}
