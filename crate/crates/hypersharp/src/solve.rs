//! Small dense solvers shared by fusion methods and metrics: least squares
//! with an intercept via the normal equations, and nonnegative least squares
//! with an active-set strategy. Problems here are tiny in the unknowns
//! (bands + 1) but long in the observations, so everything is accumulated
//! into Gram form first.

use crate::error::{Error, Result};
use crate::parallel::map_indices;

/// Result of a linear fit `target ~ sum_i weights[i] * columns[i] + bias`.
#[derive(Debug, Clone)]
pub struct LsqFit {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Sum of squared residuals of the fit.
    pub residual_sse: f64,
    /// Estimated condition number of the (centred) Gram matrix.
    pub condition: f64,
}

/// Least squares with intercept. Columns and target must share a length.
///
/// The system is solved on centred variables, which makes the Gram matrix a
/// covariance matrix. On rank deficiency a Tikhonov jitter of
/// `1e-10 * trace / n` is added to the diagonal and the solve is retried; a
/// condition number above `1e12` is logged as a warning.
pub fn lsq_with_intercept(columns: &[&[f64]], target: &[f64]) -> Result<LsqFit> {
    let n = columns.len();
    if n == 0 {
        return Err(Error::dim("least squares needs at least one column"));
    }
    let len = target.len();
    if len == 0 || columns.iter().any(|c| c.len() != len) {
        return Err(Error::dim("least-squares columns must match the target length"));
    }

    let col_means: Vec<f64> = columns.iter().map(|c| crate::cube::mean(c)).collect();
    let t_mean = crate::cube::mean(target);

    // Centred Gram matrix and right-hand side, accumulated in fixed-size row
    // blocks so the parallel reduction stays deterministic.
    let (gram, rhs) = centred_gram(columns, &col_means, target, t_mean);

    let trace: f64 = (0..n).map(|i| gram[i * n + i]).sum();
    let jitter = 1e-10 * trace / n as f64;

    let weights = match cholesky_solve(&gram, n, &rhs) {
        Ok(w) => w,
        Err(_) => {
            let mut g = gram.clone();
            for i in 0..n {
                g[i * n + i] += jitter;
            }
            cholesky_solve(&g, n, &rhs)
                .map_err(|_| Error::degenerate("normal equations singular even after jitter"))?
        }
    };

    let condition = condition_estimate(&gram, n);
    if condition > 1e12 {
        log::warn!("ill-conditioned least-squares system (condition ~ {condition:.3e})");
    }

    let bias = t_mean
        - weights
            .iter()
            .zip(&col_means)
            .map(|(w, m)| w * m)
            .sum::<f64>();

    // Residual sum of squares, evaluated directly for robustness.
    let sse_parts = map_indices(len.div_ceil(BLOCK), |blk| {
        let lo = blk * BLOCK;
        let hi = (lo + BLOCK).min(len);
        let mut s = 0.0;
        for i in lo..hi {
            let mut fit = bias;
            for (w, c) in weights.iter().zip(columns) {
                fit += w * c[i];
            }
            let r = target[i] - fit;
            s += r * r;
        }
        s
    });
    let residual_sse = crate::parallel::pairwise_sum(&sse_parts);

    Ok(LsqFit {
        weights,
        bias,
        residual_sse,
        condition,
    })
}

const BLOCK: usize = 8192;

fn centred_gram(
    columns: &[&[f64]],
    col_means: &[f64],
    target: &[f64],
    t_mean: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = columns.len();
    let len = target.len();
    let blocks = len.div_ceil(BLOCK);
    let partials = map_indices(blocks, |blk| {
        let lo = blk * BLOCK;
        let hi = (lo + BLOCK).min(len);
        let mut g = vec![0.0; n * n];
        let mut r = vec![0.0; n];
        for i in lo..hi {
            for a in 0..n {
                let da = columns[a][i] - col_means[a];
                r[a] += da * (target[i] - t_mean);
                for b in a..n {
                    g[a * n + b] += da * (columns[b][i] - col_means[b]);
                }
            }
        }
        (g, r)
    });
    let mut gram = vec![0.0; n * n];
    let mut rhs = vec![0.0; n];
    for (g, r) in partials {
        for (acc, v) in gram.iter_mut().zip(&g) {
            *acc += v;
        }
        for (acc, v) in rhs.iter_mut().zip(&r) {
            *acc += v;
        }
    }
    for a in 0..n {
        for b in 0..a {
            gram[a * n + b] = gram[b * n + a];
        }
    }
    (gram, rhs)
}

/// Solves the symmetric positive-definite system `a x = b` by Cholesky
/// factorisation. Fails on a non-positive pivot.
pub fn cholesky_solve(a: &[f64], n: usize, b: &[f64]) -> Result<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return Err(Error::degenerate("matrix is not positive definite"));
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    // Forward substitution L y = b, then back substitution L^T x = y.
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Ok(x)
}

/// Crude condition estimate of a symmetric positive semi-definite matrix:
/// power iteration for the largest eigenvalue, shifted power iteration for
/// the smallest. Deterministic start vector; only used for diagnostics.
pub(crate) fn condition_estimate(a: &[f64], n: usize) -> f64 {
    if n == 1 {
        return 1.0;
    }
    let lam_max = power_iteration(a, n, None);
    if lam_max <= 0.0 {
        return f64::INFINITY;
    }
    // Largest eigenvalue of (lam_max * I - A) is lam_max - lam_min.
    let shifted: Vec<f64> = {
        let mut s = a.iter().map(|v| -v).collect::<Vec<f64>>();
        for i in 0..n {
            s[i * n + i] += lam_max;
        }
        s
    };
    let lam_min = lam_max - power_iteration(&shifted, n, None);
    if lam_min <= lam_max * 1e-300 {
        f64::INFINITY
    } else {
        lam_max / lam_min
    }
}

fn power_iteration(a: &[f64], n: usize, start: Option<Vec<f64>>) -> f64 {
    let mut v = start.unwrap_or_else(|| (0..n).map(|i| 1.0 + (i as f64) * 0.01).collect());
    let mut lam = 0.0;
    for _ in 0..60 {
        let mut w = vec![0.0; n];
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += a[i * n + j] * v[j];
            }
            w[i] = s;
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        lam = norm;
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
    }
    lam
}

/// Nonnegative least squares on a problem already reduced to Gram form:
/// minimises `||A x - b||` subject to `x >= 0`, given `gram = A^T A` and
/// `rhs = A^T b`. Active-set strategy (Lawson-Hanson on the normal
/// equations): variables enter the passive set by largest positive gradient
/// and leave when a constrained solve drives them negative.
pub fn nnls_gram(gram: &[f64], n: usize, rhs: &[f64]) -> Result<Vec<f64>> {
    debug_assert_eq!(gram.len(), n * n);
    debug_assert_eq!(rhs.len(), n);
    let scale = (0..n)
        .map(|i| gram[i * n + i].abs())
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let tol = 1e-12 * scale;

    let mut x = vec![0.0; n];
    let mut passive = vec![false; n];
    let max_outer = 3 * n + 10;

    for _ in 0..max_outer {
        // Gradient of 1/2 x^T G x - h^T x is G x - h; descent needs h - G x.
        let mut grad = vec![0.0; n];
        for i in 0..n {
            let mut s = rhs[i];
            for j in 0..n {
                s -= gram[i * n + j] * x[j];
            }
            grad[i] = s;
        }
        let candidate = (0..n)
            .filter(|&i| !passive[i] && grad[i] > tol)
            .max_by(|&a, &b| grad[a].partial_cmp(&grad[b]).unwrap());
        let Some(enter) = candidate else { break };
        passive[enter] = true;

        // Inner loop: solve on the passive set, stepping back along the
        // segment to the previous iterate whenever a passive variable would
        // go negative.
        loop {
            let idx: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
            let m = idx.len();
            let mut sub_g = vec![0.0; m * m];
            let mut sub_h = vec![0.0; m];
            for (ai, &a) in idx.iter().enumerate() {
                sub_h[ai] = rhs[a];
                for (bi, &b) in idx.iter().enumerate() {
                    sub_g[ai * m + bi] = gram[a * n + b];
                }
            }
            let z = match cholesky_solve(&sub_g, m, &sub_h) {
                Ok(z) => z,
                Err(_) => {
                    // Singular passive set: add a proportional jitter once.
                    let tr: f64 = (0..m).map(|i| sub_g[i * m + i]).sum();
                    for i in 0..m {
                        sub_g[i * m + i] += 1e-10 * tr / m as f64;
                    }
                    cholesky_solve(&sub_g, m, &sub_h)
                        .map_err(|_| Error::degenerate("NNLS passive set is singular"))?
                }
            };
            if z.iter().all(|&v| v > 0.0) {
                for (xi, &p) in x.iter_mut().zip(&passive) {
                    if !p {
                        *xi = 0.0;
                    }
                }
                for (&i, &v) in idx.iter().zip(&z) {
                    x[i] = v;
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (&i, &zi) in idx.iter().zip(&z) {
                if zi <= 0.0 {
                    let step = x[i] / (x[i] - zi);
                    if step < alpha {
                        alpha = step;
                    }
                }
            }
            for (&i, &zi) in idx.iter().zip(&z) {
                x[i] += alpha * (zi - x[i]);
                if x[i] <= tol.max(0.0) || x[i] <= 0.0 {
                    x[i] = 0.0;
                }
            }
            for &i in &idx {
                if x[i] == 0.0 {
                    passive[i] = false;
                }
            }
            if idx.iter().all(|&i| !passive[i]) {
                break;
            }
        }
    }
    Ok(x)
}

/// Nonnegative least squares on explicit columns: minimises
/// `||sum_i x[i] * columns[i] - target||` with `x >= 0`.
pub fn nnls(columns: &[&[f64]], target: &[f64]) -> Result<Vec<f64>> {
    let n = columns.len();
    if n == 0 {
        return Err(Error::dim("NNLS needs at least one column"));
    }
    let len = target.len();
    if columns.iter().any(|c| c.len() != len) {
        return Err(Error::dim("NNLS columns must match the target length"));
    }
    let mut gram = vec![0.0; n * n];
    let mut rhs = vec![0.0; n];
    for a in 0..n {
        rhs[a] = columns[a].iter().zip(target).map(|(&x, &y)| x * y).sum();
        for b in a..n {
            let dot: f64 = columns[a].iter().zip(columns[b]).map(|(&x, &y)| x * y).sum();
            gram[a * n + b] = dot;
            gram[b * n + a] = dot;
        }
    }
    nnls_gram(&gram, n, &rhs)
}
