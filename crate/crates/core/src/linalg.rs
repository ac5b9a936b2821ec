//! Small dense helpers shared by the solvers and estimators.

use nalgebra::{DMatrix, DVector};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm1(a: &[f64]) -> f64 {
    a.iter().map(|v| v.abs()).sum()
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

pub fn l1_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Least-squares solve restricted to the listed columns of `a`.
fn lstsq_cols(a: &DMatrix<f64>, b: &DVector<f64>, cols: &[usize]) -> DVector<f64> {
    if cols.is_empty() {
        return DVector::zeros(0);
    }
    let sub = a.select_columns(cols);
    let svd = sub.svd(true, true);
    svd.solve(b, 1e-13).unwrap_or_else(|_| DVector::zeros(cols.len()))
}

/// Lawson-Hanson non-negative least squares, min |Ax - b| s.t. x_j >= 0 for
/// every j not flagged in `free`. Free columns may take any sign.
pub fn nnls_mixed(a: &DMatrix<f64>, b: &DVector<f64>, free: &[bool]) -> DVector<f64> {
    let n = a.ncols();
    assert_eq!(free.len(), n);
    let tol = 1e-12 * (1.0 + a.amax()) * (1.0 + b.amax());
    let mut passive: Vec<bool> = free.to_vec();
    let mut x = DVector::zeros(n);

    let solve_passive = |passive: &[bool]| -> DVector<f64> {
        let cols: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let s = lstsq_cols(a, b, &cols);
        let mut full = DVector::zeros(n);
        for (k, &j) in cols.iter().enumerate() {
            full[j] = s[k];
        }
        full
    };

    if passive.iter().any(|&p| p) {
        x = solve_passive(&passive);
    }

    let max_outer = 3 * n + 10;
    for _ in 0..max_outer {
        let r = b - a * &x;
        let w = a.transpose() * r;
        let mut best = None;
        let mut best_w = tol;
        for j in 0..n {
            if !passive[j] && w[j] > best_w {
                best_w = w[j];
                best = Some(j);
            }
        }
        let Some(t) = best else { break };
        passive[t] = true;

        let mut inner = 0;
        loop {
            inner += 1;
            let s = solve_passive(&passive);
            let bad: Vec<usize> = (0..n)
                .filter(|&j| passive[j] && !free[j] && s[j] <= 0.0)
                .collect();
            if bad.is_empty() || inner > 3 * n + 10 {
                x = s;
                break;
            }
            let mut alpha = f64::INFINITY;
            for &j in &bad {
                let denom = x[j] - s[j];
                if denom > 0.0 {
                    alpha = alpha.min(x[j] / denom);
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            x += (s - &x) * alpha;
            for j in 0..n {
                if passive[j] && !free[j] && x[j] <= tol {
                    passive[j] = false;
                    x[j] = 0.0;
                }
            }
        }
    }
    for j in 0..n {
        if !free[j] && x[j] < 0.0 {
            x[j] = 0.0;
        }
    }
    x
}

/// Plain NNLS: every column constrained to be non-negative.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    nnls_mixed(a, b, &vec![false; a.ncols()])
}
