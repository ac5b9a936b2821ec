//! KKT-residual initialisation.
//!
//! Alternates between picking, for every target, the weight and
//! multipliers with the smallest stationarity-plus-complementarity residual
//! (by non-negative least squares), and a pattern-search step on θ with
//! those picks held fixed.

use nalgebra::{DMatrix, DVector};

use super::fit::{multistart, FitConfig};
use crate::error::Result;
use crate::linalg::{dot, nnls_mixed, norm};
use crate::model::{ConcreteDmp, DmpInstance, ParamVector};
use crate::solver::{dense_system, WeightVector};

#[derive(Debug, Clone, PartialEq)]
struct Pick {
    weight: usize,
    u: Vec<f64>,
    mu: Vec<f64>,
}

fn residual(dmp: &ConcreteDmp, w: &[f64], y: &[f64], u: &[f64], mu: &[f64]) -> f64 {
    let sys = dense_system(dmp);
    let n = dmp.n();
    let mut r = dmp.weighted_gradient(w, y);
    let mut comp = 0.0;
    for i in 0..sys.a.nrows() {
        if u[i] != 0.0 {
            let row: Vec<f64> = sys.a.row(i).iter().copied().collect();
            for j in 0..n {
                r[j] += row[j] * u[i];
            }
            comp += u[i] * (dot(&row, y) - sys.b[i]);
        }
    }
    for (k, m) in mu.iter().enumerate() {
        for j in 0..n {
            r[j] += sys.e[(k, j)] * m;
        }
    }
    norm(&r) + comp.abs()
}

fn best_pick(dmp: &ConcreteDmp, weights: &[WeightVector], y: &[f64]) -> (Pick, f64) {
    let sys = dense_system(dmp);
    let n = dmp.n();
    let m = sys.a.nrows();
    let me = sys.e.nrows();
    // Columns: inequality normals then equality normals; last row carries g(y).
    let mut mat = DMatrix::zeros(n + 1, m + me);
    for i in 0..m {
        for j in 0..n {
            mat[(j, i)] = sys.a[(i, j)];
        }
        let row: Vec<f64> = sys.a.row(i).iter().copied().collect();
        mat[(n, i)] = dot(&row, y) - sys.b[i];
    }
    for k in 0..me {
        for j in 0..n {
            mat[(j, m + k)] = sys.e[(k, j)];
        }
    }
    let mut free = vec![false; m];
    free.extend(std::iter::repeat_n(true, me));
    let mut best: Option<(Pick, f64)> = None;
    for (k, w) in weights.iter().enumerate() {
        let g = dmp.weighted_gradient(w, y);
        let mut rhs = DVector::zeros(n + 1);
        for j in 0..n {
            rhs[j] = -g[j];
        }
        let sol = nnls_mixed(&mat, &rhs, &free);
        let u: Vec<f64> = (0..m).map(|i| sol[i]).collect();
        let mu: Vec<f64> = (0..me).map(|i| sol[m + i]).collect();
        let r = residual(dmp, w, y, &u, &mu);
        if best.as_ref().is_none_or(|b| r < b.1) {
            best = Some((Pick { weight: k, u, mu }, r));
        }
    }
    best.expect("non-empty weights")
}

/// Parameter estimate minimising the summed KKT residual of the targets.
pub fn kkt_init(
    inst: &DmpInstance,
    targets: &[Vec<f64>],
    counts: &[f64],
    weights: &[WeightVector],
    alternations: usize,
    cfg: &FitConfig,
) -> Result<ParamVector> {
    let mut theta = inst.space.center()?;
    let search_cfg = FitConfig { random_starts: 0, ..cfg.clone() };
    for _ in 0..alternations.max(1) {
        let dmp = inst.apply(&theta)?;
        let picks: Vec<Pick> = targets.iter().map(|y| best_pick(&dmp, weights, y).0).collect();
        let f = |th: &[f64]| {
            let d = inst.apply_unchecked(th);
            targets
                .iter()
                .zip(counts)
                .zip(&picks)
                .map(|((y, c), p)| c * residual(&d, &weights[p.weight], y, &p.u, &p.mu))
                .sum::<f64>()
        };
        let r = multistart(&inst.space, &f, std::slice::from_ref(&theta), &search_cfg)?;
        let moved = crate::linalg::dist(&r.theta, &theta);
        theta = r.theta;
        if moved == 0.0 {
            break;
        }
    }
    Ok(theta)
}
