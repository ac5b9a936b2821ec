//! Projected Newton for smooth convex objectives over a polyhedron.
//!
//! Each step solves the QP model min ∇fᵀd + ½dᵀ(H + δI)d over x + d ∈ X and
//! backtracks on the true objective (Armijo, c = 1e-4, factor 0.5).

use nalgebra::{DMatrix, DVector};

use super::{dense_system, ForwardSolution};
use crate::error::{ImopError, Result};
use crate::model::ConcreteDmp;
use crate::solver::qp::{solve_qp, QpProblem};

pub(crate) fn solve(dmp: &ConcreteDmp, w: &[f64]) -> Result<ForwardSolution> {
    let n = dmp.n();
    let sys = dense_system(dmp);
    // Feasible start: projection of the origin onto X.
    let start = QpProblem {
        h: DMatrix::identity(n, n),
        g: DVector::zeros(n),
        a_ineq: sys.a.clone(),
        b_ineq: sys.b.clone(),
        a_eq: sys.e.clone(),
        b_eq: sys.d.clone(),
    };
    let mut x: Vec<f64> = solve_qp(&start)?.x.iter().copied().collect();
    let mut fx = dmp.weighted_value(w, &x);
    let mut last_mult = (vec![0.0; sys.a.nrows()], vec![0.0; sys.e.nrows()]);

    for _ in 0..200 {
        let g = dmp.weighted_gradient(w, &x);
        let mut h = dmp.weighted_hessian(w, &x);
        let hscale = h.amax().max(1e-12);
        let delta = 1e-8 * hscale;
        for i in 0..n {
            h[(i, i)] += delta;
        }
        let xv = DVector::from_column_slice(&x);
        let gv = DVector::from_column_slice(&g);
        let qp = QpProblem {
            g: &gv - &h * &xv,
            h,
            a_ineq: sys.a.clone(),
            b_ineq: sys.b.clone(),
            a_eq: sys.e.clone(),
            b_eq: sys.d.clone(),
        };
        let sol = solve_qp(&qp)?;
        let d: Vec<f64> = (0..n).map(|i| sol.x[i] - x[i]).collect();
        last_mult = (sol.ineq_mult.iter().copied().collect(), sol.eq_mult.iter().copied().collect());
        let slope: f64 = g.iter().zip(&d).map(|(a, b)| a * b).sum();
        let dnorm = d.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let xnorm = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if dnorm <= 1e-10 * (1.0 + xnorm) || -slope <= 1e-15 * (1.0 + fx.abs()) {
            break;
        }
        let mut alpha = 1.0;
        loop {
            let xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
            let fnew = dmp.weighted_value(w, &xn);
            if fnew <= fx + 1e-4 * alpha * slope {
                x = xn;
                fx = fnew;
                break;
            }
            alpha *= 0.5;
            if alpha < 1e-12 {
                return Err(ImopError::Solver("line search failed".into()));
            }
        }
    }
    Ok(ForwardSolution { objective: fx, x, ineq_mult: last_mult.0, eq_mult: last_mult.1, unique: true })
}
