//! Forward solvers for the weighted-sum problem, KKT residuals, Pareto
//! filtering and efficient-front sampling.

pub mod lp;
pub mod qp;
mod smooth;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ImopError, Result};
use crate::linalg::{dot, nnls_mixed, norm};
use crate::model::{to_dmatrix, ConcreteDmp, DmpInstance, Family};

pub use lp::{solve_lp, solve_lp_lexmin, LpProblem, LpSolution};
pub use qp::{solve_qp, QpProblem, QpSolution};

/// A point of the probability simplex. Coordinate `l` weights objective `l`.
pub type WeightVector = Vec<f64>;

pub fn validate_weight(w: &[f64], p: usize) -> Result<()> {
    if w.len() != p {
        return Err(ImopError::InvalidArgument(format!("weight has length {}, expected {p}", w.len())));
    }
    let sum: f64 = w.iter().sum();
    if w.iter().any(|v| !v.is_finite() || *v < -1e-12) || (sum - 1.0).abs() > 1e-9 {
        return Err(ImopError::InvalidArgument("weight is not on the simplex".into()));
    }
    Ok(())
}

fn binom(n: usize, k: usize) -> usize {
    let mut r: usize = 1;
    for i in 0..k {
        r = r.saturating_mul(n - i) / (i + 1);
    }
    r
}

fn lattice(p: usize, h: usize) -> Vec<WeightVector> {
    fn rec(p: usize, left: usize, h: usize, cur: &mut Vec<usize>, out: &mut Vec<WeightVector>) {
        if cur.len() == p - 1 {
            cur.push(left);
            out.push(cur.iter().map(|&v| v as f64 / h as f64).collect());
            cur.pop();
            return;
        }
        for v in 0..=left {
            cur.push(v);
            rec(p, left - v, h, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(p, h, h, &mut Vec::new(), &mut out);
    out
}

/// Uniform Dirichlet(1,…,1) draws.
pub fn random_weights(p: usize, k: usize, seed: u64) -> Result<Vec<WeightVector>> {
    if p < 2 {
        return Err(ImopError::InvalidArgument("need at least two objectives".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..k)
        .map(|_| {
            let e: Vec<f64> = (0..p).map(|_| Exp1.sample(&mut rng)).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(|v| v / s).collect()
        })
        .collect())
}

/// The largest simplex lattice with at most `k` points, padded with seeded
/// uniform draws up to exactly `k`. For p = 2 this is the evenly spaced grid
/// with the first coordinate ascending.
pub fn grid_weights(p: usize, k: usize, seed: u64) -> Result<Vec<WeightVector>> {
    if p < 2 {
        return Err(ImopError::InvalidArgument("need at least two objectives".into()));
    }
    if k == 0 {
        return Err(ImopError::InvalidArgument("need at least one weight".into()));
    }
    if k == 1 {
        let mut w = vec![0.0; p];
        w[0] = 1.0;
        return Ok(vec![w]);
    }
    let mut h = 1;
    while binom(h + 1 + p - 1, p - 1) <= k {
        h += 1;
    }
    let mut pts = lattice(p, h);
    if p == 2 {
        pts.reverse();
        for w in pts.iter_mut() {
            w.reverse();
        }
        pts.sort_by(|a, b| a[0].total_cmp(&b[0]));
    }
    if pts.len() < k {
        pts.extend(random_weights(p, k - pts.len(), seed)?);
    }
    // k < p: the coarsest lattice (the unit vectors) is already too large
    pts.truncate(k);
    Ok(pts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardSolution {
    pub x: Vec<f64>,
    /// Multipliers of the canonical inequality list (rows, lower bounds,
    /// upper bounds), all ≥ 0.
    pub ineq_mult: Vec<f64>,
    pub eq_mult: Vec<f64>,
    pub objective: f64,
    /// False when the weighted-sum optimum may not be unique (linear ties).
    pub unique: bool,
}

pub(crate) struct DenseSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub e: DMatrix<f64>,
    pub d: DVector<f64>,
}

pub(crate) fn dense_system(dmp: &ConcreteDmp) -> DenseSystem {
    let n = dmp.n();
    let (a, b, _) = dmp.constraints.canonical_ineq();
    DenseSystem {
        a: to_dmatrix(&a, n),
        b: DVector::from_vec(b),
        e: to_dmatrix(&dmp.constraints.a_eq, n),
        d: DVector::from_column_slice(&dmp.constraints.b_eq),
    }
}

pub(crate) fn lp_for(dmp: &ConcreteDmp, c: Vec<f64>) -> LpProblem {
    let n = dmp.n();
    let cons = &dmp.constraints;
    let mut lp = LpProblem::new(c);
    lp.a_ineq = to_dmatrix(&cons.a_ineq, n);
    lp.b_ineq = DVector::from_column_slice(&cons.b_ineq);
    lp.a_eq = to_dmatrix(&cons.a_eq, n);
    lp.b_eq = DVector::from_column_slice(&cons.b_eq);
    lp.lower = cons.lower_f64();
    lp.upper = cons.upper_f64();
    lp
}

fn is_linear_weighted(dmp: &ConcreteDmp, w: &[f64]) -> bool {
    dmp.objectives
        .iter()
        .zip(w)
        .all(|(o, &wl)| wl == 0.0 || (o.poly.is_empty() && o.quadratic.as_ref().is_none_or(|q| q.iter().flatten().all(|v| *v == 0.0))))
}

/// Solves the weighted-sum problem min Σ w_l f_l(x) over X.
pub fn solve_wp(dmp: &ConcreteDmp, w: &[f64]) -> Result<ForwardSolution> {
    validate_weight(w, dmp.p())?;
    let n = dmp.n();
    let sol = if dmp.family == Family::Linear || is_linear_weighted(dmp, w) {
        let c = dmp.weighted_gradient(w, &vec![0.0; n]);
        let lp = solve_lp_lexmin(&lp_for(dmp, c))?;
        let (ineq_mult, eq_mult) = recover_multipliers(dmp, w, &lp.x);
        ForwardSolution { objective: dmp.weighted_value(w, &lp.x), x: lp.x, ineq_mult, eq_mult, unique: lp.unique }
    } else if dmp.family == Family::Quadratic {
        let sys = dense_system(dmp);
        let h = dmp.weighted_hessian(w, &vec![0.0; n]);
        let g = DVector::from_vec(dmp.weighted_gradient(w, &vec![0.0; n]));
        let qp = QpProblem { h, g, a_ineq: sys.a, b_ineq: sys.b, a_eq: sys.e, b_eq: sys.d };
        let s = solve_qp(&qp)?;
        let x: Vec<f64> = s.x.iter().copied().collect();
        ForwardSolution {
            objective: dmp.weighted_value(w, &x),
            x,
            ineq_mult: s.ineq_mult.iter().copied().collect(),
            eq_mult: s.eq_mult.iter().copied().collect(),
            unique: true,
        }
    } else {
        smooth::solve(dmp, w)?
    };
    Ok(sol)
}

/// Binds `theta` and solves.
pub fn solve_wp_theta(inst: &DmpInstance, theta: &[f64], w: &[f64]) -> Result<ForwardSolution> {
    solve_wp(&inst.apply(theta)?, w)
}

/// Least-squares multipliers on the constraints active at `x`.
pub fn recover_multipliers(dmp: &ConcreteDmp, w: &[f64], x: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = dmp.n();
    let grad = dmp.weighted_gradient(w, x);
    let sys = dense_system(dmp);
    let m = sys.a.nrows();
    let me = sys.e.nrows();
    let scale = 1.0 + x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let active: Vec<usize> = (0..m)
        .filter(|&i| {
            let gi = dot(&sys.a.row(i).iter().copied().collect::<Vec<_>>(), x) - sys.b[i];
            gi >= -1e-8 * scale * (1.0 + sys.b[i].abs())
        })
        .collect();
    let cols = active.len() + me;
    let mut mat = DMatrix::zeros(n, cols);
    for (c, &i) in active.iter().enumerate() {
        for j in 0..n {
            mat[(j, c)] = sys.a[(i, j)];
        }
    }
    for r in 0..me {
        for j in 0..n {
            mat[(j, active.len() + r)] = sys.e[(r, j)];
        }
    }
    let mut free = vec![false; active.len()];
    free.extend(std::iter::repeat_n(true, me));
    let rhs = -DVector::from_vec(grad);
    let sol = nnls_mixed(&mat, &rhs, &free);
    let mut u = vec![0.0; m];
    for (c, &i) in active.iter().enumerate() {
        u[i] = sol[c];
    }
    let mu = (0..me).map(|r| sol[active.len() + r]).collect();
    (u, mu)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    /// |∇(wᵀf)(x) + Jᵀu + Eᵀμ|₂
    pub stationarity: f64,
    /// max_i |u_i g_i(x)|
    pub complementarity: f64,
    /// max constraint violation
    pub primal: f64,
    /// max_i max(0, -u_i)
    pub dual: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.complementarity).max(self.primal).max(self.dual)
    }
}

/// KKT residuals of (x, u, μ) for the weighted-sum problem. Empty `eq_mult`
/// is treated as zeros.
pub fn kkt_residuals(dmp: &ConcreteDmp, w: &[f64], x: &[f64], ineq_mult: &[f64], eq_mult: &[f64]) -> Result<KktResiduals> {
    let n = dmp.n();
    if x.len() != n {
        return Err(ImopError::InvalidArgument("decision vector has wrong length".into()));
    }
    let sys = dense_system(dmp);
    if ineq_mult.len() != sys.a.nrows() || (!eq_mult.is_empty() && eq_mult.len() != sys.e.nrows()) {
        return Err(ImopError::InvalidArgument("multiplier vector has wrong length".into()));
    }
    let mut r = dmp.weighted_gradient(w, x);
    let mut comp: f64 = 0.0;
    let mut dual: f64 = 0.0;
    for i in 0..sys.a.nrows() {
        let row: Vec<f64> = sys.a.row(i).iter().copied().collect();
        for j in 0..n {
            r[j] += row[j] * ineq_mult[i];
        }
        let g = dot(&row, x) - sys.b[i];
        comp = comp.max((ineq_mult[i] * g).abs());
        dual = dual.max(-ineq_mult[i]);
    }
    for (k, mu) in eq_mult.iter().enumerate() {
        for j in 0..n {
            r[j] += sys.e[(k, j)] * mu;
        }
    }
    Ok(KktResiduals {
        stationarity: norm(&r),
        complementarity: comp,
        primal: dmp.constraints.max_violation(x).max(0.0),
        dual,
    })
}

/// Marks points that no other point dominates. `j` dominates `i` when
/// f(j) ≤ f(i) + tol componentwise and f(j) < f(i) - tol in some component.
pub fn pareto_filter(values: &[Vec<f64>], tol: f64) -> Vec<bool> {
    let dominates = |a: &[f64], b: &[f64]| {
        a.iter().zip(b).all(|(x, y)| *x <= y + tol) && a.iter().zip(b).any(|(x, y)| *x < y - tol)
    };
    (0..values.len())
        .map(|i| !(0..values.len()).any(|j| j != i && dominates(&values[j], &values[i])))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontPoint {
    pub weight: WeightVector,
    pub x: Vec<f64>,
    pub f: Vec<f64>,
    /// True when some weight coordinate is zero (possibly only weakly efficient).
    pub boundary: bool,
}

/// Solves the weighted-sum problem for every weight and returns the
/// non-dominated solutions in input order.
pub fn sample_efficient_front(dmp: &ConcreteDmp, weights: &[WeightVector], tol: f64) -> Result<Vec<FrontPoint>> {
    let sols: Vec<Result<ForwardSolution>> = weights.par_iter().map(|w| solve_wp(dmp, w)).collect();
    let mut pts = Vec::with_capacity(weights.len());
    for (w, s) in weights.iter().zip(sols) {
        let s = s?;
        let f = dmp.objective_values(&s.x);
        pts.push(FrontPoint { boundary: w.iter().any(|v| *v <= 0.0), weight: w.clone(), x: s.x, f });
    }
    let keep = pareto_filter(&pts.iter().map(|p| p.f.clone()).collect::<Vec<_>>(), tol);
    Ok(pts.into_iter().zip(keep).filter(|(_, k)| *k).map(|(p, _)| p).collect())
}

/// Solutions x_k ∈ S(w_k, θ) for every weight, without filtering.
pub fn front_points(dmp: &ConcreteDmp, weights: &[WeightVector]) -> Result<Vec<Vec<f64>>> {
    weights.iter().map(|w| solve_wp(dmp, w).map(|s| s.x)).collect()
}

/// Distance from `x` to the solution set S(w) of the weighted-sum problem.
/// For strictly convex problems S(w) is a single point; for linear ties the
/// whole optimal face is used.
pub fn distance_to_solution_set(dmp: &ConcreteDmp, w: &[f64], x: &[f64]) -> Result<f64> {
    let sol = solve_wp(dmp, w)?;
    let d0 = crate::linalg::dist(x, &sol.x);
    if sol.unique || d0 == 0.0 {
        return Ok(d0);
    }
    let n = dmp.n();
    let c = dmp.weighted_gradient(w, &vec![0.0; n]);
    let vstar = sol.objective;
    let gap = dot(&c, x) - vstar;
    let cn = norm(&c).max(1e-300);
    let feas = dmp.constraints.max_violation(x);
    if feas <= 1e-9 && gap <= 1e-9 * (1.0 + vstar.abs()) {
        return Ok(0.0);
    }
    // Lower bound from the gap; skip the projection if it already exceeds d0.
    if gap / cn >= d0 {
        return Ok(d0);
    }
    let sys = dense_system(dmp);
    let m = sys.a.nrows();
    let mut a = DMatrix::zeros(m + 1, n);
    a.rows_mut(0, m).copy_from(&sys.a);
    for j in 0..n {
        a[(m, j)] = c[j];
    }
    let mut b = DVector::zeros(m + 1);
    b.rows_mut(0, m).copy_from(&sys.b);
    b[m] = vstar + 1e-10 * (1.0 + vstar.abs());
    let qp = QpProblem { h: DMatrix::identity(n, n), g: -DVector::from_column_slice(x), a_ineq: a, b_ineq: b, a_eq: sys.e, b_eq: sys.d };
    let proj = solve_qp(&qp)?;
    let xs: Vec<f64> = proj.x.iter().copied().collect();
    Ok(crate::linalg::dist(x, &xs).min(d0))
}

/// Weak-efficiency residual for linear objectives: the smallest
/// |Σ_l w_l c_l + Jᵀu + Eᵀμ|₁ over weights on the simplex and multipliers
/// supported on constraints active at `x` (within `act_tol`). Zero iff `x`
/// is weakly efficient (and feasible). Infinite if `x` is infeasible.
pub fn weak_efficiency_residual(dmp: &ConcreteDmp, x: &[f64], act_tol: f64) -> Result<f64> {
    if dmp.family != Family::Linear {
        return Err(ImopError::InvalidArgument("weak efficiency residual needs linear objectives".into()));
    }
    if dmp.constraints.max_violation(x) > act_tol {
        return Ok(f64::INFINITY);
    }
    let n = dmp.n();
    let p = dmp.p();
    let sys = dense_system(dmp);
    let active: Vec<usize> = (0..sys.a.nrows())
        .filter(|&i| {
            let row: Vec<f64> = sys.a.row(i).iter().copied().collect();
            dot(&row, x) - sys.b[i] >= -act_tol
        })
        .collect();
    let me = sys.e.nrows();
    // Variables: w (p), u (active), μ (me, free), s⁺, s⁻ (n each).
    let nv = p + active.len() + me + 2 * n;
    let mut c = vec![0.0; nv];
    for j in 0..2 * n {
        c[p + active.len() + me + j] = 1.0;
    }
    let mut lp = LpProblem::new(c);
    let mut e = DMatrix::zeros(n + 1, nv);
    let mut d = DVector::zeros(n + 1);
    for j in 0..n {
        for l in 0..p {
            e[(j, l)] = dmp.objectives[l].linear[j];
        }
        for (k, &i) in active.iter().enumerate() {
            e[(j, p + k)] = sys.a[(i, j)];
        }
        for r in 0..me {
            e[(j, p + active.len() + r)] = sys.e[(r, j)];
        }
        e[(j, p + active.len() + me + j)] = -1.0;
        e[(j, p + active.len() + me + n + j)] = 1.0;
    }
    for l in 0..p {
        e[(n, l)] = 1.0;
    }
    d[n] = 1.0;
    lp.a_eq = e;
    lp.b_eq = d;
    lp.lower = vec![0.0; nv];
    for r in 0..me {
        lp.lower[p + active.len() + r] = f64::NEG_INFINITY;
    }
    let s = solve_lp(&lp)?;
    Ok(s.objective.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Constraints, Objective};

    pub(crate) fn example1() -> ConcreteDmp {
        let mut c = Constraints::nonneg(2);
        c.a_ineq = vec![vec![3.0, -1.0], vec![0.0, 1.0]];
        c.b_ineq = vec![6.0, 3.0];
        ConcreteDmp {
            family: Family::Quadratic,
            objectives: vec![
                Objective::quadratic(vec![vec![2.0, 0.0], vec![0.0, 4.0]], vec![6.0, 2.0]),
                Objective::quadratic(vec![vec![4.0, 0.0], vec![0.0, 2.0]], vec![-12.0, -10.0]),
            ],
            constraints: c,
        }
    }

    // Closed-form weighted-sum solutions, weight w on f1.
    fn oracle_ex1(w: f64) -> (f64, f64) {
        let x1 = if w <= 2.0 / 3.0 { (6.0 - 9.0 * w) / (2.0 - w) } else { 0.0 };
        let x2 = if w <= 2.0 / 9.0 {
            3.0
        } else if w <= 5.0 / 6.0 {
            (5.0 - 6.0 * w) / (1.0 + w)
        } else {
            0.0
        };
        (x1, x2)
    }

    #[test]
    fn matches_closed_form_on_example1() {
        let dmp = example1();
        for k in 0..=40 {
            let w = k as f64 / 40.0;
            let s = solve_wp(&dmp, &[w, 1.0 - w]).unwrap();
            let (a, b) = oracle_ex1(w);
            assert!((s.x[0] - a).abs() < 1e-8 && (s.x[1] - b).abs() < 1e-8, "w={w}: {:?} vs ({a},{b})", s.x);
            let r = kkt_residuals(&dmp, &[w, 1.0 - w], &s.x, &s.ineq_mult, &s.eq_mult).unwrap();
            assert!(r.max() < 1e-8, "{r:?}");
        }
    }

    #[test]
    fn midpoint_example() {
        let dmp = example1();
        let s = solve_wp(&dmp, &[0.5, 0.5]).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-9 && (s.x[1] - 4.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn stationarity_at_origin() {
        let dmp = example1();
        let r = kkt_residuals(&dmp, &[0.0, 1.0], &[0.0, 0.0], &[0.0; 4], &[]).unwrap();
        assert!((r.stationarity - (244.0f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn grids() {
        let g = grid_weights(2, 6, 0).unwrap();
        assert_eq!(g.len(), 6);
        for (k, w) in g.iter().enumerate() {
            assert!((w[0] - k as f64 / 5.0).abs() < 1e-15 && (w[0] + w[1] - 1.0).abs() < 1e-15);
        }
        assert_eq!(grid_weights(3, 1, 0).unwrap(), vec![vec![1.0, 0.0, 0.0]]);
        let g3 = grid_weights(3, 50, 1).unwrap();
        assert_eq!(g3.len(), 50);
        assert_eq!(lattice(3, 8).len(), 45);
        assert_eq!(g3, grid_weights(3, 50, 1).unwrap());
        assert!(grid_weights(1, 3, 0).is_err());
    }

    #[test]
    fn filter_drops_dominated() {
        let v = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0]];
        assert_eq!(pareto_filter(&v, 1e-9), vec![true, true, false, true]);
    }

    #[test]
    fn linear_family_face_distance_and_weak_efficiency() {
        let mut c = Constraints::free(2);
        c.a_ineq = vec![vec![-6.0, -1.0], vec![-1.0, -6.0], vec![1.0, 1.0]];
        c.b_ineq = vec![0.0, 0.0, 1.0];
        let dmp = ConcreteDmp {
            family: Family::Linear,
            objectives: vec![Objective::linear(vec![1.0, 0.0]), Objective::linear(vec![0.0, 1.0])],
            constraints: c,
        };
        // Weight making the objective parallel to edge O-A.
        let w = [6.0 / 7.0, 1.0 / 7.0];
        let mid = [-0.1, 0.6];
        assert!(distance_to_solution_set(&dmp, &w, &mid).unwrap() < 1e-7);
        assert!(weak_efficiency_residual(&dmp, &mid, 1e-9).unwrap() < 1e-9);
        // A point on edge A-B (x1+x2=1) is not efficient.
        let ab = [0.5, 0.5];
        assert!(weak_efficiency_residual(&dmp, &ab, 1e-9).unwrap() > 1e-3);
    }

    proptest::proptest! {
        #[test]
        fn grid_weights_lie_on_the_simplex(p in 2usize..5, k in 1usize..60, seed in 0u64..1000) {
            let w = grid_weights(p, k, seed).unwrap();
            proptest::prop_assert_eq!(w.len(), k);
            for v in &w {
                proptest::prop_assert_eq!(v.len(), p);
                proptest::prop_assert!(v.iter().all(|&x| x >= 0.0));
                proptest::prop_assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            proptest::prop_assert_eq!(w, grid_weights(p, k, seed).unwrap());
        }
    }
}
