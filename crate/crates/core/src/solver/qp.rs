//! Dense convex QP via the Goldfarb-Idnani dual active-set method.
//!
//! Solves min ½xᵀHx + gᵀx s.t. A x ≤ b, E x = d. Multipliers follow the
//! convention Hx + g + Aᵀu + Eᵀμ = 0 with u ≥ 0. A positive semidefinite H
//! that fails Cholesky is handled by proximal-point iterations.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{ImopError, Result};

#[derive(Debug, Clone)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
    pub a_ineq: DMatrix<f64>,
    pub b_ineq: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub ineq_mult: DVector<f64>,
    pub eq_mult: DVector<f64>,
    pub iterations: usize,
}

impl QpProblem {
    pub fn new(h: DMatrix<f64>, g: DVector<f64>) -> Self {
        let n = g.len();
        QpProblem {
            h,
            g,
            a_ineq: DMatrix::zeros(0, n),
            b_ineq: DVector::zeros(0),
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
        }
    }

    pub fn with_ineq(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_ineq = a;
        self.b_ineq = b;
        self
    }

    pub fn with_eq(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_eq = a;
        self.b_eq = b;
        self
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    fn check(&self) -> Result<()> {
        let n = self.dim();
        let ok = self.h.nrows() == n
            && self.h.ncols() == n
            && self.a_ineq.ncols() == n
            && self.a_ineq.nrows() == self.b_ineq.len()
            && self.a_eq.ncols() == n
            && self.a_eq.nrows() == self.b_eq.len();
        if ok {
            Ok(())
        } else {
            Err(ImopError::InvalidArgument("QP dimensions disagree".into()))
        }
    }
}

pub fn solve_qp(p: &QpProblem) -> Result<QpSolution> {
    p.check()?;
    let scale = p.h.amax().max(1e-300);
    if let Some(chol) = Cholesky::new(p.h.clone()) {
        let l = chol.l();
        let min_diag = (0..l.nrows()).map(|i| l[(i, i)]).fold(f64::INFINITY, f64::min);
        if min_diag * min_diag > 1e-12 * scale {
            return goldfarb_idnani(p, &l);
        }
    }
    proximal(p)
}

/// Proximal-point outer loop for singular H.
fn proximal(p: &QpProblem) -> Result<QpSolution> {
    let n = p.dim();
    let eps = 1e-3 * p.h.amax().max(p.g.amax()).max(1.0);
    let h_reg = &p.h + DMatrix::identity(n, n) * eps;
    let l = Cholesky::new(h_reg.clone())
        .ok_or_else(|| ImopError::Solver("regularised Hessian not positive definite".into()))?
        .l();
    let mut x = DVector::zeros(n);
    let mut total = 0;
    for _ in 0..5000 {
        let sub = QpProblem {
            h: h_reg.clone(),
            g: &p.g - &x * eps,
            a_ineq: p.a_ineq.clone(),
            b_ineq: p.b_ineq.clone(),
            a_eq: p.a_eq.clone(),
            b_eq: p.b_eq.clone(),
        };
        let sol = goldfarb_idnani(&sub, &l)?;
        total += sol.iterations;
        let step = (&sol.x - &x).norm();
        x = sol.x.clone();
        if step <= 1e-12 * (1.0 + x.norm()) {
            return Ok(QpSolution { iterations: total, ..sol });
        }
    }
    Err(ImopError::Solver("proximal iterations did not converge".into()))
}

fn goldfarb_idnani(p: &QpProblem, l: &DMatrix<f64>) -> Result<QpSolution> {
    let n = p.dim();
    let m_in = p.a_ineq.nrows();
    let m_eq = p.a_eq.nrows();
    let m = m_in + m_eq;

    // Constraints in ≥ form: nᵢᵀx ≥ eᵢ. Equalities come after inequalities.
    let mut normals: Vec<DVector<f64>> = Vec::with_capacity(m);
    let mut rhs: Vec<f64> = Vec::with_capacity(m);
    for i in 0..m_in {
        normals.push(-p.a_ineq.row(i).transpose());
        rhs.push(-p.b_ineq[i]);
    }
    for i in 0..m_eq {
        normals.push(p.a_eq.row(i).transpose());
        rhs.push(p.b_eq[i]);
    }
    let norms: Vec<f64> = normals.iter().map(|v| v.norm().max(1e-300)).collect();

    let linv = l
        .clone()
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or_else(|| ImopError::Solver("singular Cholesky factor".into()))?;
    let linv_t = linv.transpose();

    // Unconstrained minimiser.
    let mut x = -(&linv_t * (&linv * &p.g));
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let mut eq_sign = vec![1.0; m];
    let mut eq_done = vec![false; m_eq];
    let max_iter = 20 * (m + n) + 100;
    let mut iters = 0;

    let viol_tol = |i: usize, x: &DVector<f64>, rhs: &[f64]| -> f64 {
        1e-10 * (1.0 + rhs[i].abs() + norms[i] * x.amax())
    };

    loop {
        iters += 1;
        if iters > max_iter {
            return Err(ImopError::Solver("Goldfarb-Idnani iteration limit".into()));
        }
        // Step 1: pick a constraint to add.
        let mut pick: Option<usize> = None;
        if let Some(k) = eq_done.iter().position(|d| !d) {
            eq_done[k] = true;
            let i = m_in + k;
            let s = normals[i].dot(&x) - rhs[i];
            if s > 0.0 {
                eq_sign[i] = -1.0;
            }
            pick = Some(i);
        } else {
            let mut worst = 0.0;
            for i in 0..m_in {
                if active.contains(&i) {
                    continue;
                }
                let s = normals[i].dot(&x) - rhs[i];
                if s < -viol_tol(i, &x, &rhs) {
                    let sn = s / norms[i];
                    if sn < worst {
                        worst = sn;
                        pick = Some(i);
                    }
                }
            }
        }
        let Some(pi) = pick else { break };
        let np = &normals[pi] * eq_sign[pi];
        let ep = rhs[pi] * eq_sign[pi];
        let is_eq = pi >= m_in;
        let mut u_plus = 0.0;

        // Step 2: move along the primal/dual direction until p is satisfied.
        loop {
            iters += 1;
            if iters > max_iter {
                return Err(ImopError::Solver("Goldfarb-Idnani iteration limit".into()));
            }
            let s_p = np.dot(&x) - ep;
            let v = &linv * &np;
            let q = active.len();
            let (resid, r) = if q == 0 {
                (v.clone(), DVector::zeros(0))
            } else {
                let mut nmat = DMatrix::zeros(n, q);
                for (c, &j) in active.iter().enumerate() {
                    nmat.set_column(c, &(&normals[j] * eq_sign[j]));
                }
                let b = &linv * nmat;
                let qr = b.qr();
                let q1 = qr.q();
                let rr = qr.r();
                let d1 = q1.transpose() * &v;
                let r = rr
                    .solve_upper_triangular(&d1)
                    .ok_or_else(|| ImopError::Solver("dependent active constraints".into()))?;
                (&v - &q1 * d1, r)
            };
            let z = &linv_t * &resid;
            let curv = resid.norm_squared();
            let z_zero = resid.norm() <= 1e-11 * v.norm().max(1e-300);

            // Partial step: largest dual step keeping active multipliers ≥ 0.
            let mut t1 = f64::INFINITY;
            let mut drop: Option<usize> = None;
            for (c, &j) in active.iter().enumerate() {
                if j < m_in && r[c] > 1e-14 {
                    let ratio = u[c] / r[c];
                    if ratio < t1 {
                        t1 = ratio;
                        drop = Some(c);
                    }
                }
            }
            let t2 = if z_zero { f64::INFINITY } else { -s_p / curv };
            let t2 = if is_eq { t2 } else { t2.max(0.0) };

            if !t1.is_finite() && !t2.is_finite() {
                if is_eq && s_p.abs() <= viol_tol(pi, &x, &rhs) {
                    // Redundant equality already satisfied.
                    break;
                }
                return Err(ImopError::Infeasible);
            }

            if !t2.is_finite() || (t1 < t2) {
                // Partial step then drop the blocking constraint.
                let t = t1;
                if !z_zero {
                    x += &z * t;
                }
                for c in 0..active.len() {
                    u[c] -= t * r[c];
                }
                u_plus += t;
                let c = drop.expect("finite t1 has a blocking index");
                active.remove(c);
                u.remove(c);
                continue;
            }

            // Full step: p becomes active.
            let t = t2;
            x += &z * t;
            for c in 0..active.len() {
                u[c] -= t * r[c];
            }
            u_plus += t;
            active.push(pi);
            u.push(u_plus);
            break;
        }
    }

    let mut ineq_mult = DVector::zeros(m_in);
    let mut eq_mult = DVector::zeros(m_eq);
    for (c, &j) in active.iter().enumerate() {
        if j < m_in {
            ineq_mult[j] = u[c].max(0.0);
        } else {
            eq_mult[j - m_in] = -u[c] * eq_sign[j];
        }
    }
    Ok(QpSolution { x, ineq_mult, eq_mult, iterations: iters })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kkt_stat(p: &QpProblem, s: &QpSolution) -> f64 {
        let r = &p.h * &s.x + &p.g + p.a_ineq.transpose() * &s.ineq_mult + p.a_eq.transpose() * &s.eq_mult;
        r.amax()
    }

    #[test]
    fn unconstrained_minimiser() {
        let p = QpProblem::new(DMatrix::from_diagonal_element(2, 2, 2.0), DVector::from_vec(vec![-2.0, 4.0]));
        let s = solve_qp(&p).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-12 && (s.x[1] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn single_active_inequality() {
        // min (x-2)² + (y-2)² s.t. x + y ≤ 2
        let p = QpProblem::new(DMatrix::from_diagonal_element(2, 2, 2.0), DVector::from_vec(vec![-4.0, -4.0]))
            .with_ineq(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), DVector::from_vec(vec![2.0]));
        let s = solve_qp(&p).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-10 && (s.x[1] - 1.0).abs() < 1e-10);
        assert!((s.ineq_mult[0] - 2.0).abs() < 1e-10);
        assert!(kkt_stat(&p, &s) < 1e-10);
    }

    #[test]
    fn equality_and_bounds() {
        // min x² + y² + z² s.t. x + y + z = 1, x ≥ 0.5
        let a = DMatrix::from_row_slice(1, 3, &[-1.0, 0.0, 0.0]);
        let p = QpProblem::new(DMatrix::from_diagonal_element(3, 3, 2.0), DVector::zeros(3))
            .with_ineq(a, DVector::from_vec(vec![-0.5]))
            .with_eq(DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]), DVector::from_vec(vec![1.0]));
        let s = solve_qp(&p).unwrap();
        assert!((s.x[0] - 0.5).abs() < 1e-10);
        assert!((s.x[1] - 0.25).abs() < 1e-10 && (s.x[2] - 0.25).abs() < 1e-10);
        assert!(kkt_stat(&p, &s) < 1e-10);
    }

    #[test]
    fn detects_infeasibility() {
        let a = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let p = QpProblem::new(DMatrix::identity(1, 1), DVector::zeros(1))
            .with_ineq(a, DVector::from_vec(vec![0.0, -1.0]));
        assert!(matches!(solve_qp(&p), Err(ImopError::Infeasible)));
    }

    #[test]
    fn singular_hessian_uses_proximal_route() {
        // min x² - y s.t. 0 ≤ y ≤ 1
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.0]);
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, -1.0]);
        let p = QpProblem::new(h, DVector::from_vec(vec![0.0, -1.0]))
            .with_ineq(a, DVector::from_vec(vec![1.0, 0.0]));
        let s = solve_qp(&p).unwrap();
        assert!(s.x[0].abs() < 1e-8 && (s.x[1] - 1.0).abs() < 1e-8);
    }
}
