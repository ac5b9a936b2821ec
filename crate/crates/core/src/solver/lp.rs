//! Dense two-phase tableau simplex with Bland's rule.
//!
//! Problem form: min cᵀx s.t. A x ≤ b, E x = d, lo ≤ x ≤ hi (bounds may be
//! infinite). Small dense instances only.

use nalgebra::{DMatrix, DVector};

use crate::error::{ImopError, Result};

#[derive(Debug, Clone)]
pub struct LpProblem {
    pub c: Vec<f64>,
    pub a_ineq: DMatrix<f64>,
    pub b_ineq: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// False when some non-basic reduced cost is zero, i.e. the optimum may
    /// not be unique.
    pub unique: bool,
}

const PIVOT_TOL: f64 = 1e-10;

impl LpProblem {
    pub fn new(c: Vec<f64>) -> Self {
        let n = c.len();
        LpProblem {
            c,
            a_ineq: DMatrix::zeros(0, n),
            b_ineq: DVector::zeros(0),
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    fn push_ineq(&mut self, row: &[f64], rhs: f64) {
        let n = self.dim();
        let m = self.a_ineq.nrows();
        let mut a = DMatrix::zeros(m + 1, n);
        a.rows_mut(0, m).copy_from(&self.a_ineq);
        for j in 0..n {
            a[(m, j)] = row[j];
        }
        let mut b = DVector::zeros(m + 1);
        b.rows_mut(0, m).copy_from(&self.b_ineq);
        b[m] = rhs;
        self.a_ineq = a;
        self.b_ineq = b;
    }
}

/// x_j = offset + Σ coef·y_col
struct VarMap {
    offset: f64,
    cols: Vec<(usize, f64)>,
}

struct Tableau {
    t: Vec<Vec<f64>>, // m constraint rows then the cost row; last column is rhs
    basis: Vec<usize>,
    ncols: usize,
    n_art_start: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.ncols + 1;
        let pv = self.t[r][c];
        for j in 0..w {
            self.t[r][j] /= pv;
        }
        let prow = self.t[r].clone();
        for i in 0..self.t.len() {
            if i != r {
                let f = self.t[i][c];
                if f != 0.0 {
                    for j in 0..w {
                        self.t[i][j] -= f * prow[j];
                    }
                }
            }
        }
        self.basis[r] = c;
    }

    /// Runs Bland's rule on columns below `limit`. Returns false if unbounded.
    fn optimise(&mut self, limit: usize) -> Result<bool> {
        let m = self.basis.len();
        let obj = m;
        let scale = 1.0 + self.t[obj][..limit].iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for _ in 0..50_000 {
            let enter = (0..limit).find(|&j| self.t[obj][j] < -1e-10 * scale);
            let Some(c) = enter else { return Ok(true) };
            let mut best: Option<(f64, usize, usize)> = None;
            for i in 0..m {
                let a = self.t[i][c];
                if a > PIVOT_TOL {
                    let ratio = self.t[i][self.ncols] / a;
                    let cand = (ratio, self.basis[i], i);
                    best = match best {
                        None => Some(cand),
                        Some(b) => {
                            if ratio < b.0 - 1e-12 || (ratio <= b.0 + 1e-12 && cand.1 < b.1) {
                                Some(cand)
                            } else {
                                Some(b)
                            }
                        }
                    };
                }
            }
            let Some((_, _, r)) = best else { return Ok(false) };
            self.pivot(r, c);
        }
        Err(ImopError::Solver("simplex iteration limit".into()))
    }
}

pub fn solve_lp(p: &LpProblem) -> Result<LpSolution> {
    let n = p.dim();
    if p.a_ineq.ncols() != n || p.a_eq.ncols() != n || p.lower.len() != n || p.upper.len() != n {
        return Err(ImopError::InvalidArgument("LP dimensions disagree".into()));
    }
    // Variable substitution to y ≥ 0.
    let mut maps = Vec::with_capacity(n);
    let mut ny = 0;
    let mut extra_rows: Vec<(usize, f64)> = Vec::new(); // y_col ≤ width
    for j in 0..n {
        let (lo, hi) = (p.lower[j], p.upper[j]);
        if lo > hi {
            return Err(ImopError::Infeasible);
        }
        if lo.is_finite() {
            if hi.is_finite() {
                extra_rows.push((ny, hi - lo));
            }
            maps.push(VarMap { offset: lo, cols: vec![(ny, 1.0)] });
            ny += 1;
        } else if hi.is_finite() {
            maps.push(VarMap { offset: hi, cols: vec![(ny, -1.0)] });
            ny += 1;
        } else {
            maps.push(VarMap { offset: 0.0, cols: vec![(ny, 1.0), (ny + 1, -1.0)] });
            ny += 2;
        }
    }

    // Rows over y: (coefficients, rhs, is_equality)
    let mut rows: Vec<(Vec<f64>, f64, bool)> = Vec::new();
    let push_row = |a: &dyn Fn(usize) -> f64, b: f64, eq: bool, rows: &mut Vec<(Vec<f64>, f64, bool)>| {
        let mut coef = vec![0.0; ny];
        let mut rhs = b;
        for (j, map) in maps.iter().enumerate() {
            let aj = a(j);
            if aj != 0.0 {
                rhs -= aj * map.offset;
                for &(c, s) in &map.cols {
                    coef[c] += aj * s;
                }
            }
        }
        rows.push((coef, rhs, eq));
    };
    for i in 0..p.a_ineq.nrows() {
        push_row(&|j| p.a_ineq[(i, j)], p.b_ineq[i], false, &mut rows);
    }
    for i in 0..p.a_eq.nrows() {
        push_row(&|j| p.a_eq[(i, j)], p.b_eq[i], true, &mut rows);
    }
    for &(c, w) in &extra_rows {
        let mut coef = vec![0.0; ny];
        coef[c] = 1.0;
        rows.push((coef, w, false));
    }

    let m = rows.len();
    let n_slack = rows.iter().filter(|r| !r.2).count();
    // Artificials for rows whose slack cannot start basic.
    let mut needs_art = vec![false; m];
    for (i, r) in rows.iter().enumerate() {
        needs_art[i] = r.2 || r.1 < 0.0;
    }
    let n_art = needs_art.iter().filter(|&&v| v).count();
    let ncols = ny + n_slack + n_art;
    let n_art_start = ny + n_slack;
    let mut t = vec![vec![0.0; ncols + 1]; m + 1];
    let mut basis = vec![0; m];
    let mut s_idx = ny;
    let mut a_idx = n_art_start;
    for (i, (coef, rhs, eq)) in rows.iter().enumerate() {
        let sign = if *rhs < 0.0 { -1.0 } else { 1.0 };
        for j in 0..ny {
            t[i][j] = sign * coef[j];
        }
        t[i][ncols] = sign * rhs;
        if !eq {
            t[i][s_idx] = sign;
            if !needs_art[i] {
                basis[i] = s_idx;
            }
            s_idx += 1;
        }
        if needs_art[i] {
            t[i][a_idx] = 1.0;
            basis[i] = a_idx;
            a_idx += 1;
        }
    }
    let mut tab = Tableau { t, basis, ncols, n_art_start };

    // Phase 1.
    if n_art > 0 {
        for j in n_art_start..ncols {
            tab.t[m][j] = 1.0;
        }
        for i in 0..m {
            if tab.basis[i] >= n_art_start {
                for j in 0..=ncols {
                    let v = tab.t[i][j];
                    tab.t[m][j] -= v;
                }
            }
        }
        tab.optimise(ncols)?;
        let infeas = -tab.t[m][ncols];
        let bscale = 1.0 + rows.iter().map(|r| r.1.abs()).fold(0.0, f64::max);
        if infeas > 1e-8 * bscale {
            return Err(ImopError::Infeasible);
        }
        // Drive zero-level artificials out of the basis.
        for i in 0..m {
            if tab.basis[i] >= n_art_start {
                if let Some(c) = (0..n_art_start).find(|&j| tab.t[i][j].abs() > 1e-9) {
                    tab.pivot(i, c);
                }
            }
        }
    }

    // Phase 2 cost row over y.
    let mut cy = vec![0.0; ncols];
    for (j, map) in maps.iter().enumerate() {
        for &(c, s) in &map.cols {
            cy[c] += p.c[j] * s;
        }
    }
    for j in 0..=ncols {
        tab.t[m][j] = if j < ncols { cy[j] } else { 0.0 };
    }
    for i in 0..m {
        let b = tab.basis[i];
        let cb = if b < ncols { cy[b] } else { 0.0 };
        if cb != 0.0 {
            for j in 0..=ncols {
                let v = tab.t[i][j];
                tab.t[m][j] -= cb * v;
            }
        }
    }
    if !tab.optimise(tab.n_art_start)? {
        return Err(ImopError::Unbounded);
    }

    let mut y = vec![0.0; ncols];
    for i in 0..m {
        y[tab.basis[i]] = tab.t[i][ncols];
    }
    let x: Vec<f64> = maps
        .iter()
        .map(|map| map.offset + map.cols.iter().map(|&(c, s)| s * y[c]).sum::<f64>())
        .collect();
    let objective = x.iter().zip(&p.c).map(|(a, b)| a * b).sum::<f64>();
    let scale = 1.0 + cy.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let in_basis: Vec<bool> = {
        let mut v = vec![false; ncols];
        for &b in &tab.basis {
            v[b] = true;
        }
        v
    };
    // The negative half of a split free variable always has a zero reduced
    // cost when its twin is basic; that is not a tie.
    let mut twin = vec![None; ncols];
    for map in &maps {
        if let [(a, _), (b, _)] = map.cols[..] {
            twin[a] = Some(b);
            twin[b] = Some(a);
        }
    }
    let unique = (0..tab.n_art_start)
        .all(|j| in_basis[j] || tab.t[m][j] > 1e-9 * scale || twin[j].is_some_and(|t| in_basis[t]));
    Ok(LpSolution { x, objective, unique })
}

/// Optimal solution that is lexicographically smallest among all optima.
pub fn solve_lp_lexmin(p: &LpProblem) -> Result<LpSolution> {
    let first = solve_lp(p)?;
    if first.unique {
        return Ok(first);
    }
    let n = p.dim();
    let mut q = p.clone();
    let z = first.objective;
    q.push_ineq(&p.c, z + 1e-9 * (1.0 + z.abs()));
    let mut last = first.clone();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let mut sub = q.clone();
        sub.c = e.clone();
        let sol = solve_lp(&sub)?;
        let v = sol.x[j];
        q.push_ineq(&e, v + 1e-9 * (1.0 + v.abs()));
        last = sol;
    }
    let objective = last.x.iter().zip(&p.c).map(|(a, b)| a * b).sum();
    Ok(LpSolution { x: last.x, objective, unique: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle(c: Vec<f64>) -> LpProblem {
        // 6x1 + x2 ≥ 0, x1 + 6x2 ≥ 0, x1 + x2 ≤ 1
        let mut p = LpProblem::new(c);
        p.a_ineq = DMatrix::from_row_slice(3, 2, &[-6.0, -1.0, -1.0, -6.0, 1.0, 1.0]);
        p.b_ineq = DVector::from_vec(vec![0.0, 0.0, 1.0]);
        p
    }

    #[test]
    fn vertex_of_free_variable_triangle() {
        let s = solve_lp(&triangle(vec![1.0, 0.0])).unwrap();
        assert!((s.x[0] + 0.2).abs() < 1e-10 && (s.x[1] - 1.2).abs() < 1e-10);
        assert!(s.unique);
    }

    #[test]
    fn lexmin_breaks_ties_on_an_edge() {
        // Objective parallel to edge OA: 6x1 + x2; optimal face is segment O-A.
        let s = solve_lp_lexmin(&triangle(vec![6.0, 1.0])).unwrap();
        assert!((s.x[0] + 0.2).abs() < 1e-8 && (s.x[1] - 1.2).abs() < 1e-8);
        assert!(s.objective.abs() < 1e-8);
    }

    #[test]
    fn equality_and_bounds() {
        // min -x - 2y s.t. x + y = 1, 0 ≤ x ≤ 1, 0 ≤ y ≤ 0.4
        let mut p = LpProblem::new(vec![-1.0, -2.0]);
        p.a_eq = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        p.b_eq = DVector::from_vec(vec![1.0]);
        p.lower = vec![0.0, 0.0];
        p.upper = vec![1.0, 0.4];
        let s = solve_lp(&p).unwrap();
        assert!((s.x[0] - 0.6).abs() < 1e-10 && (s.x[1] - 0.4).abs() < 1e-10);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut p = LpProblem::new(vec![1.0]);
        p.lower = vec![1.0];
        p.upper = vec![0.5];
        assert!(matches!(solve_lp(&p), Err(ImopError::Infeasible)));
        let p = LpProblem::new(vec![1.0]);
        assert!(matches!(solve_lp(&p), Err(ImopError::Unbounded)));
        let mut p = LpProblem::new(vec![0.0, 0.0]);
        p.a_eq = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        p.b_eq = DVector::from_vec(vec![1.0, 2.0]);
        assert!(matches!(solve_lp(&p), Err(ImopError::Infeasible)));
    }
}
