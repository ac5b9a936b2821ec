//! Parameterised multiobjective decision problems.
//!
//! A [`DmpInstance`] holds the objective and constraint data together with a
//! table of parameter slots. Each slot points at one coefficient or
//! right-hand side; `apply` writes `scale * theta[j]` into slot `j` and
//! returns a [`ConcreteDmp`] ready for the forward solvers.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{ImopError, Result};
use crate::linalg::dot;

pub type Matrix = Vec<Vec<f64>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Linear,
    Quadratic,
    Traffic,
}

/// Separable term `coef * x[var]^power`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyTerm {
    pub var: usize,
    pub power: u32,
    pub coef: f64,
}

/// f(x) = ½xᵀQx + cᵀx + Σ poly terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub linear: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadratic: Option<Matrix>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub poly: Vec<PolyTerm>,
}

impl Objective {
    pub fn linear(c: Vec<f64>) -> Self {
        Objective { linear: c, quadratic: None, poly: Vec::new() }
    }

    pub fn quadratic(q: Matrix, c: Vec<f64>) -> Self {
        Objective { linear: c, quadratic: Some(q), poly: Vec::new() }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let mut v = dot(&self.linear, x);
        if let Some(q) = &self.quadratic {
            for (i, row) in q.iter().enumerate() {
                v += 0.5 * x[i] * dot(row, x);
            }
        }
        for t in &self.poly {
            v += t.coef * x[t.var].powi(t.power as i32);
        }
        v
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.linear.clone();
        if let Some(q) = &self.quadratic {
            for (i, row) in q.iter().enumerate() {
                g[i] += dot(row, x);
            }
        }
        for t in &self.poly {
            if t.power >= 1 {
                g[t.var] += t.coef * t.power as f64 * x[t.var].powi(t.power as i32 - 1);
            }
        }
        g
    }

    /// Adds `w * Hessian` into `h`.
    pub fn add_hessian(&self, x: &[f64], w: f64, h: &mut DMatrix<f64>) {
        if let Some(q) = &self.quadratic {
            for (i, row) in q.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    h[(i, j)] += w * v;
                }
            }
        }
        for t in &self.poly {
            if t.power >= 2 {
                let p = t.power as f64;
                h[(t.var, t.var)] += w * t.coef * p * (p - 1.0) * x[t.var].powi(t.power as i32 - 2);
            }
        }
    }
}

/// A x ≤ b, E x = d, lower ≤ x ≤ upper (`None` = unbounded).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraints {
    #[serde(default)]
    pub a_ineq: Matrix,
    #[serde(default)]
    pub b_ineq: Vec<f64>,
    #[serde(default)]
    pub a_eq: Matrix,
    #[serde(default)]
    pub b_eq: Vec<f64>,
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
}

/// One row of the canonical inequality system g(x) = a·x - b ≤ 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IneqSource {
    Row(usize),
    Lower(usize),
    Upper(usize),
}

impl Constraints {
    pub fn free(n: usize) -> Self {
        Constraints {
            a_ineq: Vec::new(),
            b_ineq: Vec::new(),
            a_eq: Vec::new(),
            b_eq: Vec::new(),
            lower: vec![None; n],
            upper: vec![None; n],
        }
    }

    pub fn nonneg(n: usize) -> Self {
        Constraints { lower: vec![Some(0.0); n], ..Constraints::free(n) }
    }

    pub fn lower_f64(&self) -> Vec<f64> {
        self.lower.iter().map(|v| v.unwrap_or(f64::NEG_INFINITY)).collect()
    }

    pub fn upper_f64(&self) -> Vec<f64> {
        self.upper.iter().map(|v| v.unwrap_or(f64::INFINITY)).collect()
    }

    /// Rows, bounds first after the general rows, in ≤ form.
    pub fn canonical_ineq(&self) -> (Matrix, Vec<f64>, Vec<IneqSource>) {
        let n = self.lower.len();
        let mut a = self.a_ineq.clone();
        let mut b = self.b_ineq.clone();
        let mut src: Vec<IneqSource> = (0..a.len()).map(IneqSource::Row).collect();
        for j in 0..n {
            if let Some(lo) = self.lower[j] {
                let mut row = vec![0.0; n];
                row[j] = -1.0;
                a.push(row);
                b.push(-lo);
                src.push(IneqSource::Lower(j));
            }
        }
        for j in 0..n {
            if let Some(hi) = self.upper[j] {
                let mut row = vec![0.0; n];
                row[j] = 1.0;
                a.push(row);
                b.push(hi);
                src.push(IneqSource::Upper(j));
            }
        }
        (a, b, src)
    }

    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut v: f64 = 0.0;
        for (row, b) in self.a_ineq.iter().zip(&self.b_ineq) {
            v = v.max(dot(row, x) - b);
        }
        for (row, d) in self.a_eq.iter().zip(&self.b_eq) {
            v = v.max((dot(row, x) - d).abs());
        }
        for (j, xj) in x.iter().enumerate() {
            if let Some(lo) = self.lower[j] {
                v = v.max(lo - xj);
            }
            if let Some(hi) = self.upper[j] {
                v = v.max(xj - hi);
            }
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SlotTarget {
    Linear { objective: usize, index: usize },
    QuadDiag { objective: usize, index: usize },
    IneqRhs { row: usize },
    EqRhs { row: usize },
}

impl SlotTarget {
    pub fn is_rhs(&self) -> bool {
        matches!(self, SlotTarget::IneqRhs { .. } | SlotTarget::EqRhs { .. })
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slot {
    pub name: String,
    pub target: SlotTarget,
    #[serde(default = "one")]
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub coefficients: Vec<f64>,
    pub rhs: f64,
}

/// Box over the free parameters plus linear equality normalisations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpace {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(default)]
    pub normalizations: Vec<Normalization>,
}

pub type ParamVector = Vec<f64>;

impl ParamSpace {
    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        ParamSpace { lower, upper, normalizations: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).collect()
    }

    pub fn max_violation(&self, theta: &[f64]) -> f64 {
        let mut v: f64 = 0.0;
        for j in 0..self.dim() {
            v = v.max(self.lower[j] - theta[j]).max(theta[j] - self.upper[j]);
        }
        for nrm in &self.normalizations {
            v = v.max((dot(&nrm.coefficients, theta) - nrm.rhs).abs());
        }
        v
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim() && theta.iter().all(|v| v.is_finite()) && self.max_violation(theta) <= 1e-9
    }

    fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.upper.len() != d {
            return Err(ImopError::InvalidModel("parameter bound lengths differ".into()));
        }
        for j in 0..d {
            if !(self.lower[j].is_finite() && self.upper[j].is_finite() && self.lower[j] <= self.upper[j]) {
                return Err(ImopError::InvalidModel(format!("parameter box for slot {j} is empty or infinite")));
            }
        }
        for nrm in &self.normalizations {
            if nrm.coefficients.len() != d {
                return Err(ImopError::InvalidModel("normalisation row has wrong length".into()));
            }
        }
        Reducer::new(self).map(|_| ())
    }

    /// Euclidean projection onto the box intersected with the normalisations.
    pub fn project(&self, theta: &[f64]) -> Result<ParamVector> {
        use crate::solver::qp::{solve_qp, QpProblem};
        use nalgebra::DVector;
        let d = self.dim();
        if self.normalizations.is_empty() {
            return Ok((0..d).map(|j| theta[j].clamp(self.lower[j], self.upper[j])).collect());
        }
        let mut a = DMatrix::zeros(2 * d, d);
        let mut b = DVector::zeros(2 * d);
        for j in 0..d {
            a[(j, j)] = 1.0;
            b[j] = self.upper[j];
            a[(d + j, j)] = -1.0;
            b[d + j] = -self.lower[j];
        }
        let k = self.normalizations.len();
        let mut e = DMatrix::zeros(k, d);
        let mut f = DVector::zeros(k);
        for (i, nrm) in self.normalizations.iter().enumerate() {
            for j in 0..d {
                e[(i, j)] = nrm.coefficients[j];
            }
            f[i] = nrm.rhs;
        }
        let p = QpProblem::new(DMatrix::identity(d, d), -DVector::from_column_slice(theta))
            .with_ineq(a, b)
            .with_eq(e, f);
        let s = solve_qp(&p)?;
        Ok(s.x.iter().copied().collect())
    }

    pub fn center(&self) -> Result<ParamVector> {
        let mid: Vec<f64> = self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect();
        self.project(&mid)
    }
}

/// Eliminates one pivot coordinate per normalisation row so searches can
/// move in the remaining independent coordinates.
#[derive(Debug, Clone)]
pub struct Reducer {
    pub independent: Vec<usize>,
    pub pivots: Vec<usize>,
    /// theta[pivots] = offset + coupling * theta[independent]
    offset: Vec<f64>,
    coupling: Vec<Vec<f64>>,
}

impl Reducer {
    pub fn new(space: &ParamSpace) -> Result<Self> {
        let d = space.dim();
        let k = space.normalizations.len();
        let mut rows: Vec<Vec<f64>> = space
            .normalizations
            .iter()
            .map(|n| {
                let mut r = n.coefficients.clone();
                r.push(n.rhs);
                r
            })
            .collect();
        let mut pivots = Vec::with_capacity(k);
        for i in 0..k {
            let (mut best, mut col) = (0.0, None);
            for j in 0..d {
                if pivots.contains(&j) {
                    continue;
                }
                let v = rows[i][j].abs();
                if v > best + 1e-12 {
                    best = v;
                    col = Some(j);
                }
            }
            let Some(c) = col else {
                return Err(ImopError::InvalidModel("normalisation rows are linearly dependent".into()));
            };
            let pv = rows[i][c];
            for v in rows[i].iter_mut() {
                *v /= pv;
            }
            for r in 0..k {
                if r != i {
                    let f = rows[r][c];
                    if f != 0.0 {
                        for j in 0..=d {
                            rows[r][j] -= f * rows[i][j];
                        }
                    }
                }
            }
            pivots.push(c);
        }
        let independent: Vec<usize> = (0..d).filter(|j| !pivots.contains(j)).collect();
        let offset = (0..k).map(|i| rows[i][d]).collect();
        let coupling = (0..k).map(|i| independent.iter().map(|&j| -rows[i][j]).collect()).collect();
        Ok(Reducer { independent, pivots, offset, coupling })
    }

    pub fn reduced_dim(&self) -> usize {
        self.independent.len()
    }

    pub fn reduce(&self, theta: &[f64]) -> Vec<f64> {
        self.independent.iter().map(|&j| theta[j]).collect()
    }

    pub fn expand(&self, t: &[f64]) -> ParamVector {
        let d = self.independent.len() + self.pivots.len();
        let mut theta = vec![0.0; d];
        for (k, &j) in self.independent.iter().enumerate() {
            theta[j] = t[k];
        }
        for (i, &p) in self.pivots.iter().enumerate() {
            theta[p] = self.offset[i] + dot(&self.coupling[i], t);
        }
        theta
    }
}

/// A concrete problem with all parameters bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcreteDmp {
    pub family: Family,
    pub objectives: Vec<Objective>,
    pub constraints: Constraints,
}

impl ConcreteDmp {
    pub fn n(&self) -> usize {
        self.constraints.lower.len()
    }

    pub fn p(&self) -> usize {
        self.objectives.len()
    }

    pub fn objective_values(&self, x: &[f64]) -> Vec<f64> {
        self.objectives.iter().map(|o| o.value(x)).collect()
    }

    pub fn weighted_value(&self, w: &[f64], x: &[f64]) -> f64 {
        self.objectives.iter().zip(w).map(|(o, wl)| wl * o.value(x)).sum()
    }

    pub fn weighted_gradient(&self, w: &[f64], x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n()];
        for (o, wl) in self.objectives.iter().zip(w) {
            if *wl != 0.0 {
                for (gi, v) in g.iter_mut().zip(o.gradient(x)) {
                    *gi += wl * v;
                }
            }
        }
        g
    }

    pub fn weighted_hessian(&self, w: &[f64], x: &[f64]) -> DMatrix<f64> {
        let n = self.n();
        let mut h = DMatrix::zeros(n, n);
        for (o, wl) in self.objectives.iter().zip(w) {
            if *wl != 0.0 {
                o.add_hessian(x, *wl, &mut h);
            }
        }
        h
    }

    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        self.constraints.max_violation(x) <= tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmpInstance {
    pub name: String,
    pub family: Family,
    pub objectives: Vec<Objective>,
    pub constraints: Constraints,
    pub slots: Vec<Slot>,
    pub space: ParamSpace,
}

impl DmpInstance {
    pub fn new(
        name: impl Into<String>,
        family: Family,
        objectives: Vec<Objective>,
        constraints: Constraints,
        slots: Vec<Slot>,
        space: ParamSpace,
    ) -> Result<Self> {
        let inst = DmpInstance { name: name.into(), family, objectives, constraints, slots, space };
        inst.validate()?;
        Ok(inst)
    }

    pub fn n(&self) -> usize {
        self.constraints.lower.len()
    }

    pub fn p(&self) -> usize {
        self.objectives.len()
    }

    pub fn num_params(&self) -> usize {
        self.slots.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        let bad = |m: String| Err(ImopError::InvalidModel(m));
        if self.objectives.len() < 2 {
            return bad("at least two objectives are required".into());
        }
        let c = &self.constraints;
        if c.upper.len() != n || c.a_ineq.len() != c.b_ineq.len() || c.a_eq.len() != c.b_eq.len() {
            return bad("constraint dimensions disagree".into());
        }
        if c.a_ineq.iter().chain(&c.a_eq).any(|r| r.len() != n) {
            return bad("constraint row has wrong length".into());
        }
        for (l, o) in self.objectives.iter().enumerate() {
            if o.linear.len() != n {
                return bad(format!("objective {l} has wrong length"));
            }
            if let Some(q) = &o.quadratic {
                if q.len() != n || q.iter().any(|r| r.len() != n) {
                    return bad(format!("objective {l} quadratic term has wrong shape"));
                }
            }
            if o.poly.iter().any(|t| t.var >= n) {
                return bad(format!("objective {l} polynomial term out of range"));
            }
            match self.family {
                Family::Linear if o.quadratic.is_some() || !o.poly.is_empty() => {
                    return bad("linear family with nonlinear objective".into())
                }
                Family::Quadratic if !o.poly.is_empty() => {
                    return bad("quadratic family with polynomial terms".into())
                }
                Family::Traffic if o.poly.iter().any(|t| t.coef < 0.0 || t.power == 0) => {
                    return bad("traffic terms must be non-negative powers ≥ 1".into())
                }
                _ => {}
            }
        }
        if self.slots.len() != self.space.dim() {
            return bad("slot count differs from parameter space dimension".into());
        }
        for (k, s) in self.slots.iter().enumerate() {
            let ok = match s.target {
                SlotTarget::Linear { objective, index } => objective < self.p() && index < n,
                SlotTarget::QuadDiag { objective, index } => {
                    objective < self.p() && index < n && self.objectives[objective].quadratic.is_some()
                }
                SlotTarget::IneqRhs { row } => row < c.b_ineq.len(),
                SlotTarget::EqRhs { row } => row < c.b_eq.len(),
            };
            if !ok || !s.scale.is_finite() || s.scale == 0.0 {
                return bad(format!("slot {k} ({}) is out of range", s.name));
            }
            if self.slots[..k].iter().any(|o| o.target == s.target) {
                return bad(format!("slot {k} ({}) duplicates an earlier slot", s.name));
            }
        }
        self.space.validate()?;
        let center = self.space.center()?;
        let dmp = self.apply(&center)?;
        check_bounded(&dmp)?;
        Ok(())
    }

    /// Binds `theta` into the slots.
    pub fn apply(&self, theta: &[f64]) -> Result<ConcreteDmp> {
        if theta.len() != self.slots.len() {
            return Err(ImopError::InvalidParams(format!(
                "expected {} parameters, got {}",
                self.slots.len(),
                theta.len()
            )));
        }
        if !self.space.contains(theta) {
            return Err(ImopError::InvalidParams(format!(
                "parameter vector outside the parameter space (violation {:.3e})",
                self.space.max_violation(theta)
            )));
        }
        Ok(self.apply_unchecked(theta))
    }

    /// Binds `theta` without the parameter-space check. Used by searches that
    /// explore outside the box (e.g. a global ADMM iterate).
    pub fn apply_unchecked(&self, theta: &[f64]) -> ConcreteDmp {
        let mut objectives = self.objectives.clone();
        let mut constraints = self.constraints.clone();
        for (s, &v) in self.slots.iter().zip(theta) {
            let val = s.scale * v;
            match s.target {
                SlotTarget::Linear { objective, index } => objectives[objective].linear[index] = val,
                SlotTarget::QuadDiag { objective, index } => {
                    if let Some(q) = objectives[objective].quadratic.as_mut() {
                        q[index][index] = val;
                    }
                }
                SlotTarget::IneqRhs { row } => constraints.b_ineq[row] = val,
                SlotTarget::EqRhs { row } => constraints.b_eq[row] = val,
            }
        }
        ConcreteDmp { family: self.family, objectives, constraints }
    }

    /// Current values stored in the slots (useful for ground-truth fixtures).
    pub fn slot_values(&self) -> ParamVector {
        self.slots
            .iter()
            .map(|s| {
                let raw = match s.target {
                    SlotTarget::Linear { objective, index } => self.objectives[objective].linear[index],
                    SlotTarget::QuadDiag { objective, index } => {
                        self.objectives[objective].quadratic.as_ref().map_or(0.0, |q| q[index][index])
                    }
                    SlotTarget::IneqRhs { row } => self.constraints.b_ineq[row],
                    SlotTarget::EqRhs { row } => self.constraints.b_eq[row],
                };
                raw / s.scale
            })
            .collect()
    }

    pub fn has_rhs_slots(&self) -> bool {
        self.slots.iter().any(|s| s.target.is_rhs())
    }
}

/// Every objective must be convex and the feasible region bounded and
/// non-empty.
fn check_bounded(dmp: &ConcreteDmp) -> Result<()> {
    use crate::solver::lp::{solve_lp, LpProblem};
    use nalgebra::DVector;
    for (l, o) in dmp.objectives.iter().enumerate() {
        if let Some(q) = &o.quadratic {
            let n = q.len();
            let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (q[i][j] + q[j][i]));
            let eig = SymmetricEigen::new(m);
            let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
            if min < -1e-9 * (1.0 + eig.eigenvalues.amax()) {
                return Err(ImopError::InvalidModel(format!("objective {l} is not convex")));
            }
        }
    }
    let n = dmp.n();
    let c = &dmp.constraints;
    let mut lp = LpProblem::new(vec![0.0; n]);
    lp.a_ineq = DMatrix::from_fn(c.a_ineq.len(), n, |i, j| c.a_ineq[i][j]);
    lp.b_ineq = DVector::from_column_slice(&c.b_ineq);
    lp.a_eq = DMatrix::from_fn(c.a_eq.len(), n, |i, j| c.a_eq[i][j]);
    lp.b_eq = DVector::from_column_slice(&c.b_eq);
    lp.lower = c.lower_f64();
    lp.upper = c.upper_f64();
    for j in 0..n {
        for s in [1.0, -1.0] {
            let mut q = lp.clone();
            q.c[j] = s;
            match solve_lp(&q) {
                Ok(_) => {}
                Err(ImopError::Unbounded) => {
                    return Err(ImopError::InvalidModel("feasible region is unbounded".into()))
                }
                Err(ImopError::Infeasible) => {
                    return Err(ImopError::InvalidModel("feasible region is empty".into()))
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(())
}

/// Convenience: dense matrix from rows.
pub fn to_dmatrix(rows: &Matrix, ncols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example1_like() -> DmpInstance {
        let objectives = vec![
            Objective::quadratic(vec![vec![2.0, 0.0], vec![0.0, 4.0]], vec![6.0, 2.0]),
            Objective::quadratic(vec![vec![4.0, 0.0], vec![0.0, 2.0]], vec![-12.0, -10.0]),
        ];
        let mut c = Constraints::nonneg(2);
        c.a_ineq = vec![vec![0.0, 1.0], vec![3.0, -1.0]];
        c.b_ineq = vec![3.0, 6.0];
        let slots = vec![
            Slot { name: "b1".into(), target: SlotTarget::IneqRhs { row: 0 }, scale: -1.0 },
            Slot { name: "b2".into(), target: SlotTarget::IneqRhs { row: 1 }, scale: -1.0 },
        ];
        DmpInstance::new("ex", Family::Quadratic, objectives, c, slots, ParamSpace::boxed(vec![-8.0; 2], vec![-1.0; 2]))
            .unwrap()
    }

    #[test]
    fn apply_writes_scaled_values() {
        let inst = example1_like();
        let d = inst.apply(&[-3.0, -6.0]).unwrap();
        assert_eq!(d.constraints.b_ineq, vec![3.0, 6.0]);
        assert_eq!(inst.slot_values(), vec![-3.0, -6.0]);
    }

    #[test]
    fn apply_rejects_outside_box() {
        let inst = example1_like();
        assert!(matches!(inst.apply(&[0.0, -6.0]), Err(ImopError::InvalidParams(_))));
        assert!(matches!(inst.apply(&[-3.0]), Err(ImopError::InvalidParams(_))));
    }

    #[test]
    fn rejects_unbounded_region() {
        let objectives = vec![Objective::linear(vec![1.0, 0.0]), Objective::linear(vec![0.0, 1.0])];
        let r = DmpInstance::new(
            "u",
            Family::Linear,
            objectives,
            Constraints::nonneg(2),
            Vec::new(),
            ParamSpace::boxed(vec![], vec![]),
        );
        assert!(matches!(r, Err(ImopError::InvalidModel(_))));
    }

    #[test]
    fn rejects_nonconvex_objective() {
        let objectives = vec![
            Objective::quadratic(vec![vec![-1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0]),
            Objective::linear(vec![0.0, 1.0]),
        ];
        let mut c = Constraints::nonneg(2);
        c.upper = vec![Some(1.0); 2];
        let r = DmpInstance::new("nc", Family::Quadratic, objectives, c, Vec::new(), ParamSpace::boxed(vec![], vec![]));
        assert!(matches!(r, Err(ImopError::InvalidModel(_))));
    }

    #[test]
    fn reducer_roundtrip() {
        let space = ParamSpace {
            lower: vec![-1.0; 3],
            upper: vec![0.0; 3],
            normalizations: vec![Normalization { coefficients: vec![1.0; 3], rhs: -1.0 }],
        };
        let r = Reducer::new(&space).unwrap();
        assert_eq!(r.reduced_dim(), 2);
        let theta = vec![-0.2, -0.3, -0.5];
        let back = r.expand(&r.reduce(&theta));
        for (a, b) in theta.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
        let c = space.center().unwrap();
        assert!(space.contains(&c));
    }
}
