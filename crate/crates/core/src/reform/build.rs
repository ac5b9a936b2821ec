use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{BigMEntry, MipModel, QuadTerm, Sense, VarKind};
use crate::error::{ImopError, Result};
use crate::linalg::{dot, norm};
use crate::loss::{feasible_radius, nearest};
use crate::model::{DmpInstance, Family, IneqSource, SlotTarget};
use crate::solver::{front_points, recover_multipliers, solve_wp, WeightVector};

const INF: f64 = f64::INFINITY;

/// Optional overrides for the big-M constants. Unset values are derived from
/// the feasible-set radius and the coefficient magnitudes over the box.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct BigMConfig {
    /// Multiplier bound.
    pub m1: Option<f64>,
    /// Primal slack and reduced-cost bound.
    pub m2: Option<f64>,
    /// Assignment linking bound M_ik.
    pub m_assign: Option<f64>,
    /// Stationarity relaxation in the test problem.
    pub m_stat: Option<f64>,
    /// Slack on complementarity and stationarity rows of the test problem.
    pub stationarity_tol: f64,
}

struct BigM {
    dual: f64,
    slack: f64,
    assign: f64,
    stat: f64,
}

impl BigM {
    fn registry(&self, include_stat: bool) -> Vec<BigMEntry> {
        let mut out = vec![
            BigMEntry { name: "M1".into(), value: self.dual, provenance: "multiplier bound".into() },
            BigMEntry { name: "M2".into(), value: self.slack, provenance: "slack and reduced-cost bound".into() },
            BigMEntry { name: "M_ik".into(), value: self.assign, provenance: "twice the feasible-set radius".into() },
        ];
        if include_stat {
            out.push(BigMEntry { name: "M_stat".into(), value: self.stat, provenance: "gradient plus multiplier term bound".into() });
        }
        out
    }
}

/// Canonical inequality rows G x ≤ h(θ) with h affine in one slot at most.
struct Rows {
    g: Vec<Vec<f64>>,
    h_const: Vec<f64>,
    h_slot: Vec<Option<(usize, f64)>>,
    e: Vec<Vec<f64>>,
    d_const: Vec<f64>,
    d_slot: Vec<Option<(usize, f64)>>,
}

fn rows_of(inst: &DmpInstance) -> Rows {
    let (g, h, src) = inst.constraints.canonical_ineq();
    let slot_for = |target: SlotTarget| {
        inst.slots.iter().enumerate().find(|(_, s)| s.target == target).map(|(j, s)| (j, s.scale))
    };
    let h_slot: Vec<_> = src
        .iter()
        .map(|s| match s {
            IneqSource::Row(i) => slot_for(SlotTarget::IneqRhs { row: *i }),
            _ => None,
        })
        .collect();
    let h_const = h.iter().zip(&h_slot).map(|(v, s)| if s.is_some() { 0.0 } else { *v }).collect();
    let d_slot: Vec<_> = (0..inst.constraints.b_eq.len()).map(|r| slot_for(SlotTarget::EqRhs { row: r })).collect();
    let d_const =
        inst.constraints.b_eq.iter().zip(&d_slot).map(|(v, s)| if s.is_some() { 0.0 } else { *v }).collect();
    Rows { g, h_const, h_slot, e: inst.constraints.a_eq.clone(), d_const, d_slot }
}

/// The slot value with the larger magnitude at each box end.
fn abs_max_theta(inst: &DmpInstance) -> Vec<f64> {
    inst.space
        .lower
        .iter()
        .zip(&inst.space.upper)
        .map(|(&lo, &hi)| if lo.abs() > hi.abs() { lo } else { hi })
        .collect()
}

fn big_m(inst: &DmpInstance, rows: &Rows, cfg: &BigMConfig) -> Result<BigM> {
    let b = feasible_radius(inst)?;
    let dmp = inst.apply_unchecked(&abs_max_theta(inst));
    let n = inst.n();
    let gmax = dmp
        .objectives
        .iter()
        .map(|o| {
            let qf = o.quadratic.as_ref().map_or(0.0, |q| q.iter().flatten().map(|v| v * v).sum::<f64>().sqrt());
            qf * b + norm(&o.linear)
        })
        .fold(0.0, f64::max);
    let m = rows.g.len().max(1) as f64;
    let min_row = rows.g.iter().map(|r| norm(r)).filter(|v| *v > 0.0).fold(INF, f64::min);
    let min_row = if min_row.is_finite() { min_row } else { 1.0 };
    let u = gmax * m.sqrt() / min_row;
    let (_, h_abs, _) = dmp.constraints.canonical_ineq();
    let slack = rows.g.iter().zip(&h_abs).map(|(r, h)| h.abs() + norm(r) * b).fold(0.0, f64::max);
    let colsum = (0..n).map(|j| rows.g.iter().map(|r| r[j].abs()).sum::<f64>()).fold(0.0, f64::max);
    let reduced = gmax + colsum * u;
    Ok(BigM {
        dual: cfg.m1.unwrap_or(2.0 * u),
        slack: cfg.m2.unwrap_or(2.0 * slack.max(reduced).max(b)),
        assign: cfg.m_assign.unwrap_or(2.0 * b),
        stat: cfg.m_stat.unwrap_or(2.0 * reduced),
    })
}

fn check_inputs(inst: &DmpInstance, observations: &[Vec<f64>], weights: &[WeightVector]) -> Result<()> {
    if weights.is_empty() {
        return Err(ImopError::InvalidArgument("at least one weight vector is required".into()));
    }
    for w in weights {
        crate::solver::validate_weight(w, inst.p())?;
    }
    if let Some(y) = observations.iter().find(|y| y.len() != inst.n()) {
        return Err(ImopError::InvalidArgument(format!(
            "observation has {} entries, expected {}",
            y.len(),
            inst.n()
        )));
    }
    Ok(())
}

fn add_theta(model: &mut MipModel, inst: &DmpInstance) -> Vec<usize> {
    let theta: Vec<usize> = (0..inst.num_params())
        .map(|j| model.add_var(format!("theta_{j}"), VarKind::Continuous, inst.space.lower[j], inst.space.upper[j]))
        .collect();
    for (r, nz) in inst.space.normalizations.iter().enumerate() {
        let terms = theta.iter().zip(&nz.coefficients).map(|(&v, &c)| (v, c)).collect();
        model.add_row(format!("norm_{r}"), terms, Sense::Eq, nz.rhs);
    }
    theta
}

/// z, η and the squared-distance objective (1/N) Σ_i ‖y_i − Σ_k η_ik‖².
fn add_assignment(model: &mut MipModel, observations: &[Vec<f64>], x: &[Vec<usize>], m: f64) {
    let k_count = x.len();
    let n = x.first().map_or(0, |v| v.len());
    let scale = 1.0 / observations.len().max(1) as f64;
    for (i, y) in observations.iter().enumerate() {
        let z: Vec<usize> =
            (0..k_count).map(|k| model.add_var(format!("z_{i}_{k}"), VarKind::Binary, 0.0, 1.0)).collect();
        model.add_row(format!("assign_{i}"), z.iter().map(|&v| (v, 1.0)).collect(), Sense::Eq, 1.0);
        let mut eta = vec![vec![0; n]; k_count];
        for k in 0..k_count {
            for j in 0..n {
                let e = model.add_var(format!("eta_{i}_{k}_{j}"), VarKind::Continuous, -INF, INF);
                eta[k][j] = e;
                let (zk, xk) = (z[k], x[k][j]);
                model.add_row(format!("eta_up_{i}_{k}_{j}"), vec![(e, 1.0), (zk, -m)], Sense::Le, 0.0);
                model.add_row(format!("eta_lo_{i}_{k}_{j}"), vec![(e, -1.0), (zk, -m)], Sense::Le, 0.0);
                model.add_row(format!("eta_xup_{i}_{k}_{j}"), vec![(e, 1.0), (xk, -1.0), (zk, m)], Sense::Le, m);
                model.add_row(format!("eta_xlo_{i}_{k}_{j}"), vec![(e, -1.0), (xk, 1.0), (zk, m)], Sense::Le, m);
            }
        }
        let obj = &mut model.objective;
        obj.constant += scale * dot(y, y);
        for j in 0..n {
            for k in 0..k_count {
                obj.linear.push((eta[k][j], -2.0 * scale * y[j]));
                obj.quadratic.push(QuadTerm { i: eta[k][j], j: eta[k][j], coef: scale });
                for k2 in k + 1..k_count {
                    obj.quadratic.push(QuadTerm { i: eta[k][j], j: eta[k2][j], coef: 2.0 * scale });
                }
            }
        }
    }
}

/// ∂f_l/∂x_j at x as a constant plus slot coefficients, affine in θ when all
/// slots are objective coefficients.
fn gradient_terms(inst: &DmpInstance, base: &[Vec<f64>], l: usize, j: usize, x: &[f64]) -> (f64, Vec<(usize, f64)>) {
    let mut terms = Vec::new();
    for (s, slot) in inst.slots.iter().enumerate() {
        match slot.target {
            SlotTarget::Linear { objective, index } if objective == l && index == j => terms.push((s, slot.scale)),
            SlotTarget::QuadDiag { objective, index } if objective == l && index == j => {
                terms.push((s, slot.scale * x[j]))
            }
            _ => {}
        }
    }
    (base[l][j], terms)
}

fn base_gradients(inst: &DmpInstance, x: &[f64]) -> Vec<Vec<f64>> {
    let zero = inst.apply_unchecked(&vec![0.0; inst.num_params()]);
    zero.objectives.iter().map(|o| o.gradient(x)).collect()
}

/// KKT big-M model for learning linear objectives: per weight k the
/// weighted-sum LP optimality of x_k (primal rows, reduced costs, two
/// complementarity blocks) and per observation the assignment block.
pub fn build_single_level_mlp(
    inst: &DmpInstance,
    observations: &[Vec<f64>],
    weights: &[WeightVector],
    cfg: &BigMConfig,
) -> Result<MipModel> {
    if inst.family != Family::Linear {
        return Err(ImopError::InvalidModel("the linear-objective model needs a linear family".into()));
    }
    if inst.space.normalizations.is_empty() {
        return Err(ImopError::InvalidModel(
            "objective normalisation rows are required to exclude the zero objective".into(),
        ));
    }
    if inst.slots.iter().any(|s| !matches!(s.target, SlotTarget::Linear { .. })) {
        return Err(ImopError::InvalidModel("only linear objective slots are supported".into()));
    }
    let cons = &inst.constraints;
    if cons.lower.iter().any(|l| *l != Some(0.0)) || cons.upper.iter().any(Option::is_some) || !cons.a_eq.is_empty()
    {
        return Err(ImopError::InvalidModel("the linear-objective model expects A x ≤ b, x ≥ 0".into()));
    }
    check_inputs(inst, observations, weights)?;
    let rows = rows_of(inst);
    let bm = big_m(inst, &rows, cfg)?;
    let (n, m) = (inst.n(), cons.a_ineq.len());
    let base = base_gradients(inst, &vec![0.0; n]);

    let mut model = MipModel::new(format!("{}_mlp", inst.name));
    model.big_m = bm.registry(false);
    let theta = add_theta(&mut model, inst);
    let mut xs = Vec::with_capacity(weights.len());
    for (k, w) in weights.iter().enumerate() {
        let x: Vec<usize> =
            (0..n).map(|j| model.add_var(format!("x_{k}_{j}"), VarKind::Continuous, 0.0, INF)).collect();
        let u: Vec<usize> =
            (0..m).map(|r| model.add_var(format!("u_{k}_{r}"), VarKind::Continuous, 0.0, INF)).collect();
        let t1: Vec<usize> = (0..n).map(|j| model.add_var(format!("t1_{k}_{j}"), VarKind::Binary, 0.0, 1.0)).collect();
        let t2: Vec<usize> = (0..m).map(|r| model.add_var(format!("t2_{k}_{r}"), VarKind::Binary, 0.0, 1.0)).collect();
        for r in 0..m {
            let terms = (0..n).map(|j| (x[j], cons.a_ineq[r][j])).collect();
            model.add_row(format!("prim_{k}_{r}"), terms, Sense::Le, cons.b_ineq[r]);
        }
        // reduced cost Σ_l w_l c_l(θ) + Aᵀu ≥ 0
        let mut rc_terms = Vec::with_capacity(n);
        for j in 0..n {
            let mut terms: Vec<(usize, f64)> = (0..m).map(|r| (u[r], cons.a_ineq[r][j])).collect();
            let mut constant = 0.0;
            for (l, wl) in w.iter().enumerate() {
                let (c0, slots) = gradient_terms(inst, &base, l, j, &[]);
                constant += wl * c0;
                terms.extend(slots.into_iter().map(|(s, c)| (theta[s], wl * c)));
            }
            model.add_row(format!("dual_{k}_{j}"), terms.clone(), Sense::Ge, -constant);
            rc_terms.push((terms, constant));
        }
        for j in 0..n {
            model.add_row(format!("cx_{k}_{j}"), vec![(x[j], 1.0), (t1[j], -bm.slack)], Sense::Le, 0.0);
            let (terms, constant) = &rc_terms[j];
            let mut t = terms.clone();
            t.push((t1[j], bm.slack));
            model.add_row(format!("crc_{k}_{j}"), t, Sense::Le, bm.slack - constant);
        }
        for r in 0..m {
            model.add_row(format!("cu_{k}_{r}"), vec![(u[r], 1.0), (t2[r], -bm.dual)], Sense::Le, 0.0);
            let mut t: Vec<(usize, f64)> = (0..n).map(|j| (x[j], -cons.a_ineq[r][j])).collect();
            t.push((t2[r], bm.slack));
            model.add_row(format!("cs_{k}_{r}"), t, Sense::Le, bm.slack - cons.b_ineq[r]);
        }
        xs.push(x);
    }
    add_assignment(&mut model, observations, &xs, bm.assign);
    model.validate()?;
    Ok(model)
}

/// KKT big-M model for learning right-hand sides of a multiobjective QP:
/// stationarity equalities per weight, complementarity on every canonical
/// inequality (bounds included), and the assignment block.
pub fn build_single_level_mqp_rhs(
    inst: &DmpInstance,
    observations: &[Vec<f64>],
    weights: &[WeightVector],
    cfg: &BigMConfig,
) -> Result<MipModel> {
    if inst.family != Family::Quadratic || inst.objectives.iter().any(|o| !o.poly.is_empty()) {
        return Err(ImopError::InvalidModel("the right-hand-side model needs a quadratic family".into()));
    }
    if inst.slots.iter().any(|s| !s.target.is_rhs()) {
        return Err(ImopError::InvalidModel("only right-hand-side slots are supported".into()));
    }
    check_inputs(inst, observations, weights)?;
    let rows = rows_of(inst);
    let bm = big_m(inst, &rows, cfg)?;
    let (n, mc, me) = (inst.n(), rows.g.len(), rows.e.len());
    let dmp = inst.apply_unchecked(&inst.space.center()?);

    let mut model = MipModel::new(format!("{}_rhs", inst.name));
    model.big_m = bm.registry(false);
    let theta = add_theta(&mut model, inst);
    // Row r as G_r x − h_r(θ): terms and the constant moved to the right.
    let row_terms = |x: &[usize], r: usize| {
        let mut t: Vec<(usize, f64)> = (0..n).map(|j| (x[j], rows.g[r][j])).collect();
        if let Some((s, scale)) = rows.h_slot[r] {
            t.push((theta[s], -scale));
        }
        (t, rows.h_const[r])
    };
    let mut xs = Vec::with_capacity(weights.len());
    for (k, w) in weights.iter().enumerate() {
        let x: Vec<usize> =
            (0..n).map(|j| model.add_var(format!("x_{k}_{j}"), VarKind::Continuous, -INF, INF)).collect();
        let u: Vec<usize> =
            (0..mc).map(|r| model.add_var(format!("u_{k}_{r}"), VarKind::Continuous, 0.0, INF)).collect();
        let mu: Vec<usize> =
            (0..me).map(|e| model.add_var(format!("mu_{k}_{e}"), VarKind::Continuous, -INF, INF)).collect();
        let t: Vec<usize> = (0..mc).map(|r| model.add_var(format!("t1_{k}_{r}"), VarKind::Binary, 0.0, 1.0)).collect();
        for r in 0..mc {
            let (terms, rhs) = row_terms(&x, r);
            model.add_row(format!("prim_{k}_{r}"), terms, Sense::Le, rhs);
        }
        for e in 0..me {
            let mut terms: Vec<(usize, f64)> = (0..n).map(|j| (x[j], rows.e[e][j])).collect();
            if let Some((s, scale)) = rows.d_slot[e] {
                terms.push((theta[s], -scale));
            }
            model.add_row(format!("peq_{k}_{e}"), terms, Sense::Eq, rows.d_const[e]);
        }
        let hess = dmp.weighted_hessian(w, &vec![0.0; n]);
        let grad0 = dmp.weighted_gradient(w, &vec![0.0; n]);
        for j in 0..n {
            let mut terms: Vec<(usize, f64)> = (0..n).map(|i| (x[i], hess[(j, i)])).collect();
            terms.extend((0..mc).map(|r| (u[r], rows.g[r][j])));
            terms.extend((0..me).map(|e| (mu[e], rows.e[e][j])));
            model.add_row(format!("stat_{k}_{j}"), terms, Sense::Eq, -grad0[j]);
        }
        for r in 0..mc {
            model.add_row(format!("cu_{k}_{r}"), vec![(u[r], 1.0), (t[r], -bm.dual)], Sense::Le, 0.0);
            // h_r(θ) − G_r x ≤ M2 (1 − t)
            let (terms, h) = row_terms(&x, r);
            let mut neg: Vec<(usize, f64)> = terms.into_iter().map(|(v, c)| (v, -c)).collect();
            neg.push((t[r], bm.slack));
            model.add_row(format!("cs_{k}_{r}"), neg, Sense::Le, bm.slack - h);
        }
        xs.push(x);
    }
    add_assignment(&mut model, observations, &xs, bm.assign);
    model.validate()?;
    Ok(model)
}

/// Big-M model of the identifiability test problem: maximise ‖θ − θ̂‖₁ while
/// every given efficient point satisfies the KKT conditions of some weighted
/// problem. Stationarity is relaxed componentwise (infinity norm).
pub fn build_test_problem(
    inst: &DmpInstance,
    theta_hat: &[f64],
    points: &[Vec<f64>],
    weights: &[WeightVector],
    cfg: &BigMConfig,
) -> Result<MipModel> {
    if inst.slots.iter().any(|s| s.target.is_rhs()) || inst.objectives.iter().any(|o| !o.poly.is_empty()) {
        return Err(ImopError::InvalidModel(
            "the test problem needs objective-coefficient slots on linear or quadratic objectives".into(),
        ));
    }
    if theta_hat.len() != inst.num_params() {
        return Err(ImopError::InvalidParams(format!(
            "expected {} parameters, got {}",
            inst.num_params(),
            theta_hat.len()
        )));
    }
    check_inputs(inst, points, weights)?;
    let rows = rows_of(inst);
    let bm = big_m(inst, &rows, cfg)?;
    let (n, mc, me, d) = (inst.n(), rows.g.len(), rows.e.len(), inst.num_params());
    let tol = cfg.stationarity_tol;

    let mut model = MipModel::new(format!("{}_test", inst.name));
    model.big_m = bm.registry(true);
    let theta = add_theta(&mut model, inst);
    for (i, xi) in points.iter().enumerate() {
        let u: Vec<usize> =
            (0..mc).map(|r| model.add_var(format!("u_{i}_{r}"), VarKind::Continuous, 0.0, INF)).collect();
        let mu: Vec<usize> =
            (0..me).map(|e| model.add_var(format!("mu_{i}_{e}"), VarKind::Continuous, -INF, INF)).collect();
        let z: Vec<usize> =
            (0..weights.len()).map(|k| model.add_var(format!("z_{i}_{k}"), VarKind::Binary, 0.0, 1.0)).collect();
        // Σ_r (h_r − G_r x_i) u_r ≤ tol
        let comp = (0..mc).map(|r| (u[r], rows.h_const[r] - dot(&rows.g[r], xi))).collect();
        model.add_row(format!("comp_{i}"), comp, Sense::Le, tol);
        let base = base_gradients(inst, xi);
        for (k, w) in weights.iter().enumerate() {
            for j in 0..n {
                let mut terms: Vec<(usize, f64)> = (0..mc).map(|r| (u[r], rows.g[r][j])).collect();
                terms.extend((0..me).map(|e| (mu[e], rows.e[e][j])));
                let mut constant = 0.0;
                for (l, wl) in w.iter().enumerate() {
                    let (g0, slots) = gradient_terms(inst, &base, l, j, xi);
                    constant += wl * g0;
                    terms.extend(slots.into_iter().map(|(s, c)| (theta[s], wl * c)));
                }
                let mut pos = terms.clone();
                pos.push((z[k], bm.stat));
                model.add_row(format!("statp_{i}_{k}_{j}"), pos, Sense::Le, tol + bm.stat - constant);
                let mut neg: Vec<(usize, f64)> = terms.into_iter().map(|(v, c)| (v, -c)).collect();
                neg.push((z[k], bm.stat));
                model.add_row(format!("statn_{i}_{k}_{j}"), neg, Sense::Le, tol + bm.stat + constant);
            }
        }
        model.add_row(format!("assign_{i}"), z.iter().map(|&v| (v, 1.0)).collect(), Sense::Eq, 1.0);
    }
    let widths = inst.space.widths();
    for j in 0..d {
        let wd = widths[j].max(f64::MIN_POSITIVE);
        let dp = model.add_var(format!("dp_{j}"), VarKind::Continuous, 0.0, wd);
        let dm = model.add_var(format!("dm_{j}"), VarKind::Continuous, 0.0, wd);
        let s = model.add_var(format!("s_{j}"), VarKind::Binary, 0.0, 1.0);
        model.add_row(format!("dev_{j}"), vec![(theta[j], 1.0), (dp, -1.0), (dm, 1.0)], Sense::Eq, theta_hat[j]);
        model.add_row(format!("dpos_{j}"), vec![(dp, 1.0), (s, -wd)], Sense::Le, 0.0);
        model.add_row(format!("dneg_{j}"), vec![(dm, 1.0), (s, wd)], Sense::Le, wd);
        model.objective.linear.push((dp, 1.0));
        model.objective.linear.push((dm, 1.0));
    }
    model.objective.maximize = true;
    model.validate()?;
    Ok(model)
}

fn put(map: &mut BTreeMap<String, f64>, name: String, v: f64) {
    map.insert(name, v);
}

fn plug_theta(map: &mut BTreeMap<String, f64>, theta: &[f64]) {
    for (j, &v) in theta.iter().enumerate() {
        put(map, format!("theta_{j}"), v);
    }
}

fn plug_assignment(map: &mut BTreeMap<String, f64>, observations: &[Vec<f64>], front: &[Vec<f64>]) {
    for (i, y) in observations.iter().enumerate() {
        let (best, _) = nearest(y, front);
        for (k, x) in front.iter().enumerate() {
            let z = if k == best { 1.0 } else { 0.0 };
            put(map, format!("z_{i}_{k}"), z);
            for (j, &xj) in x.iter().enumerate() {
                put(map, format!("eta_{i}_{k}_{j}"), z * xj);
            }
        }
    }
}

/// Ground-truth point of the linear-objective model: forward solutions, their
/// multipliers, the implied binaries and the nearest-point assignment.
pub fn plug_in_mlp(
    inst: &DmpInstance,
    theta: &[f64],
    observations: &[Vec<f64>],
    weights: &[WeightVector],
) -> Result<BTreeMap<String, f64>> {
    let dmp = inst.apply(theta)?;
    let cons = &dmp.constraints;
    let (n, m) = (dmp.n(), cons.a_ineq.len());
    let mut map = BTreeMap::new();
    plug_theta(&mut map, theta);
    let mut front = Vec::with_capacity(weights.len());
    for (k, w) in weights.iter().enumerate() {
        let sol = solve_wp(&dmp, w)?;
        let u = &sol.ineq_mult[..m];
        let c = dmp.weighted_gradient(w, &sol.x);
        for j in 0..n {
            let rc = c[j] + (0..m).map(|r| cons.a_ineq[r][j] * u[r]).sum::<f64>();
            put(&mut map, format!("x_{k}_{j}"), sol.x[j]);
            put(&mut map, format!("t1_{k}_{j}"), if sol.x[j] > rc { 1.0 } else { 0.0 });
        }
        for r in 0..m {
            let slack = cons.b_ineq[r] - dot(&cons.a_ineq[r], &sol.x);
            put(&mut map, format!("u_{k}_{r}"), u[r]);
            put(&mut map, format!("t2_{k}_{r}"), if u[r] > slack { 1.0 } else { 0.0 });
        }
        front.push(sol.x);
    }
    plug_assignment(&mut map, observations, &front);
    Ok(map)
}

/// Ground-truth point of the right-hand-side model.
pub fn plug_in_mqp_rhs(
    inst: &DmpInstance,
    theta: &[f64],
    observations: &[Vec<f64>],
    weights: &[WeightVector],
) -> Result<BTreeMap<String, f64>> {
    let dmp = inst.apply(theta)?;
    let (g, h, _) = dmp.constraints.canonical_ineq();
    let mut map = BTreeMap::new();
    plug_theta(&mut map, theta);
    let mut front = Vec::with_capacity(weights.len());
    for (k, w) in weights.iter().enumerate() {
        let sol = solve_wp(&dmp, w)?;
        for (j, &v) in sol.x.iter().enumerate() {
            put(&mut map, format!("x_{k}_{j}"), v);
        }
        for r in 0..g.len() {
            let (u, slack) = (sol.ineq_mult[r], h[r] - dot(&g[r], &sol.x));
            put(&mut map, format!("u_{k}_{r}"), u);
            put(&mut map, format!("t1_{k}_{r}"), if u > slack { 1.0 } else { 0.0 });
        }
        for (e, &v) in sol.eq_mult.iter().enumerate() {
            put(&mut map, format!("mu_{k}_{e}"), v);
        }
        front.push(sol.x);
    }
    plug_assignment(&mut map, observations, &front);
    Ok(map)
}

/// A test-problem point for a candidate θ: each efficient point takes the
/// weight whose least-squares multipliers leave the smallest stationarity
/// residual.
pub fn plug_in_test_problem(
    inst: &DmpInstance,
    theta_hat: &[f64],
    theta: &[f64],
    points: &[Vec<f64>],
    weights: &[WeightVector],
) -> Result<BTreeMap<String, f64>> {
    let dmp = inst.apply(theta)?;
    let sys = crate::solver::dense_system(&dmp);
    let n = dmp.n();
    let mut map = BTreeMap::new();
    plug_theta(&mut map, theta);
    for (i, x) in points.iter().enumerate() {
        let mut best = (f64::INFINITY, 0, Vec::new(), Vec::new());
        for (k, w) in weights.iter().enumerate() {
            let (u, mu) = recover_multipliers(&dmp, w, x);
            let grad = dmp.weighted_gradient(w, x);
            let res = (0..n)
                .map(|j| {
                    let s = grad[j]
                        + (0..u.len()).map(|r| sys.a[(r, j)] * u[r]).sum::<f64>()
                        + (0..mu.len()).map(|e| sys.e[(e, j)] * mu[e]).sum::<f64>();
                    s.abs()
                })
                .fold(0.0, f64::max);
            if res < best.0 {
                best = (res, k, u, mu);
            }
        }
        let (_, kb, u, mu) = best;
        for (r, v) in u.iter().enumerate() {
            put(&mut map, format!("u_{i}_{r}"), *v);
        }
        for (e, v) in mu.iter().enumerate() {
            put(&mut map, format!("mu_{i}_{e}"), *v);
        }
        for k in 0..weights.len() {
            put(&mut map, format!("z_{i}_{k}"), if k == kb { 1.0 } else { 0.0 });
        }
    }
    for (j, (&t, &h)) in theta.iter().zip(theta_hat).enumerate() {
        let diff = t - h;
        put(&mut map, format!("dp_{j}"), diff.max(0.0));
        put(&mut map, format!("dm_{j}"), (-diff).max(0.0));
        put(&mut map, format!("s_{j}"), if diff > 0.0 { 1.0 } else { 0.0 });
    }
    Ok(map)
}

/// Efficient points of θ at the given weights, for building test problems.
pub fn efficient_points(inst: &DmpInstance, theta: &[f64], weights: &[WeightVector]) -> Result<Vec<Vec<f64>>> {
    front_points(&inst.apply(theta)?, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::fixtures::{example_instance, mlp_instance, mqp_rhs_instance, EXAMPLE1_THETA, EXAMPLE2_THETA};
    use crate::loss::empirical_risk_at;
    use crate::reform::{check_feasible, check_feasible_tol};
    use crate::solver::grid_weights;

    fn mqp_setup() -> (DmpInstance, Vec<f64>, Vec<Vec<f64>>, Vec<WeightVector>) {
        let inst = mqp_rhs_instance().unwrap();
        let theta = inst.slot_values();
        (inst, theta, vec![vec![1.0, 2.5], vec![2.5, 1.0]], grid_weights(2, 2, 0).unwrap())
    }

    #[test]
    fn mqp_rhs_counts() {
        let (inst, _, obs, w) = mqp_setup();
        let m = build_single_level_mqp_rhs(&inst, &obs, &w, &BigMConfig::default()).unwrap();
        let counts: Vec<usize> = ["theta", "x", "u", "t1", "z", "eta"].iter().map(|p| m.count_prefix(p)).collect();
        // two general rows plus two lower bounds per weight
        assert_eq!(counts, vec![2, 4, 8, 8, 4, 8]);
        assert_eq!(m.binaries(), 12);
    }

    #[test]
    fn mqp_rhs_plug_in_is_feasible_and_matches_risk() {
        let (inst, theta, obs, w) = mqp_setup();
        let m = build_single_level_mqp_rhs(&inst, &obs, &w, &BigMConfig::default()).unwrap();
        let point = plug_in_mqp_rhs(&inst, &theta, &obs, &w).unwrap();
        let r = check_feasible(&m, &point).unwrap();
        assert!(r.pass, "max violation {:e}: {:?}", r.max_violation, r.violated());
        let (risk, _) = empirical_risk_at(&inst, &theta, &w, &obs).unwrap();
        assert!((r.objective - risk).abs() < 1e-9, "{} vs {}", r.objective, risk);
    }

    #[test]
    fn tiny_big_m_is_flagged() {
        let (inst, theta, obs, w) = mqp_setup();
        let cfg = BigMConfig { m1: Some(0.01), m2: Some(0.01), m_assign: Some(0.01), ..Default::default() };
        let m = build_single_level_mqp_rhs(&inst, &obs, &w, &cfg).unwrap();
        let point = plug_in_mqp_rhs(&inst, &theta, &obs, &w).unwrap();
        let r = check_feasible(&m, &point).unwrap();
        assert!(!r.pass);
        assert!(r.violated().iter().any(|v| v.name.starts_with("c") || v.name.starts_with("eta")));
    }

    #[test]
    fn mlp_counts_follow_the_template() {
        let inst = mlp_instance().unwrap();
        let w = vec![vec![0.5, 0.25, 0.25], vec![0.2, 0.3, 0.5]];
        let obs = vec![vec![1.0, 1.0, 1.0], vec![2.0, 0.0, 2.0]];
        let m = build_single_level_mlp(&inst, &obs, &w, &BigMConfig::default()).unwrap();
        let (n, mr, nn, k) = (3, 2, 2, 2);
        assert_eq!(m.binaries(), n * k + mr * k + nn * k);
        assert_eq!(m.count_prefix("eta"), nn * k * n);
    }

    #[test]
    fn mlp_without_observations_has_only_kkt_blocks() {
        let inst = mlp_instance().unwrap();
        let w = grid_weights(3, 3, 0).unwrap();
        let m = build_single_level_mlp(&inst, &[], &w, &BigMConfig::default()).unwrap();
        assert_eq!(m.count_prefix("z"), 0);
        assert_eq!(m.binaries(), 3 * (3 + 2));
        assert!(m.objective.quadratic.is_empty());
    }

    #[test]
    fn mlp_plug_in_is_feasible() {
        let inst = mlp_instance().unwrap();
        let theta = inst.slot_values();
        let w = grid_weights(3, 6, 0).unwrap();
        let obs = vec![vec![1.0, 1.0, 1.0], vec![2.0, 0.0, 2.0], vec![0.0, 4.0, 0.5]];
        let m = build_single_level_mlp(&inst, &obs, &w, &BigMConfig::default()).unwrap();
        let point = plug_in_mlp(&inst, &theta, &obs, &w).unwrap();
        let r = check_feasible(&m, &point).unwrap();
        assert!(r.pass, "max violation {:e}: {:?}", r.max_violation, r.violated());
        let (risk, _) = empirical_risk_at(&inst, &theta, &w, &obs).unwrap();
        assert!((r.objective - risk).abs() < 1e-9);
    }

    #[test]
    fn mlp_requires_normalisation() {
        let mut inst = mlp_instance().unwrap();
        inst.space.normalizations.clear();
        assert!(build_single_level_mlp(&inst, &[], &grid_weights(3, 2, 0).unwrap(), &BigMConfig::default()).is_err());
    }

    #[test]
    fn rhs_model_rejects_objective_slots() {
        let inst = example_instance().unwrap();
        assert!(build_single_level_mqp_rhs(&inst, &[], &grid_weights(2, 2, 0).unwrap(), &BigMConfig::default()).is_err());
    }

    #[test]
    fn incumbent_is_feasible_with_zero_objective() {
        let inst = example_instance().unwrap();
        let w = grid_weights(2, 5, 0).unwrap();
        let pts = efficient_points(&inst, &EXAMPLE1_THETA, &w).unwrap();
        let m = build_test_problem(&inst, &EXAMPLE1_THETA, &pts, &w, &BigMConfig::default()).unwrap();
        let point = plug_in_test_problem(&inst, &EXAMPLE1_THETA, &EXAMPLE1_THETA, &pts, &w).unwrap();
        let r = check_feasible(&m, &point).unwrap();
        assert!(r.pass, "max violation {:e}: {:?}", r.max_violation, r.violated());
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn single_point_single_weight_fixes_assignment() {
        let inst = example_instance().unwrap();
        let w = vec![vec![0.5, 0.5]];
        let pts = efficient_points(&inst, &EXAMPLE1_THETA, &w).unwrap();
        let m = build_test_problem(&inst, &EXAMPLE1_THETA, &pts, &w, &BigMConfig::default()).unwrap();
        assert_eq!(m.count_prefix("z"), 1);
        let row = m.rows.iter().find(|r| r.name == "assign_0").unwrap();
        assert_eq!((row.terms.len(), row.sense, row.rhs), (1, Sense::Eq, 1.0));
    }

    #[test]
    fn other_parameters_with_the_same_front_are_feasible() {
        let inst = example_instance().unwrap();
        let w = grid_weights(2, 11, 0).unwrap();
        let pts = efficient_points(&inst, &EXAMPLE1_THETA, &w).unwrap();
        let cfg = BigMConfig { stationarity_tol: 1e-2, ..Default::default() };
        let test_w = grid_weights(2, 1001, 0).unwrap();
        let m = build_test_problem(&inst, &EXAMPLE1_THETA, &pts, &test_w, &cfg).unwrap();
        let point = plug_in_test_problem(&inst, &EXAMPLE1_THETA, &EXAMPLE2_THETA, &pts, &test_w).unwrap();
        let r = check_feasible_tol(&m, &point, 1e-6).unwrap();
        assert!(r.pass, "max violation {:e}: {:?}", r.max_violation, r.violated());
        let l1: f64 = EXAMPLE1_THETA.iter().zip(&EXAMPLE2_THETA).map(|(a, b)| (a - b).abs()).sum();
        assert!((r.objective - l1).abs() < 1e-9);
    }
}
