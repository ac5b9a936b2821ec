//! Constructors for the supported problem families.

use serde::{Deserialize, Serialize};

use crate::error::{ImopError, Result};
use crate::model::{
    Constraints, DmpInstance, Family, Matrix, Normalization, Objective, ParamSpace, PolyTerm, Slot, SlotTarget,
};

/// A free parameter: where it goes, its box, and its scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskEntry {
    pub name: String,
    pub target: SlotTarget,
    pub lower: f64,
    pub upper: f64,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

impl MaskEntry {
    pub fn new(name: impl Into<String>, target: SlotTarget, lower: f64, upper: f64) -> Self {
        MaskEntry { name: name.into(), target, lower, upper, scale: 1.0 }
    }

    pub fn scaled(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }
}

fn split_mask(mask: &[MaskEntry]) -> (Vec<Slot>, Vec<f64>, Vec<f64>) {
    let slots = mask.iter().map(|m| Slot { name: m.name.clone(), target: m.target, scale: m.scale }).collect();
    (slots, mask.iter().map(|m| m.lower).collect(), mask.iter().map(|m| m.upper).collect())
}

/// Multiobjective LP min {c_l x} s.t. A x ≤ b, x ≥ 0. With `normalize`,
/// every objective whose coefficients are all free gets the row 1ᵀc_l = -1.
pub fn build_mlp(
    name: &str,
    c: Matrix,
    a: Matrix,
    b: Vec<f64>,
    mask: &[MaskEntry],
    normalize: bool,
) -> Result<DmpInstance> {
    let n = c.first().map_or(0, |r| r.len());
    let objectives = c.into_iter().map(Objective::linear).collect::<Vec<_>>();
    let mut cons = Constraints::nonneg(n);
    cons.a_ineq = a;
    cons.b_ineq = b;
    let (slots, lower, upper) = split_mask(mask);
    let mut normalizations = Vec::new();
    if normalize {
        for l in 0..objectives.len() {
            let idx: Vec<usize> = (0..n)
                .filter_map(|j| {
                    mask.iter().position(|m| m.target == SlotTarget::Linear { objective: l, index: j })
                })
                .collect();
            if idx.len() == n {
                let mut coef = vec![0.0; mask.len()];
                for &k in &idx {
                    coef[k] = mask[k].scale;
                }
                normalizations.push(Normalization { coefficients: coef, rhs: -1.0 });
            }
        }
    }
    DmpInstance::new(name, Family::Linear, objectives, cons, slots, ParamSpace { lower, upper, normalizations })
}

/// Multiobjective convex QP min {½xᵀQ_l x + c_lᵀx} over the given constraints.
pub fn build_mqp(
    name: &str,
    q: Vec<Matrix>,
    c: Vec<Vec<f64>>,
    constraints: Constraints,
    mask: &[MaskEntry],
    normalizations: Vec<Normalization>,
) -> Result<DmpInstance> {
    if q.len() != c.len() {
        return Err(ImopError::InvalidModel("quadratic and linear term counts differ".into()));
    }
    let objectives = q.into_iter().zip(c).map(|(q, c)| Objective::quadratic(q, c)).collect();
    let (slots, lower, upper) = split_mask(mask);
    DmpInstance::new(name, Family::Quadratic, objectives, constraints, slots, ParamSpace { lower, upper, normalizations })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub from: usize,
    pub to: usize,
    /// Free-flow travel time.
    pub t0: f64,
    pub capacity: f64,
    /// Emission factor.
    pub emission: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdPair {
    pub origin: usize,
    pub destination: usize,
    pub demand: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub links: Vec<Link>,
    pub od_pairs: Vec<OdPair>,
}

impl Network {
    /// All simple paths per O-D pair, as link index lists, in DFS order
    /// (links tried in index order).
    pub fn routes(&self) -> Vec<Vec<Vec<usize>>> {
        fn dfs(net: &Network, at: usize, dest: usize, seen: &mut Vec<usize>, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if at == dest {
                out.push(path.clone());
                return;
            }
            for (i, l) in net.links.iter().enumerate() {
                if l.from == at && !seen.contains(&l.to) {
                    seen.push(l.to);
                    path.push(i);
                    dfs(net, l.to, dest, seen, path, out);
                    path.pop();
                    seen.pop();
                }
            }
        }
        self.od_pairs
            .iter()
            .map(|od| {
                let mut out = Vec::new();
                dfs(self, od.origin, od.destination, &mut vec![od.origin], &mut Vec::new(), &mut out);
                out
            })
            .collect()
    }
}

/// Bi-objective traffic assignment. Variables are route flows (grouped by
/// O-D pair) followed by link flows. f1 is total BPR travel time
/// Σ t0·v(1 + 0.15 (v/C)^4), f2 total emissions Σ h·v². Demands listed in
/// `free_demands` become parameters with the given box.
pub fn build_traffic(name: &str, net: &Network, free_demands: &[(usize, f64, f64)]) -> Result<DmpInstance> {
    let routes = net.routes();
    if routes.iter().any(|r| r.is_empty()) {
        return Err(ImopError::InvalidModel("some O-D pair has no route".into()));
    }
    let n_routes: usize = routes.iter().map(|r| r.len()).sum();
    let n_links = net.links.len();
    let n = n_routes + n_links;
    let mut cons = Constraints::nonneg(n);
    let mut r_idx = 0;
    for (k, od) in net.od_pairs.iter().enumerate() {
        let mut row = vec![0.0; n];
        for _ in &routes[k] {
            row[r_idx] = 1.0;
            r_idx += 1;
        }
        cons.a_eq.push(row);
        cons.b_eq.push(od.demand);
    }
    for a in 0..n_links {
        let mut row = vec![0.0; n];
        row[n_routes + a] = 1.0;
        let mut r = 0;
        for rs in &routes {
            for path in rs {
                if path.contains(&a) {
                    row[r] = -1.0;
                }
                r += 1;
            }
        }
        cons.a_eq.push(row);
        cons.b_eq.push(0.0);
    }
    let mut f1 = Objective::linear(vec![0.0; n]);
    let mut f2 = Objective::linear(vec![0.0; n]);
    for (a, l) in net.links.iter().enumerate() {
        let v = n_routes + a;
        f1.linear[v] = l.t0;
        f1.poly.push(PolyTerm { var: v, power: 5, coef: 0.15 * l.t0 / l.capacity.powi(4) });
        f2.poly.push(PolyTerm { var: v, power: 2, coef: l.emission });
    }
    // Upper bounds keep the region bounded for any demand in the box.
    let max_total: f64 = net
        .od_pairs
        .iter()
        .enumerate()
        .map(|(k, od)| free_demands.iter().find(|f| f.0 == k).map_or(od.demand, |f| f.2))
        .sum();
    cons.upper = vec![Some(max_total); n];
    let mask: Vec<MaskEntry> = free_demands
        .iter()
        .map(|&(k, lo, hi)| {
            let od = &net.od_pairs[k];
            MaskEntry::new(format!("d_{}_{}", od.origin, od.destination), SlotTarget::EqRhs { row: k }, lo, hi)
        })
        .collect();
    let (slots, lower, upper) = split_mask(&mask);
    DmpInstance::new(name, Family::Traffic, vec![f1, f2], cons, slots, ParamSpace::boxed(lower, upper))
}
