//! Single-level big-M models of the inverse problems, for export to external
//! MIP solvers and for checking candidate solutions against the exact
//! formulation. Nothing here solves a MIP.

mod build;
mod lp_format;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{ImopError, Result};

pub use build::{
    build_single_level_mlp, build_single_level_mqp_rhs, build_test_problem, efficient_points, plug_in_mlp,
    plug_in_mqp_rhs, plug_in_test_problem, BigMConfig,
};
pub use lp_format::{export_model, lp_file_name, read_lp, write_lp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    /// (variable index, coefficient), sorted by index, no zeros.
    pub terms: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// coef · v_i · v_j, with i ≤ j.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadTerm {
    pub i: usize,
    pub j: usize,
    pub coef: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MipObjective {
    pub maximize: bool,
    pub constant: f64,
    pub linear: Vec<(usize, f64)>,
    pub quadratic: Vec<QuadTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BigMEntry {
    pub name: String,
    pub value: f64,
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MipModel {
    pub name: String,
    pub variables: Vec<Variable>,
    pub rows: Vec<Row>,
    pub objective: MipObjective,
    pub big_m: Vec<BigMEntry>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

/// Merges duplicate indices and drops zeros, sorted by index.
fn normalize_terms(terms: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
    for (i, c) in terms {
        *acc.entry(i).or_insert(0.0) += c;
    }
    acc.into_iter().filter(|(_, c)| *c != 0.0).collect()
}

impl MipModel {
    pub fn new(name: impl Into<String>) -> Self {
        MipModel {
            name: name.into(),
            variables: Vec::new(),
            rows: Vec::new(),
            objective: MipObjective::default(),
            big_m: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn add_var(&mut self, name: String, kind: VarKind, lower: f64, upper: f64) -> usize {
        let (lower, upper) = match kind {
            VarKind::Binary => (0.0, 1.0),
            VarKind::Continuous => (lower, upper),
        };
        let i = self.variables.len();
        self.index.insert(name.clone(), i);
        self.variables.push(Variable { name, kind, lower, upper });
        i
    }

    pub fn add_row(&mut self, name: String, terms: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        self.rows.push(Row { name, terms: normalize_terms(terms), sense, rhs: rhs + 0.0 });
    }

    pub fn var(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    fn rebuild_index(&mut self) {
        self.index = self.variables.iter().enumerate().map(|(i, v)| (v.name.clone(), i)).collect();
    }

    pub fn count_prefix(&self, prefix: &str) -> usize {
        self.variables.iter().filter(|v| v.name.split('_').next() == Some(prefix)).count()
    }

    pub fn binaries(&self) -> usize {
        self.variables.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    /// Unique names, in-range indices, every binary used by some row.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashMap::new();
        for (i, v) in self.variables.iter().enumerate() {
            if seen.insert(v.name.as_str(), i).is_some() {
                return Err(ImopError::InvalidModel(format!("duplicate variable {}", v.name)));
            }
            if v.lower > v.upper {
                return Err(ImopError::InvalidModel(format!("empty bounds on {}", v.name)));
            }
        }
        let mut rows_seen = HashMap::new();
        let mut used = vec![false; self.variables.len()];
        for r in &self.rows {
            if rows_seen.insert(r.name.as_str(), ()).is_some() {
                return Err(ImopError::InvalidModel(format!("duplicate row {}", r.name)));
            }
            for &(i, _) in &r.terms {
                if i >= self.variables.len() {
                    return Err(ImopError::InvalidModel(format!("row {} references a missing variable", r.name)));
                }
                used[i] = true;
            }
        }
        if let Some(v) = self.variables.iter().zip(&used).find(|(v, u)| v.kind == VarKind::Binary && !**u) {
            return Err(ImopError::InvalidModel(format!("binary {} appears in no row", v.0.name)));
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        let o = &self.objective;
        o.constant
            + o.linear.iter().map(|&(i, c)| c * x[i]).sum::<f64>()
            + o.quadratic.iter().map(|q| q.coef * x[q.i] * x[q.j]).sum::<f64>()
    }

    /// Dense value vector in variable order from a name map.
    pub fn point(&self, values: &BTreeMap<String, f64>) -> Result<Vec<f64>> {
        self.variables
            .iter()
            .map(|v| {
                values
                    .get(&v.name)
                    .copied()
                    .ok_or_else(|| ImopError::InvalidArgument(format!("no value for variable {}", v.name)))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowViolation {
    pub name: String,
    /// Positive means violated.
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub rows: Vec<RowViolation>,
    pub bound_violation: f64,
    pub integrality_violation: f64,
    pub max_violation: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub objective: f64,
}

impl FeasibilityReport {
    pub fn row(&self, name: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.name == name).map(|r| r.violation)
    }

    /// Rows violated beyond the tolerance.
    pub fn violated(&self) -> Vec<&RowViolation> {
        self.rows.iter().filter(|r| r.violation > self.tolerance).collect()
    }
}

/// Per-row signed violation of a named point; passes at 1e-6.
pub fn check_feasible(model: &MipModel, values: &BTreeMap<String, f64>) -> Result<FeasibilityReport> {
    check_feasible_tol(model, values, 1e-6)
}

pub fn check_feasible_tol(model: &MipModel, values: &BTreeMap<String, f64>, tol: f64) -> Result<FeasibilityReport> {
    let x = model.point(values)?;
    let rows: Vec<RowViolation> = model
        .rows
        .iter()
        .map(|r| {
            let lhs: f64 = r.terms.iter().map(|&(i, c)| c * x[i]).sum();
            let violation = match r.sense {
                Sense::Le => lhs - r.rhs,
                Sense::Ge => r.rhs - lhs,
                Sense::Eq => (lhs - r.rhs).abs(),
            };
            RowViolation { name: r.name.clone(), violation }
        })
        .collect();
    let mut bound_violation: f64 = 0.0;
    let mut integrality_violation: f64 = 0.0;
    for (v, &xi) in model.variables.iter().zip(&x) {
        bound_violation = bound_violation.max(v.lower - xi).max(xi - v.upper);
        if v.kind == VarKind::Binary {
            integrality_violation = integrality_violation.max((xi - xi.round()).abs());
        }
    }
    let max_violation = rows.iter().map(|r| r.violation).fold(bound_violation.max(integrality_violation), f64::max);
    Ok(FeasibilityReport {
        rows,
        bound_violation,
        integrality_violation,
        max_violation,
        tolerance: tol,
        pass: max_violation <= tol,
        objective: model.objective_value(&x),
    })
}
