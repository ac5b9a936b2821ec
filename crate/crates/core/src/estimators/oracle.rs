//! Exhaustive grid search over the parameter space, for low-dimensional
//! instances only. Used as an independent check of the estimators.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ImopError, Result};
use crate::loss::empirical_risk;
use crate::model::{DmpInstance, ParamVector, Reducer};
use crate::solver::{front_points, WeightVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub theta: ParamVector,
    pub objective: f64,
    pub evaluated: usize,
}

const MAX_FREE: usize = 3;
const MAX_POINTS: usize = 2_000_000;

pub fn brute_force_oracle(
    inst: &DmpInstance,
    obs: &[Vec<f64>],
    weights: &[WeightVector],
    resolution: f64,
) -> Result<OracleResult> {
    if !(resolution > 0.0) {
        return Err(ImopError::InvalidArgument("resolution must be positive".into()));
    }
    let space = &inst.space;
    let red = Reducer::new(space)?;
    let r = red.reduced_dim();
    if r > MAX_FREE {
        return Err(ImopError::InvalidArgument(format!("grid search supports at most {MAX_FREE} free coordinates, got {r}")));
    }
    let axes: Vec<Vec<f64>> = red
        .independent
        .iter()
        .map(|&j| {
            let (lo, hi) = (space.lower[j], space.upper[j]);
            let steps = ((hi - lo) / resolution + 1e-9).floor() as usize;
            let mut v: Vec<f64> = (0..=steps).map(|s| lo + s as f64 * resolution).collect();
            if hi - v.last().copied().unwrap_or(lo) > 1e-12 {
                v.push(hi);
            }
            v
        })
        .collect();
    let total: usize = axes.iter().map(|a| a.len()).product();
    if total > MAX_POINTS {
        return Err(ImopError::InvalidArgument(format!("grid has {total} points, limit is {MAX_POINTS}")));
    }
    let points: Vec<ParamVector> = (0..total)
        .map(|mut idx| {
            let mut t = Vec::with_capacity(r);
            for a in &axes {
                t.push(a[idx % a.len()]);
                idx /= a.len();
            }
            red.expand(&t)
        })
        .filter(|th| space.contains(th))
        .collect();
    if points.is_empty() {
        return Err(ImopError::InvalidArgument("no grid point lies in the parameter space".into()));
    }
    let values: Vec<f64> = points
        .par_iter()
        .map(|th| match front_points(&inst.apply_unchecked(th), weights) {
            Ok(front) => empirical_risk(obs, &front).map(|v| v.0).unwrap_or(f64::INFINITY),
            Err(_) => f64::INFINITY,
        })
        .collect();
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = i;
        }
    }
    Ok(OracleResult { theta: points[best].clone(), objective: values[best], evaluated: points.len() })
}
