//! Derivative-free minimisation over the parameter space.
//!
//! Compass search in the reduced coordinates of the parameter space, with
//! opportunistic polling, step halving and multi-start.

use rand::{Rng, RngExt};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::sq_dist;
use crate::loss::nearest;
use crate::model::{DmpInstance, ParamSpace, ParamVector, Reducer};
use crate::solver::{front_points, WeightVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Uniform random starts added to the supplied ones.
    pub random_starts: usize,
    /// Initial step as a fraction of each box width.
    pub initial_step: f64,
    /// Stop once the step falls below this fraction of the box width.
    pub min_step: f64,
    /// Evaluation budget per start.
    pub max_evals: usize,
    /// A later start replaces an earlier one only if it is better by more
    /// than this fraction of (1 + |value|). Keeps the search on the branch
    /// of the first start when the objective is flat across Θ.
    pub restart_margin: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { random_starts: 3, initial_step: 0.1, min_step: 1e-4, max_evals: 4000, restart_margin: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub theta: ParamVector,
    pub value: f64,
    pub evals: usize,
    /// The evaluation budget ran out before the step shrank below tolerance.
    pub capped: bool,
}

/// Minimises `f` from `start` (which must lie in `space`).
pub fn pattern_search(
    space: &ParamSpace,
    reducer: &Reducer,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    start: &[f64],
    cfg: &FitConfig,
) -> SearchResult {
    let r = reducer.reduced_dim();
    let mut t = reducer.reduce(start);
    let mut theta = reducer.expand(&t);
    let mut val = f(&theta);
    let mut evals = 1;
    if r == 0 {
        return SearchResult { theta, value: val, evals, capped: false };
    }
    let widths: Vec<f64> = reducer.independent.iter().map(|&j| space.upper[j] - space.lower[j]).collect();
    let lo: Vec<f64> = reducer.independent.iter().map(|&j| space.lower[j]).collect();
    let hi: Vec<f64> = reducer.independent.iter().map(|&j| space.upper[j]).collect();
    let box_only = space.normalizations.is_empty();
    let mut frac = cfg.initial_step;
    let mut last_dir = 0;
    let mut capped = false;
    while frac >= cfg.min_step {
        let mut improved = false;
        for step in 0..2 * r {
            let dir = (last_dir + step) % (2 * r);
            let j = dir / 2;
            let sign = if dir % 2 == 0 { 1.0 } else { -1.0 };
            let mut cand = t.clone();
            cand[j] += sign * frac * widths[j];
            if box_only {
                cand[j] = cand[j].clamp(lo[j], hi[j]);
                if cand[j] == t[j] {
                    continue;
                }
            }
            let th = reducer.expand(&cand);
            if !box_only && space.max_violation(&th) > 1e-12 {
                continue;
            }
            let v = f(&th);
            evals += 1;
            if v < val - 1e-13 * (1.0 + val.abs()) {
                t = cand;
                theta = th;
                val = v;
                improved = true;
                last_dir = dir;
                break;
            }
            if evals >= cfg.max_evals {
                break;
            }
        }
        if evals >= cfg.max_evals {
            capped = frac >= cfg.min_step;
            break;
        }
        if !improved {
            frac *= 0.5;
        }
    }
    SearchResult { theta, value: val, evals, capped }
}

/// Uniform point of the parameter space (rejection on the normalisations).
pub fn random_point<R: Rng>(space: &ParamSpace, reducer: &Reducer, rng: &mut R) -> Result<ParamVector> {
    for _ in 0..1000 {
        let t: Vec<f64> = reducer
            .independent
            .iter()
            .map(|&j| space.lower[j] + rng.random::<f64>() * (space.upper[j] - space.lower[j]))
            .collect();
        let th = reducer.expand(&t);
        if space.max_violation(&th) <= 1e-12 {
            return Ok(th);
        }
    }
    space.center()
}

/// Multi-start search. Each result is pulled back toward its own start, then
/// starts are ranked in order; a later one wins only by beating the
/// incumbent by the restart margin.
pub fn multistart(
    space: &ParamSpace,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    starts: &[ParamVector],
    cfg: &FitConfig,
) -> Result<SearchResult> {
    let reducer = Reducer::new(space)?;
    let results: Vec<SearchResult> = starts
        .par_iter()
        .map(|s| {
            let r = pattern_search(space, &reducer, f, s, cfg);
            pull_toward(f, &r, s, cfg.restart_margin)
        })
        .collect();
    let total: usize = results.iter().map(|r| r.evals).sum();
    let mut best = 0;
    for (i, r) in results.iter().enumerate() {
        if r.value < results[best].value - cfg.restart_margin * (1.0 + results[best].value.abs()) {
            best = i;
        }
    }
    let mut b = results[best].clone();
    if best > 0 {
        b = pull_toward(f, &b, &results[0].theta, cfg.restart_margin);
    }
    b.evals = total + TIE_BISECTIONS * (starts.len() + 1);
    Ok(b)
}

const TIE_BISECTIONS: usize = 30;

/// Moves `best` along the segment toward `anchor` as far as the value stays
/// within the margin. On a flat valley this picks the minimiser nearest the
/// anchor instead of wherever a coarse step happened to land.
fn pull_toward(f: &(dyn Fn(&[f64]) -> f64 + Sync), best: &SearchResult, anchor: &[f64], margin: f64) -> SearchResult {
    let limit = best.value + margin * (1.0 + best.value.abs());
    let at = |t: f64| -> Vec<f64> { best.theta.iter().zip(anchor).map(|(b, a)| b + t * (a - b)).collect() };
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut out = best.clone();
    for _ in 0..TIE_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let th = at(mid);
        let v = f(&th);
        if v <= limit {
            lo = mid;
            out.theta = th;
            out.value = v;
        } else {
            hi = mid;
        }
    }
    out
}

/// Weighted targets (cluster centroids or raw observations) to be matched by
/// front points.
#[derive(Debug, Clone, PartialEq)]
pub struct Targets {
    pub points: Vec<Vec<f64>>,
    pub counts: Vec<f64>,
    /// Objective is Σ counts·dist² / normaliser.
    pub normalizer: f64,
}

/// (1/normaliser) Σ_c counts_c min_k |target_c - x_k(θ)|²; infinite when a
/// forward solve fails.
pub fn centroid_objective(inst: &DmpInstance, weights: &[WeightVector], targets: &Targets, theta: &[f64]) -> f64 {
    let dmp = inst.apply_unchecked(theta);
    match front_points(&dmp, weights) {
        Ok(front) => {
            targets.points.iter().zip(&targets.counts).map(|(y, c)| c * nearest(y, &front).1).sum::<f64>()
                / targets.normalizer
        }
        Err(_) => f64::INFINITY,
    }
}

/// Proximal term (ρ/2)|θ - centre|².
#[derive(Debug, Clone, PartialEq)]
pub struct Prox {
    pub center: ParamVector,
    pub rho: f64,
}

/// Minimises the centroid objective (plus an optional proximal term) from
/// the given starts and `cfg.random_starts` uniform draws.
pub fn inner_fit<R: Rng>(
    inst: &DmpInstance,
    weights: &[WeightVector],
    targets: &Targets,
    prox: Option<&Prox>,
    starts: &[ParamVector],
    cfg: &FitConfig,
    rng: &mut R,
) -> Result<SearchResult> {
    let space = &inst.space;
    let reducer = Reducer::new(space)?;
    let mut all: Vec<ParamVector> = Vec::new();
    for s in starts {
        let s = if space.contains(s) { s.clone() } else { space.project(s)? };
        if !all.iter().any(|a| sq_dist(a, &s) == 0.0) {
            all.push(s);
        }
    }
    for _ in 0..cfg.random_starts {
        all.push(random_point(space, &reducer, rng)?);
    }
    if all.is_empty() {
        all.push(space.center()?);
    }
    let f = |th: &[f64]| {
        let base = centroid_objective(inst, weights, targets, th);
        match prox {
            Some(p) => base + 0.5 * p.rho * sq_dist(th, &p.center),
            None => base,
        }
    };
    // The proximal term already breaks ties; a margin would only blur the
    // local solutions that the consensus residuals are measured on.
    match prox {
        Some(_) => multistart(space, &f, &all, &FitConfig { restart_margin: 0.0, ..cfg.clone() }),
        None => multistart(space, &f, &all, cfg),
    }
}
