//! Hausdorff semi-distance and the search-based non-identifiability test.

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ImopError, Result};
use crate::linalg::{dist, norm};
use crate::model::{ConcreteDmp, DmpInstance, ParamVector, Reducer, SlotTarget};
use crate::solver::{distance_to_solution_set, front_points, grid_weights, solve_wp, WeightVector};

/// sup over x ∈ X of the distance from x to the nearest point of Y.
pub fn hausdorff_semi(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(ImopError::InvalidArgument("hausdorff distance needs nonempty sets".into()));
    }
    Ok(x.iter().map(|a| y.iter().map(|b| dist(a, b)).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max))
}

/// Solutions of θ at every weight, kept with a flag for linear ties so the
/// face distance is only computed where it can differ from the vertex one.
struct Front<'a> {
    dmp: &'a ConcreteDmp,
    weights: &'a [WeightVector],
    points: Vec<Vec<f64>>,
    unique: Vec<bool>,
}

impl<'a> Front<'a> {
    fn new(dmp: &'a ConcreteDmp, weights: &'a [WeightVector]) -> Result<Self> {
        let sols: Vec<_> = weights.par_iter().map(|w| solve_wp(dmp, w)).collect::<Result<_>>()?;
        let unique = sols.iter().map(|s| s.unique).collect();
        let points = sols.into_iter().map(|s| s.x).collect();
        Ok(Front { dmp, weights, points, unique })
    }

    /// min_k distance from x to S(w_k, θ). Stops early once below `stop`.
    fn slack(&self, x: &[f64], stop: f64) -> Result<f64> {
        let mut best = self.points.iter().map(|p| dist(x, p)).fold(f64::INFINITY, f64::min);
        if best <= stop {
            return Ok(best);
        }
        for (k, w) in self.weights.iter().enumerate() {
            if !self.unique[k] {
                best = best.min(distance_to_solution_set(self.dmp, w, x)?);
                if best <= stop {
                    break;
                }
            }
        }
        Ok(best)
    }
}

/// Whether x lies within τ of some S(w_k, θ), and the slack min_k dist.
pub fn is_efficient_under(
    inst: &DmpInstance,
    theta: &[f64],
    x: &[f64],
    weights: &[WeightVector],
    tau: f64,
) -> Result<(bool, f64)> {
    let dmp = inst.apply(theta)?;
    let front = Front::new(&dmp, weights)?;
    let s = front.slack(x, 0.0)?;
    Ok((s <= tau, s))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IdentConfig {
    /// Efficient points generated from θ̂.
    pub n_prime: usize,
    /// Weights used for the membership check.
    pub k_prime: usize,
    /// Absolute membership tolerance; None means 1e-3·(1 + ‖x‖) per point.
    pub tau: Option<f64>,
    /// Decision threshold on z_test.
    pub zeta: f64,
    /// Random ray starts besides θ̂ itself.
    pub starts: usize,
    /// Membership evaluations per start.
    pub max_evals: usize,
    /// Initial step, as a fraction of each coordinate's width (or of the
    /// objective's coefficients for scaling moves).
    pub initial_step: f64,
    pub min_step: f64,
    pub seed: u64,
}

impl Default for IdentConfig {
    fn default() -> Self {
        IdentConfig {
            n_prime: 200,
            k_prime: 200,
            tau: None,
            zeta: 1e-3,
            starts: 4,
            max_evals: 400,
            initial_step: 0.25,
            min_step: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifiabilityReport {
    pub z_test: f64,
    pub non_identifiable: bool,
    pub theta_hat: ParamVector,
    pub theta_far: ParamVector,
    /// max_i min_k ‖x_i − S(w_k, θ_far)‖, recomputed after the search.
    pub membership_slack: f64,
    /// Largest per-point tolerance in force.
    pub tolerance: f64,
    pub k: usize,
    pub n_prime: usize,
    pub k_prime: usize,
    pub evaluations: usize,
    pub accepted_moves: usize,
    /// z_test reached from each start, θ̂ first.
    pub start_values: Vec<f64>,
}

struct Problem<'a> {
    inst: &'a DmpInstance,
    theta_hat: &'a [f64],
    points: Vec<Vec<f64>>,
    tols: Vec<f64>,
    weights: Vec<WeightVector>,
}

impl Problem<'_> {
    fn l1(&self, theta: &[f64]) -> f64 {
        theta.iter().zip(self.theta_hat).map(|(a, b)| (a - b).abs()).sum()
    }

    /// Worst slack over the points, or None as soon as one fails.
    fn feasible(&self, theta: &[f64]) -> Result<Option<f64>> {
        let dmp = match self.inst.apply(theta) {
            Ok(d) => d,
            Err(_) => return Ok(None),
        };
        let front = match Front::new(&dmp, &self.weights) {
            Ok(f) => f,
            Err(_) => return Ok(None),
        };
        let mut worst: f64 = 0.0;
        for (x, &tol) in self.points.iter().zip(&self.tols) {
            let s = front.slack(x, tol)?;
            if s > tol {
                return Ok(None);
            }
            worst = worst.max(s);
        }
        Ok(Some(worst))
    }

    /// Worst slack without early exits, from a fresh set of solves.
    fn verify(&self, theta: &[f64]) -> Result<f64> {
        let dmp = self.inst.apply(theta)?;
        let fresh = front_points(&dmp, &self.weights)?;
        let mut worst: f64 = 0.0;
        for x in &self.points {
            let mut s = fresh.iter().map(|p| dist(x, p)).fold(f64::INFINITY, f64::min);
            for w in &self.weights {
                if s == 0.0 {
                    break;
                }
                s = s.min(distance_to_solution_set(&dmp, w, x)?);
            }
            worst = worst.max(s);
        }
        Ok(worst)
    }
}

/// Search directions in reduced coordinates: one per independent coordinate
/// (scaled by its width), plus the ray that scales the free coefficients of
/// each objective, when there are no normalisations.
fn directions(inst: &DmpInstance, reducer: &Reducer, theta_hat: &[f64]) -> Vec<Vec<f64>> {
    let space = &inst.space;
    let d = reducer.reduced_dim();
    let mut dirs: Vec<Vec<f64>> = (0..d)
        .map(|k| {
            let j = reducer.independent[k];
            let mut v = vec![0.0; d];
            v[k] = space.upper[j] - space.lower[j];
            v
        })
        .filter(|v| v.iter().any(|a| *a != 0.0))
        .collect();
    // Scaling an objective cannot keep a normalisation with nonzero rhs.
    if !space.normalizations.is_empty() {
        return dirs;
    }
    for l in 0..inst.p() {
        let full: Vec<f64> = inst
            .slots
            .iter()
            .zip(theta_hat)
            .map(|(s, t)| match s.target {
                SlotTarget::Linear { objective, .. } | SlotTarget::QuadDiag { objective, .. } if objective == l => *t,
                _ => 0.0,
            })
            .collect();
        if norm(&full) > 0.0 {
            dirs.push(full);
        }
    }
    dirs
}

struct Walk {
    theta: ParamVector,
    z: f64,
    evals: usize,
    accepted: usize,
}

/// Maximises ‖θ − θ̂‖₁ from a feasible start, accepting a move only if it
/// increases the distance, stays in Θ and passes the membership check.
fn climb(prob: &Problem, reducer: &Reducer, dirs: &[Vec<f64>], start: ParamVector, cfg: &IdentConfig) -> Result<Walk> {
    let space = &prob.inst.space;
    let mut t = reducer.reduce(&start);
    let mut walk = Walk { z: prob.l1(&start), theta: start, evals: 0, accepted: 0 };
    let mut step = cfg.initial_step;
    while step >= cfg.min_step && walk.evals < cfg.max_evals {
        let mut cands: Vec<(f64, Vec<f64>, ParamVector)> = Vec::new();
        for d in dirs {
            for sign in [1.0, -1.0] {
                let nt: Vec<f64> = t.iter().zip(d).map(|(a, b)| a + sign * step * b).collect();
                let th = reducer.expand(&nt);
                if space.max_violation(&th) > 1e-12 {
                    continue;
                }
                let z = prob.l1(&th);
                if z > walk.z + 1e-12 {
                    cands.push((z, nt, th));
                }
            }
        }
        cands.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut moved = false;
        for (z, nt, th) in cands {
            if walk.evals >= cfg.max_evals {
                break;
            }
            walk.evals += 1;
            if prob.feasible(&th)?.is_some() {
                t = nt;
                walk.theta = th;
                walk.z = z;
                walk.accepted += 1;
                moved = true;
                break;
            }
        }
        if moved {
            step *= 2.0;
        } else {
            step *= 0.5;
        }
    }
    Ok(walk)
}

/// Feasible point on a random ray from θ̂, found by halving the ray length.
fn ray_start<R: Rng>(
    prob: &Problem,
    reducer: &Reducer,
    rng: &mut R,
    evals: &mut usize,
) -> Result<Option<ParamVector>> {
    let space = &prob.inst.space;
    let t0 = reducer.reduce(prob.theta_hat);
    let dir: Vec<f64> = reducer
        .independent
        .iter()
        .map(|&j| (rng.random::<f64>() * 2.0 - 1.0) * (space.upper[j] - space.lower[j]))
        .collect();
    let mut len = 1.0;
    for _ in 0..12 {
        let th = reducer.expand(&t0.iter().zip(&dir).map(|(a, b)| a + len * b).collect::<Vec<_>>());
        if space.max_violation(&th) <= 1e-12 {
            *evals += 1;
            if prob.feasible(&th)?.is_some() {
                return Ok(Some(th));
            }
        }
        len *= 0.5;
    }
    Ok(None)
}

/// Searches for the parameter furthest from θ̂ (in L1) under which every
/// efficient point of θ̂ stays efficient. The result is a lower bound on the
/// exact optimum; `k` is the weight count of the upstream estimate and is
/// only recorded.
pub fn test_identifiability(
    inst: &DmpInstance,
    theta_hat: &[f64],
    k: usize,
    cfg: &IdentConfig,
) -> Result<IdentifiabilityReport> {
    if !inst.space.contains(theta_hat) {
        return Err(ImopError::InvalidParams("theta_hat lies outside the parameter space".into()));
    }
    if cfg.n_prime == 0 || cfg.k_prime == 0 {
        return Err(ImopError::InvalidArgument("weight sample sizes must be positive".into()));
    }
    if let Some(t) = cfg.tau {
        if !(t > 0.0) {
            return Err(ImopError::InvalidArgument("tau must be positive".into()));
        }
    }
    let p = inst.p();
    let dmp = inst.apply(theta_hat)?;
    let points = front_points(&dmp, &grid_weights(p, cfg.n_prime, cfg.seed)?)?;
    let tols: Vec<f64> = points.iter().map(|x| cfg.tau.unwrap_or(1e-3 * (1.0 + norm(x)))).collect();
    let prob = Problem { inst, theta_hat, points, tols, weights: grid_weights(p, cfg.k_prime, cfg.seed.wrapping_add(1))? };
    let reducer = Reducer::new(&inst.space)?;
    let dirs = directions(inst, &reducer, theta_hat);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut evaluations = 0;
    let mut accepted_moves = 0;
    let mut start_values = Vec::new();
    let mut best = Walk { theta: theta_hat.to_vec(), z: 0.0, evals: 0, accepted: 0 };
    let mut starts = vec![Some(theta_hat.to_vec())];
    for _ in 0..cfg.starts {
        starts.push(ray_start(&prob, &reducer, &mut rng, &mut evaluations)?);
    }
    for s in starts.into_iter().flatten() {
        let w = climb(&prob, &reducer, &dirs, s, cfg)?;
        evaluations += w.evals;
        accepted_moves += w.accepted;
        start_values.push(w.z);
        if w.z > best.z {
            best = w;
        }
    }

    // Independent re-check; a candidate that fails it is discarded.
    let mut slack = prob.verify(&best.theta)?;
    let limit = prob.tols.iter().copied().fold(0.0, f64::max);
    if slack > limit {
        log::warn!("far parameter failed re-verification (slack {slack:.3e}); reporting theta_hat");
        best.theta = theta_hat.to_vec();
        best.z = 0.0;
        slack = prob.verify(theta_hat)?;
    }
    Ok(IdentifiabilityReport {
        z_test: best.z,
        non_identifiable: best.z > cfg.zeta,
        theta_hat: theta_hat.to_vec(),
        theta_far: best.theta,
        membership_slack: slack,
        tolerance: limit,
        k,
        n_prime: cfg.n_prime,
        k_prime: cfg.k_prime,
        evaluations,
        accepted_moves,
        start_values,
    })
}
