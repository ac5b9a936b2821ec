//! Consensus ADMM (scaled form) over disjoint observation groups.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{inner_fit, FitConfig, Prox, Targets};
use super::{EstimateResult, EstimateStatus, Step, TraceEntry};
use crate::error::{ImopError, Result};
use crate::linalg::{norm, sq_dist};
use crate::loss::empirical_risk;
use crate::model::{DmpInstance, ParamVector};
use crate::solver::{front_points, WeightVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdmmConfig {
    /// Number of groups T. Observations are split into contiguous blocks.
    pub groups: usize,
    pub rho: f64,
    pub tolerance: f64,
    pub max_iter: usize,
    /// Global starting point; may lie outside the parameter space.
    pub theta0: Option<ParamVector>,
    pub seed: u64,
    pub fit: FitConfig,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        AdmmConfig {
            groups: 1,
            rho: 0.5,
            tolerance: 1e-3,
            max_iter: 100,
            theta0: None,
            seed: 0,
            fit: FitConfig { random_starts: 0, min_step: 1e-6, ..FitConfig::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmmResidual {
    pub iteration: usize,
    pub primal: f64,
    pub dual: f64,
    /// Local iterates θᵗ after this iteration's updates, so the residuals
    /// can be recomputed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub locals: Vec<ParamVector>,
}

fn mean(vs: &[ParamVector]) -> ParamVector {
    let d = vs[0].len();
    let mut m = vec![0.0; d];
    for v in vs {
        for (a, b) in m.iter_mut().zip(v) {
            *a += b;
        }
    }
    m.iter().map(|a| a / vs.len() as f64).collect()
}

pub fn estimate_admm(
    inst: &DmpInstance,
    obs: &[Vec<f64>],
    weights: &[WeightVector],
    cfg: &AdmmConfig,
) -> Result<EstimateResult> {
    if obs.is_empty() || weights.is_empty() {
        return Err(ImopError::InvalidArgument("need observations and weights".into()));
    }
    if cfg.groups == 0 || cfg.groups > obs.len() {
        return Err(ImopError::InvalidArgument(format!(
            "group count {} must lie in 1..={}",
            cfg.groups,
            obs.len()
        )));
    }
    if !(cfg.rho > 0.0) {
        return Err(ImopError::InvalidArgument("rho must be positive".into()));
    }
    let t_count = cfg.groups;
    let size = obs.len() / t_count;
    let groups: Vec<&[Vec<f64>]> = (0..t_count)
        .map(|t| {
            let start = t * size;
            let end = if t + 1 == t_count { obs.len() } else { start + size };
            &obs[start..end]
        })
        .collect();

    let d = inst.num_params();
    let mut theta = match &cfg.theta0 {
        Some(t) if t.len() == d => t.clone(),
        Some(_) => return Err(ImopError::InvalidParams("theta0 has wrong length".into())),
        None => inst.space.center()?,
    };
    let mut locals: Vec<ParamVector> = vec![inst.space.project(&theta)?; t_count];
    let mut duals: Vec<ParamVector> = vec![vec![0.0; d]; t_count];
    let mut bar_prev = theta.clone();
    let mut residuals = Vec::new();
    let mut trace = Vec::new();
    let mut status = EstimateStatus::IterationCap;
    let mut iterations = 0;
    let mut flags = Vec::new();

    for k in 1..=cfg.max_iter {
        iterations = k;
        let updates: Vec<Result<(ParamVector, bool)>> = (0..t_count)
            .into_par_iter()
            .map(|t| {
                let center: ParamVector = theta.iter().zip(&duals[t]).map(|(a, b)| a - b).collect();
                let targets = Targets {
                    points: groups[t].to_vec(),
                    counts: vec![1.0; groups[t].len()],
                    normalizer: 1.0,
                };
                let prox = Prox { center: center.clone(), rho: cfg.rho };
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ ((k as u64) << 32) ^ t as u64);
                let starts = vec![locals[t].clone(), center];
                let r = inner_fit(inst, weights, &targets, Some(&prox), &starts, &cfg.fit, &mut rng)?;
                Ok((r.theta, r.capped))
            })
            .collect();
        for (t, u) in updates.into_iter().enumerate() {
            let (th, capped) = u?;
            if capped {
                flags.push(format!("local fit {t} at iteration {k} hit its evaluation cap"));
            }
            locals[t] = th;
        }
        let bar = mean(&locals);
        let shifted: Vec<ParamVector> =
            locals.iter().zip(&duals).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect()).collect();
        theta = mean(&shifted);
        for t in 0..t_count {
            for j in 0..d {
                duals[t][j] += locals[t][j] - theta[j];
            }
        }
        let primal = locals.iter().map(|l| sq_dist(l, &bar)).sum::<f64>().sqrt();
        let diff: Vec<f64> = bar.iter().zip(&bar_prev).map(|(a, b)| a - b).collect();
        let dual = (t_count as f64).sqrt() * cfg.rho * norm(&diff);
        residuals.push(AdmmResidual { iteration: k, primal, dual, locals: locals.clone() });
        bar_prev = bar.clone();

        let front = front_points(&inst.apply(&bar)?, weights)?;
        trace.push(TraceEntry { iteration: k, step: Step::Update, objective: empirical_risk(obs, &front)?.0 });

        if primal < cfg.tolerance && dual < cfg.tolerance {
            status = EstimateStatus::Converged;
            break;
        }
        if k > 20 {
            let old = residuals[k - 21].primal;
            if old > 0.0 && primal > 10.0 * old && primal > 10.0 * cfg.tolerance {
                return Err(ImopError::Diverged(format!(
                    "primal residual grew from {old:.3e} to {primal:.3e} over 20 iterations"
                )));
            }
        }
    }

    let theta_hat = mean(&locals);
    let front = front_points(&inst.apply(&theta_hat)?, weights)?;
    let (objective, assignment) = empirical_risk(obs, &front)?;
    Ok(EstimateResult {
        theta: theta_hat,
        objective,
        assignment: assignment.clone(),
        front,
        trace,
        assignment_changes: Vec::new(),
        assignment_history: vec![assignment],
        residuals,
        iterations,
        status,
        flags,
    })
}
