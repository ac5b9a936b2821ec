//! Clustering estimator: alternate nearest-point assignment of the
//! observations with a refit of θ on the assignment's cluster centroids.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fit::{inner_fit, FitConfig, Targets};
use super::kkt::kkt_init;
use super::kmeans::kmeans;
use super::{EstimateResult, EstimateStatus, Step, TraceEntry};
use crate::error::{ImopError, Result};
use crate::loss::{clusters, empirical_risk, nearest};
use crate::model::{DmpInstance, ParamVector};
use crate::solver::{front_points, WeightVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Init {
    KMeansPlusPlus,
    Kkt,
    Provided { theta: ParamVector },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusteringConfig {
    pub init: Init,
    pub max_outer: usize,
    pub kmeans_restarts: usize,
    pub kkt_alternations: usize,
    pub seed: u64,
    pub fit: FitConfig,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        ClusteringConfig {
            init: Init::KMeansPlusPlus,
            max_outer: 5,
            kmeans_restarts: 50,
            kkt_alternations: 10,
            seed: 0,
            fit: FitConfig::default(),
        }
    }
}

fn check_inputs(inst: &DmpInstance, obs: &[Vec<f64>], weights: &[WeightVector]) -> Result<()> {
    if obs.is_empty() {
        return Err(ImopError::InvalidArgument("no observations".into()));
    }
    if weights.is_empty() {
        return Err(ImopError::InvalidArgument("no weights".into()));
    }
    let n = inst.n();
    if obs.iter().any(|y| y.len() != n || y.iter().any(|v| !v.is_finite())) {
        return Err(ImopError::InvalidArgument("observation has wrong dimension or non-finite entries".into()));
    }
    for w in weights {
        crate::solver::validate_weight(w, inst.p())?;
    }
    Ok(())
}

pub fn estimate_clustering(
    inst: &DmpInstance,
    obs: &[Vec<f64>],
    weights: &[WeightVector],
    cfg: &ClusteringConfig,
) -> Result<EstimateResult> {
    check_inputs(inst, obs, weights)?;
    let n_obs = obs.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut flags = Vec::new();
    let mut trace = Vec::new();

    // K-means on the raw observations: initial clusters and kkt targets.
    let km = kmeans(obs, weights.len(), cfg.kmeans_restarts, cfg.seed);
    let km_counts: Vec<f64> = km.counts.iter().map(|&c| c as f64).collect();
    let theta_kkt = kkt_init(inst, &km.centroids, &km_counts, weights, cfg.kkt_alternations, &cfg.fit)?;

    let (mut theta, mut prev_assign) = match &cfg.init {
        Init::KMeansPlusPlus => {
            let targets = Targets { points: km.centroids.clone(), counts: km_counts.clone(), normalizer: n_obs };
            let starts = vec![inst.space.center()?, theta_kkt.clone()];
            let fit = inner_fit(inst, weights, &targets, None, &starts, &cfg.fit, &mut rng)?;
            if fit.capped {
                flags.push("initial fit hit its evaluation cap".to_string());
            }
            let var = km.sse / n_obs;
            trace.push(TraceEntry { iteration: 0, step: Step::Init, objective: fit.value + var });
            // Implied assignment: each observation follows its centroid's nearest front point.
            let front = front_points(&inst.apply(&fit.theta)?, weights)?;
            let map: Vec<usize> = km.centroids.iter().map(|c| nearest(c, &front).0).collect();
            let implied = km.labels.iter().map(|&l| map[l]).collect::<Vec<_>>();
            (fit.theta, Some(implied))
        }
        Init::Kkt => (theta_kkt.clone(), None),
        Init::Provided { theta } => {
            if !inst.space.contains(theta) {
                return Err(ImopError::InvalidParams("provided initial θ is outside the parameter space".into()));
            }
            (theta.clone(), None)
        }
    };

    let mut history: Vec<Vec<usize>> = Vec::new();
    let mut changes = Vec::new();
    let mut status = EstimateStatus::IterationCap;
    let mut iterations = 0;
    for it in 1..=cfg.max_outer.max(1) {
        iterations = it;
        let front = front_points(&inst.apply(&theta)?, weights)?;
        let (m, assign) = empirical_risk(obs, &front)?;
        trace.push(TraceEntry { iteration: it, step: Step::Assign, objective: m });
        let changed = match &prev_assign {
            Some(p) => p.iter().zip(&assign).filter(|(a, b)| a != b).count(),
            None => assign.len(),
        };
        changes.push(changed);
        history.push(assign.clone());
        if prev_assign.is_some() && changed == 0 {
            status = EstimateStatus::Converged;
            break;
        }
        // Update step on the clusters of this assignment.
        let cl = clusters(obs, &assign, weights.len())?;
        let var: f64 = cl.iter().map(|c| c.count as f64 * c.variance).sum::<f64>() / n_obs;
        let targets = Targets {
            points: cl.iter().map(|c| c.centroid.clone()).collect(),
            counts: cl.iter().map(|c| c.count as f64).collect(),
            normalizer: n_obs,
        };
        let starts = vec![theta.clone(), theta_kkt.clone()];
        let fit = inner_fit(inst, weights, &targets, None, &starts, &cfg.fit, &mut rng)?;
        if fit.capped {
            flags.push(format!("inner fit at iteration {it} hit its evaluation cap"));
        }
        trace.push(TraceEntry { iteration: it, step: Step::Update, objective: fit.value + var });
        theta = fit.theta;
        prev_assign = Some(assign);
    }

    let front = front_points(&inst.apply(&theta)?, weights)?;
    let (objective, assignment) = empirical_risk(obs, &front)?;
    if status == EstimateStatus::IterationCap {
        trace.push(TraceEntry { iteration: iterations + 1, step: Step::Assign, objective });
        let changed = prev_assign.as_ref().map_or(assignment.len(), |p| {
            p.iter().zip(&assignment).filter(|(a, b)| a != b).count()
        });
        changes.push(changed);
        history.push(assignment.clone());
        if changed == 0 {
            status = EstimateStatus::Converged;
        }
    }
    debug_assert!(inst.space.contains(&theta));
    Ok(EstimateResult {
        theta,
        objective,
        assignment,
        front,
        trace,
        assignment_changes: changes,
        assignment_history: history,
        residuals: Vec::new(),
        iterations,
        status,
        flags,
    })
}
