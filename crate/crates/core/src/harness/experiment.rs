//! Estimation campaigns over grids of sample sizes N and weight counts K.

use std::fs::{self, File};
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::fixtures::{fixture, Fixture, FixtureId};
use super::{estimation_error, generate_observations, weight_histogram, DataLaw, Histogram, NoiseModel};
use crate::error::{ImopError, Result};
use crate::estimators::{
    brute_force_oracle, estimate_admm, estimate_clustering, AdmmConfig, AdmmResidual, ClusteringConfig, EstimateResult,
    EstimateStatus,
};
use crate::loss::{empirical_risk, monte_carlo_risk};
use crate::model::{DmpInstance, ParamVector};
use crate::solver::{front_points, grid_weights, WeightVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EstimatorSpec {
    Clustering {
        #[serde(default)]
        config: ClusteringConfig,
    },
    Admm {
        #[serde(default)]
        config: AdmmConfig,
        /// Observations per group; overrides `config.groups` when set.
        #[serde(default)]
        group_size: Option<usize>,
    },
    Oracle {
        resolution: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSpec {
    /// Size of the independent validation sample.
    pub validation: usize,
    /// Number of grid weights representing the estimated efficient set.
    pub reference_k: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub fixture: FixtureId,
    pub n: Vec<usize>,
    pub k: Vec<usize>,
    pub estimator: EstimatorSpec,
    #[serde(default = "one")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed: u64,
    /// Overrides the fixture's data law.
    #[serde(default)]
    pub law: Option<DataLaw>,
    /// Overrides the fixture's noise model.
    #[serde(default)]
    pub noise: Option<NoiseModel>,
    #[serde(default)]
    pub prediction: Option<PredictionSpec>,
    #[serde(default)]
    pub histogram_bins: Option<usize>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(ImopError::InvalidArgument("repetitions must be at least 1".into()));
        }
        if self.n.is_empty() || self.k.is_empty() || self.n.contains(&0) || self.k.contains(&0) {
            return Err(ImopError::InvalidArgument("N and K grids must be non-empty and positive".into()));
        }
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(ImopError::InvalidArgument("experiment name must be a plain file stem".into()));
        }
        if let Some(noise) = &self.noise {
            noise.validate()?;
        }
        if let Some(p) = &self.prediction {
            if p.validation == 0 || p.reference_k == 0 {
                return Err(ImopError::InvalidArgument("prediction sizes must be positive".into()));
            }
        }
        if let EstimatorSpec::Oracle { resolution } = self.estimator {
            if !(resolution > 0.0) {
                return Err(ImopError::InvalidArgument("oracle resolution must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One repetition of one (N, K) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepetitionRow {
    pub fixture: String,
    pub n: usize,
    pub k: usize,
    pub repetition: usize,
    pub seed: u64,
    /// Semicolon-separated θ̂.
    pub theta_hat: String,
    pub estimation_error: Option<f64>,
    pub prediction_error: Option<f64>,
    pub objective: Option<f64>,
    pub iterations: Option<usize>,
    pub status: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub n: usize,
    pub k: usize,
    pub runs: usize,
    pub failures: usize,
    pub estimation_mean: Option<f64>,
    pub estimation_sd: Option<f64>,
    pub prediction_mean: Option<f64>,
    pub prediction_sd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub n: usize,
    pub k: usize,
    pub repetition: usize,
    pub objectives: Vec<f64>,
    pub assignment_changes: Vec<usize>,
    pub residuals: Vec<AdmmResidual>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram: Option<Histogram>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub fixture: FixtureId,
    pub theta_true: ParamVector,
    pub rows: Vec<RepetitionRow>,
    pub cells: Vec<CellSummary>,
    pub traces: Vec<RunTrace>,
    /// Wall-clock seconds per row; kept out of the serialised report.
    #[serde(skip)]
    pub runtimes: Vec<f64>,
}

impl ExperimentReport {
    pub fn cell(&self, n: usize, k: usize) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.n == n && c.k == k)
    }
}

fn mean_sd(v: &[f64]) -> (Option<f64>, Option<f64>) {
    if v.is_empty() {
        return (None, None);
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    (Some(m), Some(sd))
}

/// Wraps the grid oracle's answer in the common result type.
fn oracle_result(inst: &DmpInstance, obs: &[Vec<f64>], weights: &[WeightVector], resolution: f64) -> Result<EstimateResult> {
    let o = brute_force_oracle(inst, obs, weights, resolution)?;
    let front = front_points(&inst.apply(&o.theta)?, weights)?;
    let (objective, assignment) = empirical_risk(obs, &front)?;
    Ok(EstimateResult {
        theta: o.theta,
        objective,
        assignment: assignment.clone(),
        front,
        trace: Vec::new(),
        assignment_changes: Vec::new(),
        assignment_history: vec![assignment],
        residuals: Vec::new(),
        iterations: 1,
        status: EstimateStatus::Converged,
        flags: Vec::new(),
    })
}

pub fn run_estimator(
    spec: &EstimatorSpec,
    inst: &DmpInstance,
    obs: &[Vec<f64>],
    weights: &[WeightVector],
    seed: u64,
) -> Result<EstimateResult> {
    match spec {
        EstimatorSpec::Clustering { config } => {
            estimate_clustering(inst, obs, weights, &ClusteringConfig { seed, ..config.clone() })
        }
        EstimatorSpec::Admm { config, group_size } => {
            let groups = match group_size {
                Some(g) if *g > 0 => (obs.len() / g).max(1),
                Some(_) => return Err(ImopError::InvalidArgument("group size must be positive".into())),
                None => config.groups.min(obs.len()).max(1),
            };
            estimate_admm(inst, obs, weights, &AdmmConfig { seed, groups, ..config.clone() })
        }
        EstimatorSpec::Oracle { resolution } => oracle_result(inst, obs, weights, *resolution),
    }
}

fn fmt_theta(t: &[f64]) -> String {
    t.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

struct Context {
    fx: Fixture,
    law: DataLaw,
    noise: NoiseModel,
    validation: Option<(Vec<WeightVector>, Vec<Vec<f64>>)>,
}

fn run_one(cfg: &ExperimentConfig, ctx: &Context, n: usize, k: usize, rep: usize) -> (RepetitionRow, Option<RunTrace>) {
    let seed = cfg.seed.wrapping_add(rep as u64);
    let mut row = RepetitionRow {
        fixture: cfg.fixture.as_str().to_string(),
        n,
        k,
        repetition: rep,
        seed,
        theta_hat: String::new(),
        estimation_error: None,
        prediction_error: None,
        objective: None,
        iterations: None,
        status: "failed".into(),
        message: String::new(),
    };
    let inst = &ctx.fx.instance;
    let attempt = || -> Result<(EstimateResult, Vec<WeightVector>)> {
        let (obs, _truth) = generate_observations(inst, &ctx.fx.theta_true, &ctx.law, &ctx.noise, n, seed)?;
        let weights = grid_weights(inst.p(), k, cfg.seed)?;
        let est = run_estimator(&cfg.estimator, inst, &obs.points, &weights, seed)?;
        Ok((est, weights))
    };
    match attempt() {
        Ok((est, weights)) => {
            row.theta_hat = fmt_theta(&est.theta);
            row.estimation_error = estimation_error(&est.theta, &ctx.fx.theta_true, ctx.fx.relative_error).ok();
            row.objective = Some(est.objective);
            row.iterations = Some(est.iterations);
            row.status = match est.status {
                EstimateStatus::Converged => "converged".into(),
                EstimateStatus::IterationCap => "iteration-cap".into(),
            };
            row.message = est.flags.join("; ");
            if let Some((ref_w, val)) = &ctx.validation {
                match monte_carlo_risk(inst, &est.theta, ref_w, val) {
                    Ok(v) => row.prediction_error = Some(v),
                    Err(e) => row.message = format!("prediction failed: {e}"),
                }
            }
            let histogram = match cfg.histogram_bins {
                Some(b) if inst.p() == 2 => weight_histogram(&weights, &est.assignment, b).ok(),
                _ => None,
            };
            let trace = RunTrace {
                n,
                k,
                repetition: rep,
                objectives: est.trace.iter().map(|t| t.objective).collect(),
                assignment_changes: est.assignment_changes.clone(),
                residuals: est.residuals.clone(),
                histogram,
            };
            (row, Some(trace))
        }
        Err(e) => {
            row.message = e.to_string();
            (row, None)
        }
    }
}

/// Runs every (N, K, repetition) in a fixed order. With `out_dir`, rows are
/// appended to `<name>.csv` as they finish and the pivot tables, JSON
/// summary, plot data and timings are written at the end.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<ExperimentReport> {
    cfg.validate()?;
    let fx = fixture(cfg.fixture)?;
    let law = cfg.law.clone().unwrap_or_else(|| fx.law.clone());
    let noise = cfg.noise.clone().unwrap_or_else(|| fx.noise.clone());
    noise.validate()?;
    let validation = match &cfg.prediction {
        Some(p) => {
            let (val, _) =
                generate_observations(&fx.instance, &fx.theta_true, &law, &noise, p.validation, cfg.seed ^ VALIDATION_SALT)?;
            Some((grid_weights(fx.instance.p(), p.reference_k, cfg.seed)?, val.points))
        }
        None => None,
    };
    let ctx = Context { fx, law, noise, validation };

    let mut csv = match out_dir {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            Some(csv::Writer::from_path(dir.join(format!("{}.csv", cfg.name)))?)
        }
        None => None,
    };
    let mut rows = Vec::new();
    let mut traces = Vec::new();
    let mut runtimes = Vec::new();
    for &n in &cfg.n {
        for &k in &cfg.k {
            for rep in 0..cfg.repetitions {
                let t0 = Instant::now();
                let (row, trace) = run_one(cfg, &ctx, n, k, rep);
                runtimes.push(t0.elapsed().as_secs_f64());
                log::info!("{} N={n} K={k} rep={rep}: error {:?} status {}", cfg.name, row.estimation_error, row.status);
                if let Some(w) = csv.as_mut() {
                    w.serialize(&row)?;
                    w.flush()?;
                }
                rows.push(row);
                traces.extend(trace);
            }
        }
    }

    let mut cells = Vec::new();
    for &n in &cfg.n {
        for &k in &cfg.k {
            let cell: Vec<&RepetitionRow> = rows.iter().filter(|r| r.n == n && r.k == k).collect();
            let est: Vec<f64> = cell.iter().filter_map(|r| r.estimation_error).collect();
            let pred: Vec<f64> = cell.iter().filter_map(|r| r.prediction_error).collect();
            let (em, es) = mean_sd(&est);
            let (pm, ps) = mean_sd(&pred);
            cells.push(CellSummary {
                n,
                k,
                runs: cell.len(),
                failures: cell.iter().filter(|r| r.status == "failed").count(),
                estimation_mean: em,
                estimation_sd: es,
                prediction_mean: pm,
                prediction_sd: ps,
            });
        }
    }
    let report = ExperimentReport {
        name: cfg.name.clone(),
        fixture: cfg.fixture,
        theta_true: ctx.fx.theta_true.clone(),
        rows,
        cells,
        traces,
        runtimes,
    };
    if let Some(dir) = out_dir {
        write_outputs(cfg, &report, dir)?;
    }
    Ok(report)
}

const VALIDATION_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

fn pivot(cfg: &ExperimentConfig, report: &ExperimentReport, pick: impl Fn(&CellSummary) -> Option<f64>) -> String {
    let mut s = String::from("K\\N");
    for n in &cfg.n {
        s.push_str(&format!(",{n}"));
    }
    s.push('\n');
    for &k in &cfg.k {
        s.push_str(&k.to_string());
        for &n in &cfg.n {
            let v = report.cell(n, k).and_then(&pick);
            s.push(',');
            if let Some(v) = v {
                s.push_str(&format!("{v:.6}"));
            }
        }
        s.push('\n');
    }
    s
}

fn write_outputs(cfg: &ExperimentConfig, report: &ExperimentReport, dir: &Path) -> Result<()> {
    let name = &cfg.name;
    fs::write(dir.join(format!("{name}_table.csv")), pivot(cfg, report, |c| c.estimation_mean))?;
    if cfg.prediction.is_some() {
        fs::write(dir.join(format!("{name}_prediction_table.csv")), pivot(cfg, report, |c| c.prediction_mean))?;
    }
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    fs::write(dir.join(format!("{name}.json")), json)?;

    let mut residuals = String::new();
    let mut assignments = String::new();
    let mut histograms = String::new();
    for t in &report.traces {
        let header = format!("# N={} K={} repetition={}\n", t.n, t.k, t.repetition);
        if !t.residuals.is_empty() {
            residuals.push_str(&header);
            residuals.push_str("# iteration primal dual\n");
            for r in &t.residuals {
                residuals.push_str(&format!("{} {:e} {:e}\n", r.iteration, r.primal, r.dual));
            }
            residuals.push_str("\n\n");
        }
        if !t.assignment_changes.is_empty() {
            assignments.push_str(&header);
            assignments.push_str("# iteration changes\n");
            for (i, c) in t.assignment_changes.iter().enumerate() {
                assignments.push_str(&format!("{} {}\n", i + 1, c));
            }
            assignments.push_str("\n\n");
        }
        if let Some(h) = &t.histogram {
            histograms.push_str(&header);
            histograms.push_str(&format!("# mean {:.6} sd {:.6}\n# bin_centre count\n", h.mean, h.sd));
            for (b, c) in h.counts.iter().enumerate() {
                histograms.push_str(&format!("{:.6} {}\n", 0.5 * (h.edges[b] + h.edges[b + 1]), c));
            }
            histograms.push_str("\n\n");
        }
    }
    for (suffix, body) in [("residuals", residuals), ("assignments", assignments), ("histogram", histograms)] {
        if !body.is_empty() {
            fs::write(dir.join(format!("{name}_{suffix}.dat")), body)?;
        }
    }

    let mut f = File::create(dir.join(format!("{name}_timings.csv")))?;
    writeln!(f, "n,k,repetition,seconds")?;
    for (r, t) in report.rows.iter().zip(&report.runtimes) {
        writeln!(f, "{},{},{},{:.3}", r.n, r.k, r.repetition, t)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig::from_json(
            r#"{"name":"t","fixture":"mqp-rhs","n":[6],"k":[6],
                "estimator":{"kind":"clustering","config":{"kmeans_restarts":5,"fit":{"random_starts":1}}},
                "repetitions":1,"seed":3}"#,
        )
        .unwrap()
    }

    #[test]
    fn config_rejects_bad_values() {
        assert!(ExperimentConfig::from_json(r#"{"name":"t","fixture":"mqp-rhs","n":[],"k":[6],"estimator":{"kind":"oracle","resolution":0.1}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"name":"t","fixture":"nope","n":[5],"k":[6],"estimator":{"kind":"oracle","resolution":0.1}}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"name":"t","fixture":"mqp-rhs","n":[5],"k":[6],"repetitions":0,"estimator":{"kind":"oracle","resolution":0.1}}"#).is_err());
    }

    #[test]
    fn single_repetition_aggregates_equal_row() {
        let r = run_experiment(&small(), None).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.cells[0].estimation_mean, r.rows[0].estimation_error);
        assert_eq!(r.cells[0].estimation_sd, Some(0.0));
    }

    #[test]
    fn outputs_are_deterministic() {
        let cfg = small();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run_experiment(&cfg, Some(a.path())).unwrap();
        run_experiment(&cfg, Some(b.path())).unwrap();
        for f in ["t.csv", "t.json", "t_table.csv", "t_assignments.dat"] {
            assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
        }
    }
}
