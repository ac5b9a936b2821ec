use std::fs;
use std::path::{Path, PathBuf};

use imop_core::harness::fixtures::mlp_reported_estimate;
use imop_core::harness::{fixture, generate_observations, intro_demo as run_intro, run_experiment, ExperimentConfig, FixtureId};
use imop_core::identifiability::{test_identifiability, IdentConfig};
use imop_core::reform::{
    build_single_level_mlp, build_single_level_mqp_rhs, build_test_problem, check_feasible, efficient_points,
    export_model as write_model, lp_file_name, plug_in_mlp, plug_in_mqp_rhs, plug_in_test_problem, BigMConfig,
};
use imop_core::solver::{grid_weights, solve_wp};
use imop_core::{ImopError, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::Global;

fn read_config<T: DeserializeOwned>(g: &Global) -> Result<T> {
    let path = g.config.as_ref().ok_or_else(|| ImopError::InvalidArgument("--config is required".into()))?;
    let text = fs::read_to_string(path)
        .map_err(|e| ImopError::InvalidArgument(format!("cannot read config {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

fn write_json(dir: &Path, file: String, value: &impl Serialize) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(file);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

fn display(paths: &[PathBuf]) -> Vec<String> {
    paths.iter().map(|p| p.display().to_string()).collect()
}

/// A parameter vector given literally or by name ("true", or "reported" for
/// the published MLP estimate).
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum ThetaChoice {
    Named(String),
    Values(Vec<f64>),
}

fn resolve_theta(choice: Option<&ThetaChoice>, id: FixtureId, truth: &[f64]) -> Result<Vec<f64>> {
    match choice {
        None => Ok(truth.to_vec()),
        Some(ThetaChoice::Values(v)) => Ok(v.clone()),
        Some(ThetaChoice::Named(s)) if s == "true" => Ok(truth.to_vec()),
        Some(ThetaChoice::Named(s)) if s == "reported" && id == FixtureId::MlpTriobj => Ok(mlp_reported_estimate()),
        Some(ThetaChoice::Named(s)) => Err(ImopError::InvalidArgument(format!("unknown parameter vector '{s}'"))),
    }
}

fn default_k() -> usize {
    11
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ForwardConfig {
    #[serde(default)]
    name: Option<String>,
    fixture: FixtureId,
    #[serde(default)]
    theta: Option<ThetaChoice>,
    /// Explicit weights; otherwise a grid of `k` weights.
    #[serde(default)]
    weights: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_k")]
    k: usize,
    #[serde(default)]
    seed: u64,
}

#[derive(Serialize)]
struct ForwardRow {
    weight: Vec<f64>,
    x: Vec<f64>,
    objectives: Vec<f64>,
    ineq_mult: Vec<f64>,
    eq_mult: Vec<f64>,
    unique: bool,
}

pub fn forward(g: &Global) -> Result<Value> {
    let cfg: ForwardConfig = read_config(g)?;
    let fx = fixture(cfg.fixture)?;
    let theta = resolve_theta(cfg.theta.as_ref(), cfg.fixture, &fx.theta_true)?;
    let dmp = fx.instance.apply(&theta)?;
    let weights = match cfg.weights {
        Some(w) => w,
        None => grid_weights(dmp.p(), cfg.k, g.seed.unwrap_or(cfg.seed))?,
    };
    let mut rows = Vec::with_capacity(weights.len());
    for w in weights {
        let s = solve_wp(&dmp, &w)?;
        rows.push(ForwardRow {
            objectives: dmp.objective_values(&s.x),
            weight: w,
            x: s.x,
            ineq_mult: s.ineq_mult,
            eq_mult: s.eq_mult,
            unique: s.unique,
        });
    }
    let name = cfg.name.unwrap_or_else(|| cfg.fixture.as_str().to_string());
    let out = write_json(
        &g.out,
        format!("{name}_forward.json"),
        &json!({ "fixture": cfg.fixture, "theta": theta, "solutions": rows }),
    )?;
    Ok(json!({ "outputs": display(&[out]), "solutions": rows.len() }))
}

/// `single` restricts the config to one (N, K) cell.
pub fn estimate(g: &Global, single: bool) -> Result<Value> {
    let mut cfg: ExperimentConfig = read_config(g)?;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    if single && (cfg.n.len() != 1 || cfg.k.len() != 1) {
        return Err(ImopError::InvalidArgument("estimate takes one N and one K; use replicate for grids".into()));
    }
    let report = run_experiment(&cfg, Some(&g.out))?;
    let outputs = [format!("{}.csv", cfg.name), format!("{}.json", cfg.name), format!("{}_table.csv", cfg.name)]
        .map(|f| g.out.join(f));
    let failures: usize = report.cells.iter().map(|c| c.failures).sum();
    let mut value = json!({ "outputs": display(&outputs), "rows": report.rows.len(), "failures": failures });
    if single {
        let row = &report.rows[0];
        value["theta_hat"] = json!(row.theta_hat);
        value["estimation_error"] = json!(row.estimation_error);
    }
    Ok(value)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct IdentFileConfig {
    #[serde(default)]
    name: Option<String>,
    fixture: FixtureId,
    #[serde(default)]
    theta_hat: Option<ThetaChoice>,
    #[serde(default = "default_k")]
    k: usize,
    #[serde(default)]
    ident: IdentConfig,
}

pub fn test_ident(g: &Global) -> Result<Value> {
    let mut cfg: IdentFileConfig = read_config(g)?;
    if let Some(s) = g.seed {
        cfg.ident.seed = s;
    }
    let fx = fixture(cfg.fixture)?;
    let theta_hat = resolve_theta(cfg.theta_hat.as_ref(), cfg.fixture, &fx.theta_true)?;
    let report = test_identifiability(&fx.instance, &theta_hat, cfg.k, &cfg.ident)?;
    let name = cfg.name.unwrap_or_else(|| cfg.fixture.as_str().to_string());
    let out = write_json(&g.out, format!("{name}_ident.json"), &report)?;
    Ok(json!({
        "outputs": display(&[out]),
        "z_test": report.z_test,
        "non_identifiable": report.non_identifiable,
    }))
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
enum ModelKind {
    Mlp,
    MqpRhs,
    TestProblem,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExportConfig {
    #[serde(default)]
    name: Option<String>,
    fixture: FixtureId,
    model: ModelKind,
    /// Observations (or efficient points for the test problem).
    n: usize,
    k: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    big_m: BigMConfig,
    /// θ̂ of the test problem; the plug-in check always uses it.
    #[serde(default)]
    theta_hat: Option<ThetaChoice>,
}

pub fn export_model(g: &Global) -> Result<Value> {
    let cfg: ExportConfig = read_config(g)?;
    let seed = g.seed.unwrap_or(cfg.seed);
    let fx = fixture(cfg.fixture)?;
    let inst = &fx.instance;
    let weights = grid_weights(inst.p(), cfg.k, seed)?;
    let (model, point) = match cfg.model {
        ModelKind::Mlp | ModelKind::MqpRhs => {
            let (obs, _) = generate_observations(inst, &fx.theta_true, &fx.law, &fx.noise, cfg.n, seed)?;
            if cfg.model == ModelKind::Mlp {
                let m = build_single_level_mlp(inst, &obs.points, &weights, &cfg.big_m)?;
                (m, plug_in_mlp(inst, &fx.theta_true, &obs.points, &weights)?)
            } else {
                let m = build_single_level_mqp_rhs(inst, &obs.points, &weights, &cfg.big_m)?;
                (m, plug_in_mqp_rhs(inst, &fx.theta_true, &obs.points, &weights)?)
            }
        }
        ModelKind::TestProblem => {
            let theta_hat = resolve_theta(cfg.theta_hat.as_ref(), cfg.fixture, &fx.theta_true)?;
            let points = efficient_points(inst, &theta_hat, &grid_weights(inst.p(), cfg.n, seed)?)?;
            let m = build_test_problem(inst, &theta_hat, &points, &weights, &cfg.big_m)?;
            let point = plug_in_test_problem(inst, &theta_hat, &theta_hat, &points, &weights)?;
            (m, point)
        }
    };
    let check = check_feasible(&model, &point)?;
    let name = cfg.name.unwrap_or_else(|| cfg.fixture.as_str().to_string());
    fs::create_dir_all(&g.out)?;
    let lp = g.out.join(lp_file_name(&name, cfg.n, cfg.k));
    write_model(&model, &lp)?;
    let summary = json!({
        "model": model.name,
        "variables": model.variables.len(),
        "binaries": model.binaries(),
        "rows": model.rows.len(),
        "big_m": model.big_m,
        "plug_in_pass": check.pass,
        "plug_in_max_violation": check.max_violation,
        "plug_in_objective": check.objective,
    });
    let check_path = write_json(&g.out, format!("{name}_{}_{}_check.json", cfg.n, cfg.k), &summary)?;
    Ok(json!({
        "outputs": display(&[lp, check_path]),
        "variables": model.variables.len(),
        "rows": model.rows.len(),
        "plug_in_pass": check.pass,
    }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct IntroConfig {
    a: f64,
    b: f64,
    c: f64,
    samples: usize,
    k: usize,
    tau: f64,
    seed: u64,
}

impl Default for IntroConfig {
    fn default() -> Self {
        IntroConfig { a: 6.0, b: 1.0, c: 1.0, samples: 2000, k: 41, tau: 1e-2, seed: 0 }
    }
}

/// The only subcommand whose config is optional.
pub fn intro_demo(g: &Global) -> Result<Value> {
    let mut cfg: IntroConfig = if g.config.is_some() { read_config(g)? } else { IntroConfig::default() };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    let report = run_intro(cfg.a, cfg.b, cfg.c, cfg.samples, cfg.k, cfg.tau, cfg.seed)?;
    let out = write_json(&g.out, "intro_demo.json".into(), &report)?;
    Ok(json!({
        "outputs": display(&[out]),
        "mean": report.mean,
        "efficient_fraction": report.efficient_fraction,
    }))
}
