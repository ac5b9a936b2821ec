//! End-to-end acceptance criteria. Runs as a plain binary so each criterion
//! prints exactly one PASS/FAIL line. Pass substrings to run a subset:
//! `cargo test --release --test acceptance -- ac4 ac9`.

use std::path::PathBuf;
use std::time::Instant;

use imop_core::builders::{build_mqp, MaskEntry};
use imop_core::estimators::{brute_force_oracle, estimate_admm, estimate_clustering, AdmmConfig, ClusteringConfig};
use imop_core::harness::experiment::run_estimator;
use imop_core::harness::fixtures::{
    example_instance, mlp_reported_estimate, EXAMPLE1_THETA, EXAMPLE2_THETA,
};
use imop_core::harness::{
    estimation_error, fixture, generate_observations, intro_demo, run_experiment, weight_histogram, EstimatorSpec,
    ExperimentConfig, FixtureId,
};
use imop_core::identifiability::{test_identifiability, IdentConfig};
use imop_core::linalg::{l1_dist, sq_dist};
use imop_core::loss::{decompose, empirical_risk, monte_carlo_risk};
use imop_core::reform::{
    build_single_level_mlp, build_single_level_mqp_rhs, build_test_problem, check_feasible, efficient_points,
    plug_in_mlp, plug_in_mqp_rhs, plug_in_test_problem, write_lp, BigMConfig, MipModel,
};
use imop_core::solver::{grid_weights, solve_wp};
use imop_core::{Constraints, Result, SlotTarget};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { pass, detail })
}

/// Criteria that are implemented as stated and are known not to be met.
const UNMET: &[&str] = &["ac8"];

// Closed-form weighted-sum solutions of the two examples over x2 ≤ 3,
// 3x1 − x2 ≤ 6, x ≥ 0, with w the weight on the first objective.
fn example1_solution(w: f64) -> [f64; 2] {
    let x1 = if w <= 2.0 / 3.0 { (6.0 - 9.0 * w) / (2.0 - w) } else { 0.0 };
    let x2 = if w <= 2.0 / 9.0 {
        3.0
    } else if w <= 5.0 / 6.0 {
        (5.0 - 6.0 * w) / (1.0 + w)
    } else {
        0.0
    };
    [x1, x2]
}

fn example2_solution(w: f64) -> [f64; 2] {
    let x1 = if w <= 0.8 { (36.0 - 45.0 * w) / (12.0 - 5.0 * w) } else { 0.0 };
    let x2 = if w <= 4.0 / 15.0 { 3.0 } else { ((30.0 - 30.0 * w) / (6.0 + 5.0 * w)).max(0.0) };
    [x1, x2]
}

fn ac1() -> Result<Verdict> {
    let inst = example_instance()?;
    let (d1, d2) = (inst.apply(&EXAMPLE1_THETA)?, inst.apply(&EXAMPLE2_THETA)?);
    let (mut worst_closed, mut worst_pair) = (0.0f64, 0.0f64);
    for i in 0..=100 {
        let w = i as f64 / 100.0;
        let x = solve_wp(&d1, &[w, 1.0 - w])?.x;
        let c = example1_solution(w);
        worst_closed = worst_closed.max((x[0] - c[0]).abs()).max((x[1] - c[1]).abs());
        let y = solve_wp(&d2, &[w, 1.0 - w])?.x;
        let c2 = example2_solution(w);
        worst_closed = worst_closed.max((y[0] - c2[0]).abs()).max((y[1] - c2[1]).abs());
        if w <= 5.0 / 6.0 {
            let w2 = 1.2 * w;
            let z = solve_wp(&d2, &[w2, 1.0 - w2])?.x;
            worst_pair = worst_pair.max((x[0] - z[0]).abs()).max((x[1] - z[1]).abs());
        }
    }
    verdict(
        worst_closed <= 1e-6 && worst_pair <= 1e-6,
        format!("max closed-form gap {worst_closed:.2e}, max gap Example 1 at w vs Example 2 at 1.2w {worst_pair:.2e}"),
    )
}

fn ac2() -> Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let dim = rng.random_range(1..6);
        let n = rng.random_range(1..80);
        let k = rng.random_range(1..25);
        let mut point = |s: f64| -> Vec<f64> { (0..dim).map(|_| s * (rng.random::<f64>() - 0.5)).collect() };
        let front: Vec<Vec<f64>> = (0..k).map(|_| point(10.0)).collect();
        let obs: Vec<Vec<f64>> = (0..n).map(|_| point(12.0)).collect();
        let (risk, assignment) = empirical_risk(&obs, &front)?;
        // independent brute force: every observation against every front point
        let brute = obs.iter().map(|y| front.iter().map(|x| sq_dist(y, x)).fold(f64::INFINITY, f64::min)).sum::<f64>()
            / n as f64;
        let total = decompose(&obs, &assignment, &front)?.total();
        worst = worst.max((risk - total).abs()).max((risk - brute).abs());
    }
    verdict(worst <= 1e-9, format!("max |risk - decomposition| over 100 instances {worst:.2e}"))
}

fn ac3() -> Result<Verdict> {
    let fx = fixture(FixtureId::MqpRhs)?;
    let weights = grid_weights(2, 41, 0)?;
    let (mut worst_rise, mut max_iter, mut unstable) = (0.0f64, 0, 0);
    let mut pattern = Vec::new();
    for seed in 0..50u64 {
        let (obs, _) = generate_observations(&fx.instance, &fx.theta_true, &fx.law, &fx.noise, 150, seed)?;
        let est = estimate_clustering(&fx.instance, &obs.points, &weights, &ClusteringConfig { seed, ..Default::default() })?;
        for pair in est.trace.windows(2) {
            worst_rise = worst_rise.max(pair[1].objective - pair[0].objective);
        }
        max_iter = max_iter.max(est.iterations);
        if est.assignment_changes.last().copied().unwrap_or(0) != 0 {
            unstable += 1;
        }
        if seed == 0 {
            pattern = est.assignment_changes.clone();
        }
    }
    verdict(
        worst_rise <= 1e-9 && max_iter <= 5 && unstable == 0,
        format!(
            "largest objective increase {worst_rise:.2e}, most outer iterations {max_iter}, runs still changing at the end {unstable}/50, seed 0 changes {pattern:?}"
        ),
    )
}

fn table2_config(n: usize, k: usize) -> ExperimentConfig {
    ExperimentConfig {
        name: format!("rhs_{n}_{k}"),
        fixture: FixtureId::MqpRhs,
        n: vec![n],
        k: vec![k],
        estimator: EstimatorSpec::Clustering { config: ClusteringConfig::default() },
        repetitions: 10,
        seed: 0,
        law: None,
        noise: None,
        prediction: None,
        histogram_bins: None,
    }
}

fn ac4() -> Result<Verdict> {
    let big = run_experiment(&table2_config(150, 41), None)?;
    let small = run_experiment(&table2_config(5, 6), None)?;
    let (b, s) = (big.cells[0].estimation_mean.unwrap_or(f64::NAN), small.cells[0].estimation_mean.unwrap_or(f64::NAN));
    verdict(b <= 0.25 && 3.0 * b <= s, format!("mean error N=150,K=41 {b:.4}; N=5,K=6 {s:.4}; ratio {:.1}", s / b))
}

fn ac5() -> Result<Verdict> {
    let fx = fixture(FixtureId::MqpObj)?;
    let (val, _) = generate_observations(&fx.instance, &fx.theta_true, &fx.law, &fx.noise, 100_000, 5)?;
    let m = monte_carlo_risk(&fx.instance, &fx.theta_true, &grid_weights(2, 10_000, 0)?, &val.points)?;
    let rel = (m - 0.022742).abs() / 0.022742;
    verdict(rel <= 0.15, format!("M(theta_true) = {m:.6}, relative gap {rel:.3}"))
}

fn ac6() -> Result<Verdict> {
    let cfg = ExperimentConfig::from_json(
        r#"{"name":"table5","fixture":"mqp-obj","n":[50,250,1000],"k":[6,11,21,41],
            "estimator":{"kind":"clustering"},"repetitions":3,
            "prediction":{"validation":20000,"reference_k":10000}}"#,
    )?;
    let report = run_experiment(&cfg, None)?;
    let mut pass = true;
    let mut parts = Vec::new();
    for &n in &cfg.n {
        let preds: Vec<f64> =
            cfg.k.iter().map(|&k| report.cell(n, k).and_then(|c| c.prediction_mean).unwrap_or(f64::NAN)).collect();
        let monotone = preds.windows(2).all(|p| p[1] <= p[0] + 2e-3);
        pass &= monotone && preds[preds.len() - 1] <= 0.030;
        parts.push(format!("N={n}: {}", preds.iter().map(|p| format!("{p:.4}")).collect::<Vec<_>>().join(" ")));
    }
    verdict(pass, format!("prediction error over K=6,11,21,41: {}", parts.join("; ")))
}

fn ac7() -> Result<Verdict> {
    let fx = fixture(FixtureId::Portfolio)?;
    let weights = grid_weights(2, 41, 0)?;
    let mut config = ClusteringConfig::default();
    config.fit.random_starts = 40;
    let spec = EstimatorSpec::Clustering { config };
    let (mut errors, mut pooled) = (Vec::new(), Vec::new());
    for seed in 0..5u64 {
        let (obs, _) = generate_observations(&fx.instance, &fx.theta_true, &fx.law, &fx.noise, 1000, seed)?;
        let est = run_estimator(&spec, &fx.instance, &obs.points, &weights, seed)?;
        errors.push(estimation_error(&est.theta, &fx.theta_true, false)?);
        pooled.extend(est.assignment);
    }
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    let h = weight_histogram(&weights, &pooled, 20)?;
    verdict(
        mean <= 0.02 && (0.48..=0.52).contains(&h.mean) && (0.08..=0.12).contains(&h.sd),
        format!("mean error {mean:.4}; pooled weight histogram mean {:.4} sd {:.4}", h.mean, h.sd),
    )
}

fn ac8() -> Result<Verdict> {
    let fx = fixture(FixtureId::MqpRhs)?;
    let weights = grid_weights(2, 21, 0)?;
    let (mut converged, mut worst_recompute) = (0, 0.0f64);
    for seed in 0..20u64 {
        let (obs, _) = generate_observations(&fx.instance, &fx.theta_true, &fx.law, &fx.noise, 20, seed)?;
        let theta0 = vec![0.0, 0.0];
        let cfg = AdmmConfig { groups: 10, rho: 0.5, theta0: Some(theta0.clone()), seed, ..Default::default() };
        let est = estimate_admm(&fx.instance, &obs.points, &weights, &cfg)?;
        if est.residuals.iter().any(|r| r.iteration <= 100 && r.primal < 1e-3 && r.dual < 1e-3) {
            converged += 1;
        }
        let mut prev = theta0;
        for r in &est.residuals {
            let t = r.locals.len() as f64;
            let bar: Vec<f64> = (0..prev.len()).map(|j| r.locals.iter().map(|l| l[j]).sum::<f64>() / t).collect();
            let primal = r.locals.iter().map(|l| sq_dist(l, &bar)).sum::<f64>().sqrt();
            let dual = t.sqrt() * cfg.rho * sq_dist(&bar, &prev).sqrt();
            worst_recompute = worst_recompute.max((primal - r.primal).abs()).max((dual - r.dual).abs());
            prev = bar;
        }
    }
    verdict(
        converged >= 16 && worst_recompute <= 1e-12,
        format!("{converged}/20 seeds below 1e-3 within 100 iterations; max residual recompute gap {worst_recompute:.1e}"),
    )
}

fn ac9() -> Result<Verdict> {
    let mlp = fixture(FixtureId::MlpTriobj)?;
    let r_mlp = test_identifiability(&mlp.instance, &mlp_reported_estimate(), 21, &IdentConfig::default())?;
    let ex = fixture(FixtureId::Example1)?;
    let inside = ex.instance.space.contains(&EXAMPLE2_THETA);
    let cfg = IdentConfig { k_prime: 1001, tau: Some(1e-2), ..Default::default() };
    let r_ex = test_identifiability(&ex.instance, &EXAMPLE1_THETA, 21, &cfg)?;
    let target = l1_dist(&EXAMPLE1_THETA, &EXAMPLE2_THETA) - 0.05;
    verdict(
        r_mlp.z_test > 1e-3 && inside && r_ex.z_test >= target,
        format!(
            "MLP z_test {:.4}; Example 1 z_test {:.2} against {target:.2} (Example 2 inside the box: {inside})",
            r_mlp.z_test, r_ex.z_test
        ),
    )
}

fn ac10() -> Result<Verdict> {
    // the right-hand-side fixture with only the first row free
    let q = vec![vec![vec![1.0, 0.0], vec![0.0, 2.0]], vec![vec![2.0, 0.0], vec![0.0, 1.0]]];
    let c = vec![vec![3.0, 1.0], vec![-6.0, -5.0]];
    let mut cons = Constraints::nonneg(2);
    cons.a_ineq = vec![vec![0.0, 1.0], vec![3.0, -1.0]];
    cons.b_ineq = vec![3.0, 6.0];
    let mask = [MaskEntry::new("b1", SlotTarget::IneqRhs { row: 0 }, -8.0, -1.0).scaled(-1.0)];
    let inst = build_mqp("one-slot", q, c, cons, &mask, Vec::new())?;
    let fx = fixture(FixtureId::MqpRhs)?;
    let (obs, _) = generate_observations(&inst, &[-3.0], &fx.law, &fx.noise, 60, 10)?;
    let weights = grid_weights(2, 21, 0)?;
    let est = estimate_clustering(&inst, &obs.points, &weights, &ClusteringConfig::default())?;
    let oracle = brute_force_oracle(&inst, &obs.points, &weights, 0.01)?;
    let allowed = 2.0 * 0.01 * 0.01;
    verdict(
        est.objective <= oracle.objective + allowed,
        format!(
            "clustering {:.6} at b1={:.4}; oracle {:.6} at b1={:.2}; allowed excess {allowed:.0e}",
            est.objective, est.theta[0], oracle.objective, oracle.theta[0]
        ),
    )
}

fn plug_in_check(model: &MipModel, point: &std::collections::BTreeMap<String, f64>) -> Result<(bool, f64)> {
    let r = check_feasible(model, point)?;
    Ok((r.pass, r.max_violation))
}

fn ac11() -> Result<Verdict> {
    let cfg = BigMConfig::default();
    let mlp = fixture(FixtureId::MlpTriobj)?;
    let (obs, _) = generate_observations(&mlp.instance, &mlp.theta_true, &mlp.law, &mlp.noise, 10, 0)?;
    let w3 = grid_weights(3, 6, 0)?;
    let m1 = build_single_level_mlp(&mlp.instance, &obs.points, &w3, &cfg)?;
    let c1 = plug_in_check(&m1, &plug_in_mlp(&mlp.instance, &mlp.theta_true, &obs.points, &w3)?)?;

    let rhs = fixture(FixtureId::MqpRhs)?;
    let (obs, _) = generate_observations(&rhs.instance, &rhs.theta_true, &rhs.law, &rhs.noise, 10, 0)?;
    let w2 = grid_weights(2, 6, 0)?;
    let m2 = build_single_level_mqp_rhs(&rhs.instance, &obs.points, &w2, &cfg)?;
    let c2 = plug_in_check(&m2, &plug_in_mqp_rhs(&rhs.instance, &rhs.theta_true, &obs.points, &w2)?)?;

    let ex = example_instance()?;
    let w11 = grid_weights(2, 11, 0)?;
    let pts = efficient_points(&ex, &EXAMPLE1_THETA, &w11)?;
    let m3 = build_test_problem(&ex, &EXAMPLE1_THETA, &pts, &w11, &cfg)?;
    let c3 = plug_in_check(&m3, &plug_in_test_problem(&ex, &EXAMPLE1_THETA, &EXAMPLE1_THETA, &pts, &w11)?)?;

    let identical = [&m1, &m2, &m3].iter().all(|m| write_lp(m) == write_lp(&(*m).clone()))
        && write_lp(&build_single_level_mqp_rhs(&rhs.instance, &obs.points, &w2, &cfg)?) == write_lp(&m2);
    let golden_path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mqp-rhs_2_2.lp");
    let small = build_single_level_mqp_rhs(
        &rhs.instance,
        &[vec![1.0, 2.5], vec![2.5, 1.0]],
        &grid_weights(2, 2, 0)?,
        &cfg,
    )?;
    let golden = std::fs::read_to_string(&golden_path)? == write_lp(&small);
    verdict(
        c1.0 && c2.0 && c3.0 && identical && golden,
        format!(
            "plug-in max violation: linear {:.1e}, right-hand side {:.1e}, test problem {:.1e}; repeat exports identical {identical}; golden match {golden}",
            c1.1, c2.1, c3.1
        ),
    )
}

fn ac12() -> Result<Verdict> {
    let r = intro_demo(6.0, 1.0, 1.0, 2000, 41, 1e-2, 0)?;
    let gap = (r.mean[0] - 0.375).abs().max((r.mean[1] - 0.375).abs());
    verdict(
        gap <= 1e-3 && r.efficient_fraction >= 0.95,
        format!(
            "sample mean ({:.4}, {:.4}); efficient fraction under the estimate {:.3}",
            r.mean[0], r.mean[1], r.efficient_fraction
        ),
    )
}

fn ac13() -> Result<Verdict> {
    let cfg = ExperimentConfig::from_json(
        r#"{"name":"traffic","fixture":"traffic","n":[50],"k":[6,41],"estimator":{"kind":"clustering"}}"#,
    )?;
    let report = run_experiment(&cfg, None)?;
    let e = |k| report.cell(50, k).and_then(|c| c.estimation_mean).unwrap_or(f64::NAN);
    let (e6, e41) = (e(6), e(41));
    verdict(e41 <= 0.15 && e41 <= e6, format!("relative error K=6 {e6:.4}, K=41 {e41:.4}"))
}

type Criterion = fn() -> Result<Verdict>;

fn main() {
    let criteria: [(&str, &str, Criterion); 13] = [
        ("ac1", "forward solutions match the closed forms", ac1),
        ("ac2", "empirical risk equals its cluster decomposition", ac2),
        ("ac3", "clustering descends and stabilises", ac3),
        ("ac4", "right-hand-side error trend", ac4),
        ("ac5", "risk of the true objectives", ac5),
        ("ac6", "prediction error monotone in K", ac6),
        ("ac7", "portfolio recovery", ac7),
        ("ac8", "ADMM residual convergence", ac8),
        ("ac9", "identifiability test", ac9),
        ("ac10", "clustering matches the grid oracle", ac10),
        ("ac11", "big-M model certificates and exports", ac11),
        ("ac12", "two-segment example", ac12),
        ("ac13", "traffic demand trend", ac13),
    ];
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut unexpected = Vec::new();
    for (id, title, run) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| id == f) {
            continue;
        }
        let t0 = Instant::now();
        let (pass, detail) = match run() {
            Ok(v) => (v.pass, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let known = UNMET.contains(&id);
        let tag = match (pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known)",
            (false, false) => "FAIL",
        };
        let line = format!("{} {tag} [{:.0}s] {title}: {detail}", id.to_uppercase(), t0.elapsed().as_secs_f64());
        println!("{line}");
        if !pass && !known {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
