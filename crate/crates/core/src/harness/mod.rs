//! Synthetic data generation, metrics and experiment campaigns.

pub mod experiment;
pub mod fixtures;

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ImopError, Result};
use crate::linalg::{dist, norm};
use crate::loss::SideInfo;
use crate::model::{DmpInstance, ParamVector};
use crate::solver::{solve_wp, WeightVector};

pub use experiment::{run_experiment, EstimatorSpec, ExperimentConfig, ExperimentReport};
pub use fixtures::{fixture, Fixture, FixtureId};

/// Perturbation applied to each coordinate of a clean decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseModel {
    None,
    Gaussian { sigma: f64 },
    TruncatedGaussian { sigma: f64, lo: f64, hi: f64 },
    Uniform { a: f64 },
    Rounding { granularity: f64 },
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            NoiseModel::None => true,
            NoiseModel::Gaussian { sigma } => sigma > 0.0,
            NoiseModel::TruncatedGaussian { sigma, lo, hi } => sigma > 0.0 && lo <= 0.0 && hi >= 0.0 && lo < hi,
            NoiseModel::Uniform { a } => a > 0.0,
            NoiseModel::Rounding { granularity } => granularity > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(ImopError::InvalidArgument(format!("invalid noise model {self:?}")))
        }
    }

    pub fn apply<R: Rng>(&self, x: &[f64], rng: &mut R) -> Vec<f64> {
        x.iter()
            .map(|&v| match *self {
                NoiseModel::None => v,
                NoiseModel::Gaussian { sigma } => v + sigma * standard_normal(rng),
                NoiseModel::TruncatedGaussian { sigma, lo, hi } => v + truncated_normal(rng, 0.0, sigma, lo, hi),
                NoiseModel::Uniform { a } => v + rng.random_range(-a..=a),
                // Adding 0.0 turns -0.0 into 0.0.
                NoiseModel::Rounding { granularity } => (v / granularity).round() * granularity + 0.0,
            })
            .collect()
    }
}

fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").sample(rng)
}

/// Normal(mean, sd) conditioned on [lo, hi], by rejection.
pub fn truncated_normal<R: Rng>(rng: &mut R, mean: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    for _ in 0..10_000 {
        let v = mean + sd * standard_normal(rng);
        if v >= lo && v <= hi {
            return v;
        }
    }
    mean.clamp(lo, hi)
}

/// Distribution of decision-maker weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum WeightLaw {
    UniformSimplex,
    /// p = 2 only: w1 ~ Normal(mean, sd) truncated to [lo, hi], w2 = 1 - w1.
    TruncatedNormalFirst {
        mean: f64,
        sd: f64,
        #[serde(default)]
        lo: f64,
        #[serde(default = "unit")]
        hi: f64,
    },
    /// p = 2 only: w1 uniform on [lo, hi], w2 = 1 - w1.
    UniformFirst { lo: f64, hi: f64 },
}

fn unit() -> f64 {
    1.0
}

impl WeightLaw {
    pub fn sample<R: Rng>(&self, p: usize, count: usize, rng: &mut R) -> Result<Vec<WeightVector>> {
        if p == 0 {
            return Err(ImopError::InvalidArgument("need at least one objective".into()));
        }
        match *self {
            WeightLaw::UniformSimplex => Ok((0..count)
                .map(|_| {
                    let e: Vec<f64> = (0..p).map(|_| Exp1.sample(rng)).collect();
                    let s: f64 = e.iter().sum();
                    e.iter().map(|v| v / s).collect()
                })
                .collect()),
            WeightLaw::TruncatedNormalFirst { mean, sd, lo, hi } => {
                if p != 2 {
                    return Err(ImopError::InvalidArgument("truncated-normal weights need p = 2".into()));
                }
                if !(sd > 0.0 && 0.0 <= lo && lo < hi && hi <= 1.0) {
                    return Err(ImopError::InvalidArgument("bad truncated-normal weight law".into()));
                }
                Ok((0..count)
                    .map(|_| {
                        let w = truncated_normal(rng, mean, sd, lo, hi);
                        vec![w, 1.0 - w]
                    })
                    .collect())
            }
            WeightLaw::UniformFirst { lo, hi } => {
                if p != 2 {
                    return Err(ImopError::InvalidArgument("box-restricted weights need p = 2".into()));
                }
                if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                    return Err(ImopError::InvalidArgument("bad weight box".into()));
                }
                Ok((0..count)
                    .map(|_| {
                        let w = rng.random_range(lo..=hi);
                        vec![w, 1.0 - w]
                    })
                    .collect())
            }
        }
    }
}

/// How clean decisions are produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DataLaw {
    /// x_i = S(w_i, θ_true) with w_i drawn from the law.
    WeightedSum { weights: WeightLaw },
    /// x_i uniform (by area) on the union of planar convex polygons, each
    /// given by its vertices in cyclic order.
    Faces { faces: Vec<Vec<Vec<f64>>> },
    /// x_i uniform (by length) on the union of segments.
    Segments { segments: Vec<[Vec<f64>; 2]> },
}

/// What an estimator gets to see.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    pub points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side_info: Option<SideInfo>,
    /// max_i |y_i|.
    pub radius: f64,
}

impl ObservationSet {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.first().map_or(0, |y| y.len());
        if points.iter().any(|y| y.len() != n || y.iter().any(|v| !v.is_finite())) {
            return Err(ImopError::InvalidArgument("observations must share a dimension and be finite".into()));
        }
        let radius = points.iter().map(|y| norm(y)).fold(0.0, f64::max);
        Ok(ObservationSet { points, side_info: None, radius })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Ground truth kept apart from the observations, for metrics only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub theta: ParamVector,
    /// Weight behind each observation (absent for face sampling).
    pub weights: Option<Vec<WeightVector>>,
    pub clean: Vec<Vec<f64>>,
}

impl GroundTruth {
    /// Side information for the first `count` observations: the grid index
    /// nearest to the true weight.
    pub fn side_info(&self, grid: &[WeightVector], count: usize, lambda: f64) -> Result<SideInfo> {
        let ws = self
            .weights
            .as_ref()
            .ok_or_else(|| ImopError::InvalidArgument("no true weights available".into()))?;
        let sets = ws
            .iter()
            .take(count)
            .map(|w| vec![crate::loss::nearest(w, grid).0])
            .collect();
        Ok(SideInfo { sets, lambda })
    }
}

fn triangle_area(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    let u: Vec<f64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
    let v: Vec<f64> = c.iter().zip(a).map(|(x, y)| x - y).collect();
    let uu = crate::linalg::dot(&u, &u);
    let vv = crate::linalg::dot(&v, &v);
    let uv = crate::linalg::dot(&u, &v);
    0.5 * (uu * vv - uv * uv).max(0.0).sqrt()
}

fn sample_faces<R: Rng>(faces: &[Vec<Vec<f64>>], count: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    // Fan triangulation of every polygon, picked by area.
    let mut tris: Vec<[&Vec<f64>; 3]> = Vec::new();
    let mut areas = Vec::new();
    for f in faces {
        if f.len() < 3 {
            return Err(ImopError::InvalidArgument("a face needs at least three vertices".into()));
        }
        for k in 1..f.len() - 1 {
            tris.push([&f[0], &f[k], &f[k + 1]]);
            areas.push(triangle_area(&f[0], &f[k], &f[k + 1]));
        }
    }
    let total: f64 = areas.iter().sum();
    if !(total > 0.0) {
        return Err(ImopError::InvalidArgument("faces have zero area".into()));
    }
    Ok((0..count)
        .map(|_| {
            let mut r = rng.random::<f64>() * total;
            let mut t = tris.len() - 1;
            for (i, a) in areas.iter().enumerate() {
                if r < *a {
                    t = i;
                    break;
                }
                r -= a;
            }
            let (mut s, mut q) = (rng.random::<f64>(), rng.random::<f64>());
            if s + q > 1.0 {
                s = 1.0 - s;
                q = 1.0 - q;
            }
            let [a, b, c] = tris[t];
            (0..a.len()).map(|j| a[j] + s * (b[j] - a[j]) + q * (c[j] - a[j])).collect()
        })
        .collect())
}

fn sample_segments<R: Rng>(segments: &[[Vec<f64>; 2]], count: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    let lens: Vec<f64> = segments.iter().map(|[a, b]| dist(a, b)).collect();
    let total: f64 = lens.iter().sum();
    if !(total > 0.0) {
        return Err(ImopError::InvalidArgument("segments have zero length".into()));
    }
    Ok((0..count)
        .map(|_| {
            let mut r = rng.random::<f64>() * total;
            let mut k = segments.len() - 1;
            for (i, l) in lens.iter().enumerate() {
                if r < *l {
                    k = i;
                    break;
                }
                r -= l;
            }
            let t = rng.random::<f64>();
            let [a, b] = &segments[k];
            a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
        })
        .collect())
}

/// Draws `count` clean decisions from `law` under θ_true and perturbs them.
/// Random draws happen in a fixed order (weights or face points, then noise
/// per observation) so the output depends only on the seed.
pub fn generate_observations(
    inst: &DmpInstance,
    theta_true: &[f64],
    law: &DataLaw,
    noise: &NoiseModel,
    count: usize,
    seed: u64,
) -> Result<(ObservationSet, GroundTruth)> {
    noise.validate()?;
    let dmp = inst.apply(theta_true)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (clean, weights) = match law {
        DataLaw::WeightedSum { weights } => {
            let ws = weights.sample(inst.p(), count, &mut rng)?;
            let sols: Vec<Result<Vec<f64>>> = ws.par_iter().map(|w| solve_wp(&dmp, w).map(|s| s.x)).collect();
            (sols.into_iter().collect::<Result<Vec<_>>>()?, Some(ws))
        }
        DataLaw::Faces { faces } => {
            if faces.iter().flatten().any(|v| v.len() != inst.n()) {
                return Err(ImopError::InvalidArgument("face vertex dimension differs from the instance".into()));
            }
            (sample_faces(faces, count, &mut rng)?, None)
        }
        DataLaw::Segments { segments } => {
            if segments.iter().flatten().any(|v| v.len() != inst.n()) {
                return Err(ImopError::InvalidArgument("segment end dimension differs from the instance".into()));
            }
            (sample_segments(segments, count, &mut rng)?, None)
        }
    };
    let points: Vec<Vec<f64>> = clean.iter().map(|x| noise.apply(x, &mut rng)).collect();
    let obs = ObservationSet::new(points)?;
    Ok((obs, GroundTruth { theta: theta_true.to_vec(), weights, clean }))
}

/// |θ̂ - θ|₂, divided by |θ|₂ when `relative`.
pub fn estimation_error(theta_hat: &[f64], theta_true: &[f64], relative: bool) -> Result<f64> {
    if theta_hat.len() != theta_true.len() {
        return Err(ImopError::InvalidParams("parameter vectors have different lengths".into()));
    }
    let e = dist(theta_hat, theta_true);
    if relative {
        let t = norm(theta_true);
        if t == 0.0 {
            return Err(ImopError::InvalidParams("relative error against a zero parameter".into()));
        }
        Ok(e / t)
    } else {
        Ok(e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub mean: f64,
    pub sd: f64,
}

/// Histogram over [0, 1] of the first weight coordinate each observation
/// is assigned to, with the count-weighted mean and (population) sd.
pub fn weight_histogram(weights: &[WeightVector], assignment: &[usize], bins: usize) -> Result<Histogram> {
    if bins == 0 {
        return Err(ImopError::InvalidArgument("need at least one bin".into()));
    }
    if weights.iter().any(|w| w.len() != 2) {
        return Err(ImopError::InvalidArgument("weight histograms are defined for two objectives".into()));
    }
    if assignment.is_empty() || assignment.iter().any(|&a| a >= weights.len()) {
        return Err(ImopError::InvalidArgument("assignment is empty or out of range".into()));
    }
    let edges: Vec<f64> = (0..=bins).map(|b| b as f64 / bins as f64).collect();
    let mut counts = vec![0usize; bins];
    let vals: Vec<f64> = assignment.iter().map(|&a| weights[a][0]).collect();
    for &v in &vals {
        let b = ((v * bins as f64).floor() as usize).min(bins - 1);
        counts[b] += 1;
    }
    let m = vals.iter().sum::<f64>() / vals.len() as f64;
    let var = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / vals.len() as f64;
    Ok(Histogram { edges, counts, mean: m, sd: var.sqrt() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntroReport {
    pub mean: Vec<f64>,
    pub mean_inside: bool,
    pub theta_hat: ParamVector,
    pub efficient_fraction: f64,
    pub samples: usize,
}

/// The two-segment bi-objective example: points spread evenly on the outer
/// halves of the efficient edges, their mean, and an estimate of the two
/// linear objectives from the same points.
pub fn intro_demo(a: f64, b: f64, c: f64, samples: usize, k: usize, tau: f64, seed: u64) -> Result<IntroReport> {
    use crate::estimators::{estimate_clustering, ClusteringConfig};
    if !(a > b && b > 0.0 && c > 0.0) || samples < 2 {
        return Err(ImopError::InvalidArgument("need a > b > 0, c > 0 and at least two samples".into()));
    }
    let inst = fixtures::intro_instance(a, b, c)?;
    let pts = fixtures::intro_points(a, b, c, samples);
    let mean: Vec<f64> = (0..2).map(|j| pts.iter().map(|p| p[j]).sum::<f64>() / pts.len() as f64).collect();
    let dmp0 = inst.apply(&inst.slot_values())?;
    let mean_inside = dmp0.constraints.max_violation(&mean) < 0.0;

    let weights = crate::solver::grid_weights(2, k, seed)?;
    let cfg = ClusteringConfig { seed, ..ClusteringConfig::default() };
    let est = estimate_clustering(&inst, &pts, &weights, &cfg)?;
    let dmp = inst.apply(&est.theta)?;
    let res: Vec<Result<f64>> =
        pts.par_iter().map(|x| crate::solver::weak_efficiency_residual(&dmp, x, 1e-9)).collect();
    let mut ok = 0;
    for r in res {
        if r? <= tau {
            ok += 1;
        }
    }
    Ok(IntroReport {
        mean,
        mean_inside,
        theta_hat: est.theta,
        efficient_fraction: ok as f64 / pts.len() as f64,
        samples: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_validation() {
        assert!(NoiseModel::Gaussian { sigma: 0.0 }.validate().is_err());
        assert!(NoiseModel::TruncatedGaussian { sigma: 0.1, lo: 0.2, hi: 1.0 }.validate().is_err());
        assert!(NoiseModel::Rounding { granularity: 0.0 }.validate().is_err());
        assert!(NoiseModel::Uniform { a: 0.25 }.validate().is_ok());
    }

    #[test]
    fn rounding_within_half_granularity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let noise = NoiseModel::Rounding { granularity: 0.001 };
        for _ in 0..1000 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
            let y = noise.apply(&x, &mut rng);
            for (a, b) in x.iter().zip(&y) {
                assert!((a - b).abs() <= 0.0005 + 1e-12);
            }
        }
    }

    #[test]
    fn truncated_noise_respects_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let noise = NoiseModel::TruncatedGaussian { sigma: 2.0, lo: -1.0, hi: 1.0 };
        let y = noise.apply(&vec![0.0; 5000], &mut rng);
        assert!(y.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn weight_laws() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ws = WeightLaw::UniformSimplex.sample(2, 10_000, &mut rng).unwrap();
        let m = ws.iter().map(|w| w[0]).sum::<f64>() / 1e4;
        assert!((m - 0.5).abs() < 0.02);
        assert!(ws.iter().all(|w| w.iter().all(|v| *v >= 0.0) && (w.iter().sum::<f64>() - 1.0).abs() < 1e-12));

        let tn = WeightLaw::TruncatedNormalFirst { mean: 0.5, sd: 0.1, lo: 0.0, hi: 1.0 };
        let ws = tn.sample(2, 10_000, &mut rng).unwrap();
        let m = ws.iter().map(|w| w[0]).sum::<f64>() / 1e4;
        let sd = (ws.iter().map(|w| (w[0] - m).powi(2)).sum::<f64>() / 1e4).sqrt();
        assert!((0.09..=0.11).contains(&sd));
        assert!(tn.sample(3, 1, &mut rng).is_err());

        let one = WeightLaw::UniformSimplex.sample(4, 1, &mut rng).unwrap();
        assert_eq!(one.len(), 1);
        assert!((one[0].iter().sum::<f64>() - 1.0).abs() < 1e-12);

        let bx = WeightLaw::UniformFirst { lo: 0.3, hi: 0.7 }.sample(2, 500, &mut rng).unwrap();
        assert!(bx.iter().all(|w| (0.3..=0.7).contains(&w[0])));
    }

    #[test]
    fn face_sampling_stays_on_faces() {
        let square = vec![vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 1.0], vec![0.0, 1.0, 1.0]];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts = sample_faces(&[square], 4000, &mut rng).unwrap();
        assert!(pts.iter().all(|p| p[2] == 1.0 && (0.0..=1.0).contains(&p[0]) && (0.0..=1.0).contains(&p[1])));
        // Uniform on the unit square: each quadrant gets about a quarter.
        let q = pts.iter().filter(|p| p[0] < 0.5 && p[1] < 0.5).count() as f64 / 4000.0;
        assert!((q - 0.25).abs() < 0.03);
    }

    #[test]
    fn estimation_error_examples() {
        let e = estimation_error(&[-3.1, -6.05], &[-3.0, -6.0], false).unwrap();
        assert!((e - 0.0125f64.sqrt()).abs() < 1e-12);
        assert_eq!(estimation_error(&[1.0], &[1.0], false).unwrap(), 0.0);
        let r = estimation_error(&[2288.95, 3576.67], &[2500.0, 3500.0], true).unwrap();
        assert!((r - 0.0522).abs() < 5e-5);
        assert!(estimation_error(&[1.0], &[1.0, 2.0], false).is_err());
    }

    #[test]
    fn histogram_spike() {
        let ws = vec![vec![0.0, 1.0], vec![0.5, 0.5], vec![1.0, 0.0]];
        let h = weight_histogram(&ws, &[1, 1, 1, 1], 10).unwrap();
        assert_eq!(h.mean, 0.5);
        assert_eq!(h.sd, 0.0);
        assert_eq!(h.counts.iter().sum::<usize>(), 4);
        assert_eq!(h.counts[5], 4);
        let h = weight_histogram(&ws, &[0, 2], 4).unwrap();
        assert_eq!(h.counts, vec![1, 0, 0, 1]);
    }
}
