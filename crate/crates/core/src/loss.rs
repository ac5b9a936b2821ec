//! Sampling-based loss and empirical risk.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ImopError, Result};
use crate::linalg::sq_dist;
use crate::model::DmpInstance;
use crate::solver::{front_points, WeightVector};

/// Index of the front point each observation is matched to.
pub type Assignment = Vec<usize>;

fn check_shapes(observations: &[Vec<f64>], front: &[Vec<f64>]) -> Result<()> {
    if front.is_empty() {
        return Err(ImopError::InvalidArgument("empty front".into()));
    }
    let n = front[0].len();
    if front.iter().any(|x| x.len() != n) || observations.iter().any(|y| y.len() != n) {
        return Err(ImopError::InvalidArgument("observation and front dimensions disagree".into()));
    }
    Ok(())
}

/// Nearest front point and squared distance. Ties go to the smallest index.
pub fn nearest(y: &[f64], front: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, x) in front.iter().enumerate() {
        let d = sq_dist(y, x);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

/// l_K(y, θ) = min_k |y - x_k|² for a precomputed front.
pub fn sampling_loss(y: &[f64], front: &[Vec<f64>]) -> Result<f64> {
    check_shapes(std::slice::from_ref(&y.to_vec()), front)?;
    Ok(nearest(y, front).1)
}

/// Mean sampling loss and the minimising assignment.
pub fn empirical_risk(observations: &[Vec<f64>], front: &[Vec<f64>]) -> Result<(f64, Assignment)> {
    if observations.is_empty() {
        return Err(ImopError::InvalidArgument("no observations".into()));
    }
    check_shapes(observations, front)?;
    let mut total = 0.0;
    let mut assign = Vec::with_capacity(observations.len());
    for y in observations {
        let (k, d) = nearest(y, front);
        total += d;
        assign.push(k);
    }
    Ok((total / observations.len() as f64, assign))
}

/// Empirical risk of θ with the front sampled at `weights`.
pub fn empirical_risk_at(
    inst: &DmpInstance,
    theta: &[f64],
    weights: &[WeightVector],
    observations: &[Vec<f64>],
) -> Result<(f64, Assignment)> {
    let dmp = inst.apply(theta)?;
    let front = front_points(&dmp, weights)?;
    empirical_risk(observations, &front)
}

/// Weight-index restrictions for the first `sets.len()` observations, whose
/// loss terms are multiplied by `lambda`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideInfo {
    pub sets: Vec<Vec<usize>>,
    pub lambda: f64,
}

/// Nearest admissible front point for every observation.
pub fn assign(
    observations: &[Vec<f64>],
    front: &[Vec<f64>],
    side: Option<&SideInfo>,
) -> Result<(Assignment, Vec<f64>)> {
    check_shapes(observations, front)?;
    let mut idx = Vec::with_capacity(observations.len());
    let mut dist = Vec::with_capacity(observations.len());
    for (i, y) in observations.iter().enumerate() {
        let allowed = side.and_then(|s| s.sets.get(i));
        let (k, d) = match allowed {
            Some(set) => {
                let mut best = (usize::MAX, f64::INFINITY);
                let mut sorted = set.clone();
                sorted.sort_unstable();
                for &k in &sorted {
                    if k >= front.len() {
                        continue;
                    }
                    let d = sq_dist(y, &front[k]);
                    if d < best.1 {
                        best = (k, d);
                    }
                }
                if best.0 == usize::MAX {
                    return Err(ImopError::InvalidArgument(format!("observation {i} has no admissible front point")));
                }
                best
            }
            None => nearest(y, front),
        };
        idx.push(k);
        dist.push(d);
    }
    Ok((idx, dist))
}

/// Empirical risk with optional side information: restricted observations
/// use only their admissible indices and count `lambda` times.
pub fn empirical_risk_with(
    observations: &[Vec<f64>],
    front: &[Vec<f64>],
    side: Option<&SideInfo>,
) -> Result<(f64, Assignment)> {
    if observations.is_empty() {
        return Err(ImopError::InvalidArgument("no observations".into()));
    }
    if let Some(s) = side {
        if !(s.lambda >= 1.0) {
            return Err(ImopError::InvalidArgument("side-information weight must be at least 1".into()));
        }
        if s.sets.iter().any(|k| k.is_empty()) {
            return Err(ImopError::InvalidArgument("empty side-information set".into()));
        }
    }
    let (a, d) = assign(observations, front, side)?;
    let n_side = side.map_or(0, |s| s.sets.len());
    let lambda = side.map_or(1.0, |s| s.lambda);
    let total: f64 = d.iter().enumerate().map(|(i, v)| if i < n_side { lambda * v } else { *v }).sum();
    Ok((total / observations.len() as f64, a))
}

/// High-probability upper bound on the risk of an empirical minimiser:
/// M + (2K(B² + 2BR) + (B + R)² √(ln(1/δ)/2)) / √N.
pub fn generalization_bound(m: f64, n: usize, k: usize, b: f64, r: f64, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(ImopError::InvalidArgument("delta must lie in (0, 1)".into()));
    }
    if n == 0 || k == 0 || !(b > 0.0) || !(r > 0.0) {
        return Err(ImopError::InvalidArgument("need N, K >= 1 and B, R > 0".into()));
    }
    let k = k as f64;
    let extra = 2.0 * k * (b * b + 2.0 * b * r) + (b + r).powi(2) * ((1.0 / delta).ln() / 2.0).sqrt();
    Ok(m + extra / (n as f64).sqrt())
}

/// Radius B of a ball containing X(θ) for every θ in the box: √n times the
/// largest |x_j| over the feasible sets at the box corners. Only
/// right-hand-side slots move X(θ); otherwise the centre suffices.
pub fn feasible_radius(inst: &DmpInstance) -> Result<f64> {
    use crate::solver::lp::solve_lp;
    use crate::solver::lp_for;
    let d = inst.num_params();
    let mut thetas = Vec::new();
    if inst.has_rhs_slots() && d <= 10 && inst.space.normalizations.is_empty() {
        for mask in 0..(1usize << d) {
            thetas.push(
                (0..d).map(|j| if mask >> j & 1 == 1 { inst.space.upper[j] } else { inst.space.lower[j] }).collect(),
            );
        }
    } else {
        thetas.push(inst.space.center()?);
    }
    let n = inst.n();
    let mut m = 0.0f64;
    for th in &thetas {
        let dmp = inst.apply_unchecked(th);
        for j in 0..n {
            for sign in [1.0, -1.0] {
                let mut c = vec![0.0; n];
                c[j] = -sign;
                let lp = lp_for(&dmp, c);
                let sol = solve_lp(&lp)?;
                m = m.max(-sol.objective);
            }
        }
    }
    Ok((n as f64).sqrt() * m.max(f64::MIN_POSITIVE))
}

/// Observation cluster under an assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub front_index: usize,
    pub centroid: Vec<f64>,
    pub count: usize,
    /// Biased scatter (1/|C|) Σ |y - ȳ|².
    pub variance: f64,
}

pub fn clusters(observations: &[Vec<f64>], assignment: &[usize], k: usize) -> Result<Vec<Cluster>> {
    if observations.len() != assignment.len() {
        return Err(ImopError::InvalidArgument("assignment length differs from observation count".into()));
    }
    if assignment.iter().any(|&a| a >= k) {
        return Err(ImopError::InvalidArgument("assignment index out of range".into()));
    }
    let n = observations.first().map_or(0, |y| y.len());
    let mut sums = vec![vec![0.0; n]; k];
    let mut counts = vec![0usize; k];
    for (y, &a) in observations.iter().zip(assignment) {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(y) {
            *s += v;
        }
    }
    let mut out = Vec::new();
    for c in 0..k {
        if counts[c] == 0 {
            continue;
        }
        let centroid: Vec<f64> = sums[c].iter().map(|s| s / counts[c] as f64).collect();
        let variance = observations
            .iter()
            .zip(assignment)
            .filter(|(_, &a)| a == c)
            .map(|(y, _)| sq_dist(y, &centroid))
            .sum::<f64>()
            / counts[c] as f64;
        out.push(Cluster { front_index: c, centroid, count: counts[c], variance });
    }
    Ok(out)
}

/// Both sides of the cluster decomposition of the empirical risk for a
/// fixed assignment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    /// (1/N) Σ_i |y_i - x_{z(i)}|²
    pub direct: f64,
    /// (1/N) Σ_k |C_k| |ȳ_k - x_k|²
    pub centroid_term: f64,
    /// (1/N) Σ_k |C_k| Var(C_k)
    pub variance_term: f64,
}

impl DecompositionReport {
    pub fn total(&self) -> f64 {
        self.centroid_term + self.variance_term
    }

    pub fn gap(&self) -> f64 {
        (self.direct - self.total()).abs()
    }
}

pub fn decompose(observations: &[Vec<f64>], assignment: &[usize], front: &[Vec<f64>]) -> Result<DecompositionReport> {
    check_shapes(observations, front)?;
    let cl = clusters(observations, assignment, front.len())?;
    let n = observations.len() as f64;
    let direct = observations.iter().zip(assignment).map(|(y, &a)| sq_dist(y, &front[a])).sum::<f64>() / n;
    let centroid_term = cl.iter().map(|c| c.count as f64 * sq_dist(&c.centroid, &front[c.front_index])).sum::<f64>() / n;
    let variance_term = cl.iter().map(|c| c.count as f64 * c.variance).sum::<f64>() / n;
    Ok(DecompositionReport { direct, centroid_term, variance_term })
}

/// Risk of θ on a validation sample, with θ's front represented by a dense
/// reference weight sample.
pub fn monte_carlo_risk(
    inst: &DmpInstance,
    theta: &[f64],
    reference_weights: &[WeightVector],
    validation: &[Vec<f64>],
) -> Result<f64> {
    let dmp = inst.apply(theta)?;
    let sols: Vec<Result<Vec<f64>>> = reference_weights
        .par_iter()
        .map(|w| crate::solver::solve_wp(&dmp, w).map(|s| s.x))
        .collect();
    let front: Vec<Vec<f64>> = sols.into_iter().collect::<Result<_>>()?;
    check_shapes(validation, &front)?;
    if validation.is_empty() {
        return Err(ImopError::InvalidArgument("empty validation sample".into()));
    }
    let total: f64 = validation.par_iter().map(|y| nearest(y, &front).1).sum();
    Ok(total / validation.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_when_observations_on_front() {
        let front = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        let (m, a) = empirical_risk(&front, &front).unwrap();
        assert_eq!(m, 0.0);
        assert_eq!(a, vec![0, 1]);
    }

    #[test]
    fn rejects_mismatched_dims() {
        let front = vec![vec![0.0, 0.0]];
        assert!(empirical_risk(&[vec![1.0]], &front).is_err());
        assert!(empirical_risk(&[], &front).is_err());
        assert!(empirical_risk(&[vec![1.0, 1.0]], &[]).is_err());
    }

    #[test]
    fn side_information_and_lambda() {
        let front = vec![vec![0.0], vec![10.0], vec![1.0]];
        let obs = vec![vec![1.0], vec![3.0]];
        let side = SideInfo { sets: vec![vec![0]], lambda: 2.0 };
        let (m, a) = empirical_risk_with(&obs, &front, Some(&side)).unwrap();
        assert_eq!(a, vec![0, 2]);
        assert_eq!(m, (2.0 * 1.0 + 4.0) / 2.0);
        let bad = SideInfo { sets: vec![vec![7]], lambda: 1.0 };
        assert!(empirical_risk_with(&obs, &front, Some(&bad)).is_err());
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let front = vec![vec![5.0], vec![-1.0], vec![9.0], vec![9.0], vec![1.0]];
        assert_eq!(nearest(&[0.0], &front).0, 1);
    }

    #[test]
    fn bound_closed_form() {
        // 2·6·(4 + 12) = 192, 25·√(ln 20 / 2) = 30.5970, over √100.
        let expected = (192.0 + 25.0 * (20f64.ln() / 2.0).sqrt()) / 10.0;
        let v = generalization_bound(0.0, 100, 6, 2.0, 3.0, 0.05).unwrap();
        assert!((v - expected).abs() < 1e-12);
        assert!((v - 22.2597).abs() < 1e-3);
        let near_one = generalization_bound(0.0, 100, 6, 2.0, 3.0, 1.0 - 1e-15).unwrap();
        assert!((near_one - 19.2).abs() < 1e-6);
        let half = generalization_bound(0.0, 400, 6, 2.0, 3.0, 0.05).unwrap();
        assert!((half - v / 2.0).abs() < 1e-12);
        assert!(generalization_bound(0.0, 100, 6, 2.0, 3.0, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn decomposition_identity(
            pts in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 2), 1..30),
            front in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 2), 1..6),
            seed in 0usize..1000,
        ) {
            let k = front.len();
            let assign: Vec<usize> = (0..pts.len()).map(|i| (i * 7 + seed) % k).collect();
            let r = decompose(&pts, &assign, &front).unwrap();
            prop_assert!(r.gap() <= 1e-9 * (1.0 + r.direct));
        }

        #[test]
        fn nearest_assignment_minimises(
            pts in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 1..20),
            front in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 1..6),
        ) {
            let (m, a) = empirical_risk(&pts, &front).unwrap();
            let other: Vec<usize> = vec![0; pts.len()];
            let r = decompose(&pts, &other, &front).unwrap();
            prop_assert!(m <= r.direct + 1e-12);
            let d = decompose(&pts, &a, &front).unwrap();
            prop_assert!((d.direct - m).abs() <= 1e-12 * (1.0 + m));
        }
    }
}
