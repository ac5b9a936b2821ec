//! K-means with k-means++ seeding and restarts.

use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::sq_dist;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub centroids: Vec<Vec<f64>>,
    pub counts: Vec<usize>,
    pub labels: Vec<usize>,
    pub sse: f64,
}

fn seed_plus_plus<R: Rng>(points: &[Vec<f64>], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centers = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total <= 0.0 {
            rng.random_range(0..points.len())
        } else {
            let mut r = rng.random::<f64>() * total;
            let mut pick = points.len() - 1;
            for (i, d) in d2.iter().enumerate() {
                if r < *d {
                    pick = i;
                    break;
                }
                r -= d;
            }
            pick
        };
        centers.push(points[idx].clone());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, centers.last().unwrap()));
        }
    }
    centers
}

fn lloyd(points: &[Vec<f64>], mut centers: Vec<Vec<f64>>) -> KMeansResult {
    let k = centers.len();
    let dim = points[0].len();
    let mut labels = vec![usize::MAX; points.len()];
    for _ in 0..100 {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let mut best = (0, f64::INFINITY);
            for (c, ctr) in centers.iter().enumerate() {
                let d = sq_dist(p, ctr);
                if d < best.1 {
                    best = (c, d);
                }
            }
            if labels[i] != best.0 {
                labels[i] = best.0;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &l) in points.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    let mut counts = vec![0usize; k];
    let mut sse = 0.0;
    for (p, &l) in points.iter().zip(&labels) {
        counts[l] += 1;
        sse += sq_dist(p, &centers[l]);
    }
    // Drop empty clusters and relabel.
    let keep: Vec<usize> = (0..k).filter(|&c| counts[c] > 0).collect();
    let mut remap = vec![0; k];
    for (new, &old) in keep.iter().enumerate() {
        remap[old] = new;
    }
    KMeansResult {
        centroids: keep.iter().map(|&c| centers[c].clone()).collect(),
        counts: keep.iter().map(|&c| counts[c]).collect(),
        labels: labels.iter().map(|&l| remap[l]).collect(),
        sse,
    }
}

/// Best of `restarts` k-means++ runs. `k` is capped by the number of
/// distinct points.
pub fn kmeans(points: &[Vec<f64>], k: usize, restarts: usize, seed: u64) -> KMeansResult {
    assert!(!points.is_empty() && k >= 1);
    let mut distinct: Vec<&Vec<f64>> = Vec::new();
    for p in points {
        if !distinct.iter().any(|q| *q == p) {
            distinct.push(p);
            if distinct.len() >= k {
                break;
            }
        }
    }
    let k = k.min(distinct.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansResult> = None;
    for _ in 0..restarts.max(1) {
        let centers = seed_plus_plus(points, k, &mut rng);
        let r = lloyd(points, centers);
        if best.as_ref().is_none_or(|b| r.sse < b.sse) {
            best = Some(r);
        }
    }
    best.unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separates_two_blobs() {
        let mut pts = Vec::new();
        for i in 0..10 {
            pts.push(vec![i as f64 * 0.01, 0.0]);
            pts.push(vec![10.0 + i as f64 * 0.01, 0.0]);
        }
        let r = kmeans(&pts, 2, 5, 3);
        assert_eq!(r.counts.iter().sum::<usize>(), 20);
        assert_eq!(r.counts, vec![10, 10]);
        // Each blob has scatter 10·(0.01²·99/12).
        assert!((r.sse - 2.0 * 10.0 * 1e-4 * 99.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn caps_k_at_distinct_points() {
        let pts = vec![vec![1.0], vec![1.0], vec![2.0]];
        let r = kmeans(&pts, 5, 3, 0);
        assert_eq!(r.centroids.len(), 2);
        assert_eq!(r.sse, 0.0);
    }
}
