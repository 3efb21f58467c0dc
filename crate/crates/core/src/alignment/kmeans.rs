//! Seeded k-means (k-means++ initialization, Lloyd iterations) used to
//! attach coarse instance-similarity ids to samples before alignment.

use nalgebra::DMatrix;
use rand::Rng as _;

use super::pseudo::sq_dist;
use super::DomainData;
use crate::error::{Result, SsaError};
use crate::rng::{rng_from_seed, Rng};

pub const DEFAULT_CLUSTERS: usize = 5;
pub const MAX_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub assignments: Vec<usize>,
    pub centroids: DMatrix<f64>,
    pub iterations: usize,
}

/// Clusters the rows of `x` into `k` groups.
pub fn kmeans(x: &DMatrix<f64>, k: usize, rng_seed: u64) -> Result<KMeansFit> {
    let n = x.nrows();
    if k == 0 {
        return Err(SsaError::InvalidConfig("k must be >= 1".into()));
    }
    if n < k {
        return Err(SsaError::TooFewSamples { have: n, need: k });
    }
    let mut rng = rng_from_seed(rng_seed);
    let mut centroids = plus_plus_init(x, k, &mut rng);
    let mut assignments = vec![usize::MAX; n];
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut next: Vec<usize> = (0..n).map(|i| nearest(x, i, &centroids).0).collect();
        repair_empty(x, &mut next, &centroids, k);
        let stable = next == assignments;
        assignments = next;
        centroids = means(x, &assignments, k);
        if stable {
            break;
        }
    }
    Ok(KMeansFit {
        assignments,
        centroids,
        iterations,
    })
}

/// Fits k-means once on the union of source and target rows so both domains
/// receive consistent cluster ids. Returns `(source_ids, target_ids)`.
pub fn shared_clusters(
    source: &DomainData,
    target: &DomainData,
    k: usize,
    rng_seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let (xs, xt) = (source.x.as_matrix(), target.x.as_matrix());
    if xs.ncols() != xt.ncols() {
        return Err(SsaError::DimensionMismatch {
            expected: xs.ncols(),
            got: xt.ncols(),
        });
    }
    let (ns, nt) = (xs.nrows(), xt.nrows());
    if ns + nt < k {
        return Err(SsaError::TooFewSamples { have: ns + nt, need: k });
    }
    let union = DMatrix::from_fn(ns + nt, xs.ncols(), |i, j| if i < ns { xs[(i, j)] } else { xt[(i - ns, j)] });
    let fit = kmeans(&union, k, rng_seed)?;
    let mut ids = fit.assignments;
    let target_ids = ids.split_off(ns);
    Ok((ids, target_ids))
}

fn plus_plus_init(x: &DMatrix<f64>, k: usize, rng: &mut Rng) -> DMatrix<f64> {
    let n = x.nrows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut dist: Vec<f64> = (0..n).map(|i| sq_dist(x, i, x, chosen[0])).collect();
    while chosen.len() < k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in dist.iter().enumerate() {
                if w > 0.0 && r < w {
                    pick = i;
                    break;
                }
                r -= w;
            }
            // Guard against landing on a zero-weight row through rounding.
            if dist[pick] == 0.0 {
                pick = dist.iter().rposition(|&w| w > 0.0).unwrap_or(pick);
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        chosen.push(pick);
        for (i, d) in dist.iter_mut().enumerate() {
            *d = d.min(sq_dist(x, i, x, pick));
        }
    }
    x.select_rows(&chosen)
}

fn nearest(x: &DMatrix<f64>, row: usize, centroids: &DMatrix<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.nrows() {
        let d = sq_dist(x, row, centroids, c);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Gives every empty cluster the row farthest from its current centroid,
/// taken from clusters that can spare one.
fn repair_empty(x: &DMatrix<f64>, assignments: &mut [usize], centroids: &DMatrix<f64>, k: usize) {
    let mut counts = vec![0usize; k];
    for &a in assignments.iter() {
        counts[a] += 1;
    }
    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        let donor = (0..assignments.len())
            .filter(|&i| counts[assignments[i]] > 1)
            .map(|i| (i, sq_dist(x, i, centroids, assignments[i])))
            .fold(None::<(usize, f64)>, |best, (i, d)| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((i, d)),
            });
        if let Some((row, _)) = donor {
            counts[assignments[row]] -= 1;
            assignments[row] = empty;
            counts[empty] += 1;
        }
    }
}

fn means(x: &DMatrix<f64>, assignments: &[usize], k: usize) -> DMatrix<f64> {
    let mut sums = DMatrix::zeros(k, x.ncols());
    let mut counts = vec![0usize; k];
    for (i, &a) in assignments.iter().enumerate() {
        let mut row = sums.row_mut(a);
        row += x.row(i);
        counts[a] += 1;
    }
    for (c, &n) in counts.iter().enumerate() {
        if n > 0 {
            let mut row = sums.row_mut(c);
            row /= n as f64;
        }
    }
    sums
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clouds() -> DMatrix<f64> {
        // 5 clouds of 10 identical points, far apart.
        let centers = [[0.0, 0.0], [100.0, 0.0], [0.0, 100.0], [100.0, 100.0], [50.0, 300.0]];
        DMatrix::from_fn(50, 2, |i, j| centers[i / 10][j])
    }

    #[test]
    fn single_cluster() {
        let fit = kmeans(&clouds(), 1, 3).unwrap();
        assert!(fit.assignments.iter().all(|&a| a == 0));
    }

    #[test]
    fn recovers_separated_clouds() {
        for seed in 0..10 {
            let fit = kmeans(&clouds(), 5, seed).unwrap();
            for i in 0..50 {
                for j in 0..50 {
                    let same_cloud = i / 10 == j / 10;
                    assert_eq!(fit.assignments[i] == fit.assignments[j], same_cloud, "seed {seed}");
                }
            }
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let x = DMatrix::from_fn(40, 3, |i, j| ((i * 31 + j * 17) % 13) as f64);
        assert_eq!(kmeans(&x, 4, 9).unwrap(), kmeans(&x, 4, 9).unwrap());
    }

    #[test]
    fn no_cluster_left_empty_with_duplicates() {
        // Only two distinct points but k = 3.
        let x = DMatrix::from_fn(6, 1, |i, _| if i < 3 { 0.0 } else { 1.0 });
        let fit = kmeans(&x, 3, 1).unwrap();
        let mut used = fit.assignments.clone();
        used.sort();
        used.dedup();
        assert_eq!(used.len(), 3);
    }

    #[test]
    fn too_few_samples() {
        let x = DMatrix::from_fn(3, 2, |i, j| (i + j) as f64);
        assert!(matches!(kmeans(&x, 5, 0), Err(SsaError::TooFewSamples { have: 3, need: 5 })));
    }
}
