//! Lloyd's k-means with seeded k-means++ initialization.

use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

/// Result of a k-means run: one assignment per point, the final centroids,
/// the iteration count, and the within-cluster sum of squares.
#[derive(Debug, Clone)]
pub struct KmeansFit {
    pub assignments: Vec<usize>,
    pub centroids: Array2<f64>,
    pub iterations: usize,
    pub within_ss: f64,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Clusters `points` into `clusters` groups. Deterministic given
/// `(points, clusters, seed, max_iter)`; terminates when assignments are
/// stable or `max_iter` is reached; never returns an empty cluster.
pub fn kmeans(
    points: &Array2<f64>,
    clusters: usize,
    seed: u64,
    max_iter: usize,
) -> Result<KmeansFit> {
    let n = points.nrows();
    let d = points.ncols();
    if clusters == 0 || clusters > n {
        return Err(Error::invalid(format!(
            "cluster count {clusters} outside 1..={n}"
        )));
    }
    let flat = points.as_slice().expect("row-major points");
    let row = |i: usize| &flat[i * d..(i + 1) * d];
    let mut generator = rng::from_seed(seed);

    // k-means++ seeding: first centroid uniform, the rest proportional to
    // squared distance from the nearest chosen centroid. When all residual
    // weights are zero (duplicate-heavy data) fall back to the lowest
    // unchosen index.
    let mut centroid_rows: Vec<usize> = Vec::with_capacity(clusters);
    centroid_rows.push(generator.random_range(0..n));
    let mut nearest_sq: Vec<f64> = (0..n)
        .map(|i| squared_distance(row(i), row(centroid_rows[0])))
        .collect();
    while centroid_rows.len() < clusters {
        let total: f64 = nearest_sq.iter().sum();
        let chosen = if total > 0.0 {
            let target = generator.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, &w) in nearest_sq.iter().enumerate() {
                acc += w;
                if acc > target {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            (0..n)
                .find(|i| !centroid_rows.contains(i))
                .expect("clusters <= n leaves an unchosen point")
        };
        centroid_rows.push(chosen);
        for i in 0..n {
            let dist = squared_distance(row(i), row(chosen));
            if dist < nearest_sq[i] {
                nearest_sq[i] = dist;
            }
        }
    }

    let mut centroids = Array2::<f64>::zeros((clusters, d));
    for (c, &src) in centroid_rows.iter().enumerate() {
        for j in 0..d {
            centroids[(c, j)] = row(src)[j];
        }
    }

    let mut assignments = vec![0usize; n];
    let mut iterations = 0;
    for _ in 0..max_iter.max(1) {
        iterations += 1;
        // Assign to nearest centroid; ties go to the lower cluster index.
        let mut changed = false;
        for i in 0..n {
            let mut best = 0;
            let mut best_dist = f64::INFINITY;
            for c in 0..clusters {
                let dist = squared_distance(
                    row(i),
                    centroids
                        .row(c)
                        .as_slice()
                        .expect("row-major centroids"),
                );
                if dist < best_dist {
                    best_dist = dist;
                    best = c;
                }
            }
            if assignments[i] != best || iterations == 1 {
                changed = changed || assignments[i] != best;
                assignments[i] = best;
            }
        }
        if iterations == 1 {
            changed = true;
        }

        // Repair empty clusters by reseeding each at the point farthest
        // from its currently assigned centroid; ties go to the lowest
        // point index.
        let mut sizes = vec![0usize; clusters];
        for &a in &assignments {
            sizes[a] += 1;
        }
        for c in 0..clusters {
            if sizes[c] > 0 {
                continue;
            }
            let mut worst = (f64::NEG_INFINITY, 0usize);
            for i in 0..n {
                if sizes[assignments[i]] <= 1 {
                    continue; // stealing would empty another cluster
                }
                let dist = squared_distance(
                    row(i),
                    centroids
                        .row(assignments[i])
                        .as_slice()
                        .expect("row-major centroids"),
                );
                if dist > worst.0 {
                    worst = (dist, i);
                }
            }
            let stolen = worst.1;
            sizes[assignments[stolen]] -= 1;
            assignments[stolen] = c;
            sizes[c] = 1;
            for j in 0..d {
                centroids[(c, j)] = row(stolen)[j];
            }
            changed = true;
        }

        if !changed {
            break;
        }

        // Update step: centroid = mean of assigned points.
        let mut sums = vec![0.0; clusters * d];
        for i in 0..n {
            let c = assignments[i];
            for j in 0..d {
                sums[c * d + j] += row(i)[j];
            }
        }
        for c in 0..clusters {
            for j in 0..d {
                centroids[(c, j)] = sums[c * d + j] / sizes[c] as f64;
            }
        }
    }

    let within_ss: f64 = (0..n)
        .map(|i| {
            squared_distance(
                row(i),
                centroids
                    .row(assignments[i])
                    .as_slice()
                    .expect("row-major centroids"),
            )
        })
        .sum();

    Ok(KmeansFit {
        assignments,
        centroids,
        iterations,
        within_ss,
    })
}

/// Within-cluster sum of squares for a grid of cluster counts; the table a
/// manual elbow inspection reads.
pub fn wss_table(
    points: &Array2<f64>,
    cluster_counts: &[usize],
    seed: u64,
    max_iter: usize,
) -> Result<Vec<(usize, f64)>> {
    cluster_counts
        .iter()
        .map(|&c| kmeans(points, c, seed, max_iter).map(|fit| (c, fit.within_ss)))
        .collect()
}
