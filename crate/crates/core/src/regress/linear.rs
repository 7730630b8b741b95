//! Clustered linear regression: k-means partition of standardized feature
//! space, then ordinary least squares within each cluster. Prediction uses
//! the fit of the cluster whose centroid is nearest to the query.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::regress::{kmeans, RegressionDataset, StandardizationParams};
use crate::rng;

const LLOYD_MAX_ITER: usize = 100;

/// Per-cluster affine fit on standardized features.
#[derive(Debug, Clone)]
pub struct ClusterFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
}

/// A fitted clustered linear regressor.
#[derive(Debug, Clone)]
pub struct ClusteredLrModel {
    params: StandardizationParams,
    centroids: Array2<f64>,
    fits: Vec<ClusterFit>,
}

/// Fits `clusters` local linear models. Clusters with fewer than d + 2
/// points, or whose normal equations are singular, fall back to the cluster
/// response mean.
pub fn fit_clustered_lr(
    data: &RegressionDataset,
    clusters: usize,
    seed: u64,
) -> Result<ClusteredLrModel> {
    if clusters == 0 || clusters > data.n_rows() {
        return Err(Error::invalid(format!(
            "cluster count {clusters} outside 1..={}",
            data.n_rows()
        )));
    }
    let d = data.n_dims();
    let params = StandardizationParams::fit(data.features());
    let standardized = params.transform(data.features());
    let partition = kmeans(
        &standardized,
        clusters,
        rng::child_seed(seed, &[0]),
        LLOYD_MAX_ITER,
    )?;

    let flat = standardized.as_slice().expect("row-major features");
    let mut fits = Vec::with_capacity(clusters);
    for c in 0..clusters {
        let members: Vec<usize> = (0..data.n_rows())
            .filter(|&i| partition.assignments[i] == c)
            .collect();
        let mean = members
            .iter()
            .map(|&i| data.responses()[i])
            .sum::<f64>()
            / members.len() as f64;
        let fallback = ClusterFit {
            intercept: mean,
            coefficients: vec![0.0; d],
        };
        if members.len() < d + 2 {
            fits.push(fallback);
            continue;
        }
        match ols(flat, d, &members, data.responses()) {
            Some(fit) => fits.push(fit),
            None => fits.push(fallback),
        }
    }

    Ok(ClusteredLrModel {
        params,
        centroids: partition.centroids,
        fits,
    })
}

/// Least squares with intercept via the normal equations; `None` on a
/// singular or non-finite solve.
fn ols(flat: &[f64], d: usize, members: &[usize], responses: &[f64]) -> Option<ClusterFit> {
    let m = d + 1; // intercept + d coefficients
    let mut gram = vec![0.0; m * m];
    let mut rhs = vec![0.0; m];
    for &i in members {
        let row = &flat[i * d..(i + 1) * d];
        let y = responses[i];
        // Design vector (1, z_1 .. z_d); accumulate the lower triangle.
        gram[0] += 1.0;
        rhs[0] += y;
        for a in 0..d {
            gram[(a + 1) * m] += row[a];
            rhs[a + 1] += row[a] * y;
            for b in 0..=a {
                gram[(a + 1) * m + (b + 1)] += row[a] * row[b];
            }
        }
    }
    // Mirror to the full symmetric Gram matrix.
    for a in 0..m {
        for b in 0..a {
            let lower = gram[a * m + b];
            gram[b * m + a] = lower;
        }
    }
    let solution = solve_symmetric(&mut gram, &mut rhs, m)?;
    if solution.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(ClusterFit {
        intercept: solution[0],
        coefficients: solution[1..].to_vec(),
    })
}

/// Gaussian elimination with partial pivoting on an m x m system stored
/// row-major in `a`. Returns `None` when a pivot is negligibly small.
fn solve_symmetric(a: &mut [f64], b: &mut [f64], m: usize) -> Option<Vec<f64>> {
    let scale = a
        .iter()
        .fold(0.0_f64, |acc, &v| acc.max(v.abs()))
        .max(1.0);
    for col in 0..m {
        let mut pivot_row = col;
        let mut pivot_abs = a[col * m + col].abs();
        for r in (col + 1)..m {
            let mag = a[r * m + col].abs();
            if mag > pivot_abs {
                pivot_abs = mag;
                pivot_row = r;
            }
        }
        if pivot_abs <= 1e-12 * scale {
            return None;
        }
        if pivot_row != col {
            for j in 0..m {
                a.swap(col * m + j, pivot_row * m + j);
            }
            b.swap(col, pivot_row);
        }
        let pivot = a[col * m + col];
        for r in (col + 1)..m {
            let factor = a[r * m + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for j in col..m {
                a[r * m + j] -= factor * a[col * m + j];
            }
            b[r] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; m];
    for col in (0..m).rev() {
        let mut acc = b[col];
        for j in (col + 1)..m {
            acc -= a[col * m + j] * x[j];
        }
        x[col] = acc / a[col * m + col];
    }
    Some(x)
}

impl ClusteredLrModel {
    pub fn cluster_count(&self) -> usize {
        self.fits.len()
    }

    pub fn cluster_fit(&self, cluster: usize) -> &ClusterFit {
        &self.fits[cluster]
    }

    pub fn centroids(&self) -> &Array2<f64> {
        &self.centroids
    }

    /// Index of the cluster whose centroid is nearest to the standardized
    /// query; ties go to the lower cluster index.
    fn nearest_cluster(&self, query: &[f64]) -> usize {
        let d = self.centroids.ncols();
        let flat = self.centroids.as_slice().expect("row-major centroids");
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for c in 0..self.centroids.nrows() {
            let row = &flat[c * d..(c + 1) * d];
            let mut dist = 0.0;
            for j in 0..d {
                let diff = row[j] - query[j];
                dist += diff * diff;
            }
            if dist < best_dist {
                best_dist = dist;
                best = c;
            }
        }
        best
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let d = self.centroids.ncols();
        if x.len() != d {
            return Err(Error::invalid(format!(
                "query has {} dims, model expects {d}",
                x.len()
            )));
        }
        let mut query = vec![0.0; d];
        self.params.transform_row(x, &mut query);
        let fit = &self.fits[self.nearest_cluster(&query)];
        let mut value = fit.intercept;
        for j in 0..d {
            value += fit.coefficients[j] * query[j];
        }
        Ok(value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use rand::Rng;

    use crate::regress::RegressionDataset;

    fn dataset(rows: &[(Vec<f64>, f64)]) -> RegressionDataset {
        let d = rows[0].0.len();
        let flat: Vec<f64> = rows.iter().flat_map(|(x, _)| x.iter().copied()).collect();
        let responses: Vec<f64> = rows.iter().map(|&(_, y)| y).collect();
        RegressionDataset::new(
            Array2::from_shape_vec((rows.len(), d), flat).unwrap(),
            responses,
        )
        .unwrap()
    }

    #[test]
    fn single_cluster_recovers_exact_line() {
        let rows: Vec<(Vec<f64>, f64)> =
            (0..6).map(|i| (vec![i as f64], 2.0 * i as f64 + 1.0)).collect();
        let data = dataset(&rows);
        let model = fit_clustered_lr(&data, 1, 0).unwrap();
        for (x, y) in &rows {
            assert_abs_diff_eq!(model.predict(x).unwrap(), *y, epsilon = 1e-8);
        }
    }

    /// Normal-equation oracle on the raw features; predictions must agree
    /// because standardization is an affine reparameterization.
    fn ols_oracle(rows: &[(Vec<f64>, f64)], x: &[f64]) -> f64 {
        let n = rows.len();
        let d = rows[0].0.len();
        let m = d + 1;
        let mut gram = vec![vec![0.0; m]; m];
        let mut rhs = vec![0.0; m];
        for (features, y) in rows {
            let mut design = vec![1.0];
            design.extend_from_slice(features);
            for a in 0..m {
                rhs[a] += design[a] * y;
                for b in 0..m {
                    gram[a][b] += design[a] * design[b];
                }
            }
        }
        // Unpivoted elimination is fine for these small well-conditioned
        // systems.
        for col in 0..m {
            let pivot = gram[col][col];
            for r in (col + 1)..m {
                let factor = gram[r][col] / pivot;
                for j in col..m {
                    gram[r][j] -= factor * gram[col][j];
                }
                rhs[r] -= factor * rhs[col];
            }
        }
        let mut beta = vec![0.0; m];
        for col in (0..m).rev() {
            let mut acc = rhs[col];
            for j in (col + 1)..m {
                acc -= gram[col][j] * beta[j];
            }
            beta[col] = acc / gram[col][col];
        }
        let mut value = beta[0];
        for j in 0..d {
            value += beta[j + 1] * x[j];
        }
        value
    }

    #[test]
    fn single_cluster_matches_normal_equations() {
        let mut generator = crate::rng::from_seed(13);
        let rows: Vec<(Vec<f64>, f64)> = (0..25)
            .map(|_| {
                let x: Vec<f64> = (0..3).map(|_| generator.random_range(-2.0..2.0)).collect();
                let y = 1.5 * x[0] - 0.7 * x[1] + 0.2 * x[2]
                    + generator.random_range(-0.3..0.3);
                (x, y)
            })
            .collect();
        let data = dataset(&rows);
        let model = fit_clustered_lr(&data, 1, 5).unwrap();
        for _ in 0..10 {
            let q: Vec<f64> = (0..3).map(|_| generator.random_range(-2.0..2.0)).collect();
            assert_abs_diff_eq!(
                model.predict(&q).unwrap(),
                ols_oracle(&rows, &q),
                epsilon = 1e-8
            );
        }
    }

    #[test]
    fn two_regimes_recover_per_cluster_slopes() {
        // Noise-free piecewise-linear data in two well-separated regimes.
        let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
        for i in 0..10 {
            let x = i as f64 * 0.1; // regime around 0: slope 3
            rows.push((vec![x], 3.0 * x + 1.0));
        }
        for i in 0..10 {
            let x = 100.0 + i as f64 * 0.1; // regime around 100: slope -2
            rows.push((vec![x], -2.0 * x + 5.0));
        }
        let data = dataset(&rows);
        let model = fit_clustered_lr(&data, 2, 3).unwrap();
        for (x, y) in &rows {
            assert_abs_diff_eq!(model.predict(x).unwrap(), *y, epsilon = 1e-6);
        }
        // The standardized per-cluster slopes, mapped back to raw units,
        // match each regime's generating slope.
        for c in 0..2 {
            let fit = model.cluster_fit(c);
            let raw_slope = fit.coefficients[0] / model.params.scale[0];
            assert!(
                (raw_slope - 3.0).abs() < 1e-6 || (raw_slope + 2.0).abs() < 1e-6,
                "unexpected slope {raw_slope}"
            );
        }
    }

    #[test]
    fn prediction_at_centroid_uses_that_cluster() {
        let mut generator = crate::rng::from_seed(41);
        let rows: Vec<(Vec<f64>, f64)> = (0..30)
            .map(|_| {
                let x: Vec<f64> = (0..2).map(|_| generator.random_range(-3.0..3.0)).collect();
                let y = generator.random_range(-1.0..1.0);
                (x, y)
            })
            .collect();
        let data = dataset(&rows);
        let model = fit_clustered_lr(&data, 3, 7).unwrap();
        for c in 0..3 {
            // Map the standardized centroid back to raw coordinates and
            // evaluate; the stored fit must be the one used.
            let centroid: Vec<f64> = (0..2)
                .map(|j| model.centroids[(c, j)] * model.params.scale[j] + model.params.mean[j])
                .collect();
            let fit = model.cluster_fit(c);
            let mut expected = fit.intercept;
            for j in 0..2 {
                expected += fit.coefficients[j] * model.centroids[(c, j)];
            }
            assert_abs_diff_eq!(model.predict(&centroid).unwrap(), expected, epsilon = 1e-9);
        }
    }

    #[test]
    fn tiny_cluster_falls_back_to_mean() {
        // Three points, one dim: a 3-cluster fit leaves every cluster below
        // d + 2 = 3 members, so each predicts its own mean.
        let rows = vec![
            (vec![0.0], 1.0),
            (vec![10.0], 5.0),
            (vec![20.0], 9.0),
        ];
        let data = dataset(&rows);
        let model = fit_clustered_lr(&data, 3, 2).unwrap();
        for c in 0..3 {
            assert!(model.cluster_fit(c).coefficients.iter().all(|&v| v == 0.0));
        }
        for (x, y) in &rows {
            assert_abs_diff_eq!(model.predict(x).unwrap(), *y, epsilon = 1e-12);
        }
    }

    #[test]
    fn singular_design_falls_back_to_mean() {
        // Two distinct feature values but three dims worth of redundancy:
        // duplicate columns make the normal equations singular.
        let rows = vec![
            (vec![1.0, 1.0], 2.0),
            (vec![1.0, 1.0], 4.0),
            (vec![2.0, 2.0], 6.0),
            (vec![2.0, 2.0], 8.0),
            (vec![3.0, 3.0], 10.0),
        ];
        let data = dataset(&rows);
        let model = fit_clustered_lr(&data, 1, 0).unwrap();
        let prediction = model.predict(&[1.5, 1.5]).unwrap();
        assert!(prediction.is_finite());
    }

    #[test]
    fn rejects_too_many_clusters() {
        let rows = vec![(vec![0.0], 1.0), (vec![1.0], 2.0)];
        let data = dataset(&rows);
        assert!(fit_clustered_lr(&data, 3, 0).is_err());
    }
}
