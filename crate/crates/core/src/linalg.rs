//! Dense symmetric linear algebra: sample covariance, Frobenius distance,
//! symmetric eigendecomposition, Cholesky factorization, and projection onto
//! the positive definite cone.
//!
//! All types are immutable after construction and all operations are pure,
//! so everything here is safe to call concurrently.

use ndarray::Array2;

use crate::error::{Error, Result};

/// An n × p matrix of observations: rows are samples, columns are features.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Array2<f64>,
}

impl DataMatrix {
    /// Wraps a dense matrix, requiring n ≥ 2, p ≥ 2, and finite entries.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (n, p) = values.dim();
        if n < 2 || p < 2 {
            return Err(Error::invalid(format!(
                "data matrix must be at least 2x2, got {n}x{p}"
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("data matrix contains non-finite entries"));
        }
        Ok(DataMatrix { values })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::invalid("rows have unequal lengths"));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let values = Array2::from_shape_vec((n, p), flat)
            .map_err(|e| Error::invalid(format!("bad shape: {e}")))?;
        DataMatrix::new(values)
    }

    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// A new matrix holding the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let p = self.n_features();
        let mut flat = Vec::with_capacity(indices.len() * p);
        for &i in indices {
            if i >= self.n_samples() {
                return Err(Error::invalid(format!("row index {i} out of range")));
            }
            flat.extend(self.values.row(i).iter().copied());
        }
        let values = Array2::from_shape_vec((indices.len(), p), flat)
            .map_err(|e| Error::invalid(format!("bad shape: {e}")))?;
        DataMatrix::new(values)
    }
}

/// A p × p real symmetric matrix stored as its lower triangle, so symmetry
/// holds structurally rather than by tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    dim: usize,
    // Row-major lower triangle: entry (j, k) with j >= k lives at
    // j * (j + 1) / 2 + k.
    lower: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(dim: usize) -> Self {
        SymmetricMatrix {
            dim,
            lower: vec![0.0; dim * (dim + 1) / 2],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = SymmetricMatrix::zeros(dim);
        for j in 0..dim {
            m.set(j, j, 1.0);
        }
        m
    }

    /// Builds a matrix by evaluating `f(j, k)` on the lower triangle
    /// (`j >= k`).
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = SymmetricMatrix::zeros(dim);
        for j in 0..dim {
            for k in 0..=j {
                m.set(j, k, f(j, k));
            }
        }
        m
    }

    /// Converts a dense square matrix; entries must be exactly symmetric and
    /// finite.
    pub fn from_dense(values: &Array2<f64>) -> Result<Self> {
        let (r, c) = values.dim();
        if r != c {
            return Err(Error::invalid(format!("matrix is {r}x{c}, not square")));
        }
        for j in 0..r {
            for k in 0..j {
                if values[(j, k)] != values[(k, j)] {
                    return Err(Error::invalid(format!(
                        "matrix is not symmetric at ({j}, {k})"
                    )));
                }
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("matrix contains non-finite entries"));
        }
        Ok(SymmetricMatrix::from_fn(r, |j, k| values[(j, k)]))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    fn index(&self, j: usize, k: usize) -> usize {
        let (hi, lo) = if j >= k { (j, k) } else { (k, j) };
        hi * (hi + 1) / 2 + lo
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.lower[self.index(j, k)]
    }

    #[inline]
    pub(crate) fn set(&mut self, j: usize, k: usize, value: f64) {
        let idx = self.index(j, k);
        self.lower[idx] = value;
    }

    pub fn to_dense(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.dim, self.dim), |(j, k)| self.get(j, k))
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|j| self.get(j, j)).sum()
    }

    /// Frobenius norm counting both triangles, i.e. sqrt of the full double
    /// sum over (j, k).
    pub fn frobenius_norm(&self) -> f64 {
        let mut total = 0.0;
        for j in 0..self.dim {
            for k in 0..j {
                total += 2.0 * self.get(j, k) * self.get(j, k);
            }
            total += self.get(j, j) * self.get(j, j);
        }
        total.sqrt()
    }
}

/// Eigendecomposition of a symmetric matrix: eigenvalues sorted descending,
/// eigenvectors as orthonormal columns with a fixed sign convention.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Array2<f64>,
}

impl EigenDecomposition {
    pub fn min_eigenvalue(&self) -> f64 {
        *self.eigenvalues.last().expect("non-empty decomposition")
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues.first().expect("non-empty decomposition")
    }
}

/// Sample covariance of the rows of `x`.
///
/// With `center` off, entry (j, k) is `(1/n) * sum_i x_ij * x_ik`, the
/// mean-zero convention. With `center` on, columns are demeaned and the
/// divisor is n − 1.
pub fn sample_covariance(x: &DataMatrix, center: bool) -> Result<SymmetricMatrix> {
    let n = x.n_samples();
    let p = x.n_features();
    if center && n < 2 {
        return Err(Error::invalid(
            "centered covariance needs at least 2 samples (divisor n - 1)",
        ));
    }
    if !center && n < 1 {
        return Err(Error::invalid("covariance needs at least 1 sample"));
    }
    let flat = x.values().as_slice().expect("row-major data");

    let means: Vec<f64> = if center {
        (0..p)
            .map(|j| flat.iter().skip(j).step_by(p).sum::<f64>() / n as f64)
            .collect()
    } else {
        vec![0.0; p]
    };
    let divisor = if center { (n - 1) as f64 } else { n as f64 };

    let mut cov = SymmetricMatrix::zeros(p);
    for j in 0..p {
        for k in 0..=j {
            let mut acc = 0.0;
            for i in 0..n {
                let row = &flat[i * p..(i + 1) * p];
                acc += (row[j] - means[j]) * (row[k] - means[k]);
            }
            cov.set(j, k, acc / divisor);
        }
    }
    Ok(cov)
}

/// Square root of the full double sum of squared entrywise differences;
/// off-diagonal pairs count twice, once per triangle.
pub fn frobenius_distance(a: &SymmetricMatrix, b: &SymmetricMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let mut total = 0.0;
    for j in 0..a.dim() {
        for k in 0..j {
            let d = a.get(j, k) - b.get(j, k);
            total += 2.0 * d * d;
        }
        let d = a.get(j, j) - b.get(j, j);
        total += d * d;
    }
    Ok(total.sqrt())
}

/// Maximum number of cyclic Jacobi sweeps before reporting non-convergence.
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Eigendecomposition by cyclic Jacobi rotations with a fixed sweep order,
/// so results are deterministic for a fixed input.
///
/// Eigenvalues come back sorted descending; each eigenvector's sign is fixed
/// by making its largest-magnitude component positive.
pub fn symmetric_eigen(s: &SymmetricMatrix) -> Result<EigenDecomposition> {
    let n = s.dim();
    if n == 0 {
        return Err(Error::invalid("cannot decompose an empty matrix"));
    }
    let mut a = s.to_dense();
    let mut q = Array2::<f64>::eye(n);
    let tol = 1e-11 * s.frobenius_norm().max(1.0);

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for j in 0..n {
            for k in (j + 1)..n {
                off += 2.0 * a[(j, k)] * a[(j, k)];
            }
        }
        if off.sqrt() <= tol {
            converged = true;
            break;
        }
        for pivot_row in 0..n {
            for pivot_col in (pivot_row + 1)..n {
                rotate(&mut a, &mut q, pivot_row, pivot_col);
            }
        }
    }
    if !converged {
        // One final check: the last sweep may have finished the job.
        let mut off = 0.0;
        for j in 0..n {
            for k in (j + 1)..n {
                off += 2.0 * a[(j, k)] * a[(j, k)];
            }
        }
        if off.sqrt() > tol {
            return Err(Error::numerical(format!(
                "Jacobi eigendecomposition did not converge in {JACOBI_MAX_SWEEPS} sweeps"
            )));
        }
    }

    // Sort eigenpairs by descending eigenvalue; stable, so equal eigenvalues
    // keep their sweep order.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));

    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut eigenvectors = Array2::<f64>::zeros((n, n));
    for (col, &src) in order.iter().enumerate() {
        // Sign convention: largest-magnitude component positive; ties go to
        // the lowest row index.
        let mut best_row = 0;
        let mut best_abs = -1.0;
        for row in 0..n {
            let mag = q[(row, src)].abs();
            if mag > best_abs {
                best_abs = mag;
                best_row = row;
            }
        }
        let sign = if q[(best_row, src)] < 0.0 { -1.0 } else { 1.0 };
        for row in 0..n {
            eigenvectors[(row, col)] = sign * q[(row, src)];
        }
    }

    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// One Jacobi rotation annihilating `a[(p, q)]`, accumulating into `v`.
fn rotate(a: &mut Array2<f64>, v: &mut Array2<f64>, p: usize, q: usize) {
    let apq = a[(p, q)];
    if apq == 0.0 {
        return;
    }
    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
    // t = sign(theta) / (|theta| + sqrt(theta^2 + 1)); for huge theta the
    // sqrt saturates and t underflows to ~1/(2 theta), which is correct.
    let t = if theta >= 0.0 {
        1.0 / (theta + (theta * theta + 1.0).sqrt())
    } else {
        -1.0 / (-theta + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let tau = s / (1.0 + c);

    let app = a[(p, p)];
    let aqq = a[(q, q)];
    a[(p, p)] = app - t * apq;
    a[(q, q)] = aqq + t * apq;
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;

    let n = a.nrows();
    for i in 0..n {
        if i != p && i != q {
            let aip = a[(i, p)];
            let aiq = a[(i, q)];
            a[(i, p)] = aip - s * (aiq + tau * aip);
            a[(i, q)] = aiq + s * (aip - tau * aiq);
            a[(p, i)] = a[(i, p)];
            a[(q, i)] = a[(i, q)];
        }
    }
    for i in 0..n {
        let vip = v[(i, p)];
        let viq = v[(i, q)];
        v[(i, p)] = vip - s * (viq + tau * vip);
        v[(i, q)] = viq + s * (vip - tau * viq);
    }
}

/// Reconstructs `Q . diag(max(lambda, floor)) . Q^T` from a decomposition.
fn reconstruct_clipped(eig: &EigenDecomposition, floor: f64) -> SymmetricMatrix {
    let n = eig.eigenvalues.len();
    let clipped: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(floor)).collect();
    SymmetricMatrix::from_fn(n, |j, k| {
        let mut acc = 0.0;
        for i in 0..n {
            acc += eig.eigenvectors[(j, i)] * clipped[i] * eig.eigenvectors[(k, i)];
        }
        acc
    })
}

/// Projects onto the positive definite cone by clipping eigenvalues at
/// `floor` while keeping eigenvectors. Inputs whose minimum eigenvalue is
/// already at or above the floor are returned unchanged.
pub fn project_pd(s: &SymmetricMatrix, floor: f64) -> Result<SymmetricMatrix> {
    if !(floor > 0.0) {
        return Err(Error::invalid(format!("pd floor must be positive, got {floor}")));
    }
    let eig = symmetric_eigen(s)?;
    if eig.min_eigenvalue() >= floor {
        return Ok(s.clone());
    }
    Ok(reconstruct_clipped(&eig, floor))
}

/// The default projection floor used when a caller does not fix one:
/// `1e-4 * max(lambda_max, 1)`, scale-relative so well-scaled estimates are
/// not distorted.
pub fn scaled_pd_floor(eig: &EigenDecomposition) -> f64 {
    1e-4 * eig.max_eigenvalue().max(1.0)
}

/// Projection that resolves the floor from the matrix scale; returns the
/// projected matrix and the floor that was applied.
pub(crate) fn project_pd_scaled(s: &SymmetricMatrix) -> Result<(SymmetricMatrix, f64)> {
    let eig = symmetric_eigen(s)?;
    let floor = scaled_pd_floor(&eig);
    if eig.min_eigenvalue() >= floor {
        return Ok((s.clone(), floor));
    }
    Ok((reconstruct_clipped(&eig, floor), floor))
}

/// Cholesky factorization `S = L . L^T` with L lower triangular and a
/// strictly positive diagonal. Fails on non-positive-definite input, naming
/// the pivot that broke.
pub fn cholesky(s: &SymmetricMatrix) -> Result<Array2<f64>> {
    let n = s.dim();
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut diag = s.get(j, j);
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if diag <= 0.0 {
            return Err(Error::invalid(format!(
                "matrix is not positive definite: pivot {j} is {diag:e}"
            )));
        }
        let root = diag.sqrt();
        l[(j, j)] = root;
        for i in (j + 1)..n {
            let mut acc = s.get(i, j);
            for k in 0..j {
                acc -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = acc / root;
        }
    }
    Ok(l)
}
