//! Reference estimators for benchmark comparison: the sample covariance
//! matrix and the linear shrinkage estimator that blends it with a scaled
//! identity target.

use crate::error::{Error, Result};
use crate::linalg::{sample_covariance, DataMatrix, SymmetricMatrix};

/// The sample covariance matrix under the given centering convention.
pub fn sample_estimator(x: &DataMatrix, center: bool) -> Result<SymmetricMatrix> {
    sample_covariance(x, center)
}

/// A shrinkage estimate with its diagnostics.
#[derive(Debug, Clone)]
pub struct ShrinkageEstimate {
    pub matrix: SymmetricMatrix,
    /// Shrinkage intensity in [0, 1]; 0 keeps the sample covariance.
    pub intensity: f64,
    /// The target scale mu = trace(S) / p.
    pub target_scale: f64,
}

/// Linear shrinkage toward the scaled identity: `rho * mu * I + (1 - rho) * S`
/// with the standard plug-in intensity.
///
/// With per-entry mean-square norms `<A, B> = sum_jk A_jk B_jk / p`:
/// `d2 = ||S - mu I||^2`, `b2 = min(d2, (1/n^2) * sum_i ||x_i x_i^T - S||^2)`,
/// and `rho = b2 / d2` (0 when the endpoints coincide).
pub fn linear_shrinkage(x: &DataMatrix, center: bool) -> Result<SymmetricMatrix> {
    Ok(linear_shrinkage_detailed(x, center)?.matrix)
}

/// As `linear_shrinkage`, exposing the intensity and target scale.
pub fn linear_shrinkage_detailed(x: &DataMatrix, center: bool) -> Result<ShrinkageEstimate> {
    let n = x.n_samples();
    let p = x.n_features();
    if n < 2 {
        return Err(Error::invalid("linear shrinkage needs at least 2 samples"));
    }
    let sample = sample_covariance(x, center)?;
    let mu = sample.trace() / p as f64;

    // d2 = ||S - mu I||_F^2 / p, full double sum.
    let mut d2 = 0.0;
    for j in 0..p {
        for k in 0..j {
            d2 += 2.0 * sample.get(j, k) * sample.get(j, k);
        }
        let diag = sample.get(j, j) - mu;
        d2 += diag * diag;
    }
    d2 /= p as f64;

    // b2_bar = (1/n^2) sum_i ||x_i x_i^T - S||_F^2 / p, on centered rows
    // when centering is requested.
    let values = x.values();
    let means: Vec<f64> = if center {
        (0..p)
            .map(|j| values.column(j).sum() / n as f64)
            .collect()
    } else {
        vec![0.0; p]
    };
    let mut b2_bar = 0.0;
    let mut centered = vec![0.0; p];
    for i in 0..n {
        for j in 0..p {
            centered[j] = values[(i, j)] - means[j];
        }
        let mut row_norm = 0.0;
        for j in 0..p {
            for k in 0..j {
                let d = centered[j] * centered[k] - sample.get(j, k);
                row_norm += 2.0 * d * d;
            }
            let d = centered[j] * centered[j] - sample.get(j, j);
            row_norm += d * d;
        }
        b2_bar += row_norm;
    }
    b2_bar /= (n * n) as f64 * p as f64;

    let b2 = b2_bar.min(d2);
    let intensity = if d2 > 0.0 { b2 / d2 } else { 0.0 };

    let matrix = SymmetricMatrix::from_fn(p, |j, k| {
        let target = if j == k { mu } else { 0.0 };
        intensity * target + (1.0 - intensity) * sample.get(j, k)
    });
    Ok(ShrinkageEstimate {
        matrix,
        intensity,
        target_scale: mu,
    })
}
