//! k-nearest-neighbor regression on standardized features.

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::regress::{RegressionDataset, StandardizationParams};

/// A fitted kNN regressor: the standardized training set, its responses,
/// and the neighbor count. Distances are Euclidean in standardized space;
/// distance ties break toward the lower training-row index.
#[derive(Debug, Clone)]
pub struct KnnModel {
    standardized: Array2<f64>,
    responses: Vec<f64>,
    params: StandardizationParams,
    neighbors: usize,
}

/// Fits a kNN regressor with `neighbors` nearest points, 1 <= k <= N.
pub fn fit_knn(data: &RegressionDataset, neighbors: usize) -> Result<KnnModel> {
    if neighbors == 0 || neighbors > data.n_rows() {
        return Err(Error::invalid(format!(
            "neighbor count {neighbors} outside 1..={}",
            data.n_rows()
        )));
    }
    let params = StandardizationParams::fit(data.features());
    Ok(KnnModel {
        standardized: params.transform(data.features()),
        responses: data.responses().to_vec(),
        params,
        neighbors,
    })
}

/// Reused per-query buffers.
#[derive(Default)]
struct Scratch {
    query: Vec<f64>,
    distances: Vec<f64>,
    heap: Vec<(f64, u32)>,
}

impl KnnModel {
    pub fn neighbors(&self) -> usize {
        self.neighbors
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let d = self.standardized.ncols();
        if x.len() != d {
            return Err(Error::invalid(format!(
                "query has {} dims, model expects {d}",
                x.len()
            )));
        }
        let mut scratch = Scratch::default();
        scratch.query.resize(d, 0.0);
        self.params.transform_row(x, &mut scratch.query);
        Ok(self.predict_standardized(&mut scratch))
    }

    /// Prediction for the standardized query in `scratch.query`. Two
    /// passes: a branch-free distance sweep into a flat buffer, then a
    /// selection scan that keeps the k nearest in a bounded max-heap
    /// ordered by (distance, training-row index).
    fn predict_standardized(&self, scratch: &mut Scratch) -> f64 {
        // Distance buffer sized to stay L1-resident.
        const BLOCK: usize = 2048;

        let n = self.standardized.nrows();
        let d = self.standardized.ncols();
        let flat = self.standardized.as_slice().expect("row-major features");
        let k = self.neighbors;

        let heap = &mut scratch.heap;
        heap.clear();
        scratch.distances.resize(BLOCK.min(n), 0.0);
        // Worst kept distance; candidates above it cannot enter the heap,
        // and ties are resolved inside `offer` by the row index.
        let mut worst = f64::INFINITY;
        let mut start = 0;
        while start < n {
            let end = (start + BLOCK).min(n);
            let distances = &mut scratch.distances[..end - start];
            fill_squared_distances(
                &flat[start * d..end * d],
                d,
                &scratch.query,
                distances,
            );
            for (offset, &dist) in distances.iter().enumerate() {
                if dist <= worst {
                    offer(heap, k, (dist, (start + offset) as u32));
                    if heap.len() == k {
                        worst = heap[0].0;
                    }
                }
            }
            start = end;
        }

        let mut acc = 0.0;
        for &(_, i) in heap.iter() {
            acc += self.responses[i as usize];
        }
        acc / k as f64
    }

    /// Predicts every row of `queries`, in parallel across rows. Results
    /// are assembled by row index and each row's computation is identical
    /// to `predict`, so output is independent of scheduling.
    pub fn predict_batch(&self, queries: &Array2<f64>) -> Result<Vec<f64>> {
        let d = self.standardized.ncols();
        if queries.ncols() != d {
            return Err(Error::invalid(format!(
                "queries have {} dims, model expects {d}",
                queries.ncols()
            )));
        }
        let flat = queries.as_slice().expect("row-major queries");
        let out: Vec<f64> = (0..queries.nrows())
            .into_par_iter()
            .map_init(Scratch::default, |scratch, i| {
                scratch.query.resize(d, 0.0);
                self.params
                    .transform_row(&flat[i * d..(i + 1) * d], &mut scratch.query);
                self.predict_standardized(scratch)
            })
            .collect();
        Ok(out)
    }
}

/// Squared Euclidean distances from `query` to every training row. Small
/// dimensions get fully unrolled inner loops; the in-sample feature
/// dimensions are 3(M-1) off-diagonal and M-1 diagonal, so these cases
/// dominate.
fn fill_squared_distances(flat: &[f64], d: usize, query: &[f64], out: &mut [f64]) {
    macro_rules! sweep {
        ($dim:expr) => {{
            for (dst, chunk) in out.iter_mut().zip(flat.chunks_exact($dim)) {
                let mut acc = 0.0;
                for c in 0..$dim {
                    let diff = chunk[c] - query[c];
                    acc += diff * diff;
                }
                *dst = acc;
            }
        }};
    }
    match d {
        1 => sweep!(1),
        2 => sweep!(2),
        3 => sweep!(3),
        4 => sweep!(4),
        6 => sweep!(6),
        12 => sweep!(12),
        other => sweep!(other),
    }
}

/// Lexicographic (distance, index) order; the heap keeps the k smallest, so
/// distance ties resolve toward the lower training-row index.
#[inline]
fn candidate_less(a: (f64, u32), b: (f64, u32)) -> bool {
    match a.0.total_cmp(&b.0) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => a.1 < b.1,
    }
}

/// Offers a candidate to a max-heap capped at `k` entries; the root is the
/// current worst of the kept neighbors.
#[inline]
fn offer(heap: &mut Vec<(f64, u32)>, k: usize, candidate: (f64, u32)) {
    if heap.len() < k {
        heap.push(candidate);
        let mut child = heap.len() - 1;
        while child > 0 {
            let parent = (child - 1) / 2;
            if candidate_less(heap[parent], heap[child]) {
                heap.swap(parent, child);
                child = parent;
            } else {
                break;
            }
        }
    } else if candidate_less(candidate, heap[0]) {
        heap[0] = candidate;
        let mut parent = 0;
        loop {
            let left = 2 * parent + 1;
            if left >= heap.len() {
                break;
            }
            let right = left + 1;
            let bigger = if right < heap.len() && candidate_less(heap[left], heap[right]) {
                right
            } else {
                left
            };
            if candidate_less(heap[parent], heap[bigger]) {
                heap.swap(parent, bigger);
                parent = bigger;
            } else {
                break;
            }
        }
    }
}
