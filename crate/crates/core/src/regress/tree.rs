//! CART-style regression tree: greedy binary splitting on raw features,
//! maximizing the squared-error reduction at each node.

use crate::error::{Error, Result};
use crate::regress::RegressionDataset;

/// Stopping parameters. The defaults freeze the conventional recursive-
/// partitioning values: a node must hold at least `min_split` points to be
/// considered, both children must hold at least `min_bucket`, depth is
/// capped at `max_depth`, and a split must reduce the squared error by at
/// least `complexity` times the root squared error.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeParams {
    pub min_split: usize,
    pub min_bucket: usize,
    pub max_depth: usize,
    pub complexity: f64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            min_split: 20,
            min_bucket: 7,
            max_depth: 30,
            complexity: 0.01,
        }
    }
}

/// A node of the fitted tree. Queries with `x[dim] < threshold` descend
/// left; thresholds are midpoints between consecutive distinct training
/// values.
#[derive(Debug, Clone)]
pub enum TreeNode {
    Leaf {
        prediction: f64,
        count: usize,
    },
    Split {
        dim: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

/// A fitted regression tree.
#[derive(Debug, Clone)]
pub struct TreeModel {
    root: TreeNode,
    dims: usize,
}

/// Grows a tree on raw (unstandardized) features. Degenerate data yields a
/// single-leaf tree; this never fails on valid datasets.
pub fn fit_tree(data: &RegressionDataset, params: &TreeParams) -> Result<TreeModel> {
    let rows: Vec<usize> = (0..data.n_rows()).collect();
    let root_sse = node_sse(data, &rows);
    let root = grow(data, rows, 0, root_sse, params);
    Ok(TreeModel {
        root,
        dims: data.n_dims(),
    })
}

fn node_mean(data: &RegressionDataset, rows: &[usize]) -> f64 {
    rows.iter().map(|&i| data.responses()[i]).sum::<f64>() / rows.len() as f64
}

fn node_sse(data: &RegressionDataset, rows: &[usize]) -> f64 {
    let mean = node_mean(data, rows);
    rows.iter()
        .map(|&i| {
            let d = data.responses()[i] - mean;
            d * d
        })
        .sum()
}

/// Rounding-noise floor for SSE reductions, relative to the node's
/// second-moment scale: reductions below it are indistinguishable from
/// zero, e.g. on constant responses.
const REDUCTION_NOISE_REL: f64 = 1e-11;

struct BestSplit {
    dim: usize,
    threshold: f64,
    reduction: f64,
    noise: f64,
}

/// Scans every (dimension, threshold) candidate for the largest SSE
/// reduction; ties keep the first candidate found, i.e. the lower dimension
/// and then the lower threshold.
fn best_split(data: &RegressionDataset, rows: &[usize], params: &TreeParams) -> Option<BestSplit> {
    let total_sum: f64 = rows.iter().map(|&i| data.responses()[i]).sum();
    let total_sq: f64 = rows
        .iter()
        .map(|&i| data.responses()[i] * data.responses()[i])
        .sum();
    let n = rows.len();
    let parent_sse = total_sq - total_sum * total_sum / n as f64;
    let noise = REDUCTION_NOISE_REL * (total_sq.abs() + total_sum * total_sum / n as f64);

    let mut best: Option<BestSplit> = None;
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for dim in 0..data.n_dims() {
        order.clear();
        order.extend_from_slice(rows);
        order.sort_by(|&a, &b| {
            data.feature_row(a)[dim]
                .total_cmp(&data.feature_row(b)[dim])
                .then(a.cmp(&b))
        });

        let mut left_sum = 0.0;
        let mut left_sq = 0.0;
        for pos in 0..n - 1 {
            let y = data.responses()[order[pos]];
            left_sum += y;
            left_sq += y * y;
            let here = data.feature_row(order[pos])[dim];
            let next = data.feature_row(order[pos + 1])[dim];
            if here == next {
                continue;
            }
            let threshold = 0.5 * (here + next);
            // Guard against the midpoint collapsing onto the lower value,
            // which would route the boundary rows inconsistently.
            if !(threshold > here) {
                continue;
            }
            let n_left = pos + 1;
            let n_right = n - n_left;
            if n_left < params.min_bucket || n_right < params.min_bucket {
                continue;
            }
            let right_sum = total_sum - left_sum;
            let right_sq = total_sq - left_sq;
            let left_sse = left_sq - left_sum * left_sum / n_left as f64;
            let right_sse = right_sq - right_sum * right_sum / n_right as f64;
            let reduction = parent_sse - left_sse - right_sse;
            let better = match &best {
                None => true,
                Some(current) => reduction > current.reduction,
            };
            if better {
                best = Some(BestSplit {
                    dim,
                    threshold,
                    reduction,
                    noise,
                });
            }
        }
    }
    best
}

fn grow(
    data: &RegressionDataset,
    rows: Vec<usize>,
    depth: usize,
    root_sse: f64,
    params: &TreeParams,
) -> TreeNode {
    let leaf = |rows: &[usize]| TreeNode::Leaf {
        prediction: node_mean(data, rows),
        count: rows.len(),
    };
    if rows.len() < params.min_split || depth >= params.max_depth {
        return leaf(&rows);
    }
    let Some(split) = best_split(data, &rows, params) else {
        return leaf(&rows);
    };
    if !(split.reduction > split.noise) || split.reduction < params.complexity * root_sse {
        return leaf(&rows);
    }
    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
        .into_iter()
        .partition(|&i| data.feature_row(i)[split.dim] < split.threshold);
    TreeNode::Split {
        dim: split.dim,
        threshold: split.threshold,
        left: Box::new(grow(data, left_rows, depth + 1, root_sse, params)),
        right: Box::new(grow(data, right_rows, depth + 1, root_sse, params)),
    }
}

impl TreeModel {
    pub fn root(&self) -> &TreeNode {
        &self.root
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dims {
            return Err(Error::invalid(format!(
                "query has {} dims, model expects {}",
                x.len(),
                self.dims
            )));
        }
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { prediction, .. } => return Ok(*prediction),
                TreeNode::Split {
                    dim,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*dim] < *threshold { left } else { right };
                }
            }
        }
    }

    /// Number of leaves; handy for structure assertions.
    pub fn leaf_count(&self) -> usize {
        fn count(node: &TreeNode) -> usize {
            match node {
                TreeNode::Leaf { .. } => 1,
                TreeNode::Split { left, right, .. } => count(left) + count(right),
            }
        }
        count(&self.root)
    }
}
