//! The jackknife-regression covariance estimator: repeated random group
//! splits, regression datasets built from held-in sufficient statistics,
//! regressor fitting, in-sample prediction, averaging across groups and
//! repetitions, and a final positive definite projection.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{
    self, project_pd_scaled, sample_covariance, symmetric_eigen, DataMatrix, SymmetricMatrix,
};
use crate::regress::{RegressionDataset, RegressorSpec};
use crate::rng;

// Seed-derivation path tags.
const TAG_SPLIT: u64 = 1;
const TAG_FIT_OFFDIAG: u64 = 2;
const TAG_FIT_DIAG: u64 = 3;

/// Disjoint groups of sample indices covering `0..n`; sizes differ by at
/// most one and every group holds at least two samples.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPartition {
    groups: Vec<Vec<usize>>,
    n_samples: usize,
}

impl GroupPartition {
    pub fn new(groups: Vec<Vec<usize>>, n_samples: usize) -> Result<Self> {
        let mut seen = vec![false; n_samples];
        let mut total = 0;
        for group in &groups {
            if group.len() < 2 {
                return Err(Error::invalid("every group needs at least 2 samples"));
            }
            for &i in group {
                if i >= n_samples || seen[i] {
                    return Err(Error::invalid(
                        "groups must disjointly cover the sample indices",
                    ));
                }
                seen[i] = true;
                total += 1;
            }
        }
        if total != n_samples {
            return Err(Error::invalid(format!(
                "groups cover {total} of {n_samples} samples"
            )));
        }
        let max = groups.iter().map(Vec::len).max().unwrap_or(0);
        let min = groups.iter().map(Vec::len).min().unwrap_or(0);
        if max - min > 1 {
            return Err(Error::invalid("group sizes must differ by at most 1"));
        }
        Ok(GroupPartition { groups, n_samples })
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }
}

/// Splits `0..n_samples` into `group_count` groups by dealing a seeded
/// uniform permutation round-robin. Deterministic given the arguments.
pub fn split_groups(n_samples: usize, group_count: usize, seed: u64) -> Result<GroupPartition> {
    if group_count < 2 {
        return Err(Error::invalid("need at least 2 groups"));
    }
    if n_samples < 2 * group_count {
        return Err(Error::invalid(format!(
            "need at least {} samples for {group_count} groups of 2, got {n_samples}",
            2 * group_count
        )));
    }
    let mut order: Vec<usize> = (0..n_samples).collect();
    let mut generator = rng::from_seed(seed);
    order.shuffle(&mut generator);
    let mut groups = vec![Vec::new(); group_count];
    for (pos, idx) in order.into_iter().enumerate() {
        groups[pos % group_count].push(idx);
    }
    GroupPartition::new(groups, n_samples)
}

/// The within-group variances and covariance summarizing one feature pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SufficientTriple {
    pub var_first: f64,
    pub var_second: f64,
    pub covariance: f64,
}

impl SufficientTriple {
    /// Cauchy-Schwarz and nonnegativity, with rounding headroom.
    pub fn is_valid(&self) -> bool {
        self.var_first >= 0.0
            && self.var_second >= 0.0
            && self.covariance.abs() <= (self.var_first * self.var_second).sqrt() + 1e-10
    }
}

/// Per-group sample covariance matrices plus group sizes.
#[derive(Debug, Clone)]
pub struct GroupStats {
    matrices: Vec<SymmetricMatrix>,
    sizes: Vec<usize>,
}

impl GroupStats {
    pub fn matrices(&self) -> &[SymmetricMatrix] {
        &self.matrices
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn group_count(&self) -> usize {
        self.matrices.len()
    }

    fn dim(&self) -> usize {
        self.matrices[0].dim()
    }

    /// Size-weighted average of the held-in group matrices; equals the
    /// uncentered sample covariance of the pooled held-in rows.
    fn pooled_excluding(&self, held_out: usize) -> SymmetricMatrix {
        let p = self.dim();
        let total: usize = self
            .sizes
            .iter()
            .enumerate()
            .filter(|&(g, _)| g != held_out)
            .map(|(_, &s)| s)
            .sum();
        SymmetricMatrix::from_fn(p, |j, k| {
            let mut acc = 0.0;
            for g in 0..self.group_count() {
                if g == held_out {
                    continue;
                }
                acc += self.sizes[g] as f64 * self.matrices[g].get(j, k);
            }
            acc / total as f64
        })
    }
}

/// Sample covariance of each group's rows, under the given centering
/// convention.
pub fn group_sufficient_stats(
    x: &DataMatrix,
    partition: &GroupPartition,
    center: bool,
) -> Result<GroupStats> {
    if partition.n_samples() != x.n_samples() {
        return Err(Error::invalid(format!(
            "partition covers {} samples, data has {}",
            partition.n_samples(),
            x.n_samples()
        )));
    }
    let mut matrices = Vec::with_capacity(partition.group_count());
    let mut sizes = Vec::with_capacity(partition.group_count());
    for group in partition.groups() {
        let rows = x.select_rows(group)?;
        matrices.push(sample_covariance(&rows, center)?);
        sizes.push(group.len());
    }
    Ok(GroupStats { matrices, sizes })
}

/// How held-in statistics become feature vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureLayout {
    /// One triple per held-in group, sorted ascending by the covariance
    /// component (ties by group index). The default: group labels are
    /// exchangeable, so sorting makes the regression function symmetric in
    /// group identity.
    #[default]
    SortedByCovariance,
    /// One triple per held-in group in group-index order.
    GroupOrder,
    /// A single triple from the pooled held-in statistics; ablation option.
    Pooled,
}

/// The feature triple for pair (j, k) of one group's matrix. The two
/// variance components enter in sorted order so that relabeling feature
/// columns cannot change the features: the estimate must be equivariant
/// under column permutations, and the covariance target is symmetric in
/// the pair.
fn pair_triple(matrix: &SymmetricMatrix, j: usize, k: usize) -> SufficientTriple {
    let a = matrix.get(j, j);
    let b = matrix.get(k, k);
    SufficientTriple {
        var_first: a.min(b),
        var_second: a.max(b),
        covariance: matrix.get(j, k),
    }
}

/// Builds the off-diagonal regression problem for one held-out group: one
/// row per pair j < k in lexicographic order; features concatenate the
/// held-in groups' sufficient triples; the response is the held-out group's
/// sample covariance for that pair.
pub fn build_offdiag_dataset(
    stats: &GroupStats,
    held_out: usize,
    layout: FeatureLayout,
) -> Result<RegressionDataset> {
    let group_count = stats.group_count();
    if group_count < 2 {
        return Err(Error::invalid("need at least 2 groups of statistics"));
    }
    if held_out >= group_count {
        return Err(Error::invalid(format!(
            "held-out group {held_out} outside 0..{group_count}"
        )));
    }
    let p = stats.dim();
    let n_rows = p * (p - 1) / 2;
    let dims = match layout {
        FeatureLayout::Pooled => 3,
        _ => 3 * (group_count - 1),
    };
    let pooled = match layout {
        FeatureLayout::Pooled => Some(stats.pooled_excluding(held_out)),
        _ => None,
    };

    let mut flat = Vec::with_capacity(n_rows * dims);
    let mut responses = Vec::with_capacity(n_rows);
    let mut triples: Vec<(SufficientTriple, usize)> = Vec::with_capacity(group_count - 1);
    for j in 0..p {
        for k in (j + 1)..p {
            match (&pooled, layout) {
                (Some(matrix), _) => {
                    let triple = pair_triple(matrix, j, k);
                    flat.extend_from_slice(&[triple.var_first, triple.var_second, triple.covariance]);
                }
                (None, layout) => {
                    triples.clear();
                    for g in 0..group_count {
                        if g == held_out {
                            continue;
                        }
                        triples.push((pair_triple(&stats.matrices[g], j, k), g));
                    }
                    if layout == FeatureLayout::SortedByCovariance {
                        triples.sort_by(|a, b| {
                            a.0.covariance.total_cmp(&b.0.covariance).then(a.1.cmp(&b.1))
                        });
                    }
                    for (triple, _) in &triples {
                        flat.extend_from_slice(&[
                            triple.var_first,
                            triple.var_second,
                            triple.covariance,
                        ]);
                    }
                }
            }
            responses.push(stats.matrices[held_out].get(j, k));
        }
    }
    let features = Array2::from_shape_vec((n_rows, dims), flat)
        .map_err(|e| Error::invalid(format!("bad shape: {e}")))?;
    RegressionDataset::new(features, responses)
}

/// Builds the diagonal regression problem for one held-out group: one row
/// per feature j; features are the held-in groups' variances of feature j,
/// sorted ascending by default; the response is the held-out group's
/// variance.
pub fn build_diag_dataset(
    stats: &GroupStats,
    held_out: usize,
    layout: FeatureLayout,
) -> Result<RegressionDataset> {
    let group_count = stats.group_count();
    if group_count < 2 {
        return Err(Error::invalid("need at least 2 groups of statistics"));
    }
    if held_out >= group_count {
        return Err(Error::invalid(format!(
            "held-out group {held_out} outside 0..{group_count}"
        )));
    }
    let p = stats.dim();
    let dims = match layout {
        FeatureLayout::Pooled => 1,
        _ => group_count - 1,
    };
    let pooled = match layout {
        FeatureLayout::Pooled => Some(stats.pooled_excluding(held_out)),
        _ => None,
    };

    let mut flat = Vec::with_capacity(p * dims);
    let mut responses = Vec::with_capacity(p);
    for j in 0..p {
        match (&pooled, layout) {
            (Some(matrix), _) => flat.push(matrix.get(j, j)),
            (None, layout) => {
                let mut values: Vec<(f64, usize)> = (0..group_count)
                    .filter(|&g| g != held_out)
                    .map(|g| (stats.matrices[g].get(j, j), g))
                    .collect();
                if layout == FeatureLayout::SortedByCovariance {
                    values.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                }
                flat.extend(values.iter().map(|&(v, _)| v));
            }
        }
        responses.push(stats.matrices[held_out].get(j, j));
    }
    let features = Array2::from_shape_vec((p, dims), flat)
        .map_err(|e| Error::invalid(format!("bad shape: {e}")))?;
    RegressionDataset::new(features, responses)
}

/// Positive definite floor policy for the final projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PdFloor {
    /// `1e-4 * max(lambda_max, 1)`, resolved from the averaged matrix.
    Scaled,
    /// A fixed positive floor.
    Fixed(f64),
}

impl Default for PdFloor {
    fn default() -> Self {
        PdFloor::Scaled
    }
}

/// Full configuration of the jackknife estimator.
#[derive(Debug, Clone)]
pub struct JackknifeConfig {
    /// Number of groups per split.
    pub groups: usize,
    /// Number of independent split repetitions.
    pub repeats: usize,
    pub offdiag_regressor: RegressorSpec,
    pub diag_regressor: RegressorSpec,
    pub feature_layout: FeatureLayout,
    pub pd_floor: PdFloor,
    /// Centering convention for the within-group covariances.
    pub center: bool,
    pub seed: u64,
}

impl JackknifeConfig {
    pub fn new(offdiag: RegressorSpec, diag: RegressorSpec) -> Self {
        JackknifeConfig {
            groups: 5,
            repeats: 5,
            offdiag_regressor: offdiag,
            diag_regressor: diag,
            feature_layout: FeatureLayout::default(),
            pd_floor: PdFloor::default(),
            center: false,
            seed: 0,
        }
    }

    /// The number of groups, repetitions, and the weight each (repetition,
    /// group) prediction carries in the final average.
    pub fn averaging_weights(&self) -> (usize, usize, f64) {
        (
            self.groups,
            self.repeats,
            1.0 / (self.groups as f64 * self.repeats as f64),
        )
    }

    pub fn validate(&self, n_samples: usize) -> Result<()> {
        if self.groups < 2 {
            return Err(Error::invalid("need at least 2 groups"));
        }
        if self.repeats < 1 {
            return Err(Error::invalid("need at least 1 split repetition"));
        }
        if n_samples < 2 * self.groups {
            return Err(Error::invalid(format!(
                "need at least {} samples for {} groups of 2, got {n_samples}",
                2 * self.groups,
                self.groups
            )));
        }
        if let PdFloor::Fixed(floor) = self.pd_floor {
            if !(floor > 0.0) {
                return Err(Error::invalid(format!(
                    "pd floor must be positive, got {floor}"
                )));
            }
        }
        Ok(())
    }
}

/// The estimate plus the quantities the projection was derived from.
#[derive(Debug, Clone)]
pub struct JackknifeEstimate {
    /// The final, positive definite estimate.
    pub estimate: SymmetricMatrix,
    /// The averaged predictions before projection.
    pub raw: SymmetricMatrix,
    /// The floor actually applied by the projection.
    pub pd_floor: f64,
}

/// Runs the full estimator. Deterministic given `(x, cfg)`.
pub fn estimate(x: &DataMatrix, cfg: &JackknifeConfig) -> Result<SymmetricMatrix> {
    Ok(estimate_detailed(x, cfg)?.estimate)
}

/// As `estimate`, but also exposes the pre-projection average and the floor.
pub fn estimate_detailed(x: &DataMatrix, cfg: &JackknifeConfig) -> Result<JackknifeEstimate> {
    cfg.validate(x.n_samples())?;
    let partitions: Vec<GroupPartition> = (0..cfg.repeats)
        .map(|rep| {
            split_groups(
                x.n_samples(),
                cfg.groups,
                rng::child_seed(cfg.seed, &[TAG_SPLIT, rep as u64]),
            )
        })
        .collect::<Result<_>>()?;
    estimate_with_partitions(x, cfg, &partitions)
}

/// Runs the estimator over explicitly supplied partitions, one per split
/// repetition; the estimator depends only on the partitions, not on row
/// order within groups. This is also the entry point the seed path feeds.
pub fn estimate_with_partitions(
    x: &DataMatrix,
    cfg: &JackknifeConfig,
    partitions: &[GroupPartition],
) -> Result<JackknifeEstimate> {
    if partitions.is_empty() {
        return Err(Error::invalid("need at least one partition"));
    }
    let p = x.n_features();
    let groups = cfg.groups;
    for partition in partitions {
        if partition.group_count() != groups {
            return Err(Error::invalid(format!(
                "partition has {} groups, config says {groups}",
                partition.group_count()
            )));
        }
    }

    let stats: Vec<GroupStats> = partitions
        .iter()
        .map(|partition| group_sufficient_stats(x, partition, cfg.center))
        .collect::<Result<_>>()?;

    // One prediction matrix per (repetition, held-out group), computed in
    // parallel and reduced in fixed order so results are bit-stable under
    // any scheduling.
    let jobs: Vec<(usize, usize)> = (0..partitions.len())
        .flat_map(|rep| (0..groups).map(move |held_out| (rep, held_out)))
        .collect();
    let per_job: Vec<Result<SymmetricMatrix>> = jobs
        .par_iter()
        .map(|&(rep, held_out)| {
            predict_one_fold(&stats[rep], held_out, cfg, rep, p)
        })
        .collect();

    let mut sum = SymmetricMatrix::zeros(p);
    for matrix in per_job {
        let matrix = matrix?;
        for j in 0..p {
            for k in 0..=j {
                sum.set(j, k, sum.get(j, k) + matrix.get(j, k));
            }
        }
    }
    let weight = 1.0 / (groups as f64 * partitions.len() as f64);
    let raw = SymmetricMatrix::from_fn(p, |j, k| sum.get(j, k) * weight);

    let (estimate, floor) = match cfg.pd_floor {
        PdFloor::Scaled => project_pd_scaled(&raw)?,
        PdFloor::Fixed(floor) => {
            let eig = symmetric_eigen(&raw)?;
            if eig.min_eigenvalue() >= floor {
                (raw.clone(), floor)
            } else {
                (linalg::project_pd(&raw, floor)?, floor)
            }
        }
    };
    Ok(JackknifeEstimate {
        estimate,
        raw,
        pd_floor: floor,
    })
}

/// Fits both regressors for one held-out group and assembles the in-sample
/// predictions into a symmetric matrix.
fn predict_one_fold(
    stats: &GroupStats,
    held_out: usize,
    cfg: &JackknifeConfig,
    rep: usize,
    p: usize,
) -> Result<SymmetricMatrix> {
    let offdiag_data = build_offdiag_dataset(stats, held_out, cfg.feature_layout)?;
    let diag_data = build_diag_dataset(stats, held_out, cfg.feature_layout)?;

    let offdiag_model = cfg.offdiag_regressor.fit(
        &offdiag_data,
        rng::child_seed(cfg.seed, &[TAG_FIT_OFFDIAG, rep as u64, held_out as u64]),
    )?;
    let diag_model = cfg.diag_regressor.fit(
        &diag_data,
        rng::child_seed(cfg.seed, &[TAG_FIT_DIAG, rep as u64, held_out as u64]),
    )?;

    let offdiag_predictions = offdiag_model.predict_batch(offdiag_data.features())?;
    let diag_predictions = diag_model.predict_batch(diag_data.features())?;

    let mut matrix = SymmetricMatrix::zeros(p);
    let mut row = 0;
    for j in 0..p {
        for k in (j + 1)..p {
            matrix.set(j, k, offdiag_predictions[row]);
            row += 1;
        }
    }
    for (j, &value) in diag_predictions.iter().enumerate() {
        matrix.set(j, j, value);
    }
    Ok(matrix)
}
