//! Benchmark configuration: the estimator registry and the strictly parsed
//! TOML config files for the `simulate` and `split-eval` protocols.
//!
//! Config files are versioned (`version = 1`) and parsed strictly: unknown
//! keys are errors.

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::jackknife::{self, FeatureLayout, JackknifeConfig, PdFloor};
use crate::linalg::{DataMatrix, SymmetricMatrix};
use crate::regress::{KnnNeighbors, RegressorSpec, TreeParams};
use crate::simgen::{DistributionSpec, ModelSpec};
use crate::{baselines, rng};

const CONFIG_VERSION: u32 = 1;

/// The estimator names a config may list.
pub const ESTIMATOR_NAMES: [&str; 5] = ["sample", "linear", "knn", "clustered_lr", "tree"];

/// A named covariance estimator ready to run on a data matrix.
#[derive(Debug, Clone)]
pub struct Estimator {
    pub name: String,
    pub kind: EstimatorKind,
}

#[derive(Debug, Clone)]
pub enum EstimatorKind {
    Sample,
    Linear,
    /// Jackknife regression; `seed` and `center` are injected per call.
    Jackknife(JackknifeConfig),
}

impl Estimator {
    /// Builds an estimator from its config name, applying any jackknife
    /// overrides.
    pub fn from_name(name: &str, overrides: &JackknifeSection) -> Result<Estimator> {
        let kind = match name {
            "sample" => EstimatorKind::Sample,
            "linear" => EstimatorKind::Linear,
            "knn" => {
                let neighbors = match (overrides.knn_neighbors, overrides.knn_cross_validate) {
                    (Some(_), Some(true)) => {
                        return Err(Error::Config(
                            "set either knn_neighbors or knn_cross_validate, not both".into(),
                        ))
                    }
                    (Some(k), _) => KnnNeighbors::Fixed(k),
                    (None, Some(true)) => KnnNeighbors::CrossValidated {
                        train_fraction: 0.8,
                    },
                    _ => KnnNeighbors::SqrtN,
                };
                EstimatorKind::Jackknife(overrides.build(
                    RegressorSpec::Knn {
                        neighbors: neighbors.clone(),
                    },
                    RegressorSpec::Knn { neighbors },
                )?)
            }
            "clustered_lr" => EstimatorKind::Jackknife(overrides.build(
                RegressorSpec::ClusteredLr {
                    clusters: overrides.offdiag_clusters.unwrap_or(10),
                },
                RegressorSpec::ClusteredLr {
                    clusters: overrides.diag_clusters.unwrap_or(3),
                },
            )?),
            "tree" => {
                let params = TreeParams {
                    min_split: overrides.tree_min_split.unwrap_or(20),
                    min_bucket: overrides.tree_min_bucket.unwrap_or(7),
                    max_depth: overrides.tree_max_depth.unwrap_or(30),
                    complexity: overrides.tree_complexity.unwrap_or(0.01),
                };
                EstimatorKind::Jackknife(
                    overrides
                        .build(RegressorSpec::Tree(params.clone()), RegressorSpec::Tree(params))?,
                )
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown estimator '{other}'; expected one of {ESTIMATOR_NAMES:?}"
                )))
            }
        };
        Ok(Estimator {
            name: name.to_string(),
            kind,
        })
    }

    /// Minimum sample count this estimator can run on.
    pub fn min_samples(&self) -> usize {
        match &self.kind {
            EstimatorKind::Sample | EstimatorKind::Linear => 2,
            EstimatorKind::Jackknife(cfg) => 2 * cfg.groups,
        }
    }

    /// Runs the estimator. `seed` feeds the jackknife's internal splits and
    /// regressor seeds; the baselines ignore it.
    pub fn estimate(
        &self,
        x: &DataMatrix,
        center: bool,
        seed: u64,
    ) -> Result<SymmetricMatrix> {
        match &self.kind {
            EstimatorKind::Sample => baselines::sample_estimator(x, center),
            EstimatorKind::Linear => baselines::linear_shrinkage(x, center),
            EstimatorKind::Jackknife(cfg) => {
                let mut cfg = cfg.clone();
                cfg.center = center;
                cfg.seed = seed;
                jackknife::estimate(x, &cfg)
            }
        }
    }
}

/// Optional `[jackknife]` overrides shared by all jackknife estimators in a
/// config.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JackknifeSection {
    pub groups: Option<usize>,
    pub repeats: Option<usize>,
    /// "sorted" (default), "group_order", or "pooled".
    pub feature_layout: Option<String>,
    /// Fixed positive-definite floor; default is the scale-relative rule.
    pub pd_floor: Option<f64>,
    pub knn_neighbors: Option<usize>,
    pub knn_cross_validate: Option<bool>,
    pub offdiag_clusters: Option<usize>,
    pub diag_clusters: Option<usize>,
    pub tree_min_split: Option<usize>,
    pub tree_min_bucket: Option<usize>,
    pub tree_max_depth: Option<usize>,
    pub tree_complexity: Option<f64>,
}

impl JackknifeSection {
    fn build(&self, offdiag: RegressorSpec, diag: RegressorSpec) -> Result<JackknifeConfig> {
        let mut cfg = JackknifeConfig::new(offdiag, diag);
        if let Some(groups) = self.groups {
            cfg.groups = groups;
        }
        if let Some(repeats) = self.repeats {
            cfg.repeats = repeats;
        }
        if let Some(layout) = &self.feature_layout {
            cfg.feature_layout = match layout.as_str() {
                "sorted" => FeatureLayout::SortedByCovariance,
                "group_order" => FeatureLayout::GroupOrder,
                "pooled" => FeatureLayout::Pooled,
                other => {
                    return Err(Error::Config(format!(
                        "unknown feature_layout '{other}'; expected sorted, group_order, or pooled"
                    )))
                }
            };
        }
        if let Some(floor) = self.pd_floor {
            if !(floor > 0.0) {
                return Err(Error::Config(format!(
                    "pd_floor must be positive, got {floor}"
                )));
            }
            cfg.pd_floor = PdFloor::Fixed(floor);
        }
        Ok(cfg)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulationConfigFile {
    version: u32,
    models: Vec<String>,
    distributions: Vec<String>,
    dims: Vec<usize>,
    samples: usize,
    replicates: usize,
    estimators: Vec<String>,
    seed: u64,
    #[serde(default)]
    center: bool,
    #[serde(default)]
    jackknife: JackknifeSection,
}

/// A validated simulation benchmark configuration.
#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub models: Vec<String>,
    pub distributions: Vec<DistributionSpec>,
    pub dims: Vec<usize>,
    pub samples: usize,
    pub replicates: usize,
    pub estimators: Vec<Estimator>,
    pub seed: u64,
    pub center: bool,
}

impl SimulationConfig {
    pub fn from_toml(text: &str) -> Result<SimulationConfig> {
        let file: SimulationConfigFile =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if file.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {}; this build reads version {CONFIG_VERSION}",
                file.version
            )));
        }
        if file.replicates < 1 {
            return Err(Error::Config("replicates must be >= 1".into()));
        }
        if file.models.is_empty()
            || file.distributions.is_empty()
            || file.dims.is_empty()
            || file.estimators.is_empty()
        {
            return Err(Error::Config(
                "models, distributions, dims, and estimators must be non-empty".into(),
            ));
        }
        // Validate model names now; matrices are built per (model, dim).
        for name in &file.models {
            ModelSpec::by_name(name, 2, 0)?;
        }
        let distributions = file
            .distributions
            .iter()
            .map(|name| DistributionSpec::by_name(name))
            .collect::<Result<Vec<_>>>()?;
        let estimators = build_estimators(&file.estimators, &file.jackknife)?;
        for estimator in &estimators {
            if file.samples < estimator.min_samples() {
                return Err(Error::Config(format!(
                    "estimator '{}' needs at least {} samples, config has {}",
                    estimator.name,
                    estimator.min_samples(),
                    file.samples
                )));
            }
        }
        for &dim in &file.dims {
            if dim < 2 {
                return Err(Error::Config(format!("dims entries must be >= 2, got {dim}")));
            }
        }
        Ok(SimulationConfig {
            models: file.models,
            distributions,
            dims: file.dims,
            samples: file.samples,
            replicates: file.replicates,
            estimators,
            seed: file.seed,
            center: file.center,
        })
    }

    /// The desk-scale preset: every model and distribution at p in
    /// {30, 100}, n = 100, 50 replicates.
    pub fn desk_preset() -> &'static str {
        include_str!("../../configs/desk.toml")
    }

    /// The paper-scale preset: p in {30, 100, 200}, 200 replicates.
    pub fn paper_preset() -> &'static str {
        include_str!("../../configs/paper_scale.toml")
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SplitEvalConfigFile {
    version: u32,
    train_samples: usize,
    test_samples: usize,
    #[serde(default = "default_repeats")]
    repeats: usize,
    estimators: Vec<String>,
    seed: u64,
    #[serde(default)]
    jackknife: JackknifeSection,
}

fn default_repeats() -> usize {
    200
}

/// A validated train/test split-evaluation configuration. Estimation and
/// the test covariance both use the centered (n - 1) convention, the real-
/// data convention.
#[derive(Debug, Clone)]
pub struct SplitEvalConfig {
    pub train_samples: usize,
    pub test_samples: usize,
    pub repeats: usize,
    pub estimators: Vec<Estimator>,
    pub seed: u64,
}

impl SplitEvalConfig {
    pub fn from_toml(text: &str) -> Result<SplitEvalConfig> {
        let file: SplitEvalConfigFile =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if file.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {}; this build reads version {CONFIG_VERSION}",
                file.version
            )));
        }
        if file.repeats < 1 {
            return Err(Error::Config("repeats must be >= 1".into()));
        }
        if file.test_samples < 2 {
            return Err(Error::Config(
                "test_samples must be >= 2 for a centered test covariance".into(),
            ));
        }
        let estimators = build_estimators(&file.estimators, &file.jackknife)?;
        for estimator in &estimators {
            if file.train_samples < estimator.min_samples() {
                return Err(Error::Config(format!(
                    "estimator '{}' needs at least {} training samples, config has {}",
                    estimator.name,
                    estimator.min_samples(),
                    file.train_samples
                )));
            }
        }
        Ok(SplitEvalConfig {
            train_samples: file.train_samples,
            test_samples: file.test_samples,
            repeats: file.repeats,
            estimators,
            seed: file.seed,
        })
    }

    /// Validates the config against an actual dataset size.
    pub fn validate_for(&self, n_samples: usize) -> Result<()> {
        if self.train_samples + self.test_samples > n_samples {
            return Err(Error::invalid(format!(
                "train ({}) + test ({}) exceeds the {} available samples",
                self.train_samples, self.test_samples, n_samples
            )));
        }
        Ok(())
    }
}

fn build_estimators(names: &[String], overrides: &JackknifeSection) -> Result<Vec<Estimator>> {
    let mut estimators = Vec::with_capacity(names.len());
    for name in names {
        if estimators.iter().any(|e: &Estimator| &e.name == name) {
            return Err(Error::Config(format!("duplicate estimator '{name}'")));
        }
        estimators.push(Estimator::from_name(name, overrides)?);
    }
    Ok(estimators)
}

/// Derived seed for one estimator on one replicate; keyed by name so adding
/// or removing estimators never changes another estimator's stream.
pub(crate) fn estimator_seed(
    master: u64,
    model: &str,
    distribution: &str,
    dim: usize,
    replicate: usize,
    estimator: &str,
) -> u64 {
    rng::child_seed(
        master,
        &[
            3,
            rng::label_hash(model),
            rng::label_hash(distribution),
            dim as u64,
            replicate as u64,
            rng::label_hash(estimator),
        ],
    )
}
