use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::{evaluate, EvalThresholds, Metrics};
use crate::error::{GraspError, Result};
use crate::estimators::{Estimator, HoughConfig, Method, PointNetEstimator, RansacConfig};
use crate::preprocess::PreprocessConfig;
use crate::seeding::{derive_seed, rng_from_seed};
use crate::synthgen::{corrupt, read_dataset, Condition, GenConfig, LabeledSample};
use crate::tinynn::Checkpoint;

/// Everything besides data, checkpoint and seed that shapes a suite run.
/// It is copied into the report so numbers always travel with the
/// hyperparameters that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    /// Corruption magnitudes for the condition matrix.
    pub generator: GenConfig,
    pub thresholds: EvalThresholds,
    pub ransac: RansacConfig,
    pub hough: HoughConfig,
    /// Preprocessing for the classical estimators.
    pub preprocess: PreprocessConfig,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            generator: GenConfig::default(),
            thresholds: EvalThresholds::default(),
            ransac: RansacConfig::default(),
            hough: HoughConfig::default(),
            preprocess: PreprocessConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionRow {
    pub method: Method,
    pub condition: Condition,
    #[serde(flatten)]
    pub metrics: Metrics,
}

/// Accuracy drop from the normal to the noise condition per method, and
/// whether the learned estimator degrades least.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRobustness {
    pub drops: Vec<(Method, f64)>,
    /// The learned drop is strictly smaller than every classical drop.
    pub learned_degrades_least: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub seed: u64,
    pub config: SuiteConfig,
    /// Rows ordered by method, then condition.
    pub rows: Vec<ConditionRow>,
    /// Present when the learned estimator, at least one classical one and
    /// both the normal and noise conditions were run.
    pub noise_robustness: Option<NoiseRobustness>,
}

impl ConditionReport {
    /// Report with no rows.
    pub fn empty(seed: u64, config: SuiteConfig) -> Self {
        Self {
            seed,
            config,
            rows: Vec::new(),
            noise_robustness: None,
        }
    }

    pub fn row(&self, method: Method, condition: Condition) -> Option<&ConditionRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.condition == condition)
    }

    pub fn methods(&self) -> Vec<Method> {
        let mut m: Vec<Method> = self.rows.iter().map(|r| r.method).collect();
        m.sort();
        m.dedup();
        m
    }

    pub fn conditions(&self) -> Vec<Condition> {
        let mut c: Vec<Condition> = self.rows.iter().map(|r| r.condition).collect();
        c.sort();
        c.dedup();
        c
    }

    fn noise_check(rows: &[ConditionRow]) -> Option<NoiseRobustness> {
        let acc = |m: Method, c: Condition| {
            rows.iter()
                .find(|r| r.method == m && r.condition == c)
                .map(|r| r.metrics.shape_accuracy)
        };
        let drop = |m: Method| Some(acc(m, Condition::Normal)? - acc(m, Condition::Noise)?);
        let learned = drop(Method::Pointnet)?;
        let classical: Vec<(Method, f64)> = Method::ALL
            .into_iter()
            .filter(|m| m.is_classical())
            .filter_map(|m| Some((m, drop(m)?)))
            .collect();
        if classical.is_empty() {
            return None;
        }
        Some(NoiseRobustness {
            learned_degrades_least: classical.iter().all(|&(_, d)| learned < d),
            drops: std::iter::once((Method::Pointnet, learned)).chain(classical).collect(),
        })
    }
}

/// Stable tags for seed derivation, independent of request order.
fn condition_tag(c: Condition) -> u64 {
    Condition::ALL.iter().position(|&x| x == c).expect("listed") as u64
}

fn method_tag(m: Method) -> u64 {
    Method::ALL.iter().position(|&x| x == m).expect("listed") as u64
}

/// Builds the estimator for `method`; the learned one needs a checkpoint.
pub fn build_estimator(
    method: Method,
    checkpoint: Option<&Checkpoint>,
    config: &SuiteConfig,
) -> Result<Estimator> {
    Ok(match method {
        Method::Pointnet => {
            let ck = checkpoint.ok_or(GraspError::MissingCheckpoint)?;
            Estimator::PointNet(PointNetEstimator::from_checkpoint(ck)?)
        }
        Method::Ransac => Estimator::Ransac {
            config: config.ransac.clone(),
            preprocess: config.preprocess.clone(),
        },
        Method::Hough => Estimator::Hough {
            config: config.hough.clone(),
            preprocess: config.preprocess.clone(),
        },
    })
}

/// Runs every method on every condition of the in-memory test set.
///
/// For each condition the clean samples are corrupted once, with sample
/// `i` drawing from `derive_seed(seed, [1, condition, i])`, and every method
/// sees the same corrupted cloud. Estimator randomness comes from
/// `derive_seed(seed, [2, condition, i, method])`.
pub fn run_suite_on(
    methods: &[Method],
    samples: &[LabeledSample],
    conditions: &[Condition],
    config: &SuiteConfig,
    checkpoint: Option<&Checkpoint>,
    seed: u64,
) -> Result<ConditionReport> {
    config.thresholds.validate()?;
    config.generator.validate()?;
    let mut methods = methods.to_vec();
    methods.sort();
    methods.dedup();
    let mut conditions = conditions.to_vec();
    conditions.sort();
    conditions.dedup();
    let estimators = methods
        .iter()
        .map(|&m| build_estimator(m, checkpoint, config))
        .collect::<Result<Vec<_>>>()?;

    let mut predictions: Vec<Vec<Vec<Result<_>>>> = methods.iter().map(|_| Vec::new()).collect();
    let mut truths = Vec::new();
    for &cond in &conditions {
        let ct = condition_tag(cond);
        let corrupted: Vec<LabeledSample> = samples
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let mut rng = rng_from_seed(derive_seed(seed, &[1, ct, i as u64]));
                corrupt(s, &config.generator, cond, &mut rng)
            })
            .collect();
        for (k, (est, &m)) in estimators.iter().zip(&methods).enumerate() {
            let preds = corrupted
                .iter()
                .enumerate()
                .map(|(i, s)| est.estimate(&s.points, derive_seed(seed, &[2, ct, i as u64, method_tag(m)])))
                .collect();
            predictions[k].push(preds);
        }
        truths.push(corrupted);
    }

    let mut rows = Vec::new();
    for (k, &method) in methods.iter().enumerate() {
        for (j, &condition) in conditions.iter().enumerate() {
            rows.push(ConditionRow {
                method,
                condition,
                metrics: evaluate(&predictions[k][j], &truths[j], &config.thresholds)?,
            });
        }
    }
    Ok(ConditionReport {
        seed,
        config: config.clone(),
        noise_robustness: ConditionReport::noise_check(&rows),
        rows,
    })
}

/// [`run_suite_on`] over a dataset file.
pub fn run_suite(
    methods: &[Method],
    dataset: impl AsRef<Path>,
    conditions: &[Condition],
    config: &SuiteConfig,
    checkpoint: Option<&Checkpoint>,
    seed: u64,
) -> Result<ConditionReport> {
    if methods.contains(&Method::Pointnet) && checkpoint.is_none() {
        return Err(GraspError::MissingCheckpoint);
    }
    let samples = read_dataset(dataset)?;
    run_suite_on(methods, &samples, conditions, config, checkpoint, seed)
}
