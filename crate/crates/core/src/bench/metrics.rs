use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{GraspError, Result};
use crate::estimators::Estimate;
use crate::geometry::{orientation_error, sphere_iou};
use crate::synthgen::LabeledSample;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalThresholds {
    /// Minimum box IoU for a shape estimate to count as accurate.
    pub iou: f64,
    /// Maximum orientation error for a successful grasp, degrees.
    pub orientation_deg: f64,
}

impl Default for EvalThresholds {
    fn default() -> Self {
        Self {
            iou: 0.75,
            orientation_deg: 8.0,
        }
    }
}

impl EvalThresholds {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou > 0.0 && self.orientation_deg > 0.0) {
            return Err(GraspError::InvalidArgument(format!(
                "thresholds must be positive, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Aggregate scores for one method on one set of clouds.
///
/// Rejected predictions count as misses in every rate but are left out of
/// the means, which are `None` when nothing was fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub samples: usize,
    /// Predictions that produced a sphere.
    pub fitted: usize,
    /// Fitted predictions that also produced an in-range grasp pose.
    pub posed: usize,
    /// Fraction of samples with IoU at or above the threshold.
    pub shape_accuracy: f64,
    pub mean_iou: Option<f64>,
    /// Mean over posed predictions, degrees.
    pub mean_orientation_error_deg: Option<f64>,
    /// Fraction of samples with orientation error within the threshold.
    pub orientation_success_rate: f64,
    /// Grasp proxy: orientation within the threshold and IoU at or above
    /// it. No gripper or plant physics is simulated.
    pub grasp_success_rate: f64,
    /// Rejections by error kind; these plus `fitted` make up `samples`.
    pub failures: BTreeMap<String, usize>,
}

/// Scores aligned predictions against ground truth.
pub fn evaluate(
    predictions: &[Result<Estimate>],
    truths: &[LabeledSample],
    thresholds: &EvalThresholds,
) -> Result<Metrics> {
    if predictions.len() != truths.len() {
        return Err(GraspError::LengthMismatch {
            left: predictions.len(),
            right: truths.len(),
        });
    }
    let n = truths.len();
    let mut failures = BTreeMap::new();
    let (mut fitted, mut posed, mut accurate, mut oriented, mut grasped) = (0, 0, 0, 0, 0);
    let (mut iou_sum, mut err_sum) = (0.0, 0.0);
    for (pred, truth) in predictions.iter().zip(truths) {
        let est = match pred {
            Ok(e) => e,
            Err(e) => {
                *failures.entry(e.kind().to_string()).or_insert(0) += 1;
                continue;
            }
        };
        fitted += 1;
        let iou = sphere_iou(&est.sphere, &truth.sphere);
        iou_sum += iou;
        let shape_ok = iou >= thresholds.iou;
        accurate += shape_ok as usize;
        if let Some(pose) = &est.pose {
            posed += 1;
            let err = orientation_error(pose, &truth.pose());
            err_sum += err;
            let orient_ok = err <= thresholds.orientation_deg;
            oriented += orient_ok as usize;
            grasped += (orient_ok && shape_ok) as usize;
        }
    }
    let rate = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    let mean = |sum: f64, k: usize| (k > 0).then(|| sum / k as f64);
    Ok(Metrics {
        samples: n,
        fitted,
        posed,
        shape_accuracy: rate(accurate),
        mean_iou: mean(iou_sum, fitted),
        mean_orientation_error_deg: mean(err_sum, posed),
        orientation_success_rate: rate(oriented),
        grasp_success_rate: rate(grasped),
        failures,
    })
}
