use rand::Rng;

use crate::error::{GraspError, Result};
use crate::geometry::{activate, denormalize, GraspPose, NormalizationConfig, Point3, SphereModel};
use crate::preprocess::{prepare_cloud, PreparedCloud, PreprocessConfig};
use crate::tinynn::{batch_from_clouds, Checkpoint, RegressorModel};

/// Predicted radii below this are treated as a sensing defect, metres.
pub const DEFAULT_RADIUS_FLOOR: f64 = 0.01;

/// A trained regressor bundled with the settings it was trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct PointNetEstimator {
    pub model: RegressorModel,
    pub normalization: NormalizationConfig,
    pub preprocess: PreprocessConfig,
    pub radius_floor: f64,
}

impl PointNetEstimator {
    pub fn new(
        model: RegressorModel,
        normalization: NormalizationConfig,
        preprocess: PreprocessConfig,
    ) -> Self {
        Self {
            model,
            normalization,
            preprocess,
            radius_floor: DEFAULT_RADIUS_FLOOR,
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        Ok(Self::new(ck.to_model()?, ck.normalization.clone(), ck.preprocess.clone()))
    }

    /// Raw cloud to sphere and pose.
    pub fn estimate(&self, points: &[Point3], rng: &mut impl Rng) -> Result<(SphereModel, GraspPose)> {
        let prepared = prepare_cloud(points, &self.preprocess, rng)?;
        self.estimate_prepared(&prepared)
    }

    /// Forward pass on an already prepared cloud.
    pub fn estimate_prepared(&self, prepared: &PreparedCloud) -> Result<(SphereModel, GraspPose)> {
        let batch = batch_from_clouds(&[prepared.points.as_slice()])?;
        let raw = self.model.predict_raw(&batch)?;
        let row: [f64; 6] = std::array::from_fn(|j| raw[[0, j]]);
        let united = activate(row);
        let radius = united.r * self.normalization.scale;
        if !(radius >= self.radius_floor) {
            return Err(GraspError::DegenerateOutput {
                radius,
                floor: self.radius_floor,
            });
        }
        denormalize(&united, &prepared.centroid, &self.normalization)
    }
}

/// One-shot convenience wrapper with the default preprocessing and floor.
pub fn pointnet_estimate(
    model: &RegressorModel,
    points: &[Point3],
    cfg: &NormalizationConfig,
    rng: &mut impl Rng,
) -> Result<(SphereModel, GraspPose)> {
    PointNetEstimator::new(model.clone(), cfg.clone(), PreprocessConfig::default())
        .estimate(points, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::rng_from_seed;
    use crate::synthgen::{generate_sample, GenConfig};
    use crate::tinynn::RegressorConfig;

    fn small_model() -> RegressorModel {
        let cfg = RegressorConfig {
            encoder_widths: vec![8, 16],
            head_widths: vec![8, 6],
            ..RegressorConfig::default()
        };
        RegressorModel::new(cfg, &mut rng_from_seed(2)).unwrap()
    }

    #[test]
    fn sparse_cloud_is_rejected() {
        let s = generate_sample(&GenConfig::default(), 1).unwrap();
        let r = pointnet_estimate(
            &small_model(),
            &s.points[..150],
            &NormalizationConfig::default(),
            &mut rng_from_seed(0),
        );
        assert!(matches!(r, Err(GraspError::InsufficientPoints { .. })));
    }

    #[test]
    fn tiny_radius_is_degenerate_output() {
        let mut model = small_model();
        // Force the radius logit far negative: exp(-10) * 0.3 is far below 1 cm.
        model.output.weight.column_mut(3).fill(0.0);
        model.output.bias[3] = -10.0;
        let s = generate_sample(&GenConfig::default(), 3).unwrap();
        let r = pointnet_estimate(&model, &s.points, &Default::default(), &mut rng_from_seed(0));
        assert!(matches!(r, Err(GraspError::DegenerateOutput { .. })));
    }
}
