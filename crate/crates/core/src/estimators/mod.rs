//! Sphere and grasp estimators: the learned regressor and two classical
//! baselines (sphere RANSAC, sphere Hough).

mod hough;
mod lsq;
mod pointnet;
mod ransac;
mod training;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use hough::{
    fibonacci_directions, hough_fit, hough_fit_detailed, HoughConfig, HoughFit, Voting, MIN_PEAK_VOTES,
};
pub use lsq::{fit_sphere_algebraic, sphere_from_4_points, COPLANAR_DET};
pub use pointnet::{pointnet_estimate, PointNetEstimator, DEFAULT_RADIUS_FLOOR};
pub use ransac::{ransac_fit, ransac_fit_detailed, RansacConfig, RansacFit};
pub use training::{
    prepare_sample, prepare_samples, train_regressor, AugmentPolicy, TrainRecipe, TrainedRegressor,
};

use crate::error::{GraspError, Result};
use crate::geometry::{GraspPose, Point3, SphereModel};
use crate::preprocess::{centroid, clean_cloud, PreprocessConfig};
use crate::seeding::rng_from_seed;

/// Grasp pose from a fitted sphere: approach along the direction from the
/// centre to the centroid of the visible points.
pub fn grasp_from_sphere(sphere: &SphereModel, visible: &[Point3]) -> Result<GraspPose> {
    let c = centroid(visible).ok_or(GraspError::InsufficientPoints { needed: 1, got: 0 })?;
    let d = c - sphere.center;
    let n = d.norm();
    if !(n > 1e-12) {
        return Err(GraspError::Degenerate(
            "visible centroid coincides with the sphere centre".into(),
        ));
    }
    GraspPose::from_camera_direction(sphere.center, &(d / n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Pointnet,
    Ransac,
    Hough,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Pointnet, Method::Ransac, Method::Hough];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Pointnet => "pointnet",
            Method::Ransac => "ransac",
            Method::Hough => "hough",
        }
    }

    pub fn is_classical(self) -> bool {
        self != Method::Pointnet
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = GraspError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| GraspError::InvalidArgument(format!("unknown method `{s}`")))
    }
}

/// A successful shape fit. `pose` is `None` when the fitted sphere yields
/// no in-range grasp direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub sphere: SphereModel,
    pub pose: Option<GraspPose>,
}

/// Any of the three estimators behind one call signature.
#[derive(Debug, Clone, PartialEq)]
pub enum Estimator {
    PointNet(PointNetEstimator),
    Ransac {
        config: RansacConfig,
        preprocess: PreprocessConfig,
    },
    Hough {
        config: HoughConfig,
        preprocess: PreprocessConfig,
    },
}

impl Estimator {
    pub fn method(&self) -> Method {
        match self {
            Estimator::PointNet(_) => Method::Pointnet,
            Estimator::Ransac { .. } => Method::Ransac,
            Estimator::Hough { .. } => Method::Hough,
        }
    }

    /// Full pipeline on a raw cloud. `seed` drives point sampling for the
    /// regressor and hypothesis sampling for RANSAC.
    pub fn estimate(&self, points: &[Point3], seed: u64) -> Result<Estimate> {
        match self {
            Estimator::PointNet(p) => {
                let (sphere, pose) = p.estimate(points, &mut rng_from_seed(seed))?;
                Ok(Estimate {
                    sphere,
                    pose: Some(pose),
                })
            }
            Estimator::Ransac { config, preprocess } => {
                let cleaned = clean_cloud(points, preprocess)?;
                let cfg = RansacConfig {
                    seed,
                    ..config.clone()
                };
                let sphere = ransac_fit(&cleaned, &cfg)?;
                Ok(Estimate {
                    pose: grasp_from_sphere(&sphere, &cleaned).ok(),
                    sphere,
                })
            }
            Estimator::Hough { config, preprocess } => {
                let cleaned = clean_cloud(points, preprocess)?;
                let sphere = hough_fit(&cleaned, config)?;
                Ok(Estimate {
                    pose: grasp_from_sphere(&sphere, &cleaned).ok(),
                    sphere,
                })
            }
        }
    }
}
