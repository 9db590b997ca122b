use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{uniform, LabeledSample};
use crate::error::{GraspError, Result};
use crate::geometry::{
    approach_from_camera_matrix, euler_zyx_rotation, Matrix3, Point3, Vector3, ANGLE_LIMIT,
};

/// Rotation resampling attempts before falling back to no rotation.
const MAX_ROTATION_TRIES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    pub scale: [f64; 2],
    /// Per-axis translation bound, metres.
    pub translation: f64,
    /// Bound on the perturbation of each grasp angle, degrees.
    pub rotation_deg: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            scale: [0.8, 1.2],
            translation: 0.15,
            rotation_deg: 10.0,
        }
    }
}

/// One concrete draw of augmentation parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentParams {
    pub scale: f64,
    pub translation: Vector3,
    pub d_theta: f64,
    pub d_phi: f64,
}

impl AugmentParams {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            translation: Vector3::zeros(),
            d_theta: 0.0,
            d_phi: 0.0,
        }
    }
}

/// Applies rotation about the sphere centre, then scaling about the cloud
/// centroid, then translation. Points and label move together. Fails with
/// `OutOfRange` if the rotated label leaves ±π/4.
pub fn augment_with(sample: &LabeledSample, params: &AugmentParams) -> Result<LabeledSample> {
    let mut out = sample.clone();
    let center = sample.sphere.center;

    if params.d_theta != 0.0 || params.d_phi != 0.0 {
        let theta = sample.theta + params.d_theta;
        let phi = sample.phi + params.d_phi;
        for (what, value) in [("theta", theta), ("phi", phi)] {
            if value.abs() > ANGLE_LIMIT {
                return Err(GraspError::OutOfRange { what, value });
            }
        }
        let to_approach = approach_from_camera_matrix();
        let delta = euler_zyx_rotation(theta, phi)
            * euler_zyx_rotation(sample.theta, sample.phi).transpose();
        let rotation: Matrix3 = to_approach.transpose() * delta * to_approach;
        for p in out.points.iter_mut() {
            *p = center + rotation * (*p - center);
        }
        out.theta = theta;
        out.phi = phi;
    }

    if params.scale != 1.0 {
        let n = out.points.len().max(1) as f64;
        let pivot = Point3::from(out.points.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n);
        for p in out.points.iter_mut() {
            *p = pivot + (*p - pivot) * params.scale;
        }
        out.sphere.center = pivot + (out.sphere.center - pivot) * params.scale;
        out.sphere.radius *= params.scale;
    }

    if params.translation != Vector3::zeros() {
        for p in out.points.iter_mut() {
            *p += params.translation;
        }
        out.sphere.center += params.translation;
    }
    Ok(out)
}

/// Draws augmentation parameters, resampling the rotation until the label
/// stays within ±π/4.
pub fn augment(sample: &LabeledSample, cfg: &AugmentConfig, rng: &mut impl Rng) -> LabeledSample {
    let scale = uniform(rng, cfg.scale);
    let t = cfg.translation;
    let translation = if t > 0.0 {
        Vector3::new(
            rng.random_range(-t..t),
            rng.random_range(-t..t),
            rng.random_range(-t..t),
        )
    } else {
        Vector3::zeros()
    };
    let max_rot = cfg.rotation_deg.to_radians();
    let mut params = AugmentParams {
        scale,
        translation,
        d_theta: 0.0,
        d_phi: 0.0,
    };
    if max_rot > 0.0 {
        for _ in 0..MAX_ROTATION_TRIES {
            let d_theta = rng.random_range(-max_rot..max_rot);
            let d_phi = rng.random_range(-max_rot..max_rot);
            if (sample.theta + d_theta).abs() <= ANGLE_LIMIT
                && (sample.phi + d_phi).abs() <= ANGLE_LIMIT
            {
                params.d_theta = d_theta;
                params.d_phi = d_phi;
                break;
            }
        }
    }
    augment_with(sample, &params).expect("rotation was drawn inside the angle limits")
}
