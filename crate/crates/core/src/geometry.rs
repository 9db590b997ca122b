//! Grasp-pose parametrization, label normalization and the evaluation metrics.
//!
//! Positions are in the camera frame (metres, Z along the optical axis).
//! Grasp angles are Euler-ZYX angles with the X rotation fixed at zero,
//! measured in the *approach frame*: a fixed rotation of the camera frame
//! whose +X axis points back at the camera (−Z of the camera), +Y is camera
//! +X and +Z is camera −Y. In that frame a fruit seen head-on has
//! `theta = phi = 0`, and the ±π/4 angle limits describe a cone around the
//! line of sight.

use std::f64::consts::FRAC_PI_4;

use serde::{Deserialize, Serialize};

use crate::error::{GraspError, Result};

pub type Point3 = nalgebra::Point3<f64>;
pub type Vector3 = nalgebra::Vector3<f64>;
pub type Matrix3 = nalgebra::Matrix3<f64>;

/// Grasp angles are limited to `[-ANGLE_LIMIT, ANGLE_LIMIT]`.
pub const ANGLE_LIMIT: f64 = FRAC_PI_4;

const UNIT_TOLERANCE: f64 = 1e-9;
/// Slack on the angle limit so boundary values survive rounding.
const ANGLE_TOLERANCE: f64 = 1e-12;

fn check_angle(what: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value.abs() <= ANGLE_LIMIT + ANGLE_TOLERANCE {
        Ok(())
    } else {
        Err(GraspError::OutOfRange { what, value })
    }
}

/// Fruit grasp pose: centre position plus yaw (`theta`, about Z) and pitch
/// (`phi`, about Y). The roll angle is always zero and is not stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspPose {
    pub position: Point3,
    pub theta: f64,
    pub phi: f64,
}

impl GraspPose {
    pub fn new(position: Point3, theta: f64, phi: f64) -> Result<Self> {
        check_angle("theta", theta)?;
        check_angle("phi", phi)?;
        Ok(Self {
            position,
            theta,
            phi,
        })
    }

    /// Builds a pose from an approach direction expressed in the camera frame.
    pub fn from_camera_direction(position: Point3, direction: &Vector3) -> Result<Self> {
        let (theta, phi) = direction_to_angles(&approach_from_camera(direction))?;
        Self::new(position, theta, phi)
    }

    /// Unit grasp direction in the approach frame.
    pub fn direction(&self) -> Vector3 {
        grasp_direction(self.theta, self.phi)
    }

    /// Unit grasp direction in the camera frame.
    pub fn camera_direction(&self) -> Vector3 {
        camera_from_approach(&self.direction())
    }

    /// Full rotation block of the homogeneous grasp transform.
    pub fn rotation(&self) -> Matrix3 {
        euler_zyx_rotation(self.theta, self.phi)
    }
}

/// Fruit modelled as a sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereModel {
    pub center: Point3,
    pub radius: f64,
}

impl SphereModel {
    pub fn new(center: Point3, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(GraspError::Degenerate(format!(
                "sphere radius must be positive, got {radius}"
            )));
        }
        if !center.iter().all(|c| c.is_finite()) {
            return Err(GraspError::Degenerate("sphere centre is not finite".into()));
        }
        Ok(Self { center, radius })
    }

    /// Signed distance from `p` to the sphere surface.
    pub fn surface_distance(&self, p: &Point3) -> f64 {
        (p - self.center).norm() - self.radius
    }
}

/// Normalized regression targets. Offsets run from the cloud centroid to the
/// sphere centre; offsets and radius are in units of the mean scale `S`,
/// angles in units of π/4.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitedParams {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub r: f64,
    pub theta: f64,
    pub phi: f64,
}

impl UnitedParams {
    pub fn to_array(&self) -> [f64; 6] {
        [self.x, self.y, self.z, self.r, self.theta, self.phi]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self {
            x: a[0],
            y: a[1],
            z: a[2],
            r: a[3],
            theta: a[4],
            phi: a[5],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalizationConfig {
    /// Mean scale in metres.
    pub scale: f64,
}

impl Default for NormalizationConfig {
    fn default() -> Self {
        Self { scale: 0.30 }
    }
}

impl NormalizationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scale.is_finite() && self.scale > 0.0 {
            Ok(())
        } else {
            Err(GraspError::InvalidArgument(format!(
                "normalization scale must be positive, got {}",
                self.scale
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb3 {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb3 {
    pub fn new(min: Point3, max: Point3) -> Result<Self> {
        if (0..3).all(|i| min[i] <= max[i]) {
            Ok(Self { min, max })
        } else {
            Err(GraspError::InvalidArgument(format!(
                "box min {min:?} exceeds max {max:?}"
            )))
        }
    }

    /// Smallest box containing all `points`; `None` when empty.
    pub fn enclosing<'a>(points: impl IntoIterator<Item = &'a Point3>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let (mut min, mut max) = (*first, *first);
        for p in it {
            for i in 0..3 {
                min[i] = min[i].min(p[i]);
                max[i] = max[i].max(p[i]);
            }
        }
        Some(Self { min, max })
    }

    pub fn extent(&self) -> Vector3 {
        self.max - self.min
    }

    pub fn center(&self) -> Point3 {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e.x * e.y * e.z
    }
}

/// Rotation block of the grasp transform, Euler-ZYX with roll fixed at zero.
pub fn euler_zyx_rotation(theta: f64, phi: f64) -> Matrix3 {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Matrix3::new(
        ct * cp, -st, ct * sp, //
        st * cp, ct, st * sp, //
        -sp, 0.0, cp,
    )
}

/// First column of [`euler_zyx_rotation`]: the approach direction.
pub fn grasp_direction(theta: f64, phi: f64) -> Vector3 {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Vector3::new(ct * cp, st * cp, -sp)
}

/// Inverse of [`grasp_direction`]. Fails with `OutOfRange` when the angles
/// fall outside ±π/4.
pub fn direction_to_angles(d: &Vector3) -> Result<(f64, f64)> {
    let norm = d.norm();
    if !((norm - 1.0).abs() <= UNIT_TOLERANCE) {
        return Err(GraspError::InvalidArgument(format!(
            "direction must be a unit vector, |d| = {norm}"
        )));
    }
    let theta = d.y.atan2(d.x);
    let phi = -d.z.clamp(-1.0, 1.0).asin();
    check_angle("theta", theta)?;
    check_angle("phi", phi)?;
    Ok((theta, phi))
}

/// Re-expresses a camera-frame vector in the approach frame.
pub fn approach_from_camera(v: &Vector3) -> Vector3 {
    Vector3::new(-v.z, v.x, -v.y)
}

/// Re-expresses an approach-frame vector in the camera frame.
pub fn camera_from_approach(v: &Vector3) -> Vector3 {
    Vector3::new(v.y, -v.z, -v.x)
}

/// Rotation taking camera-frame coordinates to approach-frame coordinates.
pub fn approach_from_camera_matrix() -> Matrix3 {
    Matrix3::new(
        0.0, 0.0, -1.0, //
        1.0, 0.0, 0.0, //
        0.0, -1.0, 0.0,
    )
}

pub fn normalize_label(
    centroid: &Point3,
    sphere: &SphereModel,
    theta: f64,
    phi: f64,
    cfg: &NormalizationConfig,
) -> Result<UnitedParams> {
    check_angle("theta", theta)?;
    check_angle("phi", phi)?;
    let offset = (sphere.center - centroid) / cfg.scale;
    Ok(UnitedParams {
        x: offset.x,
        y: offset.y,
        z: offset.z,
        r: sphere.radius / cfg.scale,
        theta: theta / ANGLE_LIMIT,
        phi: phi / ANGLE_LIMIT,
    })
}

/// Maps united parameters back to metric sphere and pose. The pose position
/// is the sphere centre.
pub fn denormalize(
    u: &UnitedParams,
    centroid: &Point3,
    cfg: &NormalizationConfig,
) -> Result<(SphereModel, GraspPose)> {
    let center = centroid + Vector3::new(u.x, u.y, u.z) * cfg.scale;
    let sphere = SphereModel::new(center, u.r * cfg.scale)?;
    let pose = GraspPose::new(center, u.theta * ANGLE_LIMIT, u.phi * ANGLE_LIMIT)?;
    Ok((sphere, pose))
}

/// Output activations: identity on the offsets, `exp` on the radius and
/// `tanh` on both angles.
pub fn activate(raw: [f64; 6]) -> UnitedParams {
    UnitedParams {
        x: raw[0],
        y: raw[1],
        z: raw[2],
        r: raw[3].exp(),
        theta: raw[4].tanh(),
        phi: raw[5].tanh(),
    }
}

/// Axis-aligned cube of side `2r` around the sphere.
pub fn sphere_aabb(s: &SphereModel) -> Aabb3 {
    let half = Vector3::repeat(s.radius);
    Aabb3 {
        min: s.center - half,
        max: s.center + half,
    }
}

/// Volume intersection-over-union of two axis-aligned boxes.
pub fn iou_3d(a: &Aabb3, b: &Aabb3) -> f64 {
    let mut inter = 1.0;
    for i in 0..3 {
        let lo = a.min[i].max(b.min[i]);
        let hi = a.max[i].min(b.max[i]);
        if hi <= lo {
            return 0.0;
        }
        inter *= hi - lo;
    }
    let union = a.volume() + b.volume() - inter;
    if union > 0.0 {
        (inter / union).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// IoU of the bounding cubes of two spheres.
pub fn sphere_iou(a: &SphereModel, b: &SphereModel) -> f64 {
    iou_3d(&sphere_aabb(a), &sphere_aabb(b))
}

/// Angle in degrees between the approach directions of two poses. The
/// `atan2` form stays accurate for nearly parallel directions, where `acos`
/// loses half the significant digits.
pub fn orientation_error(pred: &GraspPose, gt: &GraspPose) -> f64 {
    let (a, b) = (pred.direction(), gt.direction());
    a.cross(&b).norm().atan2(a.dot(&b)).to_degrees()
}
