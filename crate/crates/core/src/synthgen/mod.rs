//! Synthetic single-view fruit clouds with exact ground truth.
//!
//! The camera sits at the origin looking along +Z. Each fruit is a sphere
//! placed inside the camera frustum; its visible surface is the hemisphere
//! facing the camera. The ground-truth approach direction runs from the
//! sphere centre to the centroid of that ideal hemisphere, which is always
//! the direction back toward the camera.

mod augment;
mod corrupt;
mod dataset;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{GraspError, Result};
use crate::geometry::{GraspPose, Point3, SphereModel, Vector3};
use crate::seeding::{derive_seed, rng_from_seed};

pub use augment::{augment, augment_with, AugmentConfig, AugmentParams};
pub use corrupt::{add_clutter, add_gaussian_noise, add_outliers, corrupt};
pub use dataset::{read_dataset, write_dataset};

/// Upper bound on camera-geometry resampling before generation gives up.
pub const MAX_GEOMETRY_TRIES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Normal,
    Noise,
    Outlier,
    DenseClutter,
    Combined,
}

impl Condition {
    pub const ALL: [Condition; 5] = [
        Condition::Normal,
        Condition::Noise,
        Condition::Outlier,
        Condition::DenseClutter,
        Condition::Combined,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Normal => "normal",
            Condition::Noise => "noise",
            Condition::Outlier => "outlier",
            Condition::DenseClutter => "dense_clutter",
            Condition::Combined => "combined",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = GraspError;

    fn from_str(s: &str) -> Result<Self> {
        Condition::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| GraspError::InvalidArgument(format!("unknown condition `{s}`")))
    }
}

/// One fruit's visible point cloud with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub points: Vec<Point3>,
    pub sphere: SphereModel,
    pub theta: f64,
    pub phi: f64,
    pub condition: Condition,
    pub seed: u64,
}

impl LabeledSample {
    pub fn pose(&self) -> GraspPose {
        GraspPose {
            position: self.sphere.center,
            theta: self.theta,
            phi: self.phi,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    /// Fruit radius range in metres.
    pub radius: [f64; 2],
    /// Points on the visible hemisphere before corruption.
    pub points_per_fruit: usize,
    /// Per-axis standard deviation of the noise regime, metres.
    pub noise_sigma: f64,
    /// Fraction of outliers added, relative to the clean point count.
    pub outlier_fraction: [f64; 2],
    /// Number of touching neighbour fruits in the clutter regime.
    pub clutter_neighbors: [usize; 2],
    /// Distance from the camera to the fruit centre, metres.
    pub camera_distance: [f64; 2],
    /// Horizontal and vertical half field of view used to place fruit, degrees.
    pub half_fov_deg: [f64; 2],
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            radius: [0.03, 0.05],
            points_per_fruit: 600,
            noise_sigma: 0.02,
            outlier_fraction: [0.01, 0.05],
            clutter_neighbors: [1, 3],
            camera_distance: [0.4, 1.0],
            half_fov_deg: [40.0, 29.0],
        }
    }
}

fn check_range(name: &str, r: [f64; 2]) -> Result<()> {
    if r[0].is_finite() && r[1].is_finite() && r[0] > 0.0 && r[0] <= r[1] {
        Ok(())
    } else {
        Err(GraspError::InvalidArgument(format!(
            "{name} must be a nonempty positive range, got {r:?}"
        )))
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        check_range("radius", self.radius)?;
        check_range("camera_distance", self.camera_distance)?;
        check_range("outlier_fraction", self.outlier_fraction)?;
        if !self.half_fov_deg.iter().all(|&a| a > 0.0 && a < 90.0) {
            return Err(GraspError::InvalidArgument(
                "half field of view angles must lie in (0, 90) degrees".into(),
            ));
        }
        if self.points_per_fruit == 0 {
            return Err(GraspError::InvalidArgument(
                "points_per_fruit must be positive".into(),
            ));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma > 0.0) {
            return Err(GraspError::InvalidArgument(format!(
                "noise_sigma must be positive, got {}",
                self.noise_sigma
            )));
        }
        let [lo, hi] = self.clutter_neighbors;
        if lo == 0 || lo > hi {
            return Err(GraspError::InvalidArgument(format!(
                "clutter_neighbors must be a nonempty positive range, got {:?}",
                self.clutter_neighbors
            )));
        }
        Ok(())
    }
}

pub(crate) fn uniform(rng: &mut impl Rng, range: [f64; 2]) -> f64 {
    if range[0] == range[1] {
        range[0]
    } else {
        rng.random_range(range[0]..range[1])
    }
}

pub(crate) fn random_unit(rng: &mut impl Rng) -> Vector3 {
    loop {
        let v = Vector3::new(
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
            StandardNormal.sample(rng),
        );
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Points drawn uniformly from the hemisphere of `sphere` facing a camera at
/// the origin.
pub fn visible_hemisphere_points(
    sphere: &SphereModel,
    count: usize,
    rng: &mut impl Rng,
) -> Vec<Point3> {
    let view = sphere.center.coords.normalize();
    (0..count)
        .map(|_| {
            let mut n = random_unit(rng);
            if n.dot(&view) > 0.0 {
                n = -n;
            }
            sphere.center + n * sphere.radius
        })
        .collect()
}

/// Centroid of the ideal visible hemisphere: `c - (r/2) v` with `v` the unit
/// line of sight to the centre.
pub fn ideal_visible_centroid(sphere: &SphereModel) -> Point3 {
    let view = sphere.center.coords.normalize();
    sphere.center - view * (sphere.radius / 2.0)
}

/// Generates one clean sample from its own seed.
pub fn generate_sample(cfg: &GenConfig, seed: u64) -> Result<LabeledSample> {
    cfg.validate()?;
    let mut rng = rng_from_seed(seed);
    let [h, v] = cfg.half_fov_deg;
    for _ in 0..MAX_GEOMETRY_TRIES {
        let radius = uniform(&mut rng, cfg.radius);
        let distance = uniform(&mut rng, cfg.camera_distance);
        let yaw = uniform(&mut rng, [-h, h]).to_radians();
        let pitch = uniform(&mut rng, [-v, v]).to_radians();
        let view = Vector3::new(yaw.tan(), pitch.tan(), 1.0).normalize();
        let center = Point3::from(view * distance);
        let pose = match GraspPose::from_camera_direction(center, &-view) {
            Ok(p) => p,
            Err(GraspError::OutOfRange { .. }) => continue,
            Err(e) => return Err(e),
        };
        let sphere = SphereModel::new(center, radius)?;
        let points = visible_hemisphere_points(&sphere, cfg.points_per_fruit, &mut rng);
        return Ok(LabeledSample {
            points,
            sphere,
            theta: pose.theta,
            phi: pose.phi,
            condition: Condition::Normal,
            seed,
        });
    }
    Err(GraspError::Degenerate(format!(
        "no in-range camera geometry after {MAX_GEOMETRY_TRIES} tries"
    )))
}

/// `count` clean samples; sample `i` uses seed `derive_seed(seed, [i])`.
pub fn generate_dataset(cfg: &GenConfig, count: usize, seed: u64) -> Result<Vec<LabeledSample>> {
    (0..count as u64)
        .map(|i| generate_sample(cfg, derive_seed(seed, &[i])))
        .collect()
}

/// Train / validation / test sizes used throughout the benchmark.
pub const DEFAULT_SPLIT: [usize; 3] = [300, 50, 220];

#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Vec<LabeledSample>,
    pub validation: Vec<LabeledSample>,
    pub test: Vec<LabeledSample>,
}

/// Generates three disjoint splits from independent seed streams.
pub fn generate_split(cfg: &GenConfig, sizes: [usize; 3], seed: u64) -> Result<DatasetSplit> {
    let part = |k: u64, n: usize| generate_dataset(cfg, n, derive_seed(seed, &[k]));
    Ok(DatasetSplit {
        train: part(0, sizes[0])?,
        validation: part(1, sizes[1])?,
        test: part(2, sizes[2])?,
    })
}
