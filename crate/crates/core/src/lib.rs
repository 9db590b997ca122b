//! Grasp-pose estimation for spherical fruit from single-view point clouds.
//!
//! * [`geometry`]: pose parametrisation, label normalisation, box IoU.
//! * [`synthgen`]: labelled synthetic clouds, corruption regimes, dataset files.
//! * [`preprocess`]: outlier rejection, voxel downsampling, sampling, centring.
//! * [`tinynn`]: the PointNet-style regressor and its training loop.
//! * [`estimators`]: learned regressor, sphere RANSAC and sphere Hough.
//! * [`bench`]: metrics, the condition-matrix suite and report rendering.

pub mod bench;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod preprocess;
pub mod seeding;
pub mod synthgen;
pub mod tinynn;

pub use error::{GraspError, Result};
pub use geometry::{GraspPose, Point3, SphereModel, UnitedParams, Vector3};
