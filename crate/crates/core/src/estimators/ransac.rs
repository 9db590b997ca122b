use serde::{Deserialize, Serialize};

use super::lsq::{fit_sphere_algebraic, sphere_from_4_points};
use crate::error::{GraspError, Result};
use crate::geometry::{Point3, SphereModel};
use crate::seeding::rng_from_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RansacConfig {
    pub iterations: usize,
    /// Maximum point-to-surface distance of an inlier, metres.
    pub inlier_threshold: f64,
    pub min_inlier_fraction: f64,
    pub radius_bounds: [f64; 2],
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            iterations: 500,
            inlier_threshold: 0.01,
            min_inlier_fraction: 0.2,
            radius_bounds: [0.01, 0.15],
            seed: 0,
        }
    }
}

impl RansacConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || !(self.inlier_threshold > 0.0) {
            return Err(GraspError::InvalidArgument(
                "ransac needs iterations >= 1 and a positive threshold".into(),
            ));
        }
        let [lo, hi] = self.radius_bounds;
        if !(lo > 0.0 && lo <= hi) {
            return Err(GraspError::InvalidArgument(format!(
                "invalid radius bounds {:?}",
                self.radius_bounds
            )));
        }
        Ok(())
    }

    fn radius_ok(&self, r: f64) -> bool {
        r >= self.radius_bounds[0] && r <= self.radius_bounds[1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacFit {
    /// Least-squares refit over the consensus set.
    pub sphere: SphereModel,
    /// Best minimal model.
    pub minimal: SphereModel,
    pub inliers: usize,
}

/// Upper bound on consensus re-selection rounds after the sampling stage.
const REFIT_ROUNDS: usize = 10;

fn inlier_mask(sphere: &SphereModel, points: &[Point3], threshold: f64) -> Vec<bool> {
    points
        .iter()
        .map(|p| sphere.surface_distance(p).abs() <= threshold)
        .collect()
}

/// Sphere RANSAC: best of `iterations` four-point fits by inlier count, then
/// an algebraic least-squares refit over the winning inliers, repeated while
/// the inlier set of the refit differs from the previous one.
pub fn ransac_fit_detailed(points: &[Point3], cfg: &RansacConfig) -> Result<RansacFit> {
    cfg.validate()?;
    if points.len() < 4 {
        return Err(GraspError::InsufficientPoints {
            needed: 4,
            got: points.len(),
        });
    }
    let mut rng = rng_from_seed(cfg.seed);
    let mut best: Option<(SphereModel, usize)> = None;
    for _ in 0..cfg.iterations {
        let idx = rand::seq::index::sample(&mut rng, points.len(), 4);
        let quad = [
            &points[idx.index(0)],
            &points[idx.index(1)],
            &points[idx.index(2)],
            &points[idx.index(3)],
        ];
        let Ok(candidate) = sphere_from_4_points(quad) else {
            continue;
        };
        if !cfg.radius_ok(candidate.radius) {
            continue;
        }
        let count = points
            .iter()
            .filter(|p| candidate.surface_distance(p).abs() <= cfg.inlier_threshold)
            .count();
        if best.is_none_or(|(_, c)| count > c) {
            best = Some((candidate, count));
        }
    }
    let best_fraction = best.map_or(0.0, |(_, c)| c as f64 / points.len() as f64);
    let Some((minimal, inliers)) = best.filter(|_| best_fraction >= cfg.min_inlier_fraction)
    else {
        return Err(GraspError::NoConsensus {
            best_fraction,
            required: cfg.min_inlier_fraction,
        });
    };
    // A biased minimal model can still cover the whole surface within the
    // threshold, so the consensus set is re-selected against each refit until
    // it stops changing.
    let mut sphere = minimal;
    let mut mask = inlier_mask(&minimal, points, cfg.inlier_threshold);
    for _ in 0..REFIT_ROUNDS {
        let consensus: Vec<Point3> = points
            .iter()
            .zip(&mask)
            .filter(|(_, &m)| m)
            .map(|(p, _)| *p)
            .collect();
        match fit_sphere_algebraic(&consensus) {
            Ok(s) if cfg.radius_ok(s.radius) => sphere = s,
            _ => break,
        }
        let next = inlier_mask(&sphere, points, cfg.inlier_threshold);
        if next == mask {
            break;
        }
        mask = next;
    }
    Ok(RansacFit {
        sphere,
        minimal,
        inliers,
    })
}

pub fn ransac_fit(points: &[Point3], cfg: &RansacConfig) -> Result<SphereModel> {
    ransac_fit_detailed(points, cfg).map(|f| f.sphere)
}
