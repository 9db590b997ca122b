//! Point-cloud conditioning between segmentation and estimation: distance
//! based outlier rejection, voxel downsampling, fixed-size sampling and
//! centring.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GraspError, Result};
use crate::geometry::{Point3, Vector3};

/// Minimum cloud size accepted by [`reject_outliers`].
pub const MIN_REJECTION_POINTS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    /// A point is rejected when its distance to the centroid is strictly
    /// greater than this multiple of the mean distance.
    pub outlier_multiplier: f64,
    pub outlier_passes: usize,
    /// Voxel edge length, metres.
    pub voxel_resolution: f64,
    /// Network input size.
    pub sample_size: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            outlier_multiplier: 2.0,
            outlier_passes: 3,
            voxel_resolution: 0.003,
            sample_size: 200,
        }
    }
}

pub fn centroid(points: &[Point3]) -> Option<Point3> {
    if points.is_empty() {
        return None;
    }
    let sum = points.iter().fold(Vector3::zeros(), |a, p| a + p.coords);
    Some(Point3::from(sum / points.len() as f64))
}

/// One rejection pass. Returns the kept points.
pub fn reject_outliers_once(points: &[Point3], multiplier: f64) -> Vec<Point3> {
    let Some(c) = centroid(points) else {
        return Vec::new();
    };
    let dists: Vec<f64> = points.iter().map(|p| (p - c).norm()).collect();
    let mean = dists.iter().sum::<f64>() / dists.len() as f64;
    let limit = multiplier * mean;
    points
        .iter()
        .zip(&dists)
        .filter(|(_, &d)| d <= limit)
        .map(|(p, _)| *p)
        .collect()
}

/// Repeated centroid-distance rejection with the default multiplier (2) and
/// pass count (3).
pub fn reject_outliers(points: &[Point3]) -> Result<Vec<Point3>> {
    let cfg = PreprocessConfig::default();
    reject_outliers_with(points, cfg.outlier_multiplier, cfg.outlier_passes)
}

pub fn reject_outliers_with(
    points: &[Point3],
    multiplier: f64,
    passes: usize,
) -> Result<Vec<Point3>> {
    if points.len() < MIN_REJECTION_POINTS {
        return Err(GraspError::TooFewPoints {
            needed: MIN_REJECTION_POINTS,
            got: points.len(),
        });
    }
    let mut kept = points.to_vec();
    for _ in 0..passes {
        kept = reject_outliers_once(&kept, multiplier);
    }
    Ok(kept)
}

/// Integer voxel index of `p` on a grid of edge `resolution` anchored at the
/// origin.
pub fn voxel_index(p: &Point3, resolution: f64) -> [i64; 3] {
    [
        (p.x / resolution).floor() as i64,
        (p.y / resolution).floor() as i64,
        (p.z / resolution).floor() as i64,
    ]
}

/// Replaces the points in each occupied voxel with their centroid. Output is
/// ordered by voxel index.
pub fn voxel_downsample(points: &[Point3], resolution: f64) -> Result<Vec<Point3>> {
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(GraspError::InvalidArgument(format!(
            "voxel resolution must be positive, got {resolution}"
        )));
    }
    let mut cells: BTreeMap<[i64; 3], (Vector3, usize)> = BTreeMap::new();
    for p in points {
        let cell = cells
            .entry(voxel_index(p, resolution))
            .or_insert((Vector3::zeros(), 0));
        cell.0 += p.coords;
        cell.1 += 1;
    }
    Ok(cells
        .into_values()
        .map(|(sum, n)| Point3::from(sum / n as f64))
        .collect())
}

/// Uniform sample of exactly `n` points without replacement.
pub fn sample_fixed(points: &[Point3], n: usize, rng: &mut impl Rng) -> Result<Vec<Point3>> {
    if points.len() < n {
        return Err(GraspError::InsufficientPoints {
            needed: n,
            got: points.len(),
        });
    }
    Ok(rand::seq::index::sample(rng, points.len(), n)
        .into_iter()
        .map(|i| points[i])
        .collect())
}

/// Subtracts the centroid; returns the centred points and the centroid.
pub fn center_cloud(points: &[Point3]) -> Result<(Vec<Point3>, Point3)> {
    let c = centroid(points)
        .ok_or_else(|| GraspError::InvalidArgument("cannot centre an empty cloud".into()))?;
    Ok((
        points.iter().map(|p| Point3::from(p - c)).collect(),
        c,
    ))
}

/// Outlier rejection followed by voxel downsampling: the input to the
/// classical estimators.
pub fn clean_cloud(points: &[Point3], cfg: &PreprocessConfig) -> Result<Vec<Point3>> {
    let kept = reject_outliers_with(points, cfg.outlier_multiplier, cfg.outlier_passes)?;
    voxel_downsample(&kept, cfg.voxel_resolution)
}

/// Network-ready cloud: exactly `sample_size` centred points plus the
/// centroid needed to map predictions back.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedCloud {
    pub points: Vec<Point3>,
    pub centroid: Point3,
}

/// Full pipeline: reject → voxel → sample → centre.
pub fn prepare_cloud(
    points: &[Point3],
    cfg: &PreprocessConfig,
    rng: &mut impl Rng,
) -> Result<PreparedCloud> {
    let cleaned = clean_cloud(points, cfg)?;
    let sampled = sample_fixed(&cleaned, cfg.sample_size, rng)?;
    let (points, centroid) = center_cloud(&sampled)?;
    Ok(PreparedCloud { points, centroid })
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::seeding::rng_from_seed;

    #[test]
    fn equidistant_points_survive() {
        let pts: Vec<Point3> = (0..12)
            .map(|k| {
                let a = k as f64 * std::f64::consts::TAU / 12.0;
                Point3::new(a.cos(), a.sin(), 0.0)
            })
            .collect();
        assert_eq!(reject_outliers(&pts).unwrap().len(), 12);
    }

    #[test]
    fn too_few_points() {
        let pts = vec![Point3::origin(); 3];
        assert!(matches!(
            reject_outliers(&pts),
            Err(GraspError::TooFewPoints { needed: 4, got: 3 })
        ));
    }

    #[test]
    fn strict_threshold() {
        // Distances to the centroid (0,0,0): 1, 1, 1, 1, 0 -> mean 0.8, limit 1.6.
        let mut pts = vec![
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(-1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, -1.0, 0.0),
            Point3::origin(),
        ];
        assert_eq!(reject_outliers_once(&pts, 2.0).len(), 5);
        // A point at exactly 2x the mean distance is kept (strictly greater rejects).
        pts = vec![
            Point3::new(-1.0, 0.0, 0.0),
            Point3::new(-1.0, 0.0, 0.0),
            Point3::new(-1.0, 0.0, 0.0),
            Point3::new(3.0, 0.0, 0.0),
        ];
        // centroid 0; distances 1,1,1,3; mean 1.5; limit 3.0; 3 <= 3 kept.
        assert_eq!(reject_outliers_once(&pts, 2.0).len(), 4);
    }

    #[test]
    fn voxel_merges_close_points() {
        let pts = vec![Point3::new(0.0005, 0.0005, 0.0005), Point3::new(0.0015, 0.0005, 0.0005)];
        let out = voxel_downsample(&pts, 0.003).unwrap();
        assert_eq!(out.len(), 1);
        assert_abs_diff_eq!(out[0], Point3::new(0.001, 0.0005, 0.0005), epsilon = 1e-15);
    }

    #[test]
    fn voxel_keeps_sparse_grid() {
        let mut pts = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                for k in 0..4 {
                    pts.push(Point3::new(
                        0.0015 + 0.01 * i as f64,
                        0.0015 + 0.01 * j as f64,
                        -0.0385 + 0.01 * k as f64,
                    ));
                }
            }
        }
        let out = voxel_downsample(&pts, 0.003).unwrap();
        assert_eq!(out.len(), pts.len());
        let idx: HashSet<_> = out.iter().map(|p| voxel_index(p, 0.003)).collect();
        assert_eq!(idx.len(), out.len());
        assert!(voxel_downsample(&[], 0.003).unwrap().is_empty());
        assert!(voxel_downsample(&pts, 0.0).is_err());
    }

    #[test]
    fn sampling_contract() {
        let pts: Vec<Point3> = (0..500).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        let mut rng = rng_from_seed(1);
        let s = sample_fixed(&pts, 200, &mut rng).unwrap();
        assert_eq!(s.len(), 200);
        let distinct: HashSet<i64> = s.iter().map(|p| p.x as i64).collect();
        assert_eq!(distinct.len(), 200);
        assert!(s.iter().all(|p| p.x >= 0.0 && p.x < 500.0));

        assert!(matches!(
            sample_fixed(&pts[..199], 200, &mut rng),
            Err(GraspError::InsufficientPoints { needed: 200, got: 199 })
        ));

        let mut perm = sample_fixed(&pts[..200], 200, &mut rng).unwrap();
        perm.sort_by(|a, b| a.x.total_cmp(&b.x));
        assert_eq!(perm, pts[..200].to_vec());

        let a = sample_fixed(&pts, 200, &mut rng_from_seed(5)).unwrap();
        let b = sample_fixed(&pts, 200, &mut rng_from_seed(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn centring() {
        let pts = vec![
            Point3::new(0.1, 0.2, 0.7),
            Point3::new(0.12, 0.18, 0.69),
            Point3::new(0.09, 0.21, 0.72),
        ];
        let (centred, c) = center_cloud(&pts).unwrap();
        assert_abs_diff_eq!(centroid(&centred).unwrap(), Point3::origin(), epsilon = 1e-12);
        for (p, q) in pts.iter().zip(&centred) {
            assert_abs_diff_eq!(*p, q + c.coords, epsilon = 1e-15);
        }
        let (single, c) = center_cloud(&pts[..1]).unwrap();
        assert_eq!(single[0], Point3::origin());
        assert_eq!(c, pts[0]);
    }
}
