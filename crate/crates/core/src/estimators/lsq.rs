//! Closed-form sphere solvers.

use nalgebra::{DMatrix, DVector, Matrix3};

use crate::error::{GraspError, Result};
use crate::geometry::{Point3, SphereModel, Vector3};

/// Determinant floor below which four points count as coplanar.
pub const COPLANAR_DET: f64 = 1e-12;

/// The unique sphere through four non-coplanar points.
///
/// Differencing `|p_i - c|^2 = r^2` against the first point gives a 3x3
/// linear system in the centre, solved relative to `p1` for conditioning.
pub fn sphere_from_4_points(p: [&Point3; 4]) -> Result<SphereModel> {
    let d = [p[1] - p[0], p[2] - p[0], p[3] - p[0]];
    let a = Matrix3::from_rows(&[
        (d[0] * 2.0).transpose(),
        (d[1] * 2.0).transpose(),
        (d[2] * 2.0).transpose(),
    ]);
    let det = a.determinant();
    if !(det.abs() > COPLANAR_DET) {
        return Err(GraspError::Degenerate(format!(
            "points are coplanar (det = {det:e})"
        )));
    }
    let rhs = Vector3::new(d[0].norm_squared(), d[1].norm_squared(), d[2].norm_squared());
    let offset = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| GraspError::Degenerate("singular 4-point system".into()))?;
    SphereModel::new(p[0] + offset, offset.norm())
}

/// Algebraic least-squares sphere: solves `|q|^2 = 2 c.q + k` over all
/// points (after centring on their mean) and recovers `r^2 = k + |c|^2`.
pub fn fit_sphere_algebraic(points: &[Point3]) -> Result<SphereModel> {
    if points.len() < 4 {
        return Err(GraspError::InsufficientPoints {
            needed: 4,
            got: points.len(),
        });
    }
    let n = points.len();
    let mean = points.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n as f64;
    let mut a = DMatrix::zeros(n, 4);
    let mut b = DVector::zeros(n);
    for (i, p) in points.iter().enumerate() {
        let q = p.coords - mean;
        a[(i, 0)] = 2.0 * q.x;
        a[(i, 1)] = 2.0 * q.y;
        a[(i, 2)] = 2.0 * q.z;
        a[(i, 3)] = 1.0;
        b[i] = q.norm_squared();
    }
    let svd = a.svd(true, true);
    let max_sv = svd.singular_values.max();
    let min_sv = svd.singular_values.min();
    if !(min_sv > max_sv * 1e-12) {
        return Err(GraspError::Degenerate(
            "rank-deficient least-squares sphere system".into(),
        ));
    }
    let x = svd
        .solve(&b, 0.0)
        .map_err(|e| GraspError::Degenerate(e.to_string()))?;
    let c = Vector3::new(x[0], x[1], x[2]);
    let r2 = x[3] + c.norm_squared();
    if !(r2 > 0.0) {
        return Err(GraspError::Degenerate(format!("negative squared radius {r2:e}")));
    }
    SphereModel::new(Point3::from(mean + c), r2.sqrt())
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;
    use crate::seeding::rng_from_seed;
    use crate::synthgen::visible_hemisphere_points;

    #[test]
    fn unit_sphere_from_axis_points() {
        let pts = [
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(-1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
        ];
        let s = sphere_from_4_points([&pts[0], &pts[1], &pts[2], &pts[3]]).unwrap();
        assert_abs_diff_eq!(s.center, Point3::origin(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.radius, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn coplanar_points_are_degenerate() {
        let pts = [
            Point3::new(0.0, 0.0, 0.5),
            Point3::new(1.0, 0.0, 0.5),
            Point3::new(0.0, 1.0, 0.5),
            Point3::new(1.0, 1.0, 0.5),
        ];
        assert!(matches!(
            sphere_from_4_points([&pts[0], &pts[1], &pts[2], &pts[3]]),
            Err(GraspError::Degenerate(_))
        ));
    }

    #[test]
    fn four_point_sphere_passes_through_inputs() {
        let truth = SphereModel::new(Point3::new(0.1, -0.2, 0.8), 0.04).unwrap();
        let mut rng = rng_from_seed(4);
        for _ in 0..50 {
            let p = visible_hemisphere_points(&truth, 4, &mut rng);
            let Ok(s) = sphere_from_4_points([&p[0], &p[1], &p[2], &p[3]]) else {
                continue;
            };
            for q in &p {
                assert!(s.surface_distance(q).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn algebraic_fit_is_exact_on_sphere_points() {
        let truth = SphereModel::new(Point3::new(-0.3, 0.1, 0.9), 0.035).unwrap();
        let pts = visible_hemisphere_points(&truth, 300, &mut rng_from_seed(5));
        let s = fit_sphere_algebraic(&pts).unwrap();
        assert_abs_diff_eq!(s.center, truth.center, epsilon = 1e-9);
        assert_abs_diff_eq!(s.radius, truth.radius, epsilon = 1e-9);
    }

    #[test]
    fn algebraic_fit_rejects_planar_cloud() {
        let pts: Vec<Point3> = (0..20)
            .map(|i| Point3::new((i % 5) as f64, (i / 5) as f64, 0.0))
            .collect();
        assert!(fit_sphere_algebraic(&pts).is_err());
        assert!(fit_sphere_algebraic(&pts[..3]).is_err());
    }
}
