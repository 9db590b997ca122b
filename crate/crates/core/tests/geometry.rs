use std::f64::consts::FRAC_PI_4;

use applegrasp_core::geometry::{
    denormalize, direction_to_angles, euler_zyx_rotation, grasp_direction, iou_3d, normalize_label, sphere_aabb,
    sphere_iou, Aabb3, Matrix3, NormalizationConfig,
};
use applegrasp_core::seeding::rng_from_seed;
use applegrasp_core::{Point3, SphereModel, Vector3};
use proptest::prelude::*;
use rand::Rng;

/// Monte-Carlo IoU: uniform samples over the union's bounding box.
fn iou_monte_carlo(a: &Aabb3, b: &Aabb3, samples: usize, rng: &mut impl Rng) -> f64 {
    let lo = a.min.inf(&b.min);
    let hi = a.max.sup(&b.max);
    let inside = |bx: &Aabb3, p: &Point3| (0..3).all(|i| p[i] >= bx.min[i] && p[i] <= bx.max[i]);
    let (mut both, mut either) = (0usize, 0usize);
    for _ in 0..samples {
        let p = Point3::new(
            rng.random_range(lo.x..hi.x),
            rng.random_range(lo.y..hi.y),
            rng.random_range(lo.z..hi.z),
        );
        let (ia, ib) = (inside(a, &p), inside(b, &p));
        both += (ia && ib) as usize;
        either += (ia || ib) as usize;
    }
    both as f64 / either as f64
}

fn random_box(rng: &mut impl Rng) -> Aabb3 {
    let c = Point3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3));
    let h = Vector3::new(rng.random_range(0.05..0.5), rng.random_range(0.05..0.5), rng.random_range(0.05..0.5));
    Aabb3::new(c - h, c + h).unwrap()
}

#[test]
fn iou_matches_monte_carlo_oracle() {
    let mut rng = rng_from_seed(11);
    let mut worst: f64 = 0.0;
    for case in 0..1000 {
        let (a, b) = if case % 2 == 0 {
            (random_box(&mut rng), random_box(&mut rng))
        } else {
            // Sphere cubes with apple-scale offsets, the case that matters.
            let s = SphereModel::new(Point3::new(0.0, 0.0, 0.6), rng.random_range(0.03..0.05)).unwrap();
            let d = Vector3::new(rng.random_range(-0.03..0.03), rng.random_range(-0.03..0.03), rng.random_range(-0.03..0.03));
            let t = SphereModel::new(s.center + d, rng.random_range(0.03..0.05)).unwrap();
            (sphere_aabb(&s), sphere_aabb(&t))
        };
        let exact = iou_3d(&a, &b);
        let mc = if exact == 0.0 { 0.0 } else { iou_monte_carlo(&a, &b, 60_000, &mut rng) };
        worst = worst.max((exact - mc).abs());
    }
    assert!(worst <= 0.01, "worst Monte-Carlo gap {worst}");
}

#[test]
fn iou_edge_cases() {
    let unit = Aabb3::new(Point3::origin(), Point3::new(1.0, 1.0, 1.0)).unwrap();
    assert_eq!(iou_3d(&unit, &unit), 1.0);
    // Touching faces do not overlap.
    let next = Aabb3::new(Point3::new(1.0, 0.0, 0.0), Point3::new(2.0, 1.0, 1.0)).unwrap();
    assert_eq!(iou_3d(&unit, &next), 0.0);
    // Half overlap along one axis: 0.5 / 1.5.
    let half = Aabb3::new(Point3::new(0.5, 0.0, 0.0), Point3::new(1.5, 1.0, 1.0)).unwrap();
    assert!((iou_3d(&unit, &half) - 1.0 / 3.0).abs() < 1e-15);
    // Nested: volume ratio.
    let inner = Aabb3::new(Point3::origin(), Point3::new(0.5, 0.5, 0.5)).unwrap();
    assert!((iou_3d(&unit, &inner) - 0.125).abs() < 1e-15);
}

fn angle() -> impl Strategy<Value = f64> {
    -FRAC_PI_4..=FRAC_PI_4
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn rotation_is_proper_orthonormal(theta in angle(), phi in angle()) {
        let r = euler_zyx_rotation(theta, phi);
        let gap = (r.transpose() * r - Matrix3::identity()).abs().max();
        prop_assert!(gap <= 1e-12, "R^T R off identity by {gap}");
        prop_assert!((r.determinant() - 1.0).abs() <= 1e-12);
        prop_assert!((r.column(0) - grasp_direction(theta, phi)).norm() <= 1e-15);
    }

    #[test]
    fn direction_roundtrip(theta in angle(), phi in angle()) {
        let (t, p) = direction_to_angles(&grasp_direction(theta, phi)).unwrap();
        prop_assert!((t - theta).abs() <= 1e-9 && (p - phi).abs() <= 1e-9, "{t} {p} vs {theta} {phi}");
    }

    #[test]
    fn normalization_roundtrip(
        c in prop::array::uniform3(-0.5..0.5f64),
        z in 0.3..1.2f64,
        off in prop::array::uniform3(-0.05..0.05f64),
        r in 0.02..0.06f64,
        theta in angle(),
        phi in angle(),
        scale in 0.05..1.0f64,
    ) {
        let cfg = NormalizationConfig { scale };
        let sphere = SphereModel::new(Point3::new(c[0], c[1], z + c[2]), r).unwrap();
        let centroid = sphere.center + Vector3::from(off);
        let u = normalize_label(&centroid, &sphere, theta, phi, &cfg).unwrap();
        let (s, pose) = denormalize(&u, &centroid, &cfg).unwrap();
        prop_assert!((s.center - sphere.center).amax() <= 1e-12);
        prop_assert!((s.radius - r).abs() <= 1e-12);
        prop_assert!((pose.theta - theta).abs() <= 1e-12 && (pose.phi - phi).abs() <= 1e-12);
    }

    #[test]
    fn iou_is_symmetric_and_bounded(
        a in prop::array::uniform3(-0.1..0.1f64),
        b in prop::array::uniform3(-0.1..0.1f64),
        ra in 0.01..0.08f64,
        rb in 0.01..0.08f64,
    ) {
        let s = SphereModel::new(Point3::from(a), ra).unwrap();
        let t = SphereModel::new(Point3::from(b), rb).unwrap();
        let v = sphere_iou(&s, &t);
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert_eq!(v, sphere_iou(&t, &s));
        prop_assert_eq!(sphere_iou(&s, &s), 1.0);
    }
}
