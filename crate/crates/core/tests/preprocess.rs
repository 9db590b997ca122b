use std::collections::HashSet;

use applegrasp_core::preprocess::{
    centroid, prepare_cloud, reject_outliers, voxel_downsample, voxel_index, PreprocessConfig,
};
use applegrasp_core::seeding::{derive_seed, rng_from_seed};
use applegrasp_core::synthgen::visible_hemisphere_points;
use applegrasp_core::{GraspError, Point3, SphereModel, Vector3};
use proptest::prelude::*;
use rand::Rng;

/// Hemisphere cloud plus 1 to 5 points planted beyond five times the clean
/// cloud's mean centroid distance.
fn planted_case(seed: u64) -> (Vec<Point3>, Vec<Point3>) {
    let mut rng = rng_from_seed(seed);
    let sphere = SphereModel::new(
        Point3::new(rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2), rng.random_range(0.4..1.0)),
        rng.random_range(0.03..0.05),
    )
    .unwrap();
    let clean = visible_hemisphere_points(&sphere, rng.random_range(200..600), &mut rng);
    let c = centroid(&clean).unwrap();
    let mean = clean.iter().map(|p| (p - c).norm()).sum::<f64>() / clean.len() as f64;
    let planted: Vec<Point3> = (0..rng.random_range(1..=5))
        .map(|_| {
            let dir = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                .normalize();
            c + dir * mean * rng.random_range(5.5..20.0)
        })
        .collect();
    (clean, planted)
}

#[test]
fn planted_far_outliers_are_always_removed() {
    for seed in 0..100 {
        let (clean, planted) = planted_case(derive_seed(seed, &[7]));
        let mut cloud = clean.clone();
        // Interleave so position in the cloud carries no signal.
        for (k, p) in planted.iter().enumerate() {
            cloud.insert((k * 37) % cloud.len(), *p);
        }
        let kept = reject_outliers(&cloud).unwrap();
        for p in &planted {
            assert!(!kept.contains(p), "case {seed}: planted point survived");
        }
        assert!(kept.len() * 10 >= clean.len() * 9, "case {seed}: only {} of {} inliers kept", kept.len(), clean.len());
    }
}

#[test]
fn clouds_below_sample_size_are_rejected() {
    let sphere = SphereModel::new(Point3::new(0.0, 0.0, 0.6), 0.04).unwrap();
    let cfg = PreprocessConfig::default();
    let cloud = visible_hemisphere_points(&sphere, 199, &mut rng_from_seed(1));
    let r = prepare_cloud(&cloud, &cfg, &mut rng_from_seed(2));
    assert!(matches!(r, Err(GraspError::InsufficientPoints { needed: 200, .. })), "{r:?}");
}

#[test]
fn prepared_cloud_is_centred_and_sized() {
    let sphere = SphereModel::new(Point3::new(0.05, -0.02, 0.7), 0.045).unwrap();
    let cloud = visible_hemisphere_points(&sphere, 600, &mut rng_from_seed(3));
    let p = prepare_cloud(&cloud, &PreprocessConfig::default(), &mut rng_from_seed(4)).unwrap();
    assert_eq!(p.points.len(), 200);
    assert!(centroid(&p.points).unwrap().coords.norm() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn voxel_output_has_unique_indices(
        seed in any::<u64>(),
        n in 1usize..800,
        res in 0.001..0.02f64,
    ) {
        let mut rng = rng_from_seed(seed);
        let pts: Vec<Point3> = (0..n)
            .map(|_| Point3::new(rng.random_range(-0.05..0.05), rng.random_range(-0.05..0.05), rng.random_range(0.5..0.6)))
            .collect();
        let out = voxel_downsample(&pts, res).unwrap();
        let cells: HashSet<[i64; 3]> = out.iter().map(|p| voxel_index(p, res)).collect();
        prop_assert_eq!(cells.len(), out.len());
        let occupied: HashSet<[i64; 3]> = pts.iter().map(|p| voxel_index(p, res)).collect();
        prop_assert_eq!(occupied, cells);
    }

    #[test]
    fn rejection_never_adds_points(seed in any::<u64>(), n in 4usize..300) {
        let mut rng = rng_from_seed(seed);
        let pts: Vec<Point3> = (0..n)
            .map(|_| Point3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let kept = reject_outliers(&pts).unwrap();
        prop_assert!(kept.len() <= n && !kept.is_empty());
        prop_assert!(kept.iter().all(|p| pts.contains(p)));
    }
}
