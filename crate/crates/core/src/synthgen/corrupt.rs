use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{random_unit, uniform, visible_hemisphere_points, Condition, GenConfig, LabeledSample};
use crate::geometry::{Aabb3, Point3, SphereModel, Vector3};

/// Adds iid Gaussian displacement with standard deviation `sigma` per axis.
pub fn add_gaussian_noise(points: &mut [Point3], sigma: f64, rng: &mut impl Rng) {
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and positive");
    for p in points.iter_mut() {
        for i in 0..3 {
            p[i] += normal.sample(rng);
        }
    }
}

/// Appends `round(fraction * n)` points drawn uniformly from a box three
/// times the extent of the cloud, centred on it. Returns the number added.
pub fn add_outliers(points: &mut Vec<Point3>, fraction: f64, rng: &mut impl Rng) -> usize {
    let Some(bounds) = Aabb3::enclosing(points.iter()) else {
        return 0;
    };
    let count = (fraction * points.len() as f64).round() as usize;
    let center = bounds.center();
    let half = bounds.extent() * 1.5;
    for _ in 0..count {
        let mut p = center;
        for i in 0..3 {
            if half[i] > 0.0 {
                p[i] += rng.random_range(-half[i]..half[i]);
            }
        }
        points.push(p);
    }
    count
}

/// Appends visible surface patches of `neighbors` fruits touching `target`.
///
/// Each neighbour has a centre distance in `[r1 + r2, 1.2 (r1 + r2)]`, sits
/// roughly beside the target as seen from the camera, and is sampled at the
/// target's areal point density. Only the part of its visible hemisphere
/// within `r1 + r2 / 2` of the target centre is kept, i.e. the patch a
/// per-fruit mask would bleed into.
pub fn add_clutter(
    points: &mut Vec<Point3>,
    target: &SphereModel,
    cfg: &GenConfig,
    neighbors: usize,
    density: usize,
    rng: &mut impl Rng,
) {
    let view = target.center.coords.normalize();
    for _ in 0..neighbors {
        let r2 = uniform(rng, cfg.radius);
        let sum = target.radius + r2;
        let distance = uniform(rng, [sum, 1.2 * sum]);
        let lateral = {
            let w = random_unit(rng);
            let t = w - view * w.dot(&view);
            if t.norm() < 1e-9 {
                view.cross(&Vector3::x()).normalize()
            } else {
                t.normalize()
            }
        };
        let along: f64 = rng.random_range(-0.3..0.3);
        let dir = (lateral + view * along).normalize();
        let Ok(neighbor) = SphereModel::new(target.center + dir * distance, r2) else {
            continue;
        };
        let scale = (r2 / target.radius).powi(2);
        let count = (density as f64 * scale).round() as usize;
        let keep = target.radius + 0.5 * r2;
        points.extend(
            visible_hemisphere_points(&neighbor, count, rng)
                .into_iter()
                .filter(|p| (p - target.center).norm() <= keep),
        );
    }
}

/// Applies one corruption regime. The ground-truth label is never modified.
pub fn corrupt(
    sample: &LabeledSample,
    cfg: &GenConfig,
    condition: Condition,
    rng: &mut impl Rng,
) -> LabeledSample {
    let mut out = sample.clone();
    out.condition = condition;
    let density = sample.points.len();
    let clutter = matches!(condition, Condition::DenseClutter | Condition::Combined);
    let noise = matches!(condition, Condition::Noise | Condition::Combined);
    let outliers = matches!(condition, Condition::Outlier | Condition::Combined);
    if clutter {
        let [lo, hi] = cfg.clutter_neighbors;
        let k = rng.random_range(lo..=hi);
        add_clutter(&mut out.points, &sample.sphere, cfg, k, density, rng);
    }
    if noise {
        add_gaussian_noise(&mut out.points, cfg.noise_sigma, rng);
    }
    if outliers {
        let fraction = uniform(rng, cfg.outlier_fraction);
        add_outliers(&mut out.points, fraction, rng);
    }
    out
}
