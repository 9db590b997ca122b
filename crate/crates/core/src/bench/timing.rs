use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{GraspError, Result};
use crate::estimators::Estimator;
use crate::preprocess::{clean_cloud, prepare_cloud};
use crate::seeding::rng_from_seed;
use crate::synthgen::LabeledSample;

/// Wall-clock latency summary, seconds per cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
}

impl LatencyStats {
    pub fn from_samples(mut v: Vec<f64>) -> Option<Self> {
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        };
        // Nearest-rank percentile.
        let p95 = v[((0.95 * n as f64).ceil() as usize).clamp(1, n) - 1];
        Some(Self {
            count: n,
            mean: v.iter().sum::<f64>() / n as f64,
            median,
            p95,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    /// Preprocessing alone.
    pub preprocess: LatencyStats,
    /// Preprocessing plus estimation.
    pub full: LatencyStats,
}

/// Times the estimator over every cloud `repetitions` times after one
/// untimed warm-up pass over the first cloud.
pub fn timing_probe(
    estimator: &Estimator,
    samples: &[LabeledSample],
    repetitions: usize,
) -> Result<TimingReport> {
    if repetitions == 0 || samples.is_empty() {
        return Err(GraspError::InvalidArgument(
            "timing needs at least one repetition and one cloud".into(),
        ));
    }
    let _ = estimator.estimate(&samples[0].points, 0);
    let mut pre = Vec::with_capacity(repetitions * samples.len());
    let mut full = Vec::with_capacity(repetitions * samples.len());
    for rep in 0..repetitions {
        for (i, s) in samples.iter().enumerate() {
            let seed = (rep * samples.len() + i) as u64;
            let t = Instant::now();
            let _ = match estimator {
                Estimator::PointNet(p) => prepare_cloud(&s.points, &p.preprocess, &mut rng_from_seed(seed)).map(|_| ()),
                Estimator::Ransac { preprocess, .. } | Estimator::Hough { preprocess, .. } => {
                    clean_cloud(&s.points, preprocess).map(|_| ())
                }
            };
            pre.push(t.elapsed().as_secs_f64());
            let t = Instant::now();
            let _ = estimator.estimate(&s.points, seed);
            full.push(t.elapsed().as_secs_f64());
        }
    }
    Ok(TimingReport {
        preprocess: LatencyStats::from_samples(pre).expect("non-empty"),
        full: LatencyStats::from_samples(full).expect("non-empty"),
    })
}
