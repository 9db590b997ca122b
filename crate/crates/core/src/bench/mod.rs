//! Evaluation: per-method metrics, the method × condition suite, report
//! rendering, latency probing and the config file.

mod config;
mod metrics;
mod report;
mod suite;
mod timing;

pub use config::Config;
pub use metrics::{evaluate, EvalThresholds, Metrics};
pub use report::{parse_structured, render_structured, render_text, report_render, ReportFormat};
pub use suite::{
    build_estimator, run_suite, run_suite_on, ConditionReport, ConditionRow, NoiseRobustness, SuiteConfig,
};
pub use timing::{timing_probe, LatencyStats, TimingReport};
