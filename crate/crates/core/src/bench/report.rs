use std::fmt::Write as _;
use std::str::FromStr;

use super::suite::{ConditionReport, ConditionRow};
use crate::error::{GraspError, Result};
use crate::estimators::Method;
use crate::synthgen::Condition;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// Aligned tables, three decimals.
    Text,
    /// Pretty JSON at full precision.
    Structured,
}

impl FromStr for ReportFormat {
    type Err = GraspError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(ReportFormat::Text),
            "structured" | "json" => Ok(ReportFormat::Structured),
            other => Err(GraspError::UnknownFormat(other.to_string())),
        }
    }
}

pub fn report_render(report: &ConditionReport, format: &str) -> Result<String> {
    match format.parse()? {
        ReportFormat::Text => Ok(render_text(report)),
        ReportFormat::Structured => render_structured(report),
    }
}

pub fn render_structured(report: &ConditionReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

pub fn parse_structured(text: &str) -> Result<ConditionReport> {
    Ok(serde_json::from_str(text)?)
}

fn fmt3(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"))
}

/// Left-aligned first column, right-aligned numbers.
fn table(out: &mut String, title: &str, header: &[String], rows: &[Vec<String>]) {
    let cols = header.len();
    let width: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .map(|r| r[c].len())
                .chain([header[c].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (c, cell) in cells.iter().enumerate() {
            if c == 0 {
                let _ = write!(s, "{cell:<w$}", w = width[0]);
            } else {
                let _ = write!(s, "  {cell:>w$}", w = width[c]);
            }
        }
        s.trim_end().to_string()
    };
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "{}", line(header));
    for r in rows {
        let _ = writeln!(out, "{}", line(r));
    }
    out.push('\n');
}

fn grid(
    report: &ConditionReport,
    methods: &[Method],
    conditions: &[Condition],
    cell: impl Fn(&ConditionRow) -> Option<f64>,
) -> Vec<Vec<String>> {
    methods
        .iter()
        .map(|&m| {
            std::iter::once(m.to_string())
                .chain(
                    conditions
                        .iter()
                        .map(|&c| fmt3(report.row(m, c).and_then(&cell))),
                )
                .collect()
        })
        .collect()
}

/// Tables: shape accuracy and mean orientation error per method and
/// condition, a pooled per-method summary, the grasp proxy, failure
/// counts, and the noise-robustness check.
pub fn render_text(report: &ConditionReport) -> String {
    let methods = report.methods();
    let conditions = report.conditions();
    let th = &report.config.thresholds;
    let mut out = String::new();
    let header: Vec<String> = std::iter::once("method".to_string())
        .chain(conditions.iter().map(|c| c.to_string()))
        .collect();

    table(
        &mut out,
        &format!("Shape accuracy (IoU3D >= {:.3})", th.iou),
        &header,
        &grid(report, &methods, &conditions, |r| Some(r.metrics.shape_accuracy)),
    );
    table(
        &mut out,
        "Mean grasp orientation error (deg)",
        &header,
        &grid(report, &methods, &conditions, |r| r.metrics.mean_orientation_error_deg),
    );

    // Pooled over conditions, weighted by the counts behind each mean.
    type Pick = fn(&ConditionRow) -> Option<(f64, usize)>;
    let pooled = |m: Method, pick: Pick| {
        let (sum, n) = report
            .rows
            .iter()
            .filter(|r| r.method == m)
            .filter_map(pick)
            .fold((0.0, 0), |(s, n), (v, k)| (s + v * k as f64, n + k));
        (n > 0).then(|| sum / n as f64)
    };
    let picks: [(&str, Pick); 3] = [
        ("accuracy", |r| Some((r.metrics.shape_accuracy, r.metrics.samples))),
        ("mean IoU3D", |r| Some((r.metrics.mean_iou?, r.metrics.fitted))),
        ("orientation (deg)", |r| Some((r.metrics.mean_orientation_error_deg?, r.metrics.posed))),
    ];
    let summary_header: Vec<String> = std::iter::once(String::new())
        .chain(methods.iter().map(|m| m.to_string()))
        .collect();
    let summary_rows: Vec<Vec<String>> = picks
        .into_iter()
        .map(|(label, pick)| {
            std::iter::once(label.to_string())
                .chain(methods.iter().map(|&m| fmt3(pooled(m, pick))))
                .collect()
        })
        .collect();
    table(&mut out, "Summary over all conditions", &summary_header, &summary_rows);

    table(
        &mut out,
        &format!(
            "Grasp success proxy (orientation <= {:.3} deg and IoU3D >= {:.3}; no gripper simulation)",
            th.orientation_deg, th.iou
        ),
        &header,
        &grid(report, &methods, &conditions, |r| Some(r.metrics.grasp_success_rate)),
    );

    let mut kinds: Vec<&String> = report.rows.iter().flat_map(|r| r.metrics.failures.keys()).collect();
    kinds.sort();
    kinds.dedup();
    let fail_header: Vec<String> = ["method", "condition", "samples", "fitted", "posed"]
        .into_iter()
        .map(String::from)
        .chain(kinds.iter().map(|k| k.to_string()))
        .collect();
    let fail_rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            let m = &r.metrics;
            [r.method.to_string(), r.condition.to_string()]
                .into_iter()
                .chain([m.samples, m.fitted, m.posed].map(|v| v.to_string()))
                .chain(kinds.iter().map(|k| m.failures.get(*k).copied().unwrap_or(0).to_string()))
                .collect()
        })
        .collect();
    table(&mut out, "Sample accounting", &fail_header, &fail_rows);

    if let Some(nr) = &report.noise_robustness {
        let _ = writeln!(out, "Accuracy drop from normal to noise");
        for (m, d) in &nr.drops {
            let _ = writeln!(out, "  {m}: {d:.3}");
        }
        if nr.learned_degrades_least {
            let _ = writeln!(out, "  learned estimator degrades least: yes");
        } else {
            let _ = writeln!(
                out,
                "  DIVERGENCE: the learned estimator does not degrade least under noise, \
                 contrary to the published pattern"
            );
        }
    }
    let _ = writeln!(out, "seed {}", report.seed);
    out
}
