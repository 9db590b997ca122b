//! JSON Lines dataset files: one sample object per line.
//!
//! Point coordinates are written with 9 significant digits; every other
//! number is written with the shortest representation that parses back to
//! the same `f64`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Condition, LabeledSample};
use crate::error::{GraspError, Result};
use crate::geometry::{GraspPose, Point3, SphereModel};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleRecord {
    points: Vec<[f64; 3]>,
    center: [f64; 3],
    radius: f64,
    theta: f64,
    phi: f64,
    condition: Condition,
    seed: u64,
}

/// Rounds to 9 significant decimal digits.
pub(crate) fn round_sig9(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{v:.8e}").parse().expect("formatted float parses")
}

impl SampleRecord {
    fn from_sample(s: &LabeledSample) -> Self {
        Self {
            points: s
                .points
                .iter()
                .map(|p| [round_sig9(p.x), round_sig9(p.y), round_sig9(p.z)])
                .collect(),
            center: s.sphere.center.coords.into(),
            radius: s.sphere.radius,
            theta: s.theta,
            phi: s.phi,
            condition: s.condition,
            seed: s.seed,
        }
    }

    fn into_sample(self) -> std::result::Result<LabeledSample, String> {
        if self.points.is_empty() {
            return Err("sample has no points".into());
        }
        if self.points.iter().flatten().any(|v| !v.is_finite()) {
            return Err("non-finite point coordinate".into());
        }
        let sphere = SphereModel::new(Point3::from(self.center), self.radius)
            .map_err(|e| e.to_string())?;
        GraspPose::new(sphere.center, self.theta, self.phi).map_err(|e| e.to_string())?;
        Ok(LabeledSample {
            points: self.points.into_iter().map(Point3::from).collect(),
            sphere,
            theta: self.theta,
            phi: self.phi,
            condition: self.condition,
            seed: self.seed,
        })
    }
}

pub fn write_dataset(samples: &[LabeledSample], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| GraspError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for s in samples {
        serde_json::to_writer(&mut out, &SampleRecord::from_sample(s))?;
        out.write_all(b"\n").map_err(|e| GraspError::io(path, e))?;
    }
    out.flush().map_err(|e| GraspError::io(path, e))
}

/// Reads a dataset. Blank lines are skipped; any malformed record fails with
/// its 1-based line number.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<LabeledSample>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| GraspError::io(path, e))?;
    let mut samples = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| GraspError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| GraspError::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message,
        };
        let record: SampleRecord =
            serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        samples.push(record.into_sample().map_err(parse_err)?);
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::{generate_dataset, GenConfig};

    #[test]
    fn sig9_rounding() {
        assert_eq!(round_sig9(0.123456789123), 0.123456789);
        assert_eq!(round_sig9(-1234.56789012), -1234.56789);
        assert_eq!(round_sig9(0.0), 0.0);
        let once = round_sig9(0.7071067811865476);
        assert_eq!(round_sig9(once), once);
    }

    #[test]
    fn malformed_line_is_reported_by_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let samples = generate_dataset(&GenConfig::default(), 8, 1).unwrap();
        write_dataset(&samples, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines[6] = "{\"points\": [[1, 2]]}";
        std::fs::write(&path, lines.join("\n")).unwrap();
        match read_dataset(&path) {
            Err(GraspError::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn schema_violations_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.jsonl");
        let bad_angle = r#"{"points":[[0,0,0.5]],"center":[0,0,0.5],"radius":0.04,"theta":1.2,"phi":0,"condition":"normal","seed":1}"#;
        std::fs::write(&path, bad_angle).unwrap();
        assert!(matches!(read_dataset(&path), Err(GraspError::Parse { line: 1, .. })));
        let bad_condition = r#"{"points":[[0,0,0.5]],"center":[0,0,0.5],"radius":0.04,"theta":0,"phi":0,"condition":"fog","seed":1}"#;
        std::fs::write(&path, format!("\n{bad_condition}\n")).unwrap();
        assert!(matches!(read_dataset(&path), Err(GraspError::Parse { line: 2, .. })));
    }

    #[test]
    fn empty_file_is_empty_dataset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        std::fs::write(&path, "").unwrap();
        assert!(read_dataset(&path).unwrap().is_empty());
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            read_dataset("/nonexistent/x.jsonl"),
            Err(GraspError::Io { .. })
        ));
    }
}
