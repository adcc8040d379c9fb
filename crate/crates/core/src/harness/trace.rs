//! Trace and path persistence: JSON lines, one record per line, plus a
//! content hash used for determinism checks.

use std::path::Path;

use sha2::{Digest, Sha256};

use super::TraceRecord;
use crate::{Error, Result};

/// Serialize records as JSON lines (documented key order: t, true_pose,
/// est_pose, cmd, p_t, s_k, mode, collision).
pub fn write_trace(records: &[TraceRecord], path: &Path) -> Result<()> {
    std::fs::write(path, render_trace(records)).map_err(|e| Error::io(path, e))
}

fn render_trace(records: &[TraceRecord]) -> String {
    let mut out = String::new();
    for rec in records {
        out.push_str(&serde_json::to_string(rec).expect("trace record serializes"));
        out.push('\n');
    }
    out
}

/// Read a trace back; errors carry the 1-based line number. An empty file
/// is an empty trace.
pub fn read_trace(path: &Path) -> Result<Vec<TraceRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let rec: TraceRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        records.push(rec);
    }
    Ok(records)
}

/// SHA-256 over the serialized trace; a pure function of the records.
pub fn hash_records(records: &[TraceRecord]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(render_trace(records).as_bytes());
    hex_string(&hasher.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Save planner output as JSON lines of [x, y] pairs.
pub fn write_path(points: &[(f64, f64)], path: &Path) -> Result<()> {
    let mut out = String::new();
    for (x, y) in points {
        out.push_str(&serde_json::to_string(&[x, y]).expect("point serializes"));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Read a saved path; errors carry the 1-based line number.
pub fn read_path(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let p: [f64; 2] = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        points.push((p[0], p[1]));
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::Mode;
    use tempfile::tempdir;

    fn record(t: f64) -> TraceRecord {
        TraceRecord {
            t,
            true_pose: [t, 2.0 * t, 0.1],
            est_pose: [t + 0.01, 2.0 * t, 0.1],
            cmd: [0.4, -0.2],
            p_t: 0.25,
            s_k: -0.5,
            mode: Mode::Tracking,
            collision: false,
        }
    }

    #[test]
    fn roundtrip_identity() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.jsonl");
        let records: Vec<TraceRecord> = (0..10).map(|i| record(i as f64 * 0.05)).collect();
        write_trace(&records, &path).unwrap();
        let back = read_trace(&path).unwrap();
        assert_eq!(records, back);
        assert_eq!(hash_records(&records), hash_records(&back));
    }

    #[test]
    fn empty_file_is_empty_trace() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("e.jsonl");
        std::fs::write(&path, "").unwrap();
        assert!(read_trace(&path).unwrap().is_empty());
    }

    #[test]
    fn truncated_line_errors_with_line_number() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        let mut text = serde_json::to_string(&record(0.0)).unwrap();
        text.push('\n');
        text.push_str("{\"t\": 0.05, \"true_pose\": [0.0,");
        std::fs::write(&path, text).unwrap();
        match read_trace(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn key_order_is_documented_order() {
        let json = serde_json::to_string(&record(0.0)).unwrap();
        let keys = ["\"t\"", "\"true_pose\"", "\"est_pose\"", "\"cmd\"", "\"p_t\"", "\"s_k\"", "\"mode\"", "\"collision\""];
        let mut last = 0;
        for key in keys {
            let pos = json.find(key).unwrap_or_else(|| panic!("{key} missing"));
            assert!(pos > last || last == 0);
            last = pos;
        }
    }

    #[test]
    fn path_roundtrip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        let points = vec![(0.0, 0.5), (1.25, -0.75), (2.0, 2.0)];
        write_path(&points, &path).unwrap();
        assert_eq!(read_path(&path).unwrap(), points);
    }
}
