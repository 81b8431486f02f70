use std::io::{Read, Write};
use std::path::Path;

use nalgebra::Quaternion;

use super::{open, parse_f64, read_utf8, with_path, IngestError};
use crate::geometry::{Frame, PoseSE3};

/// Quaternions further than this from unit norm are rejected outright.
const MAX_NORM_DEVIATION: f64 = 1e-3;

/// A timestamped camera pose in the (unscaled) SLAM map frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryEntry {
    pub timestamp: f64,
    /// Camera-to-map transform.
    pub pose: PoseSE3,
}

pub fn parse_trajectory(path: &Path) -> Result<Vec<TrajectoryEntry>, IngestError> {
    with_path(path, parse_trajectory_from(open(path)?))
}

/// Parses `timestamp tx ty tz qx qy qz qw` lines; `#` starts a comment.
pub fn parse_trajectory_from<R: Read>(reader: R) -> Result<Vec<TrajectoryEntry>, IngestError> {
    let text = read_utf8(reader)?;
    let mut out: Vec<TrajectoryEntry> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx as u64 + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.len() != 8 {
            return Err(IngestError::malformed(
                line,
                format!("expected 8 values, found {}", fields.len()),
            ));
        }
        let mut v = [0.0; 8];
        for (slot, f) in v.iter_mut().zip(&fields) {
            *slot = parse_f64(f, line, "trajectory value")?;
        }
        let timestamp = v[0];
        if let Some(prev) = out.last() {
            if timestamp <= prev.timestamp {
                return Err(IngestError::NonMonotonicTime { line });
            }
        }
        let norm = Quaternion::new(v[7], v[4], v[5], v[6]).norm();
        if (norm - 1.0).abs() > MAX_NORM_DEVIATION {
            return Err(IngestError::DenormalQuaternion {
                line,
                deviation: (norm - 1.0).abs(),
            });
        }
        let pose = PoseSE3::from_parts([v[4], v[5], v[6], v[7]], [v[1], v[2], v[3]], Frame::Camera, Frame::Map)
            .map_err(|e| IngestError::malformed(line, e.to_string()))?;
        out.push(TrajectoryEntry { timestamp, pose });
    }
    Ok(out)
}

pub fn write_trajectory<W: Write>(mut w: W, entries: &[TrajectoryEntry]) -> std::io::Result<()> {
    writeln!(w, "# timestamp tx ty tz qx qy qz qw")?;
    for e in entries {
        let t = e.pose.translation();
        let [qx, qy, qz, qw] = e.pose.quaternion_xyzw();
        writeln!(
            w,
            "{} {} {} {} {} {} {} {}",
            e.timestamp, t.x, t.y, t.z, qx, qy, qz, qw
        )?;
    }
    Ok(())
}
