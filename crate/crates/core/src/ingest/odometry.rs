use std::io::{Read, Write};
use std::path::Path;

use nalgebra::Vector3;

use super::{open, parse_f64, read_csv, with_path, IngestError};

/// Linear velocity reported by the drone driver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdometrySample {
    pub timestamp: f64,
    /// m/s, body frame unless the session says otherwise.
    pub velocity: Vector3<f64>,
}

const COLUMNS: [&str; 4] = ["timestamp", "vx", "vy", "vz"];

pub fn parse_odometry(path: &Path) -> Result<Vec<OdometrySample>, IngestError> {
    with_path(path, parse_odometry_from(open(path)?))
}

pub fn parse_odometry_from<R: Read>(reader: R) -> Result<Vec<OdometrySample>, IngestError> {
    let mut out: Vec<OdometrySample> = Vec::new();
    read_csv(reader, &COLUMNS, |line, f| {
        let timestamp = parse_f64(f[0], line, "timestamp")?;
        if out.last().is_some_and(|p| timestamp <= p.timestamp) {
            return Err(IngestError::NonMonotonicTime { line });
        }
        let velocity = Vector3::new(
            parse_f64(f[1], line, "vx")?,
            parse_f64(f[2], line, "vy")?,
            parse_f64(f[3], line, "vz")?,
        );
        out.push(OdometrySample { timestamp, velocity });
        Ok(())
    })?;
    Ok(out)
}

pub fn write_odometry<W: Write>(mut w: W, samples: &[OdometrySample]) -> std::io::Result<()> {
    writeln!(w, "{}", COLUMNS.join(","))?;
    for s in samples {
        writeln!(
            w,
            "{},{},{},{}",
            s.timestamp, s.velocity.x, s.velocity.y, s.velocity.z
        )?;
    }
    Ok(())
}
