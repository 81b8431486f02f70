//! Parsers (and paired writers) for every flight-session input file.
//!
//! Each parser has a reader-based entry point (`*_from`) used by the fuzz
//! tests, plus a path-based wrapper that tags I/O failures with the path.

mod calibration;
mod detections;
mod events;
mod odometry;
mod ply;
mod trajectory;

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use calibration::{load_calibration, parse_calibration, Calibration, Extrinsics, DEFAULT_OBSTACLE_CLASSES};
pub use detections::{
    parse_detections, parse_detections_from, write_detections, Detection2D, DetectionFilter,
    DetectionSet, DETECTION_COLUMNS,
};
pub use events::{
    parse_slam_events, parse_slam_events_from, write_slam_events, SlamEvent, SlamEventLog,
};
pub use odometry::{parse_odometry, parse_odometry_from, write_odometry, OdometrySample};
pub use ply::{parse_pointcloud, parse_pointcloud_from, write_pointcloud, SparseMapPoint};
pub use trajectory::{parse_trajectory, parse_trajectory_from, write_trajectory, TrajectoryEntry};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("read failed: {0}")]
    Read(#[from] std::io::Error),
    #[error("input is not valid UTF-8")]
    InvalidUtf8,
    #[error("empty file")]
    EmptyFile,
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("line {line}: timestamp does not increase")]
    NonMonotonicTime { line: u64 },
    #[error("line {line}: quaternion norm deviates from 1 by {deviation}")]
    DenormalQuaternion { line: u64, deviation: f64 },
    #[error("bad PLY header: {0}")]
    BadHeader(String),
    #[error("PLY declares {declared} vertices but contains {found}")]
    VertexCountMismatch { declared: usize, found: usize },
    #[error("line {line}: non-finite coordinate")]
    NonFiniteCoordinate { line: u64 },
    #[error("line {line}: unknown event `{name}`")]
    UnknownEvent { line: u64, name: String },
    #[error("line {line}: {reason}")]
    InvalidEventSequence { line: u64, reason: String },
    #[error("invalid calibration: {0}")]
    Calibration(String),
}

impl IngestError {
    fn malformed(line: u64, reason: impl Into<String>) -> Self {
        IngestError::MalformedRow {
            line,
            reason: reason.into(),
        }
    }
}

pub(crate) fn open(path: &Path) -> Result<BufReader<File>, IngestError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// Re-attaches the path to bare read errors raised while parsing `path`.
pub(crate) fn with_path<T>(path: &Path, r: Result<T, IngestError>) -> Result<T, IngestError> {
    r.map_err(|e| match e {
        IngestError::Read(source) => IngestError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

pub(crate) fn read_utf8<R: Read>(mut reader: R) -> Result<String, IngestError> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    String::from_utf8(bytes).map_err(|_| IngestError::InvalidUtf8)
}

pub(crate) fn parse_f64(field: &str, line: u64, what: &str) -> Result<f64, IngestError> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| IngestError::malformed(line, format!("{what}: cannot parse `{field}`")))?;
    if !v.is_finite() {
        return Err(IngestError::malformed(line, format!("{what}: non-finite value")));
    }
    Ok(v)
}

/// Shared CSV reading for the small timestamped logs: header check, then
/// per-record callback with the 1-based line number.
pub(crate) fn read_csv<R: Read>(
    reader: R,
    columns: &[&str],
    mut row: impl FnMut(u64, &[&str]) -> Result<(), IngestError>,
) -> Result<(), IngestError> {
    let text = read_utf8(reader)?;
    if text.trim().is_empty() {
        return Err(IngestError::EmptyFile);
    }
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| IngestError::malformed(1, e.to_string()))?
        .clone();
    let mut index = Vec::with_capacity(columns.len());
    for col in columns {
        let i = headers
            .iter()
            .position(|h| h == *col)
            .ok_or_else(|| IngestError::MissingColumn((*col).to_string()))?;
        index.push(i);
    }
    let mut record = csv::StringRecord::new();
    loop {
        match rdr.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                return Err(IngestError::malformed(line, e.to_string()));
            }
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let fields: Vec<&str> = index.iter().map(|&i| record.get(i).unwrap_or("")).collect();
        row(line, &fields)?;
    }
    Ok(())
}
