use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{open, parse_f64, read_csv, with_path, IngestError};
use crate::geometry::CameraIntrinsics;

/// Column order written by [`write_detections`]. Readers locate columns by
/// header name, so extra columns or reordering are tolerated.
pub const DETECTION_COLUMNS: [&str; 9] = [
    "frame_id",
    "timestamp",
    "class_id",
    "class_name",
    "x_min",
    "y_min",
    "x_max",
    "y_max",
    "confidence",
];

/// One row of the detector log: a pixel box in one video frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection2D {
    pub frame_id: u64,
    pub timestamp: f64,
    pub class_id: u32,
    pub class_name: String,
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub confidence: f64,
}

impl Detection2D {
    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    /// Pixel-inclusive membership test.
    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= self.x_min && u <= self.x_max && v >= self.y_min && v <= self.y_max
    }
}

/// Image bounds and the obstacle-class allowlist applied while parsing.
#[derive(Debug, Clone)]
pub struct DetectionFilter {
    pub allowlist: BTreeSet<u32>,
    pub width: f64,
    pub height: f64,
}

impl DetectionFilter {
    pub fn new(allowlist: impl IntoIterator<Item = u32>, intr: &CameraIntrinsics) -> Self {
        Self {
            allowlist: allowlist.into_iter().collect(),
            width: intr.width() as f64,
            height: intr.height() as f64,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectionSet {
    pub detections: Vec<Detection2D>,
    /// Rows whose class is outside the allowlist.
    pub dropped_class: usize,
    /// Rows whose box was clamped to the image bounds.
    pub clamped: usize,
}

pub fn parse_detections(path: &Path, filter: &DetectionFilter) -> Result<DetectionSet, IngestError> {
    with_path(path, parse_detections_from(open(path)?, filter))
}

pub fn parse_detections_from<R: Read>(
    reader: R,
    filter: &DetectionFilter,
) -> Result<DetectionSet, IngestError> {
    let mut out = DetectionSet::default();
    read_csv(reader, &DETECTION_COLUMNS, |line, f| {
        let frame_id: u64 = f[0]
            .parse()
            .map_err(|_| IngestError::malformed(line, format!("frame_id: cannot parse `{}`", f[0])))?;
        let timestamp = parse_f64(f[1], line, "timestamp")?;
        let class_id: u32 = f[2]
            .parse()
            .map_err(|_| IngestError::malformed(line, format!("class_id: cannot parse `{}`", f[2])))?;
        let class_name = f[3].to_string();
        let mut det = Detection2D {
            frame_id,
            timestamp,
            class_id,
            class_name,
            x_min: parse_f64(f[4], line, "x_min")?,
            y_min: parse_f64(f[5], line, "y_min")?,
            x_max: parse_f64(f[6], line, "x_max")?,
            y_max: parse_f64(f[7], line, "y_max")?,
            confidence: parse_f64(f[8], line, "confidence")?,
        };
        if !(0.0..=1.0).contains(&det.confidence) {
            return Err(IngestError::malformed(line, "confidence outside [0, 1]"));
        }
        if det.x_min >= det.x_max || det.y_min >= det.y_max {
            return Err(IngestError::malformed(line, "box has min >= max"));
        }
        if det.x_max <= 0.0 || det.y_max <= 0.0 || det.x_min >= filter.width || det.y_min >= filter.height
        {
            return Err(IngestError::malformed(line, "box lies entirely outside the image"));
        }
        if !filter.allowlist.contains(&det.class_id) {
            out.dropped_class += 1;
            return Ok(());
        }
        let clamped = (
            det.x_min.max(0.0),
            det.y_min.max(0.0),
            det.x_max.min(filter.width),
            det.y_max.min(filter.height),
        );
        if clamped != (det.x_min, det.y_min, det.x_max, det.y_max) {
            out.clamped += 1;
            (det.x_min, det.y_min, det.x_max, det.y_max) = clamped;
        }
        out.detections.push(det);
        Ok(())
    })?;
    Ok(out)
}

pub fn write_detections<W: Write>(writer: W, detections: &[Detection2D]) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(DETECTION_COLUMNS)?;
    for d in detections {
        w.write_record([
            d.frame_id.to_string(),
            d.timestamp.to_string(),
            d.class_id.to_string(),
            d.class_name.clone(),
            d.x_min.to_string(),
            d.y_min.to_string(),
            d.x_max.to_string(),
            d.y_max.to_string(),
            d.confidence.to_string(),
        ])?;
    }
    w.flush()
}
