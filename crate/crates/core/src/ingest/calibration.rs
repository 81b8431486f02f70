use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{open, read_utf8, with_path, IngestError};
use crate::geometry::{CameraIntrinsics, Frame, PoseSE3};

/// Sixteen furniture-like COCO ids used when a calibration file lists none:
/// bicycle, bench, backpack, umbrella, handbag, suitcase, chair, couch,
/// potted plant, bed, dining table, toilet, tv, refrigerator, vase, and
/// fire hydrant.
pub const DEFAULT_OBSTACLE_CLASSES: [u32; 16] =
    [1, 10, 13, 24, 25, 26, 28, 56, 57, 58, 59, 60, 61, 62, 72, 75];

/// Camera calibration and detector configuration for one drone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub intrinsics: CameraIntrinsics,
    pub body_from_camera: Extrinsics,
    #[serde(default = "default_classes")]
    pub obstacle_classes: Vec<u32>,
}

fn default_classes() -> Vec<u32> {
    DEFAULT_OBSTACLE_CLASSES.to_vec()
}

/// Camera pose in the body frame, as stored on disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrinsics {
    /// `[qx, qy, qz, qw]`
    pub rotation: [f64; 4],
    /// metres
    pub translation: [f64; 3],
}

impl Extrinsics {
    pub fn identity() -> Self {
        Self {
            rotation: [0.0, 0.0, 0.0, 1.0],
            translation: [0.0; 3],
        }
    }

    pub fn from_pose(p: &PoseSE3) -> Self {
        let t = p.translation();
        Self {
            rotation: p.quaternion_xyzw(),
            translation: [t.x, t.y, t.z],
        }
    }
}

impl Calibration {
    /// Camera-to-body transform.
    pub fn body_from_camera(&self) -> Result<PoseSE3, IngestError> {
        PoseSE3::from_parts(
            self.body_from_camera.rotation,
            self.body_from_camera.translation,
            Frame::Camera,
            Frame::Body,
        )
        .map_err(|e| IngestError::Calibration(e.to_string()))
    }

    fn validate(&self) -> Result<(), IngestError> {
        self.body_from_camera()?;
        if self.obstacle_classes.is_empty() {
            return Err(IngestError::Calibration("obstacle_classes is empty".into()));
        }
        Ok(())
    }
}

pub fn load_calibration(path: &Path) -> Result<Calibration, IngestError> {
    with_path(path, parse_calibration(open(path)?))
}

pub fn parse_calibration<R: Read>(reader: R) -> Result<Calibration, IngestError> {
    let text = read_utf8(reader)?;
    let cal: Calibration =
        serde_json::from_str(&text).map_err(|e| IngestError::Calibration(e.to_string()))?;
    cal.validate()?;
    Ok(cal)
}
