//! Pinhole camera model and frame-tagged rigid transforms.
//!
//! Conventions: the camera frame is +z forward, +x right, +y down. The map
//! frame is +z up. The body (UAV) frame is whatever the calibration's
//! body-from-camera extrinsics say it is.

use std::fmt;

use nalgebra::{Matrix3, Quaternion, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("non-positive depth {0} (point behind or on the camera plane)")]
    NonPositiveDepth(f64),
    #[error("frame mismatch: expected {expected}, found {found}")]
    FrameMismatch { expected: Frame, found: Frame },
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid quaternion (norm {0})")]
    InvalidQuaternion(f64),
}

/// Coordinate frame tag carried by points and poses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    Camera,
    Body,
    Map,
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Frame::Camera => "camera",
            Frame::Body => "body",
            Frame::Map => "map",
        };
        f.write_str(name)
    }
}

/// A 3D point in metres, tagged with the frame it is expressed in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub frame: Frame,
}

impl Point3 {
    pub fn new(x: f64, y: f64, z: f64, frame: Frame) -> Self {
        Self { x, y, z, frame }
    }

    pub fn from_vector(v: Vector3<f64>, frame: Frame) -> Self {
        Self::new(v.x, v.y, v.z, frame)
    }

    pub fn coords(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

/// Image-plane coordinates in pixels. May lie outside the image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelPoint {
    pub u: f64,
    pub v: f64,
}

impl PixelPoint {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }
}

/// Ideal pinhole intrinsics plus the image size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawIntrinsics", into = "RawIntrinsics")]
pub struct CameraIntrinsics {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
}

#[derive(Serialize, Deserialize)]
struct RawIntrinsics {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
}

impl TryFrom<RawIntrinsics> for CameraIntrinsics {
    type Error = GeometryError;

    fn try_from(r: RawIntrinsics) -> Result<Self, Self::Error> {
        CameraIntrinsics::new(r.fx, r.fy, r.cx, r.cy, r.width, r.height)
    }
}

impl From<CameraIntrinsics> for RawIntrinsics {
    fn from(c: CameraIntrinsics) -> Self {
        RawIntrinsics {
            fx: c.fx,
            fy: c.fy,
            cx: c.cx,
            cy: c.cy,
            width: c.width,
            height: c.height,
        }
    }
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, GeometryError> {
        if !(fx.is_finite() && fx > 0.0 && fy.is_finite() && fy > 0.0) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "focal lengths must be positive (fx={fx}, fy={fy})"
            )));
        }
        if !(cx > 0.0 && cx < width as f64 && cy > 0.0 && cy < height as f64) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "optical center ({cx}, {cy}) outside image {width}x{height}"
            )));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    pub fn fx(&self) -> f64 {
        self.fx
    }
    pub fn fy(&self) -> f64 {
        self.fy
    }
    pub fn cx(&self) -> f64 {
        self.cx
    }
    pub fn cy(&self) -> f64 {
        self.cy
    }
    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }

    /// `P' = K P` for a camera-frame point with positive depth.
    pub fn project(&self, p: &Point3) -> Result<PixelPoint, GeometryError> {
        expect_frame(Frame::Camera, p.frame)?;
        if !(p.z > 0.0) {
            return Err(GeometryError::NonPositiveDepth(p.z));
        }
        Ok(PixelPoint {
            u: self.fx * p.x / p.z + self.cx,
            v: self.fy * p.y / p.z + self.cy,
        })
    }

    /// Inverse of [`project`](Self::project) given the depth `z`.
    pub fn back_project(&self, px: PixelPoint, z: f64) -> Result<Point3, GeometryError> {
        if !(z > 0.0) {
            return Err(GeometryError::NonPositiveDepth(z));
        }
        Ok(Point3 {
            x: (px.u - self.cx) * z / self.fx,
            y: (px.v - self.cy) * z / self.fy,
            z,
            frame: Frame::Camera,
        })
    }

    /// True when the pixel lies inside `[0, width] x [0, height]`.
    pub fn contains(&self, px: PixelPoint) -> bool {
        px.u >= 0.0 && px.u <= self.width as f64 && px.v >= 0.0 && px.v <= self.height as f64
    }
}

/// Free-function forms of the camera operations.
pub fn project(intr: &CameraIntrinsics, p: &Point3) -> Result<PixelPoint, GeometryError> {
    intr.project(p)
}

pub fn back_project(
    intr: &CameraIntrinsics,
    px: PixelPoint,
    z: f64,
) -> Result<Point3, GeometryError> {
    intr.back_project(px, z)
}

fn expect_frame(expected: Frame, found: Frame) -> Result<(), GeometryError> {
    if expected == found {
        Ok(())
    } else {
        Err(GeometryError::FrameMismatch { expected, found })
    }
}

/// Rigid transform mapping points from `source` into `target`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseSE3 {
    rotation: UnitQuaternion<f64>,
    translation: Vector3<f64>,
    source: Frame,
    target: Frame,
}

/// Quaternions closer than this to unit norm are stored untouched, so that
/// re-normalising an already normalised value is bit-exact.
const UNIT_NORM_SLACK: f64 = 4.0 * f64::EPSILON;

pub(crate) fn normalize_quaternion(q: Quaternion<f64>) -> Result<UnitQuaternion<f64>, GeometryError> {
    let norm = q.norm();
    if !norm.is_finite() || norm < 1e-12 {
        return Err(GeometryError::InvalidQuaternion(norm));
    }
    if (norm - 1.0).abs() <= UNIT_NORM_SLACK {
        Ok(Unit::new_unchecked(q))
    } else {
        Ok(Unit::new_unchecked(q / norm))
    }
}

impl PoseSE3 {
    pub fn identity(frame: Frame) -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
            source: frame,
            target: frame,
        }
    }

    /// Builds a pose from `(qx, qy, qz, qw)` and a translation; the quaternion
    /// is normalised.
    pub fn from_parts(
        quat_xyzw: [f64; 4],
        translation: [f64; 3],
        source: Frame,
        target: Frame,
    ) -> Result<Self, GeometryError> {
        let [qx, qy, qz, qw] = quat_xyzw;
        let rotation = normalize_quaternion(Quaternion::new(qw, qx, qy, qz))?;
        Ok(Self {
            rotation,
            translation: Vector3::from(translation),
            source,
            target,
        })
    }

    pub fn from_rotation_translation(
        rotation: UnitQuaternion<f64>,
        translation: Vector3<f64>,
        source: Frame,
        target: Frame,
    ) -> Self {
        Self {
            rotation,
            translation,
            source,
            target,
        }
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// `(qx, qy, qz, qw)`.
    pub fn quaternion_xyzw(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.i, q.j, q.k, q.w]
    }

    pub fn source(&self) -> Frame {
        self.source
    }

    pub fn target(&self) -> Frame {
        self.target
    }

    pub fn with_translation(&self, translation: Vector3<f64>) -> Self {
        Self {
            translation,
            ..*self
        }
    }

    /// Relabels the frames without touching the numbers.
    pub fn retagged(&self, source: Frame, target: Frame) -> Self {
        Self {
            source,
            target,
            ..*self
        }
    }

    pub fn inverse(&self) -> Self {
        let rotation = self.rotation.inverse();
        Self {
            translation: -(rotation * self.translation),
            rotation,
            source: self.target,
            target: self.source,
        }
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &PoseSE3) -> Result<PoseSE3, GeometryError> {
        expect_frame(self.source, other.target)?;
        let q = (self.rotation * other.rotation).into_inner();
        Ok(Self {
            rotation: normalize_quaternion(q)?,
            translation: self.rotation * other.translation + self.translation,
            source: other.source,
            target: self.target,
        })
    }

    /// `R p + t`, retagged into the target frame.
    pub fn transform_point(&self, p: &Point3) -> Result<Point3, GeometryError> {
        expect_frame(self.source, p.frame)?;
        Ok(Point3::from_vector(self.apply(&p.coords()), self.target))
    }

    /// Applies the transform to raw coordinates, skipping the frame check.
    pub fn apply(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v + self.translation
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }
}

pub fn compose(a: &PoseSE3, b: &PoseSE3) -> Result<PoseSE3, GeometryError> {
    a.compose(b)
}

pub fn transform_point(t: &PoseSE3, p: &Point3) -> Result<Point3, GeometryError> {
    t.transform_point(p)
}
