//! Lifting 2D detections into map-frame bounding volumes.
//!
//! The front plane sits at the depth of the closest map point that projects
//! inside the detection box. The prism is as deep as the mean of the front
//! face's metric width and height; the rear corners are back-projected at
//! `front + depth`, so the volume is a frustum slice of the box's view cone.

use std::collections::BTreeMap;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CameraIntrinsics, Frame, GeometryError, PixelPoint, Point3, PoseSE3};
use crate::ingest::{Detection2D, SparseMapPoint, TrajectoryEntry};
use crate::scale::nearest_pose_index;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VolumeError {
    #[error("no map point projects inside the detection box")]
    NoSupportingPoints,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Axis-aligned box in the map frame, metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Aabb {
    pub fn new(min: Vector3<f64>, max: Vector3<f64>) -> Self {
        Self { min, max }
    }

    /// Tight hull of a non-empty point set.
    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vector3<f64>>) -> Self {
        let mut min = Vector3::repeat(f64::INFINITY);
        let mut max = Vector3::repeat(f64::NEG_INFINITY);
        for p in points {
            min = min.inf(p);
            max = max.sup(p);
        }
        Self { min, max }
    }

    pub fn extent(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn center(&self) -> Vector3<f64> {
        (self.min + self.max) * 0.5
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e.x * e.y * e.z
    }

    pub fn is_well_formed(&self) -> bool {
        (0..3).all(|i| self.min[i].is_finite() && self.max[i].is_finite() && self.min[i] < self.max[i])
    }

    pub fn contains_point(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn dilated(&self, margin: f64) -> Self {
        Self {
            min: self.min.add_scalar(-margin),
            max: self.max.add_scalar(margin),
        }
    }

    pub fn contains_aabb(&self, other: &Aabb) -> bool {
        (0..3).all(|i| other.min[i] >= self.min[i] && other.max[i] <= self.max[i])
    }
}

/// A map-frame rectangular prism around one detected obstacle, possibly the
/// union of several merged detections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingVolume3D {
    pub class_id: u32,
    pub class_name: String,
    /// Front face (x_min,y_min), (x_max,y_min), (x_max,y_max), (x_min,y_max),
    /// then the rear face in the same order. Map frame.
    pub corners: [Vector3<f64>; 8],
    pub aabb: Aabb,
    pub appearances: u32,
    /// Sorted, unique.
    pub source_frames: Vec<u64>,
    /// Sorted, unique ids into the sparse cloud.
    pub member_points: Vec<u64>,
    /// Camera-frame depth of the front plane (Z0).
    pub front_depth: f64,
    /// Prism thickness (Z_est).
    pub depth_estimate: f64,
}

impl BoundingVolume3D {
    pub fn rear_depth(&self) -> f64 {
        self.front_depth + self.depth_estimate
    }

    pub fn volume(&self) -> f64 {
        self.aabb.volume()
    }

    pub fn corner_points(&self) -> [Point3; 8] {
        self.corners.map(|c| Point3::from_vector(c, Frame::Map))
    }
}

/// The camera-frame prism produced from one detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftedBox {
    pub width: f64,
    pub height: f64,
    pub front_depth: f64,
    pub depth_estimate: f64,
    pub corners: [Point3; 8],
}

/// Front-plane depth selection. `Closest` is the strict minimum; the
/// percentile variant trades fidelity for robustness to stray points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DepthRule {
    Closest,
    /// Nearest-rank percentile in `(0, 100]`.
    Percentile(f64),
}

impl DepthRule {
    pub fn from_percentile(p: f64) -> Self {
        if p <= 0.0 {
            DepthRule::Closest
        } else {
            DepthRule::Percentile(p.min(100.0))
        }
    }
}

/// Map points expressed in one camera's frame and projected into its image.
pub struct ProjectedCloud {
    /// (u, v, z) for points in front of the camera.
    pixels: Vec<(f64, f64, f64)>,
}

impl ProjectedCloud {
    /// `camera_pose` maps camera-frame points into the map frame.
    pub fn new(
        camera_pose: &PoseSE3,
        intr: &CameraIntrinsics,
        points: &[SparseMapPoint],
    ) -> Result<Self, GeometryError> {
        let cam_from_map = camera_pose.inverse();
        let mut pixels = Vec::new();
        for p in points {
            let pc = cam_from_map.transform_point(&p.position)?;
            if pc.z > 0.0 {
                let px = intr.project(&pc)?;
                pixels.push((px.u, px.v, pc.z));
            }
        }
        Ok(Self { pixels })
    }

    pub fn front_depth(&self, det: &Detection2D, rule: DepthRule) -> Result<f64, VolumeError> {
        let inside = self
            .pixels
            .iter()
            .filter(|(u, v, _)| det.contains(*u, *v))
            .map(|(_, _, z)| *z);
        match rule {
            DepthRule::Closest => inside.reduce(f64::min).ok_or(VolumeError::NoSupportingPoints),
            DepthRule::Percentile(p) => {
                let mut zs: Vec<f64> = inside.collect();
                if zs.is_empty() {
                    return Err(VolumeError::NoSupportingPoints);
                }
                zs.sort_by(f64::total_cmp);
                let rank = ((p / 100.0) * zs.len() as f64).ceil() as usize;
                Ok(zs[rank.clamp(1, zs.len()) - 1])
            }
        }
    }
}

/// Z0: camera-frame depth of the closest map point projecting inside the box.
pub fn front_depth(
    det: &Detection2D,
    camera_pose: &PoseSE3,
    intr: &CameraIntrinsics,
    points: &[SparseMapPoint],
) -> Result<f64, VolumeError> {
    ProjectedCloud::new(camera_pose, intr, points)?.front_depth(det, DepthRule::Closest)
}

/// Back-projects the box corners at the front depth and at the rear depth.
pub fn lift_detection(
    det: &Detection2D,
    front_depth: f64,
    intr: &CameraIntrinsics,
) -> Result<LiftedBox, GeometryError> {
    let pixels = [
        PixelPoint::new(det.x_min, det.y_min),
        PixelPoint::new(det.x_max, det.y_min),
        PixelPoint::new(det.x_max, det.y_max),
        PixelPoint::new(det.x_min, det.y_max),
    ];
    let mut front = [Point3::new(0.0, 0.0, 0.0, Frame::Camera); 4];
    for (slot, px) in front.iter_mut().zip(pixels) {
        *slot = intr.back_project(px, front_depth)?;
    }
    let width = front[1].x - front[0].x;
    let height = front[2].y - front[1].y;
    let depth_estimate = (width + height) / 2.0;
    let rear_depth = front_depth + depth_estimate;
    let mut corners = [front[0]; 8];
    corners[..4].copy_from_slice(&front);
    for (slot, px) in corners[4..].iter_mut().zip(pixels) {
        *slot = intr.back_project(px, rear_depth)?;
    }
    Ok(LiftedBox {
        width,
        height,
        front_depth,
        depth_estimate,
        corners,
    })
}

/// Map-frame corners and their axis-aligned hull.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldBox {
    pub corners: [Vector3<f64>; 8],
    pub aabb: Aabb,
}

/// Maps camera-frame corners through `map_from_body ∘ body_from_camera`.
pub fn to_world(
    corners: &[Point3; 8],
    body_from_camera: &PoseSE3,
    map_from_body: &PoseSE3,
) -> Result<WorldBox, GeometryError> {
    let map_from_camera = map_from_body.compose(body_from_camera)?;
    let mut out = [Vector3::zeros(); 8];
    for (slot, c) in out.iter_mut().zip(corners) {
        *slot = map_from_camera.transform_point(c)?.coords();
    }
    Ok(WorldBox {
        corners: out,
        aabb: Aabb::from_points(&out),
    })
}

/// Body pose in the map, recovered from a camera pose and the calibration.
pub fn map_from_body(
    camera_pose: &PoseSE3,
    body_from_camera: &PoseSE3,
) -> Result<PoseSE3, GeometryError> {
    camera_pose.compose(&body_from_camera.inverse())
}

pub fn volume_from_detection(det: &Detection2D, lifted: &LiftedBox, world: &WorldBox) -> BoundingVolume3D {
    BoundingVolume3D {
        class_id: det.class_id,
        class_name: det.class_name.clone(),
        corners: world.corners,
        aabb: world.aabb,
        appearances: 1,
        source_frames: vec![det.frame_id],
        member_points: Vec::new(),
        front_depth: lifted.front_depth,
        depth_estimate: lifted.depth_estimate,
    }
}

/// Per-volume point ids (sorted) for every point inside the volume's aabb.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Membership {
    pub by_volume: Vec<Vec<u64>>,
}

impl Membership {
    pub fn apply(&self, volumes: &mut [BoundingVolume3D]) {
        for (v, ids) in volumes.iter_mut().zip(&self.by_volume) {
            v.member_points = ids.clone();
        }
    }
}

/// Assigns every point to every volume whose aabb encloses it. Points are
/// indexed by x so each volume only scans its x-slab.
pub fn associate_points(volumes: &[BoundingVolume3D], points: &[SparseMapPoint]) -> Membership {
    let mut by_x: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (p.position.x, i))
        .collect();
    by_x.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let by_volume = volumes
        .iter()
        .map(|v| {
            let lo = by_x.partition_point(|(x, _)| *x < v.aabb.min.x);
            let mut ids: Vec<u64> = by_x[lo..]
                .iter()
                .take_while(|(x, _)| *x <= v.aabb.max.x)
                .filter(|(_, i)| v.aabb.contains_point(&points[*i].position.coords()))
                .map(|(_, i)| points[*i].id)
                .collect();
            ids.sort_unstable();
            ids.dedup();
            ids
        })
        .collect();
    Membership { by_volume }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftConfig {
    /// Maximum |detection time − pose time|, seconds.
    pub pose_tolerance: f64,
    pub depth_rule: DepthRule,
}

impl Default for LiftConfig {
    fn default() -> Self {
        Self {
            pose_tolerance: 0.1,
            depth_rule: DepthRule::Closest,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LiftOutcome {
    pub volumes: Vec<BoundingVolume3D>,
    pub skipped_no_pose: usize,
    pub skipped_no_support: usize,
}

/// Lifts every detection, frame by frame, in frame-id order. Frames run in
/// parallel; results are collected in order. All detections of a frame use
/// the pose matched to the frame's first detection.
pub fn lift_all(
    detections: &[Detection2D],
    poses: &[TrajectoryEntry],
    cloud: &[SparseMapPoint],
    intr: &CameraIntrinsics,
    body_from_camera: &PoseSE3,
    cfg: &LiftConfig,
) -> Result<LiftOutcome, GeometryError> {
    let mut frames: BTreeMap<u64, Vec<&Detection2D>> = BTreeMap::new();
    for d in detections {
        frames.entry(d.frame_id).or_default().push(d);
    }
    let frames: Vec<Vec<&Detection2D>> = frames.into_values().collect();

    let per_frame: Vec<Result<LiftOutcome, GeometryError>> = frames
        .par_iter()
        .map(|dets| {
            let mut out = LiftOutcome::default();
            let t = dets[0].timestamp;
            let pose = nearest_pose_index(poses, t)
                .map(|i| &poses[i])
                .filter(|p| (p.timestamp - t).abs() <= cfg.pose_tolerance);
            let Some(pose) = pose else {
                out.skipped_no_pose = dets.len();
                return Ok(out);
            };
            let projected = ProjectedCloud::new(&pose.pose, intr, cloud)?;
            let body = map_from_body(&pose.pose, body_from_camera)?;
            for det in dets {
                let z0 = match projected.front_depth(det, cfg.depth_rule) {
                    Ok(z) => z,
                    Err(VolumeError::NoSupportingPoints) => {
                        out.skipped_no_support += 1;
                        continue;
                    }
                    Err(VolumeError::Geometry(e)) => return Err(e),
                };
                let lifted = lift_detection(det, z0, intr)?;
                let world = to_world(&lifted.corners, body_from_camera, &body)?;
                out.volumes.push(volume_from_detection(det, &lifted, &world));
            }
            Ok(out)
        })
        .collect();

    let mut total = LiftOutcome::default();
    for r in per_frame {
        let r = r?;
        total.volumes.extend(r.volumes);
        total.skipped_no_pose += r.skipped_no_pose;
        total.skipped_no_support += r.skipped_no_support;
    }
    Ok(total)
}
