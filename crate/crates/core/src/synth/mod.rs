//! Synthetic flight sessions with known ground truth, plus brute-force
//! reference implementations used to cross-check the production code.
//!
//! Randomness comes from ChaCha8 seeded with `SceneSpec::seed`, which gives
//! the same stream on every platform.

mod flight;
mod oracle;

use std::collections::BTreeSet;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use nalgebra::{UnitQuaternion, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{normalize_quaternion, CameraIntrinsics, Frame, Point3, PoseSE3};
use crate::ingest::{
    write_detections, write_odometry, write_pointcloud, write_slam_events, write_trajectory,
    Calibration, Detection2D, Extrinsics, OdometrySample, SlamEvent, SlamEventLog, SparseMapPoint,
    TrajectoryEntry, DEFAULT_OBSTACLE_CLASSES,
};
use crate::pipeline::{InputPaths, PipelineConfig};
use crate::refine::RefineConfig;
use crate::scale::OdometryFrame;
use crate::volumes::Aabb;

pub use flight::{tick_time, FlightPlan, FlightState, POSE_STRIDE, TICK_HZ};
pub use oracle::{oracle_containment, oracle_merge, random_volumes};

/// Projected corners closer than this to the camera plane make an object
/// undetectable in that frame.
const MIN_CORNER_DEPTH: f64 = 0.05;
/// Boxes narrower than this after clipping are treated as out of view.
const MIN_BOX_PX: f64 = 2.0;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scene: {0}")]
    InvalidSpec(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub class_id: u32,
    pub class_name: String,
    /// Map frame, metres.
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl SceneObject {
    pub fn aabb(&self) -> Aabb {
        Aabb::new(Vector3::from(self.min), Vector3::from(self.max))
    }
}

/// One flight leg: optional in-place turn, then a straight move.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    /// Heading to turn to before moving, degrees counter-clockwise from +x.
    #[serde(default)]
    pub yaw_deg: Option<f64>,
    /// Whether frames are captured along this leg.
    #[serde(default)]
    pub capture: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub start: [f64; 2],
    pub start_yaw_deg: f64,
    /// Height of the body origin above the floor, metres.
    pub altitude: f64,
    /// Mean speed along each leg, m/s.
    pub speed: f64,
    /// deg/s
    pub yaw_rate_deg: f64,
    /// Pause after every segment, seconds.
    pub hover_s: f64,
    /// Failed initialisation attempts before the successful one.
    pub init_failures: u32,
    /// Sideways travel of each initialisation attempt, metres.
    pub init_baseline: f64,
    pub waypoints: Vec<Waypoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Per-coordinate Gaussian noise on box edges, pixels.
    pub pixel_sigma: f64,
    /// Chance that each true detection is accompanied by a spurious box.
    pub false_positive_rate: f64,
    pub miss_rate: f64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self { pixel_sigma: 0.0, false_positive_rate: 0.0, miss_rate: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensitySpec {
    pub points_per_object_face: usize,
    pub points_per_wall: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seed: u64,
    pub session_id: String,
    #[serde(default)]
    pub drone_id: String,
    #[serde(default)]
    pub date: String,
    /// Metric length of one SLAM unit.
    pub true_scale: f64,
    pub objects: Vec<SceneObject>,
    /// Walls are sampled on the four vertical sides of this box.
    #[serde(default)]
    pub room: Option<SceneObject>,
    pub camera: CameraIntrinsics,
    pub body_from_camera: Extrinsics,
    pub trajectory: TrajectorySpec,
    /// Number of frames carrying detections.
    pub frames: usize,
    pub noise: NoiseSpec,
    pub density: DensitySpec,
    #[serde(default)]
    pub odometry_frame: OdometryFrame,
}

/// Camera looking along body +x, image right = body −y, image down = body −z.
pub fn forward_camera_extrinsics() -> Extrinsics {
    let r = nalgebra::Matrix3::new(
        0.0, 0.0, 1.0, //
        -1.0, 0.0, 0.0, //
        0.0, -1.0, 0.0,
    );
    let q = UnitQuaternion::from_matrix(&r);
    Extrinsics {
        rotation: [q.i, q.j, q.k, q.w],
        translation: [0.05, 0.0, 0.0],
    }
}

fn obj(class_id: u32, name: &str, min: [f64; 3], max: [f64; 3]) -> SceneObject {
    SceneObject { class_id, class_name: name.into(), min, max }
}

fn wp(x: f64, y: f64, yaw_deg: Option<f64>, capture: bool) -> Waypoint {
    Waypoint { x, y, yaw_deg, capture }
}

impl SceneSpec {
    /// Six obstacles of three classes near the walls of a 13 m square room,
    /// each approached head-on from 7 m down to 4.5 m.
    pub fn default_scene(seed: u64) -> Self {
        let objects = vec![
            obj(56, "chair", [5.0, -2.25, 0.0], [5.5, -1.75, 0.55]),
            obj(60, "dining table", [5.0, 1.7, 0.0], [5.6, 2.3, 0.6]),
            obj(56, "chair", [-5.5, -2.75, 0.0], [-5.0, -2.25, 0.5]),
            obj(58, "potted plant", [-5.45, 2.275, 0.0], [-5.0, 2.725, 0.5]),
            obj(60, "dining table", [-0.3, 5.0, 0.0], [0.3, 5.6, 0.6]),
            obj(58, "potted plant", [-0.25, -5.5, 0.0], [0.25, -5.0, 0.5]),
        ];
        let waypoints = vec![
            wp(-2.0, -2.0, Some(0.0), false),
            wp(0.5, -2.0, None, true),
            wp(-2.0, 2.0, None, false),
            wp(0.5, 2.0, None, true),
            wp(2.0, -2.5, Some(180.0), false),
            wp(-0.5, -2.5, None, true),
            wp(2.0, 2.5, None, false),
            wp(-0.5, 2.5, None, true),
            wp(0.0, -2.0, Some(90.0), false),
            wp(0.0, 0.5, None, true),
            wp(0.0, 2.0, Some(270.0), false),
            wp(0.0, -0.5, None, true),
        ];
        Self {
            seed,
            session_id: format!("synthetic-{seed}"),
            drone_id: "synthetic".into(),
            date: "2024-01-01".into(),
            true_scale: 2.5,
            objects,
            room: Some(obj(0, "room", [-6.5, -6.5, 0.0], [6.5, 6.5, 2.5])),
            camera: CameraIntrinsics::new(1400.0, 1400.0, 640.0, 480.0, 1280, 960)
                .expect("valid intrinsics"),
            body_from_camera: forward_camera_extrinsics(),
            trajectory: TrajectorySpec {
                start: [0.0, 0.0],
                start_yaw_deg: 0.0,
                altitude: 0.3,
                speed: 0.5,
                yaw_rate_deg: 60.0,
                hover_s: 0.5,
                init_failures: 1,
                init_baseline: 0.6,
                waypoints,
            },
            frames: 300,
            noise: NoiseSpec { pixel_sigma: 2.0, false_positive_rate: 0.05, miss_rate: 0.10 },
            density: DensitySpec { points_per_object_face: 80, points_per_wall: 600 },
            odometry_frame: OdometryFrame::Body,
        }
    }

    /// A short flight with no objects: just the initialisation manoeuvres and
    /// one leg, for scale-recovery checks.
    pub fn scale_only(seed: u64, true_scale: f64, init_failures: u32) -> Self {
        let mut s = Self::default_scene(seed);
        s.session_id = format!("scale-{seed}");
        s.true_scale = true_scale;
        s.objects.clear();
        s.room = None;
        s.frames = 0;
        s.noise = NoiseSpec::none();
        s.trajectory.init_failures = init_failures;
        s.trajectory.waypoints = vec![wp(2.0, 1.0, Some(45.0), false)];
        s
    }

    /// One cube in front of the start position, no noise.
    pub fn single_cube(seed: u64) -> Self {
        let mut s = Self::default_scene(seed);
        s.session_id = format!("cube-{seed}");
        s.objects = vec![obj(56, "chair", [4.0, -0.3, 0.0], [4.6, 0.3, 0.6])];
        s.room = None;
        s.noise = NoiseSpec::none();
        s.frames = 20;
        s.trajectory.init_failures = 0;
        s.trajectory.waypoints = vec![wp(0.0, 0.0, Some(0.0), false), wp(1.0, 0.0, None, true)];
        s
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        for (i, o) in self.objects.iter().chain(self.room.iter()).enumerate() {
            if !o.aabb().is_well_formed() {
                return bad(format!("object {i} has a malformed box"));
            }
        }
        let t = &self.trajectory;
        if !(t.speed.is_finite() && t.speed > 0.0) {
            return bad("speed must be positive".into());
        }
        if !(t.yaw_rate_deg.is_finite() && t.yaw_rate_deg > 0.0) {
            return bad("yaw rate must be positive".into());
        }
        if !(t.hover_s.is_finite() && t.hover_s >= 0.0) {
            return bad("hover time must be >= 0".into());
        }
        if !(t.init_baseline.is_finite() && t.init_baseline > 0.0) {
            return bad("init baseline must be positive".into());
        }
        if !t.altitude.is_finite()
            || !t.start.iter().chain(&[t.start_yaw_deg]).all(|v| v.is_finite())
            || t.waypoints.iter().any(|w| !w.x.is_finite() || !w.y.is_finite() || w.yaw_deg.is_some_and(|y| !y.is_finite()))
        {
            return bad("trajectory values must be finite".into());
        }
        if !(self.true_scale.is_finite() && self.true_scale > 0.0) {
            return bad("true_scale must be positive".into());
        }
        let n = &self.noise;
        let rate = |r: f64| (0.0..=1.0).contains(&r);
        if !(n.pixel_sigma.is_finite() && n.pixel_sigma >= 0.0) || !rate(n.false_positive_rate) || !rate(n.miss_rate) {
            return bad("noise values out of range".into());
        }
        PoseSE3::from_parts(self.body_from_camera.rotation, self.body_from_camera.translation, Frame::Camera, Frame::Body)
            .map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
        Ok(())
    }

    fn classes(&self) -> Vec<(u32, String)> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for o in &self.objects {
            if seen.insert(o.class_id) {
                out.push((o.class_id, o.class_name.clone()));
            }
        }
        out
    }
}

/// What the generator knows that the pipeline has to recover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub true_scale: f64,
    pub objects: Vec<SceneObject>,
    pub init_window: (f64, f64),
    pub frames: usize,
    pub true_detections: usize,
    pub missed_detections: usize,
    pub false_positives: usize,
    pub flight_duration: f64,
}

/// An in-memory session in the same units as the files: trajectory and
/// cloud in SLAM units, odometry metric.
#[derive(Debug, Clone)]
pub struct SyntheticSession {
    pub spec: SceneSpec,
    pub calibration: Calibration,
    pub detections: Vec<Detection2D>,
    pub trajectory: Vec<TrajectoryEntry>,
    pub cloud: Vec<SparseMapPoint>,
    pub odometry: Vec<OdometrySample>,
    pub events: SlamEventLog,
    pub ground_truth: GroundTruth,
    /// Metric camera-to-map pose for every tick.
    pub metric_poses: Vec<PoseSE3>,
}

fn plan_flight(spec: &SceneSpec) -> FlightPlan {
    let t = &spec.trajectory;
    let rate = t.yaw_rate_deg.to_radians();
    let mut f = FlightPlan::new(Vector2::from(t.start), t.start_yaw_deg.to_radians(), t.altitude);
    f.hover(t.hover_s.max(0.5));
    for attempt in 0..=t.init_failures {
        let y = f.yaw();
        let side = if attempt % 2 == 0 { 1.0 } else { -1.0 };
        let left = Vector2::new(-y.sin(), y.cos()) * (side * t.init_baseline);
        f.event(SlamEvent::InitSearchStart);
        f.move_to(f.position() + left, t.speed, false);
        f.event(if attempt == t.init_failures { SlamEvent::InitSuccess } else { SlamEvent::InitFailure });
        f.hover(t.hover_s);
    }
    for w in &t.waypoints {
        if let Some(yaw) = w.yaw_deg {
            f.turn_to(yaw.to_radians(), rate);
            f.hover(t.hover_s);
        }
        f.move_to(Vector2::new(w.x, w.y), t.speed, w.capture);
        f.hover(t.hover_s);
    }
    f
}

fn camera_pose(state: &FlightState, body_from_camera: &PoseSE3) -> PoseSE3 {
    let body = PoseSE3::from_rotation_translation(
        UnitQuaternion::from_axis_angle(&Vector3::z_axis(), state.yaw),
        state.position,
        Frame::Body,
        Frame::Map,
    );
    let cam = body.compose(body_from_camera).expect("frames chain");
    let q = normalize_quaternion(*cam.rotation().quaternion()).expect("unit quaternion");
    PoseSE3::from_rotation_translation(q, *cam.translation(), Frame::Camera, Frame::Map)
}

fn aabb_corners(a: &Aabb) -> [Vector3<f64>; 8] {
    let mut out = [Vector3::zeros(); 8];
    for (k, c) in out.iter_mut().enumerate() {
        *c = Vector3::new(
            if k & 1 == 0 { a.min.x } else { a.max.x },
            if k & 2 == 0 { a.min.y } else { a.max.y },
            if k & 4 == 0 { a.min.z } else { a.max.z },
        );
    }
    out
}

/// Pixel hull of the eight box corners, clipped to the image. `None` when
/// a corner is at or behind the near limit or the clipped box is too thin.
pub fn project_box(
    aabb: &Aabb,
    camera_pose: &PoseSE3,
    intr: &CameraIntrinsics,
) -> Option<[f64; 4]> {
    let cam_from_map = camera_pose.inverse();
    let (mut u0, mut v0, mut u1, mut v1) =
        (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for c in aabb_corners(aabb) {
        let p = cam_from_map.apply(&c);
        if p.z <= MIN_CORNER_DEPTH {
            return None;
        }
        let px = intr.project(&Point3::from_vector(p, Frame::Camera)).ok()?;
        u0 = u0.min(px.u);
        v0 = v0.min(px.v);
        u1 = u1.max(px.u);
        v1 = v1.max(px.v);
    }
    clip_box([u0, v0, u1, v1], intr)
}

fn clip_box(b: [f64; 4], intr: &CameraIntrinsics) -> Option<[f64; 4]> {
    let (w, h) = (f64::from(intr.width()), f64::from(intr.height()));
    let c = [b[0].clamp(0.0, w), b[1].clamp(0.0, h), b[2].clamp(0.0, w), b[3].clamp(0.0, h)];
    (c[2] - c[0] >= MIN_BOX_PX && c[3] - c[1] >= MIN_BOX_PX).then_some(c)
}

fn sample_cloud(spec: &SceneSpec, rng: &mut ChaCha8Rng) -> Vec<Vector3<f64>> {
    let mut pts = Vec::new();
    let face = |rng: &mut ChaCha8Rng, a: &Aabb, axis: usize, at: f64, n: usize, pts: &mut Vec<Vector3<f64>>| {
        for _ in 0..n {
            let mut p = Vector3::zeros();
            for i in 0..3 {
                p[i] = if i == axis { at } else { rng.random_range(a.min[i]..=a.max[i]) };
            }
            pts.push(p);
        }
    };
    for o in &spec.objects {
        let a = o.aabb();
        for axis in 0..3 {
            face(rng, &a, axis, a.min[axis], spec.density.points_per_object_face, &mut pts);
            face(rng, &a, axis, a.max[axis], spec.density.points_per_object_face, &mut pts);
        }
    }
    if let Some(room) = &spec.room {
        let a = room.aabb();
        for axis in 0..2 {
            face(rng, &a, axis, a.min[axis], spec.density.points_per_wall, &mut pts);
            face(rng, &a, axis, a.max[axis], spec.density.points_per_wall, &mut pts);
        }
    }
    pts
}

/// A 20 to 120 px box somewhere in the image that overlaps no true object
/// box; `None` if ten placements all collide.
fn clutter_box(rng: &mut ChaCha8Rng, truth: &[[f64; 4]], w: f64, h: f64) -> Option<[f64; 4]> {
    for _ in 0..10 {
        let bw = rng.random_range(20.0..=120.0);
        let bh = rng.random_range(20.0..=120.0);
        let x0 = rng.random_range(0.0..=w - bw);
        let y0 = rng.random_range(0.0..=h - bh);
        let b = [x0, y0, x0 + bw, y0 + bh];
        let clear = truth.iter().all(|t| b[2] <= t[0] || b[0] >= t[2] || b[3] <= t[1] || b[1] >= t[3]);
        if clear {
            return Some(b);
        }
    }
    None
}

/// Builds a complete session from a scene description.
pub fn generate_session(spec: &SceneSpec) -> Result<SyntheticSession, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let body_from_camera = PoseSE3::from_parts(
        spec.body_from_camera.rotation,
        spec.body_from_camera.translation,
        Frame::Camera,
        Frame::Body,
    )
    .map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
    let plan = plan_flight(spec);
    let s = spec.true_scale;

    let states: Vec<FlightState> = (0..=plan.end_tick()).map(|k| plan.state(k)).collect();
    let metric_poses: Vec<PoseSE3> = states.iter().map(|st| camera_pose(st, &body_from_camera)).collect();

    let odometry = states
        .iter()
        .enumerate()
        .map(|(k, st)| {
            let v = match spec.odometry_frame {
                OdometryFrame::World => st.velocity,
                OdometryFrame::Body => {
                    UnitQuaternion::from_axis_angle(&Vector3::z_axis(), st.yaw).inverse() * st.velocity
                }
            };
            OdometrySample { timestamp: tick_time(k as u64), velocity: v }
        })
        .collect();

    let trajectory = metric_poses
        .iter()
        .enumerate()
        .step_by(POSE_STRIDE as usize)
        .map(|(k, p)| TrajectoryEntry {
            timestamp: tick_time(k as u64),
            pose: p.with_translation(p.translation() / s),
        })
        .collect();

    let events = SlamEventLog::new(plan.events.iter().map(|&(k, e)| (tick_time(k), e)).collect())
        .map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
    let init_window = {
        let start = plan.events.iter().rev().find(|(_, e)| *e == SlamEvent::InitSearchStart).map(|(k, _)| tick_time(*k));
        let end = plan.events.iter().find(|(_, e)| *e == SlamEvent::InitSuccess).map(|(k, _)| tick_time(*k));
        (start.unwrap_or(0.0), end.unwrap_or(0.0))
    };

    let cloud = sample_cloud(spec, &mut rng)
        .into_iter()
        .enumerate()
        .map(|(i, p)| SparseMapPoint { id: i as u64, position: Point3::from_vector(p / s, Frame::Map) })
        .collect();

    // Evenly spaced frames among the capture ticks.
    let candidates = plan.capture_ticks();
    let n_frames = spec.frames.min(candidates.len());
    let frame_ticks: Vec<u64> = (0..n_frames).map(|i| candidates[i * candidates.len() / n_frames]).collect();

    let classes = spec.classes();
    let noise = Normal::new(0.0, spec.noise.pixel_sigma.max(0.0)).expect("finite sigma");
    let (w, h) = (f64::from(spec.camera.width()), f64::from(spec.camera.height()));
    let mut detections = Vec::new();
    let (mut true_dets, mut missed, mut fps) = (0, 0, 0);
    for (frame_id, &k) in frame_ticks.iter().enumerate() {
        let pose = &metric_poses[k as usize];
        let t = tick_time(k);
        let truth: Vec<[f64; 4]> =
            spec.objects.iter().filter_map(|o| project_box(&o.aabb(), pose, &spec.camera)).collect();
        for o in &spec.objects {
            let Some(b) = project_box(&o.aabb(), pose, &spec.camera) else { continue };
            if rng.random::<f64>() < spec.noise.miss_rate {
                missed += 1;
            } else {
                let mut nb = b;
                if spec.noise.pixel_sigma > 0.0 {
                    for c in &mut nb {
                        *c += noise.sample(&mut rng);
                    }
                }
                if let Some(nb) = clip_box(nb, &spec.camera) {
                    true_dets += 1;
                    detections.push(Detection2D {
                        frame_id: frame_id as u64,
                        timestamp: t,
                        class_id: o.class_id,
                        class_name: o.class_name.clone(),
                        x_min: nb[0],
                        y_min: nb[1],
                        x_max: nb[2],
                        y_max: nb[3],
                        confidence: rng.random_range(0.5..0.99),
                    });
                }
            }
            if rng.random::<f64>() < spec.noise.false_positive_rate {
                if let Some(fp) = clutter_box(&mut rng, &truth, w, h) {
                    let (class_id, class_name) = classes[rng.random_range(0..classes.len())].clone();
                    fps += 1;
                    detections.push(Detection2D {
                        frame_id: frame_id as u64,
                        timestamp: t,
                        class_id,
                        class_name,
                        x_min: fp[0],
                        y_min: fp[1],
                        x_max: fp[2],
                        y_max: fp[3],
                        confidence: rng.random_range(0.3..0.6),
                    });
                }
            }
        }
    }

    let mut obstacle_classes: Vec<u32> = DEFAULT_OBSTACLE_CLASSES.to_vec();
    obstacle_classes.extend(spec.objects.iter().map(|o| o.class_id));
    obstacle_classes.sort_unstable();
    obstacle_classes.dedup();

    Ok(SyntheticSession {
        spec: spec.clone(),
        calibration: Calibration {
            intrinsics: spec.camera,
            body_from_camera: spec.body_from_camera,
            obstacle_classes,
        },
        detections,
        trajectory,
        cloud,
        odometry,
        events,
        ground_truth: GroundTruth {
            true_scale: s,
            objects: spec.objects.clone(),
            init_window,
            frames: n_frames,
            true_detections: true_dets,
            missed_detections: missed,
            false_positives: fps,
            flight_duration: tick_time(plan.end_tick()),
        },
        metric_poses,
    })
}

/// File names inside a written session directory.
pub const SESSION_FILES: InputNames = InputNames {
    detections: "detections.csv",
    trajectory: "trajectory.txt",
    pointcloud: "pointcloud.ply",
    odometry: "odometry.csv",
    events: "slam_events.csv",
    calibration: "calibration.json",
};
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";
pub const CONFIG_FILE: &str = "config.json";

pub struct InputNames {
    pub detections: &'static str,
    pub trajectory: &'static str,
    pub pointcloud: &'static str,
    pub odometry: &'static str,
    pub events: &'static str,
    pub calibration: &'static str,
}

impl SyntheticSession {
    /// Pipeline configuration pointing at the files of a written session.
    pub fn pipeline_config(&self) -> PipelineConfig {
        let n = &SESSION_FILES;
        PipelineConfig {
            session_id: self.spec.session_id.clone(),
            drone_id: self.spec.drone_id.clone(),
            date: self.spec.date.clone(),
            inputs: InputPaths {
                detections: n.detections.into(),
                trajectory: n.trajectory.into(),
                pointcloud: n.pointcloud.into(),
                odometry: n.odometry.into(),
                events: n.events.into(),
                calibration: n.calibration.into(),
            },
            refine: RefineConfig::default(),
            render_resolution: crate::pipeline::DEFAULT_RESOLUTION,
            output_dir: None,
            odometry_frame: self.spec.odometry_frame,
            pose_tolerance: crate::pipeline::DEFAULT_POSE_TOLERANCE,
            front_depth_percentile: 0.0,
        }
    }

    /// Writes every input file, the ground truth and `config.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), SynthError> {
        fs::create_dir_all(dir).map_err(|source| SynthError::Io { path: dir.into(), source })?;
        let n = &SESSION_FILES;
        let io = |name: &str, f: &dyn Fn(BufWriter<fs::File>) -> std::io::Result<()>| {
            let path = dir.join(name);
            let file = fs::File::create(&path).map_err(|source| SynthError::Io { path: path.clone(), source })?;
            f(BufWriter::new(file)).map_err(|source| SynthError::Io { path, source })
        };
        io(n.detections, &|w| write_detections(w, &self.detections))?;
        io(n.trajectory, &|w| write_trajectory(w, &self.trajectory))?;
        io(n.pointcloud, &|w| write_pointcloud(w, &self.cloud))?;
        io(n.odometry, &|w| write_odometry(w, &self.odometry))?;
        io(n.events, &|w| write_slam_events(w, &self.events))?;
        let json = |v: serde_json::Result<String>| -> Result<String, SynthError> { Ok(v? + "\n") };
        let cal = json(serde_json::to_string_pretty(&self.calibration))?;
        let gt = json(serde_json::to_string_pretty(&self.ground_truth))?;
        let cfg = json(serde_json::to_string_pretty(&self.pipeline_config()))?;
        for (name, text) in [(n.calibration, cal), (GROUND_TRUTH_FILE, gt), (CONFIG_FILE, cfg)] {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|source| SynthError::Io { path, source })?;
        }
        Ok(())
    }
}
