//! Metric scale recovery for the monocular SLAM map.
//!
//! The drone's odometry velocity is integrated between the moment SLAM
//! starts searching for an initial map and the moment initialisation
//! succeeds; the ratio to the SLAM-frame displacement over the same window
//! is the metric scale. Failed attempts reset the window start.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Frame, Point3, PoseSE3};
use crate::ingest::{OdometrySample, SlamEvent, SlamEventLog, SparseMapPoint, TrajectoryEntry};

/// Odometry or pose samples further than this from a query time do not
/// cover it.
pub const COVERAGE_TOLERANCE_S: f64 = 0.2;
pub const MIN_SLAM_BASELINE: f64 = 1e-6;
pub const MIN_ODOM_BASELINE_M: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScaleError {
    #[error("no sample within {COVERAGE_TOLERANCE_S} s of t = {0}")]
    CoverageGap(f64),
    #[error("invalid integration window [{0}, {1}]")]
    InvalidWindow(f64, f64),
    #[error("event log has no InitSuccess")]
    NoInitSuccess,
    #[error("degenerate baseline (odometry {odom} m, slam {slam} units): scale unobservable")]
    DegenerateBaseline { odom: f64, slam: f64 },
    #[error("invalid scale factor {0}")]
    InvalidFactor(f64),
    #[error("body-frame odometry needs trajectory poses")]
    NoPoses,
}

/// Frame the odometry velocities are reported in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OdometryFrame {
    #[default]
    Body,
    World,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleEstimate {
    pub factor: f64,
    pub odom_displacement: f64,
    pub slam_displacement: f64,
    pub window: (f64, f64),
}

/// How to bring odometry velocities into the map frame.
#[derive(Debug, Clone, Copy)]
pub struct VelocityFrame<'a> {
    pub frame: OdometryFrame,
    /// Camera-to-body calibration; used to recover body attitude from
    /// camera poses.
    pub body_from_camera: &'a PoseSE3,
}

impl<'a> VelocityFrame<'a> {
    pub fn world(body_from_camera: &'a PoseSE3) -> Self {
        Self {
            frame: OdometryFrame::World,
            body_from_camera,
        }
    }

    pub fn body(body_from_camera: &'a PoseSE3) -> Self {
        Self {
            frame: OdometryFrame::Body,
            body_from_camera,
        }
    }
}

/// Index of the trajectory entry closest in time to `t`.
pub fn nearest_pose_index(poses: &[TrajectoryEntry], t: f64) -> Option<usize> {
    if poses.is_empty() {
        return None;
    }
    let idx = poses.partition_point(|p| p.timestamp < t);
    if idx == 0 {
        return Some(0);
    }
    if idx == poses.len() {
        return Some(idx - 1);
    }
    // Ties go to the earlier pose.
    if t - poses[idx - 1].timestamp <= poses[idx].timestamp - t {
        Some(idx - 1)
    } else {
        Some(idx)
    }
}

fn world_velocities(
    samples: &[OdometrySample],
    poses: &[TrajectoryEntry],
    vf: VelocityFrame<'_>,
) -> Result<Vec<(f64, Vector3<f64>)>, ScaleError> {
    match vf.frame {
        OdometryFrame::World => Ok(samples.iter().map(|s| (s.timestamp, s.velocity)).collect()),
        OdometryFrame::Body => {
            if poses.is_empty() {
                return Err(ScaleError::NoPoses);
            }
            let camera_from_body = vf.body_from_camera.inverse();
            Ok(samples
                .iter()
                .map(|s| {
                    let i = nearest_pose_index(poses, s.timestamp).unwrap_or(0);
                    // R_map_body = R_map_cam * R_cam_body
                    let rot = poses[i].pose.rotation() * camera_from_body.rotation();
                    (s.timestamp, rot * s.velocity)
                })
                .collect())
        }
    }
}

fn velocity_at(series: &[(f64, Vector3<f64>)], t: f64) -> Result<Vector3<f64>, ScaleError> {
    let idx = series.partition_point(|(ts, _)| *ts < t);
    if idx < series.len() && series[idx].0 == t {
        return Ok(series[idx].1);
    }
    let before = idx.checked_sub(1).map(|i| series[i]);
    let after = series.get(idx).copied();
    let near = |s: Option<(f64, Vector3<f64>)>| s.filter(|(ts, _)| (ts - t).abs() <= COVERAGE_TOLERANCE_S);
    match (near(before), near(after)) {
        (Some((ta, va)), Some((tb, vb))) => {
            let w = (t - ta) / (tb - ta);
            Ok(va + (vb - va) * w)
        }
        (Some((_, v)), None) | (None, Some((_, v))) => Ok(v),
        (None, None) => Err(ScaleError::CoverageGap(t)),
    }
}

/// Trapezoidal integral of the map-frame velocity over `[t0, t1]`, with
/// boundary values linearly interpolated.
pub fn integrate_velocity(
    samples: &[OdometrySample],
    poses: &[TrajectoryEntry],
    vf: VelocityFrame<'_>,
    t0: f64,
    t1: f64,
) -> Result<Vector3<f64>, ScaleError> {
    if !(t0 < t1) || !t0.is_finite() || !t1.is_finite() {
        return Err(ScaleError::InvalidWindow(t0, t1));
    }
    let series = world_velocities(samples, poses, vf)?;
    let v0 = velocity_at(&series, t0)?;
    let v1 = velocity_at(&series, t1)?;

    let mut sum = Vector3::zeros();
    let (mut prev_t, mut prev_v) = (t0, v0);
    for &(t, v) in series.iter().filter(|(t, _)| *t > t0 && *t < t1) {
        sum += (prev_v + v) * (0.5 * (t - prev_t));
        (prev_t, prev_v) = (t, v);
    }
    sum += (prev_v + v1) * (0.5 * (t1 - prev_t));
    Ok(sum)
}

/// Norm of the integrated displacement over `[t0, t1]`, in metres.
pub fn integrate_displacement(
    samples: &[OdometrySample],
    poses: &[TrajectoryEntry],
    vf: VelocityFrame<'_>,
    t0: f64,
    t1: f64,
) -> Result<f64, ScaleError> {
    integrate_velocity(samples, poses, vf, t0, t1).map(|d| d.norm())
}

/// Window `[last InitSearchStart before the first InitSuccess, first InitSuccess]`.
pub fn init_window(events: &SlamEventLog) -> Result<(f64, f64), ScaleError> {
    let ev = events.events();
    let success = ev
        .iter()
        .position(|(_, e)| *e == SlamEvent::InitSuccess)
        .ok_or(ScaleError::NoInitSuccess)?;
    let start = ev[..success]
        .iter()
        .rev()
        .find(|(_, e)| *e == SlamEvent::InitSearchStart)
        .map(|(t, _)| *t)
        // SlamEventLog guarantees a search start precedes every success.
        .ok_or(ScaleError::NoInitSuccess)?;
    Ok((start, ev[success].0))
}

pub fn estimate_scale(
    events: &SlamEventLog,
    samples: &[OdometrySample],
    poses: &[TrajectoryEntry],
    vf: VelocityFrame<'_>,
) -> Result<ScaleEstimate, ScaleError> {
    let (t0, t1) = init_window(events)?;
    let odom = integrate_displacement(samples, poses, vf, t0, t1)?;
    let pose_at = |t: f64| -> Result<&TrajectoryEntry, ScaleError> {
        let i = nearest_pose_index(poses, t).ok_or(ScaleError::NoPoses)?;
        if (poses[i].timestamp - t).abs() > COVERAGE_TOLERANCE_S {
            return Err(ScaleError::CoverageGap(t));
        }
        Ok(&poses[i])
    };
    let slam = (pose_at(t1)?.pose.translation() - pose_at(t0)?.pose.translation()).norm();
    if slam < MIN_SLAM_BASELINE || odom < MIN_ODOM_BASELINE_M {
        return Err(ScaleError::DegenerateBaseline { odom, slam });
    }
    Ok(ScaleEstimate {
        factor: odom / slam,
        odom_displacement: odom,
        slam_displacement: slam,
        window: (t0, t1),
    })
}

/// Multiplies point coordinates and pose translations by `factor`.
pub fn apply_scale(
    factor: f64,
    points: &[SparseMapPoint],
    poses: &[TrajectoryEntry],
) -> Result<(Vec<SparseMapPoint>, Vec<TrajectoryEntry>), ScaleError> {
    if !(factor.is_finite() && factor > 0.0) {
        return Err(ScaleError::InvalidFactor(factor));
    }
    let points = points
        .iter()
        .map(|p| SparseMapPoint {
            id: p.id,
            position: Point3::from_vector(p.position.coords() * factor, Frame::Map),
        })
        .collect();
    let poses = poses
        .iter()
        .map(|e| TrajectoryEntry {
            timestamp: e.timestamp,
            pose: e.pose.with_translation(e.pose.translation() * factor),
        })
        .collect();
    Ok((points, poses))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn ident() -> PoseSE3 {
        PoseSE3::identity(Frame::Body).retagged(Frame::Camera, Frame::Body)
    }

    fn samples(dt: f64, t_end: f64, v: impl Fn(f64) -> Vector3<f64>) -> Vec<OdometrySample> {
        let n = (t_end / dt).round() as usize;
        (0..=n)
            .map(|i| {
                let t = i as f64 * dt;
                OdometrySample {
                    timestamp: t,
                    velocity: v(t),
                }
            })
            .collect()
    }

    fn pose_at(t: f64, x: f64) -> TrajectoryEntry {
        TrajectoryEntry {
            timestamp: t,
            pose: PoseSE3::from_parts([0.0, 0.0, 0.0, 1.0], [x, 0.0, 0.0], Frame::Camera, Frame::Map)
                .unwrap(),
        }
    }

    #[test]
    fn constant_velocity() {
        let s = samples(0.1, 3.0, |_| Vector3::new(1.0, 0.0, 0.0));
        let e = ident();
        let d = integrate_displacement(&s, &[pose_at(0.0, 0.0)], VelocityFrame::body(&e), 0.5, 2.5)
            .unwrap();
        assert!((d - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_velocity() {
        let s = samples(0.1, 3.0, |_| Vector3::zeros());
        let e = ident();
        assert_eq!(integrate_displacement(&s, &[], VelocityFrame::world(&e), 0.0, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn sinusoid_against_fine_grid_oracle() {
        let e = ident();
        let s = samples(0.01, 4.0, |t| Vector3::new(t.sin(), 0.0, 0.0));
        let d = integrate_displacement(&s, &[], VelocityFrame::world(&e), 0.0, PI).unwrap();
        // Independent oracle: midpoint rule on a 1e6-cell grid.
        let n = 1_000_000;
        let h = PI / n as f64;
        let oracle: f64 = (0..n).map(|i| ((i as f64 + 0.5) * h).sin() * h).sum();
        assert!((oracle - 2.0).abs() < 1e-9);
        assert!((d - 2.0).abs() < 1e-3, "{d}");
    }

    #[test]
    fn boundary_interpolation_and_gaps() {
        let e = ident();
        // v(t) = t, so the exact integral over [0.05, 0.95] is 0.45.
        let s = samples(0.1, 1.0, |t| Vector3::new(t, 0.0, 0.0));
        let d = integrate_displacement(&s, &[], VelocityFrame::world(&e), 0.05, 0.95).unwrap();
        assert!((d - 0.45).abs() < 1e-12);
        assert_eq!(
            integrate_displacement(&s, &[], VelocityFrame::world(&e), 0.0, 1.5),
            Err(ScaleError::CoverageGap(1.5))
        );
        assert!(matches!(
            integrate_displacement(&s, &[], VelocityFrame::world(&e), 1.0, 0.5),
            Err(ScaleError::InvalidWindow(..))
        ));
    }

    #[test]
    fn body_velocity_rotated_by_attitude() {
        // Camera yawed 90 degrees in the map; body == camera here.
        let half = PI / 4.0;
        let pose = TrajectoryEntry {
            timestamp: 0.0,
            pose: PoseSE3::from_parts([0.0, 0.0, half.sin(), half.cos()], [0.0; 3], Frame::Camera, Frame::Map)
                .unwrap(),
        };
        let e = ident();
        let s = samples(0.1, 1.0, |_| Vector3::new(1.0, 0.0, 0.0));
        let v = integrate_velocity(&s, &[pose], VelocityFrame::body(&e), 0.0, 1.0).unwrap();
        assert!((v - Vector3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
        assert_eq!(
            integrate_velocity(&s, &[], VelocityFrame::body(&e), 0.0, 1.0),
            Err(ScaleError::NoPoses)
        );
    }

    fn log(ev: &[(f64, SlamEvent)]) -> SlamEventLog {
        SlamEventLog::new(ev.to_vec()).unwrap()
    }

    #[test]
    fn ratio_definition() {
        // Drone moves 1 m (0.5 m/s for 2 s) while SLAM sees 0.5 units.
        let e = ident();
        let s = samples(0.1, 3.0, |t| {
            if (0.0..=2.0).contains(&t) { Vector3::new(0.5, 0.0, 0.0) } else { Vector3::zeros() }
        });
        let poses = [pose_at(0.0, 0.0), pose_at(2.0, 0.5)];
        let events = log(&[(0.0, SlamEvent::InitSearchStart), (2.0, SlamEvent::InitSuccess)]);
        let est = estimate_scale(&events, &s, &poses, VelocityFrame::world(&e)).unwrap();
        assert!((est.factor - 2.0).abs() < 1e-9);
        assert_eq!(est.window, (0.0, 2.0));
    }

    #[test]
    fn failed_init_resets_window() {
        // 0..1 s: moves 3 m; 1..2 s: hover; 2..3 s: moves 1 m.
        let e = ident();
        let s = samples(0.01, 4.0, |t| {
            if t <= 1.0 {
                Vector3::new(3.0, 0.0, 0.0)
            } else if (2.0..=3.0).contains(&t) {
                Vector3::new(1.0, 0.0, 0.0)
            } else {
                Vector3::zeros()
            }
        });
        let poses = [pose_at(0.0, 0.0), pose_at(1.5, 0.3), pose_at(3.0, 0.4)];
        let events = log(&[
            (0.0, SlamEvent::InitSearchStart),
            (1.5, SlamEvent::InitFailure),
            (1.5, SlamEvent::InitSearchStart),
            (3.0, SlamEvent::InitSuccess),
        ]);
        let est = estimate_scale(&events, &s, &poses, VelocityFrame::world(&e)).unwrap();
        assert_eq!(est.window, (1.5, 3.0));
        assert!((est.slam_displacement - 0.1).abs() < 1e-12);
        // Step discontinuities cost up to one sample interval of error.
        assert!((est.odom_displacement - 1.0).abs() < 0.02, "{}", est.odom_displacement);
    }

    #[test]
    fn stationary_is_degenerate_and_no_success_errors() {
        let e = ident();
        let s = samples(0.1, 3.0, |_| Vector3::zeros());
        let poses = [pose_at(0.0, 0.0), pose_at(2.0, 0.0)];
        let events = log(&[(0.0, SlamEvent::InitSearchStart), (2.0, SlamEvent::InitSuccess)]);
        assert!(matches!(
            estimate_scale(&events, &s, &poses, VelocityFrame::world(&e)),
            Err(ScaleError::DegenerateBaseline { .. })
        ));
        let events = log(&[(0.0, SlamEvent::InitSearchStart), (2.0, SlamEvent::InitFailure)]);
        assert_eq!(
            estimate_scale(&events, &s, &poses, VelocityFrame::world(&e)),
            Err(ScaleError::NoInitSuccess)
        );
    }

    #[test]
    fn apply_scale_examples() {
        let pts = vec![SparseMapPoint {
            id: 0,
            position: Point3::new(1.0, 2.0, 3.0, Frame::Map),
        }];
        let poses = vec![pose_at(0.0, 1.5)];
        let (p1, t1) = apply_scale(1.0, &pts, &poses).unwrap();
        assert_eq!(p1, pts);
        assert_eq!(t1, poses);
        let (p2, t2) = apply_scale(2.0, &pts, &poses).unwrap();
        assert_eq!(p2[0].position, Point3::new(2.0, 4.0, 6.0, Frame::Map));
        assert_eq!(t2[0].pose.translation().x, 3.0);
        assert_eq!(t2[0].pose.rotation(), poses[0].pose.rotation());
        assert!(apply_scale(0.0, &pts, &poses).is_err());
        assert!(apply_scale(f64::NAN, &pts, &poses).is_err());
    }

    #[test]
    fn pairwise_distances_scale_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<SparseMapPoint> = (0..50)
            .map(|id| SparseMapPoint {
                id,
                position: Point3::new(rng.random(), rng.random(), rng.random(), Frame::Map),
            })
            .collect();
        let factor = 3.7;
        let (scaled, _) = apply_scale(factor, &pts, &[]).unwrap();
        for i in 0..pts.len() {
            for j in 0..i {
                let d0 = (pts[i].position.coords() - pts[j].position.coords()).norm();
                let d1 = (scaled[i].position.coords() - scaled[j].position.coords()).norm();
                assert!((d1 - factor * d0).abs() <= 1e-12 * d1.max(1.0));
            }
        }
    }
}
