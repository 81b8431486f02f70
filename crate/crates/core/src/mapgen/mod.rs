//! Accessibility-map products: JSON report, top-down render, annotated PLY.

mod cloud;
mod render;
mod report;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{SparseMapPoint, TrajectoryEntry};
use crate::refine::RefineReport;
use crate::scale::ScaleEstimate;
use crate::volumes::BoundingVolume3D;

pub use cloud::{emit_annotated_cloud, write_annotated_cloud, BOX_EDGES};
pub use render::{render_topdown, PixelRect, TopDownRender, MAX_RASTER_SIDE};
pub use report::{
    emit_report, parse_report, MapSummary, RemovalCounts, ScaleSummary, VolumeSummary,
    REPORT_SCHEMA_VERSION,
};

#[derive(Debug, Error)]
pub enum MapgenError {
    #[error("nothing to render: no volumes, points, or trajectory")]
    EmptyMap,
    #[error("resolution must be positive and finite, got {0}")]
    InvalidResolution(f64),
    #[error("raster would be {width}x{height} pixels; raise the resolution")]
    RasterTooLarge { width: u64, height: u64 },
    #[error("report: {0}")]
    Report(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub drone_id: String,
    pub date: String,
}

/// The refined, metric result of one flight.
#[derive(Debug, Clone, PartialEq)]
pub struct AccessibilityMap {
    pub session: SessionInfo,
    pub volumes: Vec<BoundingVolume3D>,
    /// Scaled sparse cloud, map frame.
    pub cloud: Vec<SparseMapPoint>,
    /// Scaled camera trajectory.
    pub trajectory: Vec<TrajectoryEntry>,
    pub report: RefineReport,
    pub scale: ScaleEstimate,
    /// Configuration the map was produced with, embedded verbatim in the report.
    pub config: serde_json::Value,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Frame, Point3};
    use crate::ingest::parse_pointcloud_from;
    use crate::volumes::Aabb;
    use nalgebra::Vector3;

    fn sample_map(n_volumes: usize) -> AccessibilityMap {
        let volumes = (0..n_volumes)
            .map(|i| {
                let o = i as f64 * 2.0;
                let aabb = Aabb::new(Vector3::new(o, -0.25, 0.0), Vector3::new(o + 0.6, 0.3333333333, 0.7));
                let mut corners = [Vector3::zeros(); 8];
                for (k, c) in corners.iter_mut().enumerate() {
                    *c = Vector3::new(
                        if k & 1 == 0 { aabb.min.x } else { aabb.max.x },
                        if k & 2 == 0 { aabb.min.y } else { aabb.max.y },
                        if k & 4 == 0 { aabb.min.z } else { aabb.max.z },
                    );
                }
                BoundingVolume3D {
                    class_id: 56 + i as u32,
                    class_name: format!("class {i}"),
                    corners,
                    aabb,
                    appearances: 3 + i as u32,
                    source_frames: vec![1, 4, 9],
                    member_points: vec![0, 2],
                    front_depth: 1.5,
                    depth_estimate: 0.4,
                }
            })
            .collect();
        AccessibilityMap {
            session: SessionInfo { session_id: "s1".into(), drone_id: "tello".into(), date: "2024-03-01".into() },
            volumes,
            cloud: vec![
                SparseMapPoint { id: 0, position: Point3::new(0.1, 0.2, 0.3, Frame::Map) },
                SparseMapPoint { id: 1, position: Point3::new(-1.0 / 3.0, 2.0e-7, 1e3, Frame::Map) },
            ],
            trajectory: vec![],
            report: RefineReport {
                stage_counts: [10, 8, n_volumes, n_volumes],
                removed_below_min_volume: 2,
                removed_above_max_volume: 0,
                merged: 8 - n_volumes,
                removed_low_appearances: 0,
            },
            scale: ScaleEstimate {
                factor: 2.123456789,
                odom_displacement: 1.0 / 7.0,
                slam_displacement: 0.0672897,
                window: (3.0, 7.25),
            },
            config: serde_json::json!({"refine": {"vol_min": 0.01, "app_min": 3}, "resolution": 0.05}),
        }
    }

    #[test]
    fn empty_report() {
        let mut m = sample_map(0);
        m.report = RefineReport::default();
        let text = emit_report(&m).unwrap();
        let parsed = parse_report(&text).unwrap();
        assert_eq!(parsed.stage_counts, [0, 0, 0, 0]);
        assert!(parsed.volumes.is_empty());
    }

    #[test]
    fn report_round_trip_and_layout() {
        let m = sample_map(2);
        let text = emit_report(&m).unwrap();
        let parsed = parse_report(&text).unwrap();
        assert!(parsed.approx_eq(&MapSummary::from_map(&m), 5e-7));
        assert_eq!(parsed.stage_counts, m.report.stage_counts);
        assert_eq!(parsed.to_json().unwrap(), text);
        assert!(text.contains("\"factor\": 2.123457"));
        assert!(text.contains("\"vol_min\": 0.010000"));
        let keys = ["schema_version", "session", "scale", "stage_counts", "removals", "volumes", "config"];
        let pos: Vec<usize> = keys.iter().map(|k| text.find(&format!("\"{k}\"")).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn annotated_cloud_reparses() {
        let empty = AccessibilityMap { cloud: vec![], ..sample_map(0) };
        let text = emit_annotated_cloud(&empty);
        assert!(parse_pointcloud_from(text.as_bytes()).unwrap().is_empty());

        let m = sample_map(1);
        let text = emit_annotated_cloud(&m);
        let pts = parse_pointcloud_from(text.as_bytes()).unwrap();
        assert_eq!(pts.len(), m.cloud.len() + 8);
        for (a, b) in pts.iter().zip(&m.cloud) {
            assert!((a.position.coords() - b.position.coords()).norm() < 1e-6);
        }
        for (p, c) in pts[m.cloud.len()..].iter().zip(&m.volumes[0].corners) {
            assert_eq!(p.position.coords(), *c);
        }
        assert_eq!(text.lines().filter(|l| l.split_whitespace().count() == 2).count(), 12);
    }
}
