use std::io;

use serde::ser::Serialize;
use serde::Deserialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use super::{AccessibilityMap, MapgenError, SessionInfo};
use crate::refine::RefineReport;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// The report document. Field order here is the key order on disk.
#[derive(Debug, Clone, PartialEq, serde::Serialize, Deserialize)]
pub struct MapSummary {
    pub schema_version: u32,
    pub session: SessionInfo,
    pub scale: ScaleSummary,
    pub stage_counts: [usize; 4],
    pub removals: RemovalCounts,
    pub volumes: Vec<VolumeSummary>,
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, Deserialize)]
pub struct ScaleSummary {
    pub factor: f64,
    pub odom_displacement_m: f64,
    pub slam_displacement: f64,
    pub window_start: f64,
    pub window_end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, Deserialize)]
pub struct RemovalCounts {
    pub below_min_volume: usize,
    pub above_max_volume: usize,
    pub merged: usize,
    pub low_appearances: usize,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, Deserialize)]
pub struct VolumeSummary {
    pub class_id: u32,
    pub class_name: String,
    pub aabb_min: [f64; 3],
    pub aabb_max: [f64; 3],
    pub appearances: u32,
    pub source_frame_count: usize,
    pub member_point_count: usize,
}

impl MapSummary {
    pub fn from_map(map: &AccessibilityMap) -> Self {
        let r: &RefineReport = &map.report;
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            session: map.session.clone(),
            scale: ScaleSummary {
                factor: map.scale.factor,
                odom_displacement_m: map.scale.odom_displacement,
                slam_displacement: map.scale.slam_displacement,
                window_start: map.scale.window.0,
                window_end: map.scale.window.1,
            },
            stage_counts: r.stage_counts,
            removals: RemovalCounts {
                below_min_volume: r.removed_below_min_volume,
                above_max_volume: r.removed_above_max_volume,
                merged: r.merged,
                low_appearances: r.removed_low_appearances,
            },
            volumes: map
                .volumes
                .iter()
                .map(|v| VolumeSummary {
                    class_id: v.class_id,
                    class_name: v.class_name.clone(),
                    aabb_min: v.aabb.min.into(),
                    aabb_max: v.aabb.max.into(),
                    appearances: v.appearances,
                    source_frame_count: v.source_frames.len(),
                    member_point_count: v.member_points.len(),
                })
                .collect(),
            config: map.config.clone(),
        }
    }

    /// Equality with every float compared to within `tol`.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= tol;
        let close3 = |a: &[f64; 3], b: &[f64; 3]| a.iter().zip(b).all(|(x, y)| close(*x, *y));
        let (s, o) = (&self.scale, &other.scale);
        self.schema_version == other.schema_version
            && self.session == other.session
            && close(s.factor, o.factor)
            && close(s.odom_displacement_m, o.odom_displacement_m)
            && close(s.slam_displacement, o.slam_displacement)
            && close(s.window_start, o.window_start)
            && close(s.window_end, o.window_end)
            && self.stage_counts == other.stage_counts
            && self.removals == other.removals
            && self.volumes.len() == other.volumes.len()
            && self.volumes.iter().zip(&other.volumes).all(|(a, b)| {
                a.class_id == b.class_id
                    && a.class_name == b.class_name
                    && a.appearances == b.appearances
                    && a.source_frame_count == b.source_frame_count
                    && a.member_point_count == b.member_point_count
                    && close3(&a.aabb_min, &b.aabb_min)
                    && close3(&a.aabb_max, &b.aabb_max)
            })
            && json_approx_eq(&self.config, &other.config, tol)
    }

    /// Pretty JSON, two-space indent, every float with six decimals.
    pub fn to_json(&self) -> Result<String, MapgenError> {
        let mut buf = Vec::new();
        let mut ser = serde_json::Serializer::with_formatter(&mut buf, SixDecimals::default());
        self.serialize(&mut ser)?;
        buf.push(b'\n');
        Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
    }
}

fn json_approx_eq(a: &serde_json::Value, b: &serde_json::Value, tol: f64) -> bool {
    use serde_json::Value;
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => match (x.as_f64(), y.as_f64()) {
            (Some(x), Some(y)) => (x - y).abs() <= tol,
            _ => x == y,
        },
        (Value::Array(x), Value::Array(y)) => {
            x.len() == y.len() && x.iter().zip(y).all(|(x, y)| json_approx_eq(x, y, tol))
        }
        (Value::Object(x), Value::Object(y)) => {
            x.len() == y.len()
                && x.iter().all(|(k, v)| y.get(k).is_some_and(|w| json_approx_eq(v, w, tol)))
        }
        _ => a == b,
    }
}

#[derive(Default)]
struct SixDecimals<'a>(PrettyFormatter<'a>);

macro_rules! forward {
    ($($name:ident($($arg:ident: $ty:ty),*);)*) => {
        $(
            fn $name<W: ?Sized + io::Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
                self.0.$name(w $(, $arg)*)
            }
        )*
    };
}

impl Formatter for SixDecimals<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        // Avoid "-0.000000" so sign noise around zero never changes the bytes.
        let v = if value.abs() < 5e-7 { 0.0 } else { value };
        write!(w, "{v:.6}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }

    forward! {
        begin_array();
        end_array();
        begin_array_value(first: bool);
        end_array_value();
        begin_object();
        end_object();
        begin_object_key(first: bool);
        begin_object_value();
        end_object_value();
    }
}

pub fn emit_report(map: &AccessibilityMap) -> Result<String, MapgenError> {
    MapSummary::from_map(map).to_json()
}

pub fn parse_report(text: &str) -> Result<MapSummary, MapgenError> {
    Ok(serde_json::from_str(text)?)
}
