//! C interface to the accessmap pipeline.
//!
//! Every function returns an [`AmStatus`]. On failure a message describing
//! the error is available from [`am_last_error`] on the same thread until
//! the next failing call. Handles are opaque and must be released with the
//! matching `*_free` function. Panics never cross the boundary; they are
//! reported as [`AmStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use accessmap::geometry::{CameraIntrinsics, Frame, PixelPoint, Point3};
use accessmap::mapgen::emit_report;
use accessmap::mapgen::AccessibilityMap;
use accessmap::pipeline::{build_map, load_inputs, run_pipeline, PipelineConfig, PipelineError, VolumeFile};
use accessmap::refine::{refine, RefineConfig};
use accessmap::volumes::BoundingVolume3D;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Config or input files are missing or malformed.
    Input = 3,
    /// A later pipeline stage failed (scale, lift, refine, mapgen).
    Pipeline = 4,
    /// Writing outputs failed.
    Output = 5,
    OutOfRange = 6,
    Panic = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: AmStatus, msg: impl Into<String>) -> AmStatus {
    set_error(msg);
    status
}

fn pipeline_status(e: &PipelineError) -> AmStatus {
    match e {
        PipelineError::Config { .. } | PipelineError::Ingest(_) => AmStatus::Input,
        PipelineError::Output { .. } => AmStatus::Output,
        _ => AmStatus::Pipeline,
    }
}

fn guard(f: impl FnOnce() -> AmStatus) -> AmStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(AmStatus::Panic, "internal panic"))
}

unsafe fn path_arg<'a>(p: *const c_char, what: &str) -> Result<&'a Path, AmStatus> {
    if p.is_null() {
        return Err(fail(AmStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(Path::new)
        .map_err(|_| fail(AmStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

/// Message for the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn am_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmPixel {
    pub u: f64,
    pub v: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

fn intrinsics(i: &AmIntrinsics) -> Result<CameraIntrinsics, AmStatus> {
    CameraIntrinsics::new(i.fx, i.fy, i.cx, i.cy, i.width, i.height)
        .map_err(|e| fail(AmStatus::InvalidArgument, e.to_string()))
}

/// Projects a camera-frame point to pixel coordinates.
///
/// # Safety
/// All pointers must be valid for the duration of the call.
#[no_mangle]
pub unsafe extern "C" fn am_project(intr: *const AmIntrinsics, p: *const AmPoint, out: *mut AmPixel) -> AmStatus {
    guard(|| {
        let (Some(intr), Some(p), false) = (intr.as_ref(), p.as_ref(), out.is_null()) else {
            return fail(AmStatus::NullPointer, "null argument");
        };
        let cam = match intrinsics(intr) {
            Ok(c) => c,
            Err(s) => return s,
        };
        match cam.project(&Point3::new(p.x, p.y, p.z, Frame::Camera)) {
            Ok(px) => {
                *out = AmPixel { u: px.u, v: px.v };
                AmStatus::Ok
            }
            Err(e) => fail(AmStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Back-projects a pixel at depth `z` to a camera-frame point.
///
/// # Safety
/// All pointers must be valid for the duration of the call.
#[no_mangle]
pub unsafe extern "C" fn am_back_project(
    intr: *const AmIntrinsics,
    px: AmPixel,
    z: f64,
    out: *mut AmPoint,
) -> AmStatus {
    guard(|| {
        let (Some(intr), false) = (intr.as_ref(), out.is_null()) else {
            return fail(AmStatus::NullPointer, "null argument");
        };
        let cam = match intrinsics(intr) {
            Ok(c) => c,
            Err(s) => return s,
        };
        match cam.back_project(PixelPoint::new(px.u, px.v), z) {
            Ok(p) => {
                *out = AmPoint { x: p.x, y: p.y, z: p.z };
                AmStatus::Ok
            }
            Err(e) => fail(AmStatus::InvalidArgument, e.to_string()),
        }
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmRefineConfig {
    pub vol_min: f64,
    pub vol_max: f64,
    pub containment_margin: f64,
    pub volume_ratio_max: f64,
    pub app_min: u32,
}

impl From<AmRefineConfig> for RefineConfig {
    fn from(c: AmRefineConfig) -> Self {
        RefineConfig {
            vol_min: c.vol_min,
            vol_max: c.vol_max,
            containment_margin: c.containment_margin,
            volume_ratio_max: c.volume_ratio_max,
            app_min: c.app_min,
        }
    }
}

#[no_mangle]
pub extern "C" fn am_refine_config_default() -> AmRefineConfig {
    let c = RefineConfig::default();
    AmRefineConfig {
        vol_min: c.vol_min,
        vol_max: c.vol_max,
        containment_margin: c.containment_margin,
        volume_ratio_max: c.volume_ratio_max,
        app_min: c.app_min,
    }
}

/// Summary of one volume. Map frame, metres.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmVolume {
    pub class_id: u32,
    pub appearances: u32,
    pub aabb_min: [f64; 3],
    pub aabb_max: [f64; 3],
    pub source_frame_count: usize,
    pub member_point_count: usize,
}

impl From<&BoundingVolume3D> for AmVolume {
    fn from(v: &BoundingVolume3D) -> Self {
        AmVolume {
            class_id: v.class_id,
            appearances: v.appearances,
            aabb_min: v.aabb.min.into(),
            aabb_max: v.aabb.max.into(),
            source_frame_count: v.source_frames.len(),
            member_point_count: v.member_points.len(),
        }
    }
}

/// Per-stage counts of a refine call: input, after the volume filter,
/// after merging, after the appearance filter.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AmStageCounts {
    pub counts: [usize; 4],
}

/// Opaque list of volumes.
pub struct AmVolumeSet {
    volumes: Vec<BoundingVolume3D>,
}

/// Opaque pipeline result.
pub struct AmMap {
    map: AccessibilityMap,
}

fn boxed<T>(value: T, out: *mut *mut T) -> AmStatus {
    // SAFETY: callers check `out` for null first.
    unsafe { *out = Box::into_raw(Box::new(value)) };
    AmStatus::Ok
}

/// Loads a volumes file as written by the `lift` or `refine` subcommands.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn am_volumes_load(path: *const c_char, out: *mut *mut AmVolumeSet) -> AmStatus {
    guard(|| {
        if out.is_null() {
            return fail(AmStatus::NullPointer, "out is null");
        }
        let path = match path_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match VolumeFile::load(path) {
            Ok(f) => boxed(AmVolumeSet { volumes: f.volumes }, out),
            Err(e) => fail(pipeline_status(&e), e.to_string()),
        }
    })
}

/// Number of volumes in the set; 0 for null.
///
/// # Safety
/// `set` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn am_volumes_len(set: *const AmVolumeSet) -> usize {
    set.as_ref().map_or(0, |s| s.volumes.len())
}

/// # Safety
/// `set` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn am_volumes_get(set: *const AmVolumeSet, index: usize, out: *mut AmVolume) -> AmStatus {
    guard(|| {
        let (Some(set), false) = (set.as_ref(), out.is_null()) else {
            return fail(AmStatus::NullPointer, "null argument");
        };
        match set.volumes.get(index) {
            Some(v) => {
                *out = v.into();
                AmStatus::Ok
            }
            None => fail(AmStatus::OutOfRange, format!("index {index} out of range ({} volumes)", set.volumes.len())),
        }
    })
}

/// Runs the three refinement stages on a copy of `set`. `counts` may be null.
///
/// # Safety
/// `set` and `config` must be valid; `out` writable; `counts` null or writable.
#[no_mangle]
pub unsafe extern "C" fn am_volumes_refine(
    set: *const AmVolumeSet,
    config: *const AmRefineConfig,
    out: *mut *mut AmVolumeSet,
    counts: *mut AmStageCounts,
) -> AmStatus {
    guard(|| {
        let (Some(set), Some(config), false) = (set.as_ref(), config.as_ref(), out.is_null()) else {
            return fail(AmStatus::NullPointer, "null argument");
        };
        let cfg = RefineConfig::from(*config);
        if let Err(e) = cfg.validate() {
            return fail(AmStatus::InvalidArgument, e.to_string());
        }
        let (volumes, report) = refine(set.volumes.clone(), &cfg);
        if !counts.is_null() {
            *counts = AmStageCounts { counts: report.stage_counts };
        }
        boxed(AmVolumeSet { volumes }, out)
    })
}

/// # Safety
/// `set` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn am_volumes_free(set: *mut AmVolumeSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Runs the full pipeline for the session described by the config file.
/// With a null `out_dir` nothing is written; otherwise outputs go to
/// `<out_dir>/<session_id>/`.
///
/// # Safety
/// `config_path` must be a NUL-terminated string, `out_dir` null or one, and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn am_pipeline_run(
    config_path: *const c_char,
    out_dir: *const c_char,
    out: *mut *mut AmMap,
) -> AmStatus {
    guard(|| {
        if out.is_null() {
            return fail(AmStatus::NullPointer, "out is null");
        }
        let config = match path_arg(config_path, "config_path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        let out_dir = if out_dir.is_null() {
            None
        } else {
            match path_arg(out_dir, "out_dir") {
                Ok(p) => Some(p),
                Err(s) => return s,
            }
        };
        let result = PipelineConfig::load(config).and_then(|(cfg, base)| match out_dir {
            Some(dir) => run_pipeline(&cfg, &base, dir, false).map(|r| r.map),
            None => {
                cfg.validate()?;
                build_map(&cfg, &load_inputs(&cfg, &base)?)
            }
        });
        match result {
            Ok(map) => boxed(AmMap { map }, out),
            Err(e) => fail(pipeline_status(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `map` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn am_map_volume_count(map: *const AmMap) -> usize {
    map.as_ref().map_or(0, |m| m.map.volumes.len())
}

/// # Safety
/// `map` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn am_map_volume(map: *const AmMap, index: usize, out: *mut AmVolume) -> AmStatus {
    guard(|| {
        let (Some(map), false) = (map.as_ref(), out.is_null()) else {
            return fail(AmStatus::NullPointer, "null argument");
        };
        match map.map.volumes.get(index) {
            Some(v) => {
                *out = v.into();
                AmStatus::Ok
            }
            None => fail(AmStatus::OutOfRange, format!("index {index} out of range")),
        }
    })
}

/// Metric scale factor recovered for the session.
///
/// # Safety
/// `map` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn am_map_scale(map: *const AmMap, out: *mut f64) -> AmStatus {
    guard(|| {
        let (Some(map), false) = (map.as_ref(), out.is_null()) else {
            return fail(AmStatus::NullPointer, "null argument");
        };
        *out = map.map.scale.factor;
        AmStatus::Ok
    })
}

/// Report JSON, identical to `report.json`. Release with [`am_string_free`].
///
/// # Safety
/// `map` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn am_map_report_json(map: *const AmMap, out: *mut *mut c_char) -> AmStatus {
    guard(|| {
        let (Some(map), false) = (map.as_ref(), out.is_null()) else {
            return fail(AmStatus::NullPointer, "null argument");
        };
        match emit_report(&map.map) {
            Ok(json) => match CString::new(json) {
                Ok(s) => {
                    *out = s.into_raw();
                    AmStatus::Ok
                }
                Err(_) => fail(AmStatus::Pipeline, "report contains a NUL byte"),
            },
            Err(e) => fail(AmStatus::Pipeline, e.to_string()),
        }
    })
}

/// # Safety
/// `map` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn am_map_free(map: *mut AmMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn am_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
