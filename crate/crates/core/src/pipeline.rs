//! End-to-end orchestration: ingest, scale, lift, associate, refine, emit.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::info;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::PoseSE3;
use crate::ingest::{
    load_calibration, parse_detections, parse_odometry, parse_pointcloud, parse_slam_events,
    parse_trajectory, Calibration, DetectionFilter, DetectionSet, IngestError, OdometrySample,
    SlamEventLog, SparseMapPoint, TrajectoryEntry,
};
use crate::mapgen::{
    emit_annotated_cloud, emit_report, render_topdown, AccessibilityMap, MapgenError, SessionInfo,
};
use crate::refine::{refine, RefineConfig, RefineError, RefineReport};
use crate::scale::{
    apply_scale, estimate_scale, OdometryFrame, ScaleError, ScaleEstimate, VelocityFrame,
};
use crate::volumes::{associate_points, lift_all, BoundingVolume3D, DepthRule, LiftConfig};

pub const DEFAULT_RESOLUTION: f64 = 0.05;
pub const DEFAULT_POSE_TOLERANCE: f64 = 0.1;

pub const REPORT_FILE: &str = "report.json";
pub const SVG_FILE: &str = "map.svg";
pub const PGM_FILE: &str = "map.pgm";
pub const PLY_FILE: &str = "annotated.ply";

/// Input files, relative paths resolved against the config file's folder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputPaths {
    pub detections: PathBuf,
    pub trajectory: PathBuf,
    pub pointcloud: PathBuf,
    pub odometry: PathBuf,
    pub events: PathBuf,
    pub calibration: PathBuf,
}

impl InputPaths {
    fn resolved(&self, base: &Path) -> Self {
        let r = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
        Self {
            detections: r(&self.detections),
            trajectory: r(&self.trajectory),
            pointcloud: r(&self.pointcloud),
            odometry: r(&self.odometry),
            events: r(&self.events),
            calibration: r(&self.calibration),
        }
    }

    fn all(&self) -> [&Path; 6] {
        [
            &self.detections,
            &self.trajectory,
            &self.pointcloud,
            &self.odometry,
            &self.events,
            &self.calibration,
        ]
    }
}

fn default_resolution() -> f64 {
    DEFAULT_RESOLUTION
}

fn default_pose_tolerance() -> f64 {
    DEFAULT_POSE_TOLERANCE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub session_id: String,
    #[serde(default)]
    pub drone_id: String,
    #[serde(default)]
    pub date: String,
    pub inputs: InputPaths,
    #[serde(default)]
    pub refine: RefineConfig,
    /// Metres per pixel of the top-down render.
    #[serde(default = "default_resolution")]
    pub render_resolution: f64,
    /// Parent of the per-session output folder. Never embedded in outputs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub odometry_frame: OdometryFrame,
    /// Largest detection-to-pose time gap, seconds.
    #[serde(default = "default_pose_tolerance")]
    pub pose_tolerance: f64,
    /// 0 picks the closest supporting point for the front plane; a value in
    /// (0, 100] picks that percentile of supporting depths instead.
    #[serde(default)]
    pub front_depth_percentile: f64,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<(Self, PathBuf), PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::Config {
            message: format!("{}: {e}", path.display()),
        })?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| PipelineError::Config {
            message: format!("{}: {e}", path.display()),
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config { message: m });
        if self.session_id.is_empty()
            || self.session_id.contains(['/', '\\'])
            || self.session_id == "."
            || self.session_id == ".."
        {
            return bad(format!("session_id `{}` is not a usable folder name", self.session_id));
        }
        self.refine.validate().map_err(|e| PipelineError::Config { message: e.to_string() })?;
        if !(self.render_resolution.is_finite() && self.render_resolution > 0.0) {
            return bad(format!("render_resolution must be positive, got {}", self.render_resolution));
        }
        if !(self.pose_tolerance.is_finite() && self.pose_tolerance >= 0.0) {
            return bad(format!("pose_tolerance must be >= 0, got {}", self.pose_tolerance));
        }
        if !(0.0..=100.0).contains(&self.front_depth_percentile) {
            return bad("front_depth_percentile must be in [0, 100]".into());
        }
        Ok(())
    }

    /// The configuration as embedded in the report.
    pub fn snapshot(&self) -> serde_json::Value {
        let mut c = self.clone();
        c.output_dir = None;
        serde_json::to_value(c).expect("config serialises")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Ingest,
    Scale,
    Lift,
    Refine,
    Mapgen,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Scale => "scale",
            Stage::Lift => "lift",
            Stage::Refine => "refine",
            Stage::Mapgen => "mapgen",
            Stage::Output => "output",
        })
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("[config] {message}")]
    Config { message: String },
    #[error("[ingest] {0}")]
    Ingest(#[from] IngestError),
    #[error("[scale] {0}")]
    Scale(#[from] ScaleError),
    #[error("[lift] {0}")]
    Lift(String),
    #[error("[refine] {0}")]
    Refine(#[from] RefineError),
    #[error("[mapgen] {0}")]
    Mapgen(#[from] MapgenError),
    #[error("[output] {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    pub fn stage(&self) -> Stage {
        match self {
            PipelineError::Config { .. } => Stage::Config,
            PipelineError::Ingest(_) => Stage::Ingest,
            PipelineError::Scale(_) => Stage::Scale,
            PipelineError::Lift(_) => Stage::Lift,
            PipelineError::Refine(_) => Stage::Refine,
            PipelineError::Mapgen(_) => Stage::Mapgen,
            PipelineError::Output { .. } => Stage::Output,
        }
    }

    /// 2 for problems with the inputs or configuration, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config { .. } | PipelineError::Ingest(_) => 2,
            _ => 1,
        }
    }
}

/// Parsed, validated inputs of one session.
#[derive(Debug, Clone)]
pub struct SessionInputs {
    pub calibration: Calibration,
    pub body_from_camera: PoseSE3,
    pub detections: DetectionSet,
    pub trajectory: Vec<TrajectoryEntry>,
    pub cloud: Vec<SparseMapPoint>,
    pub odometry: Vec<OdometrySample>,
    pub events: SlamEventLog,
}

/// Checks every input path exists before anything is parsed, so a missing
/// file is reported by name up front.
fn check_paths(inputs: &InputPaths) -> Result<(), PipelineError> {
    for p in inputs.all() {
        if !p.is_file() {
            return Err(IngestError::Io {
                path: p.to_path_buf(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found"),
            }
            .into());
        }
    }
    Ok(())
}

pub fn load_inputs(cfg: &PipelineConfig, base: &Path) -> Result<SessionInputs, PipelineError> {
    let paths = cfg.inputs.resolved(base);
    check_paths(&paths)?;
    let calibration = load_calibration(&paths.calibration)?;
    let body_from_camera = calibration.body_from_camera()?;
    let filter = DetectionFilter::new(calibration.obstacle_classes.iter().copied(), &calibration.intrinsics);
    Ok(SessionInputs {
        detections: parse_detections(&paths.detections, &filter)?,
        trajectory: parse_trajectory(&paths.trajectory)?,
        cloud: parse_pointcloud(&paths.pointcloud)?,
        odometry: parse_odometry(&paths.odometry)?,
        events: parse_slam_events(&paths.events)?,
        calibration,
        body_from_camera,
    })
}

/// Metric scale and the scaled cloud and trajectory.
pub fn scale_inputs(
    cfg: &PipelineConfig,
    inputs: &SessionInputs,
) -> Result<(ScaleEstimate, Vec<SparseMapPoint>, Vec<TrajectoryEntry>), PipelineError> {
    let t = Instant::now();
    let vf = VelocityFrame {
        frame: cfg.odometry_frame,
        body_from_camera: &inputs.body_from_camera,
    };
    let scale = estimate_scale(&inputs.events, &inputs.odometry, &inputs.trajectory, vf)?;
    let (cloud, trajectory) = apply_scale(scale.factor, &inputs.cloud, &inputs.trajectory)?;
    info!(
        "scale: factor {:.6} over [{}, {}] s in {:?}",
        scale.factor,
        scale.window.0,
        scale.window.1,
        t.elapsed()
    );
    Ok((scale, cloud, trajectory))
}

/// Per-detection volumes with their member points, before refinement.
pub fn lift_volumes(
    cfg: &PipelineConfig,
    inputs: &SessionInputs,
    cloud: &[SparseMapPoint],
    trajectory: &[TrajectoryEntry],
) -> Result<Vec<BoundingVolume3D>, PipelineError> {
    let t = Instant::now();
    let lift_cfg = LiftConfig {
        pose_tolerance: cfg.pose_tolerance,
        depth_rule: DepthRule::from_percentile(cfg.front_depth_percentile),
    };
    let lifted = lift_all(
        &inputs.detections.detections,
        trajectory,
        cloud,
        &inputs.calibration.intrinsics,
        &inputs.body_from_camera,
        &lift_cfg,
    )
    .map_err(|e| PipelineError::Lift(e.to_string()))?;
    let mut volumes = lifted.volumes;
    associate_points(&volumes, cloud).apply(&mut volumes);
    info!(
        "lift: {} volumes from {} detections ({} without pose, {} without supporting points) in {:?}",
        volumes.len(),
        inputs.detections.detections.len(),
        lifted.skipped_no_pose,
        lifted.skipped_no_support,
        t.elapsed()
    );
    Ok(volumes)
}

pub fn session_info(cfg: &PipelineConfig) -> SessionInfo {
    SessionInfo {
        session_id: cfg.session_id.clone(),
        drone_id: cfg.drone_id.clone(),
        date: cfg.date.clone(),
    }
}

/// Runs every stage up to and including refinement.
pub fn build_map(cfg: &PipelineConfig, inputs: &SessionInputs) -> Result<AccessibilityMap, PipelineError> {
    let (scale, cloud, trajectory) = scale_inputs(cfg, inputs)?;
    let volumes = lift_volumes(cfg, inputs, &cloud, &trajectory)?;

    let t = Instant::now();
    cfg.refine.validate()?;
    let (volumes, report) = refine(volumes, &cfg.refine);
    info!("refine: stage counts {:?} in {:?}", report.stage_counts, t.elapsed());

    Ok(AccessibilityMap {
        session: session_info(cfg),
        volumes,
        cloud,
        trajectory,
        report,
        scale,
        config: cfg.snapshot(),
    })
}

/// Rendered products of one map, held in memory until written.
#[derive(Debug, Clone, PartialEq)]
pub struct MapProducts {
    pub report_json: String,
    pub svg: String,
    pub pgm: Vec<u8>,
    pub ply: String,
}

pub fn render_products(map: &AccessibilityMap, resolution: f64) -> Result<MapProducts, PipelineError> {
    let t = Instant::now();
    let render = render_topdown(map, resolution)?;
    let products = MapProducts {
        report_json: emit_report(map)?,
        svg: render.svg,
        pgm: render.pgm,
        ply: emit_annotated_cloud(map),
    };
    info!("mapgen: {}x{} px render in {:?}", render.width, render.height, t.elapsed());
    Ok(products)
}

/// Writes the products into `dir`, creating it. On failure everything this
/// call created is removed again.
pub fn write_products(dir: &Path, products: &MapProducts) -> Result<(), PipelineError> {
    let created = !dir.exists();
    let result = (|| {
        fs::create_dir_all(dir).map_err(|source| PipelineError::Output { path: dir.into(), source })?;
        let files: [(&str, &[u8]); 4] = [
            (REPORT_FILE, products.report_json.as_bytes()),
            (SVG_FILE, products.svg.as_bytes()),
            (PGM_FILE, &products.pgm),
            (PLY_FILE, products.ply.as_bytes()),
        ];
        for (name, bytes) in files {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(|source| PipelineError::Output { path, source })?;
        }
        Ok(())
    })();
    if result.is_err() {
        if created {
            let _ = fs::remove_dir_all(dir);
        } else {
            for name in [REPORT_FILE, SVG_FILE, PGM_FILE, PLY_FILE] {
                let _ = fs::remove_file(dir.join(name));
            }
        }
    }
    result
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub map: AccessibilityMap,
    /// `None` for dry runs.
    pub output_dir: Option<PathBuf>,
}

/// Full pipeline. `base` resolves relative input paths; `out` is the parent
/// of the per-session output folder. With `dry_run` nothing is written and
/// the pipeline stops after validating and parsing all inputs.
pub fn run_pipeline(
    cfg: &PipelineConfig,
    base: &Path,
    out: &Path,
    dry_run: bool,
) -> Result<RunOutcome, PipelineError> {
    cfg.validate()?;
    let t = Instant::now();
    let inputs = load_inputs(cfg, base)?;
    info!(
        "ingest: {} detections ({} dropped by class, {} clamped), {} poses, {} points, {} odometry samples, {} events in {:?}",
        inputs.detections.detections.len(),
        inputs.detections.dropped_class,
        inputs.detections.clamped,
        inputs.trajectory.len(),
        inputs.cloud.len(),
        inputs.odometry.len(),
        inputs.events.len(),
        t.elapsed()
    );
    if dry_run {
        return Ok(RunOutcome {
            map: AccessibilityMap {
                session: session_info(cfg),
                volumes: vec![],
                cloud: inputs.cloud,
                trajectory: inputs.trajectory,
                report: Default::default(),
                scale: ScaleEstimate {
                    factor: 1.0,
                    odom_displacement: 0.0,
                    slam_displacement: 0.0,
                    window: (0.0, 0.0),
                },
                config: cfg.snapshot(),
            },
            output_dir: None,
        });
    }
    let map = build_map(cfg, &inputs)?;
    let products = render_products(&map, cfg.render_resolution)?;
    let dir = out.join(&cfg.session_id);
    write_products(&dir, &products)?;
    info!("wrote {}", dir.display());
    Ok(RunOutcome { map, output_dir: Some(dir) })
}

pub const VOLUMES_SCHEMA_VERSION: u32 = 1;

/// Intermediate volume list exchanged between the `lift` and `refine`
/// subcommands. Floats keep full precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeFile {
    pub schema_version: u32,
    pub session_id: String,
    pub scale_factor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine_report: Option<RefineReport>,
    pub volumes: Vec<BoundingVolume3D>,
}

impl VolumeFile {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(|e| PipelineError::Config {
            message: format!("{}: {e}", path.display()),
        })?;
        let f: Self = serde_json::from_str(&text).map_err(|e| PipelineError::Config {
            message: format!("{}: {e}", path.display()),
        })?;
        if f.schema_version != VOLUMES_SCHEMA_VERSION {
            return Err(PipelineError::Config {
                message: format!("{}: unsupported schema_version {}", path.display(), f.schema_version),
            });
        }
        if let Some(i) = f.volumes.iter().position(|v| !v.aabb.is_well_formed()) {
            return Err(PipelineError::Config {
                message: format!("{}: volume {i} has a malformed aabb", path.display()),
            });
        }
        Ok(f)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("volumes serialise") + "\n"
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|source| PipelineError::Output { path: parent.into(), source })?;
        }
        fs::write(path, self.to_json()).map_err(|source| PipelineError::Output { path: path.into(), source })
    }
}
