use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info};

use accessmap::mapgen::{emit_annotated_cloud, render_topdown, AccessibilityMap};
use accessmap::pipeline::{
    lift_volumes, load_inputs, run_pipeline, scale_inputs, session_info, PipelineConfig,
    PipelineError, VolumeFile, PGM_FILE, SVG_FILE, VOLUMES_SCHEMA_VERSION,
};
use accessmap::refine::{refine, RefineConfig};
use accessmap::synth::{generate_session, SceneSpec};

#[derive(Parser)]
#[command(name = "accessmap", version, about = "Accessibility maps from monocular drone flights")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full pipeline: report.json, map.svg, map.pgm and annotated.ply.
    Run {
        #[command(flatten)]
        common: Common,
        /// Validate config and inputs, write nothing.
        #[arg(long)]
        dry_run: bool,
    },
    /// Print the metric scale estimate as JSON.
    Scale {
        #[arg(long)]
        config: PathBuf,
    },
    /// Lift detections to volumes without refining; writes volumes.json and lifted.ply.
    Lift {
        #[command(flatten)]
        common: Common,
    },
    /// Refine a volumes file.
    Refine {
        /// Volumes file written by `lift`.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Pipeline config supplying thresholds; defaults apply without one.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        thresholds: Thresholds,
    },
    /// Render a volumes file over the session's cloud and trajectory.
    Render {
        #[command(flatten)]
        common: Common,
        /// Volumes file, usually the output of `refine`.
        #[arg(long)]
        volumes: PathBuf,
    },
    /// Write a synthetic session folder.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Scene description (JSON); the built-in six-object room otherwise.
        #[arg(long)]
        scene: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Parent folder for per-session outputs.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Render resolution, metres per pixel.
    #[arg(long)]
    resolution: Option<f64>,
    #[command(flatten)]
    thresholds: Thresholds,
}

#[derive(Args)]
struct Thresholds {
    #[arg(long)]
    vol_min: Option<f64>,
    #[arg(long)]
    vol_max: Option<f64>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    ratio_max: Option<f64>,
    #[arg(long)]
    app_min: Option<u32>,
}

impl Thresholds {
    fn apply(&self, r: &mut RefineConfig) {
        if let Some(v) = self.vol_min {
            r.vol_min = v;
        }
        if let Some(v) = self.vol_max {
            r.vol_max = v;
        }
        if let Some(v) = self.margin {
            r.containment_margin = v;
        }
        if let Some(v) = self.ratio_max {
            r.volume_ratio_max = v;
        }
        if let Some(v) = self.app_min {
            r.app_min = v;
        }
    }
}

impl Common {
    /// Config with command-line overrides, its folder, and the output parent.
    fn load(&self) -> Result<(PipelineConfig, PathBuf, PathBuf), PipelineError> {
        let (mut cfg, base) = PipelineConfig::load(&self.config)?;
        self.thresholds.apply(&mut cfg.refine);
        if let Some(r) = self.resolution {
            cfg.render_resolution = r;
        }
        let out = self
            .out
            .clone()
            .or_else(|| cfg.output_dir.clone().map(|d| if d.is_absolute() { d } else { base.join(d) }))
            .unwrap_or_else(|| PathBuf::from("out"));
        cfg.validate()?;
        Ok((cfg, base, out))
    }
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    fs::write(path, bytes).map_err(|source| PipelineError::Output { path: path.into(), source })
}

fn create_dir(dir: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(|source| PipelineError::Output { path: dir.into(), source })
}

fn execute(command: Command) -> Result<(), PipelineError> {
    match command {
        Command::Run { common, dry_run } => {
            let (cfg, base, out) = common.load()?;
            let outcome = run_pipeline(&cfg, &base, &out, dry_run)?;
            if dry_run {
                info!("dry run: config and inputs are valid");
            } else {
                let r = &outcome.map.report;
                info!(
                    "done: {} volumes, stage counts {:?}",
                    outcome.map.volumes.len(),
                    r.stage_counts
                );
            }
        }
        Command::Scale { config } => {
            let (cfg, base) = PipelineConfig::load(&config)?;
            cfg.validate()?;
            let inputs = load_inputs(&cfg, &base)?;
            let (scale, _, _) = scale_inputs(&cfg, &inputs)?;
            println!("{}", serde_json::to_string_pretty(&scale).expect("scale serialises"));
        }
        Command::Lift { common } => {
            let (cfg, base, out) = common.load()?;
            let inputs = load_inputs(&cfg, &base)?;
            let (scale, cloud, trajectory) = scale_inputs(&cfg, &inputs)?;
            let volumes = lift_volumes(&cfg, &inputs, &cloud, &trajectory)?;
            let dir = out.join(&cfg.session_id);
            create_dir(&dir)?;
            let file = VolumeFile {
                schema_version: VOLUMES_SCHEMA_VERSION,
                session_id: cfg.session_id.clone(),
                scale_factor: scale.factor,
                refine_report: None,
                volumes,
            };
            file.save(&dir.join("volumes.json"))?;
            let map = AccessibilityMap {
                session: session_info(&cfg),
                volumes: file.volumes,
                cloud,
                trajectory,
                report: Default::default(),
                scale,
                config: cfg.snapshot(),
            };
            write(&dir.join("lifted.ply"), emit_annotated_cloud(&map).as_bytes())?;
            info!("wrote {}", dir.display());
        }
        Command::Refine { input, output, config, thresholds } => {
            let mut rc = match config {
                Some(path) => PipelineConfig::load(&path)?.0.refine,
                None => RefineConfig::default(),
            };
            thresholds.apply(&mut rc);
            rc.validate().map_err(|e| PipelineError::Config { message: e.to_string() })?;
            let file = VolumeFile::load(&input)?;
            let (volumes, report) = refine(file.volumes, &rc);
            info!("refine: stage counts {:?}", report.stage_counts);
            VolumeFile { refine_report: Some(report), volumes, ..file }.save(&output)?;
        }
        Command::Render { common, volumes } => {
            let (cfg, base, out) = common.load()?;
            let file = VolumeFile::load(&volumes)?;
            let inputs = load_inputs(&cfg, &base)?;
            let (scale, cloud, trajectory) = scale_inputs(&cfg, &inputs)?;
            let map = AccessibilityMap {
                session: session_info(&cfg),
                volumes: file.volumes,
                cloud,
                trajectory,
                report: file.refine_report.unwrap_or_default(),
                scale,
                config: cfg.snapshot(),
            };
            let render = render_topdown(&map, cfg.render_resolution)?;
            let dir = out.join(&cfg.session_id);
            create_dir(&dir)?;
            write(&dir.join(SVG_FILE), render.svg.as_bytes())?;
            write(&dir.join(PGM_FILE), &render.pgm)?;
            info!("wrote {}", dir.display());
        }
        Command::Synth { out, seed, scene } => {
            let spec = match scene {
                Some(path) => {
                    let text = fs::read_to_string(&path).map_err(|e| PipelineError::Config {
                        message: format!("{}: {e}", path.display()),
                    })?;
                    let mut spec: SceneSpec = serde_json::from_str(&text).map_err(|e| PipelineError::Config {
                        message: format!("{}: {e}", path.display()),
                    })?;
                    spec.seed = seed;
                    spec
                }
                None => SceneSpec::default_scene(seed),
            };
            let session = generate_session(&spec).map_err(|e| PipelineError::Config { message: e.to_string() })?;
            session.write(&out).map_err(|e| PipelineError::Config { message: e.to_string() })?;
            info!(
                "synth: {} frames, {} detections, {} points written to {}",
                session.ground_truth.frames,
                session.detections.len(),
                session.cloud.len(),
                out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp_millis()
        .init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
