//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use accessmap::geometry::{CameraIntrinsics, Frame, Point3, PoseSE3};
use accessmap::ingest::{
    parse_calibration, parse_detections_from, parse_odometry_from, parse_pointcloud_from,
    parse_slam_events_from, parse_trajectory_from, write_detections, write_odometry,
    write_pointcloud, write_slam_events, write_trajectory, Detection2D, DetectionFilter,
    SlamEvent, SparseMapPoint,
};
use accessmap::mapgen::parse_report;
use accessmap::pipeline::{run_pipeline, PipelineConfig, PGM_FILE, PLY_FILE, REPORT_FILE, SVG_FILE};
use accessmap::refine::{
    filter_valid, merge_contained, refine, volume_contains, RefineConfig, RefineReport,
};
use accessmap::scale::{estimate_scale, VelocityFrame};
use accessmap::synth::{
    generate_session, oracle_merge, random_volumes, SceneSpec, SyntheticSession, CONFIG_FILE,
};
use accessmap::volumes::{front_depth, lift_detection, BoundingVolume3D};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn secs(d: Duration) -> String {
    format!("{:.3} s", d.as_secs_f64())
}

// 1 ---------------------------------------------------------------------------

fn geometry_round_trip() -> Outcome {
    const TOL: f64 = 1e-9;
    const LIMIT: Duration = Duration::from_secs(1);
    let intr = CameraIntrinsics::new(525.0, 519.5, 319.5, 241.25, 640, 480).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let z = rng.random_range(0.1..10.0);
        let p = Point3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), z, Frame::Camera);
        let px = intr.project(&p).unwrap();
        let q = intr.back_project(px, p.z).unwrap();
        worst = worst.max((q.coords() - p.coords()).amax());
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= TOL && elapsed < LIMIT,
        format!("10000 points, max error {worst:.2e} (tol {TOL:e}), {} (limit 1 s)", secs(elapsed)),
    )
}

// 2 ---------------------------------------------------------------------------

fn scale_recovery() -> Outcome {
    const TOL: f64 = 1e-6;
    const LIMIT: Duration = Duration::from_secs(5);
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    let mut with_reset = 0;
    let mut problems = Vec::new();
    for i in 0..20u64 {
        // Log-uniform over [0.2, 5].
        let s = (rng.random_range(0.2f64.ln()..=5.0f64.ln())).exp();
        let failures = (i % 4) as u32;
        let session = generate_session(&SceneSpec::scale_only(100 + i, s, failures)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        session.write(dir.path()).unwrap();
        let (cfg, base) = PipelineConfig::load(&dir.path().join(CONFIG_FILE)).unwrap();
        let inputs = accessmap::pipeline::load_inputs(&cfg, &base).unwrap();
        let vf = VelocityFrame { frame: cfg.odometry_frame, body_from_camera: &inputs.body_from_camera };
        match estimate_scale(&inputs.events, &inputs.odometry, &inputs.trajectory, vf) {
            Ok(est) => {
                worst = worst.max((est.factor - s).abs() / s);
                let first_search = inputs
                    .events
                    .events()
                    .iter()
                    .find(|(_, e)| *e == SlamEvent::InitSearchStart)
                    .map(|(t, _)| *t)
                    .unwrap();
                if failures > 0 {
                    if est.window.0 > first_search {
                        with_reset += 1;
                    } else {
                        problems.push(format!("session {i}: window did not reset"));
                    }
                }
            }
            Err(e) => problems.push(format!("session {i}: {e}")),
        }
    }
    let elapsed = start.elapsed();
    outcome(
        problems.is_empty() && worst <= TOL && elapsed < LIMIT && with_reset == 15,
        format!(
            "20 sessions (15 with failed init attempts), max relative error {worst:.2e} (tol {TOL:e}), {} (limit 5 s){}",
            secs(elapsed),
            if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }
        ),
    )
}

// 3 ---------------------------------------------------------------------------

fn lifting_worked_example() -> Outcome {
    const TOL: f64 = 1e-9;
    let intr = CameraIntrinsics::new(100.0, 100.0, 320.0, 240.0, 640, 480).unwrap();
    let det = Detection2D {
        frame_id: 0,
        timestamp: 0.0,
        class_id: 56,
        class_name: "chair".into(),
        x_min: 220.0,
        y_min: 190.0,
        x_max: 420.0,
        y_max: 290.0,
        confidence: 0.9,
    };
    // Z0 from a cloud: the closest point inside the box sits at depth 2.
    let camera = PoseSE3::identity(Frame::Map).retagged(Frame::Camera, Frame::Map);
    let cloud = [
        SparseMapPoint { id: 0, position: Point3::new(0.1, 0.1, 2.0, Frame::Map) },
        SparseMapPoint { id: 1, position: Point3::new(-0.5, 0.2, 2.7, Frame::Map) },
        SparseMapPoint { id: 2, position: Point3::new(9.0, 0.0, 1.0, Frame::Map) },
    ];
    let z0 = front_depth(&det, &camera, &intr, &cloud).unwrap();
    let lifted = lift_detection(&det, z0, &intr).unwrap();

    // Independent back-projection: x = (u - cx) z / fx, y = (v - cy) z / fy.
    let eq2 = |u: f64, v: f64, z: f64| Vector3::new((u - 320.0) * z / 100.0, (v - 240.0) * z / 100.0, z);
    let pixels = [(220.0, 190.0), (420.0, 190.0), (420.0, 290.0), (220.0, 290.0)];
    let mut worst: f64 = 0.0;
    for (k, (u, v)) in pixels.iter().enumerate() {
        worst = worst.max((lifted.corners[k].coords() - eq2(*u, *v, 2.0)).amax());
        worst = worst.max((lifted.corners[k + 4].coords() - eq2(*u, *v, 5.0)).amax());
    }
    let front = &lifted.corners[..4];
    let xs = front.iter().map(|c| c.x);
    let ys = front.iter().map(|c| c.y);
    let (x0, x1) = (xs.clone().fold(f64::INFINITY, f64::min), xs.fold(f64::NEG_INFINITY, f64::max));
    let (y0, y1) = (ys.clone().fold(f64::INFINITY, f64::min), ys.fold(f64::NEG_INFINITY, f64::max));
    let checks = [
        (z0, 2.0),
        (x0, -2.0),
        (x1, 2.0),
        (y0, -1.0),
        (y1, 1.0),
        (lifted.depth_estimate, 3.0),
        (lifted.corners[4].z, 5.0),
    ];
    for (got, want) in checks {
        worst = worst.max((got - want).abs());
    }
    // Round trip through the pixel the corner came from.
    let px = intr.project(&lifted.corners[6]).unwrap();
    worst = worst.max((px.u - 420.0).abs()).max((px.v - 290.0).abs());
    outcome(
        worst <= TOL,
        format!("Z0 {z0}, front x [{x0}, {x1}], y [{y0}, {y1}], Z_est {}, rear z {}, max deviation {worst:.1e}", lifted.depth_estimate, lifted.corners[4].z),
    )
}

// 4, 5 ------------------------------------------------------------------------

type Key = (u32, [u64; 6], u32);

fn multiset(vols: &[BoundingVolume3D]) -> Vec<Key> {
    let mut k: Vec<Key> = vols
        .iter()
        .map(|v| {
            let a = &v.aabb;
            (v.class_id, [a.min.x, a.min.y, a.min.z, a.max.x, a.max.y, a.max.z].map(f64::to_bits), v.appearances)
        })
        .collect();
    k.sort_unstable();
    k
}

fn instances() -> Vec<Vec<BoundingVolume3D>> {
    (0..200).map(|seed| random_volumes(5000 + seed, 30)).collect()
}

fn refine_oracle_equivalence() -> Outcome {
    const LIMIT: Duration = Duration::from_secs(10);
    let cfg = RefineConfig::default();
    let start = Instant::now();
    let mut mismatches = 0;
    let mut merges = 0;
    for vols in instances() {
        let mut scratch = RefineReport::default();
        let valid = filter_valid(vols, &cfg, &mut scratch);
        let fast = merge_contained(valid.clone(), &cfg);
        let slow = oracle_merge(&valid, &cfg);
        merges += valid.len() - fast.len();
        if multiset(&fast) != multiset(&slow) {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        mismatches == 0 && merges > 0 && elapsed < LIMIT,
        format!("200 instances, {merges} merges, {mismatches} mismatches, {} (limit 10 s)", secs(elapsed)),
    )
}

fn refine_invariants() -> Outcome {
    let cfg = RefineConfig::default();
    let (mut monotone, mut conserved, mut idempotent, mut no_pairs) = (0, 0, 0, 0);
    let all = instances();
    for vols in &all {
        let (out, report) = refine(vols.clone(), &cfg);
        if report.stage_counts.windows(2).all(|w| w[0] >= w[1]) {
            monotone += 1;
        }
        let mut scratch = RefineReport::default();
        let valid = filter_valid(vols.clone(), &cfg, &mut scratch);
        let merged = merge_contained(valid.clone(), &cfg);
        let sum = |v: &[BoundingVolume3D]| v.iter().map(|x| u64::from(x.appearances)).sum::<u64>();
        if sum(&valid) == sum(&merged) {
            conserved += 1;
        }
        if refine(out.clone(), &cfg).0 == out {
            idempotent += 1;
        }
        let clean = out.iter().enumerate().all(|(i, a)| {
            out.iter().enumerate().all(|(j, b)| i == j || !volume_contains(a, b, &cfg))
        });
        if clean {
            no_pairs += 1;
        }
    }
    let n = all.len();
    outcome(
        [monotone, conserved, idempotent, no_pairs].iter().all(|&c| c == n),
        format!(
            "of {n}: monotone counts {monotone}, appearances conserved {conserved}, idempotent {idempotent}, no containing pair {no_pairs}"
        ),
    )
}

// 6 ---------------------------------------------------------------------------

/// Cheapest assignment of volumes to objects of one class (small counts).
fn best_assignment(costs: &[Vec<f64>]) -> Option<(f64, Vec<usize>)> {
    fn go(row: usize, costs: &[Vec<f64>], used: &mut Vec<bool>, cur: &mut Vec<usize>, best: &mut Option<(f64, Vec<usize>)>, acc: f64) {
        if row == costs.len() {
            if best.as_ref().is_none_or(|(b, _)| acc < *b) {
                *best = Some((acc, cur.clone()));
            }
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                cur.push(j);
                go(row + 1, costs, used, cur, best, acc + costs[row][j]);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut best = None;
    let cols = costs.first().map_or(0, Vec::len);
    go(0, costs, &mut vec![false; cols], &mut Vec::new(), &mut best, 0.0);
    best
}

fn end_to_end() -> Outcome {
    const CENTER_TOL: f64 = 0.15;
    const EXTENT_TOL: f64 = 0.25;
    const LIMIT: Duration = Duration::from_secs(60);
    let start = Instant::now();
    let spec = SceneSpec::default_scene(7);
    let session = generate_session(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("session");
    session.write(&input).unwrap();
    let (cfg, base) = PipelineConfig::load(&input.join(CONFIG_FILE)).unwrap();
    let run = run_pipeline(&cfg, &base, &dir.path().join("out"), false);
    let elapsed = start.elapsed();
    let run = match run {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("pipeline failed: {e}")),
    };
    let report = parse_report(&fs::read_to_string(run.output_dir.unwrap().join(REPORT_FILE)).unwrap()).unwrap();
    let gt = &session.ground_truth;

    let mut problems = Vec::new();
    if report.volumes.len() != gt.objects.len() {
        problems.push(format!("{} volumes, expected {}", report.volumes.len(), gt.objects.len()));
    }
    let (mut worst_center, mut worst_extent): (f64, f64) = (0.0, 0.0);
    let mut classes: Vec<u32> = gt.objects.iter().map(|o| o.class_id).collect();
    classes.sort_unstable();
    classes.dedup();
    for class in &classes {
        let objs: Vec<_> = gt.objects.iter().filter(|o| o.class_id == *class).collect();
        let vols: Vec<_> = report.volumes.iter().filter(|v| v.class_id == *class).collect();
        if objs.len() != vols.len() {
            problems.push(format!("class {class}: {} volumes for {} objects", vols.len(), objs.len()));
            continue;
        }
        let center = |min: &[f64; 3], max: &[f64; 3]| Vector3::new(min[0] + max[0], min[1] + max[1], min[2] + max[2]) * 0.5;
        let costs: Vec<Vec<f64>> = objs
            .iter()
            .map(|o| vols.iter().map(|v| (center(&o.min, &o.max) - center(&v.aabb_min, &v.aabb_max)).norm()).collect())
            .collect();
        let (_, assign) = best_assignment(&costs).unwrap();
        for (o, &j) in objs.iter().zip(&assign) {
            let v = vols[j];
            let dc = (center(&o.min, &o.max) - center(&v.aabb_min, &v.aabb_max)).norm();
            worst_center = worst_center.max(dc);
            for i in 0..3 {
                let truth = o.max[i] - o.min[i];
                let est = v.aabb_max[i] - v.aabb_min[i];
                worst_extent = worst_extent.max((est / truth - 1.0).abs());
            }
        }
    }
    if cfg.refine.app_min != 3 {
        problems.push(format!("app_min is {}", cfg.refine.app_min));
    }
    let pass = problems.is_empty() && worst_center <= CENTER_TOL && worst_extent <= EXTENT_TOL && elapsed < LIMIT;
    outcome(
        pass,
        format!(
            "{} frames, {} detections ({} spurious, {} missed), stage counts {:?}, {} volumes; max center error {worst_center:.3} m (tol {CENTER_TOL}), max extent error {:.1}% (tol 25%), {} (limit 60 s){}",
            gt.frames,
            session.detections.len(),
            gt.false_positives,
            gt.missed_detections,
            report.stage_counts,
            report.volumes.len(),
            worst_extent * 100.0,
            secs(elapsed),
            if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }
        ),
    )
}

// 7 ---------------------------------------------------------------------------

const TOKENS: [&str; 16] = [
    "", "nan", "inf", "-inf", "-1", "1e308", "1e999", "abc", "0", "-0", "1e-320",
    "99999999999999999999999", "\u{0}", "end_header", "element vertex 4", "property list uchar int x",
];

fn mutate(base: &str, rng: &mut ChaCha8Rng) -> Vec<u8> {
    if rng.random_range(0..10) == 0 {
        let n = rng.random_range(0..200);
        return (0..n).map(|_| rng.random()).collect();
    }
    let mut lines: Vec<String> = base.lines().map(str::to_string).collect();
    for _ in 0..rng.random_range(1..=3) {
        if lines.is_empty() {
            lines.push(TOKENS[rng.random_range(0..TOKENS.len())].to_string());
            continue;
        }
        let i = rng.random_range(0..lines.len());
        match rng.random_range(0..7) {
            0 => {
                lines.remove(i);
            }
            1 => {
                let l = lines[i].clone();
                lines.insert(i, l);
            }
            2 => {
                let j = rng.random_range(0..lines.len());
                lines.swap(i, j);
            }
            3 => {
                let sep = if lines[i].contains(',') { "," } else { " " };
                let mut toks: Vec<String> = lines[i].split(sep).map(str::to_string).collect();
                let k = rng.random_range(0..toks.len());
                toks[k] = TOKENS[rng.random_range(0..TOKENS.len())].to_string();
                lines[i] = toks.join(sep);
            }
            4 => {
                let toks: Vec<&str> = (0..rng.random_range(0..6)).map(|_| TOKENS[rng.random_range(0..TOKENS.len())]).collect();
                lines.insert(i, toks.join(","));
            }
            5 => {
                let cut = rng.random_range(0..=lines[i].len());
                let cut = (0..=cut).rev().find(|c| lines[i].is_char_boundary(*c)).unwrap_or(0);
                lines[i].truncate(cut);
                lines.truncate(i + 1);
            }
            _ => {
                let mut bytes = lines[i].clone().into_bytes();
                if !bytes.is_empty() {
                    let k = rng.random_range(0..bytes.len());
                    bytes[k] = rng.random();
                }
                lines[i] = String::from_utf8_lossy(&bytes).into_owned();
            }
        }
    }
    let mut out = lines.join("\n").into_bytes();
    if rng.random() {
        out.push(b'\n');
    }
    if rng.random_range(0..20) == 0 {
        let k = rng.random_range(0..=out.len());
        out.insert(k, rng.random());
    }
    out
}

fn text(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> String {
    let mut buf = Vec::new();
    f(&mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

fn parser_robustness() -> Outcome {
    let cube: SyntheticSession = generate_session(&SceneSpec::single_cube(3)).unwrap();
    let full: SyntheticSession = generate_session(&SceneSpec::scale_only(4, 1.7, 1)).unwrap();
    let filter = DetectionFilter::new(cube.calibration.obstacle_classes.clone(), &cube.calibration.intrinsics);

    // Round trips over full-size files.
    let mut round_trip_failures = Vec::new();
    let dets = text(|w| write_detections(w, &cube.detections));
    if parse_detections_from(dets.as_bytes(), &filter).map(|s| s.detections).ok() != Some(cube.detections.clone()) {
        round_trip_failures.push("detections");
    }
    let traj = text(|w| write_trajectory(w, &full.trajectory));
    if parse_trajectory_from(traj.as_bytes()).ok() != Some(full.trajectory.clone()) {
        round_trip_failures.push("trajectory");
    }
    let cloud = text(|w| write_pointcloud(w, &cube.cloud));
    if parse_pointcloud_from(cloud.as_bytes()).ok() != Some(cube.cloud.clone()) {
        round_trip_failures.push("pointcloud");
    }
    let odom = text(|w| write_odometry(w, &full.odometry));
    if parse_odometry_from(odom.as_bytes()).ok() != Some(full.odometry.clone()) {
        round_trip_failures.push("odometry");
    }
    let events = text(|w| write_slam_events(w, &full.events));
    if parse_slam_events_from(events.as_bytes()).ok() != Some(full.events.clone()) {
        round_trip_failures.push("events");
    }
    let cal = serde_json::to_string_pretty(&cube.calibration).unwrap();
    if parse_calibration(cal.as_bytes()).ok() != Some(cube.calibration.clone()) {
        round_trip_failures.push("calibration");
    }

    // Fuzzing over short seeds of each format.
    let head = |s: &str, n: usize| s.lines().take(n).collect::<Vec<_>>().join("\n") + "\n";
    let small_cloud = text(|w| write_pointcloud(w, &cube.cloud[..12]));
    type Parser<'a> = Box<dyn Fn(&[u8]) -> bool + 'a>;
    let parsers: Vec<(&str, String, Parser)> = vec![
        ("detections", head(&dets, 12), Box::new(|b: &[u8]| parse_detections_from(b, &filter).is_ok())),
        ("trajectory", head(&traj, 12), Box::new(|b: &[u8]| parse_trajectory_from(b).is_ok())),
        ("pointcloud", small_cloud, Box::new(|b: &[u8]| parse_pointcloud_from(b).is_ok())),
        ("odometry", head(&odom, 12), Box::new(|b: &[u8]| parse_odometry_from(b).is_ok())),
        ("events", events.clone(), Box::new(|b: &[u8]| parse_slam_events_from(b).is_ok())),
        ("calibration", cal.clone(), Box::new(|b: &[u8]| parse_calibration(b).is_ok())),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut panics = Vec::new();
    let mut summary = Vec::new();
    for (name, base, parse) in &parsers {
        let mut errors = 0;
        for _ in 0..10_000 {
            let input = mutate(base, &mut rng);
            match catch_unwind(AssertUnwindSafe(|| parse(&input))) {
                Ok(true) => {}
                Ok(false) => errors += 1,
                Err(_) => panics.push(format!("{name}: {:?}", String::from_utf8_lossy(&input))),
            }
        }
        summary.push(format!("{name} {errors}"));
    }
    outcome(
        panics.is_empty() && round_trip_failures.is_empty(),
        format!(
            "6 parsers x 10000 fuzzed inputs, structured errors per parser: {}; panics {}; round-trip failures {:?}",
            summary.join(", "),
            panics.len(),
            round_trip_failures
        ),
    )
}

// 8 ---------------------------------------------------------------------------

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("session");
    let session = generate_session(&SceneSpec::default_scene(8)).unwrap();
    session.write(&input).unwrap();
    let cli = env!("CARGO_BIN_EXE_accessmap");
    let run = |out: &Path| {
        Command::new(cli)
            .args(["run", "--config"])
            .arg(input.join(CONFIG_FILE))
            .arg("--out")
            .arg(out)
            .env("RUST_LOG", "warn")
            .status()
            .map(|s| s.success())
            .unwrap_or(false)
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    if !run(&a) || !run(&b) {
        return outcome(false, "`run` exited with an error");
    }
    let sid = &session.spec.session_id;
    let mut differing = Vec::new();
    for name in [REPORT_FILE, SVG_FILE, PLY_FILE, PGM_FILE] {
        let (x, y) = (fs::read(a.join(sid).join(name)), fs::read(b.join(sid).join(name)));
        match (x, y) {
            (Ok(x), Ok(y)) if x == y && !x.is_empty() => {}
            _ => differing.push(name),
        }
    }
    outcome(
        differing.is_empty(),
        format!("two `run` invocations; differing outputs: {differing:?}"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("geometry round trip", geometry_round_trip),
        ("scale recovery", scale_recovery),
        ("lifting worked example", lifting_worked_example),
        ("refinement oracle equivalence", refine_oracle_equivalence),
        ("refinement invariants", refine_invariants),
        ("end-to-end synthetic recovery", end_to_end),
        ("parser robustness", parser_robustness),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = catch_unwind(check).unwrap_or_else(|_| outcome(false, "panicked"));
        let tag = if result.pass { "PASS" } else { "FAIL" };
        if !result.pass {
            failed += 1;
        }
        println!("criterion {}: {tag}: {name}: {}", i + 1, result.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
