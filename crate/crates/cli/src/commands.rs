use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use depthsynth::dataset::{compose_manifest, scan_source_dir, DatasetError, SourceTag};
use depthsynth::depthio::{
    dequantize_depth, load_depth, quantize_depth, read_kitti_bin, read_pfm, read_png8,
    write_kitti_bin, write_pfm, write_png8, write_rgb_png, DepthIoError,
};
use depthsynth::geometry::{
    project_cloud_with, Calibration, CameraModel, ProjectionOptions, RigidTransform,
};
use depthsynth::metrics::{
    densedepth_loss, pair_lidar_with_prediction, rel_error, ImageGrid, LossWeights, MetricsError,
    SampleSpace, SsimConfig,
};
use depthsynth::rng::SplitMix64;
use depthsynth::synth::{
    generate_frame, pose_from_json, LidarConfig, ProceduralRoom, Scene, SynthError,
};
use serde_json::{json, Value};

use crate::args::*;
use crate::CliError;

const POSE_STREAM: u64 = 0x5EED_CA3E_0000_0001;

type Result<T> = std::result::Result<T, CliError>;

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Validation("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Convert(a) => convert(a),
        Command::Project(a) => project(a),
        Command::Synth(a) => synth(a),
        Command::Compose(a) => compose(a),
        Command::Eval(a) => eval(a),
        Command::Metrics(a) => metrics(a),
    }
}

fn invalid(msg: impl Display) -> CliError {
    CliError::Validation(msg.to_string())
}

fn at(path: &Path) -> impl Fn(DepthIoError) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn warn(path: &Path, warnings: usize) {
    if warnings > 0 {
        eprintln!(
            "warning: {}: {warnings} value(s) repaired while decoding",
            path.display()
        );
    }
}

fn emit(report: &Value) {
    let text = serde_json::to_string_pretty(report).expect("JSON values always serialize");
    // a closed pipe downstream is not an error
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn check_range(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!(
            "{name} must be a positive number, got {v}"
        )))
    }
}

fn load_calibration(path: &Path) -> Result<Calibration> {
    Calibration::from_json(&read_text(path)?)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn convert(a: ConvertArgs) -> Result<()> {
    let bytes = read(&a.input)?;
    match a.conversion {
        Conversion::Pfm2Png8 => {
            check_range("--max-range", a.max_range)?;
            let depth = read_pfm(&bytes).map_err(at(&a.input))?;
            warn(&a.input, depth.warnings);
            let q = quantize_depth(&depth.value, a.max_range).map_err(invalid)?;
            write(&a.output, &write_png8(&q).map_err(at(&a.output))?)?;
            emit(&json!({"width": q.width(), "height": q.height(), "max_range": q.max_range()}));
        }
        Conversion::Png82Pfm => {
            let q = read_png8(&bytes).map_err(at(&a.input))?;
            warn(&a.input, q.warnings);
            let depth = dequantize_depth(&q.value);
            write(&a.output, &write_pfm(&depth))?;
            emit(
                &json!({"width": depth.width(), "height": depth.height(), "max_range": q.value.max_range()}),
            );
        }
    }
    Ok(())
}

fn project(a: ProjectArgs) -> Result<()> {
    if !(a.z_min.is_finite() && a.z_min >= 0.0) {
        return Err(invalid(format!("--z-min must be >= 0, got {}", a.z_min)));
    }
    let calib = load_calibration(&a.calib)?;
    let cloud = read_kitti_bin(&read(&a.cloud)?).map_err(at(&a.cloud))?;
    warn(&a.cloud, cloud.warnings);
    let projected = project_cloud_with(
        &calib.camera,
        &calib.lidar_to_camera,
        &cloud.value,
        ProjectionOptions { z_min: a.z_min },
    );
    eprintln!(
        "{} of {} points project into the image",
        projected.len(),
        cloud.value.len()
    );
    let points: Vec<Value> = projected
        .iter()
        .map(|(i, p)| json!({"index": i, "u": p.u, "v": p.v, "d": p.d}))
        .collect();
    emit(&json!({"total": cloud.value.len(), "count": points.len(), "points": points}));
    Ok(())
}

fn synth_error(e: SynthError) -> CliError {
    match e {
        SynthError::DepthIo(e) => CliError::Io(e.to_string()),
        other => CliError::Validation(other.to_string()),
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    check_range("--max-range", a.max_range)?;
    let (w, h) = a.size;
    let cam = CameraModel::from_horizontal_fov(a.fov, w, h).map_err(invalid)?;
    let cfg = LidarConfig {
        channels: a.lidar_channels,
        elevation_min: a.lidar_elevation_min,
        elevation_max: a.lidar_elevation_max,
        azimuth_step: a.lidar_azimuth_step,
        max_range: a.lidar_max_range,
        min_range: a.lidar_min_range,
    };
    cfg.validate().map_err(synth_error)?;

    let pose_file = match &a.pose {
        Some(p) => Some(
            pose_from_json(&read_text(p)?)
                .map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?,
        ),
        None => None,
    };
    let (scene, pose) = match (&a.scene, a.procedural) {
        (Some(path), _) => {
            let scene = Scene::from_json(&read_text(path)?)
                .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let pose = pose_file.ok_or_else(|| invalid("--pose is required with --scene"))?;
            (scene, pose)
        }
        (None, Some(seed)) => {
            let room = ProceduralRoom::generate(seed);
            let pose = match pose_file {
                Some(p) => p,
                None => room.random_camera_pose(&mut SplitMix64::new(
                    a.pose_seed.unwrap_or(seed) ^ POSE_STREAM,
                )),
            };
            (room.scene, pose)
        }
        (None, None) => return Err(invalid("one of --scene or --procedural is required")),
    };
    scene
        .check_viewpoint(pose.translation())
        .map_err(synth_error)?;

    let offset = match &a.lidar_offset {
        Some(p) => RigidTransform::from_extrinsics_json(&read_text(p)?)
            .map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?,
        None => RigidTransform::lidar_axes_to_camera_axes(),
    };

    let frame = generate_frame(&scene, &cam, &pose, &offset, &cfg).map_err(synth_error)?;
    let depth = match a.depth_mode {
        DepthModeArg::Planar => &frame.depth_planar,
        DepthModeArg::Perspective => &frame.depth_perspective,
    };

    let mut outputs = BTreeMap::new();
    if let Some(p) = &a.rgb {
        write(p, &write_rgb_png(&frame.rgb).map_err(at(p))?)?;
        outputs.insert("rgb", p.display().to_string());
    }
    if let Some(p) = &a.depth_pfm {
        write(p, &write_pfm(depth))?;
        outputs.insert("depth_pfm", p.display().to_string());
    }
    if let Some(p) = &a.depth_png {
        let q = quantize_depth(depth, a.max_range).map_err(invalid)?;
        write(p, &write_png8(&q).map_err(at(p))?)?;
        outputs.insert("depth_png", p.display().to_string());
    }
    if let Some(p) = &a.lidar {
        write(p, &write_kitti_bin(&frame.cloud))?;
        outputs.insert("lidar", p.display().to_string());
    }
    if let Some(p) = &a.calib_out {
        write(p, frame.calibration.to_json().as_bytes())?;
        outputs.insert("calibration", p.display().to_string());
    }

    let (lo, hi) = depth
        .values()
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| {
            (lo.min(d), hi.max(d))
        });
    eprintln!(
        "rendered {w}x{h} frame, depth {lo:.3}..{hi:.3} m, {} LiDAR points",
        frame.cloud.len()
    );
    emit(&json!({
        "width": w,
        "height": h,
        "fx": cam.fx,
        "fy": cam.fy,
        "depth_mode": match a.depth_mode { DepthModeArg::Planar => "planar", DepthModeArg::Perspective => "perspective" },
        "depth_min": lo,
        "depth_max": hi,
        "lidar_points": frame.cloud.len(),
        "outputs": outputs,
    }));
    Ok(())
}

fn split_pair<'a>(flag: &str, s: &'a str) -> Result<(SourceTag, &'a str)> {
    let (tag, rest) = s
        .split_once('=')
        .ok_or_else(|| invalid(format!("{flag} expects TAG=VALUE, got {s:?}")))?;
    let tag: SourceTag = tag
        .parse()
        .map_err(|e| invalid(format!("{flag} {s:?}: {e}")))?;
    Ok((tag, rest))
}

fn dataset_error(e: DatasetError) -> CliError {
    match e {
        DatasetError::Io(e) => CliError::Io(e.to_string()),
        other => CliError::Validation(other.to_string()),
    }
}

fn compose(a: ComposeArgs) -> Result<()> {
    let mut counts = BTreeMap::new();
    for c in &a.counts {
        let (tag, n) = split_pair("--count", c)?;
        let n: usize = n
            .parse()
            .map_err(|_| invalid(format!("--count {c:?}: not a count")))?;
        if counts.insert(tag, n).is_some() {
            return Err(invalid(format!("--count given twice for {tag}")));
        }
    }
    let mut sources = Vec::new();
    let mut unmatched = 0;
    for s in &a.sources {
        let (tag, dir) = split_pair("--source", s)?;
        let (entries, orphans) = scan_source_dir(tag, Path::new(dir)).map_err(dataset_error)?;
        for o in &orphans {
            eprintln!("warning: {o} has no matching counterpart");
        }
        unmatched += orphans.len();
        sources.push((tag, entries));
    }
    let mut available: BTreeMap<SourceTag, usize> = BTreeMap::new();
    for (tag, entries) in &sources {
        *available.entry(*tag).or_default() += entries.len();
    }
    for tag in counts.keys() {
        if !available.contains_key(tag) {
            return Err(invalid(format!(
                "--count names {tag} but no --source has that tag"
            )));
        }
    }
    for (tag, n) in &available {
        counts.entry(*tag).or_insert(*n);
    }

    let created_from = a.sources.join(" ");
    let m = compose_manifest(&sources, &counts, a.seed, &created_from).map_err(dataset_error)?;
    write(&a.out, m.to_json().as_bytes())?;
    eprintln!("wrote {} entries to {}", m.len(), a.out.display());
    let per_tag: BTreeMap<String, usize> =
        counts.iter().map(|(t, n)| (t.to_string(), *n)).collect();
    emit(&json!({"entries": m.len(), "per_tag": per_tag, "unmatched": unmatched, "seed": a.seed}));
    Ok(())
}

fn metrics_error(e: MetricsError) -> CliError {
    CliError::Validation(e.to_string())
}

fn eval(a: EvalArgs) -> Result<()> {
    check_range("--max-range", a.max_range)?;
    if !(a.min_depth.is_finite() && a.min_depth >= 0.0) {
        return Err(invalid(format!(
            "--min-depth must be >= 0, got {}",
            a.min_depth
        )));
    }
    if a.pred.len() != a.cloud.len() {
        return Err(invalid(format!(
            "{} --pred but {} --cloud",
            a.pred.len(),
            a.cloud.len()
        )));
    }
    if a.calib.len() != 1 && a.calib.len() != a.pred.len() {
        return Err(invalid("give one --calib, or one per --pred"));
    }
    let space = match a.space {
        SpaceArg::Grayscale => SampleSpace::Grayscale,
        SpaceArg::Metric => SampleSpace::Metric,
    };

    let mut images = Vec::new();
    let mut rels = Vec::new();
    let mut total_pairs = 0;
    for (i, (pred_path, cloud_path)) in a.pred.iter().zip(&a.cloud).enumerate() {
        let calib_path = &a.calib[if a.calib.len() == 1 { 0 } else { i }];
        let calib = load_calibration(calib_path)?;
        let pred = read_png8(&read(pred_path)?).map_err(at(pred_path))?;
        warn(pred_path, pred.warnings);
        if pred.value.width() != calib.camera.width as usize
            || pred.value.height() != calib.camera.height as usize
        {
            return Err(invalid(format!(
                "{} is {}x{} but the camera is {}x{}",
                pred_path.display(),
                pred.value.width(),
                pred.value.height(),
                calib.camera.width,
                calib.camera.height
            )));
        }
        let cloud = read_kitti_bin(&read(cloud_path)?).map_err(at(cloud_path))?;
        warn(cloud_path, cloud.warnings);
        let projections: Vec<_> = project_cloud_with(
            &calib.camera,
            &calib.lidar_to_camera,
            &cloud.value,
            ProjectionOptions::default(),
        )
        .into_iter()
        .map(|(_, p)| p)
        .filter(|p| p.d > a.min_depth)
        .collect();
        let pairs = pair_lidar_with_prediction(&pred.value, &projections, a.max_range, space)
            .map_err(metrics_error)?;
        let rel = rel_error(&pairs).map_err(|_| {
            invalid(format!(
                "no usable LiDAR returns fall inside {}",
                pred_path.display()
            ))
        })?;
        eprintln!(
            "{}: rel {rel:.6} over {} points",
            pred_path.display(),
            pairs.len()
        );
        total_pairs += pairs.len();
        rels.push(rel);
        images.push(json!({
            "pred": pred_path.display().to_string(),
            "cloud": cloud_path.display().to_string(),
            "pairs": pairs.len(),
            "rel": rel,
        }));
    }
    let mean_rel = depthsynth::metrics::compensated_sum(rels.iter().copied()) / rels.len() as f64;
    emit(&json!({
        "space": space.to_string(),
        "max_range": a.max_range,
        "images": images,
        "pairs": total_pairs,
        "mean_rel": mean_rel,
        "rel": mean_rel,
    }));
    Ok(())
}

fn metrics(a: MetricsArgs) -> Result<()> {
    check_range("--max-range", a.max_range)?;
    let weights = LossWeights {
        lambda_depth: a.lambda_depth,
        ..LossWeights::default()
    };
    weights.validate().map_err(metrics_error)?;
    let cfg = SsimConfig {
        window: a.ssim_window,
        sigma: a.ssim_sigma,
        c1: a.ssim_k1 * a.ssim_k1,
        c2: a.ssim_k2 * a.ssim_k2,
    };
    cfg.validate().map_err(metrics_error)?;

    let mut grids = Vec::new();
    for p in [&a.reference, &a.predicted] {
        let d = load_depth(p).map_err(at(p))?;
        warn(p, d.warnings);
        grids.push(ImageGrid::from_depth(&d.value, a.max_range).map_err(metrics_error)?);
    }
    let loss = densedepth_loss(&grids[0], &grids[1], &weights, &cfg).map_err(metrics_error)?;
    emit(&serde_json::to_value(loss).expect("loss terms serialize"));
    Ok(())
}
