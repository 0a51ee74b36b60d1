use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "depthsynth",
    version,
    about = "Synthetic depth data, LiDAR projection and depth metrics"
)]
pub struct Cli {
    /// Worker threads (default: all cores). Never changes output bytes.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert between PFM depth and 8-bit PNG depth.
    Convert(ConvertArgs),
    /// Project a KITTI point cloud into a calibrated camera.
    Project(ProjectArgs),
    /// Render RGB, depth and LiDAR products of a scene.
    Synth(SynthArgs),
    /// Compose a seeded dataset manifest.
    Compose(ComposeArgs),
    /// Relative distance error of predictions against LiDAR.
    Eval(EvalArgs),
    /// Depth-estimation loss terms between two depth images.
    Metrics(MetricsArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Conversion {
    Pfm2Png8,
    Png82Pfm,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// pfm-to-png8 or png8-to-pfm
    #[arg(value_parser = parse_conversion)]
    pub conversion: Conversion,
    pub input: PathBuf,
    pub output: PathBuf,
    /// Truncation range in meters for pfm-to-png8.
    #[arg(long, default_value_t = 10.0)]
    pub max_range: f64,
}

fn parse_conversion(s: &str) -> Result<Conversion, String> {
    match s {
        "pfm-to-png8" => Ok(Conversion::Pfm2Png8),
        "png8-to-pfm" => Ok(Conversion::Png82Pfm),
        _ => Err(format!(
            "unknown conversion {s:?} (expected pfm-to-png8 or png8-to-pfm)"
        )),
    }
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[arg(long)]
    pub cloud: PathBuf,
    #[arg(long)]
    pub calib: PathBuf,
    /// Near-plane clip in meters.
    #[arg(long, default_value_t = 0.01)]
    pub z_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DepthModeArg {
    Planar,
    Perspective,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Scene JSON file.
    #[arg(
        long,
        conflicts_with = "procedural",
        required_unless_present = "procedural"
    )]
    pub scene: Option<PathBuf>,
    /// Generate a procedural room from this seed instead of reading a scene.
    #[arg(long)]
    pub procedural: Option<u64>,
    /// Camera-to-world pose JSON. Required with --scene.
    #[arg(long)]
    pub pose: Option<PathBuf>,
    /// Seed for the random camera pose in a procedural room (default: the room seed).
    #[arg(long, conflicts_with = "pose")]
    pub pose_seed: Option<u64>,
    /// Horizontal field of view in degrees.
    #[arg(long, default_value_t = 57.0)]
    pub fov: f64,
    /// Image size as WIDTHxHEIGHT.
    #[arg(long, default_value = "640x480", value_parser = parse_size)]
    pub size: (u32, u32),
    /// Depth semantics of the written depth images.
    #[arg(long, value_enum, default_value_t = DepthModeArg::Perspective)]
    pub depth_mode: DepthModeArg,
    /// Truncation range for the 8-bit depth PNG.
    #[arg(long, default_value_t = 10.0)]
    pub max_range: f64,
    /// Output RGB PNG.
    #[arg(long)]
    pub rgb: Option<PathBuf>,
    /// Output PFM depth.
    #[arg(long)]
    pub depth_pfm: Option<PathBuf>,
    /// Output 8-bit PNG depth.
    #[arg(long)]
    pub depth_png: Option<PathBuf>,
    /// Output LiDAR cloud (KITTI bin).
    #[arg(long)]
    pub lidar: Option<PathBuf>,
    /// Output calibration JSON.
    #[arg(long)]
    pub calib_out: Option<PathBuf>,
    /// LiDAR-to-camera extrinsics JSON (default: standard axis change, zero offset).
    #[arg(long)]
    pub lidar_offset: Option<PathBuf>,
    #[arg(long, default_value_t = 32)]
    pub lidar_channels: u32,
    #[arg(long, default_value_t = 0.2)]
    pub lidar_azimuth_step: f64,
    #[arg(long, default_value_t = -25.0, allow_negative_numbers = true)]
    pub lidar_elevation_min: f64,
    #[arg(long, default_value_t = 15.0, allow_negative_numbers = true)]
    pub lidar_elevation_max: f64,
    #[arg(long, default_value_t = 100.0)]
    pub lidar_max_range: f64,
    #[arg(long, default_value_t = 0.3)]
    pub lidar_min_range: f64,
}

fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s
        .split_once('x')
        .ok_or_else(|| format!("expected WIDTHxHEIGHT, got {s:?}"))?;
    let w: u32 = w.parse().map_err(|_| format!("bad width in {s:?}"))?;
    let h: u32 = h.parse().map_err(|_| format!("bad height in {s:?}"))?;
    if w == 0 || h == 0 {
        return Err("image size must be at least 1x1".into());
    }
    Ok((w, h))
}

#[derive(Debug, Args)]
pub struct ComposeArgs {
    /// TAG=DIR with DIR/rgb and DIR/depth subdirectories (repeatable).
    #[arg(long = "source", required = true)]
    pub sources: Vec<String>,
    /// TAG=N entries to draw (repeatable).
    #[arg(long = "count")]
    pub counts: Vec<String>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SpaceArg {
    Grayscale,
    Metric,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Predicted 8-bit depth PNG (repeatable, paired with --cloud by position).
    #[arg(long, required = true)]
    pub pred: Vec<PathBuf>,
    /// LiDAR cloud in KITTI bin format (repeatable).
    #[arg(long, required = true)]
    pub cloud: Vec<PathBuf>,
    /// Calibration JSON: one shared file, or one per image.
    #[arg(long, required = true)]
    pub calib: Vec<PathBuf>,
    #[arg(long, default_value_t = 10.0)]
    pub max_range: f64,
    #[arg(long, value_enum, default_value_t = SpaceArg::Grayscale)]
    pub space: SpaceArg,
    /// Ignore LiDAR returns whose camera depth is at or below this (meters).
    #[arg(long, default_value_t = 0.0)]
    pub min_depth: f64,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    /// Ground-truth depth (PFM or 8-bit PNG).
    pub reference: PathBuf,
    /// Predicted depth (PFM or 8-bit PNG).
    pub predicted: PathBuf,
    /// Depth values are clipped to this range and scaled to [0, 1].
    #[arg(long, default_value_t = 10.0)]
    pub max_range: f64,
    #[arg(long, default_value_t = 0.1)]
    pub lambda_depth: f64,
    #[arg(long, default_value_t = 11)]
    pub ssim_window: usize,
    #[arg(long, default_value_t = 1.5)]
    pub ssim_sigma: f64,
    #[arg(long, default_value_t = 0.01)]
    pub ssim_k1: f64,
    #[arg(long, default_value_t = 0.03)]
    pub ssim_k2: f64,
}
