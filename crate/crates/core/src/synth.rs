//! Analytic raycaster for box-and-sphere rooms.
//!
//! Produces the data products of one synchronized capture: a shaded RGB
//! image, planar and perspective depth, and a multi-ring LiDAR sweep. The
//! room is closed, so every ray from inside it hits something.
//!
//! World frame is z-up. Camera poses map the optical frame (x right, y
//! down, z forward) into the world; LiDAR poses map the sensor frame
//! (x forward, y left, z up) into the world.

use std::f64::consts::TAU;
use std::str::FromStr;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::depthio::{DepthIoError, DepthMap, LidarPoint, PointCloud};
use crate::geometry::{Calibration, CameraModel, GeometryError, RigidTransform};
use crate::metrics::ImageGrid;
use crate::rng::SplitMix64;

/// Ambient fraction added to the Lambertian term.
pub const AMBIENT: f64 = 0.1;

const HIT_EPSILON: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    DepthIo(#[from] DepthIoError),
}

pub type Vec3 = Vector3<f64>;

/// Sensor-to-world pose.
pub type SensorPose = RigidTransform;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DepthMode {
    /// Camera-frame z of the hit.
    Planar,
    /// Euclidean distance from the camera center to the hit.
    Perspective,
}

impl FromStr for DepthMode {
    type Err = SynthError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "planar" => Ok(DepthMode::Planar),
            "perspective" => Ok(DepthMode::Perspective),
            other => Err(SynthError::Config(format!("unknown depth mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    pub fn contains_strictly(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] > self.min[i] && p[i] < self.max[i])
    }

    fn is_proper(&self) -> bool {
        (0..3).all(|i| {
            self.min[i].is_finite() && self.max[i].is_finite() && self.min[i] < self.max[i]
        })
    }

    /// Slab test for a ray starting outside the box. Returns the entry
    /// parameter and the axis of the entry face.
    pub fn intersect_from_outside(&self, origin: &Vec3, dir: &Vec3) -> Option<(f64, usize)> {
        let mut t_near = f64::NEG_INFINITY;
        let mut t_far = f64::INFINITY;
        let mut axis = 0;
        for i in 0..3 {
            if dir[i] == 0.0 {
                if origin[i] < self.min[i] || origin[i] > self.max[i] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / dir[i];
            let (mut t0, mut t1) = (
                (self.min[i] - origin[i]) * inv,
                (self.max[i] - origin[i]) * inv,
            );
            if t0 > t1 {
                std::mem::swap(&mut t0, &mut t1);
            }
            if t0 > t_near {
                t_near = t0;
                axis = i;
            }
            t_far = t_far.min(t1);
        }
        (t_near <= t_far && t_near > HIT_EPSILON).then_some((t_near, axis))
    }

    /// Exit parameter and axis for a ray starting inside the box.
    pub fn exit_from_inside(&self, origin: &Vec3, dir: &Vec3) -> Option<(f64, usize)> {
        let mut best: Option<(f64, usize)> = None;
        for i in 0..3 {
            let bound = if dir[i] > 0.0 {
                self.max[i]
            } else if dir[i] < 0.0 {
                self.min[i]
            } else {
                continue;
            };
            let t = (bound - origin[i]) / dir[i];
            if best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, i));
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Primitive {
    Box {
        min: Vec3,
        max: Vec3,
        albedo: Vec3,
    },
    Sphere {
        center: Vec3,
        radius: f64,
        albedo: Vec3,
    },
}

impl Primitive {
    pub fn albedo(&self) -> Vec3 {
        match *self {
            Primitive::Box { albedo, .. } | Primitive::Sphere { albedo, .. } => albedo,
        }
    }

    fn bounds(&self) -> Aabb {
        match *self {
            Primitive::Box { min, max, .. } => Aabb::new(min, max),
            Primitive::Sphere { center, radius, .. } => {
                let r = Vec3::repeat(radius);
                Aabb::new(center - r, center + r)
            }
        }
    }

    fn contains(&self, p: &Vec3) -> bool {
        match *self {
            Primitive::Box { min, max, .. } => (0..3).all(|i| p[i] >= min[i] && p[i] <= max[i]),
            Primitive::Sphere { center, radius, .. } => (p - center).norm() <= radius,
        }
    }

    /// Nearest positive hit parameter and outward surface normal.
    fn intersect(&self, origin: &Vec3, dir: &Vec3) -> Option<(f64, Vec3)> {
        match *self {
            Primitive::Box { min, max, .. } => {
                let (t, axis) = Aabb::new(min, max).intersect_from_outside(origin, dir)?;
                let mut n = Vec3::zeros();
                n[axis] = -dir[axis].signum();
                Some((t, n))
            }
            Primitive::Sphere { center, radius, .. } => {
                let oc = origin - center;
                let a = dir.norm_squared();
                let half_b = oc.dot(dir);
                let c = oc.norm_squared() - radius * radius;
                let disc = half_b * half_b - a * c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                let t = [(-half_b - sq) / a, (-half_b + sq) / a]
                    .into_iter()
                    .find(|t| *t > HIT_EPSILON)?;
                let n = (origin + dir * t - center) / radius;
                Some((t, n))
            }
        }
    }
}

fn default_wall_albedo() -> Vec3 {
    Vec3::repeat(0.8)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub min: Vec3,
    pub max: Vec3,
    #[serde(default = "default_wall_albedo")]
    pub albedo: Vec3,
}

/// A closed axis-aligned room with primitives and a point light.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScene")]
pub struct Scene {
    pub room: Room,
    pub primitives: Vec<Primitive>,
    pub light: Vec3,
}

#[derive(Deserialize)]
struct RawScene {
    room: Room,
    #[serde(default)]
    primitives: Vec<Primitive>,
    light: Vec3,
}

impl TryFrom<RawScene> for Scene {
    type Error = SynthError;

    fn try_from(raw: RawScene) -> Result<Self, Self::Error> {
        Scene::new(raw.room, raw.primitives, raw.light)
    }
}

fn check_albedo(a: &Vec3, what: &str) -> Result<(), SynthError> {
    if a.iter().all(|c| (0.0..=1.0).contains(c)) {
        Ok(())
    } else {
        Err(SynthError::Config(format!(
            "{what} albedo must lie in [0, 1]"
        )))
    }
}

impl Scene {
    pub fn new(room: Room, primitives: Vec<Primitive>, light: Vec3) -> Result<Self, SynthError> {
        let bounds = Aabb::new(room.min, room.max);
        if !bounds.is_proper() {
            return Err(SynthError::Config(
                "room extents must be positive and finite".into(),
            ));
        }
        check_albedo(&room.albedo, "room")?;
        if !light.iter().all(|v| v.is_finite()) {
            return Err(SynthError::Config("light position must be finite".into()));
        }
        for (i, p) in primitives.iter().enumerate() {
            if let Primitive::Sphere { radius, .. } = p {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(SynthError::Config(format!(
                        "primitive {i}: radius must be positive"
                    )));
                }
            }
            let b = p.bounds();
            if !b.is_proper() {
                return Err(SynthError::Config(format!(
                    "primitive {i}: degenerate extent"
                )));
            }
            if !(bounds.contains_strictly(&b.min) && bounds.contains_strictly(&b.max)) {
                return Err(SynthError::Config(format!(
                    "primitive {i} is not strictly inside the room"
                )));
            }
            check_albedo(&p.albedo(), &format!("primitive {i}"))?;
        }
        Ok(Self {
            room,
            primitives,
            light,
        })
    }

    pub fn from_json(text: &str) -> Result<Self, SynthError> {
        serde_json::from_str(text).map_err(|e| SynthError::Config(format!("scene: {e}")))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scene serializes");
        s.push('\n');
        s
    }

    fn room_box(&self) -> Aabb {
        Aabb::new(self.room.min, self.room.max)
    }

    /// Errors unless `p` is strictly inside the room and outside every
    /// primitive.
    pub fn check_viewpoint(&self, p: &Vec3) -> Result<(), SynthError> {
        if !self.room_box().contains_strictly(p) {
            return Err(SynthError::Config(format!(
                "sensor at ({:.3}, {:.3}, {:.3}) is outside the room",
                p.x, p.y, p.z
            )));
        }
        if let Some(i) = self.primitives.iter().position(|prim| prim.contains(p)) {
            return Err(SynthError::Config(format!(
                "sensor is inside primitive {i}"
            )));
        }
        Ok(())
    }

    /// Nearest surface along `origin + t·dir`, `t > 0`. `origin` must be a
    /// valid viewpoint.
    pub fn cast(&self, origin: &Vec3, dir: &Vec3) -> Hit {
        let (t_wall, axis) = self
            .room_box()
            .exit_from_inside(origin, dir)
            .expect("ray direction is nonzero");
        let mut normal = Vec3::zeros();
        normal[axis] = -dir[axis].signum();
        let mut best = Hit {
            t: t_wall,
            normal,
            albedo: self.room.albedo,
        };
        for p in &self.primitives {
            if let Some((t, n)) = p.intersect(origin, dir) {
                if t < best.t {
                    best = Hit {
                        t,
                        normal: n,
                        albedo: p.albedo(),
                    };
                }
            }
        }
        best
    }

    fn shade(&self, origin: &Vec3, dir: &Vec3, hit: &Hit) -> Vec3 {
        let point = origin + dir * hit.t;
        let to_light = self.light - point;
        let lambert = if to_light.norm() > 0.0 {
            hit.normal.dot(&to_light.normalize()).max(0.0)
        } else {
            0.0
        };
        (hit.albedo * (lambert + AMBIENT)).map(|c| c.clamp(0.0, 1.0))
    }
}

/// Surface hit: ray parameter, unit normal, surface color.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub normal: Vec3,
    pub albedo: Vec3,
}

struct PixelSample {
    hit: Hit,
    dir_norm: f64,
    color: Vec3,
}

/// Traces one ray per pixel center. Directions are scaled to unit
/// camera-frame z, so the hit parameter is the planar depth.
fn trace_pixels(
    scene: &Scene,
    cam: &CameraModel,
    pose: &SensorPose,
) -> Result<Vec<PixelSample>, SynthError> {
    let origin = *pose.translation();
    scene.check_viewpoint(&origin)?;
    let (w, h) = (cam.width as usize, cam.height as usize);
    Ok((0..w * h)
        .into_par_iter()
        .map(|i| {
            let (col, row) = (i % w, i / w);
            let dir_cam = cam.unproject_direction(col as f64 + 0.5, row as f64 + 0.5);
            let dir = pose.transform_vector(&dir_cam);
            let hit = scene.cast(&origin, &dir);
            PixelSample {
                hit,
                dir_norm: dir_cam.norm(),
                color: scene.shade(&origin, &dir, &hit),
            }
        })
        .collect())
}

fn depth_from_samples(
    cam: &CameraModel,
    samples: &[PixelSample],
    mode: DepthMode,
) -> Result<DepthMap, SynthError> {
    let values = samples
        .iter()
        .map(|s| match mode {
            DepthMode::Planar => s.hit.t,
            DepthMode::Perspective => s.hit.t * s.dir_norm,
        })
        .collect();
    Ok(DepthMap::new(
        cam.width as usize,
        cam.height as usize,
        values,
    )?)
}

fn rgb_from_samples(cam: &CameraModel, samples: &[PixelSample]) -> ImageGrid {
    let values = samples
        .iter()
        .flat_map(|s| [s.color.x, s.color.y, s.color.z])
        .collect();
    ImageGrid::new(cam.width as usize, cam.height as usize, 3, values)
        .expect("shaded colors are clamped")
}

pub fn raycast_depth(
    scene: &Scene,
    cam: &CameraModel,
    pose: &SensorPose,
    mode: DepthMode,
) -> Result<DepthMap, SynthError> {
    depth_from_samples(cam, &trace_pixels(scene, cam, pose)?, mode)
}

/// Lambertian shading of the nearest hit with a fixed ambient term, no
/// shadows.
pub fn render_rgb(
    scene: &Scene,
    cam: &CameraModel,
    pose: &SensorPose,
) -> Result<ImageGrid, SynthError> {
    Ok(rgb_from_samples(cam, &trace_pixels(scene, cam, pose)?))
}

/// Spinning multi-ring LiDAR model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LidarConfig {
    pub channels: u32,
    pub elevation_min: f64,
    pub elevation_max: f64,
    pub azimuth_step: f64,
    pub max_range: f64,
    pub min_range: f64,
}

impl Default for LidarConfig {
    /// Roughly a 32-beam unit: uniform rings over −25°..+15°.
    fn default() -> Self {
        Self {
            channels: 32,
            elevation_min: -25.0,
            elevation_max: 15.0,
            azimuth_step: 0.2,
            max_range: 100.0,
            min_range: 0.3,
        }
    }
}

impl LidarConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Config(format!("lidar: {m}")));
        if self.channels == 0 {
            return bad("channels must be >= 1");
        }
        if !self.elevation_min.is_finite()
            || !self.elevation_max.is_finite()
            || self.elevation_min >= self.elevation_max
        {
            return bad("elevation_min must be below elevation_max");
        }
        if !(self.azimuth_step > 0.0 && self.azimuth_step <= 360.0) {
            return bad("azimuth_step must lie in (0, 360]");
        }
        if !(self.min_range >= 0.0 && self.min_range < self.max_range) {
            return bad("need 0 <= min_range < max_range");
        }
        Ok(())
    }

    /// Ring elevations in degrees, lowest first. A single channel sits
    /// midway between the limits.
    pub fn elevations(&self) -> Vec<f64> {
        let n = self.channels as usize;
        if n == 1 {
            return vec![(self.elevation_min + self.elevation_max) / 2.0];
        }
        let span = self.elevation_max - self.elevation_min;
        (0..n)
            .map(|i| self.elevation_min + span * i as f64 / (n - 1) as f64)
            .collect()
    }

    /// Number of azimuth samples per ring; never exceeds `360 / step`.
    pub fn azimuth_count(&self) -> usize {
        ((360.0 / self.azimuth_step) + 1e-9).floor().max(1.0) as usize
    }
}

pub fn simulate_lidar(
    scene: &Scene,
    pose: &SensorPose,
    cfg: &LidarConfig,
) -> Result<PointCloud, SynthError> {
    cfg.validate()?;
    let origin = *pose.translation();
    scene.check_viewpoint(&origin)?;
    let n_az = cfg.azimuth_count();
    let rays: Vec<(f64, f64)> = cfg
        .elevations()
        .into_iter()
        .flat_map(|e| (0..n_az).map(move |k| (e, k as f64 * cfg.azimuth_step)))
        .collect();
    let points = rays
        .into_par_iter()
        .filter_map(|(elev, az)| {
            let (e, a) = (elev.to_radians(), az.to_radians());
            let dir = Vec3::new(e.cos() * a.cos(), e.cos() * a.sin(), e.sin());
            let hit = scene.cast(&origin, &pose.transform_vector(&dir));
            (hit.t >= cfg.min_range && hit.t <= cfg.max_range).then(|| {
                let p = dir * hit.t;
                LidarPoint::new(p.x, p.y, p.z, Some(1.0))
            })
        })
        .collect();
    Ok(PointCloud::new(points)?)
}

/// All products of one synchronized capture.
#[derive(Debug, Clone)]
pub struct Frame {
    pub rgb: ImageGrid,
    pub depth_planar: DepthMap,
    pub depth_perspective: DepthMap,
    pub cloud: PointCloud,
    pub calibration: Calibration,
}

/// Renders every product from one camera pose. `lidar_offset` maps the
/// LiDAR frame into the camera frame, so the LiDAR pose is
/// `camera_pose ∘ lidar_offset` and the offset doubles as the projection
/// extrinsics.
pub fn generate_frame(
    scene: &Scene,
    cam: &CameraModel,
    camera_pose: &SensorPose,
    lidar_offset: &RigidTransform,
    cfg: &LidarConfig,
) -> Result<Frame, SynthError> {
    let samples = trace_pixels(scene, cam, camera_pose)?;
    let lidar_pose = camera_pose.compose(lidar_offset);
    Ok(Frame {
        rgb: rgb_from_samples(cam, &samples),
        depth_planar: depth_from_samples(cam, &samples, DepthMode::Planar)?,
        depth_perspective: depth_from_samples(cam, &samples, DepthMode::Perspective)?,
        cloud: simulate_lidar(scene, &lidar_pose, cfg)?,
        calibration: Calibration {
            camera: *cam,
            lidar_to_camera: *lidar_offset,
        },
    })
}

// ---------------------------------------------------------------------------
// pose files

#[derive(Deserialize)]
#[serde(untagged)]
enum PoseRecord {
    Matrix {
        rotation: [f64; 9],
        translation: [f64; 3],
    },
    LookAt {
        eye: [f64; 3],
        target: [f64; 3],
        #[serde(default = "world_up")]
        up: [f64; 3],
    },
}

fn world_up() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

/// Parses a sensor-to-world pose: either `{"rotation":[9], "translation":[3]}`
/// or `{"eye":[3], "target":[3], "up":[3]}` (`up` defaults to +z).
pub fn pose_from_json(text: &str) -> Result<SensorPose, SynthError> {
    let rec: PoseRecord =
        serde_json::from_str(text).map_err(|e| SynthError::Config(format!("pose: {e}")))?;
    Ok(match rec {
        PoseRecord::Matrix {
            rotation,
            translation,
        } => RigidTransform::from_arrays(rotation, translation)?,
        PoseRecord::LookAt { eye, target, up } => {
            RigidTransform::look_at(Vec3::from(eye), Vec3::from(target), Vec3::from(up))?
        }
    })
}

// ---------------------------------------------------------------------------
// procedural rooms

/// A random furnished room with a clear vertical cylinder around its
/// center, where cameras can be placed.
#[derive(Debug, Clone)]
pub struct ProceduralRoom {
    pub scene: Scene,
    pub clear_center: Vec3,
    pub clear_radius: f64,
}

const CLEAR_RADIUS: f64 = 1.2;
const WALL_MARGIN: f64 = 0.05;

impl ProceduralRoom {
    pub fn generate(seed: u64) -> Self {
        let mut rng = SplitMix64::new(seed);
        let size = Vec3::new(
            rng.uniform(4.0, 7.0),
            rng.uniform(4.0, 7.0),
            rng.uniform(2.5, 3.2),
        );
        let center = Vec3::new(size.x / 2.0, size.y / 2.0, 0.0);
        let room = Room {
            min: Vec3::zeros(),
            max: size,
            albedo: Vec3::new(
                rng.uniform(0.6, 0.9),
                rng.uniform(0.6, 0.9),
                rng.uniform(0.6, 0.9),
            ),
        };
        let count = 4 + rng.below(5) as usize;
        let mut primitives = Vec::with_capacity(count);
        let mut attempts = 0;
        while primitives.len() < count && attempts < 1000 {
            attempts += 1;
            let albedo = Vec3::new(
                rng.uniform(0.2, 0.95),
                rng.uniform(0.2, 0.95),
                rng.uniform(0.2, 0.95),
            );
            let prim = if rng.below(2) == 0 {
                let half = Vec3::new(
                    rng.uniform(0.15, 0.6),
                    rng.uniform(0.15, 0.6),
                    rng.uniform(0.2, 0.9),
                );
                let c = Vec3::new(
                    rng.uniform(half.x + WALL_MARGIN, size.x - half.x - WALL_MARGIN),
                    rng.uniform(half.y + WALL_MARGIN, size.y - half.y - WALL_MARGIN),
                    half.z + WALL_MARGIN,
                );
                let footprint = half.xy().norm();
                if (c.xy() - center.xy()).norm() - footprint <= CLEAR_RADIUS {
                    continue;
                }
                Primitive::Box {
                    min: c - half,
                    max: c + half,
                    albedo,
                }
            } else {
                let r = rng.uniform(0.2, 0.6);
                let m = r + WALL_MARGIN;
                let c = Vec3::new(
                    rng.uniform(m, size.x - m),
                    rng.uniform(m, size.y - m),
                    rng.uniform(m, size.z - m),
                );
                if (c.xy() - center.xy()).norm() - r <= CLEAR_RADIUS {
                    continue;
                }
                Primitive::Sphere {
                    center: c,
                    radius: r,
                    albedo,
                }
            };
            primitives.push(prim);
        }
        let light = Vec3::new(center.x, center.y, size.z - 0.2);
        let scene =
            Scene::new(room, primitives, light).expect("procedural scene is valid by construction");
        Self {
            scene,
            clear_center: Vec3::new(center.x, center.y, size.z / 2.0),
            clear_radius: CLEAR_RADIUS,
        }
    }

    /// Camera pose inside the clear cylinder: height 1.0–1.6 m, random
    /// heading, pitch within ±10°.
    pub fn random_camera_pose(&self, rng: &mut SplitMix64) -> SensorPose {
        let r = 0.4 * rng.next_f64().sqrt();
        let phi = rng.uniform(0.0, TAU);
        let height = rng.uniform(1.0, 1.6).min(self.scene.room.max.z - 0.3);
        let eye = Vec3::new(
            self.clear_center.x + r * phi.cos(),
            self.clear_center.y + r * phi.sin(),
            height,
        );
        let yaw = rng.uniform(0.0, TAU);
        let pitch = rng.uniform(-10.0, 10.0).to_radians();
        let fwd = Vec3::new(
            yaw.cos() * pitch.cos(),
            yaw.sin() * pitch.cos(),
            pitch.sin(),
        );
        RigidTransform::look_at(eye, eye + fwd, Vec3::z())
            .expect("pitch is bounded away from vertical")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn empty_room() -> Scene {
        Scene::new(
            Room {
                min: Vec3::new(-5.0, -5.0, -5.0),
                max: Vec3::new(5.0, 5.0, 5.0),
                albedo: Vec3::repeat(0.5),
            },
            vec![],
            Vec3::new(0.0, 0.0, 4.0),
        )
        .unwrap()
    }

    #[test]
    fn fronto_parallel_wall_has_constant_planar_depth() {
        // camera at z = 2 looking down +z towards the wall at z = 5: D = 3
        let scene = empty_room();
        let cam = CameraModel::new(20.0, 20.0, 8.0, 6.0, 16, 12).unwrap();
        let pose = RigidTransform::from_translation(Vec3::new(0.0, 0.0, 2.0));
        let d = raycast_depth(&scene, &cam, &pose, DepthMode::Planar).unwrap();
        assert!(d.values().iter().all(|v| (v - 3.0).abs() < 1e-12));

        let p = raycast_depth(&scene, &cam, &pose, DepthMode::Perspective).unwrap();
        // corner pixel (0, 0): ray (−7.5/20, −5.5/20, 1), cos θ = 1/|ray|
        let ray = Vec3::new(-7.5 / 20.0, -5.5 / 20.0, 1.0);
        assert_abs_diff_eq!(p.get(0, 0), 3.0 * ray.norm(), epsilon = 1e-12);
    }

    #[test]
    fn sphere_on_axis() {
        let mut scene = empty_room();
        scene.primitives.push(Primitive::Sphere {
            center: Vec3::new(0.0, 0.0, 3.0),
            radius: 0.5,
            albedo: Vec3::repeat(0.5),
        });
        // odd size so the center pixel ray is the optical axis
        let cam = CameraModel::new(30.0, 30.0, 7.5, 5.5, 15, 11).unwrap();
        let pose = RigidTransform::identity();
        let d = raycast_depth(&scene, &cam, &pose, DepthMode::Planar).unwrap();
        assert_abs_diff_eq!(d.get(7, 5), 2.5, epsilon = 1e-12);
    }

    #[test]
    fn viewpoint_checks() {
        let scene = empty_room();
        let cam = CameraModel::new(10.0, 10.0, 2.0, 2.0, 4, 4).unwrap();
        let outside = RigidTransform::from_translation(Vec3::new(6.0, 0.0, 0.0));
        assert!(matches!(
            raycast_depth(&scene, &cam, &outside, DepthMode::Planar),
            Err(SynthError::Config(_))
        ));
        assert!(matches!(
            simulate_lidar(&scene, &outside, &LidarConfig::default()),
            Err(SynthError::Config(_))
        ));
        let mut boxed = scene.clone();
        boxed.primitives.push(Primitive::Box {
            min: Vec3::repeat(-1.0),
            max: Vec3::repeat(1.0),
            albedo: Vec3::zeros(),
        });
        assert!(
            raycast_depth(&boxed, &cam, &RigidTransform::identity(), DepthMode::Planar).is_err()
        );
    }

    #[test]
    fn scene_validation() {
        let room = Room {
            min: Vec3::zeros(),
            max: Vec3::repeat(3.0),
            albedo: Vec3::repeat(0.5),
        };
        let poking = Primitive::Sphere {
            center: Vec3::new(0.2, 1.0, 1.0),
            radius: 0.3,
            albedo: Vec3::repeat(0.5),
        };
        assert!(Scene::new(room, vec![poking], Vec3::repeat(1.0)).is_err());
        let flat = Room {
            max: Vec3::new(3.0, 3.0, 0.0),
            ..room
        };
        assert!(Scene::new(flat, vec![], Vec3::repeat(1.0)).is_err());
        let bright = Primitive::Box {
            min: Vec3::repeat(1.0),
            max: Vec3::repeat(2.0),
            albedo: Vec3::repeat(1.5),
        };
        assert!(Scene::new(room, vec![bright], Vec3::repeat(1.0)).is_err());
    }

    #[test]
    fn scene_json_round_trip() {
        let text = r#"{"room":{"min":[0,0,0],"max":[4,4,3]},
            "primitives":[{"type":"box","min":[1,1,0.1],"max":[2,2,1],"albedo":[0.5,0.2,0.1]},
                          {"type":"sphere","center":[3,3,1.5],"radius":0.4,"albedo":[0.1,0.9,0.1]}],
            "light":[2,2,2.8]}"#;
        let scene = Scene::from_json(text).unwrap();
        assert_eq!(scene.room.albedo, default_wall_albedo());
        assert_eq!(scene.primitives.len(), 2);
        assert_eq!(Scene::from_json(&scene.to_json()).unwrap(), scene);
        assert!(Scene::from_json(r#"{"room":{"min":[0,0,0],"max":[1,1,1]},"primitives":[{"type":"cone"}],"light":[0,0,0]}"#).is_err());
    }

    #[test]
    fn shading_extremes() {
        // light straight ahead of a wall: head-on incidence on the center pixel
        let mut scene = empty_room();
        scene.light = Vec3::new(0.0, 0.0, 0.0);
        let cam = CameraModel::new(10.0, 10.0, 0.5, 0.5, 1, 1).unwrap();
        let rgb = render_rgb(&scene, &cam, &RigidTransform::identity()).unwrap();
        assert_abs_diff_eq!(rgb.pixel(0, 0)[0], 0.5 * (1.0 + AMBIENT), epsilon = 1e-12);

        // light in the plane of the hit wall: grazing incidence, ambient only
        scene.light = Vec3::new(4.0, 0.0, 5.0);
        let rgb = render_rgb(&scene, &cam, &RigidTransform::identity()).unwrap();
        assert_abs_diff_eq!(rgb.pixel(0, 0)[0], 0.5 * AMBIENT, epsilon = 1e-12);
    }

    #[test]
    fn lidar_single_ring_range() {
        let scene = empty_room();
        let cfg = LidarConfig {
            channels: 1,
            elevation_min: -1.0,
            elevation_max: 1.0,
            azimuth_step: 90.0,
            max_range: 100.0,
            min_range: 0.3,
        };
        let pose = RigidTransform::from_translation(Vec3::new(2.0, 0.0, 0.0));
        let cloud = simulate_lidar(&scene, &pose, &cfg).unwrap();
        // azimuth 0 looks along +x toward the wall at x = 5
        assert_eq!(cloud.len(), 4);
        assert_abs_diff_eq!(cloud.points[0].range(), 3.0, epsilon = 1e-9);
        assert_eq!(cloud.points[0].intensity, Some(1.0));

        let short = LidarConfig {
            max_range: 2.5,
            ..cfg
        };
        let cloud = simulate_lidar(&scene, &pose, &short).unwrap();
        assert!(cloud.points.iter().all(|p| p.range() <= 2.5));
        assert_eq!(cloud.len(), 0);
    }

    #[test]
    fn lidar_config_validation_and_counts() {
        let ok = LidarConfig::default();
        assert!(ok.validate().is_ok());
        assert_eq!(ok.azimuth_count(), 1800);
        assert_eq!(
            LidarConfig {
                azimuth_step: 0.7,
                ..ok
            }
            .azimuth_count(),
            514
        );
        for bad in [
            LidarConfig { channels: 0, ..ok },
            LidarConfig {
                elevation_min: 20.0,
                ..ok
            },
            LidarConfig {
                azimuth_step: 0.0,
                ..ok
            },
            LidarConfig {
                azimuth_step: 361.0,
                ..ok
            },
            LidarConfig {
                min_range: 200.0,
                ..ok
            },
        ] {
            assert!(bad.validate().is_err());
        }
        let e = LidarConfig { channels: 3, ..ok }.elevations();
        assert_eq!(e, vec![-25.0, -5.0, 15.0]);
    }

    #[test]
    fn pose_files() {
        let m =
            pose_from_json(r#"{"rotation":[1,0,0,0,1,0,0,0,1],"translation":[1,2,3]}"#).unwrap();
        assert_eq!(*m.translation(), Vec3::new(1.0, 2.0, 3.0));
        let l = pose_from_json(r#"{"eye":[1,1,1],"target":[2,1,1]}"#).unwrap();
        assert_abs_diff_eq!(l.transform_vector(&Vec3::z()), Vec3::x(), epsilon = 1e-15);
        assert!(pose_from_json(r#"{"eye":[1,1,1]}"#).is_err());
    }

    #[test]
    fn procedural_rooms_are_valid_and_reproducible() {
        for seed in 0..20 {
            let a = ProceduralRoom::generate(seed);
            let b = ProceduralRoom::generate(seed);
            assert_eq!(a.scene, b.scene);
            assert!(a.scene.primitives.len() >= 4);
            let mut rng = SplitMix64::new(seed);
            for _ in 0..10 {
                let pose = a.random_camera_pose(&mut rng);
                a.scene.check_viewpoint(pose.translation()).unwrap();
            }
        }
    }
}
