//! Pinhole camera model, rigid transforms and LiDAR-to-image projection.
//!
//! Camera frame follows the usual optical convention: x to the right, y
//! down, z along the optical axis. Extrinsics always map the LiDAR frame
//! into the camera frame.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::depthio::PointCloud;

pub type Point3 = nalgebra::Point3<f64>;

/// Tolerance for the orthonormality and determinant checks on rotations.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// Default near-plane clip for projection, in meters.
pub const DEFAULT_Z_MIN: f64 = 0.01;

/// The only extrinsics direction accepted in calibration files.
pub const LIDAR_TO_CAMERA: &str = "lidar_to_camera";

const PARALLEL_THRESHOLD: usize = 4096;

#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error("invalid camera model: {0}")]
    InvalidCamera(String),
    #[error("invalid rigid transform: {0}")]
    InvalidTransform(String),
    #[error("value out of domain: {0}")]
    Domain(String),
    #[error("malformed calibration: {0}")]
    Calibration(String),
}

/// Pinhole intrinsics plus image size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCamera")]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

#[derive(Deserialize)]
struct RawCamera {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
}

impl TryFrom<RawCamera> for CameraModel {
    type Error = GeometryError;

    fn try_from(raw: RawCamera) -> Result<Self, Self::Error> {
        CameraModel::new(raw.fx, raw.fy, raw.cx, raw.cy, raw.width, raw.height)
    }
}

impl CameraModel {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, GeometryError> {
        if ![fx, fy, cx, cy].iter().all(|v| v.is_finite()) {
            return Err(GeometryError::InvalidCamera(
                "intrinsics must be finite".into(),
            ));
        }
        if fx <= 0.0 || fy <= 0.0 {
            return Err(GeometryError::InvalidCamera(format!(
                "focal lengths must be positive (fx={fx}, fy={fy})"
            )));
        }
        if width == 0 || height == 0 {
            return Err(GeometryError::InvalidCamera(format!(
                "image size must be at least 1x1 (got {width}x{height})"
            )));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    /// Square-pixel camera whose horizontal field of view is `hfov_degrees`,
    /// principal point at the image center.
    pub fn from_horizontal_fov(
        hfov_degrees: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, GeometryError> {
        let f = fov_to_focal(hfov_degrees, width)?;
        Self::new(f, f, width as f64 / 2.0, height as f64 / 2.0, width, height)
    }

    pub fn from_json(text: &str) -> Result<Self, GeometryError> {
        serde_json::from_str(text).map_err(|e| GeometryError::Calibration(e.to_string()))
    }

    /// Ray direction in the camera frame through pixel coordinate `(u, v)`,
    /// scaled so that its z component is exactly 1.
    pub fn unproject_direction(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64
    }
}

/// Rotation followed by translation: `p ↦ R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeometryError> {
        if !rotation
            .iter()
            .chain(translation.iter())
            .all(|v| v.is_finite())
        {
            return Err(GeometryError::InvalidTransform(
                "entries must be finite".into(),
            ));
        }
        let gram = rotation.transpose() * rotation;
        let worst = (gram - Matrix3::identity()).amax();
        if worst > ROTATION_TOLERANCE {
            return Err(GeometryError::InvalidTransform(format!(
                "rotation is not orthonormal (max deviation {worst:e})"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > ROTATION_TOLERANCE {
            return Err(GeometryError::InvalidTransform(format!(
                "rotation determinant is {det}, expected 1"
            )));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Builds from a row-major rotation and a translation.
    pub fn from_arrays(rotation: [f64; 9], translation: [f64; 3]) -> Result<Self, GeometryError> {
        Self::new(
            Matrix3::from_row_slice(&rotation),
            Vector3::from(translation),
        )
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Rotation about `axis` (need not be normalized) by `angle` radians.
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64) -> Result<Self, GeometryError> {
        let norm = axis.norm();
        if !(norm.is_finite() && norm > 0.0) || !angle.is_finite() {
            return Err(GeometryError::InvalidTransform(
                "axis must be nonzero and finite".into(),
            ));
        }
        let axis = nalgebra::Unit::new_unchecked(axis / norm);
        let rot = nalgebra::Rotation3::from_axis_angle(&axis, angle);
        Self::new(*rot.matrix(), Vector3::zeros())
    }

    /// Camera-to-world pose for a camera at `eye` looking toward `target`,
    /// with image "up" as close to `up` as possible.
    pub fn look_at(
        eye: Vector3<f64>,
        target: Vector3<f64>,
        up: Vector3<f64>,
    ) -> Result<Self, GeometryError> {
        let forward = target - eye;
        if forward.norm() == 0.0 {
            return Err(GeometryError::InvalidTransform(
                "eye and target coincide".into(),
            ));
        }
        let z = forward.normalize();
        let right = z.cross(&up);
        if right.norm() < 1e-12 {
            return Err(GeometryError::InvalidTransform(
                "up vector is parallel to the viewing direction".into(),
            ));
        }
        let x = right.normalize();
        let y = z.cross(&x);
        Self::new(Matrix3::from_columns(&[x, y, z]), eye)
    }

    /// Axis change from a LiDAR frame (x forward, y left, z up) to the
    /// optical camera frame (x right, y down, z forward).
    pub fn lidar_axes_to_camera_axes() -> Self {
        Self {
            rotation: Matrix3::new(0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0),
            translation: Vector3::zeros(),
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn with_translation(mut self, translation: Vector3<f64>) -> Self {
        self.translation = translation;
        self
    }

    pub fn transform_point(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn rotation_row_major(&self) -> [f64; 9] {
        let r = &self.rotation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
        ]
    }

    /// Parses an extrinsics record; the `direction` field must be
    /// `"lidar_to_camera"`.
    pub fn from_extrinsics_json(text: &str) -> Result<Self, GeometryError> {
        let rec: ExtrinsicsRecord =
            serde_json::from_str(text).map_err(|e| GeometryError::Calibration(e.to_string()))?;
        rec.try_into()
    }
}

pub fn transform_point(t: &RigidTransform, p: &Point3) -> Point3 {
    t.transform_point(p)
}

pub fn invert_transform(t: &RigidTransform) -> RigidTransform {
    t.inverse()
}

/// Focal length in pixels for a field of view spanning `extent_pixels`.
pub fn fov_to_focal(fov_degrees: f64, extent_pixels: u32) -> Result<f64, GeometryError> {
    if !(fov_degrees > 0.0 && fov_degrees < 180.0) {
        return Err(GeometryError::Domain(format!(
            "field of view must lie in (0, 180) degrees, got {fov_degrees}"
        )));
    }
    if extent_pixels == 0 {
        return Err(GeometryError::Domain(
            "extent must be at least 1 pixel".into(),
        ));
    }
    let half = (fov_degrees / 2.0).to_radians();
    Ok((extent_pixels as f64 / 2.0) / half.tan())
}

/// A point on the image plane: `u` column, `v` row, `d` camera-frame z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectedPoint {
    pub u: f64,
    pub v: f64,
    pub d: f64,
}

impl ProjectedPoint {
    /// Integer pixel containing this projection.
    pub fn pixel(&self) -> (usize, usize) {
        (self.u.floor() as usize, self.v.floor() as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionOptions {
    /// Points with camera-frame z at or below this are discarded.
    pub z_min: f64,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        Self {
            z_min: DEFAULT_Z_MIN,
        }
    }
}

pub fn project_point(
    cam: &CameraModel,
    extrinsics: &RigidTransform,
    p: &Point3,
) -> Option<ProjectedPoint> {
    project_point_with(cam, extrinsics, p, ProjectionOptions::default())
}

pub fn project_point_with(
    cam: &CameraModel,
    extrinsics: &RigidTransform,
    p: &Point3,
    opts: ProjectionOptions,
) -> Option<ProjectedPoint> {
    let pc = extrinsics.transform_point(p);
    if pc.z.is_nan() || pc.z <= opts.z_min {
        return None;
    }
    let u = cam.fx * pc.x / pc.z + cam.cx;
    let v = cam.fy * pc.y / pc.z + cam.cy;
    cam.contains(u, v)
        .then_some(ProjectedPoint { u, v, d: pc.z })
}

/// Projects every point of `cloud`, keeping input order. Each entry carries
/// the index of its source point.
pub fn project_cloud(
    cam: &CameraModel,
    extrinsics: &RigidTransform,
    cloud: &PointCloud,
) -> Vec<(usize, ProjectedPoint)> {
    project_cloud_with(cam, extrinsics, cloud, ProjectionOptions::default())
}

pub fn project_cloud_with(
    cam: &CameraModel,
    extrinsics: &RigidTransform,
    cloud: &PointCloud,
    opts: ProjectionOptions,
) -> Vec<(usize, ProjectedPoint)> {
    let project = |(i, lp): (usize, &crate::depthio::LidarPoint)| {
        project_point_with(cam, extrinsics, &lp.position(), opts).map(|pp| (i, pp))
    };
    if cloud.points.len() >= PARALLEL_THRESHOLD {
        cloud
            .points
            .par_iter()
            .enumerate()
            .filter_map(project)
            .collect()
    } else {
        cloud
            .points
            .iter()
            .enumerate()
            .filter_map(project)
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct ExtrinsicsRecord {
    rotation: [f64; 9],
    translation: [f64; 3],
    direction: String,
}

impl TryFrom<ExtrinsicsRecord> for RigidTransform {
    type Error = GeometryError;

    fn try_from(rec: ExtrinsicsRecord) -> Result<Self, Self::Error> {
        if rec.direction != LIDAR_TO_CAMERA {
            return Err(GeometryError::Calibration(format!(
                "unsupported extrinsics direction {:?}, expected {LIDAR_TO_CAMERA:?}",
                rec.direction
            )));
        }
        RigidTransform::from_arrays(rec.rotation, rec.translation)
    }
}

/// Intrinsics and LiDAR-to-camera extrinsics stored together in one JSON
/// object (the union of the intrinsics and extrinsics keys).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub camera: CameraModel,
    pub lidar_to_camera: RigidTransform,
}

#[derive(Serialize, Deserialize)]
struct CalibrationRecord {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
    rotation: [f64; 9],
    translation: [f64; 3],
    direction: String,
}

impl Calibration {
    pub fn from_json(text: &str) -> Result<Self, GeometryError> {
        let rec: CalibrationRecord =
            serde_json::from_str(text).map_err(|e| GeometryError::Calibration(e.to_string()))?;
        let camera = CameraModel::new(rec.fx, rec.fy, rec.cx, rec.cy, rec.width, rec.height)?;
        let lidar_to_camera = ExtrinsicsRecord {
            rotation: rec.rotation,
            translation: rec.translation,
            direction: rec.direction,
        }
        .try_into()?;
        Ok(Self {
            camera,
            lidar_to_camera,
        })
    }

    pub fn to_json(&self) -> String {
        let c = &self.camera;
        let t = self.lidar_to_camera.translation();
        let rec = CalibrationRecord {
            fx: c.fx,
            fy: c.fy,
            cx: c.cx,
            cy: c.cy,
            width: c.width,
            height: c.height,
            rotation: self.lidar_to_camera.rotation_row_major(),
            translation: [t.x, t.y, t.z],
            direction: LIDAR_TO_CAMERA.to_string(),
        };
        let mut s = serde_json::to_string_pretty(&rec).expect("calibration serializes");
        s.push('\n');
        s
    }
}
