//! Synthetic depth-data toolkit.
//!
//! Renders procedural indoor rooms into RGB, depth and LiDAR products,
//! reads and writes the usual depth formats (PFM, 8-bit PNG, KITTI bin),
//! projects LiDAR into camera images, and evaluates depth predictions and
//! the depth/CycleGAN training objectives.

pub mod dataset;
pub mod depthio;
pub mod geometry;
pub mod metrics;
pub mod rng;
pub mod synth;

pub use dataset::{
    compose_manifest, split_manifest, validate_manifest, DatasetEntry, DatasetManifest, SourceTag,
};
pub use depthio::{DepthMap, PointCloud, QuantizedDepth};
pub use geometry::{Calibration, CameraModel, Point3, ProjectedPoint, RigidTransform};
pub use metrics::{ImageGrid, LossWeights, PairedDepthSamples, SampleSpace, SsimConfig};
pub use synth::{DepthMode, LidarConfig, Scene};
