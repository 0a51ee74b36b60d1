use depthsynth::depthio::quantize_depth;
use depthsynth::geometry::{project_cloud, CameraModel, RigidTransform};
use depthsynth::metrics::{pair_lidar_with_prediction, rel_error, SampleSpace};
use depthsynth::rng::SplitMix64;
use depthsynth::synth::{
    generate_frame, raycast_depth, render_rgb, simulate_lidar, DepthMode, LidarConfig,
    ProceduralRoom, Vec3,
};

fn small_camera() -> CameraModel {
    CameraModel::from_horizontal_fov(57.0, 64, 48).unwrap()
}

fn room_and_pose(seed: u64) -> (ProceduralRoom, RigidTransform) {
    let room = ProceduralRoom::generate(seed);
    let pose = room.random_camera_pose(&mut SplitMix64::new(seed ^ 0xABCD));
    (room, pose)
}

#[test]
fn perspective_equals_planar_over_cosine() {
    let cam = small_camera();
    for seed in 0..3 {
        let (room, pose) = room_and_pose(seed);
        let planar = raycast_depth(&room.scene, &cam, &pose, DepthMode::Planar).unwrap();
        let persp = raycast_depth(&room.scene, &cam, &pose, DepthMode::Perspective).unwrap();
        for row in 0..48 {
            for col in 0..64 {
                let ray = cam.unproject_direction(col as f64 + 0.5, row as f64 + 0.5);
                let cos = 1.0 / ray.norm();
                let (p, q) = (planar.get(col, row), persp.get(col, row));
                assert!(p > 0.0);
                assert!(q >= p);
                assert!(
                    (q - p / cos).abs() <= 1e-9,
                    "pixel ({col},{row}): {q} vs {}",
                    p / cos
                );
            }
        }
    }
}

#[test]
fn lidar_points_recast_to_the_same_surface() {
    let (room, pose) = room_and_pose(4);
    let cfg = LidarConfig {
        channels: 8,
        azimuth_step: 1.0,
        ..LidarConfig::default()
    };
    let lidar_pose = pose.compose(&RigidTransform::lidar_axes_to_camera_axes());
    let cloud = simulate_lidar(&room.scene, &lidar_pose, &cfg).unwrap();
    assert!(!cloud.is_empty() && cloud.len() <= 8 * 360);
    let origin = *lidar_pose.translation();
    for p in &cloud.points {
        let range = p.range();
        let dir = lidar_pose.transform_vector(&(p.position().coords / range));
        let hit = room.scene.cast(&origin, &dir);
        assert!((hit.t - range).abs() <= 1e-6);
    }
}

#[test]
fn lidar_point_count_is_bounded() {
    let (room, pose) = room_and_pose(6);
    let cfg = LidarConfig::default();
    let cloud = simulate_lidar(&room.scene, &pose, &cfg).unwrap();
    assert!(cloud.len() as f64 <= 32.0 * 360.0 / cfg.azimuth_step);
    // closed room, nothing closer than min_range: every ray returns
    assert_eq!(cloud.len(), 32 * 1800);
}

#[test]
fn frame_lidar_agrees_with_quantized_planar_depth() {
    let cam = small_camera();
    let cfg = LidarConfig {
        channels: 8,
        ..LidarConfig::default()
    };
    let (room, pose) = room_and_pose(8);
    let frame = generate_frame(
        &room.scene,
        &cam,
        &pose,
        &RigidTransform::lidar_axes_to_camera_axes(),
        &cfg,
    )
    .unwrap();
    let pred = quantize_depth(&frame.depth_planar, 10.0).unwrap();
    let projections: Vec<_> = project_cloud(&cam, &frame.calibration.lidar_to_camera, &frame.cloud)
        .into_iter()
        .map(|(_, p)| p)
        .collect();
    assert!(projections.len() > 50);
    let pairs =
        pair_lidar_with_prediction(&pred, &projections, 10.0, SampleSpace::Grayscale).unwrap();
    // most points land within one level of their own pixel's quantized depth
    let close = pairs
        .pairs()
        .iter()
        .filter(|(r, p)| (r - p).abs() <= 1.0)
        .count();
    assert!(
        close as f64 >= 0.9 * pairs.len() as f64,
        "{close}/{}",
        pairs.len()
    );
    assert!(rel_error(&pairs).unwrap() < 0.05);
}

#[test]
fn zero_offset_means_shared_origin() {
    let cam = small_camera();
    let (room, pose) = room_and_pose(9);
    let cfg = LidarConfig {
        channels: 2,
        azimuth_step: 10.0,
        ..LidarConfig::default()
    };
    let frame =
        generate_frame(&room.scene, &cam, &pose, &RigidTransform::identity(), &cfg).unwrap();
    // every LiDAR point, taken back to world, lies at its range from the camera center
    for p in &frame.cloud.points {
        let world = pose.transform_point(&p.position());
        assert!(((world - Vec3::zeros()).coords - pose.translation()).norm() - p.range() < 1e-9);
    }
    assert_eq!(
        frame.calibration.lidar_to_camera,
        RigidTransform::identity()
    );
}

#[test]
fn rendering_is_deterministic_across_thread_counts() {
    let cam = small_camera();
    let (room, pose) = room_and_pose(12);
    let cfg = LidarConfig {
        channels: 8,
        ..LidarConfig::default()
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                let f = generate_frame(
                    &room.scene,
                    &cam,
                    &pose,
                    &RigidTransform::lidar_axes_to_camera_axes(),
                    &cfg,
                )
                .unwrap();
                (f.rgb, f.depth_planar, f.depth_perspective, f.cloud)
            })
    };
    let a = run(1);
    let b = run(3);
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
    assert_eq!(a.2, b.2);
    assert_eq!(a.3, b.3);
    assert_eq!(render_rgb(&room.scene, &cam, &pose).unwrap(), a.0);
}
