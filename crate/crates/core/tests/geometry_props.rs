use depthsynth::depthio::{LidarPoint, PointCloud};
use depthsynth::geometry::{
    fov_to_focal, invert_transform, project_cloud, project_point, transform_point, CameraModel,
    Point3, ProjectedPoint, RigidTransform,
};
use depthsynth::rng::SplitMix64;
use nalgebra::Vector3;
use proptest::prelude::*;

fn arb_transform() -> impl Strategy<Value = RigidTransform> {
    (
        prop::array::uniform3(-1.0f64..1.0),
        -std::f64::consts::PI..std::f64::consts::PI,
        prop::array::uniform3(-50.0f64..50.0),
    )
        .prop_filter_map("degenerate axis", |(axis, angle, t)| {
            let axis = Vector3::from(axis);
            (axis.norm() > 1e-3).then(|| {
                RigidTransform::from_axis_angle(axis, angle)
                    .unwrap()
                    .with_translation(Vector3::from(t))
            })
        })
}

fn arb_point() -> impl Strategy<Value = Point3> {
    prop::array::uniform3(-100.0f64..100.0).prop_map(Point3::from)
}

fn test_camera() -> CameraModel {
    CameraModel::new(525.0, 518.5, 319.5, 239.5, 640, 480).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn inverse_round_trips(t in arb_transform(), p in arb_point()) {
        let back = transform_point(&invert_transform(&t), &transform_point(&t, &p));
        prop_assert!((back - p).amax() <= 1e-9, "{back:?} vs {p:?}");
    }

    #[test]
    fn composed_transforms_stay_rigid(a in arb_transform(), b in arb_transform()) {
        let c = a.compose(&b);
        prop_assert!(RigidTransform::new(*c.rotation(), *c.translation()).is_ok());
    }

    #[test]
    fn inverse_projection_reprojects(u in 0.0f64..640.0, v in 0.0f64..480.0, d in 0.011f64..80.0) {
        let cam = test_camera();
        let p = Point3::new((u - cam.cx) * d / cam.fx, (v - cam.cy) * d / cam.fy, d);
        let pp = project_point(&cam, &RigidTransform::identity(), &p);
        // floating error can push a point sitting right at the far edge out of bounds
        if u < 639.999 && v < 479.999 {
            let pp = pp.expect("in-frustum point projects");
            prop_assert!((pp.u - u).abs() <= 1e-6 && (pp.v - v).abs() <= 1e-6 && (pp.d - d).abs() <= 1e-6);
        }
    }

    #[test]
    fn focal_length_decreases_with_fov(a in 1.0f64..178.0, gap in 1e-6f64..1.0, extent in 1u32..4000) {
        let b = a + gap;
        prop_assert!(fov_to_focal(a, extent).unwrap() > fov_to_focal(b, extent).unwrap());
    }
}

/// Scalar reference: explicit matrix arithmetic with no shared code path
/// beyond reading the transform's entries.
fn scalar_project(cam: &CameraModel, t: &RigidTransform, p: &LidarPoint) -> Option<ProjectedPoint> {
    let r = t.rotation_row_major();
    let tr = t.translation();
    let x = r[0] * p.x + r[1] * p.y + r[2] * p.z + tr.x;
    let y = r[3] * p.x + r[4] * p.y + r[5] * p.z + tr.y;
    let z = r[6] * p.x + r[7] * p.y + r[8] * p.z + tr.z;
    if z <= 0.01 {
        return None;
    }
    let u = cam.fx * x / z + cam.cx;
    let v = cam.fy * y / z + cam.cy;
    if u < 0.0 || v < 0.0 || u >= cam.width as f64 || v >= cam.height as f64 {
        return None;
    }
    Some(ProjectedPoint { u, v, d: z })
}

fn random_cloud(seed: u64, n: usize) -> PointCloud {
    let mut rng = SplitMix64::new(seed);
    PointCloud::new(
        (0..n)
            .map(|_| {
                LidarPoint::new(
                    rng.uniform(-20.0, 20.0),
                    rng.uniform(-20.0, 20.0),
                    rng.uniform(-5.0, 20.0),
                    Some(rng.next_f64()),
                )
            })
            .collect(),
    )
    .unwrap()
}

#[test]
fn project_cloud_matches_scalar_loop() {
    let cam = test_camera();
    let ext =
        RigidTransform::lidar_axes_to_camera_axes().with_translation(Vector3::new(0.05, -0.1, 0.2));
    for (seed, n) in [(1, 1000), (2, 10_000)] {
        let cloud = random_cloud(seed, n);
        let expected: Vec<_> = cloud
            .points
            .iter()
            .enumerate()
            .filter_map(|(i, p)| scalar_project(&cam, &ext, p).map(|pp| (i, pp)))
            .collect();
        let got = project_cloud(&cam, &ext, &cloud);
        assert!(!expected.is_empty());
        assert_eq!(got.len(), expected.len());
        for ((gi, gp), (ei, ep)) in got.iter().zip(&expected) {
            assert_eq!(gi, ei);
            assert!(
                (gp.u - ep.u).abs() < 1e-9
                    && (gp.v - ep.v).abs() < 1e-9
                    && (gp.d - ep.d).abs() < 1e-12
            );
        }
        // the library path must equal the per-point library call exactly
        let per_point: Vec<_> = cloud
            .points
            .iter()
            .enumerate()
            .filter_map(|(i, p)| project_point(&cam, &ext, &p.position()).map(|pp| (i, pp)))
            .collect();
        assert_eq!(got, per_point);
    }
}

#[test]
fn project_cloud_edge_cases() {
    let cam = test_camera();
    let id = RigidTransform::identity();
    assert!(project_cloud(&cam, &id, &PointCloud::default()).is_empty());
    let one = PointCloud::new(vec![LidarPoint::new(0.0, 0.0, 3.0, None)]).unwrap();
    let got = project_cloud(&cam, &id, &one);
    assert_eq!(got.len(), 1);
    assert_eq!(got[0].0, 0);
}

#[test]
fn project_cloud_is_thread_count_invariant() {
    let cam = test_camera();
    let ext = RigidTransform::lidar_axes_to_camera_axes();
    let cloud = random_cloud(5, 20_000);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| project_cloud(&cam, &ext, &cloud))
    };
    assert_eq!(run(1), run(4));
}
