use std::f64::consts::PI;

use approx::assert_relative_eq;
use nalgebra::{Vector3, Vector4};
use proptest::prelude::*;

use bask::geometry::{CameraModel, Intrinsics, PixelCoord, Pose, WorldPoint};

fn vec3(range: f64) -> impl Strategy<Value = Vector3<f64>> {
    (-range..range, -range..range, -range..range).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

fn pose() -> impl Strategy<Value = Pose> {
    (vec3(1.0), -PI..PI, vec3(3.0)).prop_filter_map("degenerate axis", |(axis, angle, t)| {
        (axis.norm() > 1e-3).then(|| Pose::from_axis_angle(axis, angle, t))
    })
}

fn camera() -> impl Strategy<Value = CameraModel> {
    (16usize..640, 16usize..480, 20.0..800.0, 0.8..1.2, 0.0..1.0, 0.0..1.0, pose()).prop_map(
        |(w, h, f, aspect, cx, cy, pose)| {
            let k = Intrinsics::new(f, f * aspect, cx * w as f64, cy * h as f64, w, h).unwrap();
            CameraModel::new(k, pose)
        },
    )
}

fn pixel_in(cam: &CameraModel, fu: f64, fv: f64) -> PixelCoord {
    PixelCoord::new(fu * cam.width() as f64, fv * cam.height() as f64)
}

proptest! {
    #[test]
    fn pose_inverse_composes_to_identity(p in pose(), x in vec3(5.0)) {
        let x = WorldPoint::from(x);
        let back = p.compose(&p.inverse()).transform_point(&x);
        prop_assert!((back - x).norm() < 1e-12);
        let back = p.inverse().compose(&p).transform_point(&x);
        prop_assert!((back - x).norm() < 1e-12);
    }

    #[test]
    fn compose_applies_right_operand_first(a in pose(), b in pose(), x in vec3(5.0)) {
        let x = WorldPoint::from(x);
        let direct = a.transform_point(&b.transform_point(&x));
        prop_assert!((a.compose(&b).transform_point(&x) - direct).norm() < 1e-12);
    }

    #[test]
    fn homogeneous_matrix_agrees(p in pose(), x in vec3(5.0)) {
        let h = p.to_homogeneous() * Vector4::new(x.x, x.y, x.z, 1.0);
        let q = p.transform_point(&WorldPoint::from(x));
        prop_assert!((h.xyz() - q.coords).norm() < 1e-12);
        prop_assert_eq!(h.w, 1.0);
    }

    #[test]
    fn rotation_stays_orthonormal(a in pose(), b in pose()) {
        let r = *a.compose(&b).inverse().rotation();
        prop_assert!((r.transpose() * r - nalgebra::Matrix3::identity()).norm() < 1e-12);
        prop_assert!((r.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn backproject_then_project_is_identity(cam in camera(), fu in 0.0..1.0, fv in 0.0..1.0, d in 0.01..20.0) {
        let px = pixel_in(&cam, fu, fv);
        let world = cam.backproject(px, d).unwrap();
        let (back, depth) = cam.project(&world);
        prop_assert!(back.distance(&px) < 1e-9);
        prop_assert!((depth - d).abs() < 1e-9);
        prop_assert!(cam.in_frustum(&world));
    }

    #[test]
    fn backprojection_lies_on_the_pixel_ray(cam in camera(), fu in 0.0..1.0, fv in 0.0..1.0, d in 0.01..20.0) {
        let px = pixel_in(&cam, fu, fv);
        let offset = cam.backproject(px, d).unwrap() - cam.center();
        let ray = cam.ray_direction(px);
        prop_assert!((ray.norm() - 1.0).abs() < 1e-12);
        prop_assert!(offset.cross(&ray).norm() < 1e-9 * offset.norm().max(1.0));
        prop_assert!(offset.dot(&ray) > 0.0);
    }

    #[test]
    fn reprojection_between_cameras(src in camera(), dst in camera(), fu in 0.0..1.0, fv in 0.0..1.0, d in 0.1..10.0) {
        let px = pixel_in(&src, fu, fv);
        let world = src.backproject(px, d).unwrap();
        let (expected, z) = dst.project(&world);
        prop_assume!(z > 1e-2);
        let got = src.reproject_pixel(&dst, px, d).unwrap();
        prop_assert!(got.distance(&expected) < 1e-9 * expected.u.abs().max(expected.v.abs()).max(1.0));
    }

    #[test]
    fn reprojection_into_same_camera_is_identity(cam in camera(), fu in 0.0..1.0, fv in 0.0..1.0, d in 0.01..20.0) {
        let px = pixel_in(&cam, fu, fv);
        prop_assert!(cam.reproject_pixel(&cam, px, d).unwrap().distance(&px) < 1e-9);
    }

    #[test]
    fn points_behind_the_camera_are_outside_the_frustum(cam in camera(), fu in 0.0..1.0, fv in 0.0..1.0, d in 0.01..20.0) {
        let px = pixel_in(&cam, fu, fv);
        let front = cam.backproject(px, d).unwrap();
        let behind = cam.center() - (front - cam.center());
        prop_assert!(!cam.in_frustum(&behind));
    }

    #[test]
    fn normalized_pixels_round_trip(u in -100.0..800.0, v in -100.0..800.0, w in 1usize..1000, h in 1usize..1000) {
        let px = PixelCoord::new(u, v);
        let back = px.normalized(w, h).denormalized(w, h);
        prop_assert!(back.distance(&px) < 1e-9);
    }
}

#[test]
fn rejects_non_positive_depth() {
    let cam = CameraModel::new(Intrinsics::centered(100.0, 64, 48).unwrap(), Pose::identity());
    for d in [0.0, -1.0, f64::NAN, f64::INFINITY] {
        assert!(cam.backproject(PixelCoord::new(3.0, 4.0), d).is_err());
    }
}

#[test]
fn look_at_from_above() {
    let pose = Pose::look_at(WorldPoint::new(0.0, 0.0, 2.0), WorldPoint::origin(), Vector3::y()).unwrap();
    let cam = CameraModel::new(Intrinsics::centered(100.0, 64, 48).unwrap(), pose);
    let (px, depth) = cam.project(&WorldPoint::origin());
    assert_relative_eq!(px.u, 32.0, epsilon = 1e-12);
    assert_relative_eq!(px.v, 24.0, epsilon = 1e-12);
    assert_relative_eq!(depth, 2.0, epsilon = 1e-12);
}
