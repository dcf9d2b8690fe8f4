use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Shape, SyntheticScene, DESCRIPTOR_DIM};
use crate::descriptor::{distance_map, DescriptorImage, DistanceMap, ReferenceDescriptor};
use crate::error::{Error, Result};
use crate::geometry::{CameraModel, WorldPoint};
use crate::grid::{DepthMap, Grid};
use crate::particle_filter::Measurement;

/// Rays start this far past their origin to avoid self-intersection.
const RAY_EPS: f64 = 1e-12;
/// Relative slack when testing whether a surface point is the first hit.
const VISIBILITY_TOL: f64 = 1e-6;

/// Nearest intersection along `origin + s * dir`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub s: f64,
    /// `None` for the ground plane.
    pub object: Option<usize>,
    /// Hit point in the object's frame (world frame for the ground).
    pub local: WorldPoint,
}

fn intersect_shape(shape: &Shape, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<f64> {
    match *shape {
        Shape::Sphere { radius } => {
            let a = d.dot(d);
            let b = o.dot(d);
            let c = o.dot(o) - radius * radius;
            let disc = b * b - a * c;
            if disc < 0.0 {
                return None;
            }
            let sq = disc.sqrt();
            [(-b - sq) / a, (-b + sq) / a].into_iter().find(|s| *s > RAY_EPS)
        }
        Shape::Cuboid { half_extents } => {
            let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
            for i in 0..3 {
                if d[i] == 0.0 {
                    if o[i].abs() > half_extents[i] {
                        return None;
                    }
                    continue;
                }
                let a = (-half_extents[i] - o[i]) / d[i];
                let b = (half_extents[i] - o[i]) / d[i];
                lo = lo.max(a.min(b));
                hi = hi.min(a.max(b));
            }
            if lo > hi {
                None
            } else {
                [lo, hi].into_iter().find(|s| *s > RAY_EPS)
            }
        }
        Shape::Disk { radius } => {
            if d.z == 0.0 {
                return None;
            }
            let s = -o.z / d.z;
            let p = o + s * d;
            (s > RAY_EPS && p.x * p.x + p.y * p.y <= radius * radius).then_some(s)
        }
    }
}

/// First surface hit by the ray at time `t`; ties go to the lower object
/// index, and objects win over the ground.
pub fn intersect_ray(scene: &SyntheticScene, t: usize, origin: &WorldPoint, dir: &Vector3<f64>) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    for (i, obj) in scene.objects.iter().enumerate() {
        let pose = obj.track.at(t);
        let o = pose.inverse_transform_point(origin).coords;
        let d = pose.inverse_transform_vector(dir);
        if let Some(s) = intersect_shape(&obj.shape, &o, &d) {
            if best.is_none_or(|b| s < b.s) {
                best = Some(Hit { s, object: Some(i), local: WorldPoint::from(o + s * d) });
            }
        }
    }
    if let Some(h) = scene.ground_height {
        if dir.z != 0.0 {
            let s = (h - origin.z) / dir.z;
            if s > RAY_EPS && best.is_none_or(|b| s < b.s) {
                best = Some(Hit { s, object: None, local: origin + s * dir });
            }
        }
    }
    best
}

/// In the frustum and not hidden behind another surface.
pub(crate) fn point_visible(scene: &SyntheticScene, t: usize, camera: &CameraModel, p: &WorldPoint) -> bool {
    if !camera.in_frustum(p) {
        return false;
    }
    let origin = camera.center();
    // parametrized so that s = 1 at p
    let dir = p - origin;
    match intersect_ray(scene, t, &origin, &dir) {
        Some(h) => h.s >= 1.0 - VISIBILITY_TOL,
        None => true,
    }
}

/// Symmetry-breaking gain of every object for one camera at `t`.
fn context_gains(scene: &SyntheticScene, t: usize, camera: &CameraModel) -> Vec<f64> {
    scene
        .objects
        .iter()
        .map(|o| match o.context {
            Some(a) => {
                let p = scene.objects[a.object].track.at(t).transform_point(&a.local);
                if point_visible(scene, t, camera, &p) {
                    1.0
                } else {
                    0.0
                }
            }
            None => 1.0,
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KeypointTruth {
    pub position: WorldPoint,
    /// Visible to at least one camera.
    pub visible: bool,
}

/// Everything one camera sees at one timestep.
#[derive(Clone, Debug)]
pub struct RenderedView {
    pub camera: CameraModel,
    pub descriptors: DescriptorImage,
    /// Object index per pixel (row-major), `None` for background.
    pub labels: Vec<Option<usize>>,
    pub depth_clean: DepthMap,
    /// Noisy depth with dropouts as NaN.
    pub depth: DepthMap,
    /// One per reference descriptor.
    pub distances: Vec<DistanceMap>,
}

#[derive(Clone, Debug)]
pub struct FrameRender {
    pub t: usize,
    pub views: Vec<RenderedView>,
    pub truth: Vec<KeypointTruth>,
}

impl FrameRender {
    /// Per-camera measurements for reference `k`.
    pub fn measurements(&self, k: usize) -> Result<Vec<Measurement>> {
        self.views.iter().map(|v| Measurement::new(v.camera, v.distances[k].clone(), v.depth.clone())).collect()
    }
}

fn render_view(
    scene: &SyntheticScene,
    t: usize,
    cam_index: usize,
    refs: &[ReferenceDescriptor],
    seed: u64,
) -> Result<RenderedView> {
    let camera = scene.cameras[cam_index][t];
    let (w, h) = (camera.width(), camera.height());
    let k = camera.intrinsics;
    let rot = *camera.pose.rotation();
    let origin = camera.center();
    let gains = context_gains(scene, t, &camera);

    let mut desc = Vec::with_capacity(w * h * DESCRIPTOR_DIM);
    let mut labels = Vec::with_capacity(w * h);
    let mut clean = Vec::with_capacity(w * h);
    for v in 0..h {
        for u in 0..w {
            let px = Grid::cell_center(u, v);
            // camera-frame z component 1, so the ray parameter is the depth
            let dir = rot * Vector3::new((px.u - k.cx) / k.fx, (px.v - k.cy) / k.fy, 1.0);
            match intersect_ray(scene, t, &origin, &dir) {
                Some(hit) => {
                    clean.push(hit.s);
                    match hit.object {
                        Some(i) => desc.extend(scene.objects[i].field.descriptor(&hit.local, gains[i])),
                        None => desc.extend_from_slice(&scene.background),
                    }
                    labels.push(hit.object);
                }
                None => {
                    clean.push(f64::NAN);
                    desc.extend_from_slice(&scene.background);
                    labels.push(None);
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((t as u64) << 16) | cam_index as u64);
    let noisy = clean
        .iter()
        .map(|&d| {
            let n: f64 = rng.sample(StandardNormal);
            let drop = rng.random::<f64>() < scene.depth_dropout_prob;
            let z = d + scene.depth_noise_sigma * n;
            if drop || !(z > 0.0) {
                f64::NAN
            } else {
                z
            }
        })
        .collect();

    let descriptors = DescriptorImage::new(w, h, DESCRIPTOR_DIM, desc)?;
    let distances = refs.iter().map(|r| distance_map(&descriptors, r, false)).collect::<Result<Vec<_>>>()?;
    Ok(RenderedView {
        camera,
        descriptors,
        labels,
        depth_clean: Grid::new(w, h, clean)?,
        depth: Grid::new(w, h, noisy)?,
        distances,
    })
}

/// Renders every camera at timestep `t`. Pure in `(scene, t, seed)`.
pub fn render_frame(scene: &SyntheticScene, t: usize, refs: &[ReferenceDescriptor], seed: u64) -> Result<FrameRender> {
    if t >= scene.len() {
        return Err(Error::invalid(format!("timestep {t} out of range for a scene of length {}", scene.len())));
    }
    let views = (0..scene.cameras.len()).map(|c| render_view(scene, t, c, refs, seed)).collect::<Result<Vec<_>>>()?;
    let truth = (0..scene.keypoints.len())
        .map(|k| {
            let position = scene.keypoint_position(k, t);
            let visible = scene.cameras.iter().any(|cams| point_visible(scene, t, &cams[t], &position));
            KeypointTruth { position, visible }
        })
        .collect();
    Ok(FrameRender { t, views, truth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptor::{activation_map, expectation_2d, mode_2d};
    use crate::geometry::{Intrinsics, Pose};
    use crate::scene_sim::{DescriptorField, KeypointDef, PoseTrack, SceneObject, Symmetry};
    use std::collections::BTreeMap;

    fn down_camera(height: f64, size: usize, focal: f64) -> CameraModel {
        let pose = Pose::look_at(WorldPoint::new(0.0, 0.0, height), WorldPoint::origin(), Vector3::new(0.0, 1.0, 0.0))
            .unwrap();
        CameraModel::new(Intrinsics::centered(focal, size, size).unwrap(), pose)
    }

    fn scene_with(objects: Vec<SceneObject>, camera: CameraModel) -> SyntheticScene {
        SyntheticScene {
            name: "test".into(),
            objects,
            background: vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
            ground_height: None,
            cameras: vec![vec![camera]],
            gripper: vec![Vector3::zeros()],
            depth_noise_sigma: 0.0,
            depth_dropout_prob: 0.0,
            keypoints: vec![],
            events: BTreeMap::new(),
        }
    }

    fn object(shape: Shape, pose: Pose, field: DescriptorField) -> SceneObject {
        SceneObject { id: 0, name: "obj".into(), shape, track: PoseTrack::Static(pose), field, context: None }
    }

    fn ring_field(symmetry: Symmetry) -> DescriptorField {
        DescriptorField::Radial {
            identity: [0.5, 0.0],
            radial_amplitude: 0.3,
            radial_extent: 1.0,
            angular_amplitude: 0.3,
            symmetry,
            context_amplitude: 0.0,
            ramp_radius: 0.2,
        }
    }

    #[test]
    fn sphere_center_depth_is_exact() {
        let cam = down_camera(5.0, 11, 10.0);
        let s = object(
            Shape::Sphere { radius: 1.0 },
            Pose::identity(),
            DescriptorField::Constant(vec![1.0; DESCRIPTOR_DIM]),
        );
        let f = render_frame(&scene_with(vec![s], cam), 0, &[], 0).unwrap();
        assert_eq!(f.views[0].depth_clean.get(5, 5), 4.0);
        assert_eq!(f.views[0].labels[5 * 11 + 5], Some(0));
        assert!(f.views[0].depth_clean.get(0, 0).is_nan());
    }

    #[test]
    fn box_and_disk_depths() {
        let cam = down_camera(2.0, 9, 10.0);
        let b = object(
            Shape::Cuboid { half_extents: Vector3::new(0.5, 0.5, 0.25) },
            Pose::identity(),
            DescriptorField::Constant(vec![1.0; DESCRIPTOR_DIM]),
        );
        let f = render_frame(&scene_with(vec![b], cam), 0, &[], 0).unwrap();
        assert!((f.views[0].depth_clean.get(4, 4) - 1.75).abs() < 1e-12);

        let d = object(
            Shape::Disk { radius: 0.3 },
            Pose::from_translation(Vector3::new(0.0, 0.0, 0.5)),
            DescriptorField::Constant(vec![1.0; DESCRIPTOR_DIM]),
        );
        let f = render_frame(&scene_with(vec![d], cam), 0, &[], 0).unwrap();
        assert!((f.views[0].depth_clean.get(4, 4) - 1.5).abs() < 1e-12);
        assert!(f.views[0].depth_clean.get(0, 4).is_nan());
    }

    #[test]
    fn ring_field_yields_multimodal_activation() {
        // top-down camera over a continuous-symmetry disk filling the view
        let cam = down_camera(1.0, 64, 40.0);
        let disk = object(Shape::Disk { radius: 3.0 }, Pose::identity(), ring_field(Symmetry::Continuous));
        let scene = scene_with(vec![disk.clone()], cam);
        let r = ReferenceDescriptor::new("ring", disk.field.descriptor(&WorldPoint::new(0.5, 0.0, 0.0), 1.0));
        let f = render_frame(&scene, 0, &[r], 0).unwrap();
        let dm = &f.views[0].distances[0];
        assert!(dm.grid().data().iter().cloned().fold(f64::INFINITY, f64::min) < 0.02);
        let am = activation_map(dm, 25.0).unwrap();
        let e = expectation_2d(&am).denormalized(64, 64);
        let m = mode_2d(&am);
        assert!(e.distance(&m) > 10.0, "mean-mode distance {}", e.distance(&m));
    }

    #[test]
    fn full_dropout_invalidates_depth() {
        let cam = down_camera(5.0, 8, 10.0);
        let s = object(
            Shape::Sphere { radius: 1.0 },
            Pose::identity(),
            DescriptorField::Constant(vec![1.0; DESCRIPTOR_DIM]),
        );
        let mut scene = scene_with(vec![s], cam);
        scene.depth_dropout_prob = 1.0;
        scene.ground_height = Some(-2.0);
        let refs = [ReferenceDescriptor::new("x", vec![1.0; DESCRIPTOR_DIM])];
        let f = render_frame(&scene, 0, &refs, 3).unwrap();
        assert!(f.views[0].depth.data().iter().all(|d| d.is_nan()));
        assert!(!f.measurements(0).unwrap()[0].has_valid_depth());
    }

    #[test]
    fn noisy_render_is_deterministic() {
        let cam = down_camera(5.0, 16, 10.0);
        let s = object(
            Shape::Sphere { radius: 1.0 },
            Pose::identity(),
            DescriptorField::Constant(vec![1.0; DESCRIPTOR_DIM]),
        );
        let mut scene = scene_with(vec![s], cam);
        scene.depth_noise_sigma = 0.01;
        scene.depth_dropout_prob = 0.1;
        let a = render_frame(&scene, 0, &[], 7).unwrap();
        let b = render_frame(&scene, 0, &[], 7).unwrap();
        let bits = |g: &Grid| g.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.views[0].depth), bits(&b.views[0].depth));
        let c = render_frame(&scene, 0, &[], 8).unwrap();
        assert_ne!(bits(&a.views[0].depth), bits(&c.views[0].depth));
    }

    #[test]
    fn symmetric_rotation_leaves_distance_map_unchanged() {
        let cam = down_camera(1.0, 48, 40.0);
        let field = ring_field(Symmetry::Order(4));
        let r = ReferenceDescriptor::new("k", field.descriptor(&WorldPoint::new(0.3, 0.1, 0.0), 1.0));
        let render = |angle: f64| {
            let pose = Pose::from_axis_angle(Vector3::z(), angle, Vector3::zeros());
            let disk = object(Shape::Disk { radius: 2.0 }, pose, field.clone());
            render_frame(&scene_with(vec![disk], cam), 0, std::slice::from_ref(&r), 0).unwrap()
        };
        let a = render(0.0);
        let b = render(std::f64::consts::FRAC_PI_2);
        let diff = a.views[0].distances[0]
            .grid()
            .data()
            .iter()
            .zip(b.views[0].distances[0].grid().data())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-9, "{diff}");
    }

    #[test]
    fn occluded_keypoint_is_invisible() {
        let cam = down_camera(5.0, 16, 10.0);
        let target = object(
            Shape::Sphere { radius: 0.5 },
            Pose::identity(),
            DescriptorField::Constant(vec![1.0; DESCRIPTOR_DIM]),
        );
        let wall = object(
            Shape::Cuboid { half_extents: Vector3::new(1.0, 1.0, 0.05) },
            Pose::from_translation(Vector3::new(0.0, 0.0, 2.0)),
            DescriptorField::Constant(vec![0.0; DESCRIPTOR_DIM]),
        );
        let mut scene = scene_with(vec![target.clone()], cam);
        scene.keypoints.push(KeypointDef { label: "top".into(), object: 0, local: WorldPoint::new(0.0, 0.0, 0.5) });
        assert!(render_frame(&scene, 0, &[], 0).unwrap().truth[0].visible);
        scene.objects.push(wall);
        let f = render_frame(&scene, 0, &[], 0).unwrap();
        assert!(!f.truth[0].visible);
        assert_eq!(f.views[0].labels[8 * 16 + 8], Some(1));
        assert!(render_frame(&scene, 1, &[], 0).is_err());
    }
}
