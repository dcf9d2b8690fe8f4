use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_4, TAU};

use nalgebra::{Matrix3, Vector3};

use super::render::point_visible;
use super::{
    ContextAnchor, DescriptorField, KeypointDef, PoseTrack, SceneObject, Shape, Symmetry, SyntheticScene,
    DESCRIPTOR_DIM,
};
use crate::error::{Error, Result};
use crate::geometry::{CameraModel, Intrinsics, Pose, WorldPoint};

pub const SCENARIO_NAMES: [&str; 3] = ["symmetric_lid", "rubbish_bin", "occluder_pass"];

const IMAGE_SIZE: usize = 64;
const FOCAL: f64 = 60.0;

/// All built-in scenarios, keyed by name.
pub fn scripted_scenarios() -> BTreeMap<String, SyntheticScene> {
    SCENARIO_NAMES.iter().map(|n| (n.to_string(), scenario(n).expect("built-in scenario"))).collect()
}

pub fn scenario(name: &str) -> Result<SyntheticScene> {
    let scene = match name {
        "symmetric_lid" => symmetric_lid(),
        "rubbish_bin" => rubbish_bin(),
        "occluder_pass" => occluder_pass(),
        _ => {
            return Err(Error::UnknownScenario {
                name: name.to_string(),
                available: SCENARIO_NAMES.iter().map(|s| s.to_string()).collect(),
            })
        }
    };
    scene.validate()?;
    Ok(scene)
}

fn intrinsics() -> Intrinsics {
    Intrinsics::centered(FOCAL, IMAGE_SIZE, IMAGE_SIZE).expect("valid intrinsics")
}

/// Camera at `eye` looking straight down (-z) with image +x along world +x.
fn down_camera(eye: Vector3<f64>) -> CameraModel {
    let rotation = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0));
    CameraModel::new(intrinsics(), Pose::new(rotation, eye).expect("proper rotation"))
}

fn lerp(a: Vector3<f64>, b: Vector3<f64>, s: f64) -> Vector3<f64> {
    a + (b - a) * s.clamp(0.0, 1.0)
}

fn background() -> Vec<f64> {
    let mut b = vec![0.0; DESCRIPTOR_DIM];
    b[0] = -0.7;
    b[1] = -0.7;
    b
}

fn constant(i0: f64, i1: f64) -> DescriptorField {
    let mut v = vec![0.0; DESCRIPTOR_DIM];
    v[0] = i0;
    v[1] = i1;
    DescriptorField::Constant(v)
}

/// First and last timestep (exclusive) of the longest run where `flag` is false.
fn longest_false_run(flags: &[bool]) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    let mut start = None;
    for (t, &f) in flags.iter().chain(std::iter::once(&true)).enumerate() {
        match (f, start) {
            (false, None) => start = Some(t),
            (true, Some(s)) => {
                if best.is_none_or(|(a, b)| t - s > b - a) {
                    best = Some((s, t));
                }
                start = None;
            }
            _ => {}
        }
    }
    best
}

/// Descending wrist camera over a lid with a four-fold symmetric descriptor
/// field. The handle on the rim is the only cue that breaks the symmetry; it
/// leaves the view partway down.
fn symmetric_lid() -> SyntheticScene {
    const T: usize = 150;
    let lid_z = 0.10;
    let lid = SceneObject {
        id: 0,
        name: "lid".into(),
        shape: Shape::Disk { radius: 0.12 },
        track: PoseTrack::Static(Pose::from_translation(Vector3::new(0.0, 0.0, lid_z))),
        field: DescriptorField::Radial {
            identity: [0.4, 0.0],
            radial_amplitude: 0.25,
            radial_extent: 0.12,
            angular_amplitude: 0.25,
            symmetry: Symmetry::Order(4),
            context_amplitude: 0.12,
            ramp_radius: 0.06,
        },
        context: Some(ContextAnchor { object: 1, local: WorldPoint::new(0.0, 0.0, 0.01) }),
    };
    let handle = SceneObject {
        id: 1,
        name: "handle".into(),
        shape: Shape::Cuboid { half_extents: Vector3::new(0.04, 0.015, 0.01) },
        track: PoseTrack::Static(Pose::from_translation(Vector3::new(0.19, 0.0, lid_z))),
        field: constant(0.0, 0.6),
        context: None,
    };
    let knob = SceneObject {
        id: 2,
        name: "knob".into(),
        shape: Shape::Sphere { radius: 0.02 },
        track: PoseTrack::Static(Pose::from_translation(Vector3::new(0.0, 0.0, lid_z))),
        field: DescriptorField::Radial {
            identity: [0.0, -0.4],
            radial_amplitude: 0.25,
            radial_extent: 0.02,
            angular_amplitude: 0.25,
            symmetry: Symmetry::None,
            context_amplitude: 0.0,
            ramp_radius: 0.01,
        },
        context: None,
    };

    let mut keypoints = Vec::new();
    for j in 0..8 {
        let a = j as f64 * FRAC_PI_4 + 0.2;
        let r = 0.012f64;
        keypoints.push(KeypointDef {
            label: format!("knob_{j}"),
            object: 2,
            local: WorldPoint::new(r * a.cos(), r * a.sin(), (0.02f64 * 0.02 - r * r).sqrt()),
        });
    }
    for j in 0..8 {
        let a = j as f64 * FRAC_PI_4 + 0.2;
        keypoints.push(KeypointDef {
            label: format!("rim_{j}"),
            object: 0,
            local: WorldPoint::new(0.08 * a.cos(), 0.08 * a.sin(), 0.0),
        });
    }

    let start = Vector3::new(0.0, 0.0, lid_z + 0.55);
    let end = Vector3::new(0.0, 0.0, lid_z + 0.17);
    let eyes: Vec<_> = (0..T).map(|t| lerp(start, end, t as f64 / (T - 1) as f64)).collect();
    let cameras: Vec<_> = eyes.iter().map(|e| down_camera(*e)).collect();
    let gripper = eyes.iter().map(|e| e - Vector3::new(0.0, 0.0, 0.1)).collect();

    let mut scene = SyntheticScene {
        name: "symmetric_lid".into(),
        objects: vec![lid, handle, knob],
        background: background(),
        ground_height: Some(0.0),
        cameras: vec![cameras],
        gripper,
        depth_noise_sigma: 0.002,
        depth_dropout_prob: 0.01,
        keypoints,
        events: BTreeMap::new(),
    };
    let anchor = WorldPoint::new(0.19, 0.0, lid_z + 0.01);
    let lost = (0..T).find(|&t| !point_visible(&scene, t, &scene.cameras[0][t], &anchor)).unwrap_or(T);
    scene.events.insert("context_lost".into(), lost);
    scene
}

/// Wrist camera hovering over a static bin, flying off to grasp a piece of
/// rubbish, dragging it through two fast loops on the floor and carrying it
/// back within view of the bin.
fn rubbish_bin() -> SyntheticScene {
    const T: usize = 240;
    // gripper fingertip relative to the camera center
    let grip = Vector3::new(0.025, 0.0, -0.16);
    let rubbish_radius = 0.025;
    let rubbish_start = Vector3::new(0.35, 0.0, rubbish_radius);

    let hover = Vector3::new(0.0, 0.0, 0.45);
    let over = Vector3::new(rubbish_start.x - grip.x, 0.0, 0.45);
    let grasp = rubbish_start - grip;
    let loop_center = grasp - Vector3::new(0.1, 0.0, 0.0);
    let low_home = Vector3::new(0.12, 0.0, grasp.z);
    let home = Vector3::new(0.12, 0.0, 0.5);

    // The rubbish is only ever carried sideways or lifted quickly: slow
    // motion along the optical axis leaves non-following particles hidden
    // behind the object, where they score as well as the followers.
    let grasp_t = 100;
    let eye = |t: usize| -> Vector3<f64> {
        let f = |a: usize, b: usize| (t - a) as f64 / (b - a) as f64;
        match t {
            0..60 => hover,
            60..85 => lerp(hover, over, f(60, 85)),
            85..100 => lerp(over, grasp, f(85, 100)),
            100..150 => {
                // two fast loops dragging the rubbish along the floor
                let phi = TAU * 2.0 * f(100, 150);
                loop_center + 0.1 * Vector3::new(phi.cos(), phi.sin(), 0.0)
            }
            150..162 => lerp(grasp, low_home, f(150, 162)),
            162..172 => lerp(low_home, home, f(162, 172)),
            _ => home,
        }
    };
    let eyes: Vec<_> = (0..T).map(eye).collect();
    let cameras: Vec<_> = eyes.iter().map(|e| down_camera(*e)).collect();
    let gripper: Vec<_> = eyes.iter().map(|e| e + grip).collect();
    let rubbish_track = (0..T)
        .map(|t| if t < grasp_t { Pose::from_translation(rubbish_start) } else { Pose::from_translation(gripper[t]) })
        .collect();

    let bin = SceneObject {
        id: 0,
        name: "bin".into(),
        shape: Shape::Cuboid { half_extents: Vector3::new(0.06, 0.06, 0.06) },
        track: PoseTrack::Static(Pose::from_translation(Vector3::new(0.0, 0.0, 0.06))),
        field: DescriptorField::Positional { identity: [0.8, 0.0], amplitude: 0.6, period: 0.15 },
        context: None,
    };
    let rubbish = SceneObject {
        id: 1,
        name: "rubbish".into(),
        shape: Shape::Sphere { radius: rubbish_radius },
        track: PoseTrack::Frames(rubbish_track),
        field: DescriptorField::Positional { identity: [0.0, 0.8], amplitude: 0.25, period: 0.1 },
        context: None,
    };

    let mut keypoints = Vec::new();
    let top = [
        (0.045, 0.045),
        (-0.045, 0.045),
        (0.045, -0.045),
        (-0.045, -0.045),
        (0.0, 0.045),
        (0.0, -0.045),
        (0.045, 0.0),
        (-0.045, 0.0),
    ];
    for (j, (x, y)) in top.iter().enumerate() {
        keypoints.push(KeypointDef { label: format!("bin_{j}"), object: 0, local: WorldPoint::new(*x, *y, 0.06) });
    }
    let polar = 50f64.to_radians();
    for j in 0..8 {
        let a = j as f64 * FRAC_PI_4;
        keypoints.push(KeypointDef {
            label: format!("rubbish_{j}"),
            object: 1,
            local: WorldPoint::new(
                rubbish_radius * polar.sin() * a.cos(),
                rubbish_radius * polar.sin() * a.sin(),
                rubbish_radius * polar.cos(),
            ),
        });
    }

    let mut scene = SyntheticScene {
        name: "rubbish_bin".into(),
        objects: vec![bin, rubbish],
        background: background(),
        ground_height: Some(0.0),
        cameras: vec![cameras],
        gripper,
        depth_noise_sigma: 0.002,
        depth_dropout_prob: 0.01,
        keypoints,
        events: BTreeMap::new(),
    };
    // out of view: no bin keypoint visible
    let bin_seen: Vec<bool> = (0..T)
        .map(|t| (0..8).any(|k| point_visible(&scene, t, &scene.cameras[0][t], &scene.keypoint_position(k, t))))
        .collect();
    if let Some((a, b)) = longest_false_run(&bin_seen) {
        scene.events.insert("bin_out_of_view".into(), a);
        scene.events.insert("bin_back_in_view".into(), b);
    }
    let rubbish_seen = (0..T)
        .find(|&t| (8..16).any(|k| point_visible(&scene, t, &scene.cameras[0][t], &scene.keypoint_position(k, t))));
    if let Some(t) = rubbish_seen {
        scene.events.insert("rubbish_in_view".into(), t);
    }
    scene.events.insert("grasp".into(), grasp_t);
    scene
}

/// Static camera above a ball while a plate sweeps through the line of sight.
fn occluder_pass() -> SyntheticScene {
    const T: usize = 60;
    let eye = Vector3::new(0.0, 0.0, 0.6);
    let radius = 0.04;
    let target = SceneObject {
        id: 0,
        name: "ball".into(),
        shape: Shape::Sphere { radius },
        track: PoseTrack::Static(Pose::from_translation(Vector3::new(0.0, 0.0, radius))),
        field: DescriptorField::Positional { identity: [0.45, 0.0], amplitude: 0.25, period: 0.16 },
        context: None,
    };
    // top face 0.3 m in front of the ball's apex
    let plate_z = 2.0 * radius + 0.3 - 0.005;
    let plate_track = (0..T)
        .map(|t| {
            let x = -0.4 + 0.8 * t as f64 / (T - 1) as f64;
            Pose::from_translation(Vector3::new(x, 0.0, plate_z))
        })
        .collect();
    let plate = SceneObject {
        id: 1,
        name: "plate".into(),
        shape: Shape::Cuboid { half_extents: Vector3::new(0.05, 0.3, 0.005) },
        track: PoseTrack::Frames(plate_track),
        field: constant(0.0, 0.5),
        context: None,
    };
    let keypoints = (0..4)
        .map(|j| {
            let a = j as f64 * std::f64::consts::FRAC_PI_2 + 0.3;
            let polar = 30f64.to_radians();
            KeypointDef {
                label: format!("ball_{j}"),
                object: 0,
                local: WorldPoint::new(
                    radius * polar.sin() * a.cos(),
                    radius * polar.sin() * a.sin(),
                    radius * polar.cos(),
                ),
            }
        })
        .collect();
    let camera = down_camera(eye);
    let mut scene = SyntheticScene {
        name: "occluder_pass".into(),
        objects: vec![target, plate],
        background: background(),
        ground_height: Some(0.0),
        cameras: vec![vec![camera; T]],
        gripper: vec![eye - Vector3::new(0.0, 0.0, 0.1); T],
        depth_noise_sigma: 0.002,
        depth_dropout_prob: 0.01,
        keypoints,
        events: BTreeMap::new(),
    };
    let apex = WorldPoint::new(0.0, 0.0, 2.0 * radius);
    let hidden: Vec<bool> = (0..T).map(|t| point_visible(&scene, t, &camera, &apex)).collect();
    if let Some((a, b)) = longest_false_run(&hidden) {
        scene.events.insert("occluded".into(), a);
        scene.events.insert("unoccluded".into(), b);
    }
    scene
}
