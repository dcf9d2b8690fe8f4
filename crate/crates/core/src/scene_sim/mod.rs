//! Synthetic stand-in for a dense descriptor network and a physical scene.
//!
//! Objects carry analytic descriptor fields over their surfaces, so distance
//! maps can be rendered exactly and ground truth is known. Rotationally
//! symmetric fields can only be disambiguated while a designated context
//! point is visible, which reproduces the multimodal correspondence maps a
//! learned encoder produces when the visual context is insufficient.

mod dbscan;
mod masks;
mod render;
mod scenarios;

pub use dbscan::{dbscan, ClusterLabel};
pub use masks::{project_masks, sample_surface_points, LabeledPointCloud, Mask};
pub use render::{intersect_ray, render_frame, FrameRender, Hit, KeypointTruth, RenderedView};
pub use scenarios::{scenario, scripted_scenarios, SCENARIO_NAMES};

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use nalgebra::Vector3;

use crate::descriptor::ReferenceDescriptor;
use crate::error::{Error, Result};
use crate::geometry::{CameraModel, Pose, WorldPoint};

/// Descriptor dimension of every simulated field.
pub const DESCRIPTOR_DIM: usize = 8;

/// Default non-match margins; rendered distances are scaled so foreground
/// distances fall roughly in `[0, MARGIN_FG]` and background ones near
/// `MARGIN_BG`.
pub const MARGIN_FG: f64 = 0.5;
pub const MARGIN_BG: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    Sphere {
        radius: f64,
    },
    /// Axis-aligned in the object frame.
    Cuboid {
        half_extents: Vector3<f64>,
    },
    /// Flat disk in the object's local `z = 0` plane, visible from both sides.
    Disk {
        radius: f64,
    },
}

/// Rotational symmetry about the local `z` axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Symmetry {
    None,
    Order(u32),
    Continuous,
}

/// Analytic map from object-local surface points to descriptors.
#[derive(Clone, Debug, PartialEq)]
pub enum DescriptorField {
    Constant(Vec<f64>),
    /// Polar encoding about the local `z` axis: radius always, angle modulo
    /// the symmetry, and the absolute angle only while context is visible.
    Radial {
        identity: [f64; 2],
        radial_amplitude: f64,
        /// Radius mapped to half a turn of the radial phase.
        radial_extent: f64,
        angular_amplitude: f64,
        symmetry: Symmetry,
        context_amplitude: f64,
        /// Angular terms ramp in linearly up to this radius.
        ramp_radius: f64,
    },
    /// Periodic encoding of local coordinates; unique within half a period.
    Positional {
        identity: [f64; 2],
        amplitude: f64,
        period: f64,
    },
}

impl DescriptorField {
    /// Descriptor at local point `p`. `context_gain` scales the
    /// symmetry-breaking component of radial fields.
    pub fn descriptor(&self, p: &WorldPoint, context_gain: f64) -> Vec<f64> {
        match self {
            DescriptorField::Constant(v) => v.clone(),
            DescriptorField::Radial {
                identity,
                radial_amplitude,
                radial_extent,
                angular_amplitude,
                symmetry,
                context_amplitude,
                ramp_radius,
            } => {
                let r = p.x.hypot(p.y);
                let theta = p.y.atan2(p.x);
                let ramp = (r / ramp_radius).min(1.0);
                let phase = std::f64::consts::PI * r / radial_extent;
                let (ka, kb) = match symmetry {
                    Symmetry::Continuous => (0.0, 0.0),
                    Symmetry::Order(k) => {
                        let k = *k as f64;
                        ((k * theta).cos(), (k * theta).sin())
                    }
                    Symmetry::None => (theta.cos(), theta.sin()),
                };
                let (ka, kb) = match symmetry {
                    Symmetry::Continuous => (ka, kb),
                    _ => (ka * angular_amplitude * ramp, kb * angular_amplitude * ramp),
                };
                let c = context_amplitude * context_gain * ramp;
                vec![
                    identity[0],
                    identity[1],
                    radial_amplitude * phase.cos(),
                    radial_amplitude * phase.sin(),
                    ka,
                    kb,
                    c * theta.cos(),
                    c * theta.sin(),
                ]
            }
            DescriptorField::Positional { identity, amplitude, period } => {
                let w = TAU / period;
                vec![
                    identity[0],
                    identity[1],
                    amplitude * (w * p.x).cos(),
                    amplitude * (w * p.x).sin(),
                    amplitude * (w * p.y).cos(),
                    amplitude * (w * p.y).sin(),
                    amplitude * (w * p.z).cos(),
                    amplitude * (w * p.z).sin(),
                ]
            }
        }
    }
}

/// Object-to-world pose over time.
#[derive(Clone, Debug, PartialEq)]
pub enum PoseTrack {
    Static(Pose),
    Frames(Vec<Pose>),
}

impl PoseTrack {
    pub fn at(&self, t: usize) -> Pose {
        match self {
            PoseTrack::Static(p) => *p,
            PoseTrack::Frames(f) => f[t.min(f.len() - 1)],
        }
    }
}

/// A point whose visibility switches on an object's symmetry-breaking
/// descriptor component.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContextAnchor {
    pub object: usize,
    pub local: WorldPoint,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneObject {
    pub id: usize,
    pub name: String,
    pub shape: Shape,
    pub track: PoseTrack,
    pub field: DescriptorField,
    pub context: Option<ContextAnchor>,
}

impl SceneObject {
    pub fn symmetry(&self) -> Symmetry {
        match &self.field {
            DescriptorField::Radial { symmetry, .. } => *symmetry,
            _ => Symmetry::None,
        }
    }
}

/// A tracked point fixed to an object's surface.
#[derive(Clone, Debug, PartialEq)]
pub struct KeypointDef {
    pub label: String,
    pub object: usize,
    pub local: WorldPoint,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticScene {
    pub name: String,
    pub objects: Vec<SceneObject>,
    pub background: Vec<f64>,
    /// Height of an infinite ground plane rendered as background.
    pub ground_height: Option<f64>,
    /// `cameras[c][t]`.
    pub cameras: Vec<Vec<CameraModel>>,
    /// World-frame gripper position per step.
    pub gripper: Vec<Vector3<f64>>,
    pub depth_noise_sigma: f64,
    pub depth_dropout_prob: f64,
    pub keypoints: Vec<KeypointDef>,
    /// Named timesteps of scripted events.
    pub events: BTreeMap<String, usize>,
}

impl SyntheticScene {
    pub fn validate(&self) -> Result<()> {
        let t = self.len();
        if t == 0 {
            return Err(Error::invalid("scene needs at least one timestep"));
        }
        if self.cameras.is_empty() || self.cameras.iter().any(|c| c.len() != t) {
            return Err(Error::invalid("every camera trajectory must match the gripper trajectory length"));
        }
        for o in &self.objects {
            if let PoseTrack::Frames(f) = &o.track {
                if f.len() != t {
                    return Err(Error::invalid(format!("object `{}` has {} poses for {t} steps", o.name, f.len())));
                }
            }
        }
        if self.background.len() != DESCRIPTOR_DIM {
            return Err(Error::invalid("background descriptor has the wrong dimension"));
        }
        if let Some(k) = self.keypoints.iter().find(|k| k.object >= self.objects.len()) {
            return Err(Error::invalid(format!("keypoint `{}` references a missing object", k.label)));
        }
        if !(0.0..=1.0).contains(&self.depth_dropout_prob) || !(self.depth_noise_sigma >= 0.0) {
            return Err(Error::invalid("depth noise parameters out of range"));
        }
        Ok(())
    }

    /// Number of timesteps.
    pub fn len(&self) -> usize {
        self.gripper.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gripper.is_empty()
    }

    /// Reference descriptors: each keypoint's field value with full context.
    pub fn references(&self) -> Vec<ReferenceDescriptor> {
        self.keypoints
            .iter()
            .map(|k| ReferenceDescriptor::new(k.label.clone(), self.objects[k.object].field.descriptor(&k.local, 1.0)))
            .collect()
    }

    pub fn keypoint_position(&self, k: usize, t: usize) -> WorldPoint {
        let kp = &self.keypoints[k];
        self.objects[kp.object].track.at(t).transform_point(&kp.local)
    }

    /// Gripper translation from `t - 1` to `t` (zero at `t = 0`).
    pub fn gripper_delta(&self, t: usize) -> Vector3<f64> {
        if t == 0 {
            Vector3::zeros()
        } else {
            self.gripper[t] - self.gripper[t - 1]
        }
    }
}
