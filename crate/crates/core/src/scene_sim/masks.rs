use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;

use super::{ClusterLabel, Shape, SyntheticScene};
use crate::error::{Error, Result};
use crate::geometry::{CameraModel, WorldPoint};
use crate::grid::{is_valid_depth, DepthMap};

/// World points tagged with the object they were sampled from (`None` for
/// background).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LabeledPointCloud {
    pub points: Vec<(WorldPoint, Option<usize>)>,
}

impl LabeledPointCloud {
    pub fn positions(&self) -> Vec<WorldPoint> {
        self.points.iter().map(|(p, _)| *p).collect()
    }

    pub fn labels(&self) -> Vec<Option<usize>> {
        self.points.iter().map(|(_, l)| *l).collect()
    }
}

/// Binary image mask, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn empty(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![false; width * height] }
    }

    /// Pixels whose label equals `object`.
    pub fn from_labels(width: usize, height: usize, labels: &[Option<usize>], object: usize) -> Result<Self> {
        if labels.len() != width * height {
            return Err(Error::invalid("label map does not match mask shape"));
        }
        Ok(Self { width, height, data: labels.iter().map(|l| *l == Some(object)).collect() })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, u: usize, v: usize) -> bool {
        self.data[v * self.width + u]
    }

    pub fn set(&mut self, u: usize, v: usize) {
        self.data[v * self.width + u] = true;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    /// Intersection over union; two empty masks have IoU 1.
    pub fn iou(&self, other: &Mask) -> f64 {
        let (mut inter, mut union) = (0usize, 0usize);
        for (a, b) in self.data.iter().zip(&other.data) {
            inter += (*a && *b) as usize;
            union += (*a || *b) as usize;
        }
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }

    pub fn overlaps(&self, other: &Mask) -> bool {
        self.data.iter().zip(&other.data).any(|(a, b)| *a && *b)
    }
}

/// Projects clustered points into `camera`. A pixel joins cluster `c`'s mask
/// when some point of `c` lands in it with a projected depth within
/// `3 * sigma_d` of the measured depth there, so occluded points drop out.
/// Returns one mask per cluster id present in `labels`.
pub fn project_masks(
    points: &[WorldPoint],
    labels: &[ClusterLabel],
    camera: &CameraModel,
    depth: &DepthMap,
    sigma_d: f64,
) -> Result<BTreeMap<usize, Mask>> {
    if points.len() != labels.len() {
        return Err(Error::invalid(format!("{} points but {} labels", points.len(), labels.len())));
    }
    if depth.width() != camera.width() || depth.height() != camera.height() {
        return Err(Error::invalid("depth map does not match the camera"));
    }
    let (w, h) = (camera.width(), camera.height());
    let mut masks = BTreeMap::new();
    for (p, l) in points.iter().zip(labels) {
        let Some(id) = *l else { continue };
        let mask = masks.entry(id).or_insert_with(|| Mask::empty(w, h));
        let (px, z) = camera.project(p);
        if !(z > 0.0) {
            continue;
        }
        let Some((u, v)) = depth.cell_at(px) else { continue };
        let d = depth.get(u, v);
        if is_valid_depth(d) && (z - d).abs() <= 3.0 * sigma_d {
            mask.set(u, v);
        }
    }
    Ok(masks)
}

fn sphere_points(radius: f64, spacing: f64) -> Vec<Vector3<f64>> {
    let n = ((4.0 * PI * radius * radius) / (spacing * spacing)).ceil().max(1.0) as usize;
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let a = golden * i as f64;
            radius * Vector3::new(r * a.cos(), r * a.sin(), z)
        })
        .collect()
}

fn face_steps(extent: f64, spacing: f64) -> Vec<f64> {
    let n = (2.0 * extent / spacing).ceil().max(1.0) as usize;
    (0..n).map(|i| -extent + (i as f64 + 0.5) * 2.0 * extent / n as f64).collect()
}

fn cuboid_points(h: &Vector3<f64>, spacing: f64) -> Vec<Vector3<f64>> {
    let mut out = Vec::new();
    for axis in 0..3 {
        let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
        for sign in [-1.0, 1.0] {
            for s in face_steps(h[a], spacing) {
                for r in face_steps(h[b], spacing) {
                    let mut p = Vector3::zeros();
                    p[axis] = sign * h[axis];
                    p[a] = s;
                    p[b] = r;
                    out.push(p);
                }
            }
        }
    }
    out
}

fn disk_points(radius: f64, spacing: f64) -> Vec<Vector3<f64>> {
    let mut out = vec![Vector3::zeros()];
    let rings = (radius / spacing).ceil() as usize;
    for i in 1..=rings {
        let r = radius * i as f64 / rings as f64;
        let n = (TAU * r / spacing).ceil() as usize;
        out.extend((0..n).map(|j| {
            let a = TAU * j as f64 / n as f64;
            Vector3::new(r * a.cos(), r * a.sin(), 0.0)
        }));
    }
    out
}

/// Deterministic, roughly uniform surface samples of every object at time
/// `t`, about `spacing` meters apart.
pub fn sample_surface_points(scene: &SyntheticScene, t: usize, spacing: f64) -> Result<LabeledPointCloud> {
    if !(spacing > 0.0) {
        return Err(Error::invalid("sample spacing must be positive"));
    }
    if t >= scene.len() {
        return Err(Error::invalid(format!("timestep {t} out of range")));
    }
    let mut points = Vec::new();
    for (i, obj) in scene.objects.iter().enumerate() {
        let local = match obj.shape {
            Shape::Sphere { radius } => sphere_points(radius, spacing),
            Shape::Cuboid { half_extents } => cuboid_points(&half_extents, spacing),
            Shape::Disk { radius } => disk_points(radius, spacing),
        };
        let pose = obj.track.at(t);
        points.extend(local.into_iter().map(|p| (pose.transform_point(&WorldPoint::from(p)), Some(i))));
    }
    Ok(LabeledPointCloud { points })
}
