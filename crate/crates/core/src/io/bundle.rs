use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::array::{Array2, FORMAT_VERSION};
use crate::descriptor::{DistanceMap, ReferenceDescriptor};
use crate::error::{BundleError, Result};
use crate::geometry::{CameraModel, Intrinsics, Pose, WorldPoint};
use crate::particle_filter::Measurement;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraTrack {
    pub name: String,
    pub intrinsics: Intrinsics,
    /// Camera-to-world pose per frame.
    pub poses: Vec<Pose>,
}

impl CameraTrack {
    pub fn at(&self, t: usize) -> CameraModel {
        CameraModel::new(self.intrinsics, self.poses[t])
    }
}

/// Per-keypoint, per-frame world positions and visibility flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthTable {
    pub positions: Vec<Vec<[f64; 3]>>,
    pub visible: Vec<Vec<bool>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u16,
    pub frames: usize,
    pub cameras: Vec<CameraTrack>,
    pub references: Vec<ReferenceDescriptor>,
    /// Gripper translation from frame `t - 1` to `t`; zero for `t = 0`.
    pub gripper_deltas: Vec<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<GroundTruthTable>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth_noise_sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub events: BTreeMap<String, usize>,
}

impl Manifest {
    fn check(&self, path: &Path) -> Result<(), BundleError> {
        let bad = |detail: String| BundleError::InvalidManifest { path: path.to_owned(), detail };
        let t = self.frames;
        if t == 0 {
            return Err(bad("frame count must be at least 1".into()));
        }
        if self.cameras.is_empty() {
            return Err(bad("no cameras".into()));
        }
        for c in &self.cameras {
            if c.poses.len() != t {
                return Err(bad(format!("camera `{}` has {} poses for {t} frames", c.name, c.poses.len())));
            }
            if c.name.is_empty() || c.name.contains(['/', '\\']) || c.name.starts_with('.') {
                return Err(bad(format!("camera name `{}` is not a plain directory name", c.name)));
            }
        }
        if self.gripper_deltas.len() != t {
            return Err(bad(format!("{} gripper deltas for {t} frames", self.gripper_deltas.len())));
        }
        if let Some(gt) = &self.ground_truth {
            let k = self.references.len();
            if gt.positions.len() != k
                || gt.visible.len() != k
                || gt.positions.iter().any(|p| p.len() != t)
                || gt.visible.iter().any(|v| v.len() != t)
            {
                return Err(bad("ground truth must be keypoints x frames".into()));
            }
        }
        Ok(())
    }
}

/// Arrays of one camera at one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct CameraFrame {
    /// NaN where the depth is invalid.
    pub depth: Array2,
    /// One distance map per reference.
    pub distances: Vec<Array2>,
}

/// A recorded (or simulated) trajectory: manifest plus `frames[t][camera]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryBundle {
    pub manifest: Manifest,
    pub frames: Vec<Vec<CameraFrame>>,
}

fn depth_file(t: usize) -> String {
    format!("depth_{t:05}.bska")
}

fn distance_file(k: usize, t: usize) -> String {
    format!("dist_{k:03}_{t:05}.bska")
}

impl TrajectoryBundle {
    pub fn len(&self) -> usize {
        self.manifest.frames
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.frames == 0
    }

    pub fn gripper_delta(&self, t: usize) -> Vector3<f64> {
        Vector3::from(self.manifest.gripper_deltas[t])
    }

    pub fn ground_truth(&self, k: usize, t: usize) -> Option<(WorldPoint, bool)> {
        let gt = self.manifest.ground_truth.as_ref()?;
        Some((WorldPoint::from(gt.positions[k][t]), gt.visible[k][t]))
    }

    /// One measurement per camera for reference `k` at frame `t`.
    pub fn measurements(&self, t: usize, k: usize) -> Result<Vec<Measurement>> {
        self.manifest
            .cameras
            .iter()
            .zip(&self.frames[t])
            .map(|(cam, f)| Measurement::new(cam.at(t), DistanceMap::new(f.distances[k].to_grid())?, f.depth.to_grid()))
            .collect()
    }

    /// Checks that array shapes agree with the manifest.
    pub fn validate(&self) -> Result<()> {
        let path = PathBuf::from("<memory>");
        self.manifest.check(&path)?;
        let bad = |detail: String| BundleError::ShapeMismatch { path: path.clone(), detail };
        if self.frames.len() != self.manifest.frames {
            return Err(bad(format!("{} frames, manifest declares {}", self.frames.len(), self.manifest.frames)).into());
        }
        for (t, frame) in self.frames.iter().enumerate() {
            if frame.len() != self.manifest.cameras.len() {
                return Err(bad(format!("frame {t} has {} cameras", frame.len())).into());
            }
            for (cam, f) in self.manifest.cameras.iter().zip(frame) {
                let shape = (cam.intrinsics.width, cam.intrinsics.height);
                let arrays = std::iter::once(&f.depth).chain(&f.distances);
                if f.distances.len() != self.manifest.references.len()
                    || arrays.into_iter().any(|a| (a.width, a.height) != shape || a.data.len() != a.width * a.height)
                {
                    return Err(bad(format!("frame {t}, camera `{}`: arrays do not match intrinsics", cam.name)).into());
                }
            }
        }
        Ok(())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BundleError + '_ {
    move |source| BundleError::Io { path: path.to_owned(), source }
}

/// Writes `bundle` under `dir` (created if needed): `manifest.json` plus one
/// subdirectory of arrays per camera.
pub fn write_bundle(bundle: &TrajectoryBundle, dir: &Path) -> Result<()> {
    bundle.validate()?;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for (c, cam) in bundle.manifest.cameras.iter().enumerate() {
        let cdir = dir.join(&cam.name);
        fs::create_dir_all(&cdir).map_err(io_err(&cdir))?;
        for (t, frame) in bundle.frames.iter().enumerate() {
            let f = &frame[c];
            f.depth.write(&cdir.join(depth_file(t)))?;
            for (k, d) in f.distances.iter().enumerate() {
                d.write(&cdir.join(distance_file(k, t)))?;
            }
        }
    }
    let mpath = dir.join(MANIFEST_FILE);
    let json = serde_json::to_vec_pretty(&bundle.manifest)?;
    fs::write(&mpath, json).map_err(io_err(&mpath))?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let mpath = dir.join(MANIFEST_FILE);
    let text = fs::read(&mpath).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            BundleError::MissingFile(mpath.clone())
        } else {
            io_err(&mpath)(e)
        }
    })?;
    let manifest: Manifest = serde_json::from_slice(&text)
        .map_err(|e| BundleError::InvalidManifest { path: mpath.clone(), detail: e.to_string() })?;
    if manifest.version != FORMAT_VERSION {
        return Err(
            BundleError::VersionMismatch { path: mpath, found: manifest.version, expected: FORMAT_VERSION }.into()
        );
    }
    manifest.check(&mpath)?;
    Ok(manifest)
}

pub fn read_bundle(dir: &Path) -> Result<TrajectoryBundle> {
    let manifest = read_manifest(dir)?;
    for cam in &manifest.cameras {
        let cdir = dir.join(&cam.name);
        if !cdir.is_dir() {
            return Err(BundleError::MissingFile(cdir).into());
        }
    }
    let frames = (0..manifest.frames)
        .map(|t| {
            manifest
                .cameras
                .iter()
                .map(|cam| {
                    let cdir = dir.join(&cam.name);
                    let shape = (cam.intrinsics.width, cam.intrinsics.height);
                    let depth = Array2::read(&cdir.join(depth_file(t)), shape)?;
                    let distances = (0..manifest.references.len())
                        .map(|k| Array2::read(&cdir.join(distance_file(k, t)), shape))
                        .collect::<Result<Vec<_>, _>>()?;
                    Ok(CameraFrame { depth, distances })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrajectoryBundle { manifest, frames })
}
