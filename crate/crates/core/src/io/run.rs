use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::array::{Array2, FORMAT_VERSION};
use super::bundle::{CameraFrame, CameraTrack, GroundTruthTable, Manifest, TrajectoryBundle};
use crate::descriptor::{activation_map, expectation_2d, DEFAULT_ALPHA};
use crate::discrete_filter::{DiscreteFilterConfig, PixelBelief};
use crate::error::{Error, Result};
use crate::metrics::{
    aggregate, mean_mode_distance, mean_mode_distance_grid, step_error, AggregateRow, Stat, TrackRecord, TrackStep,
};
use crate::particle_filter::{GripperMotion, ParticleFilterConfig, ParticleSet};
use crate::scene_sim::{render_frame, scenario};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    /// Raw activation-map expectation backprojected at the measured depth.
    None,
    Discrete,
    Particle,
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FilterKind::None => "none",
            FilterKind::Discrete => "discrete",
            FilterKind::Particle => "particle",
        })
    }
}

impl FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(FilterKind::None),
            "discrete" => Ok(FilterKind::Discrete),
            "particle" => Ok(FilterKind::Particle),
            _ => Err(Error::invalid(format!("unknown filter `{s}` (expected none, discrete or particle)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub filter: FilterKind,
    /// Softmax temperature of the unfiltered tracker.
    pub alpha: f64,
    pub discrete: DiscreteFilterConfig,
    pub particle: ParticleFilterConfig,
    /// Required for particle runs.
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn new(filter: FilterKind) -> Self {
        Self {
            filter,
            alpha: DEFAULT_ALPHA,
            discrete: DiscreteFilterConfig::default(),
            particle: ParticleFilterConfig::default(),
            seed: None,
        }
    }

    /// Sets the correspondence temperature of all three trackers.
    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self.discrete.alpha = alpha;
        self.particle.alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid(format!("alpha must be > 0, got {}", self.alpha)));
        }
        match self.filter {
            FilterKind::Particle => {
                self.particle.validate()?;
                if self.seed.is_none() {
                    return Err(Error::invalid("particle runs need an explicit seed"));
                }
            }
            FilterKind::Discrete | FilterKind::None => {}
        }
        Ok(())
    }
}

/// Records plus the rendered CSV and JSON report.
#[derive(Clone, Debug)]
pub struct TrackingOutput {
    pub records: Vec<TrackRecord>,
    pub csv: Vec<u8>,
    pub report: Report,
}

#[derive(Clone, Debug, Serialize)]
pub struct KeypointSummary {
    pub keypoint: String,
    pub steps: usize,
    pub mean_gt_error: Option<f64>,
    pub max_gt_error: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub scenario: Option<String>,
    pub frames: usize,
    pub config: RunConfig,
    pub keypoints: Vec<KeypointSummary>,
    pub gt_error: Vec<AggregateRow>,
}

#[derive(Serialize, Deserialize)]
struct CsvRow<'a> {
    keypoint: std::borrow::Cow<'a, str>,
    t: usize,
    estimate_x: Option<f64>,
    estimate_y: Option<f64>,
    estimate_z: Option<f64>,
    gt_x: Option<f64>,
    gt_y: Option<f64>,
    gt_z: Option<f64>,
    gt_error: Option<f64>,
    mean_mode_px: Option<f64>,
    n_eff: Option<f64>,
    visible: bool,
}

pub fn records_to_csv(records: &[TrackRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        for s in &r.steps {
            w.serialize(CsvRow {
                keypoint: r.keypoint.as_str().into(),
                t: s.t,
                estimate_x: s.estimate.map(|p| p.x),
                estimate_y: s.estimate.map(|p| p.y),
                estimate_z: s.estimate.map(|p| p.z),
                gt_x: s.ground_truth.map(|p| p.x),
                gt_y: s.ground_truth.map(|p| p.y),
                gt_z: s.ground_truth.map(|p| p.z),
                gt_error: step_error(s),
                mean_mode_px: s.mean_mode_px,
                n_eff: s.n_eff,
                visible: s.visible,
            })?;
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Parses a CSV written by [`records_to_csv`] back into records, keeping
/// the keypoint order of first appearance.
pub fn records_from_csv(reader: impl std::io::Read) -> Result<Vec<TrackRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut records: Vec<TrackRecord> = Vec::new();
    for row in rdr.deserialize() {
        let row: CsvRow<'static> = row?;
        let point = |x: Option<f64>, y: Option<f64>, z: Option<f64>| Some(crate::geometry::WorldPoint::new(x?, y?, z?));
        let step = TrackStep {
            t: row.t,
            estimate: point(row.estimate_x, row.estimate_y, row.estimate_z),
            estimate_px: None,
            ground_truth: point(row.gt_x, row.gt_y, row.gt_z),
            visible: row.visible,
            n_eff: row.n_eff,
            mean_mode_px: row.mean_mode_px,
        };
        match records.iter_mut().find(|r| r.keypoint == row.keypoint) {
            Some(r) => r.steps.push(step),
            None => records.push(TrackRecord { keypoint: row.keypoint.into_owned(), steps: vec![step] }),
        }
    }
    Ok(records)
}

fn base_step(bundle: &TrajectoryBundle, k: usize, t: usize) -> TrackStep {
    let gt = bundle.ground_truth(k, t);
    TrackStep {
        t,
        estimate: None,
        estimate_px: None,
        ground_truth: gt.map(|g| g.0),
        visible: gt.is_some_and(|g| g.1),
        n_eff: None,
        mean_mode_px: None,
    }
}

/// Replays one keypoint. Returns the steps completed so far alongside the
/// first error, if any.
fn track_keypoint(bundle: &TrajectoryBundle, k: usize, cfg: &RunConfig) -> (TrackRecord, Option<Error>) {
    let mut record =
        TrackRecord { keypoint: bundle.manifest.references[k].label.clone(), steps: Vec::with_capacity(bundle.len()) };
    let result = match cfg.filter {
        FilterKind::None => track_unfiltered(bundle, k, cfg, &mut record.steps),
        FilterKind::Discrete => track_discrete(bundle, k, cfg, &mut record.steps),
        FilterKind::Particle => track_particle(bundle, k, cfg, &mut record.steps),
    };
    (record, result.err())
}

// Pixel-space trackers use the first camera only.
fn track_unfiltered(bundle: &TrajectoryBundle, k: usize, cfg: &RunConfig, out: &mut Vec<TrackStep>) -> Result<()> {
    for t in 0..bundle.len() {
        let m = bundle.measurements(t, k)?.swap_remove(0);
        let am = activation_map(&m.distance, cfg.alpha)?;
        let e = expectation_2d(&am);
        let px = e.denormalized(am.width(), am.height());
        let mut s = base_step(bundle, k, t);
        s.estimate_px = Some(e);
        s.mean_mode_px = Some(mean_mode_distance(&am));
        s.estimate = m.depth.cell_at(px).and_then(|(u, v)| m.camera.backproject(px, m.depth.get(u, v)).ok());
        out.push(s);
    }
    Ok(())
}

fn track_discrete(bundle: &TrajectoryBundle, k: usize, cfg: &RunConfig, out: &mut Vec<TrackStep>) -> Result<()> {
    let mut belief: Option<PixelBelief> = None;
    let mut prev_depth = None;
    for t in 0..bundle.len() {
        let m = bundle.measurements(t, k)?.swap_remove(0);
        let prior = match (belief.take(), prev_depth.take()) {
            (Some(b), Some(d)) => b.predict(&m.camera, &d, &cfg.discrete)?,
            _ => {
                cfg.discrete.validate(m.camera.width(), m.camera.height())?;
                PixelBelief::init_uniform(m.camera.width(), m.camera.height(), m.camera)?
            }
        };
        let post = prior.update(&m.distance, &cfg.discrete)?;
        let est = post.estimate(&m.depth)?;
        let mut s = base_step(bundle, k, t);
        s.estimate = est.position;
        s.estimate_px = Some(est.pixel);
        s.mean_mode_px = Some(mean_mode_distance_grid(post.grid()));
        out.push(s);
        belief = Some(post);
        prev_depth = Some(m.depth);
    }
    Ok(())
}

fn track_particle(bundle: &TrajectoryBundle, k: usize, cfg: &RunConfig, out: &mut Vec<TrackStep>) -> Result<()> {
    let seed = cfg.seed.ok_or_else(|| Error::invalid("particle runs need an explicit seed"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k as u64);
    let first = bundle.measurements(0, k)?;
    let m0 = first
        .iter()
        .find(|m| m.has_valid_depth())
        .ok_or_else(|| Error::Initialization("no valid depth in the first frame".into()))?;
    let mut set = ParticleSet::init_from_measurement_with_rng(m0, &cfg.particle, rng)?;
    let mut s = base_step(bundle, k, 0);
    s.estimate = Some(set.estimate());
    s.n_eff = Some(set.n_eff());
    out.push(s);
    for t in 1..bundle.len() {
        let ms = bundle.measurements(t, k)?;
        let est = set.step(&GripperMotion::new(bundle.gripper_delta(t)), &ms, &cfg.particle)?;
        let mut s = base_step(bundle, k, t);
        s.estimate = Some(est);
        s.n_eff = set.step_n_eff();
        out.push(s);
    }
    Ok(())
}

/// Tracks every reference of `bundle`, one worker per keypoint. When `out`
/// is given, `<out>.csv` and `<out>.json` are written even if some keypoint
/// fails; the first failure is returned afterwards.
pub fn run_tracking(bundle: &TrajectoryBundle, cfg: &RunConfig, out: Option<&Path>) -> Result<TrackingOutput> {
    cfg.validate()?;
    bundle.validate()?;
    let results: Vec<(TrackRecord, Option<Error>)> =
        (0..bundle.manifest.references.len()).into_par_iter().map(|k| track_keypoint(bundle, k, cfg)).collect();

    let mut records = Vec::with_capacity(results.len());
    let mut summaries = Vec::with_capacity(results.len());
    let mut first_error = None;
    for (record, err) in results {
        let errors: Vec<f64> = record.steps.iter().filter_map(step_error).collect();
        summaries.push(KeypointSummary {
            keypoint: record.keypoint.clone(),
            steps: record.len(),
            mean_gt_error: (!errors.is_empty()).then(|| errors.iter().sum::<f64>() / errors.len() as f64),
            max_gt_error: errors.iter().cloned().reduce(f64::max),
            error: err.as_ref().map(|e| e.to_string()),
        });
        if first_error.is_none() {
            first_error = err;
        }
        records.push(record);
    }
    let csv = records_to_csv(&records)?;
    // partial records may be shorter; aggregate only when complete
    let gt_error = if first_error.is_none() { aggregate(&records, Stat::GtError)? } else { Vec::new() };
    let report = Report {
        scenario: bundle.manifest.scenario.clone(),
        frames: bundle.len(),
        config: cfg.clone(),
        keypoints: summaries,
        gt_error,
    };
    if let Some(base) = out {
        if let Some(parent) = base.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        fs::write(with_suffix(base, "csv"), &csv)?;
        fs::write(with_suffix(base, "json"), serde_json::to_vec_pretty(&report)?)?;
    }
    match first_error {
        Some(e) => Err(e),
        None => Ok(TrackingOutput { records, csv, report }),
    }
}

/// `stem.ext`, keeping any dots already in the stem.
fn with_suffix(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Renders a built-in scenario into a bundle with embedded ground truth.
pub fn simulate(name: &str, seed: u64) -> Result<TrajectoryBundle> {
    let scene = scenario(name)?;
    let refs = scene.references();
    let frames =
        (0..scene.len()).into_par_iter().map(|t| render_frame(&scene, t, &refs, seed)).collect::<Result<Vec<_>>>()?;

    let n_t = scene.len();
    let cameras = scene
        .cameras
        .iter()
        .enumerate()
        .map(|(c, track)| CameraTrack {
            name: format!("cam{c}"),
            intrinsics: track[0].intrinsics,
            poses: track.iter().map(|m| m.pose).collect(),
        })
        .collect();
    let ground_truth = GroundTruthTable {
        positions: (0..scene.keypoints.len())
            .map(|k| frames.iter().map(|f| f.truth[k].position.coords.into()).collect())
            .collect(),
        visible: (0..scene.keypoints.len()).map(|k| frames.iter().map(|f| f.truth[k].visible).collect()).collect(),
    };
    let manifest = Manifest {
        version: FORMAT_VERSION,
        frames: n_t,
        cameras,
        references: refs,
        gripper_deltas: (0..n_t).map(|t| scene.gripper_delta(t).into()).collect(),
        ground_truth: Some(ground_truth),
        scenario: Some(scene.name.clone()),
        seed: Some(seed),
        depth_noise_sigma: Some(scene.depth_noise_sigma),
        events: scene.events.clone(),
    };
    let frames = frames
        .into_iter()
        .map(|f| {
            f.views
                .into_iter()
                .map(|v| CameraFrame {
                    depth: Array2::from_grid(&v.depth),
                    distances: v.distances.iter().map(|d| Array2::from_grid(d.grid())).collect(),
                })
                .collect()
        })
        .collect();
    let bundle = TrajectoryBundle { manifest, frames };
    bundle.validate()?;
    Ok(bundle)
}
