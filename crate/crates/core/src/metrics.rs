//! Tracking metrics: 3D ground-truth error, mean-mode distance as a
//! multimodality indicator, and per-timestep aggregation across keypoints
//! and trajectories.

use serde::Serialize;

use crate::descriptor::{expectation_2d, mode_2d, ActivationMap};
use crate::error::{Error, Result};
use crate::geometry::{PixelCoord, WorldPoint};
use crate::grid::Grid;

/// One timestep of one tracked keypoint.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackStep {
    pub t: usize,
    pub estimate: Option<WorldPoint>,
    /// Normalized image coordinates, when the tracker works in pixel space.
    pub estimate_px: Option<PixelCoord>,
    pub ground_truth: Option<WorldPoint>,
    pub visible: bool,
    /// Particle filter only.
    pub n_eff: Option<f64>,
    /// Unfiltered and discrete trackers only.
    pub mean_mode_px: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackRecord {
    pub keypoint: String,
    pub steps: Vec<TrackStep>,
}

impl TrackRecord {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Euclidean distance between estimate and ground truth per timestep;
/// `None` where either is missing.
pub fn gt_error(record: &TrackRecord) -> Vec<Option<f64>> {
    record.steps.iter().map(step_error).collect()
}

pub(crate) fn step_error(s: &TrackStep) -> Option<f64> {
    Some((s.estimate? - s.ground_truth?).norm())
}

/// Pixel distance between the expectation and the mode of an activation map.
pub fn mean_mode_distance(am: &ActivationMap) -> f64 {
    let e = expectation_2d(am).denormalized(am.width(), am.height());
    e.distance(&mode_2d(am))
}

/// Same as [`mean_mode_distance`] for any normalized density on the pixel
/// grid, such as a discrete-filter belief.
pub fn mean_mode_distance_grid(density: &Grid) -> f64 {
    density.expectation().distance(&density.argmax_center())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stat {
    GtError,
    MeanModePx,
    NEff,
}

impl Stat {
    fn of(self, s: &TrackStep) -> Option<f64> {
        match self {
            Stat::GtError => step_error(s),
            Stat::MeanModePx => s.mean_mode_px,
            Stat::NEff => s.n_eff,
        }
    }
}

/// Mean and population standard deviation of one statistic at one timestep.
/// Records where the statistic is undefined are left out and counted in
/// `excluded`; `mean` and `std` are `None` when nothing is left.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AggregateRow {
    pub t: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub count: usize,
    pub excluded: usize,
}

/// Aggregates across records (keypoints x trajectories) but not over time.
pub fn aggregate(records: &[TrackRecord], stat: Stat) -> Result<Vec<AggregateRow>> {
    let Some(first) = records.first() else {
        return Ok(Vec::new());
    };
    let t_len = first.len();
    if let Some(r) = records.iter().find(|r| r.len() != t_len) {
        return Err(Error::invalid(format!("record `{}` has {} steps, expected {t_len}", r.keypoint, r.len())));
    }
    Ok((0..t_len)
        .map(|t| {
            let values: Vec<f64> = records.iter().filter_map(|r| stat.of(&r.steps[t])).collect();
            let n = values.len();
            let (mean, std) = if n == 0 {
                (None, None)
            } else {
                let m = values.iter().sum::<f64>() / n as f64;
                let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
                (Some(m), Some(var.sqrt()))
            };
            AggregateRow { t, mean, std, count: n, excluded: records.len() - n }
        })
        .collect())
}
