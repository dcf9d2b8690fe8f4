use crate::descriptor::DistanceMap;
use crate::error::{Error, Result};
use crate::geometry::{CameraModel, WorldPoint};
use crate::grid::{is_valid_depth, DepthMap};

use super::ParticleFilterConfig;

/// One camera's observation: distance map and depth map on the camera's
/// pixel grid. Invalid depth cells are NaN.
#[derive(Clone, Debug, PartialEq)]
pub struct Measurement {
    pub camera: CameraModel,
    pub distance: DistanceMap,
    pub depth: DepthMap,
}

impl Measurement {
    pub fn new(camera: CameraModel, distance: DistanceMap, depth: DepthMap) -> Result<Self> {
        let (w, h) = (camera.width(), camera.height());
        if distance.width() != w || distance.height() != h || depth.width() != w || depth.height() != h {
            return Err(Error::invalid(format!(
                "measurement arrays ({}x{} distance, {}x{} depth) must match the {w}x{h} camera",
                distance.width(),
                distance.height(),
                depth.width(),
                depth.height()
            )));
        }
        Ok(Self { camera, distance, depth })
    }

    pub fn has_valid_depth(&self) -> bool {
        self.depth.data().iter().any(|d| is_valid_depth(*d))
    }
}

/// Probability that the reading `measured` comes from something in front of
/// a point at depth `expected`: one minus the Gaussian CDF of the reading
/// under a sensor centered `epsilon` in front of the point.
pub fn occlusion_probability(measured: f64, expected: f64, epsilon: f64, sigma_d: f64) -> f64 {
    let z = (measured - (expected - epsilon)) / (sigma_d * std::f64::consts::SQRT_2);
    0.5 * libm::erfc(z)
}

/// Combined likelihood of a particle at `position`:
///
/// * outside the view frustum: `tau`;
/// * otherwise `p_o * tau + (1 - p_o) * p_d * p_c` with `p_o` the occlusion
///   probability, `p_d` the peak-normalized Gaussian depth likelihood and
///   `p_c = exp(-alpha * distance)` sampled bilinearly at the particle's
///   pixel.
///
/// Invalid depth at the particle's pixel counts as occluded.
pub fn measurement_likelihood(position: &WorldPoint, m: &Measurement, cfg: &ParticleFilterConfig) -> f64 {
    let (px, expected) = m.camera.project(position);
    if !(expected > 0.0) || !m.camera.pixel_in_image(px) {
        return cfg.tau;
    }
    let Some((u, v)) = m.depth.cell_at(px) else {
        return cfg.tau;
    };
    let measured = m.depth.get(u, v);
    if !is_valid_depth(measured) {
        return cfg.tau;
    }
    let p_o = occlusion_probability(measured, expected, cfg.epsilon, cfg.sigma_d);
    let r = (measured - expected) / cfg.sigma_d;
    let p_d = (-0.5 * r * r).exp();
    let p_c = (-cfg.alpha * m.distance.grid().bilinear(px)).exp();
    p_o * cfg.tau + (1.0 - p_o) * p_d * p_c
}
