//! Pixel-space Bayes filter for a single moving camera.
//!
//! The belief lives on the pixel grid of the camera it was last expressed in.
//! Prediction moves every cell's mass into the new camera's grid using the
//! previous depth map, then diffuses it with a Gaussian random walk; the
//! update multiplies by the softmax activation map of the current distance
//! map.

use serde::{Deserialize, Serialize};

use crate::descriptor::{activation_map, DistanceMap, DEFAULT_ALPHA};
use crate::error::{Error, Result};
use crate::geometry::{CameraModel, PixelCoord, WorldPoint};
use crate::grid::{is_valid_depth, DepthMap, Grid};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscreteFilterConfig {
    /// Random-walk standard deviation, pixels.
    pub sigma_r: f64,
    /// Softmax temperature.
    pub alpha: f64,
    /// Added to every cell after each update.
    pub epsilon_floor: f64,
}

impl Default for DiscreteFilterConfig {
    fn default() -> Self {
        Self { sigma_r: 1.0, alpha: DEFAULT_ALPHA, epsilon_floor: 1e-12 }
    }
}

impl DiscreteFilterConfig {
    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        if !(self.sigma_r >= 0.0) || !self.sigma_r.is_finite() {
            return Err(Error::invalid(format!("sigma_r must be >= 0, got {}", self.sigma_r)));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::invalid(format!("alpha must be > 0, got {}", self.alpha)));
        }
        let cells = (width * height) as f64;
        if !(self.epsilon_floor >= 0.0 && self.epsilon_floor < 1.0 / cells) {
            return Err(Error::invalid(format!(
                "epsilon_floor must lie in [0, 1/{cells}), got {}",
                self.epsilon_floor
            )));
        }
        Ok(())
    }
}

/// Discrete posterior over the pixel grid of `camera`.
#[derive(Clone, Debug, PartialEq)]
pub struct PixelBelief {
    grid: Grid,
    camera: CameraModel,
}

/// Keypoint read-out of a belief: normalized 2D expectation, plus depth and a
/// 3D point when the belief covers any valid depth reading.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KeypointEstimate {
    pub pixel: PixelCoord,
    pub depth: Option<f64>,
    pub position: Option<WorldPoint>,
}

impl PixelBelief {
    pub fn init_uniform(width: usize, height: usize, camera: CameraModel) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("belief grid must be at least 1x1"));
        }
        if camera.width() != width || camera.height() != height {
            return Err(Error::invalid(format!(
                "belief grid {width}x{height} does not match a {}x{} camera",
                camera.width(),
                camera.height()
            )));
        }
        let cells = (width * height) as f64;
        Ok(Self { grid: Grid::filled(width, height, 1.0 / cells), camera })
    }

    /// Wraps an arbitrary non-negative grid, normalizing it.
    pub fn from_grid(mut grid: Grid, camera: CameraModel) -> Result<Self> {
        if grid.width() != camera.width() || grid.height() != camera.height() {
            return Err(Error::invalid("belief grid does not match camera image size"));
        }
        if grid.data().iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::invalid("belief entries must be finite and >= 0"));
        }
        if !(grid.normalize() > 0.0) {
            return Err(Error::invalid("belief has no mass"));
        }
        Ok(Self { grid, camera })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn camera(&self) -> &CameraModel {
        &self.camera
    }

    /// Motion step: reproject into `new_camera` using `depth_prev` (the depth
    /// map of the frame the belief is currently expressed in), then diffuse.
    pub fn predict(&self, new_camera: &CameraModel, depth_prev: &DepthMap, cfg: &DiscreteFilterConfig) -> Result<Self> {
        if !self.grid.same_shape(depth_prev) {
            return Err(Error::invalid(format!(
                "depth map is {}x{}, belief is {}x{}",
                depth_prev.width(),
                depth_prev.height(),
                self.grid.width(),
                self.grid.height()
            )));
        }
        if new_camera.width() != self.grid.width() || new_camera.height() != self.grid.height() {
            return Err(Error::invalid("new camera image size differs from the belief grid"));
        }
        cfg.validate(self.grid.width(), self.grid.height())?;

        let mut moved = self.reproject(new_camera, depth_prev);
        if cfg.sigma_r > 0.0 {
            moved = gaussian_diffuse(&moved, cfg.sigma_r);
        }
        moved.normalize();
        Ok(Self { grid: moved, camera: *new_camera })
    }

    fn reproject(&self, dst: &CameraModel, depth: &DepthMap) -> Grid {
        let (w, h) = (self.grid.width(), self.grid.height());
        if *dst == self.camera {
            return self.grid.clone();
        }
        let fallback = median_valid_depth(depth);
        let mut out = Grid::filled(w, h, 0.0);
        let mut lost = 0.0;
        for (i, &mass) in self.grid.data().iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let (u, v) = self.grid.coords(i);
            let center = Grid::cell_center(u, v);
            let d = depth.get(u, v);
            let d = if is_valid_depth(d) { Some(d) } else { fallback };
            let target = match d {
                Some(d) => {
                    // backproject cannot fail: d > 0
                    let world = self.camera.backproject(center, d).expect("positive depth");
                    let (px, z) = dst.project(&world);
                    if z > 0.0 {
                        px
                    } else {
                        lost += mass;
                        continue;
                    }
                }
                None => center,
            };
            lost += splat_bilinear(&mut out, target, mass);
        }
        if lost > 0.0 {
            let share = lost / (w * h) as f64;
            out.data_mut().iter_mut().for_each(|x| *x += share);
        }
        out
    }

    /// Measurement step: cellwise product with the activation map, floor, and
    /// renormalization.
    pub fn update(&self, dm: &DistanceMap, cfg: &DiscreteFilterConfig) -> Result<Self> {
        if !self.grid.same_shape(dm.grid()) {
            return Err(Error::invalid(format!(
                "distance map is {}x{}, belief is {}x{}",
                dm.width(),
                dm.height(),
                self.grid.width(),
                self.grid.height()
            )));
        }
        cfg.validate(self.grid.width(), self.grid.height())?;
        let act = activation_map(dm, cfg.alpha)?;
        let mut grid = self.grid.clone();
        for (p, a) in grid.data_mut().iter_mut().zip(act.probabilities().data()) {
            *p = *p * a + cfg.epsilon_floor;
        }
        let total = grid.normalize();
        if !(total > 0.0) || !total.is_finite() {
            // prior and likelihood have disjoint support; restart from the measurement
            grid = act.probabilities().clone();
        }
        Ok(Self { grid, camera: self.camera })
    }

    /// 2D expectation, belief-weighted depth over valid readings, and the
    /// backprojection of the one at the other.
    pub fn estimate(&self, depth: &DepthMap) -> Result<KeypointEstimate> {
        if !self.grid.same_shape(depth) {
            return Err(Error::invalid("depth map does not match the belief grid"));
        }
        let px = self.grid.expectation();
        let (mut wsum, mut dsum) = (0.0, 0.0);
        for (&p, &d) in self.grid.data().iter().zip(depth.data()) {
            if is_valid_depth(d) {
                wsum += p;
                dsum += p * d;
            }
        }
        let depth = (wsum > 0.0).then(|| dsum / wsum);
        let position = match depth {
            Some(d) => Some(self.camera.backproject(px, d)?),
            None => None,
        };
        Ok(KeypointEstimate { pixel: px.normalized(self.grid.width(), self.grid.height()), depth, position })
    }
}

/// Deposits `mass` at continuous pixel `px` onto the four nearest cell
/// centers. Returns the portion that fell outside the grid.
fn splat_bilinear(grid: &mut Grid, px: PixelCoord, mass: f64) -> f64 {
    let (x, y) = (px.u - 0.5, px.v - 0.5);
    if !x.is_finite() || !y.is_finite() {
        return mass;
    }
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let mut lost = 0.0;
    for (dx, wx) in [(0.0, 1.0 - fx), (1.0, fx)] {
        for (dy, wy) in [(0.0, 1.0 - fy), (1.0, fy)] {
            let share = mass * wx * wy;
            if share == 0.0 {
                continue;
            }
            let (cu, cv) = (x0 + dx, y0 + dy);
            if cu >= 0.0 && cv >= 0.0 && (cu as usize) < grid.width() && (cv as usize) < grid.height() {
                let (cu, cv) = (cu as usize, cv as usize);
                let i = grid.index(cu, cv);
                grid.data_mut()[i] += share;
            } else {
                lost += share;
            }
        }
    }
    lost
}

fn median_valid_depth(depth: &DepthMap) -> Option<f64> {
    let mut valid: Vec<f64> = depth.data().iter().copied().filter(|d| is_valid_depth(*d)).collect();
    if valid.is_empty() {
        return None;
    }
    valid.sort_by(f64::total_cmp);
    Some(valid[valid.len() / 2])
}

/// Separable Gaussian random walk truncated at 4 sigma. Each source cell
/// spreads its mass over the in-grid part of its kernel, renormalized, so the
/// total is conserved and nothing is pushed off the edges.
pub(crate) fn gaussian_diffuse(grid: &Grid, sigma: f64) -> Grid {
    let (w, h) = (grid.width(), grid.height());
    let radius = (4.0 * sigma).ceil() as usize;
    let kernel: Vec<f64> =
        (0..=radius.min(w.max(h))).map(|d| (-(d as f64).powi(2) / (2.0 * sigma * sigma)).exp()).collect();
    let kx = LineKernel::new(&kernel, radius, w);
    let ky = LineKernel::new(&kernel, radius, h);

    let mut tmp = vec![0.0; w * h];
    for v in 0..h {
        let row = &grid.data()[v * w..(v + 1) * w];
        kx.apply(row, &mut tmp[v * w..(v + 1) * w]);
    }
    let mut out = vec![0.0; w * h];
    let mut column = vec![0.0; h];
    let mut column_out = vec![0.0; h];
    for u in 0..w {
        for v in 0..h {
            column[v] = tmp[v * w + u];
        }
        column_out.iter_mut().for_each(|x| *x = 0.0);
        ky.apply(&column, &mut column_out);
        for v in 0..h {
            out[v * w + u] = column_out[v];
        }
    }
    Grid::new(w, h, out).expect("same shape")
}

struct LineKernel<'a> {
    kernel: &'a [f64],
    radius: usize,
    len: usize,
    /// Per-source normalizer over the in-line part of the kernel.
    norm: Vec<f64>,
}

impl<'a> LineKernel<'a> {
    fn new(kernel: &'a [f64], radius: usize, len: usize) -> Self {
        let mut k = Self { kernel, radius, len, norm: Vec::with_capacity(len) };
        for s in 0..len {
            let (lo, hi) = k.span(s);
            let z: f64 = (lo..=hi).map(|t| k.weight(s, t)).sum();
            k.norm.push(z);
        }
        k
    }

    fn span(&self, s: usize) -> (usize, usize) {
        (s.saturating_sub(self.radius), (s + self.radius).min(self.len - 1))
    }

    #[inline]
    fn weight(&self, s: usize, t: usize) -> f64 {
        self.kernel[s.abs_diff(t)]
    }

    fn apply(&self, input: &[f64], output: &mut [f64]) {
        for (s, &mass) in input.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let scale = mass / self.norm[s];
            let (lo, hi) = self.span(s);
            for t in lo..=hi {
                output[t] += scale * self.weight(s, t);
            }
        }
    }
}
