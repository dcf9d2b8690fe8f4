//! Row-major scalar image used for distance maps, activation maps, depth maps
//! and pixel beliefs.
//!
//! Cell `(u, v)` (column `u`, row `v`) covers `[u, u+1) x [v, v+1)` in
//! continuous pixel coordinates; its center is `(u + 0.5, v + 0.5)`.

use crate::error::{Error, Result};
use crate::geometry::PixelCoord;

#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

/// Depth image in meters. Invalid readings (dropouts, no return) are NaN.
pub type DepthMap = Grid;

/// A depth reading is usable iff it is finite and strictly positive.
pub fn is_valid_depth(d: f64) -> bool {
    d.is_finite() && d > 0.0
}

impl Grid {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!("grid dimensions must be positive, got {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(Error::invalid(format!(
                "grid of {width}x{height} needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0, "grid dimensions must be positive");
        Self { width, height, data: vec![value; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0, "grid dimensions must be positive");
        let mut data = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                data.push(f(u, v));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, u: usize, v: usize) -> usize {
        debug_assert!(u < self.width && v < self.height);
        v * self.width + u
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.data[self.index(u, v)]
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, value: f64) {
        let i = self.index(u, v);
        self.data[i] = value;
    }

    /// Column/row of flat index `i`.
    #[inline]
    pub fn coords(&self, i: usize) -> (usize, usize) {
        (i % self.width, i / self.width)
    }

    /// Center of cell `(u, v)` in continuous pixel coordinates.
    #[inline]
    pub fn cell_center(u: usize, v: usize) -> PixelCoord {
        PixelCoord::new(u as f64 + 0.5, v as f64 + 0.5)
    }

    /// The cell containing continuous pixel `px`, if it lies on the grid.
    pub fn cell_at(&self, px: PixelCoord) -> Option<(usize, usize)> {
        if !(px.u >= 0.0 && px.v >= 0.0) {
            return None;
        }
        let (u, v) = (px.u.floor() as usize, px.v.floor() as usize);
        (u < self.width && v < self.height).then_some((u, v))
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Bilinear interpolation between cell centers, clamped to the border
    /// cells outside the outermost centers.
    pub fn bilinear(&self, px: PixelCoord) -> f64 {
        let x = (px.u - 0.5).clamp(0.0, (self.width - 1) as f64);
        let y = (px.v - 0.5).clamp(0.0, (self.height - 1) as f64);
        let (u0, v0) = (x.floor() as usize, y.floor() as usize);
        let (u1, v1) = ((u0 + 1).min(self.width - 1), (v0 + 1).min(self.height - 1));
        let (fx, fy) = (x - u0 as f64, y - v0 as f64);
        let top = self.get(u0, v0) * (1.0 - fx) + self.get(u1, v0) * fx;
        let bottom = self.get(u0, v1) * (1.0 - fx) + self.get(u1, v1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    /// Divides by the total. Returns the total that was divided out.
    pub(crate) fn normalize(&mut self) -> f64 {
        let total = self.sum();
        if total > 0.0 && total.is_finite() {
            self.data.iter_mut().for_each(|x| *x /= total);
        }
        total
    }

    /// Probability-weighted mean of cell centers, in pixels. Assumes the grid
    /// holds a normalized distribution.
    pub fn expectation(&self) -> PixelCoord {
        let (mut su, mut sv) = (0.0, 0.0);
        for (i, &p) in self.data.iter().enumerate() {
            let (u, v) = self.coords(i);
            su += p * (u as f64 + 0.5);
            sv += p * (v as f64 + 0.5);
        }
        PixelCoord::new(su, sv)
    }

    /// Center of the largest cell; ties go to the smallest row-major index.
    pub fn argmax_center(&self) -> PixelCoord {
        let mut best = 0;
        for (i, &p) in self.data.iter().enumerate() {
            if p > self.data[best] {
                best = i;
            }
        }
        let (u, v) = self.coords(best);
        Self::cell_center(u, v)
    }
}
