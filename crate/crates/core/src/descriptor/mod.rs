//! Operations downstream of a dense descriptor image: per-reference distance
//! maps, temperature softmax activation maps and 2D keypoint read-out.

mod contrastive;

pub use contrastive::{
    contrastive_loss, scaled_nonmatch_count, ContrastiveBatch, ContrastiveGradient, Match, NonMatch, NonMatchKind,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PixelCoord;
use crate::grid::Grid;

/// Softmax temperature used when none is configured.
pub const DEFAULT_ALPHA: f64 = 4.0;

/// H x W x D descriptor image, stored pixel-major: the D-vector of pixel
/// `(u, v)` starts at `(v * width + u) * dim`.
#[derive(Clone, Debug, PartialEq)]
pub struct DescriptorImage {
    width: usize,
    height: usize,
    dim: usize,
    data: Vec<f64>,
}

impl DescriptorImage {
    pub fn new(width: usize, height: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || dim == 0 {
            return Err(Error::invalid(format!(
                "descriptor image needs positive dimensions, got {width}x{height}x{dim}"
            )));
        }
        if data.len() != width * height * dim {
            return Err(Error::invalid(format!(
                "descriptor image of {width}x{height}x{dim} needs {} values, got {}",
                width * height * dim,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("non-finite descriptor entry at flat index {bad}")));
        }
        Ok(Self { width, height, dim, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn offset(&self, u: usize, v: usize) -> usize {
        (v * self.width + u) * self.dim
    }

    pub fn descriptor(&self, u: usize, v: usize) -> &[f64] {
        let o = self.offset(u, v);
        &self.data[o..o + self.dim]
    }

    pub fn contains(&self, u: usize, v: usize) -> bool {
        u < self.width && v < self.height
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceDescriptor {
    pub label: String,
    pub vector: Vec<f64>,
}

impl ReferenceDescriptor {
    pub fn new(label: impl Into<String>, vector: Vec<f64>) -> Self {
        Self { label: label.into(), vector }
    }
}

/// Per-pixel descriptor distance to one reference. Entries are finite and
/// non-negative.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMap(Grid);

impl DistanceMap {
    pub fn new(grid: Grid) -> Result<Self> {
        if let Some(i) = grid.data().iter().position(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::invalid(format!(
                "distance map entry {i} is {} (must be finite and >= 0)",
                grid.data()[i]
            )));
        }
        Ok(Self(grid))
    }

    pub fn grid(&self) -> &Grid {
        &self.0
    }

    pub fn into_grid(self) -> Grid {
        self.0
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }
}

/// Temperature softmax of a negated distance map. Sums to one.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationMap {
    probabilities: Grid,
    alpha: f64,
}

impl ActivationMap {
    pub fn probabilities(&self) -> &Grid {
        &self.probabilities
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn width(&self) -> usize {
        self.probabilities.width()
    }

    pub fn height(&self) -> usize {
        self.probabilities.height()
    }
}

/// Euclidean distance between every pixel descriptor and `reference`,
/// optionally divided by `sqrt(D)`.
pub fn distance_map(img: &DescriptorImage, reference: &ReferenceDescriptor, normalize: bool) -> Result<DistanceMap> {
    if reference.vector.len() != img.dim {
        return Err(Error::invalid(format!(
            "reference `{}` has dimension {}, image has {}",
            reference.label,
            reference.vector.len(),
            img.dim
        )));
    }
    if reference.vector.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(format!("reference `{}` is not finite", reference.label)));
    }
    let scale = if normalize { 1.0 / (img.dim as f64).sqrt() } else { 1.0 };
    let data = img
        .data
        .chunks_exact(img.dim)
        .map(|d| d.iter().zip(&reference.vector).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() * scale)
        .collect();
    Ok(DistanceMap(Grid::new(img.width, img.height, data)?))
}

/// `softmax(-alpha * dm)`, evaluated with the minimum distance subtracted so
/// the largest exponent is zero.
pub fn activation_map(dm: &DistanceMap, alpha: f64) -> Result<ActivationMap> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!("softmax temperature must be positive, got {alpha}")));
    }
    let grid = dm.grid();
    let min = grid.data().iter().copied().fold(f64::INFINITY, f64::min);
    let mut probabilities = Grid::from_fn(grid.width(), grid.height(), |u, v| (-alpha * (grid.get(u, v) - min)).exp());
    probabilities.normalize();
    Ok(ActivationMap { probabilities, alpha })
}

/// Probability-weighted mean of cell centers, normalized to `[0, 1]^2`.
pub fn expectation_2d(am: &ActivationMap) -> PixelCoord {
    am.probabilities.expectation().normalized(am.width(), am.height())
}

/// Center of the most probable cell, in pixels. Ties resolve to the smallest
/// row-major index.
pub fn mode_2d(am: &ActivationMap) -> PixelCoord {
    am.probabilities.argmax_center()
}
