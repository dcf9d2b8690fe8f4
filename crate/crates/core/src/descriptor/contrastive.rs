//! Pixelwise contrastive loss over a pair of descriptor images, with its
//! analytic gradient. Used to check descriptor geometry, not to train.

use crate::error::{Error, Result};

use super::DescriptorImage;

pub type Pixel = (usize, usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NonMatchKind {
    Foreground,
    Background,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NonMatch {
    /// Pixel `(u, v)` in image b.
    pub pixel: Pixel,
    pub kind: NonMatchKind,
}

/// A corresponding pixel pair plus the non-matches sampled for `a`.
#[derive(Clone, Debug, PartialEq)]
pub struct Match {
    pub a: Pixel,
    pub b: Pixel,
    pub non_matches: Vec<NonMatch>,
}

#[derive(Clone, Debug)]
pub struct ContrastiveBatch {
    pub image_a: DescriptorImage,
    pub image_b: DescriptorImage,
    pub matches: Vec<Match>,
    pub margin_fg: f64,
    pub margin_bg: f64,
}

/// Gradients laid out like the descriptor images they belong to.
#[derive(Clone, Debug, PartialEq)]
pub struct ContrastiveGradient {
    pub grad_a: Vec<f64>,
    pub grad_b: Vec<f64>,
}

impl ContrastiveBatch {
    fn validate(&self) -> Result<()> {
        if self.matches.is_empty() {
            return Err(Error::invalid("contrastive batch has no matches"));
        }
        if self.image_a.dim() != self.image_b.dim() {
            return Err(Error::invalid(format!(
                "descriptor dimensions differ: {} vs {}",
                self.image_a.dim(),
                self.image_b.dim()
            )));
        }
        if !(self.margin_fg >= 0.0 && self.margin_bg >= self.margin_fg && self.margin_bg.is_finite()) {
            return Err(Error::invalid(format!(
                "margins must satisfy 0 <= fg <= bg, got fg={} bg={}",
                self.margin_fg, self.margin_bg
            )));
        }
        for m in &self.matches {
            let in_b = |p: Pixel| self.image_b.contains(p.0, p.1);
            if !self.image_a.contains(m.a.0, m.a.1) || !in_b(m.b) || m.non_matches.iter().any(|n| !in_b(n.pixel)) {
                return Err(Error::invalid(format!(
                    "match {:?} -> {:?} references a pixel outside the images",
                    m.a, m.b
                )));
            }
        }
        Ok(())
    }

    fn margin(&self, kind: NonMatchKind) -> f64 {
        match kind {
            NonMatchKind::Foreground => self.margin_fg,
            NonMatchKind::Background => self.margin_bg,
        }
    }
}

/// Match term `||a - b||^2 / m` summed over matches plus, per match, the hinge
/// `max(0, M - ||a - c||^2) / n` over its non-matches, where `m` is the match
/// count and `n` that match's own non-match count. `M` is the foreground or
/// background margin depending on the non-match's tag. The hinge gradient at
/// exactly `M` is taken as zero.
pub fn contrastive_loss(batch: &ContrastiveBatch) -> Result<(f64, ContrastiveGradient)> {
    batch.validate()?;
    let (ia, ib) = (&batch.image_a, &batch.image_b);
    let dim = ia.dim();
    let m = batch.matches.len() as f64;
    let mut grad = ContrastiveGradient { grad_a: vec![0.0; ia.data().len()], grad_b: vec![0.0; ib.data().len()] };
    let mut loss = 0.0;
    let mut diff = vec![0.0; dim];

    for mt in &batch.matches {
        let ea = ia.descriptor(mt.a.0, mt.a.1);
        let oa = ia.offset(mt.a.0, mt.a.1);

        let eb = ib.descriptor(mt.b.0, mt.b.1);
        let ob = ib.offset(mt.b.0, mt.b.1);
        let mut sq = 0.0;
        for k in 0..dim {
            diff[k] = ea[k] - eb[k];
            sq += diff[k] * diff[k];
        }
        loss += sq / m;
        for k in 0..dim {
            let g = 2.0 * diff[k] / m;
            grad.grad_a[oa + k] += g;
            grad.grad_b[ob + k] -= g;
        }

        let n = mt.non_matches.len() as f64;
        for nm in &mt.non_matches {
            let ec = ib.descriptor(nm.pixel.0, nm.pixel.1);
            let oc = ib.offset(nm.pixel.0, nm.pixel.1);
            let mut sq = 0.0;
            for k in 0..dim {
                diff[k] = ea[k] - ec[k];
                sq += diff[k] * diff[k];
            }
            let slack = batch.margin(nm.kind) - sq;
            if slack > 0.0 {
                loss += slack / n;
                for k in 0..dim {
                    let g = 2.0 * diff[k] / n;
                    grad.grad_a[oa + k] -= g;
                    grad.grad_b[oc + k] += g;
                }
            }
        }
    }
    Ok((loss, grad))
}

/// Number of masked non-matches to sample when the object mask covers
/// `mask_pixels` of `total_pixels`: `round(base * mask / total)`, at least one
/// whenever the mask is non-empty.
pub fn scaled_nonmatch_count(base_count: usize, mask_pixels: usize, total_pixels: usize) -> usize {
    if total_pixels == 0 || mask_pixels == 0 || base_count == 0 {
        return 0;
    }
    let mask_pixels = mask_pixels.min(total_pixels);
    let scaled = (base_count as f64 * mask_pixels as f64 / total_pixels as f64).round() as usize;
    scaled.max(1)
}
