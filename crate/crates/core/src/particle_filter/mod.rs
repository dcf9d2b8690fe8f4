//! World-frame particle filter over 3D keypoint locations.
//!
//! Each step predicts with a Gaussian random walk plus a Bernoulli-gated copy
//! of the gripper translation, weights particles with the combined
//! correspondence/depth/occlusion likelihood of every camera, injects a few
//! fresh hypotheses from the current observations, and resamples
//! (stratified) when the effective sample size gets low.

mod measurement;
mod resample;

pub use measurement::{measurement_likelihood, occlusion_probability, Measurement};
pub use resample::stratified_indices;

use nalgebra::Vector3;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descriptor::{activation_map, DEFAULT_ALPHA};
use crate::error::{Error, Result};
use crate::geometry::WorldPoint;
use crate::grid::{is_valid_depth, Grid};

/// Below this many particles likelihoods are evaluated on the calling thread.
const PARALLEL_THRESHOLD: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParticleFilterConfig {
    pub n_particles: usize,
    /// Random-walk standard deviation per axis, meters.
    pub sigma_r: f64,
    /// Probability that a particle follows the gripper in a step.
    pub p_w: f64,
    /// Correspondence temperature.
    pub alpha: f64,
    /// Depth sensor noise, meters.
    pub sigma_d: f64,
    /// Occlusion margin, meters.
    pub epsilon: f64,
    /// Likelihood of particles that are occluded or out of view.
    pub tau: f64,
    /// Resample when n_eff drops below this fraction of the particle count.
    pub neff_frac: f64,
    /// Per-particle, per-observation replacement probability.
    pub p_inject: f64,
}

impl Default for ParticleFilterConfig {
    fn default() -> Self {
        Self {
            n_particles: 500,
            sigma_r: 0.005,
            p_w: 0.1,
            alpha: DEFAULT_ALPHA,
            sigma_d: 0.01,
            epsilon: 0.05,
            tau: 0.1,
            neff_frac: 0.5,
            p_inject: 0.02,
        }
    }
}

impl ParticleFilterConfig {
    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.n_particles >= 1, "n_particles must be >= 1"),
            (self.sigma_r >= 0.0 && self.sigma_r.is_finite(), "sigma_r must be >= 0"),
            ((0.0..=1.0).contains(&self.p_w), "p_w must lie in [0, 1]"),
            (self.alpha > 0.0 && self.alpha.is_finite(), "alpha must be > 0"),
            (self.sigma_d > 0.0 && self.sigma_d.is_finite(), "sigma_d must be > 0"),
            (self.epsilon >= 0.0 && self.epsilon.is_finite(), "epsilon must be >= 0"),
            (self.tau > 0.0 && self.tau < 1.0, "tau must lie in (0, 1)"),
            (self.neff_frac > 0.0 && self.neff_frac <= 1.0, "neff_frac must lie in (0, 1]"),
            ((0.0..=1.0).contains(&self.p_inject), "p_inject must lie in [0, 1]"),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::invalid(*msg)),
            None => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Particle {
    pub position: WorldPoint,
    pub weight: f64,
}

/// World-frame end-effector translation over one step.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct GripperMotion {
    pub delta: Vector3<f64>,
}

impl GripperMotion {
    pub fn new(delta: Vector3<f64>) -> Self {
        Self { delta }
    }
}

/// Weighted particles plus the random stream that drives them.
#[derive(Clone, Debug)]
pub struct ParticleSet {
    particles: Vec<Particle>,
    rng: ChaCha8Rng,
    degenerate: bool,
    step_n_eff: Option<f64>,
}

impl ParticleSet {
    /// Uniformly weighted particles at the given positions.
    pub fn from_positions(positions: Vec<WorldPoint>, seed: u64) -> Result<Self> {
        Self::from_positions_with_rng(positions, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn from_positions_with_rng(positions: Vec<WorldPoint>, rng: ChaCha8Rng) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::invalid("a particle set needs at least one particle"));
        }
        if positions.iter().any(|p| !p.coords.iter().all(|x| x.is_finite())) {
            return Err(Error::invalid("particle positions must be finite"));
        }
        let w = 1.0 / positions.len() as f64;
        Ok(Self {
            particles: positions.into_iter().map(|position| Particle { position, weight: w }).collect(),
            rng,
            degenerate: false,
            step_n_eff: None,
        })
    }

    /// Draws `n_particles` cells from the activation map restricted to cells
    /// with valid depth and backprojects their centers at the measured depth.
    pub fn init_from_measurement(m: &Measurement, cfg: &ParticleFilterConfig, seed: u64) -> Result<Self> {
        Self::init_from_measurement_with_rng(m, cfg, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn init_from_measurement_with_rng(
        m: &Measurement,
        cfg: &ParticleFilterConfig,
        mut rng: ChaCha8Rng,
    ) -> Result<Self> {
        cfg.validate()?;
        let sampler = ObservationSampler::new(m, cfg.alpha)?
            .ok_or_else(|| Error::Initialization("measurement has no valid depth reading".into()))?;
        let positions = (0..cfg.n_particles).map(|_| sampler.sample(&mut rng)).collect();
        Self::from_positions_with_rng(positions, rng)
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Set when the last update found every likelihood to be zero and fell
    /// back to uniform weights.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Effective sample size seen by the last [`ParticleSet::step`], before
    /// any resampling.
    pub fn step_n_eff(&self) -> Option<f64> {
        self.step_n_eff
    }

    pub fn weight_sum(&self) -> f64 {
        self.particles.iter().map(|p| p.weight).sum()
    }

    /// Random walk plus Bernoulli-gated gripper translation. Weights are
    /// untouched.
    pub fn predict(&mut self, g: &GripperMotion, cfg: &ParticleFilterConfig) -> Result<()> {
        cfg.validate()?;
        let noise = Normal::new(0.0, cfg.sigma_r).map_err(|e| Error::invalid(e.to_string()))?;
        for p in &mut self.particles {
            if cfg.sigma_r > 0.0 {
                let step =
                    Vector3::new(noise.sample(&mut self.rng), noise.sample(&mut self.rng), noise.sample(&mut self.rng));
                p.position += step;
            }
            if cfg.p_w > 0.0 && self.rng.random_bool(cfg.p_w) {
                p.position += g.delta;
            }
        }
        Ok(())
    }

    /// Multiplies weights by the measurement likelihood and renormalizes.
    pub fn update(&mut self, m: &Measurement, cfg: &ParticleFilterConfig) -> Result<()> {
        cfg.validate()?;
        let likelihoods: Vec<f64> = if self.particles.len() >= PARALLEL_THRESHOLD {
            self.particles.par_iter().map(|p| measurement_likelihood(&p.position, m, cfg)).collect()
        } else {
            self.particles.iter().map(|p| measurement_likelihood(&p.position, m, cfg)).collect()
        };
        for (p, l) in self.particles.iter_mut().zip(&likelihoods) {
            p.weight *= l;
        }
        let total = self.weight_sum();
        if total > 0.0 && total.is_finite() {
            self.particles.iter_mut().for_each(|p| p.weight /= total);
            self.degenerate = false;
        } else {
            self.reset_weights();
            self.degenerate = true;
        }
        Ok(())
    }

    fn reset_weights(&mut self) {
        let w = 1.0 / self.particles.len() as f64;
        self.particles.iter_mut().for_each(|p| p.weight = w);
    }

    fn renormalize(&mut self) {
        let total = self.weight_sum();
        if total > 0.0 && total.is_finite() {
            self.particles.iter_mut().for_each(|p| p.weight /= total);
        } else {
            self.reset_weights();
        }
    }

    /// `1 / sum(w_i^2)`.
    pub fn n_eff(&self) -> f64 {
        1.0 / self.particles.iter().map(|p| p.weight * p.weight).sum::<f64>()
    }

    /// Stratified resampling to uniform weights.
    pub fn resample_stratified(&mut self) {
        let weights: Vec<f64> = self.particles.iter().map(|p| p.weight).collect();
        let indices = stratified_indices(&weights, &mut self.rng);
        let w = 1.0 / self.particles.len() as f64;
        self.particles =
            indices.into_iter().map(|i| Particle { position: self.particles[i].position, weight: w }).collect();
    }

    /// Replaces each particle with probability `p_inject` by a fresh draw from
    /// the observation. Replacements get the pre-injection mean weight. No-op
    /// when the measurement has no valid depth.
    pub fn inject_random(&mut self, m: &Measurement, cfg: &ParticleFilterConfig) -> Result<()> {
        cfg.validate()?;
        if cfg.p_inject == 0.0 {
            return Ok(());
        }
        let Some(sampler) = ObservationSampler::new(m, cfg.alpha)? else {
            return Ok(());
        };
        let mean_weight = self.weight_sum() / self.particles.len() as f64;
        let mut replaced = false;
        for p in &mut self.particles {
            if self.rng.random_bool(cfg.p_inject) {
                p.position = sampler.sample(&mut self.rng);
                p.weight = mean_weight;
                replaced = true;
            }
        }
        if replaced {
            self.renormalize();
        }
        Ok(())
    }

    /// Weighted mean position.
    pub fn estimate(&self) -> WorldPoint {
        let mut acc = Vector3::zeros();
        for p in &self.particles {
            acc += p.position.coords * p.weight;
        }
        WorldPoint::from(acc)
    }

    /// One filter step: predict, update with every measurement in order,
    /// inject per measurement, resample if needed, estimate.
    pub fn step(
        &mut self,
        g: &GripperMotion,
        measurements: &[Measurement],
        cfg: &ParticleFilterConfig,
    ) -> Result<WorldPoint> {
        self.predict(g, cfg)?;
        for m in measurements {
            self.update(m, cfg)?;
        }
        for m in measurements {
            self.inject_random(m, cfg)?;
        }
        let n_eff = self.n_eff();
        self.step_n_eff = Some(n_eff);
        if n_eff < cfg.neff_frac * self.particles.len() as f64 {
            self.resample_stratified();
        }
        Ok(self.estimate())
    }
}

/// Draws 3D points from an observation's activation map over valid-depth
/// cells.
struct ObservationSampler<'a> {
    m: &'a Measurement,
    cells: Vec<usize>,
    index: WeightedIndex<f64>,
}

impl<'a> ObservationSampler<'a> {
    fn new(m: &'a Measurement, alpha: f64) -> Result<Option<Self>> {
        let act = activation_map(&m.distance, alpha)?;
        let probs = act.probabilities().data();
        let (cells, weights): (Vec<usize>, Vec<f64>) =
            m.depth.data().iter().enumerate().filter(|(_, d)| is_valid_depth(**d)).map(|(i, _)| (i, probs[i])).unzip();
        if cells.is_empty() {
            return Ok(None);
        }
        let index = match WeightedIndex::new(&weights) {
            Ok(index) => index,
            // activation underflowed to zero on every valid cell
            Err(_) => WeightedIndex::new(vec![1.0; cells.len()]).expect("non-empty uniform weights"),
        };
        Ok(Some(Self { m, cells, index }))
    }

    fn sample(&self, rng: &mut impl Rng) -> WorldPoint {
        let i = self.cells[self.index.sample(rng)];
        let (u, v) = self.m.depth.coords(i);
        self.m.camera.backproject(Grid::cell_center(u, v), self.m.depth.data()[i]).expect("valid depth is positive")
    }
}

#[cfg(test)]
mod tests;
