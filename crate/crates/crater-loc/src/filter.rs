//! Log-weight particle filter with N_eff-triggered resampling.
//!
//! State is position-only; heading is supplied each step from the trajectory
//! tangent. Weights live in the log domain and are updated with
//! `w_i += q_i - min_j q_j`; the shift by the minimum is pure numerical
//! conditioning and cancels under normalization. Normalization happens lazily
//! inside N_eff and the resamplers via log-sum-exp.

use nalgebra::Point2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::motion::{propagate_sample, MotionConfig, OdometryStep};
use crate::qscore::{log_q_score, QScoreConfig, QScoreError};
use crate::stream::{substream, Domain};
use crate::world::{EdgeObservation, OrbitalMap};

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("total weight collapse: all log-weights are -inf")]
    WeightCollapse,
    #[error("invalid filter config: {0}")]
    InvalidConfig(String),
    #[error("measurement scoring failed: {0}")]
    Score(#[from] QScoreError),
}

/// One position hypothesis with a log-domain weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub position: Point2<f64>,
    pub log_weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Resampler {
    Systematic,
    Multinomial,
    Residual,
    Stratified,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub n_particles: usize,
    pub n_eff_threshold: f64,
    /// Mean of the initial belief distribution (world frame).
    pub init_mean: [f64; 2],
    /// Per-axis sigma of the initial belief distribution.
    pub init_sigma: f64,
    pub resampler: Resampler,
    pub seed: u64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            n_particles: 100,
            n_eff_threshold: 50.0,
            init_mean: [0.0, 0.0],
            init_sigma: 3.0,
            resampler: Resampler::Systematic,
            seed: 0,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), FilterError> {
        if self.n_particles == 0 {
            return Err(FilterError::InvalidConfig("n_particles must be > 0".into()));
        }
        if !(self.n_eff_threshold > 0.0 && self.n_eff_threshold <= self.n_particles as f64) {
            return Err(FilterError::InvalidConfig(format!(
                "n_eff_threshold must be in (0, n_particles], got {}",
                self.n_eff_threshold
            )));
        }
        if self.init_sigma < 0.0 {
            return Err(FilterError::InvalidConfig("init_sigma must be >= 0".into()));
        }
        Ok(())
    }
}

/// Particle set plus the bookkeeping needed to advance one filter cycle.
#[derive(Debug, Clone)]
pub struct FilterState {
    pub particles: Vec<Particle>,
    pub step: u64,
    pub config: FilterConfig,
    pub motion: MotionConfig,
    pub qscore: QScoreConfig,
    /// N_eff after the most recent weight update (n_particles before any).
    pub last_n_eff: f64,
    /// Whether the most recent step resampled.
    pub last_resampled: bool,
}

/// Draw the initial particle set from an isotropic Gaussian around
/// `cfg.init_mean` with unit (log 0) weights.
pub fn init_filter(
    cfg: &FilterConfig,
    motion: &MotionConfig,
    qscore: &QScoreConfig,
) -> Result<FilterState, FilterError> {
    cfg.validate()?;
    let mut rng = substream(cfg.seed, Domain::InitParticles, 0, 0);
    let particles = (0..cfg.n_particles)
        .map(|_| {
            let nx: f64 = rng.sample(StandardNormal);
            let ny: f64 = rng.sample(StandardNormal);
            Particle {
                position: Point2::new(
                    cfg.init_mean[0] + cfg.init_sigma * nx,
                    cfg.init_mean[1] + cfg.init_sigma * ny,
                ),
                log_weight: 0.0,
            }
        })
        .collect();
    Ok(FilterState {
        particles,
        step: 0,
        config: *cfg,
        motion: *motion,
        qscore: *qscore,
        last_n_eff: cfg.n_particles as f64,
        last_resampled: false,
    })
}

impl FilterState {
    /// Build a state from an explicit particle set (diagnostics, degeneracy
    /// studies).
    pub fn from_particles(
        particles: Vec<Particle>,
        cfg: FilterConfig,
        motion: MotionConfig,
        qscore: QScoreConfig,
    ) -> Result<Self, FilterError> {
        if particles.len() != cfg.n_particles {
            return Err(FilterError::InvalidConfig(format!(
                "particle count {} != n_particles {}",
                particles.len(),
                cfg.n_particles
            )));
        }
        let n = particles.len() as f64;
        Ok(Self {
            particles,
            step: 0,
            config: cfg,
            motion,
            qscore,
            last_n_eff: n,
            last_resampled: false,
        })
    }

    /// Advance one filter cycle: propagate, score, update weights, and
    /// resample when N_eff falls to the threshold. An empty observation list
    /// propagates only and leaves the weights untouched.
    pub fn step(
        &mut self,
        odo: &OdometryStep,
        heading: f64,
        observations: &[EdgeObservation],
        map: &OrbitalMap,
    ) -> Result<(), FilterError> {
        self.step += 1;
        let t = self.step;

        for (i, p) in self.particles.iter_mut().enumerate() {
            let mut rng = substream(self.config.seed, Domain::Propagate, t, i as u64);
            p.position = propagate_sample(&p.position, odo, &self.motion, &mut rng);
        }

        self.last_resampled = false;
        if observations.is_empty() {
            return Ok(());
        }

        let mut scores = Vec::with_capacity(self.particles.len());
        for p in &self.particles {
            scores.push(log_q_score(
                &p.position,
                heading,
                observations,
                map,
                &self.qscore,
            )?);
        }
        let q_min = scores.iter().copied().fold(f64::INFINITY, f64::min);
        for (p, q) in self.particles.iter_mut().zip(&scores) {
            p.log_weight += q - q_min;
        }

        self.last_n_eff = n_eff(self.log_weights())?;
        if self.last_n_eff <= self.config.n_eff_threshold {
            let mut rng = substream(self.config.seed, Domain::Resample, t, 0);
            self.particles = match self.config.resampler {
                Resampler::Systematic => resample_systematic(&self.particles, &mut rng),
                Resampler::Multinomial => resample_multinomial(&self.particles, &mut rng),
                Resampler::Residual => resample_residual(&self.particles, &mut rng),
                Resampler::Stratified => resample_stratified(&self.particles, &mut rng),
            }?;
            self.last_resampled = true;
        }
        Ok(())
    }

    fn log_weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.particles.iter().map(|p| p.log_weight)
    }
}

/// Normalize log-weights to linear weights summing to 1 via log-sum-exp.
pub fn normalize_log_weights(
    log_weights: impl IntoIterator<Item = f64>,
) -> Result<Vec<f64>, FilterError> {
    let lw: Vec<f64> = log_weights.into_iter().collect();
    let max = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(FilterError::WeightCollapse);
    }
    let lse = max + lw.iter().map(|w| (w - max).exp()).sum::<f64>().ln();
    Ok(lw.iter().map(|w| (w - lse).exp()).collect())
}

/// Effective sample size `1 / sum(w~_i^2)` over normalized weights.
pub fn n_eff(log_weights: impl IntoIterator<Item = f64>) -> Result<f64, FilterError> {
    let w = normalize_log_weights(log_weights)?;
    Ok(1.0 / w.iter().map(|x| x * x).sum::<f64>())
}

fn fresh(particles: &[Particle], indices: &[usize]) -> Vec<Particle> {
    indices
        .iter()
        .map(|&i| Particle {
            position: particles[i].position,
            log_weight: 0.0,
        })
        .collect()
}

/// Systematic resampling: one uniform offset, then an evenly spaced comb of
/// `n` selection points over the cumulative weights. Copy counts stay within
/// one of `n * w~_i`.
pub fn resample_systematic(
    particles: &[Particle],
    rng: &mut impl Rng,
) -> Result<Vec<Particle>, FilterError> {
    let n = particles.len();
    let u0 = rng.gen_range(0.0..1.0 / n as f64);
    resample_systematic_with_offset(particles, u0)
}

/// Deterministic core of systematic resampling for a given comb offset
/// `u0 in [0, 1/n)`.
pub fn resample_systematic_with_offset(
    particles: &[Particle],
    u0: f64,
) -> Result<Vec<Particle>, FilterError> {
    let weights = normalize_log_weights(particles.iter().map(|p| p.log_weight))?;
    let n = particles.len();
    let mut indices = Vec::with_capacity(n);
    let mut cum = weights[0];
    let mut m = 0usize;
    for k in 0..n {
        let u = u0 + k as f64 / n as f64;
        while cum < u && m + 1 < n {
            m += 1;
            cum += weights[m];
        }
        indices.push(m);
    }
    Ok(fresh(particles, &indices))
}

/// Multinomial resampling: `n` i.i.d. categorical draws.
pub fn resample_multinomial(
    particles: &[Particle],
    rng: &mut impl Rng,
) -> Result<Vec<Particle>, FilterError> {
    let weights = normalize_log_weights(particles.iter().map(|p| p.log_weight))?;
    let cdf = cumulative(&weights);
    let n = particles.len();
    let indices: Vec<usize> = (0..n).map(|_| pick(&cdf, rng.gen::<f64>())).collect();
    Ok(fresh(particles, &indices))
}

/// Residual resampling: deterministic `floor(n * w~_i)` copies, the remainder
/// drawn multinomially from the residual weights.
pub fn resample_residual(
    particles: &[Particle],
    rng: &mut impl Rng,
) -> Result<Vec<Particle>, FilterError> {
    let weights = normalize_log_weights(particles.iter().map(|p| p.log_weight))?;
    let n = particles.len();
    let mut indices = Vec::with_capacity(n);
    let mut residuals = Vec::with_capacity(n);
    for (i, w) in weights.iter().enumerate() {
        let scaled = n as f64 * w;
        let copies = scaled.floor() as usize;
        indices.extend(std::iter::repeat(i).take(copies));
        residuals.push(scaled - copies as f64);
    }
    let remainder = n - indices.len();
    if remainder > 0 {
        let total: f64 = residuals.iter().sum();
        let cdf = cumulative(&residuals.iter().map(|r| r / total).collect::<Vec<_>>());
        for _ in 0..remainder {
            indices.push(pick(&cdf, rng.gen::<f64>()));
        }
    }
    Ok(fresh(particles, &indices))
}

/// Stratified resampling: one independent uniform draw per 1/n stratum.
pub fn resample_stratified(
    particles: &[Particle],
    rng: &mut impl Rng,
) -> Result<Vec<Particle>, FilterError> {
    let weights = normalize_log_weights(particles.iter().map(|p| p.log_weight))?;
    let cdf = cumulative(&weights);
    let n = particles.len();
    let indices: Vec<usize> = (0..n)
        .map(|k| {
            let u = (k as f64 + rng.gen::<f64>()) / n as f64;
            pick(&cdf, u)
        })
        .collect();
    Ok(fresh(particles, &indices))
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    let mut cdf = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in weights {
        acc += w;
        cdf.push(acc);
    }
    if let Some(last) = cdf.last_mut() {
        *last = f64::INFINITY; // absorb rounding in the final bin
    }
    cdf
}

fn pick(cdf: &[f64], u: f64) -> usize {
    cdf.partition_point(|&c| c < u).min(cdf.len() - 1)
}
