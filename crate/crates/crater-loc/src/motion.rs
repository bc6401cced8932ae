//! Odometry propagation with drift noise.
//!
//! The commanded displacement is given in the rover frame; drift is modeled as
//! i.i.d. zero-mean Gaussian noise per axis with sigma proportional to the
//! step length. Over many unit steps this yields random-walk growth of
//! `drift_fraction * sqrt(distance)` per axis, which users can replace with a
//! correlated model by substituting their own config.

use nalgebra::{Point2, Rotation2, Vector2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::world::{normalize_angle, Pose};

/// One commanded step: rover-frame displacement plus the heading the rover
/// holds after the step (from the trajectory tangent).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdometryStep {
    pub delta: Vector2<f64>,
    pub heading_after: f64,
}

impl OdometryStep {
    pub fn new(delta: Vector2<f64>, heading_after: f64) -> Self {
        Self {
            delta,
            heading_after: normalize_angle(heading_after),
        }
    }

    /// World-frame displacement of the step.
    pub fn world_delta(&self) -> Vector2<f64> {
        Rotation2::new(self.heading_after) * self.delta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotionConfig {
    /// Per-step noise sigma as a fraction of step length (per axis).
    pub drift_fraction: f64,
    /// Sigma of optional heading perturbation fed to the filter, radians.
    pub heading_noise_sigma: f64,
    pub seed: u64,
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self {
            drift_fraction: 0.02,
            heading_noise_sigma: 0.0,
            seed: 0,
        }
    }
}

/// Propagate one particle position through a step, adding drift noise.
/// Always draws exactly two values from `rng`.
pub fn propagate_sample(
    position: &Point2<f64>,
    step: &OdometryStep,
    cfg: &MotionConfig,
    rng: &mut impl Rng,
) -> Point2<f64> {
    let sigma = cfg.drift_fraction * step.delta.norm();
    let nx: f64 = rng.sample(StandardNormal);
    let ny: f64 = rng.sample(StandardNormal);
    position + step.world_delta() + sigma * Vector2::new(nx, ny)
}

/// Noiseless application of a step to the true pose.
pub fn ground_truth_advance(pose: &Pose, step: &OdometryStep) -> Pose {
    Pose::new(pose.position + step.world_delta(), step.heading_after)
}
