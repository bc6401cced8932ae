//! Localization and detection metrics.
//!
//! The weighted mean and covariance both use normalized weights; the
//! covariance is the weighted outer product of residuals. The reported
//! uncertainty is sqrt of the largest covariance eigenvalue (worst-case
//! standard deviation); the Mahalanobis distance measures filter consistency
//! against ground truth.

use nalgebra::{Matrix2, Point2, Vector2};
use serde::Serialize;
use thiserror::Error;

use crate::filter::{normalize_log_weights, Particle};
use crate::world::{FrontArc, Pose};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("total weight collapse: all log-weights are -inf")]
    WeightCollapse,
    #[error("zero focal-length * sensor-size product")]
    ZeroFocalProduct,
}

/// Per-step metrics row.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StepMetrics {
    pub step: u64,
    pub gt: [f64; 2],
    pub mean: [f64; 2],
    pub gt_error: f64,
    pub sqrt_lambda_max: f64,
    pub mahalanobis: f64,
    pub n_eff: f64,
    pub resampled: bool,
}

fn normalized(particles: &[Particle]) -> Result<Vec<f64>, MetricsError> {
    normalize_log_weights(particles.iter().map(|p| p.log_weight))
        .map_err(|_| MetricsError::WeightCollapse)
}

/// Weighted average position over normalized weights.
pub fn weighted_mean(particles: &[Particle]) -> Result<Point2<f64>, MetricsError> {
    let w = normalized(particles)?;
    let mut acc = Vector2::zeros();
    for (p, wi) in particles.iter().zip(&w) {
        acc += *wi * p.position.coords;
    }
    Ok(Point2::from(acc))
}

/// Weighted covariance `sum w~_i (b_i - mu)(b_i - mu)^T`.
pub fn weighted_covariance(particles: &[Particle]) -> Result<Matrix2<f64>, MetricsError> {
    let w = normalized(particles)?;
    let mu = weighted_mean(particles)?;
    let mut cov = Matrix2::zeros();
    for (p, wi) in particles.iter().zip(&w) {
        let r = p.position - mu;
        cov += *wi * r * r.transpose();
    }
    Ok(cov)
}

/// Largest eigenvalue of a symmetric 2x2 matrix, closed form.
pub fn lambda_max(m: &Matrix2<f64>) -> f64 {
    let a = m[(0, 0)];
    let b = m[(0, 1)];
    let c = m[(1, 1)];
    (a + c) / 2.0 + (((a - c) / 2.0).powi(2) + b * b).sqrt()
}

fn lambda_min(m: &Matrix2<f64>) -> f64 {
    let a = m[(0, 0)];
    let b = m[(0, 1)];
    let c = m[(1, 1)];
    (a + c) / 2.0 - (((a - c) / 2.0).powi(2) + b * b).sqrt()
}

/// Filter uncertainty: sqrt of the largest covariance eigenvalue, meters.
pub fn uncertainty(particles: &[Particle]) -> Result<f64, MetricsError> {
    Ok(lambda_max(&weighted_covariance(particles)?).max(0.0).sqrt())
}

const MAHALANOBIS_REGULARIZATION: f64 = 1e-9; // m^2
const CONDITION_LIMIT: f64 = 1e12;

/// Mahalanobis distance from the weighted-Gaussian fit of the particle set to
/// the ground-truth position. Ill-conditioned covariances are regularized by
/// `delta * I`; a covariance still singular afterwards yields +inf.
pub fn mahalanobis(particles: &[Particle], gt: &Point2<f64>) -> Result<f64, MetricsError> {
    let mut cov = weighted_covariance(particles)?;
    let lmax = lambda_max(&cov);
    let lmin = lambda_min(&cov);
    if lmin <= 0.0 || lmax / lmin > CONDITION_LIMIT {
        cov += Matrix2::identity() * MAHALANOBIS_REGULARIZATION;
    }
    let mu = weighted_mean(particles)?;
    let d = mu - gt;
    match cov.try_inverse() {
        Some(inv) => Ok((d.transpose() * inv * d)[(0, 0)].max(0.0).sqrt()),
        None => Ok(f64::INFINITY),
    }
}

/// Compute the full per-step metrics row for a particle set.
pub fn step_metrics(
    step: u64,
    particles: &[Particle],
    gt: &Point2<f64>,
    n_eff: f64,
    resampled: bool,
) -> Result<StepMetrics, MetricsError> {
    let mu = weighted_mean(particles)?;
    Ok(StepMetrics {
        step,
        gt: [gt.x, gt.y],
        mean: [mu.x, mu.y],
        gt_error: (mu - gt).norm(),
        sqrt_lambda_max: uncertainty(particles)?,
        mahalanobis: mahalanobis(particles, gt)?,
        n_eff,
        resampled,
    })
}

/// Convert an image-space detection error to meters:
/// `err_px * range_gt / (focal_length * sensor_size)`.
pub fn pixel_error_to_meters(
    err_px: f64,
    range_gt: f64,
    focal_length: f64,
    sensor_size: f64,
) -> Result<f64, MetricsError> {
    let fl_ss = focal_length * sensor_size;
    if fl_ss == 0.0 {
        return Err(MetricsError::ZeroFocalProduct);
    }
    Ok(err_px * range_gt / fl_ss)
}

/// Detection quality score: mean Gaussian response of the distance errors.
/// Empty input scores 0.
pub fn gaussian_edge_score(distance_errors: &[f64], sigma: f64) -> f64 {
    if distance_errors.is_empty() {
        return 0.0;
    }
    let sum: f64 = distance_errors
        .iter()
        .map(|d| (-d * d / (2.0 * sigma * sigma)).exp())
        .sum();
    sum / distance_errors.len() as f64
}

/// Default sigma for [`gaussian_edge_score`], matched to the 0.25 m map
/// resolution.
pub const EDGE_SCORE_SIGMA: f64 = 0.25;

/// Percent of the front arc covered by detections: the fraction of arc
/// samples with at least one detection within `tolerance`, times 100.
pub fn front_arc_percent(
    detections: &[Point2<f64>],
    pose: &Pose,
    crater: &crate::world::Crater,
    arc_sample_spacing: f64,
    tolerance: f64,
) -> f64 {
    let arc: FrontArc = match crate::world::front_arc(pose, crater) {
        Ok(a) => a,
        Err(_) => return 0.0,
    };
    let samples = arc.sample_points(arc_sample_spacing);
    if samples.is_empty() {
        return 0.0;
    }
    let hit = samples
        .iter()
        .filter(|s| detections.iter().any(|d| (*d - **s).norm() <= tolerance))
        .count();
    100.0 * hit as f64 / samples.len() as f64
}
