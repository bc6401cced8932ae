//! Orbital crater map, coordinate frames, and the geometric queries shared by
//! the synthetic sensor and the measurement score.
//!
//! The world is planar. Craters are circles in the world frame; the rover pose
//! is a position plus a heading supplied externally (star-tracker assumption).

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{Point2, Rotation2, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("map contains no craters")]
    EmptyMap,
    #[error("duplicate crater id {0}")]
    DuplicateId(i64),
    #[error("crater {id}: {reason}")]
    InvalidCrater { id: i64, reason: String },
    #[error("rover exactly at crater center; front arc undefined")]
    RoverAtCenter,
    #[error("failed to read map file: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse map file: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Circular landmark in the world frame. `depth` is carried as metadata and
/// never enters scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct Crater {
    pub id: i64,
    pub center: Point2<f64>,
    pub diameter: f64,
    pub depth: f64,
}

impl Crater {
    pub fn radius(&self) -> f64 {
        self.diameter / 2.0
    }
}

/// Axis-aligned rectangle in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub min: Point2<f64>,
    pub max: Point2<f64>,
}

/// The set of known craters the filter localizes against.
#[derive(Debug, Clone)]
pub struct OrbitalMap {
    craters: Vec<Crater>,
    bounds: Bounds,
}

/// On-disk record: one object per crater.
#[derive(Debug, Serialize, Deserialize)]
struct CraterRecord {
    id: i64,
    x_m: f64,
    y_m: f64,
    diameter_m: f64,
    depth_m: f64,
}

impl OrbitalMap {
    pub fn new(craters: Vec<Crater>) -> Result<Self, WorldError> {
        if craters.is_empty() {
            return Err(WorldError::EmptyMap);
        }
        let mut seen = std::collections::HashSet::new();
        for c in &craters {
            if !seen.insert(c.id) {
                return Err(WorldError::DuplicateId(c.id));
            }
            if !(c.diameter > 0.0) {
                return Err(WorldError::InvalidCrater {
                    id: c.id,
                    reason: format!("diameter must be positive, got {}", c.diameter),
                });
            }
            if !(c.depth > 0.0) {
                return Err(WorldError::InvalidCrater {
                    id: c.id,
                    reason: format!("depth must be positive, got {}", c.depth),
                });
            }
        }
        let mut min = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut max = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for c in &craters {
            let r = c.radius();
            min.x = min.x.min(c.center.x - r);
            min.y = min.y.min(c.center.y - r);
            max.x = max.x.max(c.center.x + r);
            max.y = max.y.max(c.center.y + r);
        }
        Ok(Self {
            craters,
            bounds: Bounds { min, max },
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, WorldError> {
        let text = std::fs::read_to_string(path)?;
        let records: Vec<CraterRecord> = serde_json::from_str(&text)?;
        Self::new(
            records
                .into_iter()
                .map(|r| Crater {
                    id: r.id,
                    center: Point2::new(r.x_m, r.y_m),
                    diameter: r.diameter_m,
                    depth: r.depth_m,
                })
                .collect(),
        )
    }

    pub fn craters(&self) -> &[Crater] {
        &self.craters
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }
}

/// Rover position plus heading, heading normalized to (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Point2<f64>,
    pub heading: f64,
}

impl Pose {
    pub fn new(position: Point2<f64>, heading: f64) -> Self {
        Self {
            position,
            heading: normalize_angle(heading),
        }
    }
}

/// Wrap an angle into (-pi, pi].
pub fn normalize_angle(theta: f64) -> f64 {
    let mut a = theta.rem_euclid(2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// One detected leading-edge point, expressed as a rover-frame displacement
/// (forward, left) in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeObservation {
    pub forward: f64,
    pub left: f64,
}

impl EdgeObservation {
    pub fn new(forward: f64, left: f64) -> Self {
        Self { forward, left }
    }

    pub fn range(&self) -> f64 {
        (self.forward * self.forward + self.left * self.left).sqrt()
    }
}

/// Transform a rover-frame observation into the world frame:
/// `pose.position + R(heading) * offset`.
pub fn rover_to_world(pose: &Pose, obs: &EdgeObservation) -> Point2<f64> {
    let rot = Rotation2::new(pose.heading);
    pose.position + rot * Vector2::new(obs.forward, obs.left)
}

/// Analytic distance from a world point to the nearest crater rim:
/// `min over craters of | ||p - center|| - radius |`.
pub fn nearest_rim_distance(p: &Point2<f64>, map: &OrbitalMap) -> Result<f64, WorldError> {
    map.craters()
        .iter()
        .map(|c| ((p - c.center).norm() - c.radius()).abs())
        .fold(None, |best: Option<f64>, d| {
            Some(best.map_or(d, |b| b.min(d)))
        })
        .ok_or(WorldError::EmptyMap)
}

/// Half of a crater rim: the closed arc centered on the direction from the
/// crater center toward the rover, spanning +-pi/2.
#[derive(Debug, Clone, Copy)]
pub struct FrontArc {
    pub crater_center: Point2<f64>,
    pub radius: f64,
    /// Rim angle (from crater center) pointing toward the rover.
    pub center_angle: f64,
}

impl FrontArc {
    /// Rim point at `angle` radians from the crater center.
    pub fn point_at(&self, angle: f64) -> Point2<f64> {
        self.crater_center + self.radius * Vector2::new(angle.cos(), angle.sin())
    }

    /// Evenly spaced rim points covering the half arc at approximately
    /// `spacing` meters apart, endpoints included.
    pub fn sample_points(&self, spacing: f64) -> Vec<Point2<f64>> {
        let arc_len = PI * self.radius;
        let n = ((arc_len / spacing).floor() as usize).max(1) + 1;
        (0..n)
            .map(|k| {
                let t = k as f64 / (n - 1) as f64;
                let angle = self.center_angle - PI / 2.0 + t * PI;
                self.point_at(angle)
            })
            .collect()
    }
}

/// The rim half facing the rover.
pub fn front_arc(pose: &Pose, crater: &Crater) -> Result<FrontArc, WorldError> {
    let to_rover = pose.position - crater.center;
    if to_rover.norm() < 1e-12 {
        return Err(WorldError::RoverAtCenter);
    }
    Ok(FrontArc {
        crater_center: crater.center,
        radius: crater.radius(),
        center_angle: to_rover.y.atan2(to_rover.x),
    })
}
