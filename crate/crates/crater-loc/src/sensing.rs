//! Synthetic leading-edge crater detector.
//!
//! Stands in for an image-based detection pipeline: it reproduces the measured
//! detection envelope (fraction of the front arc detected as a function of
//! range to the leading rim) without rendering anything. The filter only ever
//! sees rover-frame edge points, so detections from this model and from a real
//! pipeline are interchangeable.
//!
//! Range-noise and false-positive defaults are modeling assumptions exposed in
//! the config, not measured values.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::Rotation2;
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{front_arc, normalize_angle, EdgeObservation, OrbitalMap, Pose};

#[derive(Debug, Error)]
pub enum SensingError {
    #[error("failed to read observation log: {0}")]
    Io(#[from] std::io::Error),
    #[error("observation log line {line}: {reason}")]
    Format { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorConfig {
    pub max_range: f64,
    pub full_detect_range: f64,
    /// Fraction of the front arc detected at or below `full_detect_range`.
    pub arc_fraction_at_full: f64,
    pub fov_half_angle: f64,
    pub range_noise_sigma_fraction: f64,
    /// Expected spurious detections per frame.
    pub false_positive_rate: f64,
    /// Rim sample spacing in meters of arc length.
    pub arc_sample_spacing: f64,
    /// Probability multiplier for far-arc (back rim) detections; 0 disables.
    pub back_rim_rate: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            max_range: 20.0,
            full_detect_range: 10.0,
            arc_fraction_at_full: 0.8,
            fov_half_angle: 35f64.to_radians(),
            range_noise_sigma_fraction: 0.01,
            false_positive_rate: 0.2,
            arc_sample_spacing: 0.25,
            back_rim_rate: 0.0,
        }
    }
}

impl SensorConfig {
    /// Noise-free, loss-free variant for debug runs on perfect data.
    pub fn perfect(mut self) -> Self {
        self.full_detect_range = self.max_range;
        self.arc_fraction_at_full = 1.0;
        self.range_noise_sigma_fraction = 0.0;
        self.false_positive_rate = 0.0;
        self.back_rim_rate = 0.0;
        self
    }
}

/// Fraction of the leading arc detected at a given range to the front rim.
/// Flat at `arc_fraction_at_full` out to `full_detect_range`, then linearly
/// decaying to zero at `max_range`.
pub fn detection_fraction(range: f64, cfg: &SensorConfig) -> f64 {
    if range <= cfg.full_detect_range {
        cfg.arc_fraction_at_full
    } else if range >= cfg.max_range {
        0.0
    } else {
        cfg.arc_fraction_at_full * (cfg.max_range - range) / (cfg.max_range - cfg.full_detect_range)
    }
}

fn in_fov(forward: f64, left: f64, cfg: &SensorConfig) -> bool {
    if forward <= 0.0 {
        return false;
    }
    left.atan2(forward).abs() <= cfg.fov_half_angle
}

/// Simulate one frame of leading-edge detections from the true pose.
///
/// Craters are visited in map order; per crater, the front arc is sampled at
/// `arc_sample_spacing` and each sample kept independently with probability
/// equal to the detection fraction at the crater's leading-rim range, then
/// perturbed with Gaussian noise along the line of sight. Spurious points are
/// appended Poisson-distributed over the sensed wedge.
pub fn observe(
    true_pose: &Pose,
    map: &OrbitalMap,
    cfg: &SensorConfig,
    rng: &mut impl Rng,
) -> Vec<EdgeObservation> {
    let mut out = Vec::new();
    if cfg.max_range <= 0.0 {
        return out;
    }
    let to_rover_frame = Rotation2::new(-true_pose.heading);

    for crater in map.craters() {
        let to_center = crater.center - true_pose.position;
        let center_dist = to_center.norm();
        if center_dist < 1e-12 {
            continue;
        }
        let rim_range = (center_dist - crater.radius()).abs();
        if rim_range > cfg.max_range {
            continue;
        }
        // Leading rim point, rover frame.
        let nearest_rim = to_center * ((center_dist - crater.radius()) / center_dist);
        let nr = to_rover_frame * nearest_rim;
        if !in_fov(nr.x, nr.y, cfg) {
            continue;
        }
        let keep_p = detection_fraction(rim_range, cfg);

        let arc = match front_arc(true_pose, crater) {
            Ok(a) => a,
            Err(_) => continue,
        };
        emit_arc_samples(&arc.sample_points(cfg.arc_sample_spacing), keep_p, true_pose, cfg, rng, &mut out);

        if cfg.back_rim_rate > 0.0 {
            let mut back = arc;
            back.center_angle = normalize_angle(arc.center_angle + std::f64::consts::PI);
            emit_arc_samples(
                &back.sample_points(cfg.arc_sample_spacing),
                keep_p * cfg.back_rim_rate,
                true_pose,
                cfg,
                rng,
                &mut out,
            );
        }
    }

    if cfg.false_positive_rate > 0.0 {
        let poisson = Poisson::new(cfg.false_positive_rate).expect("positive rate");
        let count = poisson.sample(rng) as u64;
        for _ in 0..count {
            let bearing = rng.gen_range(-cfg.fov_half_angle..=cfg.fov_half_angle);
            // sqrt for uniform density over the wedge area
            let range = cfg.max_range * rng.gen::<f64>().sqrt();
            out.push(EdgeObservation::new(
                range * bearing.cos(),
                range * bearing.sin(),
            ));
        }
    }
    out
}

fn emit_arc_samples(
    samples: &[nalgebra::Point2<f64>],
    keep_p: f64,
    true_pose: &Pose,
    cfg: &SensorConfig,
    rng: &mut impl Rng,
    out: &mut Vec<EdgeObservation>,
) {
    let to_rover_frame = Rotation2::new(-true_pose.heading);
    for sample in samples {
        let offset = to_rover_frame * (sample - true_pose.position);
        let range = offset.norm();
        if range > cfg.max_range || !in_fov(offset.x, offset.y, cfg) {
            continue;
        }
        if rng.gen::<f64>() >= keep_p {
            continue;
        }
        let sigma = cfg.range_noise_sigma_fraction * range;
        let noise: f64 = rng.sample(StandardNormal);
        let scale = (range + sigma * noise) / range;
        out.push(EdgeObservation::new(offset.x * scale, offset.y * scale));
    }
}

/// Replay log: CSV `step,forward_m,left_m`, grouped by step.
pub fn load_observation_log(
    path: impl AsRef<Path>,
) -> Result<BTreeMap<u64, Vec<EdgeObservation>>, SensingError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == "step,forward_m,left_m" => {}
        _ => {
            return Err(SensingError::Format {
                line: 1,
                reason: "expected header 'step,forward_m,left_m'".into(),
            })
        }
    }
    let mut log: BTreeMap<u64, Vec<EdgeObservation>> = BTreeMap::new();
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(SensingError::Format {
                line: i + 1,
                reason: format!("expected 3 fields, got {}", fields.len()),
            });
        }
        let parse = |s: &str| {
            s.trim().parse::<f64>().map_err(|e| SensingError::Format {
                line: i + 1,
                reason: e.to_string(),
            })
        };
        let step = fields[0]
            .trim()
            .parse::<u64>()
            .map_err(|e| SensingError::Format {
                line: i + 1,
                reason: e.to_string(),
            })?;
        log.entry(step)
            .or_default()
            .push(EdgeObservation::new(parse(fields[1])?, parse(fields[2])?));
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::{substream, Domain};
    use crate::world::{nearest_rim_distance, rover_to_world, Crater, OrbitalMap};
    use approx::assert_relative_eq;
    use nalgebra::Point2;

    fn one_crater_map(x: f64, y: f64, d: f64) -> OrbitalMap {
        OrbitalMap::new(vec![Crater {
            id: 1,
            center: Point2::new(x, y),
            diameter: d,
            depth: 1.0,
        }])
        .unwrap()
    }

    #[test]
    fn envelope_anchors() {
        let cfg = SensorConfig::default();
        assert_relative_eq!(detection_fraction(10.0, &cfg), 0.8);
        assert_relative_eq!(detection_fraction(20.0, &cfg), 0.0);
        assert_relative_eq!(detection_fraction(15.0, &cfg), 0.4);
        assert_relative_eq!(detection_fraction(0.0, &cfg), 0.8);
        assert_relative_eq!(detection_fraction(25.0, &cfg), 0.0);
    }

    #[test]
    fn out_of_range_crater_gives_empty_frame() {
        let cfg = SensorConfig {
            false_positive_rate: 0.0,
            ..Default::default()
        };
        let map = one_crater_map(50.0, 0.0, 9.2);
        let pose = Pose::new(Point2::new(0.0, 0.0), 0.0);
        let mut rng = substream(1, Domain::Sense, 0, 0);
        assert!(observe(&pose, &map, &cfg, &mut rng).is_empty());
    }

    #[test]
    fn detected_fraction_near_80_percent_at_10m() {
        let cfg = SensorConfig {
            false_positive_rate: 0.0,
            range_noise_sigma_fraction: 0.0,
            ..Default::default()
        };
        // Rover 10 m from the leading rim of crater 1, crater dead ahead.
        let map = one_crater_map(14.6, 0.0, 9.2);
        let pose = Pose::new(Point2::new(0.0, 0.0), 0.0);
        let n_samples = {
            let arc = front_arc(&pose, &map.craters()[0]).unwrap();
            arc.sample_points(cfg.arc_sample_spacing).len()
        };
        let mut total = 0usize;
        let seeds = 100;
        for s in 0..seeds {
            let mut rng = substream(s, Domain::Sense, 0, 0);
            total += observe(&pose, &map, &cfg, &mut rng).len();
        }
        let frac = total as f64 / (seeds as usize * n_samples) as f64;
        assert!((frac - 0.8).abs() < 0.05, "detected fraction {frac}");
    }

    #[test]
    fn noiseless_points_lie_on_front_arc() {
        let cfg = SensorConfig {
            false_positive_rate: 0.0,
            range_noise_sigma_fraction: 0.0,
            full_detect_range: 20.0,
            arc_fraction_at_full: 1.0,
            ..Default::default()
        };
        // Crater dead ahead at 5 m from the leading rim.
        let map = one_crater_map(7.2, 0.0, 4.4);
        let pose = Pose::new(Point2::new(0.0, 0.0), 0.0);
        let mut rng = substream(3, Domain::Sense, 0, 0);
        let obs = observe(&pose, &map, &cfg, &mut rng);
        assert!(!obs.is_empty());
        for o in &obs {
            let w = rover_to_world(&pose, o);
            assert!(nearest_rim_distance(&w, &map).unwrap() < 1e-9);
            assert!(o.forward > 0.0);
        }
    }

    #[test]
    fn observations_respect_range_and_fov() {
        let cfg = SensorConfig::default();
        let map = OrbitalMap::new(vec![
            Crater {
                id: 1,
                center: Point2::new(12.0, 3.0),
                diameter: 9.2,
                depth: 1.0,
            },
            Crater {
                id: 2,
                center: Point2::new(15.0, -6.0),
                diameter: 4.4,
                depth: 0.55,
            },
        ])
        .unwrap();
        let pose = Pose::new(Point2::new(0.0, 0.0), 0.2);
        for s in 0..50 {
            let mut rng = substream(s, Domain::Sense, 0, 0);
            for o in observe(&pose, &map, &cfg, &mut rng) {
                let sigma = cfg.range_noise_sigma_fraction * o.range();
                assert!(o.range() <= cfg.max_range + 3.0 * sigma + 1e-9);
                assert!(o.left.atan2(o.forward).abs() <= cfg.fov_half_angle + 1e-9);
            }
        }
    }

    #[test]
    fn detection_count_non_increasing_in_range() {
        let cfg = SensorConfig {
            false_positive_rate: 0.0,
            ..Default::default()
        };
        let map = one_crater_map(0.0, 0.0, 9.2);
        let mut means = Vec::new();
        for rim_range in [6.0, 10.0, 14.0, 18.0] {
            let pose = Pose::new(Point2::new(-(4.6 + rim_range), 0.0), 0.0);
            let mut total = 0usize;
            for s in 0..200 {
                let mut rng = substream(s, Domain::Sense, rim_range as u64, 0);
                total += observe(&pose, &map, &cfg, &mut rng).len();
            }
            means.push(total as f64 / 200.0);
        }
        // Statistical: allow sampling slack between ties in the flat region.
        for w in means.windows(2) {
            assert!(w[1] <= w[0] * 1.02 + 0.5, "counts {means:?}");
        }
    }

    #[test]
    fn false_positives_have_expected_rate() {
        let cfg = SensorConfig {
            false_positive_rate: 0.5,
            ..Default::default()
        };
        // No crater in range; every observation is spurious.
        let map = one_crater_map(500.0, 0.0, 9.2);
        let pose = Pose::new(Point2::new(0.0, 0.0), 0.0);
        let trials = 4000;
        let mut total = 0usize;
        for s in 0..trials {
            let mut rng = substream(s, Domain::Sense, 0, 0);
            total += observe(&pose, &map, &cfg, &mut rng).len();
        }
        let mean = total as f64 / trials as f64;
        assert!((mean - 0.5).abs() < 0.05, "fp rate {mean}");
    }

    #[test]
    fn observation_log_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        std::fs::write(&path, "step,forward_m,left_m\n0,5.0,1.0\n0,6.0,-1.0\n2,4.5,0.0\n").unwrap();
        let log = load_observation_log(&path).unwrap();
        assert_eq!(log[&0].len(), 2);
        assert_eq!(log[&2], vec![EdgeObservation::new(4.5, 0.0)]);
        assert!(!log.contains_key(&1));
    }

    #[test]
    fn observation_log_bad_header_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        std::fs::write(&path, "a,b,c\n").unwrap();
        assert!(matches!(
            load_observation_log(&path),
            Err(SensingError::Format { line: 1, .. })
        ));
    }
}
