//! Q-Score measurement likelihood.
//!
//! Scores a position hypothesis against the orbital map: transform each
//! rover-frame edge observation into the world using the hypothesis, accumulate
//! the distance to the nearest crater rim, and map the mean distance through a
//! clamped reciprocal into (0, 1]. Hypotheses whose mean rim distance is below
//! one meter all saturate at 1.

use nalgebra::Point2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{nearest_rim_distance, rover_to_world, EdgeObservation, OrbitalMap, Pose};

#[derive(Debug, Error)]
pub enum QScoreError {
    #[error("no observations; skip the weight update for this step")]
    NoObservations,
    #[error("map contains no craters")]
    EmptyMap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QScoreConfig {
    /// Guard added to the accumulated distance before the reciprocal.
    pub epsilon: f64,
}

impl Default for QScoreConfig {
    fn default() -> Self {
        Self { epsilon: 1e-6 }
    }
}

/// Score a belief position in (0, 1]: `min(1, (mean rim distance)^-1)` with an
/// epsilon guard on the accumulator.
pub fn q_score(
    belief: &Point2<f64>,
    heading: f64,
    observations: &[EdgeObservation],
    map: &OrbitalMap,
    cfg: &QScoreConfig,
) -> Result<f64, QScoreError> {
    if observations.is_empty() {
        return Err(QScoreError::NoObservations);
    }
    if map.craters().is_empty() {
        return Err(QScoreError::EmptyMap);
    }
    let pose = Pose::new(*belief, heading);
    let mut q_inc = cfg.epsilon;
    for obs in observations {
        let world = rover_to_world(&pose, obs);
        q_inc += nearest_rim_distance(&world, map).map_err(|_| QScoreError::EmptyMap)?;
    }
    let mean = q_inc / observations.len() as f64;
    Ok((1.0 / mean).min(1.0))
}

/// Natural log of the Q-Score; exactly 0 when the score clamps at 1.
pub fn log_q_score(
    belief: &Point2<f64>,
    heading: f64,
    observations: &[EdgeObservation],
    map: &OrbitalMap,
    cfg: &QScoreConfig,
) -> Result<f64, QScoreError> {
    q_score(belief, heading, observations, map, cfg).map(f64::ln)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::Crater;
    use approx::assert_relative_eq;

    fn map_single(x: f64, y: f64, d: f64) -> OrbitalMap {
        OrbitalMap::new(vec![Crater {
            id: 1,
            center: Point2::new(x, y),
            diameter: d,
            depth: 1.0,
        }])
        .unwrap()
    }

    #[test]
    fn on_rim_observations_clamp_to_one() {
        let map = map_single(10.0, 0.0, 10.0);
        // Belief at origin, heading 0; rim point straight ahead at x = 5.
        let obs = vec![EdgeObservation::new(5.0, 0.0)];
        let cfg = QScoreConfig::default();
        let s = q_score(&Point2::new(0.0, 0.0), 0.0, &obs, &map, &cfg).unwrap();
        assert_relative_eq!(s, 1.0, epsilon = 1e-12);
        assert_relative_eq!(
            log_q_score(&Point2::new(0.0, 0.0), 0.0, &obs, &map, &cfg).unwrap(),
            0.0
        );
    }

    #[test]
    fn mean_distance_four_scores_quarter() {
        // Two observations at rim distances 3 and 5: mean 4 -> score 0.25.
        let map = map_single(0.0, 0.0, 10.0);
        let obs = vec![
            EdgeObservation::new(8.0, 0.0),  // |8 - 5| = 3
            EdgeObservation::new(10.0, 0.0), // |10 - 5| = 5
        ];
        let cfg = QScoreConfig { epsilon: 1e-12 };
        let s = q_score(&Point2::new(0.0, 0.0), 0.0, &obs, &map, &cfg).unwrap();
        assert_relative_eq!(s, 0.25, epsilon = 1e-9);
        let l = log_q_score(&Point2::new(0.0, 0.0), 0.0, &obs, &map, &cfg).unwrap();
        assert_relative_eq!(l, -1.3863, epsilon = 1e-4);
    }

    #[test]
    fn sub_meter_mean_clamps() {
        // Single observation at rim distance 0.5: raw 2.0 clamps to 1.
        let map = map_single(0.0, 0.0, 10.0);
        let obs = vec![EdgeObservation::new(5.5, 0.0)];
        let cfg = QScoreConfig { epsilon: 1e-12 };
        let s = q_score(&Point2::new(0.0, 0.0), 0.0, &obs, &map, &cfg).unwrap();
        assert_relative_eq!(s, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn log_of_half_score() {
        // Single observation at rim distance 2: score 0.5.
        let map = map_single(0.0, 0.0, 10.0);
        let obs = vec![EdgeObservation::new(7.0, 0.0)];
        let cfg = QScoreConfig { epsilon: 1e-12 };
        let l = log_q_score(&Point2::new(0.0, 0.0), 0.0, &obs, &map, &cfg).unwrap();
        assert_relative_eq!(l, -0.6931, epsilon = 1e-4);
    }

    #[test]
    fn empty_observations_signal() {
        let map = map_single(0.0, 0.0, 10.0);
        let cfg = QScoreConfig::default();
        assert!(matches!(
            q_score(&Point2::new(0.0, 0.0), 0.0, &[], &map, &cfg),
            Err(QScoreError::NoObservations)
        ));
    }

    #[test]
    fn score_in_unit_interval_and_log_nonpositive() {
        let map = map_single(3.0, -4.0, 9.2);
        let cfg = QScoreConfig::default();
        for k in 0..200 {
            let x = (k as f64) * 0.37 - 30.0;
            let obs = vec![
                EdgeObservation::new(1.0 + (k % 7) as f64, (k % 5) as f64 - 2.0),
                EdgeObservation::new(4.0, 1.5),
            ];
            let s = q_score(&Point2::new(x, x * 0.3), 0.4, &obs, &map, &cfg).unwrap();
            assert!(s > 0.0 && s <= 1.0);
            assert!(s.ln() <= 0.0);
        }
    }

    #[test]
    fn translation_invariance() {
        let cfg = QScoreConfig::default();
        let obs = vec![
            EdgeObservation::new(6.0, 1.0),
            EdgeObservation::new(9.0, -2.0),
        ];
        for shift in [
            nalgebra::Vector2::new(13.7, -42.1),
            nalgebra::Vector2::new(-5.0, 8.25),
        ] {
            let map_a = map_single(10.0, 2.0, 9.2);
            let map_b = map_single(10.0 + shift.x, 2.0 + shift.y, 9.2);
            let belief = Point2::new(1.0, -1.0);
            let a = q_score(&belief, 0.3, &obs, &map_a, &cfg).unwrap();
            let b = q_score(&(belief + shift), 0.3, &obs, &map_b, &cfg).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn score_non_increasing_along_offset_ray() {
        // Single-crater map; push the belief progressively off the rim.
        let map = map_single(0.0, 0.0, 10.0);
        let cfg = QScoreConfig::default();
        let obs = vec![EdgeObservation::new(5.0, 0.0)];
        let mut prev = f64::INFINITY;
        for k in 0..60 {
            let offset = k as f64 * 0.5;
            let s = q_score(&Point2::new(0.0, offset), 0.0, &obs, &map, &cfg).unwrap();
            assert!(s <= prev + 1e-12, "offset {offset}: {s} > {prev}");
            prev = s;
        }
    }
}
