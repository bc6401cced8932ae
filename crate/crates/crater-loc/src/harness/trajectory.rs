//! Waypoint trajectories, resampled to fixed-length odometry steps.

use std::path::{Path, PathBuf};

use nalgebra::{Point2, Rotation2};
use thiserror::Error;

use crate::motion::OdometryStep;
use crate::world::Pose;

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("failed to read trajectory {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("trajectory {path}, line {line}: {reason}")]
    Format {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("trajectory {path}: needs at least two distinct waypoints")]
    TooShort { path: PathBuf },
}

/// A ground-truth path: poses at every step boundary plus the odometry steps
/// connecting them. `poses.len() == steps.len() + 1`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub poses: Vec<Pose>,
    pub steps: Vec<OdometryStep>,
}

impl Trajectory {
    pub fn start(&self) -> Pose {
        self.poses[0]
    }

    pub fn len_steps(&self) -> usize {
        self.steps.len()
    }

    /// Load waypoints (CSV `x_m,y_m`) and resample along the polyline at
    /// `step_length` meter increments.
    pub fn load(path: impl AsRef<Path>, step_length: f64) -> Result<Self, TrajectoryError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| TrajectoryError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == "x_m,y_m" => {}
            _ => {
                return Err(TrajectoryError::Format {
                    path: path.to_path_buf(),
                    line: 1,
                    reason: "expected header 'x_m,y_m'".into(),
                })
            }
        }
        let mut waypoints = Vec::new();
        for (i, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 2 {
                return Err(TrajectoryError::Format {
                    path: path.to_path_buf(),
                    line: i + 1,
                    reason: format!("expected 2 fields, got {}", fields.len()),
                });
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| TrajectoryError::Format {
                        path: path.to_path_buf(),
                        line: i + 1,
                        reason: e.to_string(),
                    })
            };
            waypoints.push(Point2::new(parse(fields[0])?, parse(fields[1])?));
        }
        Self::from_waypoints(&waypoints, step_length).ok_or(TrajectoryError::TooShort {
            path: path.to_path_buf(),
        })
    }

    /// Resample a waypoint polyline into equal-length steps. Returns `None`
    /// if the polyline has no length.
    pub fn from_waypoints(waypoints: &[Point2<f64>], step_length: f64) -> Option<Self> {
        let mut positions = Vec::new();
        let total: f64 = waypoints
            .windows(2)
            .map(|w| (w[1] - w[0]).norm())
            .sum();
        if waypoints.len() < 2 || total <= 0.0 {
            return None;
        }
        let n_steps = (total / step_length).floor() as usize;
        // Walk the polyline, emitting a position every step_length meters.
        let mut seg = 0usize;
        let mut seg_pos = 0.0;
        positions.push(waypoints[0]);
        for _ in 0..n_steps {
            let mut remaining = step_length;
            while remaining > 0.0 && seg < waypoints.len() - 1 {
                let seg_vec = waypoints[seg + 1] - waypoints[seg];
                let seg_len = seg_vec.norm();
                let available = seg_len - seg_pos;
                if available > remaining {
                    seg_pos += remaining;
                    remaining = 0.0;
                } else {
                    remaining -= available;
                    seg += 1;
                    seg_pos = 0.0;
                }
            }
            let p = if seg < waypoints.len() - 1 {
                let seg_vec = waypoints[seg + 1] - waypoints[seg];
                waypoints[seg] + seg_vec * (seg_pos / seg_vec.norm())
            } else {
                *waypoints.last().unwrap()
            };
            positions.push(p);
        }

        let mut poses = Vec::with_capacity(positions.len());
        let mut steps = Vec::with_capacity(positions.len() - 1);
        let first_dir = positions[1] - positions[0];
        poses.push(Pose::new(positions[0], first_dir.y.atan2(first_dir.x)));
        for w in positions.windows(2) {
            let d = w[1] - w[0];
            let heading = d.y.atan2(d.x);
            let delta = Rotation2::new(-heading) * d;
            steps.push(OdometryStep::new(delta, heading));
            poses.push(Pose::new(w[1], heading));
        }
        Some(Self { poses, steps })
    }

    /// A straight run along +x from the origin, `length` meters in unit steps.
    pub fn straight_line(length: usize) -> Self {
        let waypoints = [Point2::new(0.0, 0.0), Point2::new(length as f64, 0.0)];
        Self::from_waypoints(&waypoints, 1.0).expect("nonzero length")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn straight_line_unit_steps() {
        let t = Trajectory::straight_line(10);
        assert_eq!(t.len_steps(), 10);
        for s in &t.steps {
            assert_relative_eq!(s.delta.norm(), 1.0, epsilon = 1e-9);
            assert_relative_eq!(s.heading_after, 0.0);
        }
        assert_relative_eq!(t.poses.last().unwrap().position.x, 10.0, epsilon = 1e-9);
    }

    #[test]
    fn resampled_steps_have_unit_length() {
        let waypoints = [
            Point2::new(0.0, 0.0),
            Point2::new(10.0, 3.0),
            Point2::new(15.0, -4.0),
        ];
        let t = Trajectory::from_waypoints(&waypoints, 1.0).unwrap();
        // Steps cover 1 m of arc length; chords across waypoint corners may
        // come out slightly shorter.
        for s in &t.steps {
            assert!(s.delta.norm() <= 1.0 + 1e-9);
            assert!(s.delta.norm() > 0.5);
        }
        // Steps are pure forward motion in the rover frame.
        for s in &t.steps {
            assert!(s.delta.y.abs() < 1e-9);
            assert!(s.delta.x >= 0.0);
        }
    }

    #[test]
    fn poses_follow_steps() {
        use crate::motion::ground_truth_advance;
        let waypoints = [
            Point2::new(0.0, 0.0),
            Point2::new(7.0, 7.0),
            Point2::new(14.0, 0.0),
        ];
        let t = Trajectory::from_waypoints(&waypoints, 1.0).unwrap();
        let mut pose = t.start();
        for (k, s) in t.steps.iter().enumerate() {
            pose = ground_truth_advance(&pose, s);
            assert!((pose.position - t.poses[k + 1].position).norm() < 1e-9);
        }
    }

    #[test]
    fn load_rejects_bad_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        std::fs::write(&path, "a,b\n0,0\n1,1\n").unwrap();
        assert!(matches!(
            Trajectory::load(&path, 1.0),
            Err(TrajectoryError::Format { line: 1, .. })
        ));
    }

    #[test]
    fn load_rejects_degenerate_polyline() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        std::fs::write(&path, "x_m,y_m\n1.0,1.0\n").unwrap();
        assert!(matches!(
            Trajectory::load(&path, 1.0),
            Err(TrajectoryError::TooShort { .. })
        ));
    }
}
