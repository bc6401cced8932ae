//! Single trials, Monte Carlo batches, and the resampler sweep.
//!
//! Everything is a pure function of (config, seed): observations, particle
//! propagation, and resampling each draw from substreams derived from the
//! trial seed, so identical inputs reproduce identical outputs byte for byte.

use nalgebra::Point2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

use crate::filter::{init_filter, FilterError, Particle, Resampler};
use crate::metrics::{step_metrics, MetricsError, StepMetrics};
use crate::sensing::{load_observation_log, observe};
use crate::stream::{substream, Domain};
use crate::world::{normalize_angle, OrbitalMap, WorldError};

use super::config::{ConfigError, ExperimentConfig};
use super::trajectory::{Trajectory, TrajectoryError};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error("observation log: {0}")]
    ObservationLog(#[from] crate::sensing::SensingError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
}

/// Per-step particle snapshot for `--dump-state`.
#[derive(Debug, Clone, Serialize)]
pub struct StateSnapshot {
    pub step: u64,
    pub particles: Vec<SnapshotParticle>,
    pub n_eff: f64,
    pub resampled: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SnapshotParticle {
    pub x: f64,
    pub y: f64,
    pub log_w: f64,
}

/// Everything produced by one trial.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub seed: u64,
    pub records: Vec<StepMetrics>,
    pub states: Vec<StateSnapshot>,
    /// Set when the filter collapsed mid-run; records stop at that step.
    pub failed: bool,
}

impl TrialData {
    pub fn initial(&self) -> &StepMetrics {
        &self.records[0]
    }

    pub fn last(&self) -> &StepMetrics {
        self.records.last().expect("at least the initial record")
    }
}

/// Immutable inputs shared by all trials of an experiment.
pub struct ExperimentContext {
    pub config: ExperimentConfig,
    pub map: OrbitalMap,
    pub trajectory: Trajectory,
    pub observation_log: Option<std::collections::BTreeMap<u64, Vec<crate::world::EdgeObservation>>>,
}

impl ExperimentContext {
    pub fn load(config: ExperimentConfig) -> Result<Self, HarnessError> {
        config.validate()?;
        let map = OrbitalMap::load(&config.map_path)?;
        let trajectory = Trajectory::load(&config.trajectory_path, 1.0)?;
        let observation_log = match &config.observation_log {
            Some(path) => Some(load_observation_log(path)?),
            None => None,
        };
        Ok(Self {
            config,
            map,
            trajectory,
            observation_log,
        })
    }
}

/// Run one deterministic trial.
pub fn run_trial(ctx: &ExperimentContext, seed: u64, dump_state: bool) -> Result<TrialData, HarnessError> {
    let cfg = &ctx.config;
    let mut true_pose = ctx.trajectory.start();

    // Initial belief mean: true start plus a seeded offset.
    let mut offset_rng = substream(seed, Domain::InitMeanOffset, 0, 0);
    let ox: f64 = offset_rng.sample(StandardNormal);
    let oy: f64 = offset_rng.sample(StandardNormal);
    let init_mean = [
        true_pose.position.x + cfg.init_offset_sigma * ox,
        true_pose.position.y + cfg.init_offset_sigma * oy,
    ];

    let mut filter_cfg = cfg.filter;
    filter_cfg.seed = seed;
    filter_cfg.init_mean = init_mean;
    let mut motion_cfg = cfg.motion;
    motion_cfg.seed = seed;

    let mut state = init_filter(&filter_cfg, &motion_cfg, &cfg.qscore)
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;

    let mut records = Vec::with_capacity(ctx.trajectory.len_steps() + 1);
    let mut states = Vec::new();
    records.push(step_metrics(
        0,
        &state.particles,
        &true_pose.position,
        state.last_n_eff,
        false,
    )?);
    if dump_state {
        states.push(snapshot(0, &state.particles, state.last_n_eff, false));
    }

    let mut failed = false;
    for (k, odo) in ctx.trajectory.steps.iter().enumerate() {
        let t = (k + 1) as u64;
        true_pose = ctx.trajectory.poses[k + 1];

        let observations = match &ctx.observation_log {
            Some(log) => log.get(&t).cloned().unwrap_or_default(),
            None => {
                let mut rng = substream(seed, Domain::Sense, t, 0);
                observe(&true_pose, &ctx.map, &cfg.sensor, &mut rng)
            }
        };

        let mut heading = true_pose.heading;
        if motion_cfg.heading_noise_sigma > 0.0 {
            let mut rng = substream(seed, Domain::HeadingNoise, t, 0);
            let n: f64 = rng.sample(StandardNormal);
            heading = normalize_angle(heading + motion_cfg.heading_noise_sigma * n);
        }

        match state.step(odo, heading, &observations, &ctx.map) {
            Ok(()) => {}
            Err(FilterError::WeightCollapse) => {
                failed = true;
                break;
            }
            Err(e) => return Err(ConfigError::Invalid(e.to_string()).into()),
        }

        records.push(step_metrics(
            t,
            &state.particles,
            &true_pose.position,
            state.last_n_eff,
            state.last_resampled,
        )?);
        if dump_state {
            states.push(snapshot(
                t,
                &state.particles,
                state.last_n_eff,
                state.last_resampled,
            ));
        }
    }

    Ok(TrialData {
        seed,
        records,
        states,
        failed,
    })
}

fn snapshot(step: u64, particles: &[Particle], n_eff: f64, resampled: bool) -> StateSnapshot {
    StateSnapshot {
        step,
        particles: particles
            .iter()
            .map(|p| SnapshotParticle {
                x: p.position.x,
                y: p.position.y,
                log_w: p.log_weight,
            })
            .collect(),
        n_eff,
        resampled,
    }
}

/// One row of the batch summary.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SummaryRow {
    pub seed: u64,
    pub initial_gt_error: f64,
    pub final_gt_error: f64,
    pub final_uncertainty: f64,
    pub final_mahalanobis: f64,
    pub failed: bool,
}

#[derive(Debug, Clone)]
pub struct BatchSummary {
    pub rows: Vec<SummaryRow>,
    pub mean_initial_gt_error: f64,
    pub mean_final_gt_error: f64,
    pub std_final_gt_error: f64,
    pub mean_final_uncertainty: f64,
    pub std_final_uncertainty: f64,
    pub mean_final_mahalanobis: f64,
    pub std_final_mahalanobis: f64,
    pub n_failed: usize,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn summarize(trials: &[TrialData]) -> BatchSummary {
    let rows: Vec<SummaryRow> = trials
        .iter()
        .map(|t| SummaryRow {
            seed: t.seed,
            initial_gt_error: t.initial().gt_error,
            final_gt_error: t.last().gt_error,
            final_uncertainty: t.last().sqrt_lambda_max,
            final_mahalanobis: t.last().mahalanobis,
            failed: t.failed,
        })
        .collect();
    let finals: Vec<f64> = rows.iter().map(|r| r.final_gt_error).collect();
    let uncs: Vec<f64> = rows.iter().map(|r| r.final_uncertainty).collect();
    let mahs: Vec<f64> = rows.iter().map(|r| r.final_mahalanobis).collect();
    let inits: Vec<f64> = rows.iter().map(|r| r.initial_gt_error).collect();
    let (mean_final_gt_error, std_final_gt_error) = mean_std(&finals);
    let (mean_final_uncertainty, std_final_uncertainty) = mean_std(&uncs);
    let (mean_final_mahalanobis, std_final_mahalanobis) = mean_std(&mahs);
    BatchSummary {
        n_failed: rows.iter().filter(|r| r.failed).count(),
        mean_initial_gt_error: mean_std(&inits).0,
        mean_final_gt_error,
        std_final_gt_error,
        mean_final_uncertainty,
        std_final_uncertainty,
        mean_final_mahalanobis,
        std_final_mahalanobis,
        rows,
    }
}

/// Run `n_seeds` trials with seeds `seed .. seed + n_seeds`.
pub fn run_batch(ctx: &ExperimentContext, dump_state: bool) -> Result<Vec<TrialData>, HarnessError> {
    (0..ctx.config.n_seeds as u64)
        .map(|k| run_trial(ctx, ctx.config.seed + k, dump_state))
        .collect()
}

/// Result of running one resampling scheme over the shared seed set.
#[derive(Debug, Clone)]
pub struct SchemeResult {
    pub resampler: Resampler,
    pub trials: Vec<TrialData>,
    pub summary: BatchSummary,
    /// Across-seed variance of the uncertainty trace, averaged over steps.
    pub uncertainty_trace_variance: f64,
}

/// Across-seed variance of `sqrt_lambda_max` per step, averaged over steps.
/// Steps past a failed trial's collapse are skipped for that trial.
pub fn uncertainty_trace_variance(trials: &[TrialData]) -> f64 {
    let max_len = trials.iter().map(|t| t.records.len()).max().unwrap_or(0);
    let mut total = 0.0;
    let mut n_steps = 0usize;
    for step in 0..max_len {
        let vals: Vec<f64> = trials
            .iter()
            .filter_map(|t| t.records.get(step).map(|r| r.sqrt_lambda_max))
            .collect();
        if vals.len() < 2 {
            continue;
        }
        let (_, sd) = mean_std(&vals);
        total += sd * sd;
        n_steps += 1;
    }
    if n_steps == 0 {
        0.0
    } else {
        total / n_steps as f64
    }
}

/// Run all four resampling schemes on identical seeds.
pub fn sweep_resamplers(ctx: &ExperimentContext) -> Result<Vec<SchemeResult>, HarnessError> {
    let schemes = [
        Resampler::Systematic,
        Resampler::Multinomial,
        Resampler::Residual,
        Resampler::Stratified,
    ];
    let mut results = Vec::with_capacity(schemes.len());
    for scheme in schemes {
        let mut config = ctx.config.clone();
        config.filter.resampler = scheme;
        let scheme_ctx = ExperimentContext {
            config,
            map: ctx.map.clone(),
            trajectory: ctx.trajectory.clone(),
            observation_log: ctx.observation_log.clone(),
        };
        let trials = run_batch(&scheme_ctx, false)?;
        results.push(SchemeResult {
            resampler: scheme,
            summary: summarize(&trials),
            uncertainty_trace_variance: uncertainty_trace_variance(&trials),
            trials,
        });
    }
    Ok(results)
}

/// Dead-reckoning control: propagate a single noiseless-init particle along a
/// straight run, returning the terminal (x, y) error of each seed.
pub fn dead_reckoning_terminal_errors(
    length: usize,
    drift_fraction: f64,
    seeds: u64,
) -> Vec<Point2<f64>> {
    use crate::motion::{propagate_sample, MotionConfig};
    let trajectory = Trajectory::straight_line(length);
    let cfg = MotionConfig {
        drift_fraction,
        ..Default::default()
    };
    (0..seeds)
        .map(|seed| {
            let mut p = trajectory.start().position;
            for (k, step) in trajectory.steps.iter().enumerate() {
                let mut rng = substream(seed, Domain::Propagate, (k + 1) as u64, 0);
                p = propagate_sample(&p, step, &cfg, &mut rng);
            }
            let end = trajectory.poses.last().unwrap().position;
            Point2::new(p.x - end.x, p.y - end.y)
        })
        .collect()
}
