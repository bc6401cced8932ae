//! `crater-loc` command line: run trials, Monte Carlo batches, the resampler
//! sweep, and plotting, all driven by a JSON config with dotted-name CLI
//! overrides.
//!
//! Exit codes: 0 success, 2 config error, 3 at least one failed trial.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crater_loc::filter::Resampler;
use crater_loc::harness::{
    batch_to_dir, plot_metrics_file, run_to_dir, sweep_to_dir, ExperimentConfig,
    ExperimentContext,
};

#[derive(Parser)]
#[command(name = "crater-loc", version, about = "Crater-relative Monte Carlo localization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single trial and write per-step metrics.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Trial seed (defaults to the config's base seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Write a per-step particle snapshot (states.jsonl).
        #[arg(long)]
        dump_state: bool,
    },
    /// Run a Monte Carlo batch over consecutive seeds.
    Batch {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of seeds (overrides config n_seeds).
        #[arg(long)]
        seeds: Option<u32>,
    },
    /// Run all four resampling schemes on identical seeds.
    SweepResamplers {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        seeds: Option<u32>,
    },
    /// Render an SVG plot from a metrics CSV.
    Plot {
        /// Path to a metrics CSV produced by run/batch.
        metrics: PathBuf,
    },
}

#[derive(Args)]
struct CommonArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Disable all noise, detection loss, and false positives.
    #[arg(long)]
    perfect: bool,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long = "map-path")]
    map_path: Option<PathBuf>,
    #[arg(long = "trajectory-path")]
    trajectory_path: Option<PathBuf>,
    #[arg(long = "observation-log")]
    observation_log: Option<PathBuf>,
    #[arg(long = "init-offset-sigma")]
    init_offset_sigma: Option<f64>,
    #[arg(long = "filter.n-particles")]
    filter_n_particles: Option<usize>,
    #[arg(long = "filter.n-eff-threshold")]
    filter_n_eff_threshold: Option<f64>,
    #[arg(long = "filter.init-sigma")]
    filter_init_sigma: Option<f64>,
    #[arg(long = "filter.resampler")]
    filter_resampler: Option<Resampler>,
    #[arg(long = "filter.seed")]
    filter_seed: Option<u64>,
    #[arg(long = "motion.drift-fraction")]
    motion_drift_fraction: Option<f64>,
    #[arg(long = "motion.heading-noise-sigma")]
    motion_heading_noise_sigma: Option<f64>,
    #[arg(long = "sensor.max-range")]
    sensor_max_range: Option<f64>,
    #[arg(long = "sensor.full-detect-range")]
    sensor_full_detect_range: Option<f64>,
    #[arg(long = "sensor.arc-fraction-at-full")]
    sensor_arc_fraction_at_full: Option<f64>,
    #[arg(long = "sensor.fov-half-angle-deg")]
    sensor_fov_half_angle_deg: Option<f64>,
    #[arg(long = "sensor.range-noise-sigma-fraction")]
    sensor_range_noise_sigma_fraction: Option<f64>,
    #[arg(long = "sensor.false-positive-rate")]
    sensor_false_positive_rate: Option<f64>,
    #[arg(long = "sensor.arc-sample-spacing")]
    sensor_arc_sample_spacing: Option<f64>,
    #[arg(long = "sensor.back-rim-rate")]
    sensor_back_rim_rate: Option<f64>,
    #[arg(long = "qscore.epsilon")]
    qscore_epsilon: Option<f64>,
}

impl CommonArgs {
    fn build_config(&self) -> Result<ExperimentConfig, String> {
        let mut cfg = ExperimentConfig::load(&self.config).map_err(|e| e.to_string())?;
        if self.perfect {
            cfg = cfg.perfect();
        }
        macro_rules! set {
            ($opt:expr, $field:expr) => {
                if let Some(v) = $opt.clone() {
                    $field = v;
                }
            };
        }
        set!(self.output_dir, cfg.output_dir);
        set!(self.map_path, cfg.map_path);
        set!(self.trajectory_path, cfg.trajectory_path);
        if let Some(log) = &self.observation_log {
            cfg.observation_log = Some(log.clone());
        }
        set!(self.init_offset_sigma, cfg.init_offset_sigma);
        set!(self.filter_n_particles, cfg.filter.n_particles);
        set!(self.filter_n_eff_threshold, cfg.filter.n_eff_threshold);
        set!(self.filter_init_sigma, cfg.filter.init_sigma);
        set!(self.filter_resampler, cfg.filter.resampler);
        set!(self.filter_seed, cfg.seed);
        set!(self.motion_drift_fraction, cfg.motion.drift_fraction);
        set!(
            self.motion_heading_noise_sigma,
            cfg.motion.heading_noise_sigma
        );
        set!(self.sensor_max_range, cfg.sensor.max_range);
        set!(self.sensor_full_detect_range, cfg.sensor.full_detect_range);
        set!(
            self.sensor_arc_fraction_at_full,
            cfg.sensor.arc_fraction_at_full
        );
        if let Some(deg) = self.sensor_fov_half_angle_deg {
            cfg.sensor.fov_half_angle = deg.to_radians();
        }
        set!(
            self.sensor_range_noise_sigma_fraction,
            cfg.sensor.range_noise_sigma_fraction
        );
        set!(
            self.sensor_false_positive_rate,
            cfg.sensor.false_positive_rate
        );
        set!(
            self.sensor_arc_sample_spacing,
            cfg.sensor.arc_sample_spacing
        );
        set!(self.sensor_back_rim_rate, cfg.sensor.back_rim_rate);
        set!(self.qscore_epsilon, cfg.qscore.epsilon);
        Ok(cfg)
    }
}

const EXIT_CONFIG: u8 = 2;
const EXIT_FAILED_TRIAL: u8 = 3;

fn load_context(common: &CommonArgs) -> Result<ExperimentContext, ExitCode> {
    let cfg = common.build_config().map_err(|e| {
        eprintln!("config error: {e}");
        ExitCode::from(EXIT_CONFIG)
    })?;
    ExperimentContext::load(cfg).map_err(|e| {
        eprintln!("config error: {e}");
        ExitCode::from(EXIT_CONFIG)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            common,
            seed,
            dump_state,
        } => {
            let ctx = match load_context(&common) {
                Ok(c) => c,
                Err(code) => return code,
            };
            let seed = seed.unwrap_or(ctx.config.seed);
            match run_to_dir(&ctx, seed, dump_state) {
                Ok((dir, trial)) => {
                    let last = trial.last();
                    println!(
                        "seed {seed}: {} steps, final gt_error {:.3} m, uncertainty {:.3} m -> {}",
                        last.step,
                        last.gt_error,
                        last.sqrt_lambda_max,
                        dir.display()
                    );
                    if trial.failed {
                        eprintln!("trial failed: filter weight collapse at step {}", last.step);
                        ExitCode::from(EXIT_FAILED_TRIAL)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => {
                    eprintln!("run failed: {e}");
                    ExitCode::from(EXIT_CONFIG)
                }
            }
        }
        Command::Batch { common, seeds } => {
            let mut ctx = match load_context(&common) {
                Ok(c) => c,
                Err(code) => return code,
            };
            if let Some(n) = seeds {
                ctx.config.n_seeds = n;
            }
            match batch_to_dir(&ctx) {
                Ok((dir, _trials, summary)) => {
                    println!(
                        "{} seeds: final gt_error {:.3} +/- {:.3} m (initial {:.3} m), {} failed -> {}",
                        summary.rows.len(),
                        summary.mean_final_gt_error,
                        summary.std_final_gt_error,
                        summary.mean_initial_gt_error,
                        summary.n_failed,
                        dir.display()
                    );
                    if summary.n_failed > 0 {
                        ExitCode::from(EXIT_FAILED_TRIAL)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => {
                    eprintln!("batch failed: {e}");
                    ExitCode::from(EXIT_CONFIG)
                }
            }
        }
        Command::SweepResamplers { common, seeds } => {
            let mut ctx = match load_context(&common) {
                Ok(c) => c,
                Err(code) => return code,
            };
            if let Some(n) = seeds {
                ctx.config.n_seeds = n;
            }
            match sweep_to_dir(&ctx) {
                Ok((dir, results)) => {
                    let mut any_failed = false;
                    for r in &results {
                        println!(
                            "{:?}: final gt_error {:.3} +/- {:.3} m, uncertainty-trace variance {:.4}",
                            r.resampler,
                            r.summary.mean_final_gt_error,
                            r.summary.std_final_gt_error,
                            r.uncertainty_trace_variance
                        );
                        any_failed |= r.summary.n_failed > 0;
                    }
                    println!("-> {}", dir.display());
                    if any_failed {
                        ExitCode::from(EXIT_FAILED_TRIAL)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => {
                    eprintln!("sweep failed: {e}");
                    ExitCode::from(EXIT_CONFIG)
                }
            }
        }
        Command::Plot { metrics } => match plot_metrics_file(&metrics) {
            Ok(out) => {
                println!("wrote {}", out.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("plot failed: {e}");
                ExitCode::from(EXIT_CONFIG)
            }
        },
    }
}
