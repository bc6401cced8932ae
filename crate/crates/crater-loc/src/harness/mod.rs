//! Experiment harness: configuration, trajectories, trial execution, and
//! file/plot output.
//!
//! Output layout: `<output_dir>/<run-id>/` with deterministic run ids derived
//! from the command and seed, so identical runs land in identical paths with
//! identical bytes. Wall-clock metadata is confined to `meta.json`.

pub mod config;
pub mod plots;
pub mod trajectory;
pub mod trial;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub use config::{ConfigError, ExperimentConfig};
pub use trajectory::Trajectory;
pub use trial::{
    dead_reckoning_terminal_errors, run_batch, run_trial, summarize, sweep_resamplers,
    uncertainty_trace_variance, BatchSummary, ExperimentContext, HarnessError, SchemeResult,
    SummaryRow, TrialData,
};

use crate::filter::Resampler;
use crate::metrics::StepMetrics;
use plots::METRICS_HEADER;

fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        "inf".to_string()
    }
}

/// Serialize per-step metrics in the canonical CSV layout.
pub fn metrics_csv(records: &[StepMetrics]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.step,
            fmt_f64(r.gt[0]),
            fmt_f64(r.gt[1]),
            fmt_f64(r.mean[0]),
            fmt_f64(r.mean[1]),
            fmt_f64(r.gt_error),
            fmt_f64(r.sqrt_lambda_max),
            fmt_f64(r.mahalanobis),
            fmt_f64(r.n_eff),
            r.resampled
        );
    }
    out
}

pub fn summary_csv(summary: &BatchSummary) -> String {
    let mut out = String::from(
        "seed,initial_gt_error_m,final_gt_error_m,final_sqrt_lambda_max_m,final_mahalanobis,failed\n",
    );
    for r in &summary.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.seed,
            fmt_f64(r.initial_gt_error),
            fmt_f64(r.final_gt_error),
            fmt_f64(r.final_uncertainty),
            fmt_f64(r.final_mahalanobis),
            r.failed
        );
    }
    let _ = writeln!(
        out,
        "mean,{},{},{},{},{}",
        fmt_f64(summary.mean_initial_gt_error),
        fmt_f64(summary.mean_final_gt_error),
        fmt_f64(summary.mean_final_uncertainty),
        fmt_f64(summary.mean_final_mahalanobis),
        summary.n_failed
    );
    let _ = writeln!(
        out,
        "std,,{},{},{},",
        fmt_f64(summary.std_final_gt_error),
        fmt_f64(summary.std_final_uncertainty),
        fmt_f64(summary.std_final_mahalanobis),
    );
    out
}

fn states_jsonl(trial: &TrialData) -> String {
    let mut out = String::new();
    for s in &trial.states {
        let _ = writeln!(out, "{}", serde_json::to_string(s).expect("serializable"));
    }
    out
}

fn write_meta(dir: &Path, command: &str) -> Result<(), HarnessError> {
    let meta = serde_json::json!({
        "command": command,
        "timestamp_utc": chrono::Utc::now().to_rfc3339(),
    });
    std::fs::write(dir.join("meta.json"), format!("{meta:#}\n"))?;
    Ok(())
}

fn trajectory_stem(cfg: &ExperimentConfig) -> String {
    cfg.trajectory_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "trajectory".to_string())
}

fn resampler_name(r: Resampler) -> &'static str {
    match r {
        Resampler::Systematic => "systematic",
        Resampler::Multinomial => "multinomial",
        Resampler::Residual => "residual",
        Resampler::Stratified => "stratified",
    }
}

/// `crater-loc run`: one trial, metrics CSV plus optional state dump.
pub fn run_to_dir(
    ctx: &ExperimentContext,
    seed: u64,
    dump_state: bool,
) -> Result<(PathBuf, TrialData), HarnessError> {
    let dir = ctx
        .config
        .output_dir
        .join(format!("{}-run-seed{seed}", trajectory_stem(&ctx.config)));
    std::fs::create_dir_all(&dir)?;
    let trial = run_trial(ctx, seed, dump_state)?;
    std::fs::write(dir.join("metrics.csv"), metrics_csv(&trial.records))?;
    if dump_state {
        std::fs::write(dir.join("states.jsonl"), states_jsonl(&trial))?;
    }
    write_meta(&dir, &format!("run --seed {seed}"))?;
    Ok((dir, trial))
}

/// `crater-loc batch`: n_seeds trials, per-seed metrics, summary, histogram.
pub fn batch_to_dir(
    ctx: &ExperimentContext,
) -> Result<(PathBuf, Vec<TrialData>, BatchSummary), HarnessError> {
    let cfg = &ctx.config;
    let dir = cfg
        .output_dir
        .join(format!(
            "{}-batch-seed{}-n{}",
            trajectory_stem(cfg),
            cfg.seed,
            cfg.n_seeds
        ));
    std::fs::create_dir_all(&dir)?;
    let trials = run_batch(ctx, false)?;
    for t in &trials {
        std::fs::write(
            dir.join(format!("metrics_seed{}.csv", t.seed)),
            metrics_csv(&t.records),
        )?;
    }
    let summary = summarize(&trials);
    std::fs::write(dir.join("summary.csv"), summary_csv(&summary))?;
    let finals: Vec<f64> = summary.rows.iter().map(|r| r.final_gt_error).collect();
    std::fs::write(
        dir.join("final_error_hist.svg"),
        plots::histogram("Final ground-truth error", "final error (m)", &finals, 10),
    )?;
    write_meta(&dir, &format!("batch --seeds {}", cfg.n_seeds))?;
    Ok((dir, trials, summary))
}

/// `crater-loc sweep-resamplers`: all four schemes on shared seeds, with a
/// comparison plot of mean uncertainty traces.
pub fn sweep_to_dir(
    ctx: &ExperimentContext,
) -> Result<(PathBuf, Vec<SchemeResult>), HarnessError> {
    let cfg = &ctx.config;
    let dir = cfg
        .output_dir
        .join(format!(
            "{}-sweep-seed{}-n{}",
            trajectory_stem(cfg),
            cfg.seed,
            cfg.n_seeds
        ));
    std::fs::create_dir_all(&dir)?;
    let results = sweep_resamplers(ctx)?;

    let mut comparison = String::from(
        "resampler,mean_final_gt_error_m,std_final_gt_error_m,mean_final_sqrt_lambda_max_m,uncertainty_trace_variance\n",
    );
    let mut series = Vec::new();
    for res in &results {
        let name = resampler_name(res.resampler);
        let scheme_dir = dir.join(name);
        std::fs::create_dir_all(&scheme_dir)?;
        for t in &res.trials {
            std::fs::write(
                scheme_dir.join(format!("metrics_seed{}.csv", t.seed)),
                metrics_csv(&t.records),
            )?;
        }
        std::fs::write(scheme_dir.join("summary.csv"), summary_csv(&res.summary))?;
        let _ = writeln!(
            comparison,
            "{},{},{},{},{}",
            name,
            fmt_f64(res.summary.mean_final_gt_error),
            fmt_f64(res.summary.std_final_gt_error),
            fmt_f64(res.summary.mean_final_uncertainty),
            fmt_f64(res.uncertainty_trace_variance),
        );
        series.push((name.to_string(), mean_uncertainty_trace(&res.trials)));
    }
    std::fs::write(dir.join("comparison.csv"), comparison)?;
    std::fs::write(
        dir.join("uncertainty_comparison.svg"),
        plots::line_plot("Mean filter uncertainty by resampler", "meters", &series),
    )?;
    write_meta(&dir, &format!("sweep-resamplers --seeds {}", cfg.n_seeds))?;
    Ok((dir, results))
}

/// Mean uncertainty across seeds at each step.
fn mean_uncertainty_trace(trials: &[TrialData]) -> Vec<(f64, f64)> {
    let max_len = trials.iter().map(|t| t.records.len()).max().unwrap_or(0);
    (0..max_len)
        .filter_map(|step| {
            let vals: Vec<f64> = trials
                .iter()
                .filter_map(|t| t.records.get(step).map(|r| r.sqrt_lambda_max))
                .collect();
            if vals.is_empty() {
                None
            } else {
                Some((
                    step as f64,
                    vals.iter().sum::<f64>() / vals.len() as f64,
                ))
            }
        })
        .collect()
}

/// `crater-loc plot`: line plot of one metrics CSV, written next to it.
pub fn plot_metrics_file(path: impl AsRef<Path>) -> Result<PathBuf, plots::PlotError> {
    let path = path.as_ref();
    let table = plots::parse_metrics_csv(path)?;
    let title = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "metrics".to_string());
    let svg = plots::metrics_plot(&table, &title);
    let out = path.with_extension("svg");
    std::fs::write(&out, svg).map_err(|source| plots::PlotError::Io {
        path: out.clone(),
        source,
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn repo_root() -> PathBuf {
        PathBuf::from(env!("CARGO_MANIFEST_DIR"))
            .parent()
            .unwrap()
            .parent()
            .unwrap()
            .to_path_buf()
    }

    #[test]
    fn run_outputs_are_byte_identical_across_repeats() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            map_path: repo_root().join("maps/table1.json"),
            trajectory_path: repo_root().join("trajectories/traj2_analog.csv"),
            output_dir: tmp.path().to_path_buf(),
            ..Default::default()
        };
        let ctx = ExperimentContext::load(cfg).unwrap();
        let (dir1, _) = run_to_dir(&ctx, 5, true).unwrap();
        let m1 = std::fs::read(dir1.join("metrics.csv")).unwrap();
        let s1 = std::fs::read(dir1.join("states.jsonl")).unwrap();
        let (dir2, _) = run_to_dir(&ctx, 5, true).unwrap();
        assert_eq!(m1, std::fs::read(dir2.join("metrics.csv")).unwrap());
        assert_eq!(s1, std::fs::read(dir2.join("states.jsonl")).unwrap());
    }

    #[test]
    fn plot_command_round_trip() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig {
            map_path: repo_root().join("maps/table1.json"),
            trajectory_path: repo_root().join("trajectories/traj2_analog.csv"),
            output_dir: tmp.path().to_path_buf(),
            ..Default::default()
        };
        let ctx = ExperimentContext::load(cfg).unwrap();
        let (dir, _) = run_to_dir(&ctx, 1, false).unwrap();
        let svg_path = plot_metrics_file(dir.join("metrics.csv")).unwrap();
        let svg = std::fs::read_to_string(svg_path).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("polyline"));
    }
}
