//! Static SVG plots: error/uncertainty traces, resampler overlays, and
//! final-error histograms. Plain text output, byte-stable for a given input.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("failed to read metrics {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("metrics {path}: missing column '{column}'")]
    MissingColumn { path: PathBuf, column: String },
    #[error("metrics {path}: no data rows")]
    Empty { path: PathBuf },
    #[error("metrics {path}, line {line}: {reason}")]
    Format {
        path: PathBuf,
        line: usize,
        reason: String,
    },
}

pub const METRICS_HEADER: &str =
    "step,gt_x,gt_y,mu_x,mu_y,gt_error_m,sqrt_lambda_max_m,mahalanobis,n_eff,resampled";

/// Parsed rows of a per-step metrics CSV.
#[derive(Debug, Clone)]
pub struct MetricsTable {
    pub step: Vec<f64>,
    pub gt_error: Vec<f64>,
    pub sqrt_lambda_max: Vec<f64>,
}

pub fn parse_metrics_csv(path: impl AsRef<Path>) -> Result<MetricsTable, PlotError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| PlotError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| PlotError::Empty {
        path: path.to_path_buf(),
    })?;
    let columns: Vec<&str> = header.trim().split(',').collect();
    let find = |name: &str| {
        columns
            .iter()
            .position(|c| *c == name)
            .ok_or_else(|| PlotError::MissingColumn {
                path: path.to_path_buf(),
                column: name.to_string(),
            })
    };
    let i_step = find("step")?;
    let i_err = find("gt_error_m")?;
    let i_unc = find("sqrt_lambda_max_m")?;

    let mut table = MetricsTable {
        step: vec![],
        gt_error: vec![],
        sqrt_lambda_max: vec![],
    };
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let get = |idx: usize| -> Result<f64, PlotError> {
            fields
                .get(idx)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| PlotError::Format {
                    path: path.to_path_buf(),
                    line: i + 1,
                    reason: format!("bad numeric field {idx}"),
                })
        };
        table.step.push(get(i_step)?);
        table.gt_error.push(get(i_err)?);
        table.sqrt_lambda_max.push(get(i_unc)?);
    }
    if table.step.is_empty() {
        return Err(PlotError::Empty {
            path: path.to_path_buf(),
        });
    }
    Ok(table)
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
];

fn axis_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Render labeled (x, y) series as an SVG line plot.
pub fn line_plot(title: &str, y_label: &str, series: &[(String, Vec<(f64, f64)>)]) -> String {
    let (x_lo, x_hi) = axis_range(series.iter().flat_map(|(_, s)| s.iter().map(|p| p.0)));
    let (y_lo, y_hi) = axis_range(
        series
            .iter()
            .flat_map(|(_, s)| s.iter().map(|p| p.1))
            .chain(std::iter::once(0.0)),
    );
    let sx = |x: f64| MARGIN + (x - x_lo) / (x_hi - x_lo) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y_lo) / (y_hi - y_lo) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        title
    );
    // axes
    let _ = writeln!(
        svg,
        r#"<line x1="{m:.1}" y1="{b:.1}" x2="{r:.1}" y2="{b:.1}" stroke="black"/>"#,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{m:.1}" y1="{t:.1}" x2="{m:.1}" y2="{b:.1}" stroke="black"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="11">step</text>"#,
        WIDTH / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="11" transform="rotate(-90 15 {:.1})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        y_label
    );
    // axis extents
    let _ = writeln!(
        svg,
        r#"<text x="{m:.1}" y="{b:.1}" font-family="sans-serif" font-size="10">{lo:.2}</text>"#,
        m = 5.0,
        b = HEIGHT - MARGIN,
        lo = y_lo
    );
    let _ = writeln!(
        svg,
        r#"<text x="{m:.1}" y="{t:.1}" font-family="sans-serif" font-size="10">{hi:.2}</text>"#,
        m = 5.0,
        t = MARGIN + 5.0,
        hi = y_hi
    );

    for (k, (label, points)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        if points.len() == 1 {
            let p = points[0];
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#,
                sx(p.0),
                sy(p.1),
                color
            );
        } else {
            let mut path = String::new();
            for (x, y) in points {
                if !path.is_empty() {
                    path.push(' ');
                }
                let _ = write!(path, "{:.2},{:.2}", sx(*x), sy(*y));
            }
            let _ = writeln!(
                svg,
                r#"<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>"#
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="11" fill="{}">{}</text>"#,
            WIDTH - MARGIN + 5.0,
            MARGIN + 15.0 * k as f64,
            color,
            label
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Histogram of values over `n_bins` equal-width bins.
pub fn histogram(title: &str, x_label: &str, values: &[f64], n_bins: usize) -> String {
    let (lo, hi) = axis_range(values.iter().copied());
    let mut bins = vec![0usize; n_bins];
    for &v in values {
        if !v.is_finite() {
            continue;
        }
        let idx = (((v - lo) / (hi - lo)) * n_bins as f64) as usize;
        bins[idx.min(n_bins - 1)] += 1;
    }
    let max_count = bins.iter().copied().max().unwrap_or(1).max(1);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        title
    );
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    for (i, &count) in bins.iter().enumerate() {
        let bar_w = plot_w / n_bins as f64;
        let bar_h = plot_h * count as f64 / max_count as f64;
        let _ = writeln!(
            svg,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#1f77b4" stroke="white"/>"##,
            MARGIN + i as f64 * bar_w,
            HEIGHT - MARGIN - bar_h,
            bar_w,
            bar_h
        );
    }
    let _ = writeln!(
        svg,
        r#"<line x1="{m:.1}" y1="{b:.1}" x2="{r:.1}" y2="{b:.1}" stroke="black"/>"#,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    let _ = writeln!(
        svg,
        r#"<text x="{m:.1}" y="{y:.1}" font-family="sans-serif" font-size="10">{lo:.2}</text>"#,
        m = MARGIN,
        y = HEIGHT - MARGIN + 15.0,
        lo = lo
    );
    let _ = writeln!(
        svg,
        r#"<text x="{r:.1}" y="{y:.1}" text-anchor="end" font-family="sans-serif" font-size="10">{hi:.2}</text>"#,
        r = WIDTH - MARGIN,
        y = HEIGHT - MARGIN + 15.0,
        hi = hi
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-family="sans-serif" font-size="11">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 10.0,
        x_label
    );
    svg.push_str("</svg>\n");
    svg
}

/// Error and uncertainty traces from one metrics CSV.
pub fn metrics_plot(table: &MetricsTable, title: &str) -> String {
    let err: Vec<(f64, f64)> = table
        .step
        .iter()
        .zip(&table.gt_error)
        .map(|(&s, &e)| (s, e))
        .collect();
    let unc: Vec<(f64, f64)> = table
        .step
        .iter()
        .zip(&table.sqrt_lambda_max)
        .map(|(&s, &u)| (s, u))
        .collect();
    line_plot(
        title,
        "meters",
        &[
            ("gt_error_m".to_string(), err),
            ("sqrt_lambda_max_m".to_string(), unc),
        ],
    )
}
