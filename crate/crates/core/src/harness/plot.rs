//! Smoothed line charts rendered as standalone SVG.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Mean of the last `window` values at each index (fewer at the start).
pub fn trailing_mean(values: &[f64], window: usize) -> Vec<f64> {
    assert!(window > 0, "smoothing window must be positive");
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, &v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Reads `metric` against `episode`. Rows sharing a series key (the `beta`
/// and `baseline` columns, when present) and an episode are averaged across
/// runs, then each series is smoothed with a trailing mean. Empty cells are
/// skipped.
pub fn load_series(csv_path: &Path, metric: &str, window: usize) -> Result<Vec<Series>> {
    if window == 0 {
        return Err(Error::InvalidArgument("smoothing window must be positive".into()));
    }
    let mut reader = csv::Reader::from_path(csv_path)?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let value_col = find(metric).ok_or_else(|| Error::MissingColumn(metric.to_string()))?;
    let episode_col = find("episode").ok_or_else(|| Error::MissingColumn("episode".into()))?;
    let beta_col = find("beta");
    let baseline_col = find("baseline");

    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, BTreeMap<u64, (f64, usize)>> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let raw = record.get(value_col).unwrap_or("");
        if raw.is_empty() {
            continue;
        }
        let value: f64 = raw
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("column `{metric}` holds non-numeric `{raw}`")))?;
        let episode: u64 = record
            .get(episode_col)
            .unwrap_or("")
            .parse()
            .map_err(|_| Error::InvalidArgument("column `episode` holds a non-integer".into()))?;
        let label = series_label(
            beta_col.and_then(|c| record.get(c)),
            baseline_col.and_then(|c| record.get(c)),
            metric,
        );
        if !groups.contains_key(&label) {
            order.push(label.clone());
        }
        let slot = groups.entry(label).or_default().entry(episode).or_insert((0.0, 0));
        slot.0 += value;
        slot.1 += 1;
    }

    Ok(order
        .into_iter()
        .map(|label| {
            let by_episode = &groups[&label];
            let xs: Vec<f64> = by_episode.keys().map(|&e| e as f64).collect();
            let means: Vec<f64> = by_episode.values().map(|(s, n)| s / *n as f64).collect();
            let ys = trailing_mean(&means, window);
            Series {
                label,
                points: xs.into_iter().zip(ys).collect(),
            }
        })
        .collect())
}

fn series_label(beta: Option<&str>, baseline: Option<&str>, metric: &str) -> String {
    match (beta, baseline) {
        (_, Some(b)) if !b.is_empty() && b != "none" => b.to_string(),
        (Some(beta), _) => format!("beta={beta}"),
        _ => metric.to_string(),
    }
}

/// Plot area geometry and the data-to-pixel mapping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartLayout {
    pub width: f64,
    pub height: f64,
    pub left: f64,
    pub right: f64,
    pub top: f64,
    pub bottom: f64,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
}

impl ChartLayout {
    pub fn fit(series: &[Series]) -> Self {
        let pts = series.iter().flat_map(|s| s.points.iter());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if x1 <= x0 {
            x1 = x0 + 1.0;
        }
        if y1 <= y0 {
            let pad = if y0 == 0.0 { 1.0 } else { y0.abs() * 0.5 };
            (y0, y1) = (y0 - pad, y1 + pad);
        }
        Self {
            width: 760.0,
            height: 460.0,
            left: 70.0,
            right: 190.0,
            top: 40.0,
            bottom: 50.0,
            x_range: (x0, x1),
            y_range: (y0, y1),
        }
    }

    pub fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let plot_w = self.width - self.left - self.right;
        let plot_h = self.height - self.top - self.bottom;
        let px = self.left + (x - self.x_range.0) / (self.x_range.1 - self.x_range.0) * plot_w;
        let py = self.top + (self.y_range.1 - y) / (self.y_range.1 - self.y_range.0) * plot_h;
        (px, py)
    }
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render_svg(title: &str, y_label: &str, series: &[Series]) -> String {
    let layout = ChartLayout::fit(series);
    let ChartLayout { width, height, left, right, top, bottom, x_range, y_range } = layout;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        left + (width - left - right) / 2.0,
        escape(title)
    );

    let (x_axis_y, plot_right) = (height - bottom, width - right);
    let _ = writeln!(
        svg,
        r#"<g stroke="black"><line x1="{left}" y1="{x_axis_y}" x2="{plot_right}" y2="{x_axis_y}"/><line x1="{left}" y1="{top}" x2="{left}" y2="{x_axis_y}"/></g>"#
    );
    for i in 0..=5 {
        let t = i as f64 / 5.0;
        let xv = x_range.0 + t * (x_range.1 - x_range.0);
        let yv = y_range.0 + t * (y_range.1 - y_range.0);
        let (px, _) = layout.map(xv, y_range.0);
        let (_, py) = layout.map(x_range.0, yv);
        let _ = writeln!(
            svg,
            r#"<line x1="{px:.2}" y1="{x_axis_y}" x2="{px:.2}" y2="{}" stroke="black"/><text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#,
            x_axis_y + 5.0,
            x_axis_y + 18.0,
            tick_label(xv)
        );
        let _ = writeln!(
            svg,
            r##"<line x1="{}" y1="{py:.2}" x2="{left}" y2="{py:.2}" stroke="black"/><line x1="{left}" y1="{py:.2}" x2="{plot_right}" y2="{py:.2}" stroke="#e0e0e0"/><text x="{}" y="{:.2}" text-anchor="end">{}</text>"##,
            left - 5.0,
            left - 8.0,
            py + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">episode</text>"#,
        left + (plot_right - left) / 2.0,
        height - 12.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>"#,
        top + (x_axis_y - top) / 2.0,
        escape(y_label)
    );

    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| {
                let (px, py) = layout.map(x, y);
                format!("{px:.2},{py:.2}")
            })
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="series" data-label="{}" fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            escape(&s.label),
            points.join(" ")
        );
        let ly = top + 10.0 + 20.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{0}" y1="{ly}" x2="{1}" y2="{ly}" stroke="{color}" stroke-width="3"/><text x="{2}" y="{3}">{4}</text>"#,
            plot_right + 15.0,
            plot_right + 40.0,
            plot_right + 46.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn tick_label(v: f64) -> String {
    if v.abs() >= 100.0 || v == v.round() {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

/// Renders `metric` from `csv_path` into an SVG file; returns the plotted series.
pub fn plot(csv_path: &Path, metric: &str, out_path: &Path, window: usize) -> Result<Vec<Series>> {
    let series = load_series(csv_path, metric, window)?;
    let title = format!("{metric} (trailing mean over {window} episodes)");
    let svg = render_svg(&title, metric, &series);
    std::fs::write(out_path, svg).map_err(|e| Error::io(out_path, e))?;
    Ok(series)
}
