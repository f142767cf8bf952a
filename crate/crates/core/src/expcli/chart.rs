//! Convergence chart: one polyline of per-episode cost per seed, rendered
//! as a self-contained SVG.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::run::{read_metrics, MetricsRow};
use crate::{Error, Result};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_LEFT: f64 = 64.0;
const MARGIN_RIGHT: f64 = 112.0;
const MARGIN_TOP: f64 = 24.0;
const MARGIN_BOTTOM: f64 = 48.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Reads the metrics CSV at `csv_path` and writes the chart to `out_path`.
/// Nothing is written when the CSV is malformed or holds no rows.
pub fn emit_chart(csv_path: &Path, out_path: &Path) -> Result<()> {
    let rows = read_metrics(csv_path)?;
    let svg = render_chart(&rows).ok_or_else(|| Error::Contract(format!("{}: no data rows", csv_path.display())))?;
    std::fs::write(out_path, svg).map_err(|e| Error::io(out_path, e))
}

/// SVG text for `rows` grouped by seed; `None` when `rows` is empty.
pub fn render_chart(rows: &[MetricsRow]) -> Option<String> {
    if rows.is_empty() {
        return None;
    }
    let mut series: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows {
        series.entry(r.seed).or_default().push((r.episode as f64, r.mean_cost));
    }
    let (x_lo, x_hi) = span(rows.iter().map(|r| r.episode as f64));
    let (y_lo, y_hi) = span(rows.iter().map(|r| r.mean_cost));
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |x: f64| MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let py = |y: f64| MARGIN_TOP + (y_hi - y) / (y_hi - y_lo) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (x0, y0, x1, y1) = (MARGIN_LEFT, MARGIN_TOP + plot_h, MARGIN_LEFT + plot_w, MARGIN_TOP);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{x0}" y="{}" text-anchor="middle">{}</text>"#, y0 + 16.0, fmt_tick(x_lo));
    let _ = writeln!(s, r#"<text x="{x1}" y="{}" text-anchor="middle">{}</text>"#, y0 + 16.0, fmt_tick(x_hi));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, x0 - 6.0, y0 + 4.0, fmt_tick(y_lo));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, x0 - 6.0, y1 + 4.0, fmt_tick(y_hi));
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">episode</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">average AoI (s)</text>"#,
        MARGIN_TOP + plot_h / 2.0
    );
    for (i, (seed, points)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<String> = points.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            coords.join(" ")
        );
        let ly = MARGIN_TOP + 16.0 * (i as f64 + 1.0);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" fill="{color}">seed {seed}</text>"#,
            MARGIN_LEFT + plot_w + 12.0
        );
    }
    s.push_str("</svg>\n");
    Some(s)
}

/// Range of the values, widened to unit length around a single value.
fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn fmt_tick(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}
