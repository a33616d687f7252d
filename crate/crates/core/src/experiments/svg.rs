use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::SummaryRow;
use crate::error::{CovError, Result};

/// Figure size and optional fixed upper limit of the error axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvgAxes {
    pub width: u32,
    pub height: u32,
    pub y_max: Option<f64>,
}

impl Default for SvgAxes {
    fn default() -> Self {
        Self {
            width: 720,
            height: 480,
            y_max: None,
        }
    }
}

const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 70.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;

struct Series {
    label: &'static str,
    color: &'static str,
    dash: Option<&'static str>,
    mean: fn(&SummaryRow) -> f64,
    ci: fn(&SummaryRow) -> Option<f64>,
}

const SERIES: [Series; 3] = [
    Series {
        label: "sample",
        color: "#1f77b4",
        dash: Some("6,4"),
        mean: |r| r.mean_sample,
        ci: |r| r.ci_sample,
    },
    Series {
        label: "taper",
        color: "#d62728",
        dash: None,
        mean: |r| r.mean_taper,
        ci: |r| r.ci_taper,
    },
    Series {
        label: "threshold",
        color: "#9467bd",
        dash: None,
        mean: |r| r.mean_thresh,
        ci: |r| r.ci_thresh,
    },
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let raw = (hi - lo) / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step + 1e-9).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    let s = format!("{:.4}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// SVG document for one kernel's rows: errors against `log10 lambda`, with `N` on a secondary axis.
pub fn render_svg(rows: &[&SummaryRow], axes: &SvgAxes) -> Result<String> {
    if rows.is_empty() {
        return Err(CovError::InvalidParameter("no summary rows to plot".into()));
    }
    if let Some(bad) = rows.iter().find(|r| !(r.lambda > 0.0)) {
        return Err(CovError::InvalidParameter(format!(
            "lambda must be positive to plot, got {}",
            bad.lambda
        )));
    }
    let mut rows: Vec<&SummaryRow> = rows.to_vec();
    rows.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let (w, h) = (axes.width as f64, axes.height as f64);
    let (x0, x1) = (MARGIN_LEFT, w - MARGIN_RIGHT);
    let (y0, y1) = (h - MARGIN_BOTTOM, MARGIN_TOP);

    let xs: Vec<f64> = rows.iter().map(|r| r.lambda.log10()).collect();
    let (mut xmin, mut xmax) = (xs[0], xs[xs.len() - 1]);
    if xmax - xmin < 1e-12 {
        xmin -= 0.5;
        xmax += 0.5;
    }
    let top = rows
        .iter()
        .flat_map(|r| {
            SERIES
                .iter()
                .map(move |s| (s.mean)(r) + (s.ci)(r).unwrap_or(0.0))
        })
        .fold(0.0f64, f64::max);
    let ymax = axes
        .y_max
        .unwrap_or(if top > 0.0 { 1.1 * top } else { 1.0 });
    let nmax = rows.iter().map(|r| r.n_samples).max().unwrap_or(1).max(1) as f64 * 1.1;

    let px = |x: f64| x0 + (x - xmin) / (xmax - xmin) * (x1 - x0);
    let py = |y: f64| y0 - y.clamp(0.0, ymax) / ymax * (y0 - y1);
    let pn = |n: f64| y0 - n / nmax * (y0 - y1);

    let mut s = String::new();
    let kernel = escape(&rows[0].kernel);
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{kernel}</text>"#,
        w / 2.0
    );
    let _ = writeln!(
        s,
        r#"<rect x="{x0}" y="{y1}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        x1 - x0,
        y0 - y1
    );

    for t in nice_ticks(xmin, xmax, 6) {
        let x = px(t);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{y0}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#,
            y0 + 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#,
            y0 + 20.0,
            tick_label(t)
        );
    }
    for t in nice_ticks(0.0, ymax, 5) {
        let y = py(t);
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{x0}" y2="{y:.2}" stroke="black"/>"#,
            x0 - 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="12">{}</text>"#,
            x0 - 8.0,
            y + 4.0,
            tick_label(t)
        );
    }
    for t in nice_ticks(0.0, nmax, 5) {
        let y = pn(t);
        let _ = writeln!(
            s,
            r#"<line x1="{x1}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="green"/>"#,
            x1 + 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" fill="green">{}</text>"#,
            x1 + 8.0,
            y + 4.0,
            tick_label(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="13">log10 lambda</text>"#,
        (x0 + x1) / 2.0,
        h - 15.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="13" transform="rotate(-90 18 {:.2})">relative error</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="13" fill="green" transform="rotate(90 {:.2} {:.2})">N</text>"#,
        w - 15.0,
        (y0 + y1) / 2.0,
        w - 15.0,
        (y0 + y1) / 2.0
    );

    let n_points: Vec<String> = rows
        .iter()
        .zip(&xs)
        .map(|(r, &x)| format!("{:.2},{:.2}", px(x), pn(r.n_samples as f64)))
        .collect();
    let _ = writeln!(
        s,
        r#"<polyline class="series-N" points="{}" fill="none" stroke="green" stroke-dasharray="2,3"/>"#,
        n_points.join(" ")
    );

    for series in &SERIES {
        let pts: Vec<String> = rows
            .iter()
            .zip(&xs)
            .map(|(r, &x)| format!("{:.2},{:.2}", px(x), py((series.mean)(r))))
            .collect();
        let dash = series
            .dash
            .map_or(String::new(), |d| format!(r#" stroke-dasharray="{d}""#));
        let _ = writeln!(
            s,
            r#"<polyline class="series-{}" points="{}" fill="none" stroke="{}" stroke-width="1.5"{dash}/>"#,
            series.label,
            pts.join(" "),
            series.color
        );
        for (r, &x) in rows.iter().zip(&xs) {
            let (cx, m) = (px(x), (series.mean)(r));
            let _ = writeln!(
                s,
                r#"<circle class="marker-{}" cx="{cx:.2}" cy="{:.2}" r="3" fill="{}"/>"#,
                series.label,
                py(m),
                series.color
            );
            if let Some(ci) = (series.ci)(r) {
                let (lo, hi) = (py(m - ci), py(m + ci));
                let _ = writeln!(
                    s,
                    r#"<g class="whisker-{}" stroke="{}">"#,
                    series.label, series.color
                );
                let _ = writeln!(
                    s,
                    r#"<line x1="{cx:.2}" y1="{lo:.2}" x2="{cx:.2}" y2="{hi:.2}"/>"#
                );
                let _ = writeln!(
                    s,
                    r#"<line x1="{:.2}" y1="{lo:.2}" x2="{:.2}" y2="{lo:.2}"/>"#,
                    cx - 4.0,
                    cx + 4.0
                );
                let _ = writeln!(
                    s,
                    r#"<line x1="{:.2}" y1="{hi:.2}" x2="{:.2}" y2="{hi:.2}"/>"#,
                    cx - 4.0,
                    cx + 4.0
                );
                let _ = writeln!(s, "</g>");
            }
        }
    }

    let legend: [(&str, &str, Option<&str>); 4] = [
        ("sample", SERIES[0].color, SERIES[0].dash),
        ("taper", SERIES[1].color, None),
        ("threshold", SERIES[2].color, None),
        ("N", "green", Some("2,3")),
    ];
    for (k, (label, color, dash)) in legend.iter().enumerate() {
        let y = y1 + 15.0 + 18.0 * k as f64;
        let dash = dash.map_or(String::new(), |d| format!(r#" stroke-dasharray="{d}""#));
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="1.5"{dash}/>"#,
            x1 - 120.0,
            x1 - 95.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12">{label}</text>"#,
            x1 - 88.0,
            y + 4.0
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Writes `<dir>/<kernel>.svg` for every kernel in `summaries`.
pub fn emit_svg(summaries: &[SummaryRow], dir: &Path, axes: &SvgAxes) -> Result<Vec<PathBuf>> {
    if summaries.is_empty() {
        return Err(CovError::InvalidParameter("no summary rows to plot".into()));
    }
    let mut kernels: Vec<&str> = Vec::new();
    for r in summaries {
        if !kernels.contains(&r.kernel.as_str()) {
            kernels.push(&r.kernel);
        }
    }
    let mut written = Vec::new();
    for k in kernels {
        let rows: Vec<&SummaryRow> = summaries.iter().filter(|r| r.kernel == k).collect();
        let path = dir.join(format!("{k}.svg"));
        fs::write(&path, render_svg(&rows, axes)?)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(lambda: f64, e: f64, n: usize) -> SummaryRow {
        SummaryRow {
            kernel: "se".into(),
            lambda,
            n_samples: n,
            trials: 30,
            mean_sample: e,
            ci_sample: Some(0.1),
            mean_taper: e / 2.0,
            ci_taper: Some(0.05),
            mean_thresh: e / 1.5,
            ci_thresh: None,
        }
    }

    fn points(doc: &roxmltree::Document, class: &str) -> Vec<(f64, f64)> {
        let node = doc
            .descendants()
            .find(|n| n.attribute("class") == Some(class))
            .unwrap();
        node.attribute("points")
            .unwrap()
            .split_whitespace()
            .map(|p| {
                let (x, y) = p.split_once(',').unwrap();
                (x.parse().unwrap(), y.parse().unwrap())
            })
            .collect()
    }

    #[test]
    fn single_point_has_markers_and_whiskers() {
        let r = row(0.01, 1.2, 24);
        let text = render_svg(&[&r], &SvgAxes::default()).unwrap();
        let doc = roxmltree::Document::parse(&text).unwrap();
        let markers = doc
            .descendants()
            .filter(|n| n.has_tag_name("circle"))
            .count();
        assert_eq!(markers, 3);
        let whiskers = doc
            .descendants()
            .filter(|n| {
                n.attribute("class")
                    .is_some_and(|c| c.starts_with("whisker-"))
            })
            .count();
        assert_eq!(whiskers, 2);
        assert_eq!(doc.root_element().attribute("width"), Some("720"));
        assert!(!text.contains("<script"));
    }

    #[test]
    fn monotone_series_map_to_monotone_x() {
        let rows = [row(0.1, 0.5, 12), row(0.001, 2.0, 35), row(0.01, 1.0, 24)];
        let refs: Vec<&SummaryRow> = rows.iter().collect();
        let text = render_svg(&refs, &SvgAxes::default()).unwrap();
        let doc = roxmltree::Document::parse(&text).unwrap();
        for class in [
            "series-sample",
            "series-taper",
            "series-threshold",
            "series-N",
        ] {
            let pts = points(&doc, class);
            assert_eq!(pts.len(), 3);
            assert!(pts.windows(2).all(|w| w[0].0 < w[1].0));
        }
        let sample = points(&doc, "series-sample");
        assert!(sample.windows(2).all(|w| w[0].1 < w[1].1));
    }

    #[test]
    fn emit_writes_one_file_per_kernel() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = row(0.01, 1.0, 24);
        m.kernel = "a<b".into();
        let files = emit_svg(&[row(0.01, 1.0, 24), m], dir.path(), &SvgAxes::default()).unwrap();
        assert_eq!(files.len(), 2);
        for f in files {
            roxmltree::Document::parse(&fs::read_to_string(f).unwrap()).unwrap();
        }
        assert!(emit_svg(&[], dir.path(), &SvgAxes::default()).is_err());
    }
}
