//! Minimal deterministic SVG charts of sweep CSVs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::path::Path;

use super::experiment::{read_rows, SweepRow};
use crate::Result;

const W: f64 = 640.0;
const H: f64 = 400.0;
const MARGIN: f64 = 60.0;
const COLORS: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn axes(s: &mut String, x_label: &str, y_label: &str, y_max: f64) {
    let (x0, y0, x1, y1) = (MARGIN, H - MARGIN, W - MARGIN, MARGIN);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    for k in 0..=4 {
        let v = y_max * k as f64 / 4.0;
        let y = y0 - (y0 - y1) * k as f64 / 4.0;
        let _ = writeln!(s, r#"<text x="{}" y="{y:.1}" text-anchor="end">{}</text>"#, x0 - 6.0, fmt_num(v));
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, W / 2.0, H - 16.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(y_label)
    );
}

fn fmt_num(v: f64) -> String {
    if v.abs() >= 1000.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn legend(s: &mut String, names: &[&str]) {
    for (i, n) in names.iter().enumerate() {
        let y = MARGIN + 14.0 * i as f64;
        let c = COLORS[i % COLORS.len()];
        let _ = writeln!(s, r#"<rect x="{}" y="{}" width="10" height="10" fill="{c}"/>"#, W - MARGIN - 150.0, y - 9.0);
        let _ = writeln!(s, r#"<text x="{}" y="{y}">{}</text>"#, W - MARGIN - 135.0, escape(n));
    }
}

/// Line chart with one polyline per series; the y axis starts at zero.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let xs = series.iter().flat_map(|s| s.points.iter().map(|p| p.0));
    let (x_min, x_max) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let y_max = series
        .iter()
        .flat_map(|s| s.points.iter().map(|p| p.1))
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let span = if x_max > x_min { x_max - x_min } else { 1.0 };
    let px = |x: f64| MARGIN + (W - 2.0 * MARGIN) * (x - x_min) / span;
    let py = |y: f64| H - MARGIN - (H - 2.0 * MARGIN) * y / y_max;

    let mut s = header(title);
    axes(&mut s, x_label, y_label, y_max);
    let mut ticks: Vec<f64> = series.iter().flat_map(|s| s.points.iter().map(|p| p.0)).collect();
    ticks.sort_by(f64::total_cmp);
    ticks.dedup();
    for x in ticks {
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#, px(x), H - MARGIN + 16.0, fmt_num(x));
    }
    for (i, ser) in series.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        let pts: Vec<String> = ser.points.iter().map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{c}" stroke-width="2" points="{}"/>"#, pts.join(" "));
        for &(x, y) in &ser.points {
            let _ = writeln!(s, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{c}"/>"#, px(x), py(y));
        }
    }
    let names: Vec<&str> = series.iter().map(|s| s.name.as_str()).collect();
    legend(&mut s, &names);
    s.push_str("</svg>\n");
    s
}

/// Grouped bar chart: one group per category, one bar per metric.
pub fn bar_chart(title: &str, y_label: &str, categories: &[String], metrics: &[(&str, Vec<f64>)]) -> String {
    let y_max = metrics.iter().flat_map(|m| m.1.iter().copied()).fold(0.0f64, f64::max).max(1e-9);
    let mut s = header(title);
    axes(&mut s, "", y_label, y_max);
    let group = (W - 2.0 * MARGIN) / categories.len().max(1) as f64;
    let bar = group * 0.8 / metrics.len().max(1) as f64;
    for (g, cat) in categories.iter().enumerate() {
        let gx = MARGIN + group * g as f64 + group * 0.1;
        for (k, (_, vals)) in metrics.iter().enumerate() {
            let v = vals.get(g).copied().unwrap_or(0.0);
            let h = (H - 2.0 * MARGIN) * v / y_max;
            let _ = writeln!(
                s,
                r#"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="{}"/>"#,
                gx + bar * k as f64,
                H - MARGIN - h,
                bar,
                h,
                COLORS[k % COLORS.len()]
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#,
            gx + group * 0.4,
            H - MARGIN + 16.0,
            escape(cat)
        );
    }
    let names: Vec<&str> = metrics.iter().map(|m| m.0).collect();
    legend(&mut s, &names);
    s.push_str("</svg>\n");
    s
}

fn series_by_label(rows: &[SweepRow], metric: &str, f: impl Fn(&SweepRow) -> Option<f64>) -> Vec<Series> {
    let mut by: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows {
        if let Some(v) = f(r) {
            by.entry(format!("{} {metric}", r.label())).or_default().push((r.x, v));
        }
    }
    by.into_iter().map(|(name, points)| Series { name, points }).collect()
}

/// Chart of a sweep's rows; the chart type follows the sweep axis.
pub fn plot_rows(rows: &[SweepRow]) -> String {
    let axis = rows.first().map_or("", |r| r.axis.as_str());
    match axis {
        "inversion" | "overhead" => {
            let cats: Vec<String> = rows.iter().map(SweepRow::label).collect();
            let pick = |f: fn(&SweepRow) -> Option<f64>| rows.iter().map(|r| f(r).unwrap_or(0.0)).collect::<Vec<_>>();
            let metrics = if axis == "inversion" {
                vec![("mean pi", pick(|r| r.mean_pi)), ("mean ci", pick(|r| r.mean_ci))]
            } else {
                vec![("mean save", pick(|r| r.mean_save)), ("mean restore", pick(|r| r.mean_restore))]
            };
            bar_chart(axis, "cycles", &cats, &metrics)
        }
        _ => {
            let mut series = series_by_label(rows, "success", |r| Some(r.success_ratio));
            if axis != "utilization" {
                series.extend(series_by_label(rows, "survivability", |r| r.survivability));
            }
            line_chart(axis, axis, "ratio", &series)
        }
    }
}

/// Renders the chart of a sweep CSV; the same CSV always yields the same bytes.
pub fn plot_csv(csv_path: &Path, svg_path: &Path) -> Result<()> {
    let rows = read_rows(File::open(csv_path)?)?;
    fs::write(svg_path, plot_rows(&rows))?;
    Ok(())
}
