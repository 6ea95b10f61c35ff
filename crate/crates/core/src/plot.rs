//! Minimal SVG line plots for the pipeline outputs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::continuation::Branch;
use crate::error::{Error, Result};
use crate::verify::CheckReport;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 50.0;
const COLORS: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"];

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Render series on shared axes. `log_x`/`log_y` plot base-10 logarithms;
/// nonpositive values are dropped on log axes.
pub fn svg(title: &str, series: &[Series], log_x: bool, log_y: bool) -> String {
    let tx = |v: f64| if log_x { v.log10() } else { v };
    let ty = |v: f64| if log_y { v.log10() } else { v };
    let keep = |&(x, y): &(f64, f64)| (!log_x || x > 0.0) && (!log_y || y > 0.0) && x.is_finite() && y.is_finite();
    let pts: Vec<Vec<(f64, f64)>> =
        series.iter().map(|s| s.points.iter().filter(|p| keep(p)).map(|&(x, y)| (tx(x), ty(y))).collect()).collect();
    let all = pts.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(x1 > x0) {
        x1 = x0 + 1.0;
    }
    if !(y1 > y0) {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{title}</text>"#, W / 2.0);
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let lab = |v: f64, log: bool| if log { format!("1e{v:.1}") } else { format!("{v:.3}") };
    let _ = writeln!(s, r#"<text x="{PAD}" y="{}">{}</text>"#, H - PAD + 15.0, lab(x0, log_x));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, W - PAD, H - PAD + 15.0, lab(x1, log_x));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, PAD - 4.0, H - PAD, lab(y0, log_y));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, PAD - 4.0, PAD + 10.0, lab(y1, log_y));
    for (k, (ser, p)) in series.iter().zip(&pts).enumerate() {
        let color = COLORS[k % COLORS.len()];
        let path: Vec<String> = p.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#, path.join(" "));
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            W - PAD + 4.0,
            PAD + 14.0 * k as f64 + 10.0,
            ser.label
        );
    }
    s.push_str("</svg>\n");
    s
}

fn write(out: &Path, name: &str, body: String) -> Result<()> {
    let dir = out.join("plots");
    fs::create_dir_all(&dir).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(dir.join(name), body).map_err(|e| Error::Io(e.to_string()))
}

/// Profile overlay across rungs and exterior mass against `λ`.
pub fn write_branch_plots(out: &Path, tag: &str, x: &[f64], branch: &Branch) -> Result<()> {
    let mut overlay =
        vec![Series { label: "limit".into(), points: x.iter().copied().zip(branch.seed.u.iter().copied()).collect() }];
    for r in branch.records.iter().step_by(2) {
        overlay
            .push(Series { label: format!("λ={:.0e}", r.lambda), points: x.iter().copied().zip(r.u.iter().copied()).collect() });
    }
    write(out, &format!("profiles_{tag}.svg"), svg(&format!("profiles {tag}"), &overlay, false, false))?;
    let mass =
        Series { label: "exterior mass".into(), points: branch.records.iter().map(|r| (r.lambda, r.exterior_mass)).collect() };
    let dist = Series { label: "distance".into(), points: branch.records.iter().map(|r| (r.lambda, r.dist_to_limit)).collect() };
    write(out, &format!("decay_{tag}.svg"), svg(&format!("decay {tag}"), &[mass, dist], true, true))
}

/// Check tables against `λ` on log axes.
pub fn write_decay_plot(out: &Path, reports: &[(String, CheckReport)]) -> Result<()> {
    let series: Vec<Series> = reports
        .iter()
        .filter(|(_, r)| r.lambda_table.len() > 1)
        .map(|(subj, r)| Series { label: format!("{} {subj}", r.name), points: r.lambda_table.clone() })
        .collect();
    write(out, "checks.svg", svg("checks", &series, true, true))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_is_well_formed_and_skips_bad_log_points() {
        let s = svg("t", &[Series { label: "a".into(), points: vec![(1.0, 1.0), (10.0, 0.0), (100.0, 0.01)] }], true, true);
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("<polyline").count(), 1);
        let line = s.lines().find(|l| l.contains("<polyline")).unwrap();
        assert_eq!(line.matches(',').count(), 2);
    }
}
