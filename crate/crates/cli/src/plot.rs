//! Self-contained log-log SVG plots of relaxation curves.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::warn;
use volrelax::{CurveKind, Direction, FitWindow, PowerLawFit, RelaxationCurve};

use crate::analyze::{fit_file, stem, FitReport};
use crate::error::{CliError, CliResult};
use crate::output::{write_atomic, zeta_label};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 130.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 55.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

pub struct Line {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    /// Symmetric error bars, one per point.
    pub errors: Option<Vec<f64>>,
    pub dashed: bool,
    pub color: &'static str,
}

/// Log-log axes with one polyline per line. Non-positive points are dropped.
pub fn render(title: &str, x_label: &str, y_label: &str, lines: &[Line]) -> CliResult<String> {
    let visible: Vec<(usize, Vec<(f64, f64, f64)>)> = lines
        .iter()
        .enumerate()
        .map(|(k, line)| {
            let pts: Vec<(f64, f64, f64)> = line
                .points
                .iter()
                .enumerate()
                .filter(|(_, &(x, y))| x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())
                .map(|(i, &(x, y))| (x, y, line.errors.as_ref().map_or(0.0, |e| e[i])))
                .collect();
            // lag 0 has no place on a log axis; anything else dropped is a non-positive value
            let dropped = line.points.iter().filter(|p| p.0 > 0.0).count() - pts.len();
            if dropped > 0 && !line.dashed {
                warn!("{title}, {}: {dropped} non-positive points dropped from log plot", line.label);
            }
            (k, pts)
        })
        .collect();
    let all = || visible.iter().flat_map(|(_, p)| p.iter());
    if all().next().is_none() {
        return Err(CliError::Data(format!("{title}: no positive points to plot")));
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y, _) in all() {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let (lx0, lx1) = padded(x0.log10(), x1.log10());
    let (ly0, ly1) = padded(y0.log10(), y1.log10());
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x.log10() - lx0) / (lx1 - lx0) * plot_w;
    let sy = |y: f64| MARGIN_TOP + (ly1 - y.log10()) / (ly1 - ly0) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    for d in ticks(lx0, lx1) {
        let x = MARGIN_LEFT + (d - lx0) / (lx1 - lx0) * plot_w;
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{MARGIN_TOP}" x2="{x:.2}" y2="{:.2}" stroke="#ddd"/>"##,
            MARGIN_TOP + plot_h
        );
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            MARGIN_TOP + plot_h + 16.0,
            power_label(d)
        );
    }
    for d in ticks(ly0, ly1) {
        let y = MARGIN_TOP + (ly1 - d) / (ly1 - ly0) * plot_h;
        let _ = writeln!(
            svg,
            r##"<line x1="{MARGIN_LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##,
            MARGIN_LEFT + plot_w
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 6.0,
            y + 4.0,
            power_label(d)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        escape(y_label)
    );

    let mut legend_y = MARGIN_TOP + 10.0;
    for (k, pts) in &visible {
        let line = &lines[*k];
        if pts.is_empty() {
            continue;
        }
        let dash = if line.dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let path: Vec<String> = pts.iter().map(|&(x, y, _)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5"{dash} points="{}"/>"#,
            line.color,
            path.join(" ")
        );
        if line.errors.is_some() {
            for &(x, y, e) in pts.iter().filter(|p| p.2 > 0.0) {
                let top = sy(y + e).max(MARGIN_TOP);
                // a bar reaching zero or below runs to the axis
                let bottom = if y - e > 0.0 { sy(y - e).min(MARGIN_TOP + plot_h) } else { MARGIN_TOP + plot_h };
                let cx = sx(x);
                let _ = writeln!(
                    svg,
                    r#"<path d="M{cx:.2},{top:.2}V{bottom:.2}M{:.2},{top:.2}H{:.2}M{:.2},{bottom:.2}H{:.2}" stroke="{}" fill="none"/>"#,
                    cx - 3.0,
                    cx + 3.0,
                    cx - 3.0,
                    cx + 3.0,
                    line.color
                );
            }
        }
        if !line.label.is_empty() {
            let lx = MARGIN_LEFT + plot_w + 12.0;
            let _ = writeln!(
                svg,
                r#"<line x1="{lx:.2}" y1="{legend_y:.2}" x2="{:.2}" y2="{legend_y:.2}" stroke="{}" stroke-width="1.5"{dash}/>"#,
                lx + 22.0,
                line.color
            );
            let _ =
                writeln!(svg, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 28.0, legend_y + 4.0, escape(&line.label));
            legend_y += 18.0;
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi - lo < 1e-9 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.03 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

/// Integer decades inside `[lo, hi]`; at least the two ends when none fit.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let t: Vec<f64> = (lo.ceil() as i32..=hi.floor() as i32).map(f64::from).collect();
    if t.is_empty() {
        vec![lo, hi]
    } else {
        t
    }
}

fn power_label(d: f64) -> String {
    if d.fract() == 0.0 {
        format!(r#"10<tspan baseline-shift="super" font-size="9">{}</tspan>"#, d as i32)
    } else {
        format!("{:.2}", 10f64.powf(d))
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// A curve file name split into its parts.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveName {
    pub kind: CurveKind,
    pub direction: Direction,
    pub zeta: f64,
    pub filter: String,
}

/// Parses `{kind}_{dir}_{zeta}x_{filter}.tsv`.
pub fn parse_curve_name(name: &str) -> Option<CurveName> {
    let base = name.strip_suffix(".tsv")?;
    let kind = [CurveKind::RemanentV, CurveKind::CumulativeV, CurveKind::OmoriN]
        .into_iter()
        .find(|k| base.starts_with(&format!("{}_", k.label())))?;
    let rest = &base[kind.label().len() + 1..];
    let (dir, rest) = rest.split_once('_')?;
    let (zeta, filter) = rest.split_once("x_")?;
    Some(CurveName { kind, direction: dir.parse().ok()?, zeta: zeta.parse().ok()?, filter: filter.to_string() })
}

fn curve_symbol(kind: CurveKind) -> &'static str {
    match kind {
        CurveKind::RemanentV => "v",
        CurveKind::CumulativeV => "V",
        CurveKind::OmoriN => "N",
    }
}

fn collect_inputs(inputs: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut files = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let entries = std::fs::read_dir(input).map_err(|e| CliError::data(input, e))?;
            let mut found: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.file_name().and_then(|n| n.to_str()).and_then(parse_curve_name).is_some())
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(input.clone());
        }
    }
    Ok(files)
}

/// One SVG per (kind, direction, filter), one polyline per zeta, dashed
/// fitted models where a fit report sits beside the curve, and error bars
/// on the largest zeta. Returns the files written.
pub fn run(inputs: &[PathBuf], out: &Path) -> CliResult<Vec<PathBuf>> {
    let files = collect_inputs(inputs)?;
    if files.is_empty() {
        return Err(CliError::Usage("no curve files to plot".into()));
    }
    type Group = Vec<(f64, RelaxationCurve, Option<PowerLawFit>)>;
    let mut groups: BTreeMap<(String, String, String), (CurveName, Group)> = BTreeMap::new();
    for path in &files {
        let file_name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let name = parse_curve_name(file_name).ok_or_else(|| {
            CliError::Usage(format!("{}: expected {{kind}}_{{dir}}_{{zeta}}x_{{filter}}.tsv", path.display()))
        })?;
        let text = std::fs::read_to_string(path).map_err(|e| CliError::data(path, e))?;
        let curve = RelaxationCurve::from_tsv(name.kind, name.direction, &text).map_err(|e| CliError::data(path, e))?;
        if curve.is_empty() {
            return Err(CliError::data(path, "empty curve"));
        }
        let fit = if name.kind == CurveKind::CumulativeV {
            let report = path.with_file_name(fit_file(&stem(name.direction, name.zeta, &name.filter)));
            read_fit(&report)
        } else {
            None
        };
        let key = (name.kind.label().to_string(), name.direction.label().to_string(), name.filter.clone());
        groups.entry(key).or_insert_with(|| (name.clone(), Vec::new())).1.push((name.zeta, curve, fit));
    }

    std::fs::create_dir_all(out).map_err(|e| CliError::data(out, e))?;
    let mut written = Vec::new();
    for ((kind, dir, filter), (name, mut group)) in groups {
        group.sort_by(|a, b| a.0.total_cmp(&b.0));
        let top = group.last().map(|g| g.0);
        let mut lines = Vec::new();
        for (i, (zeta, curve, fit)) in group.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let points: Vec<(f64, f64)> =
                curve.lags().iter().zip(curve.values()).map(|(&t, &v)| (t as f64, v)).collect();
            let errors = (Some(*zeta) == top).then(|| thin_errors(curve));
            lines.push(Line { label: format!("ζ = {}σ", zeta_label(*zeta)), points, errors, dashed: false, color });
            if let Some(fit) = fit {
                lines.push(Line { label: String::new(), points: model_points(fit), errors: None, dashed: true, color });
            }
        }
        let symbol = format!("{}{}(t)", curve_symbol(name.kind), name.direction.symbol());
        let title = format!("{symbol}, {filter} events");
        let svg = render(&title, "t [bars]", &symbol, &lines)?;
        let path = out.join(format!("{kind}_{dir}_{filter}.svg"));
        write_atomic(&path, &svg)?;
        written.push(path);
    }
    Ok(written)
}

fn read_fit(path: &Path) -> Option<PowerLawFit> {
    let text = std::fs::read_to_string(path).ok()?;
    match serde_json::from_str::<FitReport>(&text) {
        Ok(report) => report.model(),
        Err(e) => {
            warn!("{}: unreadable fit report: {e}", path.display());
            None
        }
    }
}

fn model_points(fit: &PowerLawFit) -> Vec<(f64, f64)> {
    FitWindow::new(fit.window.t_min, fit.window.t_max)
        .log_lags()
        .into_iter()
        .map(|t| (t as f64, fit.model(t as f64)))
        .collect()
}

/// Error bars on roughly ten points per decade; zero elsewhere.
fn thin_errors(curve: &RelaxationCurve) -> Vec<f64> {
    let mut next = 1.0;
    curve
        .lags()
        .iter()
        .zip(curve.event_dispersion())
        .map(|(&t, &sd)| {
            if t >= 1 && t as f64 >= next {
                next = t as f64 * 10f64.powf(0.1);
                sd
            } else {
                0.0
            }
        })
        .collect()
}
