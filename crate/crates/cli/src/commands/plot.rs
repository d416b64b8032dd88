//! Self-contained SVG line plots of the CSV files the other commands write.

use std::fmt::Write as _;
use std::path::Path;

use crate::commands::write_text;
use crate::error::{CliError, CliResult};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 170.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;
const COLOURS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Keyrate,
    GammaPdf,
    Loss,
}

impl PlotKind {
    pub fn parse(name: &str) -> CliResult<Self> {
        match name {
            "keyrate" => Ok(Self::Keyrate),
            "gamma_pdf" => Ok(Self::GammaPdf),
            "loss" => Ok(Self::Loss),
            other => Err(CliError::plot(format!(
                "unknown plot kind `{other}` (expected keyrate, gamma_pdf or loss)"
            ))),
        }
    }

    /// Leading columns every file of this kind must carry.
    fn required(self) -> &'static [&'static str] {
        match self {
            Self::Keyrate => &["v_mod", "i_ab", "chi_be", "r_sec"],
            Self::GammaPdf => &["bin_lo", "bin_hi"],
            Self::Loss => &["epoch", "train_loss"],
        }
    }

    fn labels(self) -> (&'static str, &'static str, &'static str) {
        match self {
            Self::Keyrate => ("Secret key rate vs modulation variance", "V_mod (SNU)", "bits/pulse"),
            Self::GammaPdf => ("Coherent efficiency distribution", "coherent efficiency", "probability density"),
            Self::Loss => ("Training loss", "epoch", "MSE (rad²)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Reads one CSV into plot series: every column after the abscissa is a
/// series, and histogram files become step outlines over their bins.
pub fn read_series(text: &str, kind: PlotKind, source: &str) -> CliResult<Vec<Series>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::plot(format!("{source}: cannot read CSV header: {e}")))?
        .iter()
        .map(str::to_owned)
        .collect();
    if headers.iter().all(|h| h.is_empty()) {
        return Err(CliError::plot(format!("{source}: CSV is empty")));
    }
    let required = kind.required();
    if headers.len() < required.len() || headers[..required.len()] != *required {
        return Err(CliError::plot(format!(
            "{source}: expected columns starting with {}, found {}",
            required.join(","),
            headers.join(",")
        )));
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::plot(format!("{source}: {e}")))?;
        let values = record
            .iter()
            .map(|v| v.parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .filter(|v| v.len() == headers.len())
            .ok_or_else(|| CliError::plot(format!("{source}: row {} is not all finite numbers", line + 2)))?;
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(CliError::plot(format!("{source}: CSV has no data rows")));
    }
    let first_series = if kind == PlotKind::GammaPdf { 2 } else { 1 };
    let series = (first_series..headers.len())
        .map(|c| {
            let points = if kind == PlotKind::GammaPdf {
                rows.iter().flat_map(|r| [(r[0], r[c]), (r[1], r[c])]).collect()
            } else {
                rows.iter().map(|r| (r[0], r[c])).collect()
            };
            Series {
                label: headers[c].clone(),
                points,
            }
        })
        .collect::<Vec<_>>();
    if series.is_empty() {
        return Err(CliError::plot(format!("{source}: no data columns to plot")));
    }
    Ok(series)
}

/// Tick step of 1, 2 or 5 times a power of ten giving about five ticks.
fn tick_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    [1.0, 2.0, 5.0, 10.0]
        .into_iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag)
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt_tick(v: f64, step: f64) -> String {
    let digits = (-step.log10().floor()).max(0.0) as usize;
    let s = format!("{v:.digits$}");
    if s == "-0" || s.starts_with("-0.") && s.trim_start_matches(['-', '0', '.']).is_empty() {
        s[1..].to_string()
    } else {
        s
    }
}

pub fn render_svg(kind: PlotKind, series: &[Series]) -> String {
    let (title, x_label, y_label) = kind.labels();
    let (x0, x1) = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (mut y0, mut y1) = bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    if kind == PlotKind::GammaPdf {
        y0 = y0.min(0.0);
    }
    let pad = 0.05 * (y1 - y0);
    y0 -= if kind == PlotKind::GammaPdf { 0.0 } else { pad };
    y1 += pad;
    let pw = WIDTH - MARGIN_L - MARGIN_R;
    let ph = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * pw;
    let sy = |y: f64| MARGIN_T + (y1 - y) / (y1 - y0) * ph;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        MARGIN_L + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );

    let xs = tick_step(x1 - x0);
    let mut t = (x0 / xs).ceil() * xs;
    while t <= x1 + 1e-9 * xs {
        let x = sx(t);
        let _ = writeln!(
            svg,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            MARGIN_T + ph,
            MARGIN_T + ph + 5.0,
            MARGIN_T + ph + 18.0,
            fmt_tick(t, xs)
        );
        t += xs;
    }
    let ys = tick_step(y1 - y0);
    let mut t = (y0 / ys).ceil() * ys;
    while t <= y1 + 1e-9 * ys {
        let y = sy(t);
        let _ = writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{MARGIN_L}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            MARGIN_L - 5.0,
            MARGIN_L - 8.0,
            y + 4.0,
            fmt_tick(t, ys)
        );
        t += ys;
    }
    if y0 < 0.0 && y1 > 0.0 {
        let y = sy(0.0);
        let _ = writeln!(
            svg,
            r##"<line x1="{MARGIN_L}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#999" stroke-dasharray="4 3"/>"##,
            MARGIN_L + pw
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        MARGIN_L + pw / 2.0,
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(
        svg,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        MARGIN_T + ph / 2.0,
        MARGIN_T + ph / 2.0,
        escape(y_label)
    );

    for (i, s) in series.iter().enumerate() {
        let colour = COLOURS[i % COLOURS.len()];
        let points: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        let ly = MARGIN_T + 14.0 + 18.0 * i as f64;
        let lx = MARGIN_L + pw + 12.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{colour}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Renders one or more CSV files of the same kind into a single SVG. With
/// several inputs each legend entry is prefixed by its file stem.
pub fn cmd_plot(inputs: &[&Path], out: &Path, kind: &str) -> CliResult<()> {
    let kind = PlotKind::parse(kind)?;
    if inputs.is_empty() {
        return Err(CliError::plot("no input CSV given"));
    }
    let mut all = Vec::new();
    for path in inputs {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::plot(format!("cannot read {}: {e}", path.display())))?;
        let mut series = read_series(&text, kind, &path.display().to_string())?;
        if inputs.len() > 1 {
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            for s in &mut series {
                s.label = format!("{stem}: {}", s.label);
            }
        }
        all.extend(series);
    }
    write_text(out, &render_svg(kind, &all))?;
    println!("wrote {} ({} series)", out.display(), all.len());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCAN: &str = "v_mod,i_ab,chi_be,r_sec\n1,0.5,0.4,0.075\n2,0.8,0.7,0.06\n3,1.0,0.95,0.0\n";

    #[test]
    fn one_polyline_per_series() {
        let series = read_series(SCAN, PlotKind::Keyrate, "scan").unwrap();
        assert_eq!(series.len(), 3);
        let svg = render_svg(PlotKind::Keyrate, &series);
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert!(svg.contains(">r_sec</text>"));
    }

    #[test]
    fn histogram_becomes_steps() {
        let pdf = "bin_lo,bin_hi,pdf_before\n0,0.5,1.5\n0.5,1,0.5\n";
        let s = read_series(pdf, PlotKind::GammaPdf, "pdf").unwrap();
        assert_eq!(s[0].points, vec![(0.0, 1.5), (0.5, 1.5), (0.5, 0.5), (1.0, 0.5)]);
    }

    #[test]
    fn bad_inputs_are_plot_errors() {
        for text in ["", "v_mod,i_ab,chi_be,r_sec\n", "epoch,train_loss\n1,0.5\n", "v_mod,i_ab,chi_be,r_sec\n1,x,0,0\n"] {
            let err = read_series(text, PlotKind::Keyrate, "t").unwrap_err();
            assert_eq!(err.code(), 6, "{text:?}");
        }
        assert_eq!(PlotKind::parse("scatter").unwrap_err().code(), 6);
    }

    #[test]
    fn ticks_are_round() {
        assert_eq!(tick_step(10.0), 2.0);
        assert_eq!(tick_step(0.12), 0.05);
        assert_eq!(fmt_tick(0.25, 0.05), "0.25");
        assert_eq!(fmt_tick(-0.0, 0.5), "0.0");
    }
}
