//! Static SVG figures. Output depends only on the input numbers, so repeated
//! runs produce identical files.

use std::fmt::Write as _;

use crate::analysis::{BoundsReport, EthReport};
use crate::thermo::ThermoProfile;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: (f64, f64, f64, f64) = (70.0, 20.0, 40.0, 55.0); // left, right, top, bottom

const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

#[derive(Clone, Debug)]
pub enum Style {
    Line,
    Points,
    /// Horizontal segment from `points[0]` to `points[1]`.
    Dashed,
}

#[derive(Clone, Debug)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
}

#[derive(Clone, Debug)]
pub struct Panel {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn bounds(series: &[Series]) -> Option<(f64, f64, f64, f64)> {
    let mut it = series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter(|(x, y)| x.is_finite() && y.is_finite());
    let &(x0, y0) = it.next()?;
    let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) = (x0, x0, y0, y0);
    for &(x, y) in it {
        x_lo = x_lo.min(x);
        x_hi = x_hi.max(x);
        y_lo = y_lo.min(y);
        y_hi = y_hi.max(y);
    }
    let pad = |lo: f64, hi: f64| {
        if hi - lo < 1e-12 {
            let w = lo.abs().max(1.0) * 0.05;
            (lo - w, hi + w)
        } else {
            let w = 0.05 * (hi - lo);
            (lo - w, hi + w)
        }
    };
    let (x_lo, x_hi) = pad(x_lo, x_hi);
    let (y_lo, y_hi) = pad(y_lo, y_hi);
    Some((x_lo, x_hi, y_lo, y_hi))
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.1e}")
    } else {
        format!("{v:.2}")
    }
}

/// Draws one panel into `out` at vertical offset `top`.
fn draw_panel(out: &mut String, panel: &Panel, top: f64, height: f64) {
    let (ml, mr, mt, mb) = MARGIN;
    let (x0, x1) = (ml, WIDTH - mr);
    let (y0, y1) = (top + mt, top + height - mb);
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        top + 24.0,
        esc(&panel.title)
    );
    let _ = writeln!(
        out,
        r##"<rect x="{x0:.1}" y="{y0:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#333"/>"##,
        x1 - x0,
        y1 - y0
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="12">{}</text>"#,
        (x0 + x1) / 2.0,
        y1 + 40.0,
        esc(&panel.x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{:.1}" text-anchor="middle" font-size="12" transform="rotate(-90 16 {:.1})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        esc(&panel.y_label)
    );
    let Some((xa, xb, ya, yb)) = bounds(&panel.series) else {
        let _ = writeln!(
            out,
            r##"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="14" fill="#888">no data</text>"##,
            (x0 + x1) / 2.0,
            (y0 + y1) / 2.0
        );
        return;
    };
    let sx = |x: f64| x0 + (x - xa) / (xb - xa) * (x1 - x0);
    let sy = |y: f64| y1 - (y - ya) / (yb - ya) * (y1 - y0);
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = xa + t * (xb - xa);
        let yv = ya + t * (yb - ya);
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle" font-size="10">{}</text>"#,
            sx(xv),
            y1 + 16.0,
            tick_label(xv)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end" font-size="10">{}</text>"#,
            x0 - 6.0,
            sy(yv) + 3.0,
            tick_label(yv)
        );
    }
    for (k, s) in panel.series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<(f64, f64)> = s
            .points
            .iter()
            .copied()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .collect();
        match s.style {
            Style::Points => {
                for (x, y) in &pts {
                    let _ = writeln!(
                        out,
                        r#"<circle class="pt" cx="{:.2}" cy="{:.2}" r="2.2" fill="{color}"/>"#,
                        sx(*x),
                        sy(*y)
                    );
                }
            }
            Style::Line | Style::Dashed => {
                if pts.is_empty() {
                    continue;
                }
                let path: Vec<String> = pts.iter().map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y))).collect();
                let dash = if matches!(s.style, Style::Dashed) { r#" stroke-dasharray="6 4""# } else { "" };
                let _ = writeln!(
                    out,
                    r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#,
                    path.join(" ")
                );
            }
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" fill="{color}">{}</text>"#,
            x0 + 8.0,
            y0 + 14.0 + 14.0 * k as f64,
            esc(&s.name)
        );
    }
}

/// Stacked panels in one document.
pub fn render(panels: &[Panel]) -> String {
    let total = HEIGHT * panels.len().max(1) as f64;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{total:.0}" viewBox="0 0 {WIDTH:.0} {total:.0}" font-family="sans-serif">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, p) in panels.iter().enumerate() {
        draw_panel(&mut out, p, HEIGHT * i as f64, HEIGHT);
    }
    out.push_str("</svg>\n");
    out
}

/// `ε_eth` against `Δ`, one point per report, grouped by region.
pub fn eth_curve(reports: &[EthReport]) -> String {
    let mut sorted: Vec<&EthReport> = reports.iter().collect();
    sorted.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    let points = sorted.iter().map(|r| (r.delta, r.eps_measured)).collect();
    render(&[Panel {
        title: "Measured ETH precision".into(),
        x_label: "Δ".into(),
        y_label: "ε_eth".into(),
        series: vec![Series {
            name: "max ‖τ_m − τ_n‖₁".into(),
            points,
            style: Style::Line,
        }],
    }])
}

/// Recomputed `8‖H_C‖²/Δ_B² + 4 d_S ε` per cell, with the energy span of the
/// cell's records: `(cell, E_lo, E_hi, rhs)`.
pub fn bound_lines(report: &BoundsReport) -> Vec<(usize, f64, f64, f64)> {
    let mut lines: Vec<(usize, f64, f64, f64)> = Vec::new();
    for rec in &report.records {
        let inp = &rec.bound.eq8.inputs;
        let get = |k: &str| inp.get(k).copied().unwrap_or(f64::NAN);
        let (norm, db, d_s, eps) = (get("norm_hc"), get("delta_b"), get("d_S"), get("eps"));
        let rhs = 8.0 * norm * norm / (db * db) + 4.0 * d_s * eps;
        let e = rec.bound.energy;
        match lines.iter_mut().find(|l| l.0 == rec.cell) {
            Some(l) => {
                l.1 = l.1.min(e);
                l.2 = l.2.max(e);
            }
            None => lines.push((rec.cell, e, e, rhs)),
        }
    }
    lines
}

/// `‖τ_n − ω‖₁` against `E_n` with the eigenstate bound overlaid.
pub fn bounds_scatter(report: &BoundsReport) -> String {
    let points = report
        .records
        .iter()
        .map(|r| (r.bound.energy, r.bound.eq8.lhs))
        .collect();
    let mut series = vec![Series {
        name: "‖τ_n − ω‖₁".into(),
        points,
        style: Style::Points,
    }];
    for (cell, lo, hi, rhs) in bound_lines(report) {
        series.push(Series {
            name: format!("bound, cell {cell}"),
            points: vec![(lo, rhs), (hi, rhs)],
            style: Style::Dashed,
        });
    }
    render(&[Panel {
        title: "Eigenstate distance to ω".into(),
        x_label: "E_n".into(),
        y_label: "trace distance".into(),
        series,
    }])
}

/// `β(E)` and `C(E)` over the valid range.
pub fn thermo_profile(profile: &ThermoProfile) -> String {
    let pick = |values: &[f64]| -> Vec<(f64, f64)> {
        profile
            .energy_grid
            .iter()
            .zip(values)
            .zip(&profile.in_valid_range)
            .filter(|(_, &ok)| ok)
            .map(|((&e, &v), _)| (e, v))
            .collect()
    };
    render(&[
        Panel {
            title: "Inverse temperature".into(),
            x_label: "E".into(),
            y_label: "β".into(),
            series: vec![Series {
                name: "β(E)".into(),
                points: pick(&profile.beta),
                style: Style::Line,
            }],
        },
        Panel {
            title: "Heat capacity".into(),
            x_label: "E".into(),
            y_label: "C".into(),
            series: vec![Series {
                name: "C(E)".into(),
                points: pick(&profile.heat_capacity),
                style: Style::Line,
            }],
        },
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_panel_says_no_data() {
        let svg = render(&[Panel {
            title: "t".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            series: vec![],
        }]);
        assert!(svg.contains("no data"));
        assert!(svg.starts_with("<svg"));
    }

    #[test]
    fn one_circle_per_point() {
        let svg = render(&[Panel {
            title: "t".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            series: vec![Series {
                name: "s".into(),
                points: vec![(0.0, 1.0), (1.0, 2.0), (2.0, 2.0)],
                style: Style::Points,
            }],
        }]);
        assert_eq!(svg.matches("class=\"pt\"").count(), 3);
    }
}
