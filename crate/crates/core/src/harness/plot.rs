//! Minimal SVG line plots of tracking trajectories.

use std::fmt::Write as _;

use super::compare::Comparison;
use super::sim::Run;

const WIDTH: f64 = 900.0;
const PANEL_HEIGHT: f64 = 260.0;
const MARGIN: f64 = 50.0;
const COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
];

struct Series<'a> {
    label: &'a str,
    color: &'a str,
    dashed: bool,
    points: Vec<(f64, f64)>,
}

fn panel(out: &mut String, top: f64, title: &str, series: &[Series]) {
    let (mut x_max, mut y_lo, mut y_hi) = (1.0_f64, f64::INFINITY, f64::NEG_INFINITY);
    for p in series.iter().flat_map(|s| &s.points) {
        x_max = x_max.max(p.0);
        if p.1.is_finite() {
            y_lo = y_lo.min(p.1);
            y_hi = y_hi.max(p.1);
        }
    }
    if !(y_lo < y_hi) {
        y_lo = if y_lo.is_finite() { y_lo - 1.0 } else { -1.0 };
        y_hi = y_lo + 2.0;
    }
    let pad = 0.05 * (y_hi - y_lo);
    let (y_lo, y_hi) = (y_lo - pad, y_hi + pad);
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = PANEL_HEIGHT - 2.0 * MARGIN;
    let sx = |x: f64| MARGIN + x / x_max * plot_w;
    let sy = |y: f64| top + MARGIN + (y_hi - y) / (y_hi - y_lo) * plot_h;

    writeln!(
        out,
        r##"<rect x="{MARGIN}" y="{:.1}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#444"/>"##,
        top + MARGIN
    )
    .unwrap();
    writeln!(
        out,
        r#"<text x="{MARGIN}" y="{:.1}" font-size="14">{title}</text>"#,
        top + MARGIN - 8.0
    )
    .unwrap();
    for (v, anchor_y) in [(y_hi, sy(y_hi)), (y_lo, sy(y_lo))] {
        writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{v:.3}</text>"#,
            MARGIN - 4.0,
            anchor_y + 4.0
        )
        .unwrap();
    }
    writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">k = {x_max}</text>"#,
        WIDTH - MARGIN,
        top + PANEL_HEIGHT - MARGIN + 16.0
    )
    .unwrap();

    for (i, s) in series.iter().enumerate() {
        let mut d = String::new();
        for (j, &(x, y)) in s.points.iter().filter(|p| p.1.is_finite()).enumerate() {
            write!(
                d,
                "{}{:.2},{:.2}",
                if j == 0 { "M" } else { " L" },
                sx(x),
                sy(y)
            )
            .unwrap();
        }
        let dash = if s.dashed {
            r#" stroke-dasharray="6,4""#
        } else {
            ""
        };
        writeln!(
            out,
            r#"<path d="{d}" fill="none" stroke="{}" stroke-width="1.2"{dash}/>"#,
            s.color
        )
        .unwrap();
        let ly = top + MARGIN + 14.0 * (i as f64 + 1.0);
        writeln!(
            out,
            r#"<text x="{:.1}" y="{ly:.1}" font-size="12" fill="{}">{}</text>"#,
            WIDTH - MARGIN - 150.0,
            s.color,
            s.label
        )
        .unwrap();
    }
}

fn document(panels: &[(&str, Vec<Series>)]) -> String {
    let height = PANEL_HEIGHT * panels.len() as f64;
    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" viewBox="0 0 {WIDTH} {height}">"#
    )
    .unwrap();
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for (i, (title, series)) in panels.iter().enumerate() {
        panel(&mut out, PANEL_HEIGHT * i as f64, title, series);
    }
    out.push_str("</svg>\n");
    out
}

/// Output against reference output, and tracking error.
pub fn run_svg(run: &Run) -> String {
    let pts = |f: fn(&super::sim::StepRecord) -> f64| {
        run.records.iter().map(|r| (r.k as f64, f(r))).collect()
    };
    document(&[
        (
            "output",
            vec![
                Series {
                    label: "y_m",
                    color: COLORS[1],
                    dashed: true,
                    points: pts(|r| r.y_m),
                },
                Series {
                    label: "y",
                    color: COLORS[0],
                    dashed: false,
                    points: pts(|r| r.y),
                },
            ],
        ),
        (
            "tracking error e",
            vec![Series {
                label: "e",
                color: COLORS[0],
                dashed: false,
                points: pts(|r| r.e),
            }],
        ),
    ])
}

/// Tracking error of every method in one panel.
pub fn comparison_svg(cmp: &Comparison) -> String {
    let mut series = Vec::new();
    for (i, run) in cmp.runs.iter().enumerate() {
        series.push(Series {
            label: run.config.estimator.kind.name(),
            color: COLORS[i % COLORS.len()],
            dashed: false,
            points: run.records.iter().map(|r| (r.k as f64, r.e)).collect(),
        });
    }
    document(&[("tracking error e", series)])
}
