//! Static SVG charts: quartile bar charts and a hexbin density of
//! outcome versus degree assortativity.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::evaluation::{EvaluationReport, QuartileTable, RunResult, QUARTILE_LABELS};
use crate::recruitment::Scenario;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 4] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a"];

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Grouped bars: one group per gamma quartile, one bar per scenario.
/// Missing cells are left blank.
pub fn quartile_bars_svg(title: &str, tables: &[(Scenario, QuartileTable)]) -> String {
    let values: Vec<f64> = tables
        .iter()
        .flat_map(|(_, t)| t.quartiles())
        .flatten()
        .collect();
    let lo = values.iter().copied().fold(0.0f64, f64::min);
    let hi = values.iter().copied().fold(0.0f64, f64::max);
    let (lo, hi) = if hi - lo <= 0.0 {
        (lo - 1.0, hi + 1.0)
    } else {
        (lo, hi)
    };
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let plot_w = WIDTH - 2.0 * MARGIN;
    let y_of = |v: f64| MARGIN + (hi - v) / (hi - lo) * plot_h;

    let mut out = String::new();
    header(&mut out, title);
    let zero = y_of(0.0);
    let _ = writeln!(
        out,
        r#"<line x1="{MARGIN}" y1="{zero:.2}" x2="{:.2}" y2="{zero:.2}" stroke="black"/>"#,
        WIDTH - MARGIN
    );
    for (v, anchor) in [(hi, "hi"), (lo, "lo")] {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" class="{anchor}">{v:.3}</text>"#,
            MARGIN - 6.0,
            y_of(v) + 4.0
        );
    }

    let group_w = plot_w / 4.0;
    let bar_w = group_w * 0.8 / tables.len().max(1) as f64;
    for (q, label) in QUARTILE_LABELS.iter().enumerate() {
        let gx = MARGIN + q as f64 * group_w + group_w * 0.1;
        for (k, (_, table)) in tables.iter().enumerate() {
            let Some(v) = table.quartiles()[q] else {
                continue;
            };
            let (top, bottom) = if v >= 0.0 {
                (y_of(v), zero)
            } else {
                (zero, y_of(v))
            };
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{top:.2}" width="{bar_w:.2}" height="{:.2}" fill="{}"/>"#,
                gx + k as f64 * bar_w,
                bottom - top,
                PALETTE[k % PALETTE.len()]
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{label}</text>"#,
            MARGIN + (q as f64 + 0.5) * group_w,
            HEIGHT - MARGIN + 18.0
        );
    }
    for (k, (scenario, _)) in tables.iter().enumerate() {
        let x = MARGIN + k as f64 * 70.0;
        let y = HEIGHT - 18.0;
        let _ = writeln!(
            out,
            r#"<rect x="{x:.2}" y="{:.2}" width="10" height="10" fill="{}"/><text x="{:.2}" y="{y:.2}">{}</text>"#,
            y - 9.0,
            PALETTE[k % PALETTE.len()],
            x + 14.0,
            scenario.label()
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Bar chart of one quartile statistic across all scenarios of a report.
pub fn report_bars_svg(report: &EvaluationReport, zeta_debiased: bool) -> String {
    let tables: Vec<(Scenario, QuartileTable)> = Scenario::ALL
        .iter()
        .map(|&s| {
            let r = report.scenario(s);
            (
                s,
                if zeta_debiased {
                    r.zeta_debiased
                } else {
                    r.zeta
                },
            )
        })
        .collect();
    let title = if zeta_debiased {
        "De-biased zeta by homophily quartile"
    } else {
        "Zeta by homophily quartile"
    };
    quartile_bars_svg(title, &tables)
}

/// Axial hex coordinates of a point for pointy-top hexagons of size `r`.
fn hex_of(x: f64, y: f64, r: f64) -> (i64, i64) {
    let q = (3f64.sqrt() / 3.0 * x - y / 3.0) / r;
    let s = (2.0 / 3.0 * y) / r;
    // cube rounding
    let (cx, cz) = (q, s);
    let cy = -cx - cz;
    let (mut rx, ry, mut rz) = (cx.round(), cy.round(), cz.round());
    let (dx, dy, dz) = ((rx - cx).abs(), (ry - cy).abs(), (rz - cz).abs());
    if dx > dy && dx > dz {
        rx = -ry - rz;
    } else if dy <= dz {
        rz = -rx - ry;
    }
    (rx as i64, rz as i64)
}

/// Counts points per hexagon; exposed for testing the binning.
pub fn hexbin(points: &[(f64, f64)], r: f64) -> BTreeMap<(i64, i64), usize> {
    let mut bins = BTreeMap::new();
    for &(x, y) in points {
        *bins.entry(hex_of(x, y, r)).or_insert(0) += 1;
    }
    bins
}

/// Hexbin density of `(phi_y, phi_k)` across runs. Runs with an undefined
/// coefficient are skipped.
pub fn phi_density_svg(results: &[RunResult]) -> String {
    let points: Vec<(f64, f64)> = results
        .iter()
        .filter_map(|r| Some((r.phi_y?, r.phi_k?)))
        .collect();
    let mut out = String::new();
    header(&mut out, "Outcome vs degree assortativity");
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;

    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in &points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if points.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let pad = |a: f64, b: f64| {
        if b - a <= 0.0 {
            (a - 0.5, b + 0.5)
        } else {
            (a, b)
        }
    };
    let (x0, x1) = pad(x0, x1);
    let (y0, y1) = pad(y0, y1);
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * plot_w;
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * plot_h;

    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    // Diagonal phi_k = phi_y where it crosses the plot window.
    let (d0, d1) = (x0.max(y0), x1.min(y1));
    if d0 < d1 {
        let _ = writeln!(
            out,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#999" stroke-dasharray="4 3"/>"##,
            px(d0),
            py(d0),
            px(d1),
            py(d1)
        );
    }

    let radius = 9.0;
    let screen: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (px(x), py(y))).collect();
    let bins = hexbin(&screen, radius);
    let max = bins.values().copied().max().unwrap_or(1) as f64;
    for (&(q, r), &count) in &bins {
        let cx = radius * 3f64.sqrt() * (q as f64 + r as f64 / 2.0);
        let cy = radius * 1.5 * r as f64;
        let corners: Vec<String> = (0..6)
            .map(|i| {
                let a = std::f64::consts::PI / 180.0 * (60.0 * i as f64 - 30.0);
                format!("{:.2},{:.2}", cx + radius * a.cos(), cy + radius * a.sin())
            })
            .collect();
        let shade = 235.0 - 200.0 * (count as f64 / max);
        let _ = writeln!(
            out,
            r#"<polygon points="{}" fill="rgb({shade:.0},{shade:.0},255)" data-count="{count}"/>"#,
            corners.join(" ")
        );
    }

    for (x, y, anchor, text) in [
        (WIDTH / 2.0, HEIGHT - 16.0, "middle", "phi_y".to_string()),
        (MARGIN, HEIGHT - MARGIN + 16.0, "start", format!("{x0:.3}")),
        (
            WIDTH - MARGIN,
            HEIGHT - MARGIN + 16.0,
            "end",
            format!("{x1:.3}"),
        ),
        (MARGIN - 6.0, HEIGHT - MARGIN, "end", format!("{y0:.3}")),
        (MARGIN - 6.0, MARGIN + 4.0, "end", format!("{y1:.3}")),
        (16.0, HEIGHT / 2.0, "middle", "phi_k".to_string()),
    ] {
        let _ = writeln!(
            out,
            r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}">{text}</text>"#
        );
    }
    out.push_str("</svg>\n");
    out
}
