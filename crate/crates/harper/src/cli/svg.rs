//! Deterministic SVG rendering of a butterfly dataset.
//!
//! The image is a classic Hofstadter plot: flux on the horizontal axis,
//! energy on the vertical axis, one column of band rectangles per flux.
//! Open interior gaps can be colored by one of their transport integers.
//! Rendering is fully deterministic for a fixed dataset: fixed canvas,
//! fixed palette, coordinates formatted to two decimals, no timestamps.

use std::fmt::Write as _;

use crate::spectral::GapStatus;

use super::formats::ButterflyOutput;

/// Which integer labels the color of an open gap region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapColor {
    /// Transport integer t.
    T,
    /// Dual-bundle integer s.
    S,
    /// Bands only, no gap shading.
    None,
}

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const LEFT: f64 = 50.0;
const RIGHT: f64 = 15.0;
const TOP: f64 = 15.0;
const BOTTOM: f64 = 35.0;
/// Fixed energy range: the operator is a sum of four unitaries, so every
/// spectrum lies inside [-4, 4]; the margin keeps edge bands visible.
const E_MAX: f64 = 4.2;

/// Shades from light to dark as |value| grows; index min(|v|-1, 5).
const BLUES: [&str; 6] = [
    "#bbdefb", "#90caf9", "#64b5f6", "#42a5f5", "#1e88e5", "#1565c0",
];
const REDS: [&str; 6] = [
    "#ffcdd2", "#ef9a9a", "#e57373", "#ef5350", "#e53935", "#c62828",
];

/// Fixed integer-to-color map: zero gray, positive blue, negative red,
/// darker with larger magnitude (saturating at |v| = 6).
pub fn integer_color(v: i64) -> &'static str {
    if v == 0 {
        return "#9e9e9e";
    }
    let idx = ((v.unsigned_abs() as usize) - 1).min(5);
    if v > 0 {
        BLUES[idx]
    } else {
        REDS[idx]
    }
}

fn plot_w() -> f64 {
    WIDTH - LEFT - RIGHT
}

fn plot_h() -> f64 {
    HEIGHT - TOP - BOTTOM
}

fn x_of(theta: f64) -> f64 {
    LEFT + theta * plot_w()
}

fn y_of(e: f64) -> f64 {
    TOP + (E_MAX - e) / (2.0 * E_MAX) * plot_h()
}

/// Append one rect element; `attrs` carries class, fill and data attributes.
fn rect(s: &mut String, x: f64, y: f64, w: f64, h: f64, attrs: &str) {
    let _ = writeln!(
        s,
        r#"  <rect {attrs} x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{h:.2}"/>"#,
    );
}

/// Render the dataset to a standalone SVG document.
///
/// Every flux row gets a column centered at its flux value whose half-width
/// is 1/(2*N*nmax) in flux units: consecutive reduced fractions with
/// denominators <= nmax differ by at least 1/(N*nmax), so columns never
/// overlap. Rows that carry an error are drawn as bands only (their gap
/// integers are unknown).
pub fn butterfly_svg(out: &ButterflyOutput, color: GapColor) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    rect(&mut s, 0.0, 0.0, WIDTH, HEIGHT, r##"class="bg" fill="#ffffff""##);

    // Axes and ticks.
    let _ = writeln!(
        s,
        r##"  <g class="axes" stroke="#444444" stroke-width="1" fill="none">"##
    );
    let _ = writeln!(
        s,
        r#"    <rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}"/>"#,
        LEFT,
        TOP,
        plot_w(),
        plot_h()
    );
    let _ = writeln!(s, "  </g>");
    let _ = writeln!(
        s,
        r##"  <g class="labels" font-family="monospace" font-size="12" fill="#444444">"##
    );
    for (theta, label) in [(0.0, "0"), (0.5, "1/2"), (1.0, "1")] {
        let _ = writeln!(
            s,
            r#"    <text x="{:.2}" y="{:.2}" text-anchor="middle">{label}</text>"#,
            x_of(theta),
            HEIGHT - 12.0
        );
    }
    for e in [-4.0f64, -2.0, 0.0, 2.0, 4.0] {
        let _ = writeln!(
            s,
            r#"    <text x="{:.2}" y="{:.2}" text-anchor="end">{e}</text>"#,
            LEFT - 6.0,
            y_of(e) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"    <text x="{:.2}" y="{:.2}" text-anchor="middle">flux M/N (q = {}, r = {})</text>"#,
        LEFT + plot_w() / 2.0,
        HEIGHT - 24.0,
        out.q,
        out.r
    );
    let _ = writeln!(s, "  </g>");

    // Gap regions first, bands on top.
    if color != GapColor::None {
        let _ = writeln!(s, r#"  <g class="gaps">"#);
        for row in &out.rows {
            if row.error.is_some() {
                continue;
            }
            let half = half_width(row.n, out.nmax) * plot_w();
            let x = x_of(row.theta) - half;
            for gap in &row.gaps {
                if gap.status != GapStatus::Open {
                    continue;
                }
                let (Some(lo), Some(hi)) = (gap.e_lo, gap.e_hi) else {
                    continue; // unbounded edge gaps are the page background
                };
                let value = match color {
                    GapColor::T => gap.t_num,
                    GapColor::S => gap.s_num,
                    GapColor::None => unreachable!(),
                };
                let Some(v) = value else { continue };
                let y = y_of(hi);
                let h = (y_of(lo) - y).max(0.0);
                let attrs = format!(
                    r#"class="gap" fill="{}" data-flux="{}/{}" data-d="{}" data-value="{v}""#,
                    integer_color(v),
                    row.m,
                    row.n,
                    gap.d
                );
                rect(&mut s, x, y, (2.0 * half).max(0.75), h, &attrs);
            }
        }
        let _ = writeln!(s, "  </g>");
    }

    let _ = writeln!(s, r#"  <g class="bands">"#);
    for row in &out.rows {
        let half = half_width(row.n, out.nmax) * plot_w();
        let x = x_of(row.theta) - half;
        for band in &row.bands {
            let y = y_of(band.e_max);
            let h = (y_of(band.e_min) - y).max(0.75);
            let attrs = format!(
                r##"class="band" fill="#111111" data-flux="{}/{}" data-band="{}""##,
                row.m, row.n, band.band
            );
            rect(&mut s, x, y, (2.0 * half).max(0.75), h, &attrs);
        }
    }
    let _ = writeln!(s, "  </g>");
    let _ = writeln!(s, "</svg>");
    s
}

/// Column half-width in flux units for denominator n at sweep order nmax.
fn half_width(n: i64, nmax: i64) -> f64 {
    0.5 / (n.max(1) as f64 * nmax.max(1) as f64)
}
