//! Hand-written SVG band plots.

use std::f64::consts::PI;
use std::fmt::Write as _;

pub const WIDTH: f64 = 640.0;
pub const HEIGHT: f64 = 400.0;
const LEFT: f64 = 56.0;
const RIGHT: f64 = 16.0;
const TOP: f64 = 16.0;
const BOTTOM: f64 = 40.0;

pub struct BandPlot<'a> {
    pub title: &'a str,
    pub grid: &'a [f64],
    pub p10: &'a [f64],
    pub p50: &'a [f64],
    pub p90: &'a [f64],
    pub truth: Option<&'a [f64]>,
}

struct Frame {
    y_max: f64,
}

impl Frame {
    fn x(&self, t: f64) -> f64 {
        LEFT + t / PI * (WIDTH - LEFT - RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        TOP + (1.0 - v / self.y_max) * (HEIGHT - TOP - BOTTOM)
    }
}

fn polyline(frame: &Frame, xs: &[f64], ys: &[f64], out: &mut String) {
    for (k, (t, v)) in xs.iter().zip(ys).enumerate() {
        let _ = write!(out, "{}{:.2},{:.2}", if k == 0 { "M" } else { " L" }, frame.x(*t), frame.y(*v));
    }
}

/// Path data of the 10-90 band: upper edge left to right, lower edge back.
fn band_path(frame: &Frame, p: &BandPlot) -> String {
    let mut d = String::new();
    polyline(frame, p.grid, p.p90, &mut d);
    for (t, v) in p.grid.iter().zip(p.p10).rev() {
        let _ = write!(d, " L{:.2},{:.2}", frame.x(*t), frame.y(*v));
    }
    d.push_str(" Z");
    d
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render(p: &BandPlot) -> String {
    let peak = p
        .p90
        .iter()
        .chain(p.p50)
        .chain(p.truth.unwrap_or(&[]))
        .copied()
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    let frame = Frame {
        y_max: if peak > 0.0 { 1.1 * peak } else { 1.0 },
    };
    let (x0, x1) = (frame.x(0.0), frame.x(PI));
    let (y0, y1) = (frame.y(0.0), frame.y(frame.y_max));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.2}" y="12">{}</text>"#, LEFT, escape(p.title));
    let _ = writeln!(
        s,
        r#"<path d="M{x0:.2},{y1:.2} L{x0:.2},{y0:.2} L{x1:.2},{y0:.2}" fill="none" stroke="black"/>"#
    );
    for t in [0.0, 1.0, 2.0, 3.0] {
        let x = frame.x(t);
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{t}</text>"#,
            y0 + 16.0
        );
    }
    for v in [0.0, 0.5 * frame.y_max, frame.y_max] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{v:.3}</text>"#,
            x0 - 4.0,
            frame.y(v) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r##"<path class="band" d="{}" fill="#d62728" fill-opacity="0.25" stroke="none"/>"##,
        band_path(&frame, p)
    );
    if let Some(truth) = p.truth {
        let mut d = String::new();
        polyline(&frame, p.grid, truth, &mut d);
        let _ = writeln!(
            s,
            r##"<path class="truth" d="{d}" fill="none" stroke="#7f7f7f" stroke-width="3"/>"##
        );
    }
    let mut d = String::new();
    polyline(&frame, p.grid, p.p50, &mut d);
    let _ = writeln!(
        s,
        r##"<path class="median" d="{d}" fill="none" stroke="#d62728" stroke-width="1.5"/>"##
    );
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_band_coordinates() {
        let grid = [0.0, PI];
        let v = [1.0, 1.0];
        let svg = render(&BandPlot {
            title: "c",
            grid: &grid,
            p10: &v,
            p50: &v,
            p90: &v,
            truth: None,
        });
        // y_max = 1.1, so the line sits at 16 + 344 (1 - 1/1.1)
        let y = 16.0 + 344.0 * (1.0 - 1.0 / 1.1);
        let line = format!("M56.00,{y:.2} L624.00,{y:.2}");
        assert!(svg.contains(&format!(r#"class="median" d="{line}""#)));
        assert!(svg.contains(&format!("d=\"{line} L624.00,{y:.2} L56.00,{y:.2} Z\"")));
    }
}
