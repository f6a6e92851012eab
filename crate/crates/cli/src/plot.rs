//! Deterministic SVG plots built only from the rows written to CSV, so
//! re-plotting a run directory reproduces the files byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::output::{ProfileRow, TrajectoryRow, VERSION};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
/// Thin rays drawn at most; the waist rays are always drawn.
const MAX_THIN_RAYS: usize = 101;

/// Data ranges of the trajectory plot. The axes are scaled independently.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlotFrame {
    pub z_range: [f64; 2],
    pub x_range: [f64; 2],
    pub width_px: f64,
    pub height_px: f64,
    /// Plot units of z per unit of x on screen, divided by the data ratio.
    pub z_per_x_pixels: f64,
}

struct Axes {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Axes {
    fn px(&self, v: f64) -> f64 {
        LEFT + (v - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, v: f64) -> f64 {
        HEIGHT - BOTTOM - (v - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(hi > lo) {
        return (lo - 1.0, hi + 1.0);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let m = if f < 1.5 {
        1.0
    } else if f < 3.5 {
        2.0
    } else if f < 7.5 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn tick_label(v: f64, step: f64) -> String {
    let decimals = if step >= 1.0 {
        0
    } else {
        (-step.log10()).ceil() as usize
    };
    let s = format!("{v:.decimals$}");
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn ticks(lo: f64, hi: f64) -> (Vec<f64>, f64) {
    let step = nice_step(hi - lo);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    ((first..=last).map(|k| k as f64 * step).collect(), step)
}

fn frame(out: &mut String, a: &Axes, x_title: &str, y_title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, "<!-- dbs-traj {VERSION} -->");
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (l, r, t, b) = (LEFT, WIDTH - RIGHT, TOP, HEIGHT - BOTTOM);
    let _ = writeln!(
        out,
        r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        r - l,
        b - t
    );
    let (xt, xs) = ticks(a.x0, a.x1);
    for v in xt {
        let p = a.px(v);
        let _ = writeln!(
            out,
            r#"<line x1="{p:.2}" y1="{b}" x2="{p:.2}" y2="{}" stroke="black"/>"#,
            b + 5.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{p:.2}" y="{}" text-anchor="middle">{}</text>"#,
            b + 18.0,
            tick_label(v, xs)
        );
    }
    let (yt, ys) = ticks(a.y0, a.y1);
    for v in yt {
        let p = a.py(v);
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{p:.2}" x2="{l}" y2="{p:.2}" stroke="black"/>"#,
            l - 5.0
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            l - 8.0,
            p + 4.0,
            tick_label(v, ys)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{}" text-anchor="middle">{x_title}</text>"#,
        0.5 * (l + r),
        HEIGHT - 10.0
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{y_title}</text>"#,
        0.5 * (t + b),
        0.5 * (t + b)
    );
}

fn polyline(out: &mut String, points: impl Iterator<Item = (f64, f64)>, style: &str) {
    let mut pts = String::new();
    for (k, (x, y)) in points.enumerate() {
        if k > 0 {
            pts.push(' ');
        }
        let _ = write!(pts, "{x:.2},{y:.2}");
    }
    let _ = writeln!(out, r#"<polyline fill="none" {style} points="{pts}"/>"#);
}

/// Rays in the (z, x) plane; the two rays launched nearest x = -1 and x = +1
/// are drawn heavy.
pub fn trajectories_svg(rows: &[TrajectoryRow]) -> (String, PlotFrame) {
    let mut rays: BTreeMap<usize, Vec<&TrajectoryRow>> = BTreeMap::new();
    for r in rows {
        rays.entry(r.ray_index).or_default().push(r);
    }
    let fold = |f: fn(&TrajectoryRow) -> f64| {
        rows.iter()
            .map(f)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    };
    let (z_lo, z_hi) = if rows.is_empty() { (0.0, 1.0) } else { fold(|r| r.z) };
    let (x_lo, x_hi) = if rows.is_empty() {
        (-1.0, 1.0)
    } else {
        padded(fold(|r| r.x).0, fold(|r| r.x).1)
    };
    let (z_lo, z_hi) = if z_hi > z_lo { (z_lo, z_hi) } else { padded(z_lo, z_hi) };
    let a = Axes {
        x0: z_lo,
        x1: z_hi,
        y0: x_lo,
        y1: x_hi,
    };
    let plot = PlotFrame {
        z_range: [z_lo, z_hi],
        x_range: [x_lo, x_hi],
        width_px: WIDTH,
        height_px: HEIGHT,
        z_per_x_pixels: ((z_hi - z_lo) / (WIDTH - LEFT - RIGHT)) / ((x_hi - x_lo) / (HEIGHT - TOP - BOTTOM)),
    };

    let mut out = String::new();
    frame(&mut out, &a, "z / w0", "x / w0");
    let nearest = |target: f64| {
        rays.iter()
            .map(|(&i, r)| (i, (r[0].label - target).abs()))
            .min_by(|p, q| p.1.total_cmp(&q.1).then(p.0.cmp(&q.0)))
            .map(|p| p.0)
    };
    let heavy = [nearest(-1.0), nearest(1.0)];
    let n = rays.len();
    let every = n.div_ceil(MAX_THIN_RAYS).max(1);
    let center = n / 2;
    for (&i, r) in &rays {
        if heavy.contains(&Some(i)) || i % every != center % every {
            continue;
        }
        let pts = r.iter().map(|p| (a.px(p.z), a.py(p.x)));
        polyline(&mut out, pts, r##"stroke="#8a9bb0" stroke-width="0.6""##);
    }
    for i in heavy.into_iter().flatten() {
        let pts = rays[&i].iter().map(|p| (a.px(p.z), a.py(p.x)));
        polyline(&mut out, pts, r##"stroke="#b0281f" stroke-width="2.5""##);
    }
    out.push_str("</svg>\n");
    (out, plot)
}

/// Launch and final intensity profiles against x.
pub fn profiles_svg(launch: &[ProfileRow], last: &[ProfileRow]) -> String {
    let all = launch.iter().chain(last);
    let (lo, hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
        (lo.min(r.x), hi.max(r.x))
    });
    let (lo, hi) = if lo.is_finite() { padded(lo, hi) } else { (-1.0, 1.0) };
    let a = Axes {
        x0: lo,
        x1: hi,
        y0: 0.0,
        y1: 1.05,
    };
    let mut out = String::new();
    frame(&mut out, &a, "x / w0", "R^2 / max R^2");
    let to_px = |r: &ProfileRow| (a.px(r.x), a.py(r.intensity));
    polyline(
        &mut out,
        launch.iter().map(to_px),
        r##"stroke="#2c6fbb" stroke-width="1.5" stroke-dasharray="6 4""##,
    );
    polyline(
        &mut out,
        last.iter().map(to_px),
        r##"stroke="black" stroke-width="1.5""##,
    );
    let lx = WIDTH - RIGHT - 150.0;
    let _ = writeln!(
        out,
        r##"<line x1="{lx}" y1="{}" x2="{}" y2="{}" stroke="#2c6fbb" stroke-width="1.5" stroke-dasharray="6 4"/>"##,
        TOP + 20.0,
        lx + 30.0,
        TOP + 20.0
    );
    let _ = writeln!(out, r#"<text x="{}" y="{}">launch</text>"#, lx + 38.0, TOP + 24.0);
    let _ = writeln!(
        out,
        r#"<line x1="{lx}" y1="{}" x2="{}" y2="{}" stroke="black" stroke-width="1.5"/>"#,
        TOP + 40.0,
        lx + 30.0,
        TOP + 40.0
    );
    let _ = writeln!(out, r#"<text x="{}" y="{}">final</text>"#, lx + 38.0, TOP + 44.0);
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(t: f64, i: usize, label: f64, x: f64, z: f64) -> TrajectoryRow {
        TrajectoryRow {
            t,
            ray_index: i,
            label,
            x,
            z,
            px: 0.0,
            pz: 1.0,
            r: 1.0,
            w: 0.0,
            h: 0.5,
        }
    }

    #[test]
    fn ticks_are_round() {
        let (t, s) = ticks(0.0, 94247.8);
        assert_eq!(s, 20000.0);
        assert_eq!(t, vec![0.0, 20000.0, 40000.0, 60000.0, 80000.0]);
        assert_eq!(tick_label(-0.0, 0.5), "0.0");
        assert_eq!(tick_label(-1.5, 0.5), "-1.5");
    }

    #[test]
    fn waist_rays_are_heavy() {
        let labels = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let mut rows = Vec::new();
        for (k, t) in [0.0, 1.0].into_iter().enumerate() {
            for (i, &l) in labels.iter().enumerate() {
                rows.push(row(t, i, l, l * (1.0 + k as f64), 10.0 * t));
            }
        }
        let (svg, frame) = trajectories_svg(&rows);
        assert_eq!(svg.matches("stroke-width=\"2.5\"").count(), 2);
        assert_eq!(svg.matches("<polyline").count(), 5);
        assert_eq!(frame.z_range, [0.0, 10.0]);
        assert!(svg.contains(&format!("dbs-traj {VERSION}")));
        assert_eq!(trajectories_svg(&rows).0, svg);
    }

    #[test]
    fn empty_inputs_still_render() {
        assert!(trajectories_svg(&[]).0.ends_with("</svg>\n"));
        assert!(profiles_svg(&[], &[]).ends_with("</svg>\n"));
    }
}
