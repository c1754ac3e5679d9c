//! Static SVG figures: illumination heatmaps, trajectory overlays and the
//! rate-versus-threshold curve.

use std::fmt::Write;

use isac_core::ao::SolveReport;
use isac_core::geometry::AirPoint;
use isac_core::scenario::{to_dbw, Scenario};
use isac_core::signal::illumination_at;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 560.0;
const MARGIN: f64 = 56.0;
const UAV_COLORS: [&str; 6] = ["#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Illumination power sampled at the centres of a regular horizontal grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub slot: usize,
    pub altitude: f64,
    pub x_edges: Vec<f64>,
    pub y_edges: Vec<f64>,
    /// `values[iy][ix]` in watts.
    pub values: Vec<Vec<f64>>,
}

impl Heatmap {
    pub fn cell_center(&self, ix: usize, iy: usize) -> AirPoint {
        AirPoint::new(
            0.5 * (self.x_edges[ix] + self.x_edges[ix + 1]),
            0.5 * (self.y_edges[iy] + self.y_edges[iy + 1]),
            self.altitude,
        )
    }
}

/// Horizontal extent covering base stations, trajectories and sensing
/// samples, padded by 8 % on every side.
pub fn scene_bounds(scenario: &Scenario, report: &SolveReport) -> [f64; 4] {
    let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
    let mut add = |x: f64, y: f64| {
        b[0] = b[0].min(x);
        b[1] = b[1].max(x);
        b[2] = b[2].min(y);
        b[3] = b[3].max(y);
    };
    for g in &scenario.gbs {
        add(g.u.x, g.u.y);
    }
    for p in &scenario.sensing {
        add(p.horizontal.x, p.horizontal.y);
    }
    for q in report.trajectory.q.iter().flatten() {
        add(q.x, q.y);
    }
    let pad = 0.08 * (b[1] - b[0]).max(b[3] - b[2]).max(10.0);
    [b[0] - pad, b[1] + pad, b[2] - pad, b[3] + pad]
}

pub fn compute_heatmap(scenario: &Scenario, report: &SolveReport, slot: usize, altitude: f64, cells: usize) -> Heatmap {
    let [x0, x1, y0, y1] = scene_bounds(scenario, report);
    let cells = cells.max(1);
    let side = (x1 - x0).max(y1 - y0) / cells as f64;
    let nx = ((x1 - x0) / side).ceil().max(1.0) as usize;
    let ny = ((y1 - y0) / side).ceil().max(1.0) as usize;
    let x_edges: Vec<f64> = (0..=nx).map(|i| x0 + i as f64 * side).collect();
    let y_edges: Vec<f64> = (0..=ny).map(|i| y0 + i as f64 * side).collect();
    let beams = &report.solution.slots[slot];
    let mut hm = Heatmap { slot, altitude, x_edges, y_edges, values: Vec::with_capacity(ny) };
    for iy in 0..ny {
        let row = (0..nx).map(|ix| illumination_at(&hm.cell_center(ix, iy), beams, scenario)).collect();
        hm.values.push(row);
    }
    hm
}

/// Affine map from data coordinates to SVG pixels with y pointing up.
struct Frame {
    b: [f64; 4],
    sx: f64,
    sy: f64,
}

impl Frame {
    /// Equal scales on both axes, fitted inside `width` x `height`.
    fn fit(b: [f64; 4], width: f64, height: f64) -> Frame {
        let scale = ((width - 2.0 * MARGIN) / (b[1] - b[0])).min((height - 2.0 * MARGIN) / (b[3] - b[2]));
        Frame { b, sx: scale, sy: scale }
    }

    fn stretch(b: [f64; 4]) -> Frame {
        Frame { b, sx: (WIDTH - 2.0 * MARGIN) / (b[1] - b[0]), sy: (HEIGHT - 2.0 * MARGIN) / (b[3] - b[2]) }
    }

    fn x(&self, x: f64) -> f64 {
        MARGIN + (x - self.b[0]) * self.sx
    }

    fn y(&self, y: f64) -> f64 {
        MARGIN + (self.b[3] - y) * self.sy
    }
}

fn header(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    s.push_str(
        r##"<defs><marker id="arrow" viewBox="0 0 10 10" refX="9" refY="5" markerWidth="7" markerHeight="7" orient="auto-start-reverse"><path d="M0,0 L10,5 L0,10 z" fill="#222"/></marker></defs>"##,
    );
    s.push('\n');
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{title}</text>"#, WIDTH / 2.0);
    s
}

fn draw_gbs(s: &mut String, f: &Frame, scenario: &Scenario) {
    for (l, g) in scenario.gbs.iter().enumerate() {
        let (x, y) = (f.x(g.u.x), f.y(g.u.y));
        let _ = writeln!(
            s,
            r##"<path d="M{:.2},{:.2} L{:.2},{:.2} L{:.2},{:.2} z" fill="black" stroke="white"/><text x="{:.2}" y="{:.2}" fill="black" stroke="white" stroke-width="3" paint-order="stroke">GBS {l}</text>"##,
            x,
            y - 8.0,
            x - 7.0,
            y + 6.0,
            x + 7.0,
            y + 6.0,
            x + 9.0,
            y + 14.0
        );
    }
}

fn draw_samples(s: &mut String, f: &Frame, scenario: &Scenario) {
    for p in &scenario.sensing {
        let (x, y) = (f.x(p.horizontal.x), f.y(p.horizontal.y));
        let _ = writeln!(
            s,
            r##"<path d="M{:.2},{:.2} l6,6 m0,-6 l-6,6" stroke="#444" stroke-width="1.5"/>"##,
            x - 3.0,
            y - 3.0
        );
    }
}

fn draw_axes(s: &mut String, f: &Frame, x_label: &str, y_label: &str) {
    let [x0, x1, y0, y1] = f.b;
    let _ = writeln!(
        s,
        r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#222"/>"##,
        f.x(x0),
        f.y(y1),
        f.x(x1) - f.x(x0),
        f.y(y0) - f.y(y1)
    );
    for t in ticks(x0, x1) {
        let _ = writeln!(
            s,
            r##"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}" stroke="#222"/><text x="{0:.2}" y="{3:.2}" text-anchor="middle">{4}</text>"##,
            f.x(t),
            f.y(y0),
            f.y(y0) + 5.0,
            f.y(y0) + 18.0,
            tick_label(t)
        );
    }
    for t in ticks(y0, y1) {
        let _ = writeln!(
            s,
            r##"<line x1="{0:.2}" y1="{1:.2}" x2="{2:.2}" y2="{1:.2}" stroke="#222"/><text x="{3:.2}" y="{4:.2}" text-anchor="end">{5}</text>"##,
            f.x(x0),
            f.y(t),
            f.x(x0) - 5.0,
            f.x(x0) - 8.0,
            f.y(t) + 4.0,
            tick_label(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{x_label}</text>"#,
        0.5 * (f.x(x0) + f.x(x1)),
        f.y(y0) + 36.0
    );
    let cy = 0.5 * (f.y(y0) + f.y(y1));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{cy:.2}" text-anchor="middle" transform="rotate(-90 16 {cy:.2})">{y_label}</text>"#
    );
}

/// Roughly five round tick positions inside `[lo, hi]`.
fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    let r = (v * 1e6).round() / 1e6;
    if r == r.trunc() {
        format!("{}", r as i64)
    } else {
        format!("{r}")
    }
}

fn color(t: f64) -> String {
    let c = colorous::VIRIDIS.eval_continuous(t.clamp(0.0, 1.0));
    format!("#{:02x}{:02x}{:02x}", c.r, c.g, c.b)
}

/// Heatmap of one slot with base stations, sensing samples, UAV positions
/// and arrows from each serving base station to its UAV.
pub fn heatmap_svg(hm: &Heatmap, scenario: &Scenario, report: &SolveReport) -> String {
    let b = [hm.x_edges[0], *hm.x_edges.last().unwrap(), hm.y_edges[0], *hm.y_edges.last().unwrap()];
    let f = Frame::fit(b, WIDTH - 90.0, HEIGHT);
    let db: Vec<Vec<f64>> = hm.values.iter().map(|r| r.iter().map(|&v| to_dbw(v.max(1e-300))).collect()).collect();
    let lo = db.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let hi = db.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1e-12);
    let mut s = header(&format!("Illumination power, slot {}, altitude {} m", hm.slot, tick_label(hm.altitude)));
    for (iy, row) in db.iter().enumerate() {
        for (ix, v) in row.iter().enumerate() {
            let (xa, xb) = (f.x(hm.x_edges[ix]), f.x(hm.x_edges[ix + 1]));
            let (ya, yb) = (f.y(hm.y_edges[iy + 1]), f.y(hm.y_edges[iy]));
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                xa,
                ya,
                xb - xa + 0.3,
                yb - ya + 0.3,
                color((v - lo) / span)
            );
        }
    }
    draw_axes(&mut s, &f, "x (m)", "y (m)");
    draw_samples(&mut s, &f, scenario);
    draw_gbs(&mut s, &f, scenario);
    for (k, q) in report.trajectory.q.iter().enumerate() {
        let p = q[hm.slot];
        let g = &scenario.gbs[report.association.gbs_of[k][hm.slot]];
        let (ux, uy) = (f.x(p.x), f.y(p.y));
        let (gx, gy) = (f.x(g.u.x), f.y(g.u.y));
        let len = ((ux - gx).powi(2) + (uy - gy).powi(2)).sqrt().max(1e-9);
        let shrink = (9.0 / len).min(0.5);
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#222" stroke-width="1.5" marker-end="url(#arrow)"/>"##,
            gx + (ux - gx) * shrink,
            gy + (uy - gy) * shrink,
            ux - (ux - gx) * shrink,
            uy - (uy - gy) * shrink
        );
        let _ = writeln!(
            s,
            r#"<circle cx="{ux:.2}" cy="{uy:.2}" r="6" fill="{}" stroke="white" stroke-width="1.5"/>"#,
            UAV_COLORS[k % UAV_COLORS.len()]
        );
    }
    let bar_x = WIDTH - 70.0;
    let (top, bottom) = (f.y(b[3]), f.y(b[2]));
    let steps = 64;
    for i in 0..steps {
        let h = (bottom - top) / steps as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{bar_x:.2}" y="{:.2}" width="16" height="{:.2}" fill="{}"/>"#,
            top + i as f64 * h,
            h + 0.3,
            color(1.0 - (i as f64 + 0.5) / steps as f64)
        );
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{:.1}</text>"#, bar_x - 4.0, top - 6.0, hi);
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{:.1}</text>"#, bar_x - 4.0, bottom + 16.0, lo);
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">dBW</text>"#, bar_x - 2.0, bottom + 30.0);
    s.push_str("</svg>\n");
    s
}

/// Trajectories of all UAVs with the straight start-to-end reference.
pub fn trajectory_svg(scenario: &Scenario, report: &SolveReport) -> String {
    let f = Frame::fit(scene_bounds(scenario, report), WIDTH, HEIGHT);
    let mut s = header("UAV trajectories");
    draw_axes(&mut s, &f, "x (m)", "y (m)");
    draw_samples(&mut s, &f, scenario);
    draw_gbs(&mut s, &f, scenario);
    for (k, q) in report.trajectory.q.iter().enumerate() {
        let c = UAV_COLORS[k % UAV_COLORS.len()];
        let u = &scenario.uavs[k];
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{c}" stroke-dasharray="4 4" opacity="0.6"/>"#,
            f.x(u.start.x),
            f.y(u.start.y),
            f.x(u.end.x),
            f.y(u.end.y)
        );
        let pts: Vec<String> = q.iter().map(|p| format!("{:.2},{:.2}", f.x(p.x), f.y(p.y))).collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{c}" stroke-width="2"/>"#, pts.join(" "));
        for p in q {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{c}"/>"#, f.x(p.x), f.y(p.y));
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" fill="{c}">UAV {k}</text>"#,
            f.x(q[0].x) + 6.0,
            f.y(q[0].y) - 6.0
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Average sum rate against the threshold in dBW; `None` when there are
/// no feasible points.
pub fn rate_curve_svg(points: &[(f64, f64)]) -> Option<String> {
    if points.is_empty() {
        return None;
    }
    let (mut x0, mut x1) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (mut y0, mut y1) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p.1), b.max(p.1)));
    if x1 - x0 < 1e-9 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    let pad = 0.1 * (y1 - y0).max(1e-3);
    y0 -= pad;
    y1 += pad;
    let f = Frame::stretch([x0, x1, y0, y1]);
    let mut s = header("Average sum rate versus illumination threshold");
    draw_axes(&mut s, &f, "Illumination threshold (dBW)", "Average sum rate (bit/s/Hz)");
    let pts: Vec<String> = points.iter().map(|p| format!("{:.2},{:.2}", f.x(p.0), f.y(p.1))).collect();
    let _ = writeln!(s, r##"<polyline points="{}" fill="none" stroke="#1f77b4" stroke-width="2"/>"##, pts.join(" "));
    for p in points {
        let _ = writeln!(s, r##"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="#1f77b4"/>"##, f.x(p.0), f.y(p.1));
    }
    s.push_str("</svg>\n");
    Some(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_are_round_and_inside() {
        let t = ticks(3.0, 97.0);
        assert_eq!(t, vec![20.0, 40.0, 60.0, 80.0]);
        let t = ticks(-45.6, -34.1);
        assert!(t.iter().all(|v| (-45.6..=-34.1).contains(v)));
        assert!(t.len() >= 3);
    }

    #[test]
    fn empty_curve_is_skipped() {
        assert!(rate_curve_svg(&[]).is_none());
        assert!(rate_curve_svg(&[(-40.0, 3.0)]).is_some());
    }
}
