//! Kineme trajectory tables and a small-multiples SVG, angles in degrees.

use std::fmt::Write as _;

use kineme::codebook::TrajectoryRow;
use kineme::pose::AngleTrajectory;

const PANEL_W: f64 = 220.0;
const PANEL_H: f64 = 140.0;
const MARGIN: f64 = 24.0;
const COLUMNS: usize = 4;
/// pitch, yaw, roll
const COLORS: [&str; 3] = ["#d62728", "#1f77b4", "#2ca02c"];

pub fn trajectory_csv(rows: &[TrajectoryRow]) -> String {
    let mut out = String::from("kineme,time_s,pitch_deg,yaw_deg,roll_deg\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.kineme,
            r.time_s,
            r.pitch.to_degrees(),
            r.yaw.to_degrees(),
            r.roll.to_degrees()
        );
    }
    out
}

pub fn trajectory_svg(trajectories: &[AngleTrajectory], fps: f64) -> String {
    let rows = trajectories.len().div_ceil(COLUMNS).max(1);
    let cols = trajectories.len().clamp(1, COLUMNS);
    let width = cols as f64 * (PANEL_W + MARGIN) + MARGIN;
    let height = rows as f64 * (PANEL_H + MARGIN) + MARGIN + 20.0;

    // one shared vertical scale so panels are comparable
    let extent = trajectories
        .iter()
        .flat_map(|t| t.pitch.iter().chain(&t.yaw).chain(&t.roll))
        .fold(0.0f64, |m, v| m.max(v.to_degrees().abs()))
        .max(1e-6);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (c, name) in ["pitch", "yaw", "roll"].iter().enumerate() {
        let x = MARGIN + c as f64 * 70.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{x}" y1="12" x2="{}" y2="12" stroke="{}" stroke-width="2"/><text x="{}" y="16">{name}</text>"#,
            x + 16.0,
            COLORS[c],
            x + 20.0
        );
    }
    for (j, t) in trajectories.iter().enumerate() {
        let x0 = MARGIN + (j % COLUMNS) as f64 * (PANEL_W + MARGIN);
        let y0 = 20.0 + MARGIN + (j / COLUMNS) as f64 * (PANEL_H + MARGIN);
        let mid = y0 + PANEL_H / 2.0;
        let _ = writeln!(
            svg,
            r##"<rect x="{x0}" y="{y0}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="#999"/>"##
        );
        let _ = writeln!(
            svg,
            r##"<line x1="{x0}" y1="{mid}" x2="{}" y2="{mid}" stroke="#ddd"/>"##,
            x0 + PANEL_W
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}">kineme {} ({:.2} s, ±{extent:.1}°)</text>"#,
            x0 + 4.0,
            y0 + 12.0,
            j + 1,
            t.len() as f64 / fps
        );
        let n = t.len().max(2) - 1;
        for (c, channel) in [&t.pitch, &t.yaw, &t.roll].into_iter().enumerate() {
            let points: Vec<String> = channel
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let x = x0 + PANEL_W * i as f64 / n as f64;
                    let y = mid - v.to_degrees() / extent * (PANEL_H / 2.0 - 16.0);
                    format!("{x:.1},{y:.1}")
                })
                .collect();
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
                COLORS[c],
                points.join(" ")
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}
