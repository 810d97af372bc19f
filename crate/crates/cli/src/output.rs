//! CSV trajectories, SVG plots and JSON summaries.

use std::fmt::Write as _;

use nonplanar_core::models::{Model, ModelKind};
use nonplanar_core::simulation::Trajectory;
use nonplanar_core::surface::Surface;
use nonplanar_nlp::KktReport;
use serde::{Deserialize, Serialize};

pub const CSV_COLUMNS: [&str; 20] = [
    "t", "s", "y", "n", "theta_s", "v1", "v2", "omega3", "N_fr", "N_fl", "N_rr", "N_rl", "gamma", "sigma_fr",
    "sigma_fl", "sigma_rr", "sigma_rl", "x_g1", "x_g2", "x_g3",
];

/// `x` with 9 significant digits, in the shorter of fixed and exponent
/// notation (the `%.9g` convention).
pub fn format_sig(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.8e}", x);
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let fixed = format!("{:.*}", decimals, x);
        trim_zeros(&fixed).to_string()
    } else {
        format!("{}e{}", trim_zeros(mantissa), exp)
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// One row per sample. Bicycle models leave the per-tire columns empty.
pub fn trajectory_csv(trajectory: &Trajectory, model: &Model) -> String {
    let two_track = trajectory.model == ModelKind::TwoTrack;
    let mut out = CSV_COLUMNS.join(",");
    out.push('\n');
    for s in &trajectory.samples {
        let [v1, v2, w3] = model.body_velocity(&s.z, &s.u);
        let gamma = s.u[s.u.len() - 1];
        let mut cells: Vec<String> = [s.t, s.z[0], s.z[1], trajectory.normal_offset, s.z[2], v1, v2, w3]
            .iter()
            .map(|&v| format_sig(v))
            .collect();
        if two_track {
            cells.extend(s.normals.iter().map(|&v| format_sig(v)));
        } else {
            cells.extend(std::iter::repeat_n(String::new(), 4));
        }
        cells.push(format_sig(gamma));
        if two_track {
            cells.extend(s.u[..4].iter().map(|&v| format_sig(v)));
        } else {
            cells.extend(std::iter::repeat_n(String::new(), 4));
        }
        cells.extend(s.position.iter().map(|&v| format_sig(v)));
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub model: String,
    pub track: String,
    pub status: String,
    /// True when the artifacts come from an unconverged or infeasible solve.
    pub partial: bool,
    pub lap_time: f64,
    pub objective: f64,
    pub regularization: f64,
    pub max_violation: f64,
    pub iterations: usize,
    pub residuals: KktReport,
    pub intervals: usize,
    pub degree: usize,
    pub variables: usize,
    pub constraints: usize,
}

/// Red-yellow-blue ramp over `t ∈ [0, 1]`, slow to fast.
fn speed_color(t: f64) -> String {
    const STOPS: [[f64; 3]; 3] = [[215.0, 25.0, 28.0], [255.0, 255.0, 191.0], [44.0, 123.0, 182.0]];
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let (a, b, w) = if t < 0.5 {
        (STOPS[0], STOPS[1], 2.0 * t)
    } else {
        (STOPS[1], STOPS[2], 2.0 * t - 1.0)
    };
    let c: Vec<u8> = (0..3).map(|i| (a[i] + w * (b[i] - a[i])).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Plan view of the track and the path, colored by speed.
pub fn render_svg(
    surface: &Surface,
    trajectory: &Trajectory,
    model: &Model,
    title: &str,
    lap_time: Option<f64>,
) -> String {
    const WIDTH: f64 = 800.0;
    const MARGIN: f64 = 20.0;
    const LEGEND: f64 = 70.0;
    let hw = surface.half_width();
    let n = 400;
    let edge = |side: f64| -> Vec<[f64; 2]> {
        (0..=n)
            .map(|i| {
                let s = surface.length() * i as f64 / n as f64;
                let p = surface.jet_direct(s, side * hw).x_p.values();
                [p[0], p[1]]
            })
            .collect()
    };
    let (left, right) = (edge(1.0), edge(-1.0));
    let path: Vec<[f64; 2]> = trajectory
        .samples
        .iter()
        .map(|s| [s.position[0], s.position[1]])
        .collect();

    let all = left.iter().chain(&right).chain(&path);
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in all {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    let scale = (WIDTH - 2.0 * MARGIN) / (x1 - x0).max(y1 - y0).max(1e-9);
    let height = (y1 - y0) * scale + 2.0 * MARGIN + LEGEND;
    let map = |p: &[f64; 2]| -> (f64, f64) { (MARGIN + (p[0] - x0) * scale, MARGIN + (y1 - p[1]) * scale) };
    let polyline = |pts: &[[f64; 2]]| -> String {
        pts.iter()
            .map(|p| {
                let (x, y) = map(p);
                format!("{x:.2},{y:.2}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    };

    let speeds: Vec<f64> = trajectory
        .samples
        .iter()
        .map(|s| {
            let [v1, v2, _] = model.body_velocity(&s.z, &s.u);
            v1.hypot(v2)
        })
        .collect();
    let vmin = speeds.iter().copied().fold(f64::INFINITY, f64::min);
    let vmax = speeds.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (vmax - vmin).max(1e-9);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{height:.0}" viewBox="0 0 {WIDTH:.0} {height:.0}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<g id="track" fill="none" stroke="gray" stroke-width="1.5">"#);
    let _ = writeln!(svg, r#"<polyline points="{}"/>"#, polyline(&left));
    let _ = writeln!(svg, r#"<polyline points="{}"/>"#, polyline(&right));
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(
        svg,
        r#"<g id="path" fill="none" stroke-width="3" stroke-linecap="round">"#
    );
    for (i, w) in path.windows(2).enumerate() {
        let (xa, ya) = map(&w[0]);
        let (xb, yb) = map(&w[1]);
        let mid = 0.5 * (speeds[i] + speeds[i + 1]);
        let _ = writeln!(
            svg,
            r#"<line x1="{xa:.2}" y1="{ya:.2}" x2="{xb:.2}" y2="{yb:.2}" stroke="{}"/>"#,
            speed_color((mid - vmin) / span)
        );
    }
    let _ = writeln!(svg, "</g>");

    let top = height - LEGEND + 15.0;
    let _ = writeln!(svg, r#"<g id="legend" font-family="sans-serif" font-size="13">"#);
    let caption = match lap_time {
        Some(t) => format!("{title}: lap time {t:.3} s"),
        None => title.to_string(),
    };
    let _ = writeln!(svg, r#"<text x="{MARGIN:.0}" y="{top:.0}">{}</text>"#, escape(&caption));
    let bar = 200.0;
    let steps = 20;
    for i in 0..steps {
        let x = MARGIN + bar * i as f64 / steps as f64;
        let _ = writeln!(
            svg,
            r#"<rect x="{x:.2}" y="{:.0}" width="{:.2}" height="10" fill="{}"/>"#,
            top + 10.0,
            bar / steps as f64 + 0.5,
            speed_color((i as f64 + 0.5) / steps as f64)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{MARGIN:.0}" y="{:.0}">{vmin:.1} m/s</text>"#,
        top + 38.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.0}" y="{:.0}" text-anchor="end">{vmax:.1} m/s</text>"#,
        MARGIN + bar,
        top + 38.0
    );
    let _ = writeln!(svg, "</g>");
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(format_sig(0.0), "0");
        assert_eq!(format_sig(1.0), "1");
        assert_eq!(format_sig(-2.5), "-2.5");
        assert_eq!(format_sig(std::f64::consts::PI), "3.14159265");
        assert_eq!(format_sig(123456.789123), "123456.789");
        assert_eq!(format_sig(1.0 / 3.0 * 1e-7), "3.33333333e-8");
        assert_eq!(format_sig(6.02214076e23), "6.02214076e23");
        assert_eq!(format_sig(999999999.6), "1e9");
        assert_eq!(format_sig(1e-5), "0.00001");
    }

    #[test]
    fn formatted_values_round_trip_to_nine_digits() {
        for &x in &[1.234567891234, -9.87654321e-3, 42.0, 1e12 / 7.0, -3.0e-9] {
            let back: f64 = format_sig(x).parse().unwrap();
            assert!((back - x).abs() <= 5e-9 * x.abs(), "{x} -> {back}");
        }
    }

    #[test]
    fn color_ramp_ends() {
        assert_eq!(speed_color(0.0), "#d7191c");
        assert_eq!(speed_color(1.0), "#2c7bb6");
        assert_eq!(speed_color(f64::NAN), "#d7191c");
    }
}
