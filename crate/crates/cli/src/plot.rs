//! SVG contour plots of 2D estimates.

use std::fmt::Write as _;

use covfuse_core::Estimate;
use nalgebra::DVector;

use crate::error::{CliError, CliResult};

pub const SEGMENTS: usize = 64;

const SIZE: f64 = 640.0;
const INPUT_STYLE: &str = "fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"1.5\"";
const SOLUTION_STYLE: &str = "fill=\"none\" stroke=\"#c0392b\" stroke-width=\"2\" stroke-dasharray=\"8 4\"";
const AXIS_STYLE: &str = "stroke=\"#777777\" stroke-width=\"1\"";

/// The 1σ contour as a closed polyline: the unit circle mapped through the
/// Cholesky factor of the covariance, `SEGMENTS + 1` points with the first
/// repeated at the end.
pub fn contour(e: &Estimate) -> CliResult<Vec<[f64; 2]>> {
    if e.dim() != 2 {
        return Err(CliError::Input(format!("plots are 2D only, got dimension {}", e.dim())));
    }
    let l = match e.cov().cholesky_factor() {
        Ok(l) => l,
        Err(_) => e.cov().sqrt_psd()?.into_matrix(),
    };
    Ok((0..=SEGMENTS)
        .map(|k| {
            let theta = std::f64::consts::TAU * (k % SEGMENTS) as f64 / SEGMENTS as f64;
            let p = e.mean() + &l * DVector::from_vec(vec![theta.cos(), theta.sin()]);
            [p[0], p[1]]
        })
        .collect())
}

/// Maps data coordinates onto the square canvas with `y` pointing up.
struct Frame {
    x0: f64,
    y1: f64,
    scale: f64,
}

impl Frame {
    fn fit(points: &[[f64; 2]]) -> Frame {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in points {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
        let pad = 0.08 * span;
        let side = span + 2.0 * pad;
        let cx = 0.5 * (lo[0] + hi[0]);
        let cy = 0.5 * (lo[1] + hi[1]);
        Frame { x0: cx - 0.5 * side, y1: cy + 0.5 * side, scale: SIZE / side }
    }

    fn map(&self, p: [f64; 2]) -> (f64, f64) {
        ((p[0] - self.x0) * self.scale, (self.y1 - p[1]) * self.scale)
    }

    fn x_data(&self, px: f64) -> f64 {
        self.x0 + px / self.scale
    }

    fn y_data(&self, py: f64) -> f64 {
        self.y1 - py / self.scale
    }
}

fn polyline(out: &mut String, frame: &Frame, pts: &[[f64; 2]], class: &str, style: &str) {
    let coords: Vec<String> = pts
        .iter()
        .map(|p| {
            let (x, y) = frame.map(*p);
            format!("{x:.3},{y:.3}")
        })
        .collect();
    let data: Vec<String> = pts.iter().map(|p| format!("{},{}", p[0], p[1])).collect();
    writeln!(
        out,
        "  <polyline class=\"{class}\" {style} points=\"{}\" data-points=\"{}\"/>",
        coords.join(" "),
        data.join(" ")
    )
    .unwrap();
}

/// Renders the input contours, the solution contour and the coordinate axes.
/// Every polyline carries its exact data coordinates in `data-points`.
pub fn render_svg(inputs: &[Estimate], solution: &Estimate, labels: Option<&[String]>) -> CliResult<String> {
    let input_contours: Vec<Vec<[f64; 2]>> = inputs.iter().map(contour).collect::<CliResult<_>>()?;
    let solution_contour = contour(solution)?;
    let all: Vec<[f64; 2]> = input_contours
        .iter()
        .flatten()
        .chain(solution_contour.iter())
        .copied()
        .collect();
    let frame = Frame::fit(&all);

    let mut out = String::new();
    writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">"
    )
    .unwrap();
    writeln!(out, "  <rect width=\"{SIZE}\" height=\"{SIZE}\" fill=\"white\"/>").unwrap();

    // axes through the origin, pinned to the border when it is off-canvas
    let (ox, oy) = frame.map([0.0, 0.0]);
    let ax = ox.clamp(0.0, SIZE);
    let ay = oy.clamp(0.0, SIZE);
    writeln!(out, "  <line class=\"axis\" {AXIS_STYLE} x1=\"0\" y1=\"{ay:.3}\" x2=\"{SIZE}\" y2=\"{ay:.3}\"/>").unwrap();
    writeln!(out, "  <line class=\"axis\" {AXIS_STYLE} x1=\"{ax:.3}\" y1=\"0\" x2=\"{ax:.3}\" y2=\"{SIZE}\"/>").unwrap();
    let label_style = "font-family=\"sans-serif\" font-size=\"11\" fill=\"#555555\"";
    writeln!(out, "  <text {label_style} x=\"4\" y=\"{:.3}\">{:.4}</text>", (ay - 4.0).max(12.0), frame.x_data(0.0)).unwrap();
    writeln!(
        out,
        "  <text {label_style} x=\"{:.3}\" y=\"{:.3}\" text-anchor=\"end\">{:.4}</text>",
        SIZE - 4.0,
        (ay - 4.0).max(12.0),
        frame.x_data(SIZE)
    )
    .unwrap();
    writeln!(out, "  <text {label_style} x=\"{:.3}\" y=\"12\">{:.4}</text>", (ax + 4.0).min(SIZE - 60.0), frame.y_data(0.0)).unwrap();
    writeln!(
        out,
        "  <text {label_style} x=\"{:.3}\" y=\"{:.3}\">{:.4}</text>",
        (ax + 4.0).min(SIZE - 60.0),
        SIZE - 4.0,
        frame.y_data(SIZE)
    )
    .unwrap();

    for (i, c) in input_contours.iter().enumerate() {
        polyline(&mut out, &frame, c, "input", INPUT_STYLE);
        if let Some(name) = labels.and_then(|l| l.get(i)) {
            let (x, y) = frame.map([inputs[i].mean()[0], inputs[i].mean()[1]]);
            writeln!(out, "  <text {label_style} x=\"{x:.3}\" y=\"{y:.3}\" text-anchor=\"middle\">{}</text>", escape(name))
                .unwrap();
        }
    }
    polyline(&mut out, &frame, &solution_contour, "solution", SOLUTION_STYLE);
    out.push_str("</svg>\n");
    Ok(out)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Reads back the `data-points` of every polyline with the given class.
pub fn polylines(svg: &str, class: &str) -> Vec<Vec<[f64; 2]>> {
    let needle = format!("class=\"{class}\"");
    svg.lines()
        .filter(|l| l.contains("<polyline") && l.contains(&needle))
        .filter_map(|l| {
            let start = l.find("data-points=\"")? + "data-points=\"".len();
            let end = start + l[start..].find('"')?;
            l[start..end]
                .split(' ')
                .map(|pair| {
                    let (x, y) = pair.split_once(',')?;
                    Some([x.parse().ok()?, y.parse().ok()?])
                })
                .collect()
        })
        .collect()
}
