//! SVG charts for histogram scenes and region-color maps for raster scenes.
//!
//! `Layered` output draws one path per class, bottom to top, with
//! `fill-opacity`; the viewer does the blending, which every common
//! renderer performs on gamma-encoded values. `Flattened` output paints
//! each region in its resolved color instead, so it shows linear-light
//! blending faithfully.

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::color::Srgb8;
use crate::composite::{region_color, BlendSpace, CompositeError};
use crate::objective::Solution;
use crate::report::legend;
use crate::scene::{ClassSet, HistogramSpec, MaskScene, SceneError};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SvgMode {
    #[default]
    Layered,
    Flattened,
}

impl std::str::FromStr for SvgMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "layered" => Ok(Self::Layered),
            "flattened" => Ok(Self::Flattened),
            other => Err(format!("unknown svg mode {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvgOptions {
    pub width: u32,
    pub height: u32,
    pub margin: u32,
    pub mode: SvgMode,
    /// Only used by `Flattened`.
    pub blend_space: BlendSpace,
    pub legend: bool,
}

impl Default for SvgOptions {
    fn default() -> Self {
        Self {
            width: 640,
            height: 400,
            margin: 24,
            mode: SvgMode::Layered,
            blend_space: BlendSpace::Linear,
            legend: true,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RenderError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Composite(#[from] CompositeError),
    #[error("solution has {got} classes, chart has {expected}")]
    ClassCount { expected: usize, got: usize },
    #[error("chart area is empty")]
    NoPlotArea,
}

const LEGEND_ROW: u32 = 18;

/// Fixed-precision coordinates keep the output byte-stable.
fn num(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn opacity(a: f64) -> String {
    num((a * 1000.0).round() / 1000.0)
}

/// Maps chart units onto the plot rectangle.
pub struct PlotFrame {
    pub x0: f64,
    pub y0: f64,
    pub width: f64,
    pub height: f64,
    lo: f64,
    span: f64,
    max_height: f64,
}

impl PlotFrame {
    pub fn new(spec: &HistogramSpec, opts: &SvgOptions) -> Result<Self, RenderError> {
        let legend_h = if opts.legend { LEGEND_ROW * spec.m() as u32 + opts.margin / 2 } else { 0 };
        let width = opts.width as f64 - 2.0 * opts.margin as f64;
        let height = opts.height as f64 - 2.0 * opts.margin as f64 - legend_h as f64;
        if width <= 0.0 || height <= 0.0 {
            return Err(RenderError::NoPlotArea);
        }
        let lo = spec.bin_edges[0];
        let hi = spec.bin_edges[spec.bin_edges.len() - 1];
        Ok(Self {
            x0: opts.margin as f64,
            y0: (opts.margin + legend_h) as f64,
            width,
            height,
            lo,
            span: hi - lo,
            max_height: spec.max_height(),
        })
    }

    pub fn x(&self, v: f64) -> f64 {
        self.x0 + (v - self.lo) / self.span * self.width
    }

    pub fn y(&self, h: f64) -> f64 {
        self.y0 + self.height * (1.0 - h / self.max_height)
    }

    pub fn baseline(&self) -> f64 {
        self.y0 + self.height
    }
}

fn step_path(spec: &HistogramSpec, frame: &PlotFrame, class: usize) -> String {
    let mut d = format!("M{} {}", num(frame.x(spec.bin_edges[0])), num(frame.baseline()));
    for (b, &h) in spec.heights[class].iter().enumerate() {
        let y = num(frame.y(h));
        let _ = write!(d, "L{} {}L{} {}", num(frame.x(spec.bin_edges[b])), y, num(frame.x(spec.bin_edges[b + 1])), y);
    }
    let _ = write!(d, "L{} {}Z", num(frame.x(spec.bin_edges[spec.bins()])), num(frame.baseline()));
    d
}

/// Vertical runs `(low, high, signature)` of one bin, bottom up.
fn bin_runs(spec: &HistogramSpec, bin: usize) -> Vec<(f64, f64, ClassSet)> {
    let mut levels: Vec<f64> = spec.heights.iter().map(|h| h[bin]).filter(|&h| h > 0.0).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let mut runs = Vec::new();
    let mut low = 0.0;
    for &high in &levels {
        let sig = ClassSet::from_classes((0..spec.m()).filter(|&k| spec.heights[k][bin] >= high));
        runs.push((low, high, sig));
        low = high;
    }
    runs
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Renders the histogram chart. Output bytes depend only on the inputs.
pub fn render_svg(spec: &HistogramSpec, sol: &Solution, opts: &SvgOptions) -> Result<String, RenderError> {
    spec.validate()?;
    if sol.m() != spec.m() {
        return Err(RenderError::ClassCount { expected: spec.m(), got: sol.m() });
    }
    let frame = PlotFrame::new(spec, opts)?;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#,
        w = opts.width,
        h = opts.height
    );
    let _ = writeln!(out, r#"<rect width="{}" height="{}" fill="{}"/>"#, opts.width, opts.height, spec.background);

    match opts.mode {
        SvgMode::Layered => {
            for &k in sol.order.as_slice() {
                let _ = writeln!(
                    out,
                    r#"<path class="series" data-class="{k}" d="{}" fill="{}" fill-opacity="{}"/>"#,
                    step_path(spec, &frame, k),
                    sol.palette[k],
                    opacity(sol.opacities[k])
                );
            }
        }
        SvgMode::Flattened => {
            let _ = writeln!(out, r#"<g class="regions" shape-rendering="crispEdges">"#);
            for b in 0..spec.bins() {
                let (xa, xb) = (frame.x(spec.bin_edges[b]), frame.x(spec.bin_edges[b + 1]));
                for (low, high, sig) in bin_runs(spec, b) {
                    let c = region_color(sig, &sol.palette, &sol.opacities, &sol.order, spec.background, opts.blend_space)?;
                    let (ya, yb) = (frame.y(high), frame.y(low));
                    let _ = writeln!(
                        out,
                        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{c}"/>"#,
                        num(xa),
                        num(ya),
                        num(xb - xa),
                        num(yb - ya)
                    );
                }
            }
            let _ = writeln!(out, "</g>");
        }
    }

    let _ = writeln!(
        out,
        r##"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="#444444" stroke-width="1"/>"##,
        num(frame.x0),
        num(frame.x0 + frame.width),
        y = num(frame.baseline() + 0.5)
    );

    if opts.legend {
        let _ = writeln!(out, r#"<g class="legend" font-family="sans-serif" font-size="12">"#);
        // Topmost layer first, as stacked in the chart.
        for (row, entry) in legend(&spec.class_labels, sol).iter().rev().enumerate() {
            let y = opts.margin + row as u32 * LEGEND_ROW;
            let _ = writeln!(
                out,
                r#"<rect x="{}" y="{y}" width="12" height="12" fill="{}" fill-opacity="{}"/><text x="{}" y="{}">{}</text>"#,
                opts.margin,
                entry.color,
                opacity(entry.opacity),
                opts.margin + 18,
                y + 10,
                escape(&entry.label)
            );
        }
        let _ = writeln!(out, "</g>");
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Per-pixel display colors of a raster scene, row-major RGB bytes.
/// Uncovered pixels get the background.
pub fn region_color_map(scene: &MaskScene, sol: &Solution, space: BlendSpace) -> Result<Vec<u8>, RenderError> {
    if sol.m() != scene.scene.m {
        return Err(RenderError::ClassCount { expected: scene.scene.m, got: sol.m() });
    }
    let background = scene.scene.background;
    let mut cache = std::collections::HashMap::<ClassSet, Srgb8>::new();
    let mut out = Vec::with_capacity(scene.pixel_signatures.len() * 3);
    for &sig in &scene.pixel_signatures {
        let c = if sig.is_empty() {
            background
        } else if let Some(&c) = cache.get(&sig) {
            c
        } else {
            let c = region_color(sig, &sol.palette, &sol.opacities, &sol.order, background, space)?;
            cache.insert(sig, c);
            c
        };
        out.extend_from_slice(&c.channels());
    }
    Ok(out)
}
