//! Standalone SVG 1.1 line and marker plots.

use std::fmt::Write as _;
use std::path::Path;

use super::csv::{format_number, write_file};
use super::ScenarioError;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 60.0;
const TICKS: usize = 5;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Style {
    #[default]
    Line,
    /// Line with a circle at every point.
    Markers,
    Dashed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series { name: name.into(), points, style: Style::Line }
    }

    pub fn styled(mut self, style: Style) -> Self {
        self.style = style;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

impl Plot {
    pub fn new(title: impl Into<String>, x_label: impl Into<String>, y_label: impl Into<String>) -> Self {
        Plot { title: title.into(), x_label: x_label.into(), y_label: y_label.into(), series: Vec::new() }
    }

    pub fn with(mut self, series: Series) -> Self {
        self.series.push(series);
        self
    }
}

/// Time series of every column against time.
pub fn time_series_plot(title: &str, times: &[f64], columns: &[(String, Vec<f64>)]) -> Plot {
    columns.iter().fold(Plot::new(title, "t", "density"), |p, (name, values)| {
        p.with(Series::new(name.clone(), times.iter().copied().zip(values.iter().copied()).collect()))
    })
}

/// Phase-plane orbit `(x(t), y(t))`.
pub fn phase_plot(title: &str, x_name: &str, y_name: &str, x: &[f64], y: &[f64]) -> Plot {
    Plot::new(title, x_name, y_name).with(Series::new("orbit", x.iter().copied().zip(y.iter().copied()).collect()))
}

#[derive(Debug, Clone, Copy)]
struct Range {
    lo: f64,
    hi: f64,
}

impl Range {
    fn of(values: impl Iterator<Item = f64>) -> Range {
        let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let span = hi - lo;
        if span > 1e-12 * lo.abs().max(hi.abs()).max(1e-300) {
            let pad = 0.04 * span;
            Range { lo: lo - pad, hi: hi + pad }
        } else {
            let pad = if lo.abs() > 0.0 { 0.1 * lo.abs() } else { 1.0 };
            Range { lo: lo - pad, hi: hi + pad }
        }
    }

    fn map(&self, v: f64, from: f64, to: f64) -> f64 {
        from + (v - self.lo) / (self.hi - self.lo) * (to - from)
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn tick_label(v: f64, range: &Range) -> String {
    // round to a precision a few digits below the axis span
    let step = (range.hi - range.lo) / TICKS as f64;
    let digits = (-step.abs().log10().floor() as i32 + 2).max(0) as usize;
    let rounded: f64 = format!("{v:.digits$}").parse().unwrap_or(v);
    format_number(if rounded == 0.0 { 0.0 } else { rounded })
}

/// Renders the plot; every series needs at least two points.
pub fn render_svg(plot: &Plot) -> Result<String, ScenarioError> {
    if plot.series.is_empty() {
        return Err(ScenarioError::Invalid("plot has no series".into()));
    }
    for s in &plot.series {
        // a lone marker (an equilibrium, say) is fine; lines need two points
        let needed = if s.style == Style::Markers { 1 } else { 2 };
        if s.points.len() < needed {
            return Err(ScenarioError::Invalid(format!("series `{}` has fewer than {needed} points", s.name)));
        }
        if s.points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(ScenarioError::Invalid(format!("series `{}` has non-finite points", s.name)));
        }
    }
    let all = || plot.series.iter().flat_map(|s| s.points.iter());
    let xr = Range::of(all().map(|p| p.0));
    let yr = Range::of(all().map(|p| p.1));
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (HEIGHT - BOTTOM, TOP);

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="28" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        xml_escape(&plot.title)
    );
    let _ = writeln!(s, r#"<g stroke="black" stroke-width="1" fill="none">"#);
    let _ = writeln!(s, r#"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}"/>"#, x1 - x0, y0 - y1);
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r#"<g font-family="sans-serif" font-size="11" fill="black">"#);
    for i in 0..=TICKS {
        let f = i as f64 / TICKS as f64;
        let xv = xr.lo + f * (xr.hi - xr.lo);
        let px = xr.map(xv, x0, x1);
        let _ = writeln!(s, r##"<line x1="{px:.2}" y1="{y0:.2}" x2="{px:.2}" y2="{:.2}" stroke="#000"/>"##, y0 + 5.0);
        let _ = writeln!(
            s,
            r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y0 + 18.0,
            tick_label(xv, &xr)
        );
        let yv = yr.lo + f * (yr.hi - yr.lo);
        let py = yr.map(yv, y0, y1);
        let _ = writeln!(s, r##"<line x1="{:.2}" y1="{py:.2}" x2="{x0:.2}" y2="{py:.2}" stroke="#000"/>"##, x0 - 5.0);
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            x0 - 8.0,
            py + 4.0,
            tick_label(yv, &yr)
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 18.0,
        xml_escape(&plot.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="20" y="{:.2}" font-family="sans-serif" font-size="13" text-anchor="middle" transform="rotate(-90 20 {:.2})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        xml_escape(&plot.y_label)
    );

    for (i, series) in plot.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let coords: Vec<(f64, f64)> =
            series.points.iter().map(|&(x, y)| (xr.map(x, x0, x1), yr.map(y, y0, y1))).collect();
        let mut pts = String::new();
        for (k, (px, py)) in coords.iter().enumerate() {
            if k > 0 {
                pts.push(' ');
            }
            let _ = write!(pts, "{px:.2},{py:.2}");
        }
        let dash = if series.style == Style::Dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{pts}"/>"#);
        if series.style == Style::Markers {
            let _ = writeln!(s, r#"<g fill="{color}">"#);
            for (px, py) in &coords {
                let _ = writeln!(s, r#"<circle cx="{px:.2}" cy="{py:.2}" r="3.5"/>"#);
            }
            let _ = writeln!(s, "</g>");
        }
        let ly = TOP + 10.0 + 20.0 * i as f64;
        let lx = x1 + 15.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"{dash}/>"#,
            lx + 25.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12">{}</text>"#,
            lx + 32.0,
            ly + 4.0,
            xml_escape(&series.name)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn render_plot_svg(plot: &Plot, path: &Path) -> Result<(), ScenarioError> {
    write_file(path, &render_svg(plot)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn polyline_points(svg: &str) -> Vec<Vec<(f64, f64)>> {
        svg.lines()
            .filter(|l| l.starts_with("<polyline"))
            .map(|l| {
                let start = l.find("points=\"").unwrap() + 8;
                let end = l[start..].find('"').unwrap() + start;
                l[start..end]
                    .split(' ')
                    .map(|p| {
                        let (x, y) = p.split_once(',').unwrap();
                        (x.parse().unwrap(), y.parse().unwrap())
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn affine_mapping_spans_the_frame() {
        let plot = Plot::new("t", "x", "y").with(Series::new("a", vec![(0.0, 0.0), (1.0, 2.0), (2.0, 1.0)]));
        let svg = render_svg(&plot).unwrap();
        let pts = &polyline_points(&svg)[0];
        // 4% padding on both axes
        let frac = 0.04 / 1.08;
        let x_span = WIDTH - RIGHT - LEFT;
        assert!((pts[0].0 - (LEFT + frac * x_span)).abs() < 0.01);
        assert!((pts[2].0 - (WIDTH - RIGHT - frac * x_span)).abs() < 0.01);
        assert!(pts[1].1 < pts[2].1 && pts[2].1 < pts[0].1);
        assert!(svg.starts_with("<?xml") && svg.ends_with("</svg>\n"));
        assert!(svg.contains(">a</text>"));
    }

    #[test]
    fn constant_series_gets_padded_range() {
        let plot = Plot::new("flat", "t", "N").with(Series::new("c", vec![(0.0, 2.0), (1.0, 2.0)]));
        let svg = render_svg(&plot).unwrap();
        let pts = &polyline_points(&svg)[0];
        let mid = (TOP + HEIGHT - BOTTOM) / 2.0;
        assert!((pts[0].1 - mid).abs() < 0.01);
        let zero = Plot::new("zero", "t", "N").with(Series::new("z", vec![(0.0, 0.0), (1.0, 0.0)]));
        assert!(render_svg(&zero).is_ok());
    }

    #[test]
    fn rejects_short_series() {
        let plot = Plot::new("t", "x", "y").with(Series::new("a", vec![(0.0, 0.0)]));
        assert!(render_svg(&plot).is_err());
        assert!(render_svg(&Plot::new("t", "x", "y")).is_err());
    }

    #[test]
    fn escapes_labels() {
        let plot = Plot::new("a<b & c", "x", "y").with(Series::new("s", vec![(0.0, 0.0), (1.0, 1.0)]));
        assert!(render_svg(&plot).unwrap().contains("a&lt;b &amp; c"));
    }
}
