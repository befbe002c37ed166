//! Hand-emitted SVG plots and the companion `.dat` text format.
//!
//! Plots are a convenience; the `.dat` file is the data interface, so both
//! are written side by side and no plotting dependency is used.

use dynpush::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PlotPoint {
    pub x: f64,
    pub y: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub label: String,
    pub points: Vec<PlotPoint>,
    pub log_x: bool,
    pub log_y: bool,
}

impl PlotSeries {
    pub fn validate(&self) -> Result<()> {
        for p in &self.points {
            if !(p.y_lo <= p.y && p.y <= p.y_hi) {
                return Err(Error::InvalidParameter(format!(
                    "point at x={} violates y_lo ≤ y ≤ y_hi",
                    p.x
                )));
            }
            if (self.log_x && p.x <= 0.0) || (self.log_y && p.y_lo <= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "point at x={} not positive on a log axis",
                    p.x
                )));
            }
        }
        Ok(())
    }
}

pub fn to_dat(series: &PlotSeries) -> String {
    let mut out = String::new();
    out.push_str(&format!("# series: {}\n", series.label));
    out.push_str(&format!(
        "# log_x: {} log_y: {}\n# columns: x y y_lo y_hi\n",
        series.log_x, series.log_y
    ));
    for p in &series.points {
        out.push_str(&format!("{} {} {} {}\n", p.x, p.y, p.y_lo, p.y_hi));
    }
    out
}

pub fn parse_dat(text: &str) -> Result<PlotSeries> {
    let mut label = String::new();
    let mut log_x = false;
    let mut log_y = false;
    let mut points = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("# series:") {
            label = rest.trim().to_string();
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("# log_x:") {
            let mut parts = rest.split_whitespace();
            log_x = parts.next() == Some("true");
            if parts.next() == Some("log_y:") {
                log_y = parts.next() == Some("true");
            }
            continue;
        }
        if trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 4 columns, found {}", fields.len()),
            });
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad number {s:?}"),
            })
        };
        points.push(PlotPoint {
            x: parse(fields[0])?,
            y: parse(fields[1])?,
            y_lo: parse(fields[2])?,
            y_hi: parse(fields[3])?,
        });
    }
    let series = PlotSeries { label, points, log_x, log_y };
    series.validate()?;
    Ok(series)
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 50.0;

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let a = v.abs();
    if !(0.01..10_000.0).contains(&a) {
        format!("{v:.1e}")
    } else if (v - v.round()).abs() < 1e-9 {
        format!("{}", v.round() as i64)
    } else {
        format!("{v:.2}")
    }
}

/// Render a self-contained SVG scatter/line plot. An empty series yields a
/// valid document with axes only.
pub fn render_svg(series: &PlotSeries) -> Result<String> {
    series.validate()?;
    let tx = |x: f64| if series.log_x { x.log10() } else { x };
    let ty = |y: f64| if series.log_y { y.log10() } else { y };
    let (mut x_min, mut x_max) = (f64::MAX, f64::MIN);
    let (mut y_min, mut y_max) = (f64::MAX, f64::MIN);
    for p in &series.points {
        x_min = x_min.min(tx(p.x));
        x_max = x_max.max(tx(p.x));
        y_min = y_min.min(ty(p.y_lo));
        y_max = y_max.max(ty(p.y_hi));
    }
    if series.points.is_empty() {
        (x_min, x_max, y_min, y_max) = (0.0, 1.0, 0.0, 1.0);
    }
    if x_max - x_min < 1e-12 {
        x_min -= 0.5;
        x_max += 0.5;
    }
    if y_max - y_min < 1e-12 {
        y_min -= 0.5;
        y_max += 0.5;
    }
    let pad_x = 0.05 * (x_max - x_min);
    let pad_y = 0.05 * (y_max - y_min);
    x_min -= pad_x;
    x_max += pad_x;
    y_min -= pad_y;
    y_max += pad_y;
    let sx = move |x: f64| MARGIN_L + (tx(x) - x_min) / (x_max - x_min) * (WIDTH - MARGIN_L - MARGIN_R);
    let sy = move |y: f64| {
        HEIGHT - MARGIN_B - (ty(y) - y_min) / (y_max - y_min) * (HEIGHT - MARGIN_T - MARGIN_B)
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_L}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        HEIGHT - MARGIN_B,
        WIDTH - MARGIN_R,
        HEIGHT - MARGIN_B
    ));
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_L}\" y1=\"{MARGIN_T}\" x2=\"{MARGIN_L}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        HEIGHT - MARGIN_B
    ));
    // Ticks: five per axis in transformed space.
    for i in 0..=4 {
        let f = f64::from(i) / 4.0;
        let xv = x_min + f * (x_max - x_min);
        let xpix = MARGIN_L + f * (WIDTH - MARGIN_L - MARGIN_R);
        let label = if series.log_x { 10f64.powf(xv) } else { xv };
        svg.push_str(&format!(
            "<line x1=\"{xpix:.2}\" y1=\"{:.2}\" x2=\"{xpix:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
            HEIGHT - MARGIN_B,
            HEIGHT - MARGIN_B + 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{xpix:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
            HEIGHT - MARGIN_B + 18.0,
            fmt_tick(label)
        ));
        let yv = y_min + f * (y_max - y_min);
        let ypix = HEIGHT - MARGIN_B - f * (HEIGHT - MARGIN_T - MARGIN_B);
        let label = if series.log_y { 10f64.powf(yv) } else { yv };
        svg.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{ypix:.2}\" x2=\"{MARGIN_L}\" y2=\"{ypix:.2}\" stroke=\"black\"/>\n",
            MARGIN_L - 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
            MARGIN_L - 8.0,
            ypix + 4.0,
            fmt_tick(label)
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"18\" font-size=\"13\" text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        series.label
    ));
    if series.points.len() > 1 {
        let path: Vec<String> = series
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.y)))
            .collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\"/>\n",
            path.join(" ")
        ));
    }
    for p in &series.points {
        if p.y_hi > p.y_lo {
            svg.push_str(&format!(
                "<line x1=\"{0:.2}\" y1=\"{1:.2}\" x2=\"{0:.2}\" y2=\"{2:.2}\" stroke=\"steelblue\"/>\n",
                sx(p.x),
                sy(p.y_lo),
                sy(p.y_hi)
            ));
        }
        svg.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"steelblue\"/>\n",
            sx(p.x),
            sy(p.y)
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
