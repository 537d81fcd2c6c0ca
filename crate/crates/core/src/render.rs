//! Stage IV imagery: RGB overlays (blue lumen, red calcification over a
//! windowed grayscale background) and deterministic SVG line charts.
//!
//! Overlay colors are pure saturation rather than alpha blends so golden
//! tests can compare bytes. The SVG writer emits a fixed element and
//! attribute order for the same reason.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// 8-bit RGB raster, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<[u8; 3]>,
}

pub const LUMEN_COLOR: [u8; 3] = [0, 0, 255];
pub const CALC_COLOR: [u8; 3] = [255, 0, 0];

/// Render one slice: grayscale background windowed to `[lo, hi]`, lumen
/// pixels in blue, calc pixels in red.
pub fn render_overlay(
    samples: &[u16],
    width: u32,
    height: u32,
    lumen: &[(u32, u32)],
    calc: &[(u32, u32)],
    window: (u16, u16),
) -> Result<RgbImage> {
    let (lo, hi) = window;
    if lo >= hi {
        return Err(Error::InvalidWindow { lo, hi });
    }
    debug_assert_eq!(samples.len(), width as usize * height as usize);
    let span = (hi - lo) as f64;
    let mut pixels: Vec<[u8; 3]> = samples
        .iter()
        .map(|&v| {
            let t = ((v as f64 - lo as f64) / span).clamp(0.0, 1.0);
            let g = (255.0 * t).round() as u8;
            [g, g, g]
        })
        .collect();
    for &(x, y) in lumen {
        pixels[y as usize * width as usize + x as usize] = LUMEN_COLOR;
    }
    for &(x, y) in calc {
        pixels[y as usize * width as usize + x as usize] = CALC_COLOR;
    }
    Ok(RgbImage {
        width,
        height,
        pixels,
    })
}

/// Encode as binary PPM (P6, maxval 255).
pub fn ppm_bytes(img: &RgbImage) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.reserve(img.pixels.len() * 3);
    for px in &img.pixels {
        out.extend_from_slice(px);
    }
    out
}

pub fn write_ppm(img: &RgbImage, path: &Path) -> Result<()> {
    fs::write(path, ppm_bytes(img))?;
    Ok(())
}

/// Decode a binary PPM written by [`write_ppm`].
pub fn read_ppm(path: &Path) -> Result<RgbImage> {
    let bad = |reason: &str| Error::MalformedHeader {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let bytes = fs::read(path)?;
    let header_end = bytes
        .iter()
        .enumerate()
        .filter(|(_, &b)| b == b'\n')
        .nth(2)
        .map(|(i, _)| i + 1)
        .ok_or_else(|| bad("truncated header"))?;
    let header = std::str::from_utf8(&bytes[..header_end]).map_err(|_| bad("non-ascii header"))?;
    let mut lines = header.lines();
    if lines.next() != Some("P6") {
        return Err(bad("missing P6 magic"));
    }
    let dims: Vec<u32> = lines
        .next()
        .unwrap_or("")
        .split_whitespace()
        .filter_map(|t| t.parse().ok())
        .collect();
    if dims.len() != 2 || lines.next() != Some("255") {
        return Err(bad("unsupported header"));
    }
    let (width, height) = (dims[0], dims[1]);
    let payload = &bytes[header_end..];
    let count = width as usize * height as usize;
    if payload.len() != count * 3 {
        return Err(bad("payload size mismatch"));
    }
    let pixels = payload
        .chunks_exact(3)
        .map(|c| [c[0], c[1], c[2]])
        .collect();
    Ok(RgbImage {
        width,
        height,
        pixels,
    })
}

const SVG_WIDTH: f64 = 800.0;
const SVG_HEIGHT: f64 = 400.0;
const X_MIN: f64 = 60.0;
const X_MAX: f64 = 780.0;
const Y_MIN: f64 = 360.0; // value 0 (SVG y grows downward)
const Y_MAX: f64 = 20.0; // series maximum
const RANGE_EPSILON: f64 = 1e-12;

fn escape_text(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Render a value series as a fixed-geometry SVG polyline chart.
///
/// x maps slice index linearly to [60, 780]; y maps [0, max(series, eps)]
/// to [360, 20]. Element and attribute order are fixed, so equal input
/// yields identical bytes.
pub fn plot_profile_svg(series: &[f64], title: &str, path: &Path) -> Result<()> {
    if series.is_empty() {
        return Err(Error::EmptySeries);
    }
    let max_value = series.iter().copied().fold(0.0f64, f64::max);
    let scale = max_value.max(RANGE_EPSILON);
    let n = series.len();

    let x_at = |i: usize| -> f64 {
        if n == 1 {
            X_MIN
        } else {
            X_MIN + (X_MAX - X_MIN) * i as f64 / (n - 1) as f64
        }
    };
    let y_at = |v: f64| -> f64 { Y_MIN + (Y_MAX - Y_MIN) * (v / scale) };

    let mut svg = String::with_capacity(1024 + 16 * n);
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_WIDTH}\" height=\"{SVG_HEIGHT}\" viewBox=\"0 0 {SVG_WIDTH} {SVG_HEIGHT}\">\n"
    ));
    svg.push_str(&format!(
        "<text x=\"400\" y=\"14\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">{}</text>\n",
        escape_text(title)
    ));
    // Axes.
    svg.push_str(&format!(
        "<line x1=\"{X_MIN}\" y1=\"{Y_MIN}\" x2=\"{X_MAX}\" y2=\"{Y_MIN}\" stroke=\"black\" stroke-width=\"1\"/>\n"
    ));
    svg.push_str(&format!(
        "<line x1=\"{X_MIN}\" y1=\"{Y_MAX}\" x2=\"{X_MIN}\" y2=\"{Y_MIN}\" stroke=\"black\" stroke-width=\"1\"/>\n"
    ));
    // Min/max tick labels on the value axis, slice extent on the x axis.
    svg.push_str(&format!(
        "<text x=\"55\" y=\"364\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{:.6}</text>\n",
        0.0
    ));
    svg.push_str(&format!(
        "<text x=\"55\" y=\"24\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{max_value:.6}</text>\n"
    ));
    svg.push_str(
        "<text x=\"60\" y=\"378\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">0</text>\n",
    );
    svg.push_str(&format!(
        "<text x=\"780\" y=\"378\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
        n - 1
    ));
    svg.push_str("<polyline fill=\"none\" stroke=\"#1f6fc4\" stroke-width=\"1.5\" points=\"");
    for (i, &v) in series.iter().enumerate() {
        if i > 0 {
            svg.push(' ');
        }
        svg.push_str(&format!("{:.2},{:.2}", x_at(i), y_at(v)));
    }
    svg.push_str("\"/>\n</svg>\n");
    fs::write(path, svg)?;
    Ok(())
}
