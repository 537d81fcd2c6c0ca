//! Volume loading and storage.
//!
//! Two bit-exact on-disk forms are supported: a directory of binary PGM (P5)
//! slices, and a raw little-endian u16 file with a JSON sidecar header.
//! Slice 0 is the most cranial slice; slices are stored slice-major, then
//! row-major, with no padding.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear map from raw sample value to physical units: `slope * v + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rescale {
    pub slope: f64,
    pub intercept: f64,
}

impl Rescale {
    pub fn apply(&self, raw: u16) -> f64 {
        self.slope * raw as f64 + self.intercept
    }
}

/// A dense stack of 16-bit transverse slices.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume {
    width: u32,
    height: u32,
    depth: u32,
    /// Millimeters per voxel along (x, y, z).
    pub spacing: [f64; 3],
    /// Optional raw-to-physical intensity map.
    pub rescale: Option<Rescale>,
    data: Vec<u16>,
}

impl Volume {
    pub fn new(
        width: u32,
        height: u32,
        depth: u32,
        spacing: [f64; 3],
        rescale: Option<Rescale>,
        data: Vec<u16>,
    ) -> Result<Self> {
        if width == 0 || height == 0 || depth == 0 {
            return Err(Error::DimensionMismatch(format!(
                "volume dimensions must be positive, got {width}x{height}x{depth}"
            )));
        }
        if spacing.iter().any(|&s| s.is_nan() || s <= 0.0) {
            return Err(Error::DimensionMismatch(format!(
                "voxel spacing must be positive, got {spacing:?}"
            )));
        }
        let expected = width as usize * height as usize * depth as usize;
        if data.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "intensity array has {} samples, dimensions imply {expected}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            depth,
            spacing,
            rescale,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Samples of slice `k`, row-major.
    pub fn slice(&self, k: u32) -> &[u16] {
        let n = self.width as usize * self.height as usize;
        let start = k as usize * n;
        &self.data[start..start + n]
    }

    pub fn get(&self, x: u32, y: u32, k: u32) -> u16 {
        self.slice(k)[y as usize * self.width as usize + x as usize]
    }

    pub fn samples(&self) -> &[u16] {
        &self.data
    }
}

/// The `volume.json` sidecar. Field order here is the serialization order.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeHeader {
    pub width: u32,
    pub height: u32,
    pub depth: u32,
    pub spacing_mm: [f64; 3],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rescale: Option<Rescale>,
}

fn read_header(path: &Path) -> Result<VolumeHeader> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::MalformedHeader {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Load a stack of binary PGM (P5) slices from `dir`.
///
/// Files matching `*.pgm` are taken in lexicographic filename order, one
/// slice each. Samples with maxval <= 255 are widened to 16 bits without
/// scaling (thresholds are specified in raw units, so values must survive
/// loading untouched); maxval 256..=65535 samples are two-byte big-endian
/// per the netpbm convention. Spacing and rescale come from an optional
/// `volume.json` sidecar in the same directory, else spacing defaults to
/// (1, 1, 1) mm.
pub fn load_pgm_stack(dir: &Path) -> Result<Volume> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|e| e == "pgm").unwrap_or(false))
        .collect();
    paths.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    if paths.is_empty() {
        return Err(Error::MissingFiles(dir.to_path_buf()));
    }

    let mut width = 0u32;
    let mut height = 0u32;
    let mut data: Vec<u16> = Vec::new();
    for (k, path) in paths.iter().enumerate() {
        let bytes = fs::read(path)?;
        let (w, h, samples) = parse_pgm(&bytes, path)?;
        if k == 0 {
            width = w;
            height = h;
        } else if w != width || h != height {
            return Err(Error::DimensionMismatch(format!(
                "{} is {w}x{h}, expected {width}x{height}",
                path.display()
            )));
        }
        data.extend_from_slice(&samples);
    }

    let sidecar = dir.join("volume.json");
    let (spacing, rescale) = if sidecar.exists() {
        let header = read_header(&sidecar)?;
        if header.width != width || header.height != height || header.depth != paths.len() as u32 {
            return Err(Error::DimensionMismatch(format!(
                "sidecar declares {}x{}x{}, stack is {width}x{height}x{}",
                header.width,
                header.height,
                header.depth,
                paths.len()
            )));
        }
        (header.spacing_mm, header.rescale)
    } else {
        ([1.0, 1.0, 1.0], None)
    };

    Volume::new(width, height, paths.len() as u32, spacing, rescale, data)
}

/// Parse one binary PGM file: magic "P5", whitespace-separated width,
/// height, maxval (with `#` comments), single whitespace byte, payload.
fn parse_pgm(bytes: &[u8], path: &Path) -> Result<(u32, u32, Vec<u16>)> {
    let bad = |reason: &str| Error::MalformedHeader {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };

    if bytes.len() < 2 || &bytes[0..2] != b"P5" {
        return Err(bad("not a binary PGM (missing P5 magic)"));
    }
    let mut pos = 2usize;
    let mut fields = [0u64; 3];
    for field in fields.iter_mut() {
        // Skip whitespace and comment lines.
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if pos == start {
            return Err(bad("truncated header"));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("digits are ascii");
        *field = text.parse::<u64>().map_err(|_| bad("header field overflow"))?;
    }
    // Exactly one whitespace byte separates maxval from the payload.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(bad("missing separator before payload"));
    }
    pos += 1;

    let (w, h, maxval) = (fields[0], fields[1], fields[2]);
    if w == 0 || h == 0 || w > u32::MAX as u64 || h > u32::MAX as u64 {
        return Err(bad("invalid dimensions"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(bad("maxval out of range 1..=65535"));
    }

    let count = w as usize * h as usize;
    let payload = &bytes[pos..];
    let samples = if maxval <= 255 {
        if payload.len() < count {
            return Err(bad("truncated payload"));
        }
        payload[..count].iter().map(|&b| b as u16).collect()
    } else {
        if payload.len() < count * 2 {
            return Err(bad("truncated payload"));
        }
        payload[..count * 2]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    };
    Ok((w as u32, h as u32, samples))
}

/// Load a raw u16 little-endian volume described by a JSON sidecar header.
pub fn load_raw_volume(header_path: &Path, data_path: &Path) -> Result<Volume> {
    let header = read_header(header_path)?;
    let expected =
        2 * header.width as u64 * header.height as u64 * header.depth as u64;
    let meta = fs::metadata(data_path)?;
    if meta.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            actual: meta.len(),
        });
    }
    let mut bytes = Vec::with_capacity(expected as usize);
    fs::File::open(data_path)?.read_to_end(&mut bytes)?;
    let data = bytes
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect();
    Volume::new(
        header.width,
        header.height,
        header.depth,
        header.spacing_mm,
        header.rescale,
        data,
    )
}

/// Write a volume as raw u16 little-endian plus JSON sidecar.
/// The inverse of [`load_raw_volume`]; output is byte-deterministic.
pub fn write_raw_volume(volume: &Volume, header_path: &Path, data_path: &Path) -> Result<()> {
    let header = VolumeHeader {
        width: volume.width,
        height: volume.height,
        depth: volume.depth,
        spacing_mm: volume.spacing,
        rescale: volume.rescale,
    };
    let json = serde_json::to_string_pretty(&header).expect("header serializes");
    fs::write(header_path, json + "\n")?;

    let mut out = std::io::BufWriter::new(fs::File::create(data_path)?);
    for &v in &volume.data {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}
