//! Deterministic synthetic volumes with per-voxel ground truth.
//!
//! A phantom is a branching tree of straight tubular segments (circular
//! cross-section, linearly interpolated center and radius) plus optional
//! calcified wedge lesions and Gaussian noise. The generator doubles as the
//! verification substrate for the whole pipeline: every voxel's true label
//! and every slice's true vessel count are known by construction.
//!
//! Noise is drawn from per-slice xoshiro256** substreams seeded as
//! `rng_seed ^ slice_index`, so output is bit-identical no matter how many
//! slices are generated concurrently.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::rng::Xoshiro256StarStar;
use crate::volume::Volume;

/// Voxel label: nothing, open lumen, or calcification.
pub const LABEL_BACKGROUND: u8 = 0;
pub const LABEL_LUMEN: u8 = 1;
pub const LABEL_CALC: u8 = 2;

/// One straight tube. Center and radius interpolate linearly from
/// `slice_start` to `slice_end` (both inclusive).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VesselSegment {
    pub id: u32,
    pub slice_start: u32,
    pub slice_end: u32,
    pub center_start: [f64; 2],
    pub center_end: [f64; 2],
    pub radius_start: f64,
    pub radius_end: f64,
}

impl VesselSegment {
    fn active_at(&self, k: u32) -> bool {
        self.slice_start <= k && k <= self.slice_end
    }

    /// (center_x, center_y, radius) at slice `k`.
    fn geometry_at(&self, k: u32) -> (f64, f64, f64) {
        let t = if self.slice_end == self.slice_start {
            0.0
        } else {
            (k - self.slice_start) as f64 / (self.slice_end - self.slice_start) as f64
        };
        let lerp = |a: f64, b: f64| a + (b - a) * t;
        (
            lerp(self.center_start[0], self.center_end[0]),
            lerp(self.center_start[1], self.center_end[1]),
            lerp(self.radius_start, self.radius_end),
        )
    }
}

/// A calcified wedge within one segment: an angular sector crossed with a
/// radial band, replacing lumen intensity where it applies.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lesion {
    pub segment_id: u32,
    pub slice_start: u32,
    pub slice_end: u32,
    /// Angular range [theta_start_deg, theta_end_deg) with 0 <= start <
    /// end <= 360; angles measured from the +x axis toward +y.
    pub theta_start_deg: f64,
    pub theta_end_deg: f64,
    /// Radial band [radial_start, radial_end] as fractions of the local
    /// segment radius, 0 <= start < end <= 1.
    pub radial_start: f64,
    pub radial_end: f64,
    pub intensity: u16,
}

/// Declarative phantom description; the JSON spec file mirrors this struct
/// field for field.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomSpec {
    pub width: u32,
    pub height: u32,
    pub depth: u32,
    pub spacing_mm: [f64; 3],
    pub background_intensity: u16,
    pub lumen_intensity: u16,
    pub noise_sigma: f64,
    pub rng_seed: u64,
    pub segments: Vec<VesselSegment>,
    #[serde(default)]
    pub lesions: Vec<Lesion>,
}

/// Per-voxel answer key produced alongside the volume.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundTruth {
    pub width: u32,
    pub height: u32,
    pub depth: u32,
    /// Slice-major, then row-major, one label byte per voxel.
    pub labels: Vec<u8>,
    /// Number of segments active at each slice.
    pub per_slice_vessel_count: Vec<u32>,
}

impl GroundTruth {
    pub fn label_slice(&self, k: u32) -> &[u8] {
        let n = self.width as usize * self.height as usize;
        &self.labels[k as usize * n..(k as usize + 1) * n]
    }
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidSpec(msg));
        if self.width == 0 || self.height == 0 || self.depth == 0 {
            return invalid(format!(
                "dimensions must be positive, got {}x{}x{}",
                self.width, self.height, self.depth
            ));
        }
        if self.spacing_mm.iter().any(|&s| s.is_nan() || s <= 0.0) {
            return invalid(format!("spacing must be positive, got {:?}", self.spacing_mm));
        }
        if self.segments.is_empty() {
            return invalid("segment list is empty".into());
        }
        if self.lumen_intensity <= self.background_intensity {
            return invalid(format!(
                "lumen intensity {} must exceed background {}",
                self.lumen_intensity, self.background_intensity
            ));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return invalid(format!("noise sigma must be finite and >= 0, got {}", self.noise_sigma));
        }
        for seg in &self.segments {
            if seg.slice_start > seg.slice_end || seg.slice_end >= self.depth {
                return invalid(format!(
                    "segment {} slice range {}..={} outside volume depth {}",
                    seg.id, seg.slice_start, seg.slice_end, self.depth
                ));
            }
            for (c, r) in [
                (seg.center_start, seg.radius_start),
                (seg.center_end, seg.radius_end),
            ] {
                if r.is_nan() || r <= 0.0 {
                    return invalid(format!("segment {} has non-positive radius", seg.id));
                }
                // Linear interpolation keeps extremes at the endpoints, so
                // endpoint checks cover every slice.
                if c[0] - r < 0.0
                    || c[0] + r > (self.width - 1) as f64
                    || c[1] - r < 0.0
                    || c[1] + r > (self.height - 1) as f64
                {
                    return invalid(format!(
                        "segment {} circle (center {:?}, radius {r}) leaves the slice bounds",
                        seg.id, c
                    ));
                }
            }
        }
        let mut seen = std::collections::HashSet::new();
        for seg in &self.segments {
            if !seen.insert(seg.id) {
                return invalid(format!("duplicate segment id {}", seg.id));
            }
        }
        for lesion in &self.lesions {
            let Some(seg) = self.segments.iter().find(|s| s.id == lesion.segment_id) else {
                return invalid(format!(
                    "lesion references missing segment id {}",
                    lesion.segment_id
                ));
            };
            if lesion.slice_start > lesion.slice_end
                || lesion.slice_end < seg.slice_start
                || lesion.slice_start > seg.slice_end
            {
                return invalid(format!(
                    "lesion slice range {}..={} does not intersect segment {} range {}..={}",
                    lesion.slice_start, lesion.slice_end, seg.id, seg.slice_start, seg.slice_end
                ));
            }
            if !(0.0..360.0).contains(&lesion.theta_start_deg)
                || lesion.theta_end_deg <= lesion.theta_start_deg
                || lesion.theta_end_deg > 360.0
            {
                return invalid(format!(
                    "lesion angular range [{}, {}) invalid",
                    lesion.theta_start_deg, lesion.theta_end_deg
                ));
            }
            if !(0.0..1.0).contains(&lesion.radial_start)
                || lesion.radial_end <= lesion.radial_start
                || lesion.radial_end > 1.0
            {
                return invalid(format!(
                    "lesion radial band [{}, {}] invalid",
                    lesion.radial_start, lesion.radial_end
                ));
            }
            if lesion.intensity <= self.lumen_intensity {
                return invalid(format!(
                    "lesion intensity {} must exceed lumen intensity {}",
                    lesion.intensity, self.lumen_intensity
                ));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: PhantomSpec = serde_json::from_str(text)
            .map_err(|e| Error::InvalidSpec(format!("spec does not parse: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Rasterize one slice: intensities plus labels, before noise.
fn paint_slice(spec: &PhantomSpec, k: u32, intensities: &mut [u16], labels: &mut [u8]) {
    let w = spec.width as i64;
    let h = spec.height as i64;
    intensities.fill(spec.background_intensity);
    labels.fill(LABEL_BACKGROUND);

    // Lumen disks first, then lesions, so a lesion is never overwritten by
    // a neighboring segment's lumen.
    for seg in spec.segments.iter().filter(|s| s.active_at(k)) {
        let (cx, cy, r) = seg.geometry_at(k);
        let x_lo = ((cx - r).floor() as i64).max(0);
        let x_hi = ((cx + r).ceil() as i64).min(w - 1);
        let y_lo = ((cy - r).floor() as i64).max(0);
        let y_hi = ((cy + r).ceil() as i64).min(h - 1);
        for y in y_lo..=y_hi {
            for x in x_lo..=x_hi {
                let dx = x as f64 - cx;
                let dy = y as f64 - cy;
                if dx * dx + dy * dy <= r * r {
                    let idx = (y * w + x) as usize;
                    intensities[idx] = spec.lumen_intensity;
                    labels[idx] = LABEL_LUMEN;
                }
            }
        }
    }

    for lesion in &spec.lesions {
        if k < lesion.slice_start || k > lesion.slice_end {
            continue;
        }
        let seg = spec
            .segments
            .iter()
            .find(|s| s.id == lesion.segment_id)
            .expect("validated");
        if !seg.active_at(k) {
            continue;
        }
        let (cx, cy, r) = seg.geometry_at(k);
        let (rho_lo, rho_hi) = (lesion.radial_start * r, lesion.radial_end * r);
        let x_lo = ((cx - r).floor() as i64).max(0);
        let x_hi = ((cx + r).ceil() as i64).min(w - 1);
        let y_lo = ((cy - r).floor() as i64).max(0);
        let y_hi = ((cy + r).ceil() as i64).min(h - 1);
        for y in y_lo..=y_hi {
            for x in x_lo..=x_hi {
                let dx = x as f64 - cx;
                let dy = y as f64 - cy;
                let rho = (dx * dx + dy * dy).sqrt();
                if rho > r || rho < rho_lo || rho > rho_hi {
                    continue;
                }
                let mut theta = dy.atan2(dx).to_degrees();
                if theta < 0.0 {
                    theta += 360.0;
                }
                if theta >= lesion.theta_start_deg && theta < lesion.theta_end_deg {
                    let idx = (y * w + x) as usize;
                    intensities[idx] = lesion.intensity;
                    labels[idx] = LABEL_CALC;
                }
            }
        }
    }
}

/// Generate the phantom volume and its ground truth.
///
/// Labels are computed before noise; noise perturbs intensities only.
pub fn generate_with(spec: &PhantomSpec, mode: ExecMode) -> Result<(Volume, GroundTruth)> {
    spec.validate()?;
    let slice_len = spec.width as usize * spec.height as usize;

    let slices = exec::map_indices(spec.depth as usize, mode, |k| {
        let mut intensities = vec![0u16; slice_len];
        let mut labels = vec![0u8; slice_len];
        paint_slice(spec, k as u32, &mut intensities, &mut labels);
        if spec.noise_sigma > 0.0 {
            let mut rng = Xoshiro256StarStar::seed_from_u64(spec.rng_seed ^ k as u64);
            for v in intensities.iter_mut() {
                let noisy = *v as f64 + spec.noise_sigma * rng.next_gaussian();
                *v = noisy.clamp(0.0, 65535.0).round() as u16;
            }
        }
        (intensities, labels)
    });

    let mut data = Vec::with_capacity(slice_len * spec.depth as usize);
    let mut labels = Vec::with_capacity(slice_len * spec.depth as usize);
    for (i, l) in slices {
        data.extend_from_slice(&i);
        labels.extend_from_slice(&l);
    }

    let per_slice_vessel_count = (0..spec.depth)
        .map(|k| spec.segments.iter().filter(|s| s.active_at(k)).count() as u32)
        .collect();

    let volume = Volume::new(
        spec.width,
        spec.height,
        spec.depth,
        spec.spacing_mm,
        None,
        data,
    )?;
    let gt = GroundTruth {
        width: spec.width,
        height: spec.height,
        depth: spec.depth,
        labels,
        per_slice_vessel_count,
    };
    Ok((volume, gt))
}

/// [`generate_with`] under the crate's default execution mode.
pub fn generate(spec: &PhantomSpec) -> Result<(Volume, GroundTruth)> {
    generate_with(spec, ExecMode::default())
}

/// Write the label map as a raw u8 file and the vessel counts as a
/// `slice,count` CSV (LF endings). Both byte-deterministic.
pub fn write_ground_truth(gt: &GroundTruth, dir: &Path) -> Result<()> {
    fs::write(dir.join("gt_labels.raw"), &gt.labels)?;
    let mut csv = Vec::with_capacity(16 * gt.per_slice_vessel_count.len());
    writeln!(csv, "slice,count").expect("vec write");
    for (k, count) in gt.per_slice_vessel_count.iter().enumerate() {
        writeln!(csv, "{k},{count}").expect("vec write");
    }
    fs::write(dir.join("gt_counts.csv"), csv)?;
    Ok(())
}

/// Built-in phantom presets, keyed by name.
pub fn preset(name: &str) -> Option<PhantomSpec> {
    match name {
        "paper-iliac" => Some(paper_iliac()),
        "stenosis-20" => Some(stenosis_20()),
        "occlusion" => Some(occlusion()),
        _ => None,
    }
}

pub const PRESET_NAMES: [&str; 3] = ["paper-iliac", "stenosis-20", "occlusion"];

/// One aorta (slices 0-99) splitting into two iliacs (100-119), each
/// splitting into two femoral-scale branches (120-159). Slices 160-199 are
/// empty background, so the expected count sequence is 1, 2, 4, 0.
pub fn paper_iliac() -> PhantomSpec {
    let tube = |id, s0, s1, c0: [f64; 2], c1: [f64; 2], r| VesselSegment {
        id,
        slice_start: s0,
        slice_end: s1,
        center_start: c0,
        center_end: c1,
        radius_start: r,
        radius_end: r,
    };
    PhantomSpec {
        width: 256,
        height: 256,
        depth: 200,
        spacing_mm: [1.0, 1.0, 5.0],
        background_intensity: 100,
        lumen_intensity: 1200,
        noise_sigma: 0.0,
        rng_seed: 42,
        segments: vec![
            tube(0, 0, 99, [128.0, 128.0], [128.0, 128.0], 18.0),
            tube(1, 100, 119, [110.0, 128.0], [92.0, 128.0], 11.0),
            tube(2, 100, 119, [146.0, 128.0], [164.0, 128.0], 11.0),
            tube(3, 120, 159, [86.0, 114.0], [82.0, 100.0], 7.0),
            tube(4, 120, 159, [98.0, 142.0], [102.0, 156.0], 7.0),
            tube(5, 120, 159, [170.0, 114.0], [174.0, 100.0], 7.0),
            tube(6, 120, 159, [158.0, 142.0], [154.0, 156.0], 7.0),
        ],
        lesions: vec![],
    }
}

/// `paper-iliac` plus a wedge lesion covering 20% of the aortic
/// cross-section at slices 96-98 (72 degrees of the full disk).
pub fn stenosis_20() -> PhantomSpec {
    let mut spec = paper_iliac();
    spec.lesions.push(Lesion {
        segment_id: 0,
        slice_start: 96,
        slice_end: 98,
        theta_start_deg: 0.0,
        theta_end_deg: 72.0,
        radial_start: 0.0,
        radial_end: 1.0,
        intensity: 2500,
    });
    spec
}

/// `paper-iliac` with every branch fully occluded at slices 150-158: one
/// full-disk lesion per segment active there, so the tracked cross-section
/// is pure calcification across the slab.
pub fn occlusion() -> PhantomSpec {
    let mut spec = paper_iliac();
    for segment_id in [3, 4, 5, 6] {
        spec.lesions.push(Lesion {
            segment_id,
            slice_start: 150,
            slice_end: 158,
            theta_start_deg: 0.0,
            theta_end_deg: 360.0,
            radial_start: 0.0,
            radial_end: 1.0,
            intensity: 2500,
        });
    }
    spec
}
