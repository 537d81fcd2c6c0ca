//! Stage IV numerics: per-slice counts, the stenosis profile, calcification
//! intensity sums, an Agatston-style score, and bit-exact CSV emission.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::classify::Partition;
use crate::error::{Error, Result};
use crate::segment::{label_components, BinaryMask};
use crate::track::VesselTree;
use crate::volume::Volume;

/// One CSV row: what was tracked and classified in one slice.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SliceMetrics {
    pub slice_index: u32,
    pub vessel_count: u32,
    pub lumen_px: u64,
    pub calc_px: u64,
    /// calc / (lumen + calc), or 0 when the slice has no tracked pixels.
    pub stenosis: f64,
    /// Sum of raw intensities over calc pixels.
    pub calc_intensity_sum: u64,
}

/// Per-slice metrics for the whole volume, in slice order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StenosisProfile {
    pub per_slice: Vec<SliceMetrics>,
}

impl StenosisProfile {
    pub fn stenosis_series(&self) -> Vec<f64> {
        self.per_slice.iter().map(|m| m.stenosis).collect()
    }
}

/// Aggregate the classified tree into per-slice metrics.
///
/// `partitions` must be indexed by node id, i.e. aligned with
/// `tree.nodes()`.
pub fn compute_slice_metrics(
    tree: &VesselTree,
    partitions: &[Partition],
    volume: &Volume,
) -> StenosisProfile {
    assert_eq!(partitions.len(), tree.nodes().len());
    let mut per_slice = Vec::with_capacity(volume.depth() as usize);
    for k in 0..volume.depth() {
        let nodes = tree.nodes_at(k);
        let mut lumen_px = 0u64;
        let mut calc_px = 0u64;
        let mut calc_intensity_sum = 0u64;
        for node in nodes {
            let p = &partitions[node.node_id as usize];
            lumen_px += p.lumen.len() as u64;
            calc_px += p.calc.len() as u64;
            for &(x, y) in &p.calc {
                calc_intensity_sum += volume.get(x, y, k) as u64;
            }
        }
        let stenosis = if lumen_px + calc_px > 0 {
            calc_px as f64 / (lumen_px + calc_px) as f64
        } else {
            0.0
        };
        per_slice.push(SliceMetrics {
            slice_index: k,
            vessel_count: nodes.len() as u32,
            lumen_px,
            calc_px,
            stenosis,
            calc_intensity_sum,
        });
    }
    StenosisProfile { per_slice }
}

/// The calc intensity sums in slice order.
pub fn calcification_intensity_profile(profile: &StenosisProfile) -> Vec<u64> {
    profile
        .per_slice
        .iter()
        .map(|m| m.calc_intensity_sum)
        .collect()
}

/// Agatston-style scoring knobs. Defaults follow the conventional
/// ultrafast-CT scheme: a 130-unit density floor, weight bands
/// [130,200) -> 1, [200,300) -> 2, [300,400) -> 3, >= 400 -> 4, and a
/// 1 mm^2 minimum lesion area.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AgatstonParams {
    pub density_floor: f64,
    pub weight_edges: [f64; 3],
    pub min_lesion_area_mm2: f64,
}

impl Default for AgatstonParams {
    fn default() -> Self {
        Self {
            density_floor: 130.0,
            weight_edges: [200.0, 300.0, 400.0],
            min_lesion_area_mm2: 1.0,
        }
    }
}

/// Sum of per-lesion (area in mm^2) x (density weight) over all slices.
///
/// Calc pixels are grouped into 8-connected lesions per slice; each lesion
/// is weighted by the band of its maximum physical intensity. Requires the
/// volume to carry rescale metadata, since the density bands are defined in
/// physical units.
pub fn agatston_score(
    partitions: &[Partition],
    volume: &Volume,
    params: &AgatstonParams,
) -> Result<f64> {
    let rescale = volume.rescale.ok_or(Error::MissingRescale)?;
    let pixel_area_mm2 = volume.spacing[0] * volume.spacing[1];

    let mut calc_by_slice: BTreeMap<u32, Vec<(u32, u32)>> = BTreeMap::new();
    for p in partitions {
        if !p.calc.is_empty() {
            calc_by_slice
                .entry(p.slice_index)
                .or_default()
                .extend(p.calc.iter().copied());
        }
    }

    let mut score = 0.0;
    for (&k, pixels) in &calc_by_slice {
        let mut mask = BinaryMask::new(volume.width(), volume.height());
        for &(x, y) in pixels {
            mask.set(x, y, true);
        }
        for lesion in label_components(&mask, k) {
            let area_mm2 = lesion.area as f64 * pixel_area_mm2;
            if area_mm2 < params.min_lesion_area_mm2 {
                continue;
            }
            let mut max_physical = f64::NEG_INFINITY;
            for run in &lesion.runs {
                for x in run.x0..=run.x1 {
                    max_physical = max_physical.max(rescale.apply(volume.get(x, run.y, k)));
                }
            }
            if max_physical < params.density_floor {
                continue;
            }
            let weight = if max_physical < params.weight_edges[0] {
                1.0
            } else if max_physical < params.weight_edges[1] {
                2.0
            } else if max_physical < params.weight_edges[2] {
                3.0
            } else {
                4.0
            };
            score += area_mm2 * weight;
        }
    }
    Ok(score)
}

/// Write the per-slice metrics CSV. Stenosis is printed with exactly six
/// decimal places (round-half-even), LF endings; output is
/// byte-deterministic.
pub fn write_metrics_csv(profile: &StenosisProfile, path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(64 * profile.per_slice.len());
    writeln!(
        out,
        "slice,vessel_count,lumen_px,calc_px,stenosis,calc_intensity_sum"
    )
    .expect("vec write");
    for m in &profile.per_slice {
        writeln!(
            out,
            "{},{},{},{},{:.6},{}",
            m.slice_index, m.vessel_count, m.lumen_px, m.calc_px, m.stenosis, m.calc_intensity_sum
        )
        .expect("vec write");
    }
    fs::write(path, out)?;
    Ok(())
}

/// Parse a metrics CSV back into a profile (used by the `plot` subcommand).
pub fn read_metrics_csv(path: &Path) -> Result<StenosisProfile> {
    let parse_err = |reason: &str| Error::Parse {
        path: path.to_path_buf(),
        reason: reason.to_string(),
    };
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("slice,vessel_count,lumen_px,calc_px,stenosis,calc_intensity_sum") => {}
        _ => return Err(parse_err("missing or wrong header")),
    }
    let mut per_slice = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(parse_err(&format!("expected 6 fields, got {}", fields.len())));
        }
        let bad = |what: &str| parse_err(&format!("bad {what}: {line}"));
        per_slice.push(SliceMetrics {
            slice_index: fields[0].parse().map_err(|_| bad("slice"))?,
            vessel_count: fields[1].parse().map_err(|_| bad("vessel_count"))?,
            lumen_px: fields[2].parse().map_err(|_| bad("lumen_px"))?,
            calc_px: fields[3].parse().map_err(|_| bad("calc_px"))?,
            stenosis: fields[4].parse().map_err(|_| bad("stenosis"))?,
            calc_intensity_sum: fields[5].parse().map_err(|_| bad("calc_intensity_sum"))?,
        });
    }
    if per_slice.is_empty() {
        return Err(parse_err("no data rows"));
    }
    Ok(StenosisProfile { per_slice })
}
