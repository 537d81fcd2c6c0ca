//! Stage II: seed arteries in slice 0 and propagate them caudally by pixel
//! overlap, recording branch and merge events along the way.
//!
//! Stage I work for all slices is precomputed (optionally in parallel);
//! propagation itself is inherently sequential because each slice depends
//! on the previous one. The precomputation never changes the result.

use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};
use crate::segment::{
    label_components, passes_ovalar, shape_metrics, threshold_slice, Component, OvalCriteria,
    ShapeMetrics,
};
use crate::volume::Volume;

/// Parameters steering seeding and propagation.
#[derive(Clone, Debug)]
pub struct TrackParams {
    /// Inclusive Stage I intensity window, applied to every slice.
    pub window: (u16, u16),
    pub criteria: OvalCriteria,
    /// Minimum area for a slice-0 seed; keeps speckle from starting tracks.
    pub seed_area_min: u64,
    /// Restrict seeding to the single component containing this pixel.
    pub seed_point: Option<(u32, u32)>,
    /// Minimum shared pixel count with a previous-slice artery; values
    /// below 1 are treated as 1, since acceptance always requires overlap.
    /// The default of 1 tolerates oblique vessels shifting between thick
    /// slices.
    pub overlap_min: u64,
    /// Number of extra slices a childless node stays eligible as an overlap
    /// source. 0 disables ghost tracking.
    pub gap_tolerance: u32,
}

impl Default for TrackParams {
    fn default() -> Self {
        Self {
            window: (600, 4000),
            criteria: OvalCriteria::default(),
            seed_area_min: 100,
            seed_point: None,
            overlap_min: 1,
            gap_tolerance: 0,
        }
    }
}

/// One accepted artery cross-section.
#[derive(Clone, Debug)]
pub struct TrackNode {
    /// Global ordinal, also the node's index in [`VesselTree::nodes`].
    pub node_id: u32,
    pub slice_index: u32,
    pub component: Component,
    pub metrics: ShapeMetrics,
    /// Overlapping nodes in the previously processed slice; empty only for
    /// seeds.
    pub parents: Vec<u32>,
    /// The parent with maximal overlap; ties go to the smaller component id.
    pub primary_parent: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BranchEvent {
    pub parent: u32,
    pub children: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MergeEvent {
    pub child: u32,
    pub parents: Vec<u32>,
}

/// The tracked artery forest for a whole volume.
#[derive(Clone, Debug, Default)]
pub struct VesselTree {
    nodes: Vec<TrackNode>,
    slice_ranges: Vec<std::ops::Range<usize>>,
    pub per_slice_vessel_count: Vec<u32>,
    pub branch_events: Vec<BranchEvent>,
    pub merge_events: Vec<MergeEvent>,
}

impl VesselTree {
    pub fn nodes(&self) -> &[TrackNode] {
        &self.nodes
    }

    pub fn nodes_at(&self, slice: u32) -> &[TrackNode] {
        let r = &self.slice_ranges[slice as usize];
        &self.nodes[r.start..r.end]
    }

    pub fn depth(&self) -> u32 {
        self.slice_ranges.len() as u32
    }
}

/// Shared pixel count of two components at identical (x, y) positions.
/// Linear in the number of runs; both run lists are in raster order.
pub fn overlap_area(a: &Component, b: &Component) -> u64 {
    let mut total = 0u64;
    let (mut i, mut j) = (0usize, 0usize);
    while i < a.runs.len() && j < b.runs.len() {
        let (ra, rb) = (&a.runs[i], &b.runs[j]);
        if ra.y != rb.y {
            if ra.y < rb.y {
                i += 1;
            } else {
                j += 1;
            }
            continue;
        }
        let lo = ra.x0.max(rb.x0);
        let hi = ra.x1.min(rb.x1);
        if lo <= hi {
            total += (hi - lo + 1) as u64;
        }
        // Advance whichever run ends first.
        if ra.x1 <= rb.x1 {
            i += 1;
        } else {
            j += 1;
        }
    }
    total
}

fn component_contains(c: &Component, p: (u32, u32)) -> bool {
    c.runs
        .iter()
        .any(|r| r.y == p.1 && r.x0 <= p.0 && p.0 <= r.x1)
}

/// Run Stage I on every slice: threshold, label, shape metrics.
pub fn stage_one_with(
    volume: &Volume,
    window: (u16, u16),
    mode: ExecMode,
) -> Result<Vec<Vec<(Component, ShapeMetrics)>>> {
    let (lo, hi) = window;
    if lo > hi {
        return Err(Error::InvalidWindow { lo, hi });
    }
    Ok(exec::map_indices(volume.depth() as usize, mode, |k| {
        let mask = threshold_slice(
            volume.slice(k as u32),
            volume.width(),
            volume.height(),
            lo,
            hi,
        )
        .expect("window validated above");
        label_components(&mask, k as u32)
            .into_iter()
            .map(|c| {
                let m = shape_metrics(&c);
                (c, m)
            })
            .collect()
    }))
}

/// Pick the slice-0 components that start tracks: ovalar, at least
/// `seed_area_min` pixels, and containing the seed point when one is given.
pub fn seed_arteries(
    candidates: &[(Component, ShapeMetrics)],
    criteria: &OvalCriteria,
    seed_area_min: u64,
    seed_point: Option<(u32, u32)>,
) -> Result<Vec<TrackNode>> {
    let mut seeds = Vec::new();
    for (c, m) in candidates {
        if !passes_ovalar(m, criteria) || c.area < seed_area_min {
            continue;
        }
        if let Some(p) = seed_point {
            if !component_contains(c, p) {
                continue;
            }
        }
        seeds.push(TrackNode {
            node_id: seeds.len() as u32,
            slice_index: c.slice_index,
            component: c.clone(),
            metrics: *m,
            parents: Vec::new(),
            primary_parent: None,
        });
    }
    if seeds.is_empty() {
        return Err(Error::SeedNotFound);
    }
    Ok(seeds)
}

/// Accept the slice-k candidates that are ovalar and overlap at least one
/// source node by `overlap_min` pixels. Node ids continue from
/// `next_node_id` in candidate order.
pub fn propagate_slice(
    sources: &[TrackNode],
    candidates: &[(Component, ShapeMetrics)],
    criteria: &OvalCriteria,
    overlap_min: u64,
    next_node_id: u32,
) -> (Vec<TrackNode>, Vec<BranchEvent>, Vec<MergeEvent>) {
    let mut accepted: Vec<TrackNode> = Vec::new();
    let mut merges = Vec::new();

    for (c, m) in candidates {
        if !passes_ovalar(m, criteria) {
            continue;
        }
        let mut parents = Vec::new();
        let mut primary: Option<(u64, u32, u32)> = None; // (overlap, comp id, node id)
        for src in sources {
            let shared = overlap_area(c, &src.component);
            if shared < overlap_min.max(1) {
                continue;
            }
            parents.push(src.node_id);
            let better = match primary {
                None => true,
                Some((best_shared, best_comp, _)) => {
                    shared > best_shared
                        || (shared == best_shared && src.component.id < best_comp)
                }
            };
            if better {
                primary = Some((shared, src.component.id, src.node_id));
            }
        }
        if parents.is_empty() {
            continue;
        }
        let node_id = next_node_id + accepted.len() as u32;
        if parents.len() >= 2 {
            merges.push(MergeEvent {
                child: node_id,
                parents: parents.clone(),
            });
        }
        accepted.push(TrackNode {
            node_id,
            slice_index: c.slice_index,
            component: c.clone(),
            metrics: *m,
            parents,
            primary_parent: primary.map(|(_, _, id)| id),
        });
    }

    let mut branches = Vec::new();
    for src in sources {
        let children: Vec<u32> = accepted
            .iter()
            .filter(|n| n.parents.contains(&src.node_id))
            .map(|n| n.node_id)
            .collect();
        if children.len() >= 2 {
            branches.push(BranchEvent {
                parent: src.node_id,
                children,
            });
        }
    }
    (accepted, branches, merges)
}

/// Track the whole volume: seed in slice 0, then propagate cranial to
/// caudal. `per_slice_vessel_count` is 0 wherever no node survives.
pub fn track_volume_with(
    volume: &Volume,
    params: &TrackParams,
    mode: ExecMode,
) -> Result<VesselTree> {
    let stage_one = stage_one_with(volume, params.window, mode)?;
    let depth = volume.depth() as usize;

    let mut tree = VesselTree::default();
    let seeds = seed_arteries(
        &stage_one[0],
        &params.criteria,
        params.seed_area_min,
        params.seed_point,
    )?;

    // Active overlap sources, each with the number of propagation steps it
    // has gone without a child.
    let mut active: Vec<(TrackNode, u32)> = seeds.iter().map(|n| (n.clone(), 0)).collect();
    tree.per_slice_vessel_count.push(seeds.len() as u32);
    tree.slice_ranges.push(0..seeds.len());
    tree.nodes = seeds;

    for candidates in stage_one.iter().take(depth).skip(1) {
        let sources: Vec<TrackNode> = active.iter().map(|(n, _)| n.clone()).collect();
        let next_id = tree.nodes.len() as u32;
        let (accepted, branches, merges) = propagate_slice(
            &sources,
            candidates,
            &params.criteria,
            params.overlap_min,
            next_id,
        );
        tree.branch_events.extend(branches);
        tree.merge_events.extend(merges);

        let matched: std::collections::HashSet<u32> = accepted
            .iter()
            .flat_map(|n| n.parents.iter().copied())
            .collect();
        let mut next_active: Vec<(TrackNode, u32)> = Vec::new();
        for (node, misses) in active {
            if matched.contains(&node.node_id) {
                continue; // lineage continues through its children
            }
            if misses < params.gap_tolerance {
                next_active.push((node, misses + 1));
            }
        }
        next_active.extend(accepted.iter().map(|n| (n.clone(), 0)));
        active = next_active;

        let start = tree.nodes.len();
        tree.per_slice_vessel_count.push(accepted.len() as u32);
        tree.nodes.extend(accepted);
        tree.slice_ranges.push(start..tree.nodes.len());
    }
    Ok(tree)
}

/// [`track_volume_with`] under the crate's default execution mode.
pub fn track_volume(volume: &Volume, params: &TrackParams) -> Result<VesselTree> {
    track_volume_with(volume, params, ExecMode::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segment::BinaryMask;

    /// Build a two-slice volume from mask-like intensity rows: 0 stays
    /// background, 1 becomes an in-window value.
    fn volume_from_rows(slices: &[&[&[u8]]]) -> Volume {
        let h = slices[0].len();
        let w = slices[0][0].len();
        let mut data = Vec::new();
        for s in slices {
            for row in *s {
                for &v in *row {
                    data.push(if v != 0 { 1200 } else { 0 });
                }
            }
        }
        Volume::new(
            w as u32,
            h as u32,
            slices.len() as u32,
            [1.0, 1.0, 1.0],
            None,
            data,
        )
        .unwrap()
    }

    fn components_of(volume: &Volume, k: u32) -> Vec<(Component, ShapeMetrics)> {
        stage_one_with(volume, (600, 4000), ExecMode::Sequential).unwrap()[k as usize].clone()
    }

    fn loose_params() -> TrackParams {
        TrackParams {
            criteria: OvalCriteria {
                area_min: 1,
                area_max: 10_000,
                circularity_min: 0.0,
                solidity_min: 0.0,
                eccentricity_max: 1.0,
            },
            seed_area_min: 1,
            ..TrackParams::default()
        }
    }

    #[test]
    fn overlap_counts_shared_pixels() {
        let mut a = BinaryMask::new(8, 8);
        let mut b = BinaryMask::new(8, 8);
        for x in 0..5 {
            a.set(x, 2, true);
        }
        for x in 3..8 {
            b.set(x, 2, true);
        }
        b.set(0, 5, true);
        let ca = &label_components(&a, 0)[0];
        let cb = &label_components(&b, 1)[0];
        assert_eq!(overlap_area(ca, cb), 2); // x = 3, 4
        assert_eq!(overlap_area(cb, ca), 2);
    }

    #[test]
    fn overlap_zero_for_disjoint() {
        let mut a = BinaryMask::new(8, 8);
        let mut b = BinaryMask::new(8, 8);
        a.set(1, 1, true);
        b.set(2, 2, true);
        let ca = &label_components(&a, 0)[0];
        let cb = &label_components(&b, 1)[0];
        assert_eq!(overlap_area(ca, cb), 0);
    }

    #[test]
    fn seed_requires_passing_component() {
        let vol = volume_from_rows(&[&[&[0, 0], &[0, 0]]]);
        let params = loose_params();
        assert!(matches!(
            track_volume(&vol, &params),
            Err(Error::SeedNotFound)
        ));
    }

    #[test]
    fn seed_area_minimum_filters() {
        // A 3x3 block (area 9) and a single pixel; seed_area_min keeps only
        // the block.
        let slice: &[&[u8]] = &[
            &[1, 1, 1, 0, 0, 0],
            &[1, 1, 1, 0, 0, 1],
            &[1, 1, 1, 0, 0, 0],
        ];
        let vol = volume_from_rows(&[slice]);
        let candidates = components_of(&vol, 0);
        let seeds = seed_arteries(
            &candidates,
            &loose_params().criteria,
            5,
            None,
        )
        .unwrap();
        assert_eq!(seeds.len(), 1);
        assert_eq!(seeds[0].component.area, 9);
    }

    #[test]
    fn seed_point_restricts_to_one_component() {
        let slice: &[&[u8]] = &[
            &[1, 1, 0, 1, 1],
            &[1, 1, 0, 1, 1],
        ];
        let vol = volume_from_rows(&[slice]);
        let candidates = components_of(&vol, 0);
        let seeds =
            seed_arteries(&candidates, &loose_params().criteria, 1, Some((3, 0))).unwrap();
        assert_eq!(seeds.len(), 1);
        assert_eq!(seeds[0].component.bbox.0, 3);
    }

    #[test]
    fn candidate_with_overlap_is_accepted() {
        let s0: &[&[u8]] = &[&[1, 1, 1, 1, 1], &[1, 1, 1, 1, 1]];
        let s1: &[&[u8]] = &[&[0, 0, 1, 1, 1], &[0, 0, 1, 1, 1]];
        let vol = volume_from_rows(&[s0, s1]);
        let tree = track_volume(&vol, &loose_params()).unwrap();
        assert_eq!(tree.per_slice_vessel_count, vec![1, 1]);
        let child = &tree.nodes_at(1)[0];
        assert_eq!(child.parents, vec![0]);
        assert_eq!(child.primary_parent, Some(0));
    }

    #[test]
    fn candidate_without_overlap_is_rejected() {
        let s0: &[&[u8]] = &[&[1, 1, 0, 0, 0], &[1, 1, 0, 0, 0]];
        let s1: &[&[u8]] = &[&[0, 0, 0, 1, 1], &[0, 0, 0, 1, 1]];
        let vol = volume_from_rows(&[s0, s1]);
        let tree = track_volume(&vol, &loose_params()).unwrap();
        assert_eq!(tree.per_slice_vessel_count, vec![1, 0]);
    }

    #[test]
    fn bifurcation_records_branch_event() {
        let s0: &[&[u8]] = &[&[1, 1, 1, 1, 1, 1, 1]];
        let s1: &[&[u8]] = &[&[1, 1, 0, 0, 0, 1, 1]];
        let vol = volume_from_rows(&[s0, s1]);
        let tree = track_volume(&vol, &loose_params()).unwrap();
        assert_eq!(tree.per_slice_vessel_count, vec![1, 2]);
        assert_eq!(tree.branch_events.len(), 1);
        assert_eq!(tree.branch_events[0].parent, 0);
        assert_eq!(tree.branch_events[0].children, vec![1, 2]);
        assert!(tree.merge_events.is_empty());
    }

    #[test]
    fn merge_records_parents_and_counts_once() {
        let s0: &[&[u8]] = &[&[1, 1, 0, 0, 0, 1, 1]];
        let s1: &[&[u8]] = &[&[1, 1, 1, 1, 1, 1, 1]];
        let vol = volume_from_rows(&[s0, s1]);
        let tree = track_volume(&vol, &loose_params()).unwrap();
        assert_eq!(tree.per_slice_vessel_count, vec![2, 1]);
        assert_eq!(tree.merge_events.len(), 1);
        assert_eq!(tree.merge_events[0].parents, vec![0, 1]);
    }

    #[test]
    fn gap_tolerance_bridges_dropouts() {
        let full: &[&[u8]] = &[&[1, 1, 1], &[1, 1, 1], &[1, 1, 1]];
        let empty: &[&[u8]] = &[&[0, 0, 0], &[0, 0, 0], &[0, 0, 0]];
        let vol = volume_from_rows(&[full, empty, full]);

        let strict = track_volume(&vol, &loose_params()).unwrap();
        assert_eq!(strict.per_slice_vessel_count, vec![1, 0, 0]);

        let mut bridged = loose_params();
        bridged.gap_tolerance = 1;
        let tree = track_volume(&vol, &bridged).unwrap();
        assert_eq!(tree.per_slice_vessel_count, vec![1, 0, 1]);
        // The revived node's parent is the slice-0 ghost.
        assert_eq!(tree.nodes_at(2)[0].parents, vec![0]);
    }

    #[test]
    fn overlap_minimum_is_respected() {
        // One shared pixel between consecutive slices.
        let s0: &[&[u8]] = &[&[1, 1, 1, 0, 0]];
        let s1: &[&[u8]] = &[&[0, 0, 1, 1, 1]];
        let vol = volume_from_rows(&[s0, s1]);

        let mut params = loose_params();
        params.overlap_min = 1;
        let tree = track_volume(&vol, &params).unwrap();
        assert_eq!(tree.per_slice_vessel_count, vec![1, 1]);

        params.overlap_min = 2;
        let tree = track_volume(&vol, &params).unwrap();
        assert_eq!(tree.per_slice_vessel_count, vec![1, 0]);
    }

    #[test]
    fn tracked_pixels_never_exceed_threshold_mask() {
        let (vol, _) = crate::phantom::generate(&crate::phantom::paper_iliac()).unwrap();
        let params = TrackParams::default();
        let tree = track_volume(&vol, &params).unwrap();
        for node in tree.nodes() {
            for run in &node.component.runs {
                for x in run.x0..=run.x1 {
                    let v = vol.get(x, run.y, node.slice_index);
                    assert!((600..=4000).contains(&v));
                }
            }
            // Non-seed nodes overlap their primary parent by >= overlap_min.
            if let Some(parent_id) = node.primary_parent {
                let parent = &tree.nodes()[parent_id as usize];
                assert!(
                    overlap_area(&node.component, &parent.component) >= params.overlap_min,
                    "node {} under-overlaps its primary parent",
                    node.node_id
                );
            } else {
                assert_eq!(node.slice_index, 0);
                assert!(node.parents.is_empty());
            }
        }
    }

    #[test]
    fn raising_overlap_min_never_raises_counts() {
        let mut rng = crate::rng::Xoshiro256StarStar::seed_from_u64(17);
        for _ in 0..10 {
            let mut data = Vec::new();
            for _ in 0..5 * 16 * 16 {
                data.push(if rng.next_f64() < 0.45 { 1200u16 } else { 0 });
            }
            let vol = Volume::new(16, 16, 5, [1.0, 1.0, 1.0], None, data).unwrap();
            let mut prev: Option<Vec<u32>> = None;
            for overlap_min in [1u64, 2, 4, 8] {
                let mut params = loose_params();
                params.overlap_min = overlap_min;
                let counts = match track_volume(&vol, &params) {
                    Ok(tree) => tree.per_slice_vessel_count,
                    Err(Error::SeedNotFound) => break,
                    Err(e) => panic!("{e}"),
                };
                if let Some(p) = &prev {
                    for (a, b) in p.iter().zip(&counts) {
                        assert!(b <= a, "counts rose from {p:?} to {counts:?}");
                    }
                }
                prev = Some(counts);
            }
        }
    }

    #[test]
    fn parallel_precompute_matches_sequential() {
        let (vol, _) = crate::phantom::generate(&crate::phantom::paper_iliac()).unwrap();
        let params = TrackParams::default();
        let seq = track_volume_with(&vol, &params, ExecMode::Sequential).unwrap();
        let par = track_volume_with(&vol, &params, ExecMode::Parallel).unwrap();
        assert_eq!(seq.per_slice_vessel_count, par.per_slice_vessel_count);
        assert_eq!(seq.nodes().len(), par.nodes().len());
        for (a, b) in seq.nodes().iter().zip(par.nodes()) {
            assert_eq!(a.node_id, b.node_id);
            assert_eq!(a.component, b.component);
            assert_eq!(a.parents, b.parents);
        }
    }
}
