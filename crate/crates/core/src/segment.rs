//! Stage I: binarize a slice by an intensity window, label connected
//! components, and score each component's shape against ovalar criteria.
//!
//! Components are 8-connected (4-connectivity fragments noisy vessel rims)
//! and stored as run-length encoded row intervals, which keeps the later
//! overlap tests linear in the number of runs.

use crate::error::{Error, Result};

/// One row interval of set pixels, inclusive on both ends.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Run {
    pub y: u32,
    pub x0: u32,
    pub x1: u32,
}

impl Run {
    /// Pixel count; runs are nonempty by construction.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> u64 {
        (self.x1 - self.x0 + 1) as u64
    }
}

/// Per-slice boolean mask, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    pub width: u32,
    pub height: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        self.bits[y as usize * self.width as usize + x as usize] = value;
    }

    pub fn popcount(&self) -> u64 {
        self.bits.iter().filter(|&&b| b).count() as u64
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
}

/// A maximal 8-connected cluster of set pixels in one slice.
#[derive(Clone, Debug, PartialEq)]
pub struct Component {
    /// Ordinal in first-encounter raster-scan order, starting at 0.
    pub id: u32,
    pub slice_index: u32,
    /// Row runs in raster order.
    pub runs: Vec<Run>,
    pub area: u64,
    /// (x0, y0, x1, y1), inclusive.
    pub bbox: (u32, u32, u32, u32),
    pub centroid: (f64, f64),
}

/// Shape descriptors used by the ovalar filter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShapeMetrics {
    pub area: u64,
    /// Outer-boundary chain length from Moore-neighbor tracing; diagonal
    /// steps weigh sqrt(2). A single pixel is defined to have perimeter 4.
    pub perimeter: f64,
    /// 4*pi*A/P^2; can exceed 1 for small digital shapes.
    pub circularity: f64,
    /// Area over convex-hull area (hull taken over pixel squares), in (0, 1].
    pub solidity: f64,
    /// sqrt(1 - l2/l1) from second central moments; 0 when l1 = 0.
    pub eccentricity: f64,
}

/// Thresholds the ovalar filter tests against.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OvalCriteria {
    pub area_min: u64,
    pub area_max: u64,
    pub circularity_min: f64,
    pub solidity_min: f64,
    pub eccentricity_max: f64,
}

impl Default for OvalCriteria {
    fn default() -> Self {
        // Sized so both a radius-18 aorta and a radius-7 femoral pass while
        // thin bone edges and streaks fail.
        Self {
            area_min: 20,
            area_max: 10_000,
            circularity_min: 0.40,
            solidity_min: 0.85,
            eccentricity_max: 0.95,
        }
    }
}

/// Keep pixels whose intensity lies in `[lo, hi]`, inclusive on both ends
/// (inclusivity makes window-widening exactly monotone).
pub fn threshold_slice(
    samples: &[u16],
    width: u32,
    height: u32,
    lo: u16,
    hi: u16,
) -> Result<BinaryMask> {
    if lo > hi {
        return Err(Error::InvalidWindow { lo, hi });
    }
    debug_assert_eq!(samples.len(), width as usize * height as usize);
    let bits = samples.iter().map(|&v| v >= lo && v <= hi).collect();
    Ok(BinaryMask {
        width,
        height,
        bits,
    })
}

struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    fn new() -> Self {
        Self { parent: Vec::new() }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi as usize] = lo;
        }
    }
}

/// Label maximal 8-connected clusters of set pixels.
///
/// Classic two-pass algorithm: provisional labels plus union-find in the
/// first pass, resolution and run assembly in the second. Component ids
/// follow first-encounter raster-scan order starting at 0.
pub fn label_components(mask: &BinaryMask, slice_index: u32) -> Vec<Component> {
    let (w, h) = (mask.width as usize, mask.height as usize);
    let bits = mask.bits();
    let mut labels: Vec<u32> = vec![u32::MAX; w * h];
    let mut uf = UnionFind::new();

    for y in 0..h {
        for x in 0..w {
            let idx = y * w + x;
            if !bits[idx] {
                continue;
            }
            // Scanned neighbors under 8-connectivity: W, NW, N, NE.
            let mut best = u32::MAX;
            let mut neighbors = [u32::MAX; 4];
            let mut n = 0;
            if x > 0 && bits[idx - 1] {
                neighbors[n] = labels[idx - 1];
                n += 1;
            }
            if y > 0 {
                let up = idx - w;
                if x > 0 && bits[up - 1] {
                    neighbors[n] = labels[up - 1];
                    n += 1;
                }
                if bits[up] {
                    neighbors[n] = labels[up];
                    n += 1;
                }
                if x + 1 < w && bits[up + 1] {
                    neighbors[n] = labels[up + 1];
                    n += 1;
                }
            }
            for &l in &neighbors[..n] {
                best = best.min(l);
            }
            if best == u32::MAX {
                labels[idx] = uf.make();
            } else {
                labels[idx] = best;
                for &l in &neighbors[..n] {
                    uf.union(best, l);
                }
            }
        }
    }

    // Second pass: roots -> final ids in first-encounter order, gathering
    // maximal row intervals (one interval always belongs to one component).
    let mut final_id: Vec<u32> = vec![u32::MAX; uf.parent.len()];
    let mut components: Vec<Component> = Vec::new();
    let mut sum_x: Vec<u64> = Vec::new();
    let mut sum_y: Vec<u64> = Vec::new();

    for y in 0..h {
        let mut x = 0;
        while x < w {
            if !bits[y * w + x] {
                x += 1;
                continue;
            }
            let x0 = x;
            while x < w && bits[y * w + x] {
                x += 1;
            }
            let x1 = x - 1;
            let root = uf.find(labels[y * w + x0]);
            let id = if final_id[root as usize] == u32::MAX {
                let id = components.len() as u32;
                final_id[root as usize] = id;
                components.push(Component {
                    id,
                    slice_index,
                    runs: Vec::new(),
                    area: 0,
                    bbox: (x0 as u32, y as u32, x1 as u32, y as u32),
                    centroid: (0.0, 0.0),
                });
                sum_x.push(0);
                sum_y.push(0);
                id
            } else {
                final_id[root as usize]
            };
            let c = &mut components[id as usize];
            let run = Run {
                y: y as u32,
                x0: x0 as u32,
                x1: x1 as u32,
            };
            let len = run.len();
            c.runs.push(run);
            c.area += len;
            c.bbox.0 = c.bbox.0.min(run.x0);
            c.bbox.1 = c.bbox.1.min(run.y);
            c.bbox.2 = c.bbox.2.max(run.x1);
            c.bbox.3 = c.bbox.3.max(run.y);
            // Arithmetic-series sum of x over the run; always an integer.
            sum_x[id as usize] += (run.x0 as u64 + run.x1 as u64) * len / 2;
            sum_y[id as usize] += run.y as u64 * len;
        }
    }

    for c in &mut components {
        c.centroid = (
            sum_x[c.id as usize] as f64 / c.area as f64,
            sum_y[c.id as usize] as f64 / c.area as f64,
        );
    }
    components
}

/// Moore neighborhood in clockwise order starting at west.
const MOORE: [(i32, i32); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

/// Chain length of the outer boundary (holes ignored). Traces the Moore
/// neighborhood clockwise from the raster-first pixel and stops when the
/// first move out of the start pixel repeats.
fn outer_contour_length(grid: &[bool], gw: i32, start: (i32, i32)) -> f64 {
    let at = |x: i32, y: i32| grid[(y * gw + x) as usize];

    // Initial backtrack position is the (background) west neighbor.
    let mut current = start;
    let mut back_dir = 0usize;
    let mut first_move: Option<((i32, i32), usize)> = None;
    let mut axial = 0u64;
    let mut diagonal = 0u64;

    // Safety cap: a boundary tour never exceeds 4 moves per boundary pixel.
    let cap = 4 * grid.iter().filter(|&&b| b).count() as u64 + 8;
    let mut moves = 0u64;

    loop {
        let mut advanced = false;
        for step in 0..8 {
            let dir = (back_dir + step + 1) % 8;
            let (dx, dy) = MOORE[dir];
            let next = (current.0 + dx, current.1 + dy);
            if at(next.0, next.1) {
                if first_move == Some((current, dir)) {
                    return axial as f64 + diagonal as f64 * std::f64::consts::SQRT_2;
                }
                if first_move.is_none() {
                    first_move = Some((current, dir));
                }
                if dx != 0 && dy != 0 {
                    diagonal += 1;
                } else {
                    axial += 1;
                }
                // New backtrack: the neighbor scanned just before the hit,
                // expressed as a direction from the new current pixel.
                let (px, py) = MOORE[(dir + 7) % 8];
                let prev = (current.0 + px, current.1 + py);
                back_dir = MOORE
                    .iter()
                    .position(|&(mx, my)| (next.0 + mx, next.1 + my) == prev)
                    .expect("consecutive moore neighbors are adjacent");
                current = next;
                advanced = true;
                break;
            }
        }
        if !advanced {
            // Isolated pixel: perimeter defined as 4.
            return 4.0;
        }
        moves += 1;
        if moves > cap {
            debug_assert!(false, "contour trace exceeded cap");
            return axial as f64 + diagonal as f64 * std::f64::consts::SQRT_2;
        }
    }
}

/// Convex hull area over the corner points of the component's pixel squares
/// (pixel (x, y) occupies [x, x+1) x [y, y+1)). Using squares rather than
/// centers keeps solidity <= 1 exactly.
fn hull_area(runs: &[Run]) -> f64 {
    let mut pts: Vec<(i64, i64)> = Vec::with_capacity(runs.len() * 4);
    for r in runs {
        let (x0, x1, y) = (r.x0 as i64, r.x1 as i64 + 1, r.y as i64);
        pts.push((x0, y));
        pts.push((x1, y));
        pts.push((x0, y + 1));
        pts.push((x1, y + 1));
    }
    pts.sort_unstable();
    pts.dedup();

    // Andrew's monotone chain, lower and upper halves.
    let cross = |o: (i64, i64), a: (i64, i64), b: (i64, i64)| -> i64 {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut lower: Vec<(i64, i64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(i64, i64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    let mut hull = lower;
    hull.extend(upper);
    if hull.len() < 3 {
        return 0.0;
    }

    // Shoelace; hull is in counter-clockwise order (y-down axis flips sign,
    // so take the absolute value).
    let mut twice_area = 0i64;
    for i in 0..hull.len() {
        let (x0, y0) = hull[i];
        let (x1, y1) = hull[(i + 1) % hull.len()];
        twice_area += x0 * y1 - x1 * y0;
    }
    (twice_area.abs() as f64) / 2.0
}

/// Compute the shape descriptors of one component.
pub fn shape_metrics(c: &Component) -> ShapeMetrics {
    assert!(!c.runs.is_empty(), "component must be nonempty");
    let area = c.area;

    // Local padded bitmap for contour tracing.
    let (bx0, by0, bx1, by1) = c.bbox;
    let gw = (bx1 - bx0 + 3) as i32;
    let gh = (by1 - by0 + 3) as i32;
    let mut grid = vec![false; (gw * gh) as usize];
    for r in &c.runs {
        let ly = (r.y - by0 + 1) as i32;
        for x in r.x0..=r.x1 {
            grid[(ly * gw + (x - bx0 + 1) as i32) as usize] = true;
        }
    }
    let first = &c.runs[0];
    let start = (
        (first.x0 - bx0 + 1) as i32,
        (first.y - by0 + 1) as i32,
    );
    let perimeter = outer_contour_length(&grid, gw, start);
    let circularity = 4.0 * std::f64::consts::PI * area as f64 / (perimeter * perimeter);

    // Exact integer raw moments over pixel centers, in bbox-local
    // coordinates so the result is bit-identical under translation.
    let sq_sum = |n: u64| -> u64 { n * (n + 1) * (2 * n + 1) / 6 };
    let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0u64, 0u64, 0u64, 0u64, 0u64);
    for r in &c.runs {
        let len = r.len();
        let (x0, x1, y) = ((r.x0 - bx0) as u64, (r.x1 - bx0) as u64, (r.y - by0) as u64);
        let row_x = (x0 + x1) * len / 2;
        sx += row_x;
        sy += y * len;
        sxx += sq_sum(x1) - if x0 > 0 { sq_sum(x0 - 1) } else { 0 };
        syy += y * y * len;
        sxy += y * row_x;
    }
    let a = area as f64;
    let (cx, cy) = (sx as f64 / a, sy as f64 / a);
    let mu20 = sxx as f64 - a * cx * cx;
    let mu02 = syy as f64 - a * cy * cy;
    let mu11 = sxy as f64 - a * cx * cy;
    let trace = mu20 + mu02;
    let det_term = ((mu20 - mu02) * (mu20 - mu02) + 4.0 * mu11 * mu11).sqrt();
    let l1 = (trace + det_term) / 2.0;
    let l2 = ((trace - det_term) / 2.0).max(0.0);
    let eccentricity = if l1 <= 0.0 {
        0.0
    } else {
        (1.0 - l2 / l1).max(0.0).sqrt()
    };

    let hull = hull_area(&c.runs);
    let solidity = if hull > 0.0 { (area as f64 / hull).min(1.0) } else { 1.0 };

    ShapeMetrics {
        area,
        perimeter,
        circularity,
        solidity,
        eccentricity,
    }
}

/// The Stage I shape filter: a component survives iff its area lies in
/// [area_min, area_max], it is round enough, solid enough, and not too
/// elongated.
pub fn passes_ovalar(m: &ShapeMetrics, crit: &OvalCriteria) -> bool {
    m.area >= crit.area_min
        && m.area <= crit.area_max
        && m.circularity >= crit.circularity_min
        && m.solidity >= crit.solidity_min
        && m.eccentricity <= crit.eccentricity_max
}
