//! Level-set extraction by marching squares, uniform arc-length resampling
//! and unit normals.
//!
//! Orientation convention: every path is traversed with the excursion set
//! `{X > u}` on its left, so the normal (tangent turned by +π/2) points into
//! the excursion, i.e. along the gradient. Closed paths around an excursion
//! component run counter-clockwise, closed paths around a hole clockwise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{BinaryMask, FieldGrid};

/// Relative size of the nudge applied to grid values that hit the level exactly.
pub const LEVEL_NUDGE: f64 = 1e-12;

/// Polygonal level-set component. Closed paths do not repeat their first vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourPath {
    pub vertices: Vec<[f64; 2]>,
    pub closed: bool,
}

impl ContourPath {
    /// Number of edges: `n` for closed paths, `n − 1` for open ones.
    pub fn edge_count(&self) -> usize {
        match (self.closed, self.vertices.len()) {
            (_, 0 | 1) => 0,
            (true, n) => n,
            (false, n) => n - 1,
        }
    }

    fn edge(&self, k: usize) -> ([f64; 2], [f64; 2]) {
        let n = self.vertices.len();
        (self.vertices[k], self.vertices[(k + 1) % n])
    }

    pub fn length(&self) -> f64 {
        (0..self.edge_count()).map(|k| dist(self.edge(k).0, self.edge(k).1)).sum()
    }

    /// Signed area by the shoelace formula (closed paths; positive when counter-clockwise).
    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        0.5 * (0..n)
            .map(|k| {
                let (p, q) = (self.vertices[k], self.vertices[(k + 1) % n]);
                p[0] * q[1] - q[0] * p[1]
            })
            .sum::<f64>()
    }
}

/// A resampled point with its outward (gradient-side) unit normal and arc-length weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourPoint {
    pub position: [f64; 2],
    pub normal: [f64; 2],
    pub path_index: usize,
    pub seg_length: f64,
}

/// Resampled level set. Points of path `p` occupy `points[path_offsets[p]..path_offsets[p + 1]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourSet {
    pub paths: Vec<ContourPath>,
    pub points: Vec<ContourPoint>,
    pub path_offsets: Vec<usize>,
    pub total_length: f64,
    pub level: f64,
}

impl ContourSet {
    pub fn path_points(&self, p: usize) -> &[ContourPoint] {
        &self.points[self.path_offsets[p]..self.path_offsets[p + 1]]
    }

    /// Multiplies every arc-length weight by `factor` (the geometry is unchanged).
    pub fn scale_weights(&mut self, factor: f64) {
        for p in &mut self.points {
            p.seg_length *= factor;
        }
        self.total_length *= factor;
    }

    /// Reverses every normal.
    pub fn flip_normals(&mut self) {
        for p in &mut self.points {
            p.normal = [-p.normal[0], -p.normal[1]];
        }
    }
}

fn dist(p: [f64; 2], q: [f64; 2]) -> f64 {
    (q[0] - p[0]).hypot(q[1] - p[1])
}

/// All polylines of `{X = level}` with vertices linearly interpolated on cell edges.
///
/// Saddle cells are resolved by the cell-centre average: when it lies above
/// the level the two excursion corners are joined, so the excursion is
/// 8-connected and its complement 4-connected.
pub fn extract_level_set(grid: &FieldGrid, level: f64) -> Result<Vec<ContourPath>> {
    let (rows, cols) = (grid.rows(), grid.cols());
    if rows < 2 || cols < 2 {
        return Err(Error::DegenerateGrid { rows, cols, min: 2 });
    }
    if !level.is_finite() {
        return Err(Error::invalid("level must be finite"));
    }
    let nudge = LEVEL_NUDGE * level.abs().max(1.0);
    let values: Vec<f64> = grid.values().iter().map(|&v| if v == level { level + nudge } else { v }).collect();
    let above: Vec<bool> = values.iter().map(|&v| v > level).collect();
    let idx = |i: usize, j: usize| i * cols + j;

    // Edge keys: horizontal edge from (i, j) to (i, j+1) is 2·idx(i, j),
    // vertical edge from (i, j) to (i+1, j) is 2·idx(i, j) + 1.
    let edge_point = |key: usize| -> [f64; 2] {
        let node = key / 2;
        let (i, j) = (node / cols, node % cols);
        let (i2, j2) = if key.is_multiple_of(2) { (i, j + 1) } else { (i + 1, j) };
        let (v1, v2) = (values[idx(i, j)], values[idx(i2, j2)]);
        let t = (level - v1) / (v2 - v1);
        let p = grid.position(i, j);
        let q = grid.position(i2, j2);
        [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
    };

    let mut seg_start: Vec<u32> = Vec::new();
    let mut seg_end: Vec<u32> = Vec::new();
    for i in 0..rows - 1 {
        for j in 0..cols - 1 {
            // Corners counter-clockwise: bl, br, tr, tl.
            let c = [idx(i, j), idx(i, j + 1), idx(i + 1, j + 1), idx(i + 1, j)];
            let up = [above[c[0]], above[c[1]], above[c[2]], above[c[3]]];
            let n_up = up.iter().filter(|&&b| b).count();
            if n_up == 0 || n_up == 4 {
                continue;
            }
            let edges = [2 * c[0], 2 * c[1] + 1, 2 * c[3], 2 * c[0] + 1];
            // exits[k]/entries[k]: crossings on CCW edge k leaving/entering the excursion.
            let mut exits = [usize::MAX; 2];
            let mut entries = [usize::MAX; 2];
            let (mut ne, mut nn) = (0, 0);
            let mut order = [(0usize, false); 4];
            let mut no = 0;
            for k in 0..4 {
                let (a, b) = (up[k], up[(k + 1) % 4]);
                if a && !b {
                    exits[ne] = k;
                    ne += 1;
                    order[no] = (k, true);
                    no += 1;
                } else if !a && b {
                    entries[nn] = k;
                    nn += 1;
                    order[no] = (k, false);
                    no += 1;
                }
            }
            let mut push = |from: usize, to: usize| {
                seg_start.push(edges[from] as u32);
                seg_end.push(edges[to] as u32);
            };
            if ne == 1 {
                push(exits[0], entries[0]);
                continue;
            }
            let centre = 0.25 * c.iter().map(|&n| values[n]).sum::<f64>();
            let join_up = centre >= level;
            // Crossings alternate exit/entry in CCW order.
            for pos in 0..4 {
                let (k, is_exit) = order[pos];
                if !is_exit {
                    continue;
                }
                let partner = if join_up { order[(pos + 1) % 4].0 } else { order[(pos + 3) % 4].0 };
                push(k, partner);
            }
        }
    }

    let n_seg = seg_start.len();
    let mut start_of = vec![u32::MAX; 2 * rows * cols];
    let mut has_incoming = vec![false; 2 * rows * cols];
    for s in 0..n_seg {
        start_of[seg_start[s] as usize] = s as u32;
        has_incoming[seg_end[s] as usize] = true;
    }
    let mut used = vec![false; n_seg];
    let mut paths = Vec::new();

    let trace = |first: usize, used: &mut Vec<bool>| -> (Vec<usize>, bool) {
        let mut keys = vec![seg_start[first] as usize];
        let mut s = first;
        loop {
            used[s] = true;
            let end = seg_end[s] as usize;
            let next = start_of[end];
            if next == u32::MAX {
                keys.push(end);
                return (keys, false);
            }
            if used[next as usize] {
                return (keys, true);
            }
            keys.push(end);
            s = next as usize;
        }
    };

    let mut emit = |keys: Vec<usize>, closed: bool| {
        let mut vertices: Vec<[f64; 2]> = Vec::with_capacity(keys.len());
        for k in keys {
            let p = edge_point(k);
            if vertices.last() != Some(&p) {
                vertices.push(p);
            }
        }
        if closed && vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        let path = ContourPath { vertices, closed };
        if path.vertices.len() >= 2 && path.length() > 0.0 {
            paths.push(path);
        }
    };

    for s in 0..n_seg {
        if !used[s] && !has_incoming[seg_start[s] as usize] {
            let (keys, closed) = trace(s, &mut used);
            emit(keys, closed);
        }
    }
    for s in 0..n_seg {
        if !used[s] {
            let (keys, closed) = trace(s, &mut used);
            emit(keys, closed);
        }
    }
    Ok(paths)
}

/// Resamples `paths` uniformly in arc length with about `target_points`
/// points in total, allotted proportionally to path length (at least 3 per
/// closed and 2 per open path). Closed paths start at their first vertex;
/// open paths use the midpoints of equal sub-arcs, so every point carries
/// the same weight `spacing` within its path.
pub fn resample_and_normals(paths: &[ContourPath], target_points: usize, level: f64) -> Result<ContourSet> {
    if target_points < 10 {
        return Err(Error::invalid(format!("target_points must be >= 10, got {target_points}")));
    }
    let lengths: Vec<f64> = paths.iter().map(ContourPath::length).collect();
    let total: f64 = lengths.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("all contour paths have zero length".into()));
    }
    let mut points = Vec::with_capacity(target_points + 3 * paths.len());
    let mut offsets = Vec::with_capacity(paths.len() + 1);
    offsets.push(0);
    for (p, (path, &len)) in paths.iter().zip(&lengths).enumerate() {
        if len > 0.0 {
            let min_pts = if path.closed { 3 } else { 2 };
            let n = ((target_points as f64 * len / total).round() as usize).max(min_pts);
            resample_path(path, len, n, p, &mut points);
        }
        offsets.push(points.len());
    }
    Ok(ContourSet { paths: paths.to_vec(), points, path_offsets: offsets, total_length: total, level })
}

fn resample_path(path: &ContourPath, len: f64, n: usize, index: usize, out: &mut Vec<ContourPoint>) {
    let spacing = len / n as f64;
    let offset = if path.closed { 0.0 } else { 0.5 * spacing };
    let mut positions = Vec::with_capacity(n);
    let mut edge_dirs = Vec::with_capacity(n);
    let edges = path.edge_count();
    let mut k = 0;
    let mut edge_start = 0.0;
    let mut edge_len = dist(path.edge(0).0, path.edge(0).1);
    for m in 0..n {
        let s = offset + m as f64 * spacing;
        while s > edge_start + edge_len && k + 1 < edges {
            edge_start += edge_len;
            k += 1;
            let (a, b) = path.edge(k);
            edge_len = dist(a, b);
        }
        let (a, b) = path.edge(k);
        let t = if edge_len > 0.0 { ((s - edge_start) / edge_len).clamp(0.0, 1.0) } else { 0.0 };
        positions.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        edge_dirs.push([b[0] - a[0], b[1] - a[1]]);
    }
    for m in 0..n {
        let (prev, next) = if path.closed {
            (positions[(m + n - 1) % n], positions[(m + 1) % n])
        } else if m == 0 {
            (positions[0], positions[1.min(n - 1)])
        } else if m == n - 1 {
            (positions[m - 1], positions[m])
        } else {
            (positions[m - 1], positions[m + 1])
        };
        let mut t = [next[0] - prev[0], next[1] - prev[1]];
        let mut norm = t[0].hypot(t[1]);
        if !(norm > 0.0) {
            t = edge_dirs[m];
            norm = t[0].hypot(t[1]);
        }
        let t = [t[0] / norm, t[1] / norm];
        out.push(ContourPoint {
            position: positions[m],
            normal: [-t[1], t[0]],
            path_index: index,
            seg_length: spacing,
        });
    }
}

/// Boundary polylines of a binary excursion image: marching squares at 0.5
/// on the 0/1 indicator, after an optional Gaussian blur of standard
/// deviation `smoothing_radius` pixels.
pub fn extract_binary_boundary(mask: &BinaryMask, smoothing_radius: f64) -> Result<Vec<ContourPath>> {
    let count = mask.count();
    if count == 0 || count == mask.data().len() {
        return Err(Error::Degenerate("binary mask contains a single phase".into()));
    }
    if !(smoothing_radius >= 0.0 && smoothing_radius.is_finite()) {
        return Err(Error::invalid("smoothing radius must be >= 0"));
    }
    let mut indicator = mask.indicator();
    if smoothing_radius > 0.0 {
        indicator = gaussian_blur(&indicator, smoothing_radius);
    }
    extract_level_set(&indicator, 0.5)
}

/// Separable Gaussian blur (σ in pixels), truncated at 4σ, with edge values
/// replicated beyond the border.
pub fn gaussian_blur(grid: &FieldGrid, sigma: f64) -> FieldGrid {
    let radius = (4.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-radius..=radius).map(|k| (-0.5 * (k as f64 / sigma).powi(2)).exp()).collect();
    let ksum: f64 = kernel.iter().sum();
    let kernel: Vec<f64> = kernel.iter().map(|w| w / ksum).collect();
    let (rows, cols) = (grid.rows() as isize, grid.cols() as isize);
    let src = grid.values();
    let mut tmp = vec![0.0; src.len()];
    for i in 0..rows {
        for j in 0..cols {
            tmp[(i * cols + j) as usize] = (-radius..=radius)
                .map(|k| kernel[(k + radius) as usize] * src[(i * cols + (j + k).clamp(0, cols - 1)) as usize])
                .sum();
        }
    }
    let mut out = vec![0.0; src.len()];
    for i in 0..rows {
        for j in 0..cols {
            out[(i * cols + j) as usize] = (-radius..=radius)
                .map(|k| kernel[(k + radius) as usize] * tmp[((i + k).clamp(0, rows - 1) * cols + j) as usize])
                .sum();
        }
    }
    FieldGrid::with_origin(grid.rows(), grid.cols(), out, grid.dx, grid.dy, grid.origin)
        .expect("blurring preserves shape and finiteness")
}
