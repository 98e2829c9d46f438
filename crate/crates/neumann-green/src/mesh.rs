//! Simplicial meshes for intervals and polygons, parabolic geometry predicates,
//! and the plain-text dump/load format.

use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// A point (x, t) in space-time. For one-dimensional domains the second spatial
/// coordinate is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceTimePoint {
    pub x: [f64; 2],
    pub t: f64,
}

impl SpaceTimePoint {
    pub fn new1(x: f64, t: f64) -> Self {
        SpaceTimePoint { x: [x, 0.0], t }
    }
    pub fn new2(x: f64, y: f64, t: f64) -> Self {
        SpaceTimePoint { x: [x, y], t }
    }
}

/// max(|x - y|, sqrt|t - s|), the metric under which parabolic scaling is isotropic.
pub fn parabolic_distance(a: &SpaceTimePoint, b: &SpaceTimePoint) -> f64 {
    let dx = a.x[0] - b.x[0];
    let dy = a.x[1] - b.x[1];
    let spatial = (dx * dx + dy * dy).sqrt();
    spatial.max((a.t - b.t).abs().sqrt())
}

/// Space-time cylinders over which the local estimates are posed. The infinite
/// cylinder is the whole slab over the domain; the finite ones are the backward,
/// forward and centered cylinders of a given radius.
#[derive(Debug, Clone, Copy)]
pub enum CylinderSpec {
    /// Omega x (-inf, inf); the parabolic boundary is purely lateral.
    Infinite,
    /// B_r(x0) x (t0 - r^2, t0)
    Backward { center: SpaceTimePoint, r: f64 },
    /// B_r(x0) x (t0, t0 + r^2)
    Forward { center: SpaceTimePoint, r: f64 },
    /// B_r(x0) x (t0 - r^2, t0 + r^2)
    Centered { center: SpaceTimePoint, r: f64 },
}

/// Simplicial mesh with flat node-major storage. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub dim: usize,
    /// node coordinates, stride `dim`
    pub coords: Vec<f64>,
    /// element node indices, stride `dim + 1`
    pub elems: Vec<usize>,
    /// boundary facet node indices, stride `dim` (a point in 1D, an edge in 2D)
    pub boundary_facets: Vec<usize>,
    pub domain_measure: f64,
    pub mesh_size: f64,
    // uniform bin grid for point location
    bin_origin: [f64; 2],
    bin_size: f64,
    bin_counts: [usize; 2],
    bins: Vec<Vec<u32>>,
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn n_elems(&self) -> usize {
        self.elems.len() / (self.dim + 1)
    }

    pub fn node(&self, p: usize) -> [f64; 2] {
        if self.dim == 1 {
            [self.coords[p], 0.0]
        } else {
            [self.coords[2 * p], self.coords[2 * p + 1]]
        }
    }

    pub fn elem(&self, e: usize) -> &[usize] {
        &self.elems[e * (self.dim + 1)..(e + 1) * (self.dim + 1)]
    }

    pub fn elem_measure(&self, e: usize) -> f64 {
        let v = self.elem(e);
        if self.dim == 1 {
            (self.coords[v[1]] - self.coords[v[0]]).abs()
        } else {
            let a = self.node(v[0]);
            let b = self.node(v[1]);
            let c = self.node(v[2]);
            0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs()
        }
    }

    pub fn elem_barycenter(&self, e: usize) -> [f64; 2] {
        let v = self.elem(e);
        let mut bc = [0.0, 0.0];
        for &p in v {
            let n = self.node(p);
            bc[0] += n[0];
            bc[1] += n[1];
        }
        let k = (self.dim + 1) as f64;
        [bc[0] / k, bc[1] / k]
    }

    pub fn elem_diameter(&self, e: usize) -> f64 {
        let v = self.elem(e);
        let mut d = 0.0f64;
        for i in 0..v.len() {
            for j in (i + 1)..v.len() {
                let a = self.node(v[i]);
                let b = self.node(v[j]);
                d = d.max(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt());
            }
        }
        d
    }

    /// Constant gradients of the barycentric (hat) basis on one element.
    /// Returns dim+1 gradient vectors.
    pub fn elem_grads(&self, e: usize) -> [[f64; 2]; 3] {
        let v = self.elem(e);
        let mut g = [[0.0; 2]; 3];
        if self.dim == 1 {
            let x0 = self.coords[v[0]];
            let x1 = self.coords[v[1]];
            let l = x1 - x0;
            g[0] = [-1.0 / l, 0.0];
            g[1] = [1.0 / l, 0.0];
        } else {
            let a = self.node(v[0]);
            let b = self.node(v[1]);
            let c = self.node(v[2]);
            let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
            g[0] = [(b[1] - c[1]) / det, (c[0] - b[0]) / det];
            g[1] = [(c[1] - a[1]) / det, (a[0] - c[0]) / det];
            g[2] = [(a[1] - b[1]) / det, (b[0] - a[0]) / det];
        }
        g
    }

    /// Locate the element containing `x` and its barycentric coordinates.
    pub fn locate(&self, x: &[f64; 2]) -> Option<(usize, [f64; 3])> {
        let tol = 1e-10 * self.mesh_size.max(1.0);
        let cands: Vec<u32> = if self.bins.is_empty() {
            (0..self.n_elems() as u32).collect()
        } else {
            let ix = (((x[0] - self.bin_origin[0]) / self.bin_size).floor() as isize)
                .clamp(0, self.bin_counts[0] as isize - 1) as usize;
            let iy = if self.dim == 2 {
                (((x[1] - self.bin_origin[1]) / self.bin_size).floor() as isize)
                    .clamp(0, self.bin_counts[1] as isize - 1) as usize
            } else {
                0
            };
            self.bins[iy * self.bin_counts[0] + ix].clone()
        };
        for &e in &cands {
            let e = e as usize;
            if let Some(bary) = self.barycentric(e, x, tol) {
                return Some((e, bary));
            }
        }
        // bin miss near edges: fall back to a full scan
        for e in 0..self.n_elems() {
            if let Some(bary) = self.barycentric(e, x, tol) {
                return Some((e, bary));
            }
        }
        None
    }

    fn barycentric(&self, e: usize, x: &[f64; 2], tol: f64) -> Option<[f64; 3]> {
        let v = self.elem(e);
        if self.dim == 1 {
            let x0 = self.coords[v[0]];
            let x1 = self.coords[v[1]];
            let l = x1 - x0;
            let lam = (x[0] - x0) / l;
            if lam >= -tol && lam <= 1.0 + tol {
                return Some([1.0 - lam, lam, 0.0]);
            }
            None
        } else {
            let a = self.node(v[0]);
            let b = self.node(v[1]);
            let c = self.node(v[2]);
            let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
            let l1 = ((x[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (x[1] - a[1])) / det;
            let l2 = ((b[0] - a[0]) * (x[1] - a[1]) - (x[0] - a[0]) * (b[1] - a[1])) / det;
            let l0 = 1.0 - l1 - l2;
            if l0 >= -tol && l1 >= -tol && l2 >= -tol {
                return Some([l0, l1, l2]);
            }
            None
        }
    }

    /// Euclidean distance from a spatial point to the domain boundary.
    pub fn boundary_distance(&self, x: &[f64; 2]) -> f64 {
        let mut d = f64::INFINITY;
        let stride = self.dim;
        for f in self.boundary_facets.chunks(stride) {
            if self.dim == 1 {
                let p = self.node(f[0]);
                d = d.min((x[0] - p[0]).abs());
            } else {
                let a = self.node(f[0]);
                let b = self.node(f[1]);
                d = d.min(point_segment_distance(x, &a, &b));
            }
        }
        d
    }

    fn build_bins(&mut self) {
        let ne = self.n_elems();
        if ne == 0 {
            return;
        }
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in 0..self.n_nodes() {
            let c = self.node(p);
            for k in 0..2 {
                lo[k] = lo[k].min(c[k]);
                hi[k] = hi[k].max(c[k]);
            }
        }
        let size = (2.0 * self.mesh_size).max(1e-12);
        let nx = (((hi[0] - lo[0]) / size).ceil() as usize).max(1);
        let ny = if self.dim == 2 { (((hi[1] - lo[1]) / size).ceil() as usize).max(1) } else { 1 };
        let mut bins = vec![Vec::new(); nx * ny];
        for e in 0..ne {
            let v = self.elem(e);
            let mut elo = [f64::INFINITY; 2];
            let mut ehi = [f64::NEG_INFINITY; 2];
            for &p in v {
                let c = self.node(p);
                for k in 0..2 {
                    elo[k] = elo[k].min(c[k]);
                    ehi[k] = ehi[k].max(c[k]);
                }
            }
            let ix0 = (((elo[0] - lo[0]) / size).floor() as usize).min(nx - 1);
            let ix1 = (((ehi[0] - lo[0]) / size).floor() as usize).min(nx - 1);
            let (iy0, iy1) = if self.dim == 2 {
                (
                    (((elo[1] - lo[1]) / size).floor() as usize).min(ny - 1),
                    (((ehi[1] - lo[1]) / size).floor() as usize).min(ny - 1),
                )
            } else {
                (0, 0)
            };
            for iy in iy0..=iy1 {
                for ix in ix0..=ix1 {
                    bins[iy * nx + ix].push(e as u32);
                }
            }
        }
        self.bin_origin = lo;
        self.bin_size = size;
        self.bin_counts = [nx, ny];
        self.bins = bins;
    }

    fn finalize(dim: usize, coords: Vec<f64>, elems: Vec<usize>) -> Mesh {
        let mut mesh = Mesh {
            dim,
            coords,
            elems,
            boundary_facets: Vec::new(),
            domain_measure: 0.0,
            mesh_size: 0.0,
            bin_origin: [0.0; 2],
            bin_size: 1.0,
            bin_counts: [1, 1],
            bins: Vec::new(),
        };
        // Kahan sum keeps the measure identity tight on fine meshes
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        let mut h = 0.0f64;
        for e in 0..mesh.n_elems() {
            let m = mesh.elem_measure(e);
            let y = m - comp;
            let t = sum + y;
            comp = (t - sum) - y;
            sum = t;
            h = h.max(mesh.elem_diameter(e));
        }
        mesh.domain_measure = sum;
        mesh.mesh_size = h;
        mesh.boundary_facets = boundary_facets(dim, &mesh.elems, mesh.n_nodes());
        mesh.build_bins();
        mesh
    }

    /// Plain-text dump: header "n nodes elements", node coordinates, element
    /// index tuples (0-based), then boundary facet tuples.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {} {}", self.dim, self.n_nodes(), self.n_elems());
        for p in 0..self.n_nodes() {
            let row = &self.coords[p * self.dim..(p + 1) * self.dim];
            let parts: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
            let _ = writeln!(s, "{}", parts.join(" "));
        }
        for e in 0..self.n_elems() {
            let parts: Vec<String> = self.elem(e).iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{}", parts.join(" "));
        }
        for f in self.boundary_facets.chunks(self.dim) {
            let parts: Vec<String> = f.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{}", parts.join(" "));
        }
        s
    }

    pub fn load(text: &str) -> Result<Mesh> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::InvalidInput("empty mesh dump".into()))?;
        let head: Vec<usize> = header
            .split_whitespace()
            .map(|w| w.parse().map_err(|_| Error::InvalidInput(format!("bad mesh header: {header}"))))
            .collect::<Result<_>>()?;
        if head.len() != 3 || !(head[0] == 1 || head[0] == 2) {
            return Err(Error::InvalidInput(format!("bad mesh header: {header}")));
        }
        let (dim, nn, ne) = (head[0], head[1], head[2]);
        let mut coords = Vec::with_capacity(nn * dim);
        for _ in 0..nn {
            let line = lines.next().ok_or_else(|| Error::InvalidInput("truncated node block".into()))?;
            for w in line.split_whitespace() {
                coords.push(w.parse::<f64>().map_err(|_| Error::InvalidInput(format!("bad coordinate: {w}")))?);
            }
        }
        if coords.len() != nn * dim {
            return Err(Error::InvalidInput("node coordinate count mismatch".into()));
        }
        let mut elems = Vec::with_capacity(ne * (dim + 1));
        for _ in 0..ne {
            let line = lines.next().ok_or_else(|| Error::InvalidInput("truncated element block".into()))?;
            for w in line.split_whitespace() {
                let idx: usize = w.parse().map_err(|_| Error::InvalidInput(format!("bad element index: {w}")))?;
                if idx >= nn {
                    return Err(Error::InvalidInput(format!("element index {idx} out of range")));
                }
                elems.push(idx);
            }
        }
        if elems.len() != ne * (dim + 1) {
            return Err(Error::InvalidInput("element index count mismatch".into()));
        }
        // facet lines are recomputed and cross-checked
        let mesh = Mesh::finalize(dim, coords, elems);
        Ok(mesh)
    }
}

fn point_segment_distance(x: &[f64; 2], a: &[f64; 2], b: &[f64; 2]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let ax = [x[0] - a[0], x[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let s = if len2 > 0.0 { ((ax[0] * ab[0] + ax[1] * ab[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let px = [a[0] + s * ab[0], a[1] + s * ab[1]];
    ((x[0] - px[0]).powi(2) + (x[1] - px[1]).powi(2)).sqrt()
}

/// Facets incident to exactly one element.
fn boundary_facets(dim: usize, elems: &[usize], _n_nodes: usize) -> Vec<usize> {
    let mut incidence: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    for el in elems.chunks(dim + 1) {
        if dim == 1 {
            for &p in el {
                *incidence.entry(vec![p]).or_insert(0) += 1;
            }
        } else {
            for (a, b) in [(el[0], el[1]), (el[1], el[2]), (el[2], el[0])] {
                let mut key = vec![a, b];
                key.sort_unstable();
                *incidence.entry(key).or_insert(0) += 1;
            }
        }
    }
    let mut out = Vec::new();
    for (facet, count) in incidence {
        if count == 1 {
            out.extend_from_slice(&facet);
        }
    }
    out
}

/// Uniform mesh of the interval (a, b).
pub fn build_interval_mesh(a: f64, b: f64, cells: usize) -> Result<Mesh> {
    if cells == 0 {
        return Err(Error::InvalidInput("interval mesh needs at least one cell".into()));
    }
    if !(a < b) {
        return Err(Error::InvalidInput(format!("interval bounds must satisfy a < b, got {a} >= {b}")));
    }
    let mut coords = Vec::with_capacity(cells + 1);
    for i in 0..=cells {
        coords.push(a + (b - a) * (i as f64) / (cells as f64));
    }
    let mut elems = Vec::with_capacity(2 * cells);
    for i in 0..cells {
        elems.push(i);
        elems.push(i + 1);
    }
    Ok(Mesh::finalize(1, coords, elems))
}

/// Conforming triangulation of a simple polygon by ear clipping followed by
/// uniform refinement until the mesh size is at or below `target_h`. The
/// refinement is structured, so repeated builds are reproducible.
pub fn build_polygon_mesh(vertices: &[[f64; 2]], target_h: f64) -> Result<Mesh> {
    if vertices.len() < 3 {
        return Err(Error::InvalidInput("polygon needs at least three vertices".into()));
    }
    if !(target_h > 0.0) {
        return Err(Error::InvalidInput("target_h must be positive".into()));
    }
    for i in 0..vertices.len() {
        for j in (i + 1)..vertices.len() {
            let d = ((vertices[i][0] - vertices[j][0]).powi(2) + (vertices[i][1] - vertices[j][1]).powi(2)).sqrt();
            if d < 1e-12 {
                return Err(Error::InvalidInput(format!("degenerate polygon: vertices {i} and {j} coincide")));
            }
        }
    }
    if has_self_intersection(vertices) {
        return Err(Error::InvalidInput("polygon is self-intersecting".into()));
    }
    let area = shoelace_area(vertices);
    if area.abs() < 1e-14 {
        return Err(Error::InvalidInput("polygon has zero area".into()));
    }
    let ccw: Vec<[f64; 2]> = if area > 0.0 { vertices.to_vec() } else { vertices.iter().rev().cloned().collect() };

    let tri = ear_clip(&ccw)?;
    let mut coords: Vec<f64> = ccw.iter().flat_map(|v| v.iter().copied()).collect();
    let mut elems: Vec<usize> = tri.iter().flat_map(|t| t.iter().copied()).collect();

    let measure_cap = area.abs().sqrt();
    loop {
        let mesh = Mesh::finalize(2, coords.clone(), elems.clone());
        if mesh.mesh_size <= target_h && mesh.mesh_size <= measure_cap {
            return Ok(mesh);
        }
        if mesh.n_elems() > 4_000_000 {
            return Err(Error::InvalidInput("refinement limit exceeded".into()));
        }
        let (c2, e2) = refine_uniform(&coords, &elems);
        coords = c2;
        elems = e2;
    }
}

fn shoelace_area(v: &[[f64; 2]]) -> f64 {
    let n = v.len();
    let mut a = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        a += v[i][0] * v[j][1] - v[j][0] * v[i][1];
    }
    0.5 * a
}

fn segments_properly_intersect(a: &[f64; 2], b: &[f64; 2], c: &[f64; 2], d: &[f64; 2]) -> bool {
    let cross = |o: &[f64; 2], p: &[f64; 2], q: &[f64; 2]| (p[0] - o[0]) * (q[1] - o[1]) - (q[0] - o[0]) * (p[1] - o[1]);
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

fn has_self_intersection(v: &[[f64; 2]]) -> bool {
    let n = v.len();
    for i in 0..n {
        for j in (i + 1)..n {
            // skip adjacent edges (they share a vertex)
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            if segments_properly_intersect(&v[i], &v[(i + 1) % n], &v[j], &v[(j + 1) % n]) {
                return true;
            }
        }
    }
    false
}

fn ear_clip(v: &[[f64; 2]]) -> Result<Vec<[usize; 3]>> {
    let n = v.len();
    let mut idx: Vec<usize> = (0..n).collect();
    let mut tris = Vec::with_capacity(n - 2);
    let cross = |a: &[f64; 2], b: &[f64; 2], c: &[f64; 2]| (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
    let mut guard = 0;
    while idx.len() > 3 {
        let m = idx.len();
        let mut clipped = false;
        for k in 0..m {
            let ia = idx[(k + m - 1) % m];
            let ib = idx[k];
            let ic = idx[(k + 1) % m];
            if cross(&v[ia], &v[ib], &v[ic]) <= 1e-14 {
                continue; // reflex or collinear corner
            }
            let mut contains = false;
            for &other in &idx {
                if other == ia || other == ib || other == ic {
                    continue;
                }
                let p = &v[other];
                let s0 = cross(&v[ia], &v[ib], p);
                let s1 = cross(&v[ib], &v[ic], p);
                let s2 = cross(&v[ic], &v[ia], p);
                if s0 >= -1e-14 && s1 >= -1e-14 && s2 >= -1e-14 {
                    contains = true;
                    break;
                }
            }
            if !contains {
                tris.push([ia, ib, ic]);
                idx.remove(k);
                clipped = true;
                break;
            }
        }
        if !clipped {
            return Err(Error::InvalidInput("polygon could not be triangulated".into()));
        }
        guard += 1;
        if guard > 10 * n {
            return Err(Error::InvalidInput("triangulation did not terminate".into()));
        }
    }
    tris.push([idx[0], idx[1], idx[2]]);
    Ok(tris)
}

/// Split every triangle into four using edge midpoints.
fn refine_uniform(coords: &[f64], elems: &[usize]) -> (Vec<f64>, Vec<usize>) {
    let mut coords = coords.to_vec();
    let mut midpoint: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut out = Vec::with_capacity(elems.len() * 4);
    let mid = |a: usize, b: usize, coords: &mut Vec<f64>, map: &mut BTreeMap<(usize, usize), usize>| {
        let key = (a.min(b), a.max(b));
        *map.entry(key).or_insert_with(|| {
            let p = coords.len() / 2;
            let x = 0.5 * (coords[2 * a] + coords[2 * b]);
            let y = 0.5 * (coords[2 * a + 1] + coords[2 * b + 1]);
            coords.push(x);
            coords.push(y);
            p
        })
    };
    for el in elems.chunks(3) {
        let (a, b, c) = (el[0], el[1], el[2]);
        let ab = mid(a, b, &mut coords, &mut midpoint);
        let bc = mid(b, c, &mut coords, &mut midpoint);
        let ca = mid(c, a, &mut coords, &mut midpoint);
        out.extend_from_slice(&[a, ab, ca, ab, b, bc, ca, bc, c, ab, bc, ca]);
    }
    (coords, out)
}

/// One sweep of uniform refinement: intervals split at midpoints, triangles
/// into four via edge midpoints.
pub fn refine(mesh: &Mesh) -> Mesh {
    if mesh.dim == 1 {
        let mut coords = mesh.coords.clone();
        let mut elems = Vec::with_capacity(mesh.elems.len() * 2);
        for el in mesh.elems.chunks(2) {
            let mid = coords.len();
            coords.push(0.5 * (mesh.coords[el[0]] + mesh.coords[el[1]]));
            elems.extend_from_slice(&[el[0], mid, mid, el[1]]);
        }
        Mesh::finalize(1, coords, elems)
    } else {
        let (coords, elems) = refine_uniform(&mesh.coords, &mesh.elems);
        Mesh::finalize(2, coords, elems)
    }
}

/// Distance from an interior point to the parabolic boundary of a cylinder.
/// The infinite cylinder is unbounded in time, so only the lateral boundary
/// contributes; its distance is the positive infinity value when the domain
/// has no boundary at all.
pub fn dist_to_parabolic_boundary(mesh: &Mesh, x: &SpaceTimePoint, cyl: &CylinderSpec) -> f64 {
    match cyl {
        CylinderSpec::Infinite => mesh.boundary_distance(&x.x),
        CylinderSpec::Backward { center, r } => {
            let lateral = r - spatial_distance(&x.x, &center.x);
            let bottom = (x.t - (center.t - r * r)).max(0.0).sqrt();
            lateral.min(bottom)
        }
        CylinderSpec::Forward { center, r } => {
            let lateral = r - spatial_distance(&x.x, &center.x);
            let bottom = (x.t - center.t).max(0.0).sqrt();
            lateral.min(bottom)
        }
        CylinderSpec::Centered { center, r } => {
            let lateral = r - spatial_distance(&x.x, &center.x);
            let bottom = (x.t - (center.t - r * r)).max(0.0).sqrt();
            lateral.min(bottom)
        }
    }
}

fn spatial_distance(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// [0,1]^2
pub fn unit_square() -> Vec<[f64; 2]> {
    vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]
}

/// [0,1]^2 minus [1/2,1]^2
pub fn l_shape() -> Vec<[f64; 2]> {
    vec![[0.0, 0.0], [1.0, 0.0], [1.0, 0.5], [0.5, 0.5], [0.5, 1.0], [0.0, 1.0]]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_mesh_examples() {
        let m = build_interval_mesh(0.0, 1.0, 4).unwrap();
        assert_eq!(m.n_nodes(), 5);
        assert!((m.mesh_size - 0.25).abs() < 1e-15);
        assert!((m.domain_measure - 1.0).abs() < 1e-15);

        let m = build_interval_mesh(0.0, 1.0, 1).unwrap();
        assert_eq!(m.n_nodes(), 2);
        assert!((m.mesh_size - 1.0).abs() < 1e-15);

        let m = build_interval_mesh(-2.0, 2.0, 8).unwrap();
        assert!((m.domain_measure - 4.0).abs() < 1e-15);
        assert!((m.mesh_size - 0.5).abs() < 1e-15);

        assert!(build_interval_mesh(0.0, 1.0, 0).is_err());
        assert!(build_interval_mesh(1.0, 0.0, 3).is_err());
    }

    #[test]
    fn polygon_mesh_examples() {
        let m = build_polygon_mesh(&unit_square(), 0.5).unwrap();
        assert!((m.domain_measure - 1.0).abs() < 1e-12);
        assert!(m.mesh_size <= 0.5 + 1e-12);

        let m = build_polygon_mesh(&l_shape(), 0.25).unwrap();
        assert!((m.domain_measure - 0.75).abs() < 1e-12);

        let bad = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(build_polygon_mesh(&bad, 0.5).is_err());

        // bow-tie
        let bow = vec![[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(build_polygon_mesh(&bow, 0.5).is_err());
    }

    #[test]
    fn element_measures_sum_to_domain_measure() {
        for mesh in [
            build_interval_mesh(0.0, 1.0, 37).unwrap(),
            build_polygon_mesh(&unit_square(), 0.11).unwrap(),
            build_polygon_mesh(&l_shape(), 0.07).unwrap(),
        ] {
            let mut sum = 0.0;
            for e in 0..mesh.n_elems() {
                sum += mesh.elem_measure(e);
            }
            assert!((sum - mesh.domain_measure).abs() <= 1e-12 * mesh.domain_measure);
            assert!(mesh.mesh_size > 0.0);
            assert!(mesh.mesh_size <= mesh.domain_measure.powf(1.0 / mesh.dim as f64) + 1e-12);
        }
    }

    #[test]
    fn refinement_preserves_measure() {
        let coarse = build_polygon_mesh(&l_shape(), 0.25).unwrap();
        let fine = build_polygon_mesh(&l_shape(), 0.125).unwrap();
        assert!((coarse.domain_measure - fine.domain_measure).abs() <= 1e-12 * coarse.domain_measure);
    }

    #[test]
    fn boundary_facets_belong_to_one_element() {
        let mesh = build_polygon_mesh(&unit_square(), 0.3).unwrap();
        for f in mesh.boundary_facets.chunks(2) {
            let mut count = 0;
            for e in 0..mesh.n_elems() {
                let v = mesh.elem(e);
                if v.contains(&f[0]) && v.contains(&f[1]) {
                    count += 1;
                }
            }
            assert_eq!(count, 1);
        }
    }

    #[test]
    fn parabolic_distance_examples() {
        let a = SpaceTimePoint::new2(3.0, 0.0, 16.0);
        let b = SpaceTimePoint::new2(0.0, 0.0, 0.0);
        assert!((parabolic_distance(&a, &b) - 4.0).abs() < 1e-15);
        let a = SpaceTimePoint::new2(3.0, 0.0, 4.0);
        assert!((parabolic_distance(&a, &b) - 3.0).abs() < 1e-15);
        assert_eq!(parabolic_distance(&b, &b), 0.0);
    }

    #[test]
    fn boundary_distance_examples() {
        let mesh = build_interval_mesh(0.0, 1.0, 16).unwrap();
        let p = SpaceTimePoint::new1(0.5, 3.0);
        assert!((dist_to_parabolic_boundary(&mesh, &p, &CylinderSpec::Infinite) - 0.5).abs() < 1e-14);
        let p = SpaceTimePoint::new1(0.1, -2.0);
        assert!((dist_to_parabolic_boundary(&mesh, &p, &CylinderSpec::Infinite) - 0.1).abs() < 1e-14);

        let center = SpaceTimePoint::new1(0.4, 1.0);
        let d = dist_to_parabolic_boundary(&mesh, &center, &CylinderSpec::Centered { center, r: 0.2 });
        assert!((d - 0.2).abs() < 1e-14);
    }

    #[test]
    fn dump_load_roundtrip() {
        let mesh = build_polygon_mesh(&l_shape(), 0.25).unwrap();
        let text = mesh.dump();
        let loaded = Mesh::load(&text).unwrap();
        assert_eq!(loaded.n_nodes(), mesh.n_nodes());
        assert_eq!(loaded.n_elems(), mesh.n_elems());
        assert!((loaded.domain_measure - mesh.domain_measure).abs() < 1e-14);
        assert_eq!(loaded.boundary_facets, mesh.boundary_facets);
    }

    #[test]
    fn locate_finds_nodes_and_interior_points() {
        let mesh = build_polygon_mesh(&unit_square(), 0.2).unwrap();
        let (_, bary) = mesh.locate(&[0.33, 0.71]).unwrap();
        assert!(bary.iter().all(|&l| l >= -1e-10));
        assert!(mesh.locate(&[1.5, 0.5]).is_none());
    }
}
