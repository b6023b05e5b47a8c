//! Triangle meshes of rectangles and the unit disk, P1 fields and quadrature.
//!
//! Rectangles are `[0, lx] × [0, ly]`; disks are centred at the origin and
//! approximated by their inscribed polygon.

pub(crate) mod field;
pub mod io;

pub use field::ScalarField;

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::par;

pub type Point = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DomainKind {
    Rectangle { lx: f64, ly: f64 },
    Disk { radius: f64 },
}

#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    area: Vec<f64>,
    lumped: Vec<f64>,
    grads: Vec<[Point; 3]>,
    dist: Vec<f64>,
    domain: DomainKind,
    locator: Locator,
}

/// Vertex mask of `{x : dist(x, ∂Ω) ≥ kappa}`.
#[derive(Clone, Debug)]
pub struct InteriorShrink {
    pub kappa: f64,
    pub mask: Vec<bool>,
}

impl InteriorShrink {
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Uniform triangulation of `[0,lx]×[0,ly]` with `nx × ny` cells, each cut
/// along its lower-left to upper-right diagonal.
pub fn build_rect_mesh(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Mesh> {
    if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
        return Err(Error::invalid(format!("rectangle sides must be positive, got {lx} x {ly}")));
    }
    if nx < 2 || ny < 2 {
        return Err(Error::invalid(format!("need nx, ny >= 2, got {nx}, {ny}")));
    }
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        let y = ly * (j as f64 / ny as f64);
        for i in 0..=nx {
            vertices.push([lx * (i as f64 / nx as f64), y]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v01, v11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    Mesh::from_parts(vertices, triangles, DomainKind::Rectangle { lx, ly })
}

/// Unit disk by concentric rings: ring `k` (1..=n_rings) carries `k·n_sectors`
/// equally spaced vertices at radius `k/n_rings`, with a fan at the centre.
pub fn build_disk_mesh(n_rings: usize, n_sectors: usize) -> Result<Mesh> {
    if n_rings < 1 || n_sectors < 3 {
        return Err(Error::invalid(format!(
            "need n_rings >= 1 and n_sectors >= 3, got {n_rings}, {n_sectors}"
        )));
    }
    let mut vertices = vec![[0.0, 0.0]];
    let mut ring_start = vec![0usize];
    for k in 1..=n_rings {
        ring_start.push(vertices.len());
        let n = k * n_sectors;
        let r = k as f64 / n_rings as f64;
        for m in 0..n {
            let t = std::f64::consts::TAU * m as f64 / n as f64;
            vertices.push([r * t.cos(), r * t.sin()]);
        }
    }
    let mut triangles = Vec::new();
    let s1 = ring_start[1];
    for m in 0..n_sectors {
        triangles.push([0, s1 + m, s1 + (m + 1) % n_sectors]);
    }
    for k in 2..=n_rings {
        let (na, nb) = ((k - 1) * n_sectors, k * n_sectors);
        let (sa, sb) = (ring_start[k - 1], ring_start[k]);
        let (mut i, mut j) = (0usize, 0usize);
        // Walk both rings by angle; advance whichever ring's next vertex comes first.
        while i < na || j < nb {
            let next_a = (i + 1) as f64 / na as f64;
            let next_b = (j + 1) as f64 / nb as f64;
            if j < nb && (i == na || next_b <= next_a) {
                triangles.push([sa + i % na, sb + j, sb + (j + 1) % nb]);
                j += 1;
            } else {
                triangles.push([sa + i, sb + j % nb, sa + (i + 1) % na]);
                i += 1;
            }
        }
    }
    for t in &mut triangles {
        if signed_area(&vertices, *t) < 0.0 {
            t.swap(1, 2);
        }
    }
    Mesh::from_parts(vertices, triangles, DomainKind::Disk { radius: 1.0 })
}

fn signed_area(v: &[Point], t: [usize; 3]) -> f64 {
    let [a, b, c] = [v[t[0]], v[t[1]], v[t[2]]];
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

impl Mesh {
    /// Assemble a mesh from raw arrays. Boundary flags are derived from the
    /// topology (edges owned by a single triangle); the domain must be convex.
    pub fn from_parts(vertices: Vec<Point>, mut triangles: Vec<[usize; 3]>, domain: DomainKind) -> Result<Mesh> {
        let nv = vertices.len();
        if nv < 3 || triangles.is_empty() {
            return Err(Error::invalid("mesh needs at least one triangle"));
        }
        if vertices.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::invalid("non-finite vertex coordinate"));
        }
        for t in &mut triangles {
            if t.iter().any(|&i| i >= nv) {
                return Err(Error::invalid(format!("triangle {t:?} references a missing vertex")));
            }
            if signed_area(&vertices, *t) < 0.0 {
                t.swap(1, 2);
            }
        }
        let mut area = Vec::with_capacity(triangles.len());
        let mut grads = Vec::with_capacity(triangles.len());
        let mut lumped = vec![0.0; nv];
        for (k, t) in triangles.iter().enumerate() {
            let a = signed_area(&vertices, *t);
            if !(a > 0.0) {
                return Err(Error::invalid(format!("triangle {k} is degenerate")));
            }
            let mut g = [[0.0; 2]; 3];
            for i in 0..3 {
                let pj = vertices[t[(i + 1) % 3]];
                let pk = vertices[t[(i + 2) % 3]];
                g[i] = [(pj[1] - pk[1]) / (2.0 * a), (pk[0] - pj[0]) / (2.0 * a)];
            }
            for &i in t {
                lumped[i] += a / 3.0;
            }
            area.push(a);
            grads.push(g);
        }

        let mut edge_owner: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        for (k, t) in triangles.iter().enumerate() {
            for i in 0..3 {
                let (a, b) = (t[i], t[(i + 1) % 3]);
                let e = edge_owner.entry((a.min(b), a.max(b))).or_insert((k, 0));
                e.1 += 1;
            }
        }
        let mut boundary = vec![false; nv];
        // Inward unit normal and a point for every boundary edge.
        let mut lines = Vec::new();
        for (&(a, b), &(k, count)) in &edge_owner {
            if count == 1 {
                boundary[a] = true;
                boundary[b] = true;
                let t = triangles[k];
                let c = t.iter().copied().find(|&i| i != a && i != b).unwrap();
                let (pa, pb, pc) = (vertices[a], vertices[b], vertices[c]);
                let (dx, dy) = (pb[0] - pa[0], pb[1] - pa[1]);
                let len = dx.hypot(dy);
                let mut n = [-dy / len, dx / len];
                if n[0] * (pc[0] - pa[0]) + n[1] * (pc[1] - pa[1]) < 0.0 {
                    n = [-n[0], -n[1]];
                }
                lines.push((pa, n));
            }
        }
        lines.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());

        // For a convex polygon the distance from an interior point to the
        // boundary is the smallest distance to the supporting lines.
        let dist = par::map_collect(nv, |i| {
            if boundary[i] {
                return 0.0;
            }
            if let DomainKind::Rectangle { lx, ly } = domain {
                let [x, y] = vertices[i];
                return x.min(lx - x).min(y).min(ly - y).max(0.0);
            }
            let p = vertices[i];
            lines
                .iter()
                .map(|(q, n)| n[0] * (p[0] - q[0]) + n[1] * (p[1] - q[1]))
                .fold(f64::INFINITY, f64::min)
                .max(0.0)
        });

        let locator = Locator::new(&vertices, &triangles);
        Ok(Mesh {
            vertices,
            triangles,
            boundary,
            area,
            lumped,
            grads,
            dist,
            domain,
            locator,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> Point {
        self.vertices[i]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary[i]
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn n_boundary(&self) -> usize {
        self.boundary.iter().filter(|&&b| b).count()
    }

    pub fn area(&self, t: usize) -> f64 {
        self.area[t]
    }

    pub fn areas(&self) -> &[f64] {
        &self.area
    }

    pub fn total_area(&self) -> f64 {
        par::sum(self.area.len(), |t| self.area[t])
    }

    /// Lumped vertex masses (a third of each adjacent triangle's area).
    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped
    }

    /// Constant gradients of the three hat functions on triangle `t`.
    pub fn hat_gradients(&self, t: usize) -> &[Point; 3] {
        &self.grads[t]
    }

    pub fn domain(&self) -> DomainKind {
        self.domain
    }

    /// Exact distance from vertex `i` to the polygonal boundary.
    pub fn dist_to_boundary(&self, i: usize) -> f64 {
        self.dist[i]
    }

    pub fn distances(&self) -> &[f64] {
        &self.dist
    }

    /// Largest vertex distance to the boundary.
    pub fn max_interior_distance(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    pub fn interior_shrink(&self, kappa: f64) -> InteriorShrink {
        InteriorShrink {
            kappa,
            mask: self.dist.iter().map(|&d| d >= kappa).collect(),
        }
    }

    /// Longest edge length.
    pub fn h_max(&self) -> f64 {
        let v = &self.vertices;
        self.triangles
            .iter()
            .flat_map(|t| (0..3).map(move |i| (t[i], t[(i + 1) % 3])))
            .map(|(a, b)| (v[a][0] - v[b][0]).hypot(v[a][1] - v[b][1]))
            .fold(0.0, f64::max)
    }

    pub fn diameter(&self) -> f64 {
        match self.domain {
            DomainKind::Rectangle { lx, ly } => lx.hypot(ly),
            DomainKind::Disk { radius } => 2.0 * radius,
        }
    }

    pub fn barycenter(&self, t: usize) -> Point {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// The same triangulation dilated by `factor` about the origin.
    pub fn scaled(&self, factor: f64) -> Result<Mesh> {
        if !(factor > 0.0) {
            return Err(Error::invalid("scale factor must be positive"));
        }
        let vertices = self.vertices.iter().map(|p| [p[0] * factor, p[1] * factor]).collect();
        let domain = match self.domain {
            DomainKind::Rectangle { lx, ly } => DomainKind::Rectangle { lx: lx * factor, ly: ly * factor },
            DomainKind::Disk { radius } => DomainKind::Disk { radius: radius * factor },
        };
        Mesh::from_parts(vertices, self.triangles.clone(), domain)
    }

    /// Triangle containing `p` and the barycentric coordinates of `p` in it.
    pub fn locate(&self, p: Point) -> Option<(usize, [f64; 3])> {
        self.locator.locate(&self.vertices, &self.triangles, &self.area, p)
    }

    /// Vertex-to-vertex adjacency (sorted, without self).
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut nb = vec![Vec::new(); self.n_vertices()];
        for t in &self.triangles {
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        nb[t[i]].push(t[j]);
                    }
                }
            }
        }
        for l in &mut nb {
            l.sort_unstable();
            l.dedup();
        }
        nb
    }

    pub(crate) fn same_as(&self, other: &Mesh) -> bool {
        std::ptr::eq(self, other)
            || (self.vertices == other.vertices && self.triangles == other.triangles)
    }
}

/// Bucket grid over the bounding box for point location.
#[derive(Clone, Debug)]
struct Locator {
    origin: Point,
    cell: Point,
    n: [usize; 2],
    buckets: Vec<Vec<u32>>,
}

impl Locator {
    fn new(v: &[Point], tris: &[[usize; 3]]) -> Locator {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in v {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let side = ((tris.len() as f64).sqrt().ceil() as usize).clamp(1, 1024);
        let n = [side, side];
        let cell = [
            ((hi[0] - lo[0]) / side as f64).max(1e-300),
            ((hi[1] - lo[1]) / side as f64).max(1e-300),
        ];
        let mut buckets = vec![Vec::new(); side * side];
        for (k, t) in tris.iter().enumerate() {
            let xs = t.map(|i| v[i][0]);
            let ys = t.map(|i| v[i][1]);
            let cx = |x: f64| (((x - lo[0]) / cell[0]).floor().max(0.0) as usize).min(side - 1);
            let cy = |y: f64| (((y - lo[1]) / cell[1]).floor().max(0.0) as usize).min(side - 1);
            let (x0, x1) = (cx(xs.iter().copied().fold(f64::INFINITY, f64::min)), cx(xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)));
            let (y0, y1) = (cy(ys.iter().copied().fold(f64::INFINITY, f64::min)), cy(ys.iter().copied().fold(f64::NEG_INFINITY, f64::max)));
            for j in y0..=y1 {
                for i in x0..=x1 {
                    buckets[j * side + i].push(k as u32);
                }
            }
        }
        Locator { origin: lo, cell, n, buckets }
    }

    fn locate(&self, v: &[Point], tris: &[[usize; 3]], area: &[f64], p: Point) -> Option<(usize, [f64; 3])> {
        let fx = (p[0] - self.origin[0]) / self.cell[0];
        let fy = (p[1] - self.origin[1]) / self.cell[1];
        let eps = 1e-9;
        if fx < -eps || fy < -eps || fx > self.n[0] as f64 + eps || fy > self.n[1] as f64 + eps {
            return None;
        }
        let i = (fx.floor().max(0.0) as usize).min(self.n[0] - 1);
        let j = (fy.floor().max(0.0) as usize).min(self.n[1] - 1);
        for &k in &self.buckets[j * self.n[0] + i] {
            let k = k as usize;
            let t = tris[k];
            let [a, b, c] = t.map(|i| v[i]);
            let sub = |q: Point, r: Point| 0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]));
            let l = [sub(b, c) / area[k], sub(c, a) / area[k], sub(a, b) / area[k]];
            if l.iter().all(|&x| x >= -1e-12) {
                return Some((k, l));
            }
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rect_counts_and_area() {
        let m = build_rect_mesh(1.0, 1.0, 2, 2).unwrap();
        assert_eq!((m.n_vertices(), m.n_triangles()), (9, 8));
        assert!((m.total_area() - 1.0).abs() < 1e-15);
        let m = build_rect_mesh(1.0, 1.0, 64, 64).unwrap();
        assert!((m.total_area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rect_boundary_enumeration() {
        // 5 x 3 grid points: the perimeter holds 2*5 + 2*1 = 12 of them, ten
        // of which sit on the two long sides.
        let m = build_rect_mesh(2.0, 1.0, 4, 2).unwrap();
        assert!((m.total_area() - 2.0).abs() < 1e-14);
        assert_eq!(m.n_boundary(), 12);
        let on_long = (0..m.n_vertices())
            .filter(|&i| m.is_boundary(i) && (m.vertex(i)[1] == 0.0 || m.vertex(i)[1] == 1.0))
            .count();
        assert_eq!(on_long, 10);
        assert_eq!(m.n_vertices() - m.n_boundary(), 3);
    }

    #[test]
    fn rect_rejects_bad_input() {
        assert!(build_rect_mesh(0.0, 1.0, 4, 4).is_err());
        assert!(build_rect_mesh(1.0, -1.0, 4, 4).is_err());
        assert!(build_rect_mesh(1.0, 1.0, 1, 4).is_err());
    }

    #[test]
    fn disk_fan_and_counts() {
        let m = build_disk_mesh(1, 3).unwrap();
        assert_eq!(m.n_triangles(), 3);
        assert!((m.total_area() - 3.0 * 3f64.sqrt() / 4.0).abs() < 1e-14);
        assert_eq!(build_disk_mesh(2, 4).unwrap().n_vertices(), 13);
        assert!(build_disk_mesh(0, 4).is_err());
        assert!(build_disk_mesh(3, 2).is_err());
    }

    #[test]
    fn disk_area_converges() {
        let m = build_disk_mesh(32, 128).unwrap();
        let n = (32 * 128) as f64;
        let exact_polygon = 0.5 * n * (std::f64::consts::TAU / n).sin();
        assert!((m.total_area() - exact_polygon).abs() < 1e-12 * exact_polygon);
        assert!((m.total_area() - std::f64::consts::PI).abs() < 2e-3 * std::f64::consts::PI);
        // Boundary is exactly the outer ring.
        assert_eq!(m.n_boundary(), 32 * 128);
    }

    #[test]
    fn distances_on_unit_square() {
        let m = build_rect_mesh(1.0, 1.0, 4, 4).unwrap();
        let find = |x: f64, y: f64| (0..m.n_vertices()).find(|&i| m.vertex(i) == [x, y]).unwrap();
        assert_eq!(m.dist_to_boundary(find(0.5, 0.5)), 0.5);
        assert_eq!(m.dist_to_boundary(find(0.25, 0.5)), 0.25);
        for i in 0..m.n_vertices() {
            if m.is_boundary(i) {
                assert_eq!(m.dist_to_boundary(i), 0.0);
            }
        }
    }

    #[test]
    fn disk_distance_matches_polygon() {
        let m = build_disk_mesh(8, 6).unwrap();
        let n = 48.0;
        let apothem = (std::f64::consts::PI / n).cos();
        assert!((m.dist_to_boundary(0) - apothem).abs() < 1e-12);
    }

    #[test]
    fn locate_recovers_vertices_and_interior_points() {
        let m = build_disk_mesh(6, 6).unwrap();
        for i in [0, 5, 40, m.n_vertices() - 1] {
            let p = m.vertex(i);
            let (t, l) = m.locate(p).unwrap();
            let k = m.triangles()[t].iter().position(|&v| v == i).unwrap();
            assert!((l[k] - 1.0).abs() < 1e-9);
        }
        assert!(m.locate([0.3, -0.2]).is_some());
        assert!(m.locate([1.5, 0.0]).is_none());
    }

    #[test]
    fn scaled_mesh_scales_area_and_distance() {
        let m = build_disk_mesh(4, 6).unwrap();
        let s = m.scaled(2.0).unwrap();
        assert!((s.total_area() - 4.0 * m.total_area()).abs() < 1e-12);
        assert!((s.dist_to_boundary(0) - 2.0 * m.dist_to_boundary(0)).abs() < 1e-12);
        assert_eq!(s.domain(), DomainKind::Disk { radius: 2.0 });
    }
}
