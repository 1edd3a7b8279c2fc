//! Triangular meshes of rotated elliptical domains.
//!
//! Boundary nodes are sampled at (approximately) equal arc length along the
//! ellipse; interior nodes come from a slightly jittered hexagonal lattice
//! kept at least half a spacing away from the curve. Because the domain is
//! convex and every boundary node is a hull vertex, a plain Delaunay
//! triangulation of the point cloud already conforms to the boundary polygon.
//!
//! Node storage order is: boundary nodes in counter-clockwise arc order,
//! followed by interior nodes row by row (ascending `y`, then ascending `x`).

use std::io::{BufRead, Write};
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};

pub type Point = [f64; 2];

/// Distance tolerance for boundary nodes to the parametric curve.
pub const BOUNDARY_TOL: f64 = 1e-8;

const LATTICE_JITTER_SEED: u64 = 0x6d65_7368;

/// Rotated ellipse centred at the origin with semi-axes `a` (along the
/// rotated x-axis) and `b`, rotated counter-clockwise by `theta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub a: f64,
    pub b: f64,
    pub theta: f64,
}

impl Ellipse {
    pub fn new(a: f64, b: f64, theta: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(invalid(format!("semi-axes must be positive, got a={a}, b={b}")));
        }
        if !(0.0..std::f64::consts::PI).contains(&theta) {
            return Err(invalid(format!("rotation angle must lie in [0, pi), got {theta}")));
        }
        Ok(Self { a, b, theta })
    }

    /// The domain used throughout the experiments: a = 1, b = 3/4, theta = pi/6.
    pub fn standard() -> Self {
        Self { a: 1.0, b: 0.75, theta: std::f64::consts::FRAC_PI_6 }
    }

    pub fn point_at(&self, t: f64) -> Point {
        let (st, ct) = t.sin_cos();
        let (sr, cr) = self.theta.sin_cos();
        [
            self.a * ct * cr - self.b * st * sr,
            self.b * st * cr + self.a * ct * sr,
        ]
    }

    fn to_local(&self, p: Point) -> (f64, f64) {
        let (sr, cr) = self.theta.sin_cos();
        (p[0] * cr + p[1] * sr, -p[0] * sr + p[1] * cr)
    }

    /// Normalised radius: 1 on the curve, < 1 inside.
    pub fn level(&self, p: Point) -> f64 {
        let (u, v) = self.to_local(p);
        ((u / self.a).powi(2) + (v / self.b).powi(2)).sqrt()
    }

    pub fn contains(&self, p: Point) -> bool {
        self.level(p) <= 1.0
    }

    /// First-order estimate of the (signed, positive inside) distance to the curve.
    pub fn boundary_distance(&self, p: Point) -> f64 {
        let (u, v) = self.to_local(p);
        let r = ((u / self.a).powi(2) + (v / self.b).powi(2)).sqrt();
        if r < 1e-12 {
            return self.a.min(self.b);
        }
        let gu = u / (self.a * self.a * r);
        let gv = v / (self.b * self.b * r);
        (1.0 - r) / gu.hypot(gv)
    }

    /// Scales `p` along the ray from the centre so that it lands on the curve.
    pub fn project(&self, p: Point) -> Point {
        let r = self.level(p);
        if r == 0.0 {
            return self.point_at(0.0);
        }
        [p[0] / r, p[1] / r]
    }

    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.a * self.b
    }

    fn bounding_half_widths(&self) -> (f64, f64) {
        let (sr, cr) = self.theta.sin_cos();
        (
            (self.a * self.a * cr * cr + self.b * self.b * sr * sr).sqrt(),
            (self.a * self.a * sr * sr + self.b * self.b * cr * cr).sqrt(),
        )
    }

    /// Parameters `t` of `count` points spaced equally in arc length.
    fn arc_length_parameters(&self, count: usize) -> Vec<f64> {
        const FINE: usize = 32_768;
        let two_pi = 2.0 * std::f64::consts::PI;
        let mut cumulative = Vec::with_capacity(FINE + 1);
        cumulative.push(0.0);
        let mut prev = self.point_at(0.0);
        for i in 1..=FINE {
            let p = self.point_at(two_pi * i as f64 / FINE as f64);
            let last = *cumulative.last().unwrap();
            cumulative.push(last + (p[0] - prev[0]).hypot(p[1] - prev[1]));
            prev = p;
        }
        let total = cumulative[FINE];
        let mut out = Vec::with_capacity(count);
        let mut seg = 0;
        for k in 0..count {
            let target = total * k as f64 / count as f64;
            while cumulative[seg + 1] < target {
                seg += 1;
            }
            let span = cumulative[seg + 1] - cumulative[seg];
            let frac = if span > 0.0 { (target - cumulative[seg]) / span } else { 0.0 };
            out.push(two_pi * (seg as f64 + frac) / FINE as f64);
        }
        out
    }

    pub fn perimeter(&self) -> f64 {
        // Ramanujan's second approximation; relative error ~1e-10 for b/a = 3/4.
        let (a, b) = (self.a, self.b);
        let h = ((a - b) / (a + b)).powi(2);
        std::f64::consts::PI * (a + b) * (1.0 + 3.0 * h / (10.0 + (4.0 - 3.0 * h).sqrt()))
    }
}

/// Containing element and barycentric coordinates of a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    pub element: usize,
    pub bary: [f64; 3],
}

#[derive(Debug)]
pub struct Mesh {
    nodes: Vec<Point>,
    elements: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    domain: Option<Ellipse>,
    locator: OnceLock<Locator>,
}

impl Clone for Mesh {
    fn clone(&self) -> Self {
        Self {
            nodes: self.nodes.clone(),
            elements: self.elements.clone(),
            boundary: self.boundary.clone(),
            domain: self.domain,
            locator: OnceLock::new(),
        }
    }
}

/// Builds a triangulation of the closed ellipse interior with target edge
/// length `h_target`.
pub fn build_ellipse_mesh(a: f64, b: f64, theta: f64, h_target: f64) -> Result<Mesh> {
    let ellipse = Ellipse::new(a, b, theta)?;
    if !(h_target > 0.0) || !h_target.is_finite() {
        return Err(invalid(format!("target edge length must be positive, got {h_target}")));
    }
    build_mesh_in(ellipse, h_target)
}

pub fn build_mesh_in(ellipse: Ellipse, h: f64) -> Result<Mesh> {
    let boundary_count = ((ellipse.perimeter() / h).round() as usize).max(8);
    let mut nodes: Vec<Point> = ellipse
        .arc_length_parameters(boundary_count)
        .into_iter()
        .map(|t| ellipse.point_at(t))
        .collect();
    let mut boundary = vec![true; nodes.len()];

    let mut rng = ChaCha8Rng::seed_from_u64(LATTICE_JITTER_SEED);
    let (half_w, half_h) = ellipse.bounding_half_widths();
    let dy = h * 3f64.sqrt() / 2.0;
    let rows = (half_h / dy).ceil() as i64;
    let cols = (half_w / h).ceil() as i64 + 1;
    let jitter = 0.05 * h;
    for row in -rows..=rows {
        let y = row as f64 * dy;
        let offset = if row.rem_euclid(2) == 1 { 0.5 * h } else { 0.0 };
        for col in -cols..=cols {
            let x = col as f64 * h + offset;
            let p = [
                x + rng.random_range(-jitter..jitter),
                y + rng.random_range(-jitter..jitter),
            ];
            if ellipse.boundary_distance(p) >= 0.55 * h {
                nodes.push(p);
                boundary.push(false);
            }
        }
    }

    let tris = crate::delaunay::triangulate(&nodes);
    if tris.is_empty() {
        return Err(Error::NumericalFailure("Delaunay triangulation produced no triangles".into()));
    }
    let mut elements = Vec::with_capacity(tris.len());
    for e in tris {
        let area = signed_area(nodes[e[0]], nodes[e[1]], nodes[e[2]]);
        if area < 1e-12 * h * h {
            return Err(Error::NumericalFailure(format!("degenerate triangle {e:?}")));
        }
        elements.push(e);
    }
    Ok(Mesh::from_parts(nodes, elements, boundary, Some(ellipse)))
}

/// Picks a target edge length giving roughly `nodes` nodes on `ellipse`.
///
/// Inverts the leading-order count `2|O|/(sqrt(3) h^2) + P/h`, then nudges
/// `h` until the built mesh lands within one percent (or the iteration budget
/// runs out).
pub fn mesh_with_node_count(ellipse: Ellipse, nodes: usize) -> Result<Mesh> {
    if nodes < 16 {
        return Err(invalid("requested node count is too small"));
    }
    let area = ellipse.area();
    let perim = ellipse.perimeter();
    let qa = 2.0 * area / 3f64.sqrt();
    // nodes * h^2 - perim * h - qa = 0
    let n = nodes as f64;
    let mut h = (perim + (perim * perim + 4.0 * n * qa).sqrt()) / (2.0 * n);
    let mut mesh = build_mesh_in(ellipse, h)?;
    for _ in 0..12 {
        let ratio = mesh.node_count() as f64 / n;
        if (ratio - 1.0).abs() < 0.01 {
            break;
        }
        h *= ratio.sqrt();
        mesh = build_mesh_in(ellipse, h)?;
    }
    // Callers subsample `nodes` observation points, so never come up short.
    for _ in 0..40 {
        if mesh.node_count() >= nodes {
            break;
        }
        h *= 0.998;
        mesh = build_mesh_in(ellipse, h)?;
    }
    Ok(mesh)
}

pub(crate) fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

impl Mesh {
    pub fn from_parts(
        nodes: Vec<Point>,
        elements: Vec<[usize; 3]>,
        boundary: Vec<bool>,
        domain: Option<Ellipse>,
    ) -> Self {
        Self { nodes, elements, boundary, domain, locator: OnceLock::new() }
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn domain(&self) -> Option<&Ellipse> {
        self.domain.as_ref()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| !self.boundary[i]).collect()
    }

    pub fn element_vertices(&self, k: usize) -> [Point; 3] {
        let [i, j, l] = self.elements[k];
        [self.nodes[i], self.nodes[j], self.nodes[l]]
    }

    pub fn element_area(&self, k: usize) -> f64 {
        let [a, b, c] = self.element_vertices(k);
        signed_area(a, b, c)
    }

    pub fn area(&self) -> f64 {
        (0..self.elements.len()).map(|k| self.element_area(k)).sum()
    }

    /// Longest element edge.
    pub fn max_edge_length(&self) -> f64 {
        let mut h: f64 = 0.0;
        for k in 0..self.elements.len() {
            let v = self.element_vertices(k);
            for e in 0..3 {
                let (p, q) = (v[e], v[(e + 1) % 3]);
                h = h.max((p[0] - q[0]).hypot(p[1] - q[1]));
            }
        }
        h
    }

    /// Checks the structural invariants: valid distinct indices, positive
    /// orientation, boundary nodes on the curve, and edge manifoldness.
    pub fn check_invariants(&self) -> Result<()> {
        let n = self.nodes.len();
        if self.boundary.len() != n {
            return Err(invalid("boundary mask length differs from node count"));
        }
        for (k, e) in self.elements.iter().enumerate() {
            if e.iter().any(|&i| i >= n) || e[0] == e[1] || e[1] == e[2] || e[0] == e[2] {
                return Err(invalid(format!("element {k} has invalid indices {e:?}")));
            }
            if self.element_area(k) <= 0.0 {
                return Err(invalid(format!("element {k} is not positively oriented")));
            }
        }
        if let Some(ell) = &self.domain {
            for (i, p) in self.nodes.iter().enumerate() {
                if self.boundary[i] && ell.boundary_distance(*p).abs() > BOUNDARY_TOL {
                    return Err(invalid(format!("boundary node {i} is off the curve")));
                }
            }
        }
        let mut edges = std::collections::HashMap::new();
        for e in &self.elements {
            for s in 0..3 {
                let (p, q) = (e[s], e[(s + 1) % 3]);
                *edges.entry((p.min(q), p.max(q))).or_insert(0usize) += 1;
            }
        }
        for (&(p, q), &count) in &edges {
            match count {
                1 if self.boundary[p] && self.boundary[q] => {}
                2 => {}
                _ => {
                    return Err(invalid(format!("edge ({p}, {q}) is shared by {count} elements")))
                }
            }
        }
        Ok(())
    }

    /// Uniform refinement: every triangle is split into four through its
    /// edge midpoints. Boundary midpoints are pushed onto the ellipse when the
    /// mesh knows its domain.
    pub fn refine(&self) -> Mesh {
        let mut edge_count = std::collections::HashMap::new();
        for e in &self.elements {
            for s in 0..3 {
                let (p, q) = (e[s], e[(s + 1) % 3]);
                *edge_count.entry((p.min(q), p.max(q))).or_insert(0usize) += 1;
            }
        }
        let mut nodes = self.nodes.clone();
        let mut boundary = self.boundary.clone();
        let mut midpoint = std::collections::HashMap::with_capacity(edge_count.len());
        let mut mid = |p: usize, q: usize, nodes: &mut Vec<Point>, boundary: &mut Vec<bool>| {
            let key = (p.min(q), p.max(q));
            *midpoint.entry(key).or_insert_with(|| {
                let (a, b) = (nodes[p], nodes[q]);
                let mut m = [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
                let on_boundary = edge_count[&key] == 1;
                if on_boundary {
                    if let Some(ell) = &self.domain {
                        m = ell.project(m);
                    }
                }
                nodes.push(m);
                boundary.push(on_boundary);
                nodes.len() - 1
            })
        };
        let mut elements = Vec::with_capacity(4 * self.elements.len());
        for &[a, b, c] in &self.elements {
            let ab = mid(a, b, &mut nodes, &mut boundary);
            let bc = mid(b, c, &mut nodes, &mut boundary);
            let ca = mid(c, a, &mut nodes, &mut boundary);
            elements.push([a, ab, ca]);
            elements.push([ab, b, bc]);
            elements.push([ca, bc, c]);
            elements.push([ab, bc, ca]);
        }
        Mesh::from_parts(nodes, elements, boundary, self.domain)
    }

    /// Barycentric coordinates of `p` with respect to element `k` (unclamped).
    pub fn barycentric(&self, k: usize, p: Point) -> [f64; 3] {
        let [a, b, c] = self.element_vertices(k);
        let det = (b[1] - c[1]) * (a[0] - c[0]) + (c[0] - b[0]) * (a[1] - c[1]);
        let l0 = ((b[1] - c[1]) * (p[0] - c[0]) + (c[0] - b[0]) * (p[1] - c[1])) / det;
        let l1 = ((c[1] - a[1]) * (p[0] - c[0]) + (a[0] - c[0]) * (p[1] - c[1])) / det;
        [l0, l1, 1.0 - l0 - l1]
    }

    fn locator(&self) -> &Locator {
        self.locator.get_or_init(|| Locator::new(self))
    }

    /// Finds an element containing `p`. Returns `None` outside the mesh.
    pub fn locate(&self, p: Point) -> Option<Location> {
        const TOL: f64 = 1e-12;
        let loc = self.locator();
        let cell = loc.cell_of(p)?;
        for &k in &loc.cells[cell] {
            let bary = self.barycentric(k as usize, p);
            if bary.iter().all(|&l| l >= -TOL) {
                return Some(Location { element: k as usize, bary: clamp_bary(bary) });
            }
        }
        None
    }

    /// Like [`Mesh::locate`], but points outside the polygon (for instance
    /// on the curved boundary of a finer mesh) snap to the element whose
    /// smallest barycentric coordinate is largest.
    pub fn locate_nearest(&self, p: Point) -> Location {
        if let Some(l) = self.locate(p) {
            return l;
        }
        let mut best = (f64::NEG_INFINITY, 0usize, [0.0; 3]);
        for k in 0..self.elements.len() {
            let bary = self.barycentric(k, p);
            let worst = bary.iter().cloned().fold(f64::INFINITY, f64::min);
            if worst > best.0 {
                best = (worst, k, bary);
            }
        }
        Location { element: best.1, bary: clamp_bary(best.2) }
    }

    pub fn interpolate(&self, nodal_values: &[f64], p: Point) -> Result<f64> {
        if nodal_values.len() != self.nodes.len() {
            return Err(invalid(format!(
                "expected {} nodal values, got {}",
                self.nodes.len(),
                nodal_values.len()
            )));
        }
        let loc = self.locate(p).ok_or(Error::OutOfDomain(p[0], p[1]))?;
        Ok(self.evaluate_at(nodal_values, &loc))
    }

    pub fn evaluate_at(&self, nodal_values: &[f64], loc: &Location) -> f64 {
        let e = self.elements[loc.element];
        (0..3).map(|i| loc.bary[i] * nodal_values[e[i]]).sum()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "nodes {} elements {}", self.nodes.len(), self.elements.len())?;
        for (p, &b) in self.nodes.iter().zip(&self.boundary) {
            writeln!(w, "{:.16e} {:.16e} {}", p[0], p[1], b as u8)?;
        }
        for e in &self.elements {
            writeln!(w, "{} {} {}", e[0], e[1], e[2])?;
        }
        Ok(())
    }

    /// Reads the plain-text mesh format. The resulting mesh carries no
    /// domain description, so refining it leaves boundary midpoints on the
    /// straight edges.
    pub fn read_from<R: BufRead>(r: R) -> Result<Mesh> {
        let mut lines = r.lines();
        let mut next = || -> Result<String> {
            lines.next().ok_or_else(|| Error::Parse("unexpected end of mesh file".into()))?.map_err(Error::from)
        };
        let header = next()?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        let (n, e) = match parts.as_slice() {
            ["nodes", n, "elements", e] => (parse_num::<usize>(n)?, parse_num::<usize>(e)?),
            _ => return Err(Error::Parse(format!("bad mesh header: {header}"))),
        };
        let mut nodes = Vec::with_capacity(n);
        let mut boundary = Vec::with_capacity(n);
        for _ in 0..n {
            let line = next()?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(Error::Parse(format!("bad node line: {line}")));
            }
            nodes.push([parse_num::<f64>(f[0])?, parse_num::<f64>(f[1])?]);
            boundary.push(match f[2] {
                "0" => false,
                "1" => true,
                other => return Err(Error::Parse(format!("bad boundary flag {other}"))),
            });
        }
        let mut elements = Vec::with_capacity(e);
        for _ in 0..e {
            let line = next()?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(Error::Parse(format!("bad element line: {line}")));
            }
            let idx = [parse_num::<usize>(f[0])?, parse_num::<usize>(f[1])?, parse_num::<usize>(f[2])?];
            if idx.iter().any(|&i| i >= n) {
                return Err(Error::Parse(format!("element index out of range: {line}")));
            }
            elements.push(idx);
        }
        Ok(Mesh::from_parts(nodes, elements, boundary, None))
    }
}

fn parse_num<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.parse::<T>().map_err(|_| Error::Parse(format!("cannot parse '{s}'")))
}

fn clamp_bary(b: [f64; 3]) -> [f64; 3] {
    let c = [b[0].max(0.0), b[1].max(0.0), b[2].max(0.0)];
    let s = c[0] + c[1] + c[2];
    [c[0] / s, c[1] / s, c[2] / s]
}

/// Uniform bucket grid over the mesh bounding box.
#[derive(Debug)]
struct Locator {
    origin: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    cells: Vec<Vec<u32>>,
}

impl Locator {
    fn new(mesh: &Mesh) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &mesh.nodes {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        let pad = 1e-9 * (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1.0);
        lo = [lo[0] - pad, lo[1] - pad];
        hi = [hi[0] + pad, hi[1] + pad];
        let ne = mesh.elements.len().max(1) as f64;
        let cell = ((hi[0] - lo[0]) * (hi[1] - lo[1]) / ne).sqrt().max(1e-12) * 1.5;
        let nx = (((hi[0] - lo[0]) / cell).ceil() as usize).max(1);
        let ny = (((hi[1] - lo[1]) / cell).ceil() as usize).max(1);
        let mut cells = vec![Vec::new(); nx * ny];
        for (k, e) in mesh.elements.iter().enumerate() {
            let (mut a, mut b) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for &i in e {
                for d in 0..2 {
                    a[d] = a[d].min(mesh.nodes[i][d]);
                    b[d] = b[d].max(mesh.nodes[i][d]);
                }
            }
            let i0 = ((a[0] - lo[0]) / cell).floor() as usize;
            let i1 = (((b[0] - lo[0]) / cell).floor() as usize).min(nx - 1);
            let j0 = ((a[1] - lo[1]) / cell).floor() as usize;
            let j1 = (((b[1] - lo[1]) / cell).floor() as usize).min(ny - 1);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    cells[j * nx + i].push(k as u32);
                }
            }
        }
        Self { origin: lo, cell, nx, ny, cells }
    }

    fn cell_of(&self, p: Point) -> Option<usize> {
        let fx = (p[0] - self.origin[0]) / self.cell;
        let fy = (p[1] - self.origin[1]) / self.cell;
        if !(fx >= 0.0 && fy >= 0.0) {
            return None;
        }
        let (i, j) = (fx as usize, fy as usize);
        (i < self.nx && j < self.ny).then_some(j * self.nx + i)
    }
}
