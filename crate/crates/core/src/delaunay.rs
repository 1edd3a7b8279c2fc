//! Bowyer–Watson Delaunay triangulation of a planar point set.
//!
//! Quadratic in the worst case but with a cheap bounding-box reject per
//! triangle, which is plenty for meshes of a few ten thousand nodes.

use std::collections::HashMap;

use crate::mesh::Point;

#[derive(Clone, Copy)]
struct Tri {
    v: [usize; 3],
    // Circumcircle centre and squared radius, for the bounding-box reject.
    cx: f64,
    cy: f64,
    r2: f64,
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Positive when `d` lies strictly inside the circle through CCW `a, b, c`.
fn incircle(a: Point, b: Point, c: Point, d: Point) -> f64 {
    let (adx, ady) = (a[0] - d[0], a[1] - d[1]);
    let (bdx, bdy) = (b[0] - d[0], b[1] - d[1]);
    let (cdx, cdy) = (c[0] - d[0], c[1] - d[1]);
    let ad = adx * adx + ady * ady;
    let bd = bdx * bdx + bdy * bdy;
    let cd = cdx * cdx + cdy * cdy;
    adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx)
}

fn make_tri(pts: &[Point], mut v: [usize; 3]) -> Tri {
    if orient(pts[v[0]], pts[v[1]], pts[v[2]]) < 0.0 {
        v.swap(1, 2);
    }
    let (a, b, c) = (pts[v[0]], pts[v[1]], pts[v[2]]);
    let d = 2.0 * orient(a, b, c);
    let (bx, by) = (b[0] - a[0], b[1] - a[1]);
    let (cx, cy) = (c[0] - a[0], c[1] - a[1]);
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    let ux = (cy * b2 - by * c2) / d;
    let uy = (bx * c2 - cx * b2) / d;
    Tri { v, cx: a[0] + ux, cy: a[1] + uy, r2: ux * ux + uy * uy }
}

/// Counter-clockwise triangles covering the convex hull of `points`.
///
/// Returns an empty list for fewer than three points or when all points are
/// collinear.
pub fn triangulate(points: &[Point]) -> Vec<[usize; 3]> {
    let n = points.len();
    if n < 3 {
        return Vec::new();
    }
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for p in points {
        xmin = xmin.min(p[0]);
        xmax = xmax.max(p[0]);
        ymin = ymin.min(p[1]);
        ymax = ymax.max(p[1]);
    }
    let span = (xmax - xmin).max(ymax - ymin).max(f64::MIN_POSITIVE);
    let (mx, my) = (0.5 * (xmin + xmax), 0.5 * (ymin + ymax));
    let mut pts = points.to_vec();
    pts.push([mx - 40.0 * span, my - 30.0 * span]);
    pts.push([mx + 40.0 * span, my - 30.0 * span]);
    pts.push([mx, my + 40.0 * span]);

    // Insert in a row-snake order so consecutive points are close.
    let cells = ((n as f64).sqrt() / 2.0).ceil().max(1.0);
    let mut order: Vec<usize> = (0..n).collect();
    let key = |i: usize| {
        let row = (((pts[i][1] - ymin) / span) * cells).floor().min(cells - 1.0) as i64;
        let x = if row % 2 == 0 { pts[i][0] } else { -pts[i][0] };
        (row, x)
    };
    order.sort_by(|&a, &b| {
        let (ra, xa) = key(a);
        let (rb, xb) = key(b);
        ra.cmp(&rb).then(xa.partial_cmp(&xb).unwrap())
    });

    let mut tris = vec![make_tri(&pts, [n, n + 1, n + 2])];
    let mut bad = Vec::new();
    let mut edges: HashMap<(usize, usize), (usize, usize, u8)> = HashMap::new();
    for &p in &order {
        let q = pts[p];
        bad.clear();
        for (i, t) in tris.iter().enumerate() {
            let (dx, dy) = (q[0] - t.cx, q[1] - t.cy);
            if dx * dx + dy * dy > t.r2 * (1.0 + 1e-9) {
                continue;
            }
            if incircle(pts[t.v[0]], pts[t.v[1]], pts[t.v[2]], q) > 0.0 {
                bad.push(i);
            }
        }
        edges.clear();
        for &i in &bad {
            let v = tris[i].v;
            for k in 0..3 {
                let (a, b) = (v[k], v[(k + 1) % 3]);
                let e = edges.entry((a.min(b), a.max(b))).or_insert((a, b, 0));
                e.2 += 1;
            }
        }
        // Remove from the back so indices stay valid.
        for &i in bad.iter().rev() {
            tris.swap_remove(i);
        }
        for &(a, b, count) in edges.values() {
            if count == 1 && orient(pts[a], pts[b], q) != 0.0 {
                tris.push(make_tri(&pts, [a, b, p]));
            }
        }
    }
    let mut out: Vec<[usize; 3]> = tris.into_iter().map(|t| t.v).filter(|v| v.iter().all(|&i| i < n)).collect();
    out.sort_unstable();
    out
}
