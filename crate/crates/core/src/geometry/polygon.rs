use serde::{Deserialize, Serialize};

use super::{fit_plane_pca, Frame, Plane, Point2, Point3, Vec3, EPS_AREA, EPS_COPLANAR};
use crate::error::{Error, Result};

/// Signed distances below this magnitude count as lying on a clipping plane.
const CLIP_EPS: f64 = 1e-9;

/// Area-weighted normal of a vertex loop (Newell's method). Its length is
/// twice the polygon area; its direction follows the winding.
pub fn newell_normal(vertices: &[Point3]) -> Vec3 {
    let n = vertices.len();
    if n < 3 {
        return Vec3::zeros();
    }
    // relative to the first vertex keeps large coordinates from cancelling
    let o = vertices[0];
    let mut acc = Vec3::zeros();
    for i in 1..n - 1 {
        acc += (vertices[i] - o).cross(&(vertices[i + 1] - o));
    }
    acc
}

/// Area of any planar simple polygon.
pub fn polygon_area(vertices: &[Point3]) -> f64 {
    newell_normal(vertices).norm() / 2.0
}

/// A planar vertex loop, not necessarily convex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon3 {
    pub vertices: Vec<Point3>,
}

impl Polygon3 {
    pub fn new(vertices: Vec<Point3>) -> Self {
        Polygon3 { vertices }
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.vertices)
    }

    /// Unit normal from the winding, or zero for degenerate loops.
    pub fn normal(&self) -> Vec3 {
        let n = newell_normal(&self.vertices);
        let len = n.norm();
        if len > 0.0 {
            n / len
        } else {
            n
        }
    }

    pub fn centroid(&self) -> Point3 {
        let (c, _) = area_centroid(&self.vertices);
        c
    }

    /// Plane through the vertices, oriented by the winding.
    pub fn plane(&self) -> Result<Plane> {
        let fit = fit_plane_pca(&self.vertices)?;
        Ok(fit.oriented_towards(&newell_normal(&self.vertices)).plane)
    }

    /// Ear-clipped triangles in world coordinates, oriented like the loop.
    pub fn triangles(&self) -> Vec<[Point3; 3]> {
        if self.vertices.len() == 3 {
            return vec![[self.vertices[0], self.vertices[1], self.vertices[2]]];
        }
        let normal = self.normal();
        if normal == Vec3::zeros() {
            return Vec::new();
        }
        let frame = Plane::from_point_normal(&self.vertices[0], normal).frame_at(&self.vertices[0]);
        let local: Vec<Point2> = self.vertices.iter().map(|p| frame.to_local(p)).collect();
        triangulate_2d(&local)
            .into_iter()
            .map(|[a, b, c]| [self.vertices[a], self.vertices[b], self.vertices[c]])
            .collect()
    }

    pub fn reversed(&self) -> Self {
        let mut v = self.vertices.clone();
        v.reverse();
        Polygon3 { vertices: v }
    }
}

/// Area and area-weighted centroid of a planar loop.
pub(crate) fn area_centroid(vertices: &[Point3]) -> (Point3, f64) {
    let o = vertices[0];
    let n = newell_normal(vertices);
    let len = n.norm();
    if len == 0.0 {
        let mean = vertices.iter().fold(Vec3::zeros(), |a, p| a + p.coords) / vertices.len() as f64;
        return (Point3::from(mean), 0.0);
    }
    let unit = n / len;
    let mut weighted = Vec3::zeros();
    let mut total = 0.0;
    for i in 1..vertices.len() - 1 {
        let a = vertices[i] - o;
        let b = vertices[i + 1] - o;
        let w = a.cross(&b).dot(&unit) / 2.0;
        weighted += (a + b) / 3.0 * w;
        total += w;
    }
    (o + weighted / total, total)
}

/// A convex, planar, counter-clockwise (about its normal) polygon with
/// nonzero area. Collinear boundary vertices are allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexPolygon3 {
    vertices: Vec<Point3>,
}

impl ConvexPolygon3 {
    pub fn new(vertices: Vec<Point3>) -> Result<Self> {
        if vertices.len() < 3 {
            return Err(Error::DegenerateInput("polygon needs at least 3 vertices".into()));
        }
        let n = newell_normal(&vertices);
        let area = n.norm() / 2.0;
        if area <= EPS_AREA {
            return Err(Error::DegenerateInput(format!("polygon area {area:.3e} too small")));
        }
        let unit = n / n.norm();
        let plane = Plane::from_point_normal(&vertices[0], unit);
        let plane = Plane {
            d: plane.d - vertices.iter().map(|p| plane.signed_distance(p)).sum::<f64>() / vertices.len() as f64,
            ..plane
        };
        if vertices.iter().any(|p| plane.distance(p) > EPS_COPLANAR) {
            return Err(Error::DegenerateInput("polygon vertices are not coplanar".into()));
        }
        let k = vertices.len();
        for i in 0..k {
            let a = vertices[i];
            let b = vertices[(i + 1) % k];
            let c = vertices[(i + 2) % k];
            let turn = (b - a).cross(&(c - b)).dot(&unit);
            let scale = (b - a).norm() * (c - b).norm();
            if turn < -1e-9 * scale.max(1e-12) {
                return Err(Error::DegenerateInput("polygon is not convex".into()));
            }
        }
        Ok(ConvexPolygon3 { vertices })
    }

    /// Skips validation; callers guarantee the invariants.
    pub(crate) fn new_unchecked(vertices: Vec<Point3>) -> Self {
        ConvexPolygon3 { vertices }
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn into_vertices(self) -> Vec<Point3> {
        self.vertices
    }

    pub fn area(&self) -> f64 {
        polygon_area(&self.vertices)
    }

    pub fn normal(&self) -> Vec3 {
        newell_normal(&self.vertices).normalize()
    }

    pub fn centroid(&self) -> Point3 {
        area_centroid(&self.vertices).0
    }

    pub fn supporting_plane(&self) -> Plane {
        Plane::from_point_normal(&self.centroid(), self.normal())
    }

    pub fn to_polygon(&self) -> Polygon3 {
        Polygon3::new(self.vertices.clone())
    }

    /// Vertices expressed in `frame`.
    pub fn project_2d(&self, frame: &Frame) -> Vec<Point2> {
        self.vertices.iter().map(|p| frame.to_local(p)).collect()
    }
}

/// Which side of a plane to keep when clipping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `normal·p + d >= 0`
    Positive,
    /// `normal·p + d <= 0`
    Negative,
}

/// Sutherland–Hodgman clip of a convex polygon by one halfspace. Returns
/// `None` when nothing with area above `EPS_AREA` remains.
pub fn clip_polygon_by_halfspace(
    poly: &ConvexPolygon3,
    plane: &Plane,
    keep: Side,
) -> Option<ConvexPolygon3> {
    let sign = match keep {
        Side::Positive => 1.0,
        Side::Negative => -1.0,
    };
    let verts = poly.vertices();
    let dist: Vec<f64> = verts.iter().map(|p| sign * plane.signed_distance(p)).collect();
    if dist.iter().all(|&d| d >= -CLIP_EPS) {
        return Some(poly.clone());
    }
    if dist.iter().all(|&d| d <= CLIP_EPS) {
        return None;
    }
    let n = verts.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let j = (i + 1) % n;
        let (a, b) = (verts[i], verts[j]);
        let (da, db) = (dist[i], dist[j]);
        if da >= -CLIP_EPS {
            out.push(a);
        }
        if (da > CLIP_EPS && db < -CLIP_EPS) || (da < -CLIP_EPS && db > CLIP_EPS) {
            let t = da / (da - db);
            out.push(a + (b - a) * t);
        }
    }
    dedup_loop(&mut out, 1e-12);
    if out.len() < 3 || polygon_area(&out) <= EPS_AREA {
        return None;
    }
    Some(ConvexPolygon3::new_unchecked(out))
}

fn dedup_loop<P: Copy + std::ops::Sub<Output = V>, V: VecNorm>(pts: &mut Vec<P>, tol: f64) {
    pts.dedup_by(|a, b| (*a - *b).len() <= tol);
    while pts.len() > 1 && (pts[0] - pts[pts.len() - 1]).len() <= tol {
        pts.pop();
    }
}

trait VecNorm {
    fn len(&self) -> f64;
}

impl VecNorm for Vec3 {
    fn len(&self) -> f64 {
        self.norm()
    }
}

impl VecNorm for nalgebra::Vector2<f64> {
    fn len(&self) -> f64 {
        self.norm()
    }
}

/// Clips a convex 2D polygon against the halfplane `a·x + b·y + c >= 0`.
pub fn clip_convex_2d(poly: &[Point2], a: f64, b: f64, c: f64) -> Vec<Point2> {
    let n = poly.len();
    if n == 0 {
        return Vec::new();
    }
    let dist: Vec<f64> = poly.iter().map(|p| a * p.x + b * p.y + c).collect();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let j = (i + 1) % n;
        let (da, db) = (dist[i], dist[j]);
        if da >= 0.0 {
            out.push(poly[i]);
        }
        if (da > 0.0 && db < 0.0) || (da < 0.0 && db > 0.0) {
            let t = da / (da - db);
            out.push(poly[i] + (poly[j] - poly[i]) * t);
        }
    }
    dedup_loop(&mut out, 1e-14);
    out
}

fn cross2(o: &Point2, a: &Point2, b: &Point2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

fn point_in_triangle(p: &Point2, a: &Point2, b: &Point2, c: &Point2) -> bool {
    cross2(a, b, p) >= 0.0 && cross2(b, c, p) >= 0.0 && cross2(c, a, p) >= 0.0
}

/// Ear-clipping triangulation of a simple polygon. Triangles keep the input
/// orientation. Returns vertex-index triples.
pub fn triangulate_2d(poly: &[Point2]) -> Vec<[usize; 3]> {
    let n = poly.len();
    if n < 3 {
        return Vec::new();
    }
    let signed: f64 = (0..n)
        .map(|i| {
            let j = (i + 1) % n;
            poly[i].x * poly[j].y - poly[j].x * poly[i].y
        })
        .sum();
    let ccw = signed >= 0.0;
    // work on a counter-clockwise index ring
    let mut ring: Vec<usize> = if ccw { (0..n).collect() } else { (0..n).rev().collect() };
    let mut tris = Vec::with_capacity(n - 2);
    while ring.len() > 3 {
        let m = ring.len();
        let mut ear = None;
        for k in 0..m {
            let (ip, i, inx) = (ring[(k + m - 1) % m], ring[k], ring[(k + 1) % m]);
            let (a, b, c) = (&poly[ip], &poly[i], &poly[inx]);
            if cross2(a, b, c) <= 0.0 {
                continue;
            }
            let blocked = ring.iter().any(|&q| {
                q != ip && q != i && q != inx && {
                    let p = &poly[q];
                    p != a && p != b && p != c && point_in_triangle(p, a, b, c)
                }
            });
            if !blocked {
                ear = Some(k);
                break;
            }
        }
        // collinear or numerically stuck: drop the flattest vertex
        let k = ear.unwrap_or_else(|| {
            (0..m)
                .min_by(|&x, &y| {
                    let fx = cross2(&poly[ring[(x + m - 1) % m]], &poly[ring[x]], &poly[ring[(x + 1) % m]]).abs();
                    let fy = cross2(&poly[ring[(y + m - 1) % m]], &poly[ring[y]], &poly[ring[(y + 1) % m]]).abs();
                    fx.total_cmp(&fy)
                })
                .unwrap()
        });
        let (ip, i, inx) = (ring[(k + m - 1) % m], ring[k], ring[(k + 1) % m]);
        if cross2(&poly[ip], &poly[i], &poly[inx]) > 0.0 {
            tris.push([ip, i, inx]);
        }
        ring.remove(k);
    }
    if cross2(&poly[ring[0]], &poly[ring[1]], &poly[ring[2]]) > 0.0 {
        tris.push([ring[0], ring[1], ring[2]]);
    }
    if !ccw {
        for t in &mut tris {
            t.swap(1, 2);
        }
    }
    tris
}
