//! Oriented boxes and exact convex intersection volumes.

use serde::{Deserialize, Serialize};

use super::{convex_hull_2d, covariance, Plane, Point2, Point3, Vec3, EPS_THICKNESS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obb3 {
    pub center: Point3,
    pub axes: [Vec3; 3],
    pub half_extents: Vec3,
}

impl Obb3 {
    pub fn axis_aligned(min: Point3, max: Point3) -> Self {
        Obb3 {
            center: nalgebra::center(&min, &max),
            axes: [Vec3::x(), Vec3::y(), Vec3::z()],
            half_extents: (max - min) / 2.0,
        }
    }

    pub fn volume(&self) -> f64 {
        8.0 * self.half_extents.x * self.half_extents.y * self.half_extents.z
    }

    pub fn corners(&self) -> [Point3; 8] {
        let mut out = [Point3::origin(); 8];
        for (k, c) in out.iter_mut().enumerate() {
            let sx = if k & 1 == 0 { -1.0 } else { 1.0 };
            let sy = if k & 2 == 0 { -1.0 } else { 1.0 };
            let sz = if k & 4 == 0 { -1.0 } else { 1.0 };
            *c = self.center
                + self.axes[0] * (sx * self.half_extents.x)
                + self.axes[1] * (sy * self.half_extents.y)
                + self.axes[2] * (sz * self.half_extents.z);
        }
        out
    }

    /// The six outward face planes.
    pub fn face_planes(&self) -> [Plane; 6] {
        let mut out = [Plane { normal: Vec3::x(), d: 0.0 }; 6];
        for i in 0..3 {
            for (s, sign) in [(0, 1.0), (1, -1.0)] {
                let n = self.axes[i] * sign;
                let p = self.center + n * self.half_extents[i];
                out[2 * i + s] = Plane::from_point_normal(&p, n);
            }
        }
        out
    }

    fn polytope(&self) -> Polytope {
        let c = self.corners();
        // corner index bits: x=1, y=2, z=4; loops wound outward
        let quads: [[usize; 4]; 6] = [
            [0, 4, 6, 2],
            [1, 3, 7, 5],
            [0, 1, 5, 4],
            [2, 6, 7, 3],
            [0, 2, 3, 1],
            [4, 5, 7, 6],
        ];
        let mut faces: Vec<Vec<Point3>> = quads.iter().map(|q| q.iter().map(|&i| c[i]).collect()).collect();
        // a left-handed axis frame flips every winding
        if self.axes[0].cross(&self.axes[1]).dot(&self.axes[2]) < 0.0 {
            for f in &mut faces {
                f.reverse();
            }
        }
        Polytope { faces }
    }
}

/// Closed convex polytope as outward-wound polygonal faces.
struct Polytope {
    faces: Vec<Vec<Point3>>,
}

impl Polytope {
    /// Keeps the part with `plane.signed_distance <= 0`.
    fn clip(&self, plane: &Plane) -> Polytope {
        const EPS: f64 = 1e-9;
        let mut faces = Vec::with_capacity(self.faces.len() + 1);
        let mut cut_points: Vec<Point3> = Vec::new();
        let mut has_cap = false;
        for f in &self.faces {
            let dist: Vec<f64> = f.iter().map(|p| plane.signed_distance(p)).collect();
            if dist.iter().all(|d| d.abs() <= EPS) {
                // face lies on the cutting plane: it is its own cap when it
                // faces outward, otherwise the solid is on the discarded side
                if super::newell_normal(f).dot(&plane.normal) > 0.0 {
                    faces.push(f.clone());
                    has_cap = true;
                    continue;
                }
                return Polytope { faces: Vec::new() };
            }
            let n = f.len();
            let mut out = Vec::with_capacity(n + 1);
            for i in 0..n {
                let j = (i + 1) % n;
                let (da, db) = (dist[i], dist[j]);
                if da <= EPS {
                    out.push(f[i]);
                    if da.abs() <= EPS {
                        cut_points.push(f[i]);
                    }
                }
                if (da < -EPS && db > EPS) || (da > EPS && db < -EPS) {
                    let p = f[i] + (f[j] - f[i]) * (da / (da - db));
                    out.push(p);
                    cut_points.push(p);
                }
            }
            if out.len() >= 3 {
                faces.push(out);
            }
        }
        if !has_cap && cut_points.len() >= 3 {
            if let Some(cap) = cap_polygon(&cut_points, plane) {
                faces.push(cap);
            }
        }
        Polytope { faces }
    }

    fn volume(&self) -> f64 {
        let Some(origin) = self.faces.first().and_then(|f| f.first()).copied() else {
            return 0.0;
        };
        let mut v = 0.0;
        for f in &self.faces {
            let a = f[0] - origin;
            for i in 1..f.len() - 1 {
                let b = f[i] - origin;
                let c = f[i + 1] - origin;
                v += a.dot(&b.cross(&c));
            }
        }
        (v / 6.0).max(0.0)
    }
}

/// Orders cut points on `plane` into a loop wound along the plane normal
/// (outward for the kept negative side).
fn cap_polygon(points: &[Point3], plane: &Plane) -> Option<Vec<Point3>> {
    let frame = plane.frame_at(&points[0]);
    let local: Vec<Point2> = points.iter().map(|p| frame.to_local(p)).collect();
    let hull = convex_hull_2d(&local).ok()?;
    Some(hull.iter().map(|q| frame.to_world(q)).collect())
}

/// Oriented box of a point set. The thin axis comes from the smallest
/// principal component; the in-plane axes are the minimum-area rectangle of
/// the projected hull. Flat sets get `EPS_THICKNESS` half-extent floors.
pub fn obb_from_points(points: &[Point3]) -> Result<Obb3> {
    if points.len() < 3 {
        return Err(Error::DegenerateInput(format!(
            "oriented box needs at least 3 points, got {}",
            points.len()
        )));
    }
    let (centroid, cov) = covariance(points);
    let eig = nalgebra::SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut best: Option<(f64, Obb3)> = None;
    for &k in order.iter().rev() {
        let normal: Vec3 = eig.eigenvectors.column(k).into_owned();
        if normal.norm() < 0.5 {
            continue;
        }
        let obb = box_around_axis(points, &centroid, &normal.normalize());
        let vol = obb.volume();
        if best.as_ref().is_none_or(|(v, _)| vol < *v - 1e-12 * v.abs()) {
            best = Some((vol, obb));
        }
    }
    best.map(|(_, b)| b)
        .ok_or_else(|| Error::DegenerateInput("oriented box eigen-decomposition failed".into()))
}

fn box_around_axis(points: &[Point3], centroid: &Point3, normal: &Vec3) -> Obb3 {
    let plane = Plane::from_point_normal(centroid, *normal);
    let frame = plane.frame_at(centroid);
    let local: Vec<Point2> = points.iter().map(|p| frame.to_local(p)).collect();
    let (dir_u, dir_v) = match convex_hull_2d(&local) {
        Ok(hull) => min_area_rect_dirs(&hull),
        // collinear projection: any direction along the spread works
        Err(_) => {
            let far = local
                .iter()
                .max_by(|a, b| a.coords.norm_squared().total_cmp(&b.coords.norm_squared()))
                .map(|p| p.coords)
                .filter(|c| c.norm() > 0.0)
                .unwrap_or(nalgebra::Vector2::x());
            let u = far.normalize();
            (u, nalgebra::Vector2::new(-u.y, u.x))
        }
    };
    let axes = [
        frame.u * dir_u.x + frame.v * dir_u.y,
        frame.u * dir_v.x + frame.v * dir_v.y,
        frame.normal,
    ];
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        let r = p - centroid;
        for i in 0..3 {
            let t = r.dot(&axes[i]);
            lo[i] = lo[i].min(t);
            hi[i] = hi[i].max(t);
        }
    }
    let mut center = *centroid;
    let mut half = Vec3::zeros();
    for i in 0..3 {
        center += axes[i] * ((lo[i] + hi[i]) / 2.0);
        half[i] = ((hi[i] - lo[i]) / 2.0).max(EPS_THICKNESS);
    }
    Obb3 {
        center,
        axes,
        half_extents: half,
    }
}

/// Edge directions of the minimum-area enclosing rectangle of a ccw hull.
fn min_area_rect_dirs(hull: &[Point2]) -> (nalgebra::Vector2<f64>, nalgebra::Vector2<f64>) {
    let n = hull.len();
    let mut best = (f64::INFINITY, nalgebra::Vector2::x());
    for i in 0..n {
        let e = hull[(i + 1) % n] - hull[i];
        let len = e.norm();
        if len == 0.0 {
            continue;
        }
        let u = e / len;
        let v = nalgebra::Vector2::new(-u.y, u.x);
        let (mut u0, mut u1, mut v0, mut v1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in hull {
            let a = p.coords.dot(&u);
            let b = p.coords.dot(&v);
            u0 = u0.min(a);
            u1 = u1.max(a);
            v0 = v0.min(b);
            v1 = v1.max(b);
        }
        let area = (u1 - u0) * (v1 - v0);
        if area < best.0 - 1e-12 * area.abs() {
            best = (area, u);
        }
    }
    let u = best.1;
    (u, nalgebra::Vector2::new(-u.y, u.x))
}

/// Exact volume of the intersection of two boxes: box A's polytope clipped
/// against the six halfspaces of box B.
pub fn obb_intersection_volume(a: &Obb3, b: &Obb3) -> f64 {
    // quick reject on bounding spheres
    if (a.center - b.center).norm() > a.half_extents.norm() + b.half_extents.norm() {
        return 0.0;
    }
    let mut poly = a.polytope();
    for plane in b.face_planes() {
        poly = poly.clip(&plane);
        if poly.faces.len() < 4 {
            return 0.0;
        }
    }
    poly.volume()
}

/// Volume intersection-over-union of two oriented boxes, in `[0, 1]`.
pub fn obb_iou(a: &Obb3, b: &Obb3) -> f64 {
    let (va, vb) = (a.volume(), b.volume());
    if va <= 0.0 || vb <= 0.0 {
        return 0.0;
    }
    // symmetric by construction: always clip the canonical first box
    let inter = if canonical_first(a, b) {
        obb_intersection_volume(a, b)
    } else {
        obb_intersection_volume(b, a)
    };
    let inter = inter.min(va).min(vb);
    (inter / (va + vb - inter)).clamp(0.0, 1.0)
}

fn canonical_first(a: &Obb3, b: &Obb3) -> bool {
    let key = |o: &Obb3| [o.center.x, o.center.y, o.center.z, o.half_extents.x, o.half_extents.y, o.half_extents.z];
    let (ka, kb) = (key(a), key(b));
    for (x, y) in ka.iter().zip(&kb) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            _ => {}
        }
    }
    true
}
