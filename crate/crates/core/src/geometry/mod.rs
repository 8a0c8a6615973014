//! Geometric primitives and predicates shared by every stage of the pipeline.
//!
//! Everything here is plain `f64` with epsilon guards. Inputs are metric
//! measurements at centimeter accuracy, so exact arithmetic buys nothing.

mod hull;
mod obb;
mod pca;
mod polygon;
mod weld;

pub use hull::{convex_hull_2d, convex_polygon_intersection_2d, point_in_convex_2d, polygon_area_2d};
pub use obb::{obb_from_points, obb_intersection_volume, obb_iou, Obb3};
pub use pca::{covariance, fit_plane_pca, PlaneFit};
pub use polygon::{
    clip_convex_2d, clip_polygon_by_halfspace, Side, newell_normal, polygon_area, triangulate_2d,
    ConvexPolygon3, Polygon3,
};
pub use weld::VertexWelder;

use serde::{Deserialize, Serialize};

pub type Point3 = nalgebra::Point3<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;
pub type Point2 = nalgebra::Point2<f64>;

/// Cross-product norm of two unit normals below which planes count as parallel.
pub const EPS_PARALLEL: f64 = 1e-8;
/// Smallest polygon area kept, m².
pub const EPS_AREA: f64 = 1e-6;
/// Coplanarity tolerance, m.
pub const EPS_COPLANAR: f64 = 1e-6;
/// Half-extent floor for flat point sets, m.
pub const EPS_THICKNESS: f64 = 0.01;

/// Infinite oriented plane `{ p : normal·p + d = 0 }`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub normal: Vec3,
    pub d: f64,
}

impl Plane {
    /// Builds a plane from any nonzero normal; the normal is normalized.
    pub fn new(normal: Vec3, d: f64) -> Self {
        let len = normal.norm();
        debug_assert!(len > 0.0 && d.is_finite());
        Plane {
            normal: normal / len,
            d: d / len,
        }
    }

    pub fn from_point_normal(point: &Point3, normal: Vec3) -> Self {
        let n = normal.normalize();
        Plane {
            normal: n,
            d: -n.dot(&point.coords),
        }
    }

    pub fn signed_distance(&self, p: &Point3) -> f64 {
        self.normal.dot(&p.coords) + self.d
    }

    pub fn distance(&self, p: &Point3) -> f64 {
        self.signed_distance(p).abs()
    }

    pub fn project(&self, p: &Point3) -> Point3 {
        p - self.normal * self.signed_distance(p)
    }

    pub fn flipped(&self) -> Self {
        Plane {
            normal: -self.normal,
            d: -self.d,
        }
    }

    /// Angle between the normals in degrees, ignoring orientation.
    pub fn angle_to_deg(&self, other: &Plane) -> f64 {
        self.normal.dot(&other.normal).abs().min(1.0).acos().to_degrees()
    }

    /// Local 2D frame on the plane anchored at the projection of `near`.
    pub fn frame_at(&self, near: &Point3) -> Frame {
        let n = self.normal;
        let helper = if n.x.abs() <= n.y.abs() && n.x.abs() <= n.z.abs() {
            Vec3::x()
        } else if n.y.abs() <= n.z.abs() {
            Vec3::y()
        } else {
            Vec3::z()
        };
        let u = n.cross(&helper).normalize();
        let v = n.cross(&u);
        Frame {
            origin: self.project(near),
            u,
            v,
            normal: n,
        }
    }

    pub fn transformed(&self, offset: &Vec3) -> Plane {
        // plane moved by +offset
        Plane {
            normal: self.normal,
            d: self.d - self.normal.dot(offset),
        }
    }
}

/// Orthonormal in-plane coordinate system (`u`, `v`) with `u × v = normal`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub origin: Point3,
    pub u: Vec3,
    pub v: Vec3,
    pub normal: Vec3,
}

impl Frame {
    pub fn to_local(&self, p: &Point3) -> Point2 {
        let r = p - self.origin;
        Point2::new(r.dot(&self.u), r.dot(&self.v))
    }

    pub fn to_world(&self, q: &Point2) -> Point3 {
        self.origin + self.u * q.x + self.v * q.y
    }
}

/// Infinite line `point + t·direction`, direction unit length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line3 {
    pub point: Point3,
    pub direction: Vec3,
}

impl Line3 {
    pub fn param(&self, p: &Point3) -> f64 {
        (p - self.point).dot(&self.direction)
    }

    pub fn at(&self, t: f64) -> Point3 {
        self.point + self.direction * t
    }

    pub fn distance(&self, p: &Point3) -> f64 {
        let r = p - self.point;
        (r - self.direction * r.dot(&self.direction)).norm()
    }

    /// Same line with a sign-normalized direction and the anchor closest to the origin.
    pub fn canonical(&self) -> Line3 {
        let d = self.direction;
        let flip = if d.x.abs() > 1e-9 {
            d.x < 0.0
        } else if d.y.abs() > 1e-9 {
            d.y < 0.0
        } else {
            d.z < 0.0
        };
        let direction = if flip { -d } else { d };
        let point = self.point - direction * self.point.coords.dot(&direction);
        Line3 { point, direction }
    }
}

/// Intersection line of two planes, `None` when they are parallel.
pub fn intersect_planes(a: &Plane, b: &Plane) -> Option<Line3> {
    let dir = a.normal.cross(&b.normal);
    let len = dir.norm();
    if len < EPS_PARALLEL {
        return None;
    }
    // point = ((-a.d) (nb × dir) + (-b.d) (dir × na)) / |dir|²
    let p = (b.normal.cross(&dir) * (-a.d) + dir.cross(&a.normal) * (-b.d)) / (len * len);
    Some(Line3 {
        point: Point3::from(p),
        direction: dir / len,
    })
}

/// Axis-aligned box in 3D.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb3 {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb3 {
    pub fn new(min: Point3, max: Point3) -> Self {
        debug_assert!(min.x <= max.x && min.y <= max.y && min.z <= max.z);
        Aabb3 { min, max }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point3>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = *it.next()?;
        let mut b = Aabb3 {
            min: first,
            max: first,
        };
        for p in it {
            b.include(p);
        }
        Some(b)
    }

    pub fn include(&mut self, p: &Point3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb3) -> Aabb3 {
        Aabb3 {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn extents(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Point3 {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn contains(&self, other: &Aabb3) -> bool {
        (0..3).all(|i| self.min[i] <= other.min[i] && self.max[i] >= other.max[i])
    }

    pub fn contains_point(&self, p: &Point3) -> bool {
        (0..3).all(|i| self.min[i] <= p[i] && p[i] <= self.max[i])
    }

    pub fn footprint(&self) -> Aabb2 {
        Aabb2 {
            min: Point2::new(self.min.x, self.min.y),
            max: Point2::new(self.max.x, self.max.y),
        }
    }

    /// Squared distance from `p` to the box, zero inside.
    pub fn distance_squared(&self, p: &Point3) -> f64 {
        (0..3)
            .map(|i| {
                let d = (self.min[i] - p[i]).max(p[i] - self.max[i]).max(0.0);
                d * d
            })
            .sum()
    }

    /// The six bounding halfspaces as outward planes (`-x, +x, -y, +y, -z, +z`).
    pub fn face_planes(&self) -> [Plane; 6] {
        [
            Plane { normal: -Vec3::x(), d: self.min.x },
            Plane { normal: Vec3::x(), d: -self.max.x },
            Plane { normal: -Vec3::y(), d: self.min.y },
            Plane { normal: Vec3::y(), d: -self.max.y },
            Plane { normal: -Vec3::z(), d: self.min.z },
            Plane { normal: Vec3::z(), d: -self.max.z },
        ]
    }
}

/// Axis-aligned rectangle in the XY plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb2 {
    pub min: Point2,
    pub max: Point2,
}

impl Aabb2 {
    pub fn intersects(&self, other: &Aabb2) -> bool {
        self.min.x <= other.max.x
            && other.min.x <= self.max.x
            && self.min.y <= other.max.y
            && other.min.y <= self.max.y
    }
}

/// Grows every axis by `ratio` of its length on both ends. Flat axes are first
/// padded to `EPS_THICKNESS` half-width so the result always has volume.
pub fn expand_aabb(aabb: &Aabb3, ratio: f64) -> Aabb3 {
    assert!(ratio >= 0.0, "expansion ratio must be nonnegative");
    let center = aabb.center();
    let mut half = aabb.extents() / 2.0;
    for i in 0..3 {
        if half[i] < EPS_THICKNESS {
            half[i] = EPS_THICKNESS;
        }
        half[i] *= 1.0 + 2.0 * ratio;
    }
    Aabb3 {
        min: center - half,
        max: center + half,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn perpendicular_planes_meet_in_y_axis() {
        let z0 = Plane::new(Vec3::z(), 0.0);
        let x0 = Plane::new(Vec3::x(), 0.0);
        let line = intersect_planes(&z0, &x0).unwrap();
        assert!(line.point.coords.norm() < 1e-12);
        assert!(close(line.direction.y.abs(), 1.0, 1e-12));
    }

    #[test]
    fn parallel_and_near_parallel_planes_do_not_meet() {
        let z0 = Plane::new(Vec3::z(), 0.0);
        let z1 = Plane::new(Vec3::z(), -1.0);
        assert!(intersect_planes(&z0, &z1).is_none());
        let a = Plane::new(Vec3::new(1.0, 0.0, 0.0), 0.0);
        let b = Plane::new(Vec3::new(1.0, 1e-10, 0.0), 0.0);
        assert!(intersect_planes(&a, &b).is_none());
    }

    #[test]
    fn intersection_line_lies_on_both_planes() {
        let a = Plane::new(Vec3::new(1.0, 2.0, -0.5), 3.0);
        let b = Plane::new(Vec3::new(-0.3, 0.2, 1.0), -1.5);
        let line = intersect_planes(&a, &b).unwrap();
        for t in [-10.0, 0.0, 7.5] {
            let p = line.at(t);
            assert!(a.distance(&p) < 1e-12);
            assert!(b.distance(&p) < 1e-12);
        }
    }

    #[test]
    fn expand_unit_cube() {
        let b = Aabb3::new(Point3::origin(), Point3::new(1.0, 1.0, 1.0));
        let e = expand_aabb(&b, 0.1);
        assert!(close(e.extents().x, 1.2, 1e-12));
        assert!(close(e.center().z, 0.5, 1e-12));
        assert_eq!(expand_aabb(&b, 0.0), b);
    }

    #[test]
    fn expand_flat_box_pads_thin_axis() {
        let b = Aabb3::new(Point3::new(0.0, 0.0, 2.0), Point3::new(4.0, 3.0, 2.0));
        let e = expand_aabb(&b, 0.1);
        assert!(e.contains(&b));
        assert!(e.extents().z > 0.0);
        assert!(close(e.extents().z, 2.0 * EPS_THICKNESS * 1.2, 1e-12));
    }

    #[test]
    fn frame_round_trip() {
        let plane = Plane::new(Vec3::new(0.3, -0.4, 0.8), 2.0);
        let f = plane.frame_at(&Point3::new(1.0, 2.0, 3.0));
        assert!(close(f.u.cross(&f.v).dot(&plane.normal), 1.0, 1e-12));
        let p = plane.project(&Point3::new(5.0, -1.0, 0.5));
        let back = f.to_world(&f.to_local(&p));
        assert!((back - p).norm() < 1e-12);
    }
}
