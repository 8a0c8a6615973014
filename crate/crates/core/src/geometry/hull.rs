use std::cmp::Ordering;

use super::{clip_convex_2d, Point2};
use crate::error::{Error, Result};

fn cross(o: &Point2, a: &Point2, b: &Point2) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Signed shoelace area; positive for counter-clockwise loops.
pub fn polygon_area_2d(poly: &[Point2]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let o = poly[0];
    let mut s = 0.0;
    for i in 1..n - 1 {
        s += cross(&o, &poly[i], &poly[i + 1]);
    }
    s / 2.0
}

/// Counter-clockwise convex hull (monotone chain) without collinear vertices.
pub fn convex_hull_2d(points: &[Point2]) -> Result<Vec<Point2>> {
    if points.len() < 3 {
        return Err(Error::DegenerateInput("hull needs at least 3 points".into()));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    let mut lower: Vec<Point2> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<Point2> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    if lower.len() < 3 || polygon_area_2d(&lower) <= 0.0 {
        return Err(Error::DegenerateInput("points are collinear".into()));
    }
    Ok(lower)
}

/// Inclusive containment test against a counter-clockwise convex polygon.
pub fn point_in_convex_2d(poly: &[Point2], p: &Point2) -> bool {
    let n = poly.len();
    (0..n).all(|i| cross(&poly[i], &poly[(i + 1) % n], p) >= -1e-12)
}

fn ccw(poly: &[Point2]) -> Vec<Point2> {
    let mut v = poly.to_vec();
    if polygon_area_2d(&v) < 0.0 {
        v.reverse();
    }
    v
}

fn lexicographic(a: &[Point2], b: &[Point2]) -> Ordering {
    for (p, q) in a.iter().zip(b) {
        let o = p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y));
        if o != Ordering::Equal {
            return o;
        }
    }
    a.len().cmp(&b.len())
}

/// Area of the intersection of two convex polygons (either orientation).
/// Arguments are put in a canonical order first, so the result is exactly
/// symmetric.
pub fn convex_polygon_intersection_2d(a: &[Point2], b: &[Point2]) -> f64 {
    if a.len() < 3 || b.len() < 3 {
        return 0.0;
    }
    let (a, b) = (ccw(a), ccw(b));
    let (subject, clipper) = if lexicographic(&a, &b) == Ordering::Greater {
        (b, a)
    } else {
        (a, b)
    };
    let mut out = subject;
    let n = clipper.len();
    for i in 0..n {
        let p = clipper[i];
        let q = clipper[(i + 1) % n];
        // left of p→q is inside
        let (ea, eb) = (-(q.y - p.y), q.x - p.x);
        let ec = -(ea * p.x + eb * p.y);
        out = clip_convex_2d(&out, ea, eb, ec);
        if out.len() < 3 {
            return 0.0;
        }
    }
    polygon_area_2d(&out).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<Point2> {
        vec![
            Point2::new(x0, y0),
            Point2::new(x1, y0),
            Point2::new(x1, y1),
            Point2::new(x0, y1),
        ]
    }

    #[test]
    fn hull_of_square_with_interior_points() {
        let mut pts = rect(0.0, 0.0, 1.0, 1.0);
        pts.extend([Point2::new(0.5, 0.5), Point2::new(0.2, 0.7), Point2::new(0.5, 0.0)]);
        let h = convex_hull_2d(&pts).unwrap();
        assert_eq!(h.len(), 4);
        assert!((polygon_area_2d(&h) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hull_of_collinear_points_fails() {
        let pts: Vec<Point2> = (0..5).map(|i| Point2::new(i as f64, 2.0 * i as f64)).collect();
        assert!(convex_hull_2d(&pts).is_err());
    }

    #[test]
    fn intersection_cases() {
        let a = rect(0.0, 0.0, 1.0, 1.0);
        assert!((convex_polygon_intersection_2d(&a, &a) - 1.0).abs() < 1e-12);
        assert_eq!(convex_polygon_intersection_2d(&a, &rect(2.0, 2.0, 3.0, 3.0)), 0.0);
        let b = rect(0.5, 0.0, 1.5, 1.0);
        assert!((convex_polygon_intersection_2d(&a, &b) - 0.5).abs() < 1e-12);
        let mut cw = b.clone();
        cw.reverse();
        assert!((convex_polygon_intersection_2d(&a, &cw) - 0.5).abs() < 1e-12);
    }
}
