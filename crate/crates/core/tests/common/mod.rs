#![allow(dead_code)]

use lodrefine::candidates::{generate_candidates, CandidateSet, PlaneOrigin, SupportingPlane};
use lodrefine::geometry::{Aabb3, Plane, Point3, Polygon3, Vec3};
use lodrefine::selection::{SelectionProblem, Solution, SolveStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.2 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn unit_bbox() -> Aabb3 {
    Aabb3::new(Point3::new(-1.0, -1.0, -1.0), Point3::new(1.0, 1.0, 1.0))
}

/// Random planes through points near the center of `[-1, 1]^3`.
pub fn random_planes(rng: &mut ChaCha8Rng, n: usize) -> Vec<SupportingPlane> {
    (0..n)
        .map(|i| {
            let p = Point3::new(
                rng.random_range(-0.4..0.4),
                rng.random_range(-0.4..0.4),
                rng.random_range(-0.4..0.4),
            );
            SupportingPlane {
                plane: Plane::from_point_normal(&p, random_unit(rng)),
                origin: PlaneOrigin::Coarse(i),
            }
        })
        .collect()
}

/// Candidate sets with at most `max_faces` faces from 3 to 5 random planes,
/// with random confidences.
pub fn random_small_set(rng: &mut ChaCha8Rng, max_faces: usize) -> CandidateSet {
    loop {
        let n = rng.random_range(3..=5);
        let planes = random_planes(rng, n);
        let Ok(mut set) = generate_candidates(&planes, &unit_bbox()) else { continue };
        if set.faces.len() < 4 || set.faces.len() > max_faces {
            continue;
        }
        for f in &mut set.faces {
            f.confidence = if rng.random_bool(0.5) { rng.random_range(0.6..1.0) } else { rng.random_range(0.0..1.0) };
        }
        return set;
    }
}

/// Exhaustive minimum over all assignments with 0 or 2 selected faces per
/// edge. Objective terms are summed in face order, as documented for the
/// problem type.
pub fn brute_force_optimum(p: &SelectionProblem) -> (f64, u64) {
    let n = p.cov_costs.len();
    assert!(n <= 24);
    let edge_masks: Vec<u64> = p.edges.iter().map(|e| e.faces.iter().fold(0u64, |m, &f| m | (1 << f))).collect();
    let pair_masks: Vec<Vec<u64>> = p
        .edges
        .iter()
        .map(|e| e.sharp_pairs.iter().map(|&(i, j)| (1u64 << i) | (1u64 << j)).collect())
        .collect();
    let mut best = (f64::INFINITY, 0u64);
    for x in 0u64..(1u64 << n) {
        if !edge_masks.iter().all(|&m| matches!((x & m).count_ones(), 0 | 2)) {
            continue;
        }
        let mut cov = 0.0;
        for (i, c) in p.cov_costs.iter().enumerate() {
            if x >> i & 1 == 1 {
                cov += c;
            }
        }
        let sharp = pair_masks.iter().filter(|ms| ms.iter().any(|&m| m & !x == 0)).count();
        let obj = p.lambda_coverage * cov + p.lambda_complexity * (sharp as f64) / (p.edges.len() as f64);
        if obj < best.0 {
            best = (obj, x);
        }
    }
    best
}

/// Every candidate edge has 0 or 2 selected incident faces.
pub fn assert_edge_rule(set: &CandidateSet, sol: &Solution) {
    assert_eq!(sol.status, SolveStatus::Optimal);
    let x = sol.assignment(set.faces.len());
    for (ei, e) in set.edges.iter().enumerate() {
        let k = e.incident_faces.iter().filter(|&&f| x[f]).count();
        assert!(k == 0 || k == 2, "edge {ei} has {k} selected faces");
    }
}

/// Point-to-triangle distance by projection and edge fallbacks.
pub fn point_triangle_distance(p: &Point3, a: &Point3, b: &Point3, c: &Point3) -> f64 {
    let n = (b - a).cross(&(c - a));
    let n2 = n.norm_squared();
    if n2 > 0.0 {
        let q = p - n * ((p - a).dot(&n) / n2);
        let inside = [(a, b), (b, c), (c, a)]
            .iter()
            .all(|(u, v)| (*v - *u).cross(&(q - *u)).dot(&n) >= 0.0);
        if inside {
            return (p - q).norm();
        }
    }
    [(a, b), (b, c), (c, a)]
        .iter()
        .map(|(u, v)| point_segment_distance(p, u, v))
        .fold(f64::INFINITY, f64::min)
}

pub fn point_segment_distance(p: &Point3, a: &Point3, b: &Point3) -> f64 {
    let d = b - a;
    let l2 = d.norm_squared();
    let t = if l2 == 0.0 { 0.0 } else { ((p - a).dot(&d) / l2).clamp(0.0, 1.0) };
    (p - (a + d * t)).norm()
}

/// Fan triangulation; valid for the convex faces used in these tests.
pub fn fan_triangles(faces: &[Polygon3]) -> Vec<[Point3; 3]> {
    let mut out = Vec::new();
    for f in faces {
        let v = &f.vertices;
        for k in 1..v.len() - 1 {
            out.push([v[0], v[k], v[k + 1]]);
        }
    }
    out
}

pub fn brute_force_distance(p: &Point3, tris: &[[Point3; 3]]) -> f64 {
    tris.iter()
        .map(|t| point_triangle_distance(p, &t[0], &t[1], &t[2]))
        .fold(f64::INFINITY, f64::min)
}

/// Faces of the refined model lying on a plane, for plane-recovery checks.
pub fn faces_on_plane<'a>(faces: &'a [Polygon3], truth: &Plane, tol_m: f64, tol_deg: f64) -> Vec<&'a Polygon3> {
    faces
        .iter()
        .filter(|f| {
            let p = f.plane().unwrap();
            p.angle_to_deg(truth) < tol_deg && truth.distance(&f.centroid()) < tol_m
        })
        .collect()
}
