mod common;

use std::collections::BTreeSet;

use common::*;
use lodrefine::candidates::{crop_plane_to_bbox, generate_candidates, CandidateSet};
use lodrefine::evaluation::{c2m, TriangleBvh};
use lodrefine::geometry::*;
use lodrefine::synth::box_faces;
use proptest::prelude::*;
use rand::Rng;

fn regular_polygon(center: Point3, radius: f64, n: usize, normal: Vec3) -> ConvexPolygon3 {
    let plane = Plane::from_point_normal(&center, normal);
    let f = plane.frame_at(&center);
    let pts = (0..n)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / n as f64;
            f.to_world(&Point2::new(radius * a.cos(), radius * a.sin()))
        })
        .collect();
    ConvexPolygon3::new(pts).unwrap()
}

proptest! {
    #[test]
    fn clip_areas_add_up(
        n in 3usize..12, r in 0.5f64..20.0,
        nx in -1.0f64..1.0, ny in -1.0f64..1.0, nz in 0.1f64..1.0,
        cx in 0.0f64..0.3, cy in 0.0f64..0.3,
        hx in -1.0f64..1.0, hy in -1.0f64..1.0, hz in -1.0f64..1.0,
    ) {
        let poly = regular_polygon(Point3::new(1.0, 2.0, 3.0), r, n, Vec3::new(nx, ny, nz));
        prop_assume!(Vec3::new(hx, hy, hz).norm() > 0.1);
        // cutting plane through an interior point
        let c = poly.centroid();
        let through = c + (poly.vertices()[0] - c) * cx + (poly.vertices()[1] - c) * cy;
        let h = Plane::from_point_normal(&through, Vec3::new(hx, hy, hz));
        let a = poly.area();
        let pos = clip_polygon_by_halfspace(&poly, &h, Side::Positive).map_or(0.0, |p| p.area());
        let neg = clip_polygon_by_halfspace(&poly, &h, Side::Negative).map_or(0.0, |p| p.area());
        prop_assume!(pos > 1e-3 * a && neg > 1e-3 * a);
        prop_assert!(((pos + neg) - a).abs() <= 1e-9 * a, "{} + {} vs {}", pos, neg, a);
    }
}

fn per_plane_area(set: &CandidateSet, plane: usize) -> f64 {
    set.faces.iter().filter(|f| f.plane_index == plane).map(|f| f.area).sum()
}

#[test]
fn arrangement_partitions_each_crop() {
    let mut rng = rng(11);
    for _ in 0..40 {
        let n = rng.random_range(3..=7);
        let planes = random_planes(&mut rng, n);
        let set = generate_candidates(&planes, &unit_bbox()).unwrap();
        for (i, sp) in set.planes.iter().enumerate() {
            let Some(crop) = crop_plane_to_bbox(&sp.plane, &unit_bbox()) else { continue };
            let total = per_plane_area(&set, i);
            assert!((total - crop.area()).abs() <= 1e-6 * crop.area(), "plane {i}: {total} vs {}", crop.area());
        }
    }
}

/// Sign of a point against every plane other than its own, or `None` near
/// any of them.
fn sign_vector(planes: &[Plane], own: usize, p: &Point3, margin: f64) -> Option<Vec<bool>> {
    let mut v = Vec::new();
    for (q, pl) in planes.iter().enumerate() {
        if q == own {
            continue;
        }
        let d = pl.signed_distance(p);
        if d.abs() < margin {
            return None;
        }
        v.push(d > 0.0);
    }
    Some(v)
}

#[test]
fn arrangement_cells_match_sign_vectors() {
    // four planes in general position, as in a tetrahedron's sides
    let mut rng = rng(12);
    for _ in 0..10 {
        let sps = random_planes(&mut rng, 4);
        let set = generate_candidates(&sps, &unit_bbox()).unwrap();
        let planes: Vec<Plane> = set.planes.iter().map(|p| p.plane).collect();
        for i in 0..planes.len() {
            let Some(crop) = crop_plane_to_bbox(&planes[i], &unit_bbox()) else { continue };
            let cells: Vec<_> = set.faces.iter().filter(|f| f.plane_index == i).collect();
            // each cell has its own sign vector
            let mut cell_signs = BTreeSet::new();
            for c in &cells {
                let s = sign_vector(&planes, i, &c.polygon.centroid(), 0.0).expect("centroid off every plane");
                assert!(cell_signs.insert(s), "two cells share a sign vector");
            }
            // and every region of the crop shows up among them
            let f = planes[i].frame_at(&crop.centroid());
            let local = crop.project_2d(&f);
            let (mut lo, mut hi) = (Point2::new(f64::MAX, f64::MAX), Point2::new(f64::MIN, f64::MIN));
            for q in &local {
                lo = lo.inf(q);
                hi = hi.sup(q);
            }
            let mut seen = BTreeSet::new();
            for a in 0..200 {
                for b in 0..200 {
                    let q = Point2::new(
                        lo.x + (hi.x - lo.x) * (a as f64 + 0.5) / 200.0,
                        lo.y + (hi.y - lo.y) * (b as f64 + 0.5) / 200.0,
                    );
                    if !point_in_convex_2d(&local, &q) {
                        continue;
                    }
                    if let Some(s) = sign_vector(&planes, i, &f.to_world(&q), 1e-9) {
                        seen.insert(s);
                    }
                }
            }
            assert!(seen.is_subset(&cell_signs), "sampled region missing from the cells");
            // cells large enough to be hit by the grid must be hit
            let cell_area_min = crop.area() / 400.0;
            let big = cells.iter().filter(|c| c.area > cell_area_min).count();
            assert!(seen.len() >= big);
        }
    }
}

#[test]
fn tetrahedron_cell_counts_against_line_arrangement() {
    // for three chords in general position inside the crop, the number of
    // cells is 1 + chords + crossings inside the crop
    let mut rng = rng(13);
    let mut checked = 0;
    while checked < 20 {
        let sps = random_planes(&mut rng, 4);
        let set = generate_candidates(&sps, &unit_bbox()).unwrap();
        let planes: Vec<Plane> = set.planes.iter().map(|p| p.plane).collect();
        for i in 0..planes.len() {
            let Some(crop) = crop_plane_to_bbox(&planes[i], &unit_bbox()) else { continue };
            let f = planes[i].frame_at(&crop.centroid());
            let local = crop.project_2d(&f);
            // chords as 2D lines a x + b y + c = 0
            let mut lines = Vec::new();
            for (q, pl) in planes.iter().enumerate() {
                if q == i {
                    continue;
                }
                let o = pl.signed_distance(&f.origin);
                let a = pl.normal.dot(&f.u);
                let b = pl.normal.dot(&f.v);
                let side: Vec<f64> = local.iter().map(|p| a * p.x + b * p.y + o).collect();
                let crosses = side.iter().any(|&s| s > 1e-6) && side.iter().any(|&s| s < -1e-6);
                if crosses {
                    lines.push((a, b, o));
                }
            }
            let mut crossings = 0;
            for x in 0..lines.len() {
                for y in x + 1..lines.len() {
                    let (a1, b1, c1) = lines[x];
                    let (a2, b2, c2) = lines[y];
                    let det = a1 * b2 - a2 * b1;
                    if det.abs() < 1e-9 {
                        continue;
                    }
                    let p = Point2::new((b1 * c2 - b2 * c1) / det, (c1 * a2 - c2 * a1) / det);
                    if point_in_convex_2d(&local, &p) {
                        crossings += 1;
                    }
                }
            }
            let expected = 1 + lines.len() + crossings;
            let got = set.faces.iter().filter(|c| c.plane_index == i).count();
            // slivers under the area floor are dropped, so only well-shaped
            // arrangements must match exactly
            assert!(got <= expected, "plane {i}: {got} vs {expected}");
            if set.faces.iter().filter(|c| c.plane_index == i).all(|c| c.area > 1e-3) {
                assert_eq!(got, expected, "plane {i}");
            }
        }
        checked += 1;
    }
}

#[test]
fn candidate_edges_lie_on_incident_faces() {
    let mut rng = rng(14);
    for _ in 0..10 {
        let n = rng.random_range(4..=6);
        let set = generate_candidates(&random_planes(&mut rng, n), &unit_bbox()).unwrap();
        for e in &set.edges {
            assert!(!e.incident_faces.is_empty());
            for &f in &e.incident_faces {
                let poly = set.faces[f].polygon.vertices();
                let on_boundary = |p: &Point3| {
                    (0..poly.len()).any(|k| point_segment_distance(p, &poly[k], &poly[(k + 1) % poly.len()]) < 1e-6)
                };
                assert!(on_boundary(&e.segment.0) && on_boundary(&e.segment.1));
            }
        }
        // every face boundary edge appears in exactly one edge record
        let mut uses = std::collections::BTreeMap::new();
        for (ei, e) in set.edges.iter().enumerate() {
            for &f in &e.incident_faces {
                *uses.entry((f, ei)).or_insert(0) += 1;
            }
        }
        assert!(uses.values().all(|&c| c == 1));
        for (fi, f) in set.faces.iter().enumerate() {
            let n_edges = set.edges.iter().filter(|e| e.incident_faces.contains(&fi)).count();
            assert_eq!(n_edges, f.vertex_ids.len());
        }
    }
}

#[test]
fn generation_is_deterministic() {
    let mut rng = rng(15);
    let planes = random_planes(&mut rng, 6);
    let a = generate_candidates(&planes, &unit_bbox()).unwrap();
    let b = generate_candidates(&planes, &unit_bbox()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn obb_iou_analytic_cases() {
    let unit = Obb3::axis_aligned(Point3::origin(), Point3::new(1.0, 1.0, 1.0));
    assert_eq!(obb_iou(&unit, &unit), 1.0);
    let far = Obb3::axis_aligned(Point3::new(3.0, 0.0, 0.0), Point3::new(4.0, 1.0, 1.0));
    assert_eq!(obb_iou(&unit, &far), 0.0);
    // half overlap: 0.5 / (1 + 1 - 0.5)
    let half = Obb3::axis_aligned(Point3::new(0.5, 0.0, 0.0), Point3::new(1.5, 1.0, 1.0));
    assert!((obb_iou(&unit, &half) - 1.0 / 3.0).abs() < 1e-12);
    // rotated copy of itself
    let r = nalgebra::Rotation3::from_axis_angle(&Vec3::z_axis(), 0.7);
    let rot = Obb3 {
        center: Point3::new(2.0, -1.0, 0.5),
        axes: [r * Vec3::x(), r * Vec3::y(), r * Vec3::z()],
        half_extents: Vec3::new(1.0, 2.0, 0.5),
    };
    assert!((obb_iou(&rot, &rot) - 1.0).abs() < 1e-12);
    assert_eq!(obb_iou(&unit, &half), obb_iou(&half, &unit));
}

#[test]
fn c2m_matches_brute_force_on_a_box() {
    let faces = box_faces(Point3::new(-1.0, -2.0, 0.0), Point3::new(3.0, 1.0, 2.5));
    let tris = fan_triangles(&faces);
    let mut rng = rng(16);
    let points: Vec<Point3> = (0..2000)
        .map(|_| {
            Point3::new(
                rng.random_range(-3.0..5.0),
                rng.random_range(-4.0..3.0),
                rng.random_range(-2.0..4.5),
            )
        })
        .collect();
    let stats = c2m(&points, &faces, true).unwrap();
    let d = stats.per_point_distances.as_ref().unwrap();
    for (p, s) in points.iter().zip(d) {
        let expect = brute_force_distance(p, &tris);
        assert!((s.abs() - expect).abs() <= 1e-9, "{p:?}: {s} vs {expect}");
        // inside points are negative
        let inside = p.x > -1.0 && p.x < 3.0 && p.y > -2.0 && p.y < 1.0 && p.z > 0.0 && p.z < 2.5;
        if expect > 1e-9 {
            assert_eq!(*s < 0.0, inside);
        }
    }
    let rmse2 = stats.rmse * stats.rmse;
    assert!((rmse2 - (stats.mean_signed.powi(2) + stats.std.powi(2))).abs() <= 1e-9 * rmse2);
    assert!(stats.mae <= stats.rmse && stats.mean_signed.abs() <= stats.rmse);
}

#[test]
fn c2m_matches_brute_force_on_random_triangles() {
    let mut rng = rng(17);
    let mut faces = Vec::new();
    for _ in 0..60 {
        let c = Point3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let pts: Vec<Point3> = (0..3)
            .map(|_| c + Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        faces.push(Polygon3::new(pts));
    }
    let tris = fan_triangles(&faces);
    let bvh = TriangleBvh::new(&faces).unwrap();
    for _ in 0..2000 {
        let p = Point3::new(rng.random_range(-7.0..7.0), rng.random_range(-7.0..7.0), rng.random_range(-7.0..7.0));
        let (d2, _, _) = bvh.nearest(&p);
        let expect = brute_force_distance(&p, &tris);
        assert!((d2.sqrt() - expect).abs() <= 1e-9, "{} vs {expect}", d2.sqrt());
    }
}

#[test]
fn c2m_is_invariant_under_rigid_motion() {
    let faces = box_faces(Point3::new(0.0, 0.0, 0.0), Point3::new(4.0, 3.0, 2.0));
    let mut rng = rng(18);
    let pts: Vec<Point3> = (0..500)
        .map(|_| Point3::new(rng.random_range(-1.0..5.0), rng.random_range(-1.0..4.0), rng.random_range(-1.0..3.0)))
        .collect();
    let iso = nalgebra::Isometry3::new(Vec3::new(10.0, -4.0, 2.0), Vec3::new(0.3, -0.2, 1.1));
    let moved_faces: Vec<Polygon3> = faces
        .iter()
        .map(|f| Polygon3::new(f.vertices.iter().map(|p| iso * p).collect()))
        .collect();
    let moved_pts: Vec<Point3> = pts.iter().map(|p| iso * p).collect();
    let a = c2m(&pts, &faces, false).unwrap();
    let b = c2m(&moved_pts, &moved_faces, false).unwrap();
    assert!((a.rmse - b.rmse).abs() < 1e-9);
    assert!((a.mae - b.mae).abs() < 1e-9);
    assert!((a.mean_signed - b.mean_signed).abs() < 1e-9);
    assert!((a.std - b.std).abs() < 1e-9);
}
