//! Cloud-to-mesh statistics, centroid offset reduction and topology checks.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Aabb3, Point3, Polygon3, Vec3};
use crate::mesh::IndexedMesh;
use crate::model::WELD_TOL;
use crate::pointcloud::PointCloud;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct C2MStats {
    pub rmse: f64,
    pub mae: f64,
    pub mean_signed: f64,
    pub std: f64,
    pub n_points: usize,
    /// False when the mesh could not be oriented and `mean_signed` is the
    /// unsigned mean.
    pub signed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_point_distances: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub watertight: bool,
    pub manifold: bool,
    pub boundary_edge_count: usize,
    pub non_manifold_edge_count: usize,
    /// Edges used twice in the same direction.
    pub inconsistent_edge_count: usize,
    /// Vertices whose incident faces form more than one fan.
    pub non_manifold_vertex_count: usize,
    pub self_intersection_checked: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub c2m_before: C2MStats,
    pub c2m_after: C2MStats,
    pub delta_d: f64,
    pub validity_before: ValidityReport,
    pub validity_after: ValidityReport,
}

#[derive(Debug, Clone, Copy)]
struct Tri {
    a: Point3,
    b: Point3,
    c: Point3,
    normal: Vec3,
}

/// Closest point on triangle `abc` to `p` (Voronoi-region walk).
pub fn closest_point_on_triangle(p: &Point3, a: &Point3, b: &Point3, c: &Point3) -> Point3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

enum Node {
    Leaf { bbox: Aabb3, start: usize, end: usize },
    Inner { bbox: Aabb3, left: usize, right: usize },
}

impl Node {
    fn bbox(&self) -> &Aabb3 {
        match self {
            Node::Leaf { bbox, .. } | Node::Inner { bbox, .. } => bbox,
        }
    }
}

/// Bounding-volume hierarchy over mesh triangles for nearest-point queries.
pub struct TriangleBvh {
    tris: Vec<Tri>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

const LEAF_SIZE: usize = 4;

impl TriangleBvh {
    /// Triangulates each face (ear clipping); zero-area triangles are skipped.
    pub fn new(faces: &[Polygon3]) -> Result<Self> {
        let mut tris = Vec::new();
        for f in faces {
            for [a, b, c] in f.triangles() {
                let n = (b - a).cross(&(c - a));
                let len = n.norm();
                if len > 1e-14 {
                    tris.push(Tri { a, b, c, normal: n / len });
                }
            }
        }
        if tris.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let mut bvh = TriangleBvh {
            order: (0..tris.len()).collect(),
            tris,
            nodes: Vec::new(),
        };
        bvh.build(0, bvh.tris.len());
        Ok(bvh)
    }

    fn tri_box(&self, i: usize) -> Aabb3 {
        let t = &self.tris[i];
        Aabb3::from_points([&t.a, &t.b, &t.c]).unwrap()
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let mut bbox = self.tri_box(self.order[start]);
        for k in start + 1..end {
            bbox = bbox.union(&self.tri_box(self.order[k]));
        }
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { bbox, start, end });
            return id;
        }
        let ext = bbox.extents();
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        let tris = &self.tris;
        let key = |i: usize| {
            let t = &tris[i];
            t.a[axis] + t.b[axis] + t.c[axis]
        };
        self.order[start..end].sort_by(|&i, &j| key(i).total_cmp(&key(j)).then(i.cmp(&j)));
        let mid = (start + end) / 2;
        self.nodes.push(Node::Leaf { bbox, start, end });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Inner { bbox, left, right };
        id
    }

    /// Nearest surface point: `(squared distance, point, triangle index)`.
    /// Equal distances resolve to the smaller triangle index.
    pub fn nearest(&self, p: &Point3) -> (f64, Point3, usize) {
        let mut best = (f64::INFINITY, *p, usize::MAX);
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            if self.nodes[n].bbox().distance_squared(p) > best.0 {
                continue;
            }
            match &self.nodes[n] {
                Node::Leaf { start, end, .. } => {
                    for &ti in &self.order[*start..*end] {
                        let t = &self.tris[ti];
                        let q = closest_point_on_triangle(p, &t.a, &t.b, &t.c);
                        let d2 = (p - q).norm_squared();
                        if d2 < best.0 || (d2 == best.0 && ti < best.2) {
                            best = (d2, q, ti);
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    let dl = self.nodes[*left].bbox().distance_squared(p);
                    let dr = self.nodes[*right].bbox().distance_squared(p);
                    // visit the nearer child first
                    if dl <= dr {
                        stack.push(*right);
                        stack.push(*left);
                    } else {
                        stack.push(*left);
                        stack.push(*right);
                    }
                }
            }
        }
        best
    }

    /// Signed distance, positive on the side the triangle normal points to.
    pub fn signed_distance(&self, p: &Point3) -> f64 {
        let (d2, q, ti) = self.nearest(p);
        let d = d2.sqrt();
        if (p - q).dot(&self.tris[ti].normal) < 0.0 {
            -d
        } else {
            d
        }
    }
}

/// Population statistics over signed distances.
pub fn stats_from_signed(distances: &[f64], signed: bool, keep: bool) -> C2MStats {
    let n = distances.len() as f64;
    let (mut sum, mut sum_abs, mut sum_sq) = (0.0, 0.0, 0.0);
    for &d in distances {
        sum += d;
        sum_abs += d.abs();
        sum_sq += d * d;
    }
    let mean_sq = sum_sq / n;
    let mean = sum / n;
    C2MStats {
        rmse: mean_sq.sqrt(),
        mae: sum_abs / n,
        mean_signed: mean,
        std: (mean_sq - mean * mean).max(0.0).sqrt(),
        n_points: distances.len(),
        signed,
        per_point_distances: keep.then(|| distances.to_vec()),
    }
}

/// One-sided cloud-to-mesh distances. The mesh is oriented first; when that
/// fails the statistics are computed on unsigned distances.
pub fn c2m(points: &[Point3], faces: &[Polygon3], keep_per_point: bool) -> Result<C2MStats> {
    if points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mut mesh = IndexedMesh::from_polygons(faces, WELD_TOL);
    let oriented = mesh.orient();
    let bvh = TriangleBvh::new(&mesh.to_polygons())?;
    let d: Vec<f64> = points
        .par_iter()
        .map(|p| {
            let s = bvh.signed_distance(p);
            if oriented {
                s
            } else {
                s.abs()
            }
        })
        .collect();
    Ok(stats_from_signed(&d, oriented, keep_per_point))
}

/// Area-weighted mean of face centroids.
pub fn surface_centroid(faces: &[Polygon3]) -> Option<Point3> {
    let mut acc = Vec3::zeros();
    let mut total = 0.0;
    for f in faces {
        let a = f.area();
        if a > 0.0 {
            acc += f.centroid().coords * a;
            total += a;
        }
    }
    (total > 0.0).then(|| Point3::from(acc / total))
}

/// Reduction of the cloud-to-model centroid distance; positive when the
/// refined model's centroid is closer to the cloud's.
pub fn centroid_offset_reduction(cloud: &[Point3], init: &[Polygon3], refined: &[Polygon3]) -> Result<f64> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let c_mls = Point3::from(cloud.iter().fold(Vec3::zeros(), |a, p| a + p.coords) / cloud.len() as f64);
    let c_init = surface_centroid(init).ok_or(Error::EmptyMesh)?;
    let c_ref = surface_centroid(refined).ok_or(Error::EmptyMesh)?;
    Ok((c_mls - c_init).norm() - (c_mls - c_ref).norm())
}

/// Edge and vertex-fan checks after welding at `WELD_TOL`.
pub fn validate_topology(faces: &[Polygon3]) -> ValidityReport {
    let mesh = IndexedMesh::from_polygons(faces, WELD_TOL);
    validate_indexed(&mesh)
}

pub fn validate_indexed(mesh: &IndexedMesh) -> ValidityReport {
    if mesh.faces.is_empty() {
        return ValidityReport {
            watertight: false,
            manifold: false,
            boundary_edge_count: 0,
            non_manifold_edge_count: 0,
            inconsistent_edge_count: 0,
            non_manifold_vertex_count: 0,
            self_intersection_checked: false,
        };
    }
    let uses = mesh.edge_uses();
    let (mut boundary, mut non_manifold, mut inconsistent) = (0, 0, 0);
    for list in uses.values() {
        match list.len() {
            1 => boundary += 1,
            2 => {
                if list[0].forward == list[1].forward {
                    inconsistent += 1;
                }
            }
            _ => non_manifold += 1,
        }
    }
    let manifold = boundary == 0 && non_manifold == 0 && inconsistent == 0;

    // corner (prev → v → next); the fan continues into the corner whose
    // prev equals this corner's next
    let mut corners: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
    for f in &mesh.faces {
        let n = f.len();
        for k in 0..n {
            corners.entry(f[k]).or_default().push((f[(k + n - 1) % n], f[(k + 1) % n]));
        }
    }
    let mut bad_vertices = 0;
    for list in corners.values() {
        let mut by_prev: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &(prev, _)) in list.iter().enumerate() {
            by_prev.entry(prev).or_default().push(i);
        }
        let mut visited = vec![false; list.len()];
        let mut cur = 0;
        let mut steps = 0;
        let mut ok = true;
        while !visited[cur] {
            visited[cur] = true;
            steps += 1;
            match by_prev.get(&list[cur].1).map(|v| v.as_slice()) {
                Some([next]) => cur = *next,
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok || steps != list.len() || cur != 0 {
            bad_vertices += 1;
        }
    }
    ValidityReport {
        watertight: manifold && bad_vertices == 0,
        manifold,
        boundary_edge_count: boundary,
        non_manifold_edge_count: non_manifold,
        inconsistent_edge_count: inconsistent,
        non_manifold_vertex_count: bad_vertices,
        self_intersection_checked: false,
    }
}

/// Full before/after report for one building.
pub fn evaluate(
    cloud: &PointCloud,
    init: &[Polygon3],
    refined: &[Polygon3],
    keep_per_point: bool,
) -> Result<EvaluationReport> {
    Ok(EvaluationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        c2m_before: c2m(&cloud.points, init, keep_per_point)?,
        c2m_after: c2m(&cloud.points, refined, keep_per_point)?,
        delta_d: centroid_offset_reduction(&cloud.points, init, refined)?,
        validity_before: validate_topology(init),
        validity_after: validate_topology(refined),
    })
}

/// `point,before,after` rows of signed distances for histogram plots.
pub fn per_point_csv(report: &EvaluationReport) -> Option<String> {
    let before = report.c2m_before.per_point_distances.as_ref()?;
    let after = report.c2m_after.per_point_distances.as_ref()?;
    let mut out = String::from("point,before,after\n");
    for (i, (b, a)) in before.iter().zip(after).enumerate() {
        out.push_str(&format!("{i},{b},{a}\n"));
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64, z: f64) -> Point3 {
        Point3::new(x, y, z)
    }

    pub(crate) fn cube(lo: f64, hi: f64) -> Vec<Polygon3> {
        let (a, b) = (lo, hi);
        vec![
            Polygon3::new(vec![p(a, a, a), p(a, b, a), p(b, b, a), p(b, a, a)]),
            Polygon3::new(vec![p(a, a, b), p(b, a, b), p(b, b, b), p(a, b, b)]),
            Polygon3::new(vec![p(a, a, a), p(b, a, a), p(b, a, b), p(a, a, b)]),
            Polygon3::new(vec![p(a, b, a), p(a, b, b), p(b, b, b), p(b, b, a)]),
            Polygon3::new(vec![p(a, a, a), p(a, a, b), p(a, b, b), p(a, b, a)]),
            Polygon3::new(vec![p(b, a, a), p(b, b, a), p(b, b, b), p(b, a, b)]),
        ]
    }

    #[test]
    fn cube_is_watertight_and_open_cube_is_not() {
        let r = validate_topology(&cube(0.0, 1.0));
        assert!(r.watertight && r.manifold);
        let open = &cube(0.0, 1.0)[1..];
        let r = validate_topology(open);
        assert!(!r.watertight);
        assert_eq!(r.boundary_edge_count, 4);
    }

    #[test]
    fn cubes_sharing_an_edge_are_non_manifold() {
        let mut faces = cube(0.0, 1.0);
        faces.extend(
            cube(0.0, 1.0)
                .iter()
                .map(|f| Polygon3::new(f.vertices.iter().map(|q| q + Vec3::new(1.0, 1.0, 0.0)).collect())),
        );
        let r = validate_topology(&faces);
        assert!(r.non_manifold_edge_count >= 1);
        assert!(!r.watertight);
    }

    #[test]
    fn cubes_sharing_a_vertex_fail_fan_check() {
        let mut faces = cube(0.0, 1.0);
        faces.extend(
            cube(0.0, 1.0)
                .iter()
                .map(|f| Polygon3::new(f.vertices.iter().map(|q| q + Vec3::new(1.0, 1.0, 1.0)).collect())),
        );
        let r = validate_topology(&faces);
        assert!(r.manifold);
        assert_eq!(r.non_manifold_vertex_count, 1);
        assert!(!r.watertight);
    }

    #[test]
    fn constant_offset_wall() {
        let faces = cube(0.0, 10.0);
        let pts: Vec<Point3> = (0..100).map(|i| p(10.1, 1.0 + 0.08 * i as f64, 5.0)).collect();
        let s = c2m(&pts, &faces, false).unwrap();
        assert!((s.rmse - 0.1).abs() < 1e-12);
        assert!((s.mae - 0.1).abs() < 1e-12);
        assert!((s.mean_signed - 0.1).abs() < 1e-12);
        assert!(s.std < 1e-6);
        // inside points are negative
        let s = c2m(&[p(9.9, 5.0, 5.0)], &faces, false).unwrap();
        assert!((s.mean_signed + 0.1).abs() < 1e-12);
    }

    #[test]
    fn points_on_surface_are_zero() {
        let faces = cube(0.0, 1.0);
        let pts = vec![p(0.5, 0.5, 1.0), p(0.0, 0.3, 0.2), p(1.0, 1.0, 1.0)];
        let s = c2m(&pts, &faces, true).unwrap();
        assert!(s.rmse < 1e-12);
        assert_eq!(s.per_point_distances.unwrap().len(), 3);
    }

    #[test]
    fn delta_d_signs() {
        let init = cube(0.0, 1.0);
        assert_eq!(centroid_offset_reduction(&[p(3.0, 0.0, 0.0)], &init, &init).unwrap(), 0.0);
        let closer: Vec<Polygon3> = cube(0.5, 1.5);
        assert!(centroid_offset_reduction(&[p(3.0, 1.0, 1.0)], &init, &closer).unwrap() > 0.0);
        assert!(centroid_offset_reduction(&[p(3.0, 1.0, 1.0)], &closer, &init).unwrap() < 0.0);
    }

    #[test]
    fn empty_mesh_is_an_error() {
        assert!(matches!(c2m(&[p(0.0, 0.0, 0.0)], &[], false), Err(Error::EmptyMesh)));
    }
}
