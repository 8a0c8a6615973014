//! Supporting-plane merging and the candidate face arrangement.
//!
//! Every supporting plane is cropped to the bounding box and then cut by
//! the full intersection line of every other plane. The resulting convex
//! cells are the candidate faces. Vertices are welded globally, vertices
//! lying inside another cell's edge are inserted into that edge, and edges
//! are keyed by their welded endpoint pair, so incident-face lists match the
//! topology of any mesh assembled from the cells.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    clip_polygon_by_halfspace, Aabb3, ConvexPolygon3, Plane, Point2, Point3, Polygon3, Side, Vec3,
    VertexWelder, EPS_AREA,
};
pub use crate::model::PlaneOrigin;
use crate::model::UnionFind;

/// Candidate vertices closer than this are fused.
pub const VERTEX_WELD_TOL: f64 = 1e-6;
/// Distance under which a vertex counts as lying on a plane or segment.
const ON_LINE_TOL: f64 = 1e-5;
const SPLIT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CandidateParams {
    pub theta_merge_deg: f64,
    /// Offset gate for merging, m.
    pub d_merge: f64,
}

impl Default for CandidateParams {
    fn default() -> Self {
        CandidateParams {
            theta_merge_deg: 5.0,
            d_merge: 0.2,
        }
    }
}

impl CandidateParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_merge_deg >= 0.0 && self.theta_merge_deg < 90.0 && self.d_merge >= 0.0) {
            return Err(Error::Config(
                "theta_merge_deg must be in [0, 90) and d_merge nonnegative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportingPlane {
    pub plane: Plane,
    pub origin: PlaneOrigin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateFace {
    pub polygon: ConvexPolygon3,
    pub plane_index: usize,
    /// Filled by the confidence stage.
    pub confidence: f64,
    pub area: f64,
    /// Welded vertex ids, in polygon order.
    pub vertex_ids: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateEdge {
    /// Welded endpoint ids, `a < b`.
    pub vertices: (usize, usize),
    pub segment: (Point3, Point3),
    /// Sorted face indices.
    pub incident_faces: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub planes: Vec<SupportingPlane>,
    pub faces: Vec<CandidateFace>,
    pub edges: Vec<CandidateEdge>,
    pub vertices: Vec<Point3>,
    /// Planes whose bbox crop was empty.
    pub dropped_planes: Vec<usize>,
}

/// Merges near-coplanar planes until no pair passes both gates. A merged
/// plane is the uniform average of its members' sign-aligned parameters.
pub fn merge_planes(planes: &[SupportingPlane], theta_merge_deg: f64, d_merge: f64) -> Vec<SupportingPlane> {
    let mut groups: Vec<Vec<usize>> = (0..planes.len()).map(|i| vec![i]).collect();
    let mut current: Vec<Plane> = planes.iter().map(|p| p.plane).collect();
    loop {
        let mut found = None;
        'outer: for i in 0..groups.len() {
            for j in i + 1..groups.len() {
                if planes_mergeable(&current[i], &current[j], theta_merge_deg, d_merge) {
                    found = Some((i, j));
                    break 'outer;
                }
            }
        }
        let Some((i, j)) = found else { break };
        let gj = groups.remove(j);
        current.remove(j);
        groups[i].extend(gj);
        groups[i].sort_unstable();
        current[i] = average_planes(groups[i].iter().map(|&k| &planes[k].plane));
    }
    groups
        .into_iter()
        .zip(current)
        .map(|(g, plane)| {
            let origin = if g.len() == 1 {
                planes[g[0]].origin.clone()
            } else {
                PlaneOrigin::Merged(
                    g.iter()
                        .flat_map(|&k| planes[k].origin.leaves())
                        .collect::<BTreeSet<_>>()
                        .into_iter()
                        .collect(),
                )
            };
            SupportingPlane { plane, origin }
        })
        .collect()
}

fn planes_mergeable(a: &Plane, b: &Plane, theta_deg: f64, d_merge: f64) -> bool {
    if a.angle_to_deg(b) >= theta_deg {
        return false;
    }
    let b = if a.normal.dot(&b.normal) < 0.0 { b.flipped() } else { *b };
    let avg = (a.normal + b.normal).normalize();
    // offsets of the origin-nearest points, measured along the mean normal
    let oa = -a.d * avg.dot(&a.normal);
    let ob = -b.d * avg.dot(&b.normal);
    (oa - ob).abs() < d_merge
}

fn average_planes<'a>(members: impl Iterator<Item = &'a Plane>) -> Plane {
    let mut it = members;
    let first = *it.next().expect("non-empty group");
    let mut n = first.normal;
    let mut d = first.d;
    let mut count = 1.0;
    for p in it {
        let p = if p.normal.dot(&first.normal) < 0.0 { p.flipped() } else { *p };
        n += p.normal;
        d += p.d;
        count += 1.0;
    }
    Plane::new(n / count, d / count)
}

/// Large square on `plane` around the bbox, clipped to the bbox.
pub fn crop_plane_to_bbox(plane: &Plane, bbox: &Aabb3) -> Option<ConvexPolygon3> {
    let center = bbox.center();
    let frame = plane.frame_at(&center);
    let r = bbox.extents().norm().max(1.0);
    let square: Vec<Point3> = [(-r, -r), (r, -r), (r, r), (-r, r)]
        .iter()
        .map(|&(x, y)| frame.to_world(&Point2::new(x, y)))
        .collect();
    let mut poly = ConvexPolygon3::new(square).ok()?;
    for face in bbox.face_planes() {
        poly = clip_polygon_by_halfspace(&poly, &face, Side::Negative)?;
    }
    Some(poly)
}

/// Splits `poly` by `plane` when the plane passes through its interior.
fn split(poly: &ConvexPolygon3, plane: &Plane) -> Option<(ConvexPolygon3, ConvexPolygon3)> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in poly.vertices() {
        let d = plane.signed_distance(p);
        lo = lo.min(d);
        hi = hi.max(d);
    }
    if lo >= -SPLIT_EPS || hi <= SPLIT_EPS {
        return None;
    }
    let pos = clip_polygon_by_halfspace(poly, plane, Side::Positive)?;
    let neg = clip_polygon_by_halfspace(poly, plane, Side::Negative)?;
    Some((pos, neg))
}

/// Convex cells of one plane's arrangement: the bbox crop cut by every
/// other plane. `None` when the plane misses the bbox.
pub fn plane_cells(planes: &[Plane], index: usize, bbox: &Aabb3) -> Option<Vec<ConvexPolygon3>> {
    let base = crop_plane_to_bbox(&planes[index], bbox)?;
    let mut cells = vec![base];
    for (q, other) in planes.iter().enumerate() {
        if q == index {
            continue;
        }
        let mut next = Vec::with_capacity(cells.len() * 2);
        for c in cells {
            match split(&c, other) {
                Some((a, b)) => {
                    next.push(a);
                    next.push(b);
                }
                None => next.push(c),
            }
        }
        cells = next;
    }
    Some(cells)
}

/// Builds the candidate set. Planes missing the bbox are skipped with a
/// warning and listed in `dropped_planes`.
pub fn generate_candidates(planes: &[SupportingPlane], bbox: &Aabb3) -> Result<CandidateSet> {
    if planes.is_empty() {
        return Err(Error::DegenerateInput("no supporting planes".into()));
    }
    let e = bbox.extents();
    if !(e.x > 0.0 && e.y > 0.0 && e.z > 0.0) {
        return Err(Error::DegenerateInput("candidate bounding box has no volume".into()));
    }
    let raw: Vec<Plane> = planes.iter().map(|p| p.plane).collect();
    let per_plane: Vec<Option<Vec<ConvexPolygon3>>> =
        (0..raw.len()).into_par_iter().map(|i| plane_cells(&raw, i, bbox)).collect();

    let mut dropped = Vec::new();
    let mut welder = VertexWelder::new(VERTEX_WELD_TOL);
    let mut faces: Vec<(usize, Vec<usize>)> = Vec::new();
    for (pi, cells) in per_plane.into_iter().enumerate() {
        let Some(cells) = cells else {
            log::warn!("supporting plane {pi} misses the candidate bounding box; dropped");
            dropped.push(pi);
            continue;
        };
        for cell in cells {
            if cell.area() <= EPS_AREA {
                continue;
            }
            let mut ids: Vec<usize> = cell.vertices().iter().map(|p| welder.insert(p)).collect();
            ids.dedup();
            while ids.len() > 1 && ids.first() == ids.last() {
                ids.pop();
            }
            if ids.len() >= 3 {
                faces.push((pi, ids));
            }
        }
    }
    let vertices = welder.into_points();

    insert_t_junctions(&mut faces, &vertices, &raw, bbox);

    let mut cand_faces = Vec::with_capacity(faces.len());
    let mut edge_map: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (pi, ids) in faces {
        let pts: Vec<Point3> = ids.iter().map(|&i| vertices[i]).collect();
        let polygon = ConvexPolygon3::new_unchecked(pts);
        let area = polygon.area();
        if area <= EPS_AREA {
            continue;
        }
        let fi = cand_faces.len();
        for k in 0..ids.len() {
            let (a, b) = (ids[k], ids[(k + 1) % ids.len()]);
            edge_map.entry((a.min(b), a.max(b))).or_default().push(fi);
        }
        cand_faces.push(CandidateFace {
            polygon,
            plane_index: pi,
            confidence: 0.0,
            area,
            vertex_ids: ids,
        });
    }
    let edges = edge_map
        .into_iter()
        .map(|((a, b), mut inc)| {
            inc.sort_unstable();
            inc.dedup();
            CandidateEdge {
                vertices: (a, b),
                segment: (vertices[a], vertices[b]),
                incident_faces: inc,
            }
        })
        .collect();
    Ok(CandidateSet {
        planes: planes.to_vec(),
        faces: cand_faces,
        edges,
        vertices,
        dropped_planes: dropped,
    })
}

/// Splits cell edges at welded vertices that lie strictly inside them, so
/// neighbors across a line share identical vertex pairs.
fn insert_t_junctions(faces: &mut [(usize, Vec<usize>)], vertices: &[Point3], planes: &[Plane], bbox: &Aabb3) {
    let mut all: Vec<Plane> = planes.to_vec();
    all.extend(bbox.face_planes());

    // each edge lies on its own plane and at least one other; pair keys of
    // coincident lines are unioned into one line group
    let mut keys: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut edge_keys: Vec<Vec<Vec<(usize, usize)>>> = Vec::with_capacity(faces.len());
    for (pi, ids) in faces.iter() {
        let mut per_edge = Vec::with_capacity(ids.len());
        for k in 0..ids.len() {
            let (a, b) = (&vertices[ids[k]], &vertices[ids[(k + 1) % ids.len()]]);
            let mut ks = Vec::new();
            for (q, pl) in all.iter().enumerate() {
                if q != *pi && pl.distance(a) < ON_LINE_TOL && pl.distance(b) < ON_LINE_TOL {
                    let key = ((*pi).min(q), (*pi).max(q));
                    let next = keys.len();
                    keys.entry(key).or_insert(next);
                    ks.push(key);
                }
            }
            per_edge.push(ks);
        }
        edge_keys.push(per_edge);
    }
    let mut uf = UnionFind::new(keys.len());
    for per_edge in &edge_keys {
        for ks in per_edge {
            for w in ks.windows(2) {
                uf.union(keys[&w[0]], keys[&w[1]]);
            }
        }
    }
    let mut on_line: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for ((_, ids), per_edge) in faces.iter().zip(&edge_keys) {
        for (k, ks) in per_edge.iter().enumerate() {
            if let Some(key) = ks.first() {
                let g = uf.find(keys[key]);
                let set = on_line.entry(g).or_default();
                set.insert(ids[k]);
                set.insert(ids[(k + 1) % ids.len()]);
            }
        }
    }
    for ((_, ids), per_edge) in faces.iter_mut().zip(&edge_keys) {
        let mut out = Vec::with_capacity(ids.len());
        for (k, ks) in per_edge.iter().enumerate() {
            let (ia, ib) = (ids[k], ids[(k + 1) % ids.len()]);
            out.push(ia);
            let Some(key) = ks.first() else { continue };
            let g = uf.find(keys[key]);
            let (a, b) = (vertices[ia], vertices[ib]);
            let dir = b - a;
            let len = dir.norm();
            if len == 0.0 {
                continue;
            }
            let unit = dir / len;
            let mut inner: Vec<(f64, usize)> = on_line[&g]
                .iter()
                .copied()
                .filter(|&v| v != ia && v != ib)
                .filter_map(|v| {
                    let r = vertices[v] - a;
                    let t = r.dot(&unit);
                    let off = (r - unit * t).norm();
                    (off < ON_LINE_TOL && t > VERTEX_WELD_TOL && t < len - VERTEX_WELD_TOL).then_some((t, v))
                })
                .collect();
            inner.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
            out.extend(inner.into_iter().map(|(_, v)| v));
        }
        *ids = out;
    }
}

impl CandidateSet {
    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    /// Faces incident to each edge, as edge indices per face.
    pub fn face_edges(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.faces.len()];
        for (ei, e) in self.edges.iter().enumerate() {
            for &f in &e.incident_faces {
                out[f].push(ei);
            }
        }
        out
    }

    pub fn face_polygon(&self, i: usize) -> Polygon3 {
        self.faces[i].polygon.to_polygon()
    }

    pub fn translated(&self, offset: &Vec3) -> CandidateSet {
        let mv = |p: &Point3| p + offset;
        CandidateSet {
            planes: self
                .planes
                .iter()
                .map(|p| SupportingPlane {
                    plane: p.plane.transformed(offset),
                    origin: p.origin.clone(),
                })
                .collect(),
            faces: self
                .faces
                .iter()
                .map(|f| CandidateFace {
                    polygon: ConvexPolygon3::new_unchecked(f.polygon.vertices().iter().map(mv).collect()),
                    ..f.clone()
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| CandidateEdge {
                    segment: (mv(&e.segment.0), mv(&e.segment.1)),
                    ..e.clone()
                })
                .collect(),
            vertices: self.vertices.iter().map(mv).collect(),
            dropped_planes: self.dropped_planes.clone(),
        }
    }

    /// All faces as one OBJ, for inspection.
    pub fn to_obj(&self) -> String {
        let mut out = String::new();
        for p in &self.vertices {
            out.push_str(&format!("v {} {} {}\n", p.x, p.y, p.z));
        }
        for (i, f) in self.faces.iter().enumerate() {
            out.push_str(&format!("g face_{i}_plane_{}\nf", f.plane_index));
            for v in &f.vertex_ids {
                out.push_str(&format!(" {}", v + 1));
            }
            out.push('\n');
        }
        out
    }

    /// Adjacency and per-face attributes as JSON.
    pub fn adjacency_json(&self) -> serde_json::Value {
        serde_json::json!({
            "planes": self.planes,
            "dropped_planes": self.dropped_planes,
            "faces": self.faces.iter().enumerate().map(|(i, f)| serde_json::json!({
                "id": i,
                "plane_index": f.plane_index,
                "area": f.area,
                "confidence": f.confidence,
                "vertex_ids": f.vertex_ids,
            })).collect::<Vec<_>>(),
            "edges": self.edges.iter().map(|e| serde_json::json!({
                "vertices": [e.vertices.0, e.vertices.1],
                "incident_faces": e.incident_faces,
            })).collect::<Vec<_>>(),
        })
    }
}
