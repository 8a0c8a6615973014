//! Coarse building models: OBJ input with coplanar regrouping, OBJ output.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, ParseLocation, Result};
use crate::geometry::{
    expand_aabb, fit_plane_pca, newell_normal, Aabb3, Plane, Polygon3, Point3, Vec3, VertexWelder,
};

/// Vertices closer than this are the same vertex.
pub const WELD_TOL: f64 = 1e-6;
/// Raw `f` records farther than this from their best-fit plane are rejected.
pub const MAX_FACE_DEVIATION: f64 = 1e-2;
const REGROUP_ANGLE_DEG: f64 = 1.0;
const REGROUP_OFFSET: f64 = 1e-3;
pub const DEFAULT_EXPANSION: f64 = 0.10;

/// Where a face of a refined model (or a supporting plane) came from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaneOrigin {
    Coarse(usize),
    Scan(usize),
    Merged(Vec<PlaneOrigin>),
}

impl PlaneOrigin {
    /// Flattened leaf origins in sorted order.
    pub fn leaves(&self) -> Vec<PlaneOrigin> {
        let mut out = Vec::new();
        fn walk(o: &PlaneOrigin, out: &mut Vec<PlaneOrigin>) {
            match o {
                PlaneOrigin::Merged(v) => v.iter().for_each(|c| walk(c, out)),
                leaf => out.push(leaf.clone()),
            }
        }
        walk(self, &mut out);
        out.sort();
        out
    }

    pub fn has_scan(&self) -> bool {
        self.leaves().iter().any(|o| matches!(o, PlaneOrigin::Scan(_)))
    }
}

#[derive(Debug, Clone)]
pub struct CoarseModel {
    pub id: String,
    /// Logical faces as planar loops (convex or not), wound outward when
    /// the source file is.
    pub faces: Vec<Polygon3>,
    pub face_planes: Vec<Plane>,
    pub aabb: Aabb3,
    pub expanded_aabb: Aabb3,
}

impl CoarseModel {
    /// Builds a model from logical faces; planes are PCA fits oriented by
    /// each face's winding.
    pub fn from_faces(id: impl Into<String>, faces: Vec<Polygon3>, expansion: f64) -> Result<Self> {
        if faces.len() < 4 {
            return Err(Error::TooFewFaces(faces.len()));
        }
        let face_planes = faces.iter().map(|f| f.plane()).collect::<Result<Vec<_>>>()?;
        let aabb = Aabb3::from_points(faces.iter().flat_map(|f| f.vertices.iter())).ok_or(Error::EmptyMesh)?;
        Ok(CoarseModel {
            id: id.into(),
            faces,
            face_planes,
            aabb,
            expanded_aabb: expand_aabb(&aabb, expansion),
        })
    }

    pub fn with_expansion(mut self, ratio: f64) -> Self {
        self.expanded_aabb = expand_aabb(&self.aabb, ratio);
        self
    }

    pub fn translated(&self, offset: &Vec3) -> CoarseModel {
        let faces: Vec<Polygon3> = self
            .faces
            .iter()
            .map(|f| Polygon3::new(f.vertices.iter().map(|p| p + offset).collect()))
            .collect();
        CoarseModel {
            id: self.id.clone(),
            faces,
            face_planes: self.face_planes.iter().map(|p| p.transformed(offset)).collect(),
            aabb: Aabb3::new(self.aabb.min + offset, self.aabb.max + offset),
            expanded_aabb: Aabb3::new(self.expanded_aabb.min + offset, self.expanded_aabb.max + offset),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinedModel {
    pub faces: Vec<Polygon3>,
    /// Supporting-plane origin per face.
    pub provenance: Vec<PlaneOrigin>,
}

impl RefinedModel {
    pub fn translated(&self, offset: &Vec3) -> RefinedModel {
        RefinedModel {
            faces: self
                .faces
                .iter()
                .map(|f| Polygon3::new(f.vertices.iter().map(|p| p + offset).collect()))
                .collect(),
            provenance: self.provenance.clone(),
        }
    }
}

/// Raw OBJ contents: positions and index loops.
#[derive(Debug, Clone, Default)]
pub struct ObjMesh {
    pub vertices: Vec<Point3>,
    pub faces: Vec<Vec<usize>>,
}

/// Parses `v` and `f` records; everything else is ignored.
pub fn parse_obj(text: &str, path: &Path) -> Result<ObjMesh> {
    let mut mesh = ObjMesh::default();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let bad = |msg: String| Error::parse(path, ParseLocation::Line(lineno), msg);
        let line = line.split('#').next().unwrap_or("");
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("v") => {
                let mut c = [0.0; 3];
                for (k, slot) in c.iter_mut().enumerate() {
                    let t = toks.next().ok_or_else(|| bad(format!("vertex has {k} coordinates, expected 3")))?;
                    *slot = t
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| bad(format!("invalid coordinate {t:?}")))?;
                }
                mesh.vertices.push(Point3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let mut idx = Vec::new();
                for t in toks {
                    let head = t.split('/').next().unwrap_or("");
                    let raw: i64 = head.parse().map_err(|_| bad(format!("invalid face index {t:?}")))?;
                    let n = mesh.vertices.len() as i64;
                    let resolved = if raw > 0 { raw - 1 } else { n + raw };
                    if raw == 0 || resolved < 0 || resolved >= n {
                        return Err(bad(format!("face references missing vertex {raw}")));
                    }
                    idx.push(resolved as usize);
                }
                if idx.len() < 3 {
                    return Err(bad(format!("face has {} vertices, expected at least 3", idx.len())));
                }
                mesh.faces.push(idx);
            }
            _ => {}
        }
    }
    Ok(mesh)
}

/// Loads one building. Vertices are fused, each `f` record is checked for
/// planarity, and adjacent coplanar records are regrouped into logical faces.
pub fn load_model_obj(path: &Path) -> Result<CoarseModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mesh = parse_obj(&text, path)?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".to_string());
    let faces = regroup_faces(&mesh)?;
    CoarseModel::from_faces(id, faces, DEFAULT_EXPANSION)
}

struct RawFace {
    ids: Vec<usize>,
    normal: Vec3,
    plane: Plane,
}

/// Welds vertices, validates planarity and merges coplanar neighbors.
pub fn regroup_faces(mesh: &ObjMesh) -> Result<Vec<Polygon3>> {
    let mut welder = VertexWelder::new(WELD_TOL);
    let remap: Vec<usize> = mesh.vertices.iter().map(|p| welder.insert(p)).collect();
    let pts = welder.into_points();

    let mut raw: Vec<RawFace> = Vec::new();
    for (fi, f) in mesh.faces.iter().enumerate() {
        let mut ids: Vec<usize> = f.iter().map(|&i| remap[i]).collect();
        ids.dedup();
        while ids.len() > 1 && ids.first() == ids.last() {
            ids.pop();
        }
        if ids.len() < 3 {
            log::warn!("dropping degenerate face {fi}");
            continue;
        }
        let loop_pts: Vec<Point3> = ids.iter().map(|&i| pts[i]).collect();
        let nn = newell_normal(&loop_pts);
        if nn.norm() <= 1e-12 {
            log::warn!("dropping zero-area face {fi}");
            continue;
        }
        let normal = nn.normalize();
        let plane = match fit_plane_pca(&loop_pts) {
            Ok(fit) => fit.oriented_towards(&normal).plane,
            Err(_) => Plane::from_point_normal(&loop_pts[0], normal),
        };
        let deviation = loop_pts.iter().map(|p| plane.distance(p)).fold(0.0, f64::max);
        if deviation > MAX_FACE_DEVIATION {
            return Err(Error::NonPlanarFace { face: fi, deviation });
        }
        raw.push(RawFace { ids, normal, plane });
    }

    // faces sharing an undirected edge
    let mut edge_faces: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (k, f) in raw.iter().enumerate() {
        for i in 0..f.ids.len() {
            let (a, b) = (f.ids[i], f.ids[(i + 1) % f.ids.len()]);
            edge_faces.entry((a.min(b), a.max(b))).or_default().push(k);
        }
    }
    let mut uf = UnionFind::new(raw.len());
    let cos_tol = REGROUP_ANGLE_DEG.to_radians().cos();
    for faces in edge_faces.values() {
        for (x, &i) in faces.iter().enumerate() {
            for &j in &faces[x + 1..] {
                let (fi, fj) = (&raw[i], &raw[j]);
                if fi.normal.dot(&fj.normal) < cos_tol {
                    continue;
                }
                let off = fj.ids.iter().map(|&v| fi.plane.distance(&pts[v])).fold(0.0, f64::max).max(
                    fi.ids.iter().map(|&v| fj.plane.distance(&pts[v])).fold(0.0, f64::max),
                );
                if off <= REGROUP_OFFSET {
                    uf.union(i, j);
                }
            }
        }
    }

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for k in 0..raw.len() {
        groups.entry(uf.find(k)).or_default().push(k);
    }
    let mut ordered: Vec<Vec<usize>> = groups.into_values().collect();
    ordered.sort_by_key(|g| g[0]);

    let mut out = Vec::new();
    for group in ordered {
        if group.len() == 1 {
            out.push(Polygon3::new(raw[group[0]].ids.iter().map(|&i| pts[i]).collect()));
            continue;
        }
        let loops: Vec<&[usize]> = group.iter().map(|&k| raw[k].ids.as_slice()).collect();
        match single_boundary_loop(&loops) {
            Some(ids) => out.push(Polygon3::new(ids.iter().map(|&i| pts[i]).collect())),
            None => {
                for &k in &group {
                    out.push(Polygon3::new(raw[k].ids.iter().map(|&i| pts[i]).collect()));
                }
            }
        }
    }
    Ok(out)
}

/// Boundary of a union of consistently wound index loops, if it is one
/// simple loop. Shared edges cancel against their reverse.
pub(crate) fn single_boundary_loop(loops: &[&[usize]]) -> Option<Vec<usize>> {
    let mut directed: BTreeMap<(usize, usize), i32> = BTreeMap::new();
    for l in loops {
        for i in 0..l.len() {
            let (a, b) = (l[i], l[(i + 1) % l.len()]);
            *directed.entry((a, b)).or_default() += 1;
        }
    }
    let mut boundary: BTreeMap<usize, usize> = BTreeMap::new();
    let mut count = 0;
    for (&(a, b), &n) in &directed {
        let back = directed.get(&(b, a)).copied().unwrap_or(0);
        let net = n - back;
        if net == 1 {
            if boundary.insert(a, b).is_some() {
                return None;
            }
            count += 1;
        } else if net != 0 && net != -1 {
            return None;
        }
    }
    let (&start, _) = boundary.iter().next()?;
    let mut ids = vec![start];
    let mut cur = boundary[&start];
    while cur != start {
        if ids.len() > count {
            return None;
        }
        ids.push(cur);
        cur = *boundary.get(&cur)?;
    }
    if ids.len() != count || ids.len() < 3 {
        return None;
    }
    Some(ids)
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Joins two sets; the smaller root becomes the representative.
    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }
}

/// Formats polygons as OBJ text with welded vertices.
pub fn polygons_to_obj(faces: &[Polygon3], header: Option<&str>) -> String {
    let mut welder = VertexWelder::new(WELD_TOL);
    let loops: Vec<Vec<usize>> = faces
        .iter()
        .map(|f| {
            let mut ids: Vec<usize> = f.vertices.iter().map(|p| welder.insert(p)).collect();
            ids.dedup();
            while ids.len() > 1 && ids.first() == ids.last() {
                ids.pop();
            }
            ids
        })
        .collect();
    let mut out = String::new();
    if let Some(h) = header {
        for line in h.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
    }
    for p in welder.points() {
        out.push_str(&format!("v {} {} {}\n", p.x, p.y, p.z));
    }
    for ids in loops.iter().filter(|l| l.len() >= 3) {
        out.push('f');
        for i in ids {
            out.push_str(&format!(" {}", i + 1));
        }
        out.push('\n');
    }
    out
}

pub fn write_polygons_obj(faces: &[Polygon3], path: &Path) -> Result<()> {
    write_atomic(path, polygons_to_obj(faces, None).as_bytes())
}

/// Writes a refined mesh; windings are written as stored (outward after
/// extraction).
pub fn write_model_obj(model: &RefinedModel, path: &Path) -> Result<()> {
    write_polygons_obj(&model.faces, path)
}

/// Write to a sibling temp file, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(format!("creating {}", parent.display()), e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(format!("writing {}", tmp.display()), e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(format!("renaming to {}", path.display()), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const CUBE_TRIS: &str = "\
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
f 1 3 2
f 1 4 3
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 2 3 7
f 2 7 6
f 3 4 8
f 3 8 7
f 4 1 5
f 4 5 8
";

    fn parse(text: &str) -> Result<Vec<Polygon3>> {
        regroup_faces(&parse_obj(text, Path::new("t.obj"))?)
    }

    #[test]
    fn triangulated_cube_regroups_to_six_quads() {
        let faces = parse(CUBE_TRIS).unwrap();
        assert_eq!(faces.len(), 6);
        for f in &faces {
            assert_eq!(f.vertices.len(), 4);
            assert!((f.area() - 1.0).abs() < 1e-12);
        }
        // outward windings survive regrouping
        let bottom = faces.iter().find(|f| f.vertices.iter().all(|p| p.z == 0.0)).unwrap();
        assert!(bottom.normal().z < -0.99);
    }

    #[test]
    fn quads_stay_one_face_each() {
        let text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1\n\
                    f 1 4 3 2\nf 5 6 7 8\nf 1 2 6 5\nf 2 3 7 6\nf 3 4 8 7\nf 4 1 5 8\n";
        assert_eq!(parse(text).unwrap().len(), 6);
    }

    #[test]
    fn slash_forms_and_negative_indices() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvn 0 0 1\nf 1/1/1 2//1 -1/1\n";
        let m = parse_obj(text, Path::new("t.obj")).unwrap();
        assert_eq!(m.faces, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn missing_vertex_is_a_parse_error() {
        let err = parse_obj("v 0 0 0\nv 1 0 0\nf 1 2 7\n", Path::new("t.obj")).unwrap_err();
        assert!(matches!(err, Error::Parse { location: ParseLocation::Line(3), .. }));
    }

    #[test]
    fn non_planar_quad_is_rejected() {
        let text = "v 0 0 0\nv 1 0 0\nv 1 1 0.5\nv 0 1 0\nf 1 2 3 4\n";
        assert!(matches!(parse(text), Err(Error::NonPlanarFace { face: 0, .. })));
    }

    #[test]
    fn too_few_faces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("tri.obj");
        fs::write(&p, "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
        assert!(matches!(load_model_obj(&p), Err(Error::TooFewFaces(1))));
    }

    #[test]
    fn write_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("b42.obj");
        fs::write(&src, CUBE_TRIS).unwrap();
        let m = load_model_obj(&src).unwrap();
        assert_eq!(m.id, "b42");
        let refined = RefinedModel {
            faces: m.faces.clone(),
            provenance: (0..m.faces.len()).map(PlaneOrigin::Coarse).collect(),
        };
        let out = dir.path().join("out.obj");
        write_model_obj(&refined, &out).unwrap();
        let back = load_model_obj(&out).unwrap();
        assert_eq!(back.faces.len(), m.faces.len());
        for (a, b) in m.faces.iter().zip(&back.faces) {
            for (p, q) in a.vertices.iter().zip(&b.vertices) {
                assert!((p - q).norm() < 1e-6);
            }
        }
        assert!(m.expanded_aabb.contains(&m.aabb));
        assert!((m.expanded_aabb.extents().x - 1.2).abs() < 1e-12);
    }

    #[test]
    fn l_shaped_region_regroups_to_one_loop() {
        // three unit squares in the z=0 plane forming an L
        let text = "v 0 0 0\nv 1 0 0\nv 2 0 0\nv 0 1 0\nv 1 1 0\nv 2 1 0\nv 0 2 0\nv 1 2 0\n\
                    f 1 2 5 4\nf 2 3 6 5\nf 4 5 8 7\n";
        let faces = parse(text).unwrap();
        assert_eq!(faces.len(), 1);
        assert!((faces[0].area() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn ring_region_falls_back_to_original_faces() {
        // 3x3 grid of squares minus the center: boundary has two loops
        let mut text = String::new();
        for j in 0..4 {
            for i in 0..4 {
                text.push_str(&format!("v {i} {j} 0\n"));
            }
        }
        let id = |i: usize, j: usize| j * 4 + i + 1;
        for j in 0..3 {
            for i in 0..3 {
                if (i, j) == (1, 1) {
                    continue;
                }
                text.push_str(&format!("f {} {} {} {}\n", id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)));
            }
        }
        assert_eq!(parse(&text).unwrap().len(), 8);
    }
}
