//! Indexed polygon meshes: welding, edge-use tables, consistent orientation.

use std::collections::{BTreeMap, VecDeque};

use crate::geometry::{polygon_area, Point3, Polygon3, Vec3, VertexWelder};

#[derive(Debug, Clone, PartialEq)]
pub struct IndexedMesh {
    pub positions: Vec<Point3>,
    pub faces: Vec<Vec<usize>>,
}

/// One use of an undirected edge: the face and whether it runs low→high id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EdgeUse {
    pub face: usize,
    pub forward: bool,
}

impl IndexedMesh {
    /// Welds vertices within `tol`; consecutive duplicates collapse and
    /// faces with fewer than three distinct ids are dropped.
    pub fn from_polygons(polys: &[Polygon3], tol: f64) -> IndexedMesh {
        let mut welder = VertexWelder::new(tol);
        let mut faces = Vec::with_capacity(polys.len());
        for p in polys {
            let mut ids: Vec<usize> = p.vertices.iter().map(|v| welder.insert(v)).collect();
            ids.dedup();
            while ids.len() > 1 && ids.first() == ids.last() {
                ids.pop();
            }
            if ids.len() >= 3 {
                faces.push(ids);
            }
        }
        IndexedMesh {
            positions: welder.into_points(),
            faces,
        }
    }

    pub fn to_polygons(&self) -> Vec<Polygon3> {
        self.faces
            .iter()
            .map(|f| Polygon3::new(f.iter().map(|&i| self.positions[i]).collect()))
            .collect()
    }

    pub fn edge_uses(&self) -> BTreeMap<(usize, usize), Vec<EdgeUse>> {
        let mut map: BTreeMap<(usize, usize), Vec<EdgeUse>> = BTreeMap::new();
        for (fi, f) in self.faces.iter().enumerate() {
            for k in 0..f.len() {
                let (a, b) = (f[k], f[(k + 1) % f.len()]);
                map.entry((a.min(b), a.max(b))).or_default().push(EdgeUse {
                    face: fi,
                    forward: a < b,
                });
            }
        }
        map
    }

    fn face_area(&self, f: usize) -> f64 {
        let pts: Vec<Point3> = self.faces[f].iter().map(|&i| self.positions[i]).collect();
        polygon_area(&pts)
    }

    /// Signed volume enclosed by the given faces (divergence theorem).
    pub fn signed_volume(&self, faces: &[usize]) -> f64 {
        let mut v = 0.0;
        for &fi in faces {
            let f = &self.faces[fi];
            let o = self.positions[f[0]].coords;
            for k in 1..f.len() - 1 {
                let b = self.positions[f[k]].coords;
                let c = self.positions[f[k + 1]].coords;
                v += o.dot(&b.cross(&c));
            }
        }
        v / 6.0
    }

    /// Makes windings consistent across manifold edges, then orients each
    /// connected component: closed components get positive volume, open
    /// ones follow the area-weighted majority of their input windings.
    /// Returns false if some edge could not be made consistent.
    pub fn orient(&mut self) -> bool {
        let uses = self.edge_uses();
        let n = self.faces.len();
        let mut neighbors: Vec<Vec<(usize, usize, usize)>> = vec![Vec::new(); n];
        let mut closed_edge = vec![true; n];
        for (&(a, b), list) in &uses {
            if list.len() == 2 && list[0].face != list[1].face {
                let (f, g) = (list[0].face, list[1].face);
                neighbors[f].push((g, a, b));
                neighbors[g].push((f, a, b));
            } else {
                for u in list {
                    closed_edge[u.face] = false;
                }
            }
        }
        let mut flipped = vec![false; n];
        let mut seen = vec![false; n];
        let mut consistent = true;
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut component = vec![start];
            seen[start] = true;
            let mut queue = VecDeque::from([start]);
            while let Some(f) = queue.pop_front() {
                for &(g, a, b) in &neighbors[f] {
                    let dir_f = runs(&self.faces[f], a, b);
                    if seen[g] {
                        if runs(&self.faces[g], a, b) == dir_f {
                            consistent = false;
                        }
                        continue;
                    }
                    if runs(&self.faces[g], a, b) == dir_f {
                        self.faces[g].reverse();
                        flipped[g] = !flipped[g];
                    }
                    seen[g] = true;
                    component.push(g);
                    queue.push_back(g);
                }
            }
            let closed = component.iter().all(|&f| closed_edge[f]);
            let flip_all = if closed {
                self.signed_volume(&component) < 0.0
            } else {
                let (mut kept, mut turned) = (0.0, 0.0);
                for &f in &component {
                    if flipped[f] {
                        turned += self.face_area(f);
                    } else {
                        kept += self.face_area(f);
                    }
                }
                turned > kept
            };
            if flip_all {
                for &f in &component {
                    self.faces[f].reverse();
                }
            }
        }
        consistent
    }

    /// Removes vertices that are straight-angle corners in every face that
    /// uses them; such removals keep shared edges matched.
    pub fn drop_collinear_vertices(&mut self) {
        let mut uses = vec![0usize; self.positions.len()];
        let mut straight = vec![0usize; self.positions.len()];
        for f in &self.faces {
            for k in 0..f.len() {
                let v = f[k];
                uses[v] += 1;
                if self.is_straight(f[(k + f.len() - 1) % f.len()], v, f[(k + 1) % f.len()]) {
                    straight[v] += 1;
                }
            }
        }
        for f in &mut self.faces {
            let keep: Vec<usize> = f.iter().copied().filter(|&v| straight[v] < uses[v]).collect();
            if keep.len() >= 3 {
                *f = keep;
            }
        }
    }

    fn is_straight(&self, prev: usize, v: usize, next: usize) -> bool {
        let a: Vec3 = self.positions[v] - self.positions[prev];
        let b: Vec3 = self.positions[next] - self.positions[v];
        let (la, lb) = (a.norm(), b.norm());
        if la == 0.0 || lb == 0.0 {
            return false;
        }
        a.cross(&b).norm() <= 1e-9 * la * lb && a.dot(&b) > 0.0
    }
}

/// Whether the loop traverses the edge as `a → b`.
fn runs(face: &[usize], a: usize, b: usize) -> bool {
    let n = face.len();
    (0..n).any(|k| face[k] == a && face[(k + 1) % n] == b)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn cube(lo: f64, hi: f64) -> Vec<Polygon3> {
        let p = |x: f64, y: f64, z: f64| Point3::new(x, y, z);
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
    fn orient_repairs_flipped_faces() {
        let mut polys = cube(0.0, 1.0);
        polys[2] = polys[2].reversed();
        polys[5] = polys[5].reversed();
        let mut m = IndexedMesh::from_polygons(&polys, 1e-9);
        assert!(m.orient());
        let all: Vec<usize> = (0..6).collect();
        assert!((m.signed_volume(&all) - 1.0).abs() < 1e-12);
        // fully inverted input ends up outward as well
        let inv: Vec<Polygon3> = cube(0.0, 1.0).iter().map(|p| p.reversed()).collect();
        let mut m = IndexedMesh::from_polygons(&inv, 1e-9);
        assert!(m.orient());
        assert!(m.signed_volume(&all) > 0.0);
    }
}
