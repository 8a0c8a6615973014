use super::{faces_coplanar, Solution};
use crate::candidates::CandidateSet;
use crate::error::{Error, Result};
use crate::evaluation::validate_indexed;
use crate::mesh::IndexedMesh;
use crate::model::{single_boundary_loop, PlaneOrigin, RefinedModel, UnionFind};

#[derive(Debug, Clone, Copy)]
pub struct ExtractOptions {
    pub merge_coplanar: bool,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions { merge_coplanar: true }
    }
}

/// Assembles the selected faces into an outward-oriented closed mesh.
pub fn extract_mesh(set: &CandidateSet, solution: &Solution, opts: &ExtractOptions) -> Result<RefinedModel> {
    if solution.selected.is_empty() {
        return Err(Error::EmptyModel);
    }
    let selected = &solution.selected;
    let mut local = vec![usize::MAX; set.faces.len()];
    for (k, &f) in selected.iter().enumerate() {
        local[f] = k;
    }

    // groups of coplanar neighbors with matching winding
    let mut uf = UnionFind::new(selected.len());
    if opts.merge_coplanar {
        for e in &set.edges {
            let sel: Vec<usize> = e.incident_faces.iter().copied().filter(|&f| local[f] != usize::MAX).collect();
            if let [a, b] = sel[..] {
                let same_winding =
                    set.faces[a].polygon.normal().dot(&set.faces[b].polygon.normal()) > 0.0;
                if same_winding && faces_coplanar(set, a, b) {
                    uf.union(local[a], local[b]);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = std::collections::BTreeMap::new();
    for k in 0..selected.len() {
        groups.entry(uf.find(k)).or_default().push(k);
    }

    let mut loops: Vec<Vec<usize>> = Vec::new();
    let mut provenance: Vec<PlaneOrigin> = Vec::new();
    for members in groups.values() {
        let cand: Vec<usize> = members.iter().map(|&k| selected[k]).collect();
        let origin = set.planes[set.faces[cand[0]].plane_index].origin.clone();
        let merged = if cand.len() > 1 {
            let ls: Vec<&[usize]> = cand.iter().map(|&f| set.faces[f].vertex_ids.as_slice()).collect();
            single_boundary_loop(&ls)
        } else {
            None
        };
        match merged {
            Some(l) => {
                loops.push(l);
                provenance.push(origin);
            }
            None => {
                for &f in &cand {
                    loops.push(set.faces[f].vertex_ids.clone());
                    provenance.push(set.planes[set.faces[f].plane_index].origin.clone());
                }
            }
        }
    }

    let mut mesh = IndexedMesh {
        positions: set.vertices.clone(),
        faces: loops,
    };
    mesh.orient();
    mesh.drop_collinear_vertices();
    let report = validate_indexed(&mesh);
    if !report.watertight {
        return Err(Error::TopologyViolation(format!(
            "{} boundary, {} non-manifold, {} inconsistent edges, {} bad vertex fans",
            report.boundary_edge_count,
            report.non_manifold_edge_count,
            report.inconsistent_edge_count,
            report.non_manifold_vertex_count
        )));
    }
    Ok(RefinedModel {
        faces: mesh.to_polygons(),
        provenance,
    })
}
