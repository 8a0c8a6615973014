//! Model-to-surface matching: footprint filter, per-plane scoring, model
//! selection and removal of outdated facades.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{obb_from_points, obb_iou, Aabb2, Obb3, Plane};
use crate::model::CoarseModel;
use crate::pointcloud::{PlanarCluster, SegmentedCloud};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchParams {
    pub w_normal: f64,
    pub w_coverage: f64,
    pub theta_normal_max_deg: f64,
    /// Cluster centroid to face plane, m.
    pub d_centroid_max: f64,
    pub min_s_match: f64,
}

impl Default for MatchParams {
    fn default() -> Self {
        MatchParams {
            w_normal: 0.5,
            w_coverage: 0.5,
            theta_normal_max_deg: 10.0,
            d_centroid_max: 1.0,
            min_s_match: 0.45,
        }
    }
}

impl MatchParams {
    pub fn validate(&self) -> Result<()> {
        if (self.w_normal + self.w_coverage - 1.0).abs() > 1e-9 || self.w_normal < 0.0 || self.w_coverage < 0.0 {
            return Err(Error::Config(format!(
                "matching weights must be nonnegative and sum to 1 (got {} + {})",
                self.w_normal, self.w_coverage
            )));
        }
        if !(self.theta_normal_max_deg > 0.0 && self.d_centroid_max > 0.0 && self.min_s_match > 0.0) {
            return Err(Error::Config("matching thresholds must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceMatch {
    pub cluster_index: usize,
    pub face_index: usize,
    /// Cosine between cluster and face normals.
    pub s_normal: f64,
    pub d_c: f64,
    pub c_bbox: f64,
    pub s_match: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMatchResult {
    pub model_id: String,
    /// Sorted by cluster index; clusters and faces are distinct.
    pub matches: Vec<FaceMatch>,
    pub q_model: f64,
}

/// What the scorer needs from a model face.
#[derive(Debug, Clone, Copy)]
pub struct FaceDescriptor {
    pub index: usize,
    pub plane: Plane,
    pub obb: Obb3,
}

impl FaceDescriptor {
    pub fn of_model(model: &CoarseModel) -> Vec<FaceDescriptor> {
        model
            .faces
            .iter()
            .zip(&model.face_planes)
            .enumerate()
            .filter_map(|(index, (f, plane))| {
                let obb = obb_from_points(&f.vertices).ok()?;
                Some(FaceDescriptor {
                    index,
                    plane: *plane,
                    obb,
                })
            })
            .collect()
    }
}

/// Models whose expanded footprint meets the cloud footprint.
pub fn coarse_spatial_filter<'a>(cloud_aabb2: &Aabb2, models: &'a [CoarseModel]) -> Vec<&'a CoarseModel> {
    models
        .iter()
        .filter(|m| m.expanded_aabb.footprint().intersects(cloud_aabb2))
        .collect()
}

/// Scores one cluster against one face; `None` when a hard filter fails.
pub fn score_face_match(
    cluster_index: usize,
    cluster: &PlanarCluster,
    face: &FaceDescriptor,
    params: &MatchParams,
) -> Option<FaceMatch> {
    let s_normal = cluster.plane.normal.dot(&face.plane.normal).clamp(-1.0, 1.0);
    if s_normal.abs() < params.theta_normal_max_deg.to_radians().cos() {
        return None;
    }
    let d_c = face.plane.distance(&cluster.centroid);
    if d_c > params.d_centroid_max {
        return None;
    }
    let c_bbox = obb_iou(&cluster.obb, &face.obb);
    Some(FaceMatch {
        cluster_index,
        face_index: face.index,
        s_normal,
        d_c,
        c_bbox,
        s_match: params.w_normal * s_normal.abs() + params.w_coverage * c_bbox,
    })
}

/// One-to-one greedy assignment for a single model: pairs are taken by
/// descending score (ties: smaller `d_c`, smaller face, smaller cluster).
pub fn match_model(seg: &SegmentedCloud, model: &CoarseModel, params: &MatchParams) -> ModelMatchResult {
    let faces = FaceDescriptor::of_model(model);
    let mut pairs: Vec<FaceMatch> = Vec::new();
    for (ci, cluster) in seg.clusters.iter().enumerate() {
        for face in &faces {
            if let Some(m) = score_face_match(ci, cluster, face, params) {
                if m.s_match >= params.min_s_match {
                    pairs.push(m);
                }
            }
        }
    }
    pairs.sort_by(|a, b| {
        b.s_match
            .total_cmp(&a.s_match)
            .then(a.d_c.total_cmp(&b.d_c))
            .then(a.face_index.cmp(&b.face_index))
            .then(a.cluster_index.cmp(&b.cluster_index))
    });
    let mut cluster_taken = vec![false; seg.clusters.len()];
    let mut face_taken = vec![false; model.faces.len()];
    let mut matches = Vec::new();
    for m in pairs {
        if cluster_taken[m.cluster_index] || face_taken[m.face_index] {
            continue;
        }
        cluster_taken[m.cluster_index] = true;
        face_taken[m.face_index] = true;
        matches.push(m);
    }
    matches.sort_by_key(|m| m.cluster_index);
    let q_model = matches.iter().map(|m| m.s_match).sum();
    ModelMatchResult {
        model_id: model.id.clone(),
        matches,
        q_model,
    }
}

/// Index of the highest-quality result with at least one match; ties go to
/// the lexicographically smaller model id.
pub fn pick_best(results: &[ModelMatchResult]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, r) in results.iter().enumerate() {
        if r.matches.is_empty() {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(b) => {
                let rb = &results[b];
                if r.q_model > rb.q_model || (r.q_model == rb.q_model && r.model_id < rb.model_id) {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    best
}

/// Per-candidate results plus the chosen one, for reporting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchReport {
    pub candidates: Vec<ModelMatchResult>,
    pub best: usize,
}

pub fn score_models(seg: &SegmentedCloud, candidates: &[&CoarseModel], params: &MatchParams) -> Result<MatchReport> {
    let results: Vec<ModelMatchResult> = candidates.iter().map(|m| match_model(seg, m, params)).collect();
    let best = pick_best(&results).ok_or(Error::NoMatchFound)?;
    Ok(MatchReport {
        candidates: results,
        best,
    })
}

/// Best model by total matching quality.
pub fn select_best_model(
    seg: &SegmentedCloud,
    candidates: &[&CoarseModel],
    params: &MatchParams,
) -> Result<ModelMatchResult> {
    let mut report = score_models(seg, candidates, params)?;
    Ok(report.candidates.swap_remove(report.best))
}

#[derive(Debug, Clone, PartialEq)]
pub struct FacePartition {
    pub kept: Vec<usize>,
    pub removed: Vec<usize>,
    pub kept_planes: Vec<Plane>,
}

/// Splits the model faces into kept and matched (outdated) ones.
pub fn remove_matched_faces(model: &CoarseModel, result: &ModelMatchResult) -> Result<FacePartition> {
    let mut removed: Vec<usize> = result.matches.iter().map(|m| m.face_index).collect();
    removed.sort_unstable();
    removed.dedup();
    let kept: Vec<usize> = (0..model.faces.len()).filter(|i| removed.binary_search(i).is_err()).collect();
    if kept.is_empty() {
        return Err(Error::AllFacesRemoved);
    }
    let kept_planes = kept.iter().map(|&i| model.face_planes[i]).collect();
    Ok(FacePartition {
        kept,
        removed,
        kept_planes,
    })
}
