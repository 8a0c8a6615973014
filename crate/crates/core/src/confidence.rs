//! Per-candidate confidence from coarse faces and scan clusters.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::candidates::{CandidateFace, CandidateSet};
use crate::error::{Error, Result};
use crate::geometry::{
    convex_polygon_intersection_2d, obb_from_points, obb_intersection_volume, obb_iou, point_in_convex_2d,
    polygon_area_2d, triangulate_2d, Frame, Obb3, Plane, Point2, Point3, Polygon3,
};
use crate::pointcloud::{PlanarCluster, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfidenceParams {
    pub theta_filter_deg: f64,
    /// Max OBB-corner distance to a coarse reference plane, m.
    pub d_model_max: f64,
    pub d_cloud_mean_max: f64,
    pub d_cloud_std_max: f64,
    pub bbox_overlap_min: f64,
    /// Fewest projected scan points for the distance test to count.
    pub min_support_points: usize,
}

impl Default for ConfidenceParams {
    fn default() -> Self {
        ConfidenceParams {
            theta_filter_deg: 5.0,
            d_model_max: 0.5,
            d_cloud_mean_max: 0.2,
            d_cloud_std_max: 0.2,
            bbox_overlap_min: 0.3,
            min_support_points: 20,
        }
    }
}

impl ConfidenceParams {
    pub fn validate(&self) -> Result<()> {
        let vals = [
            self.theta_filter_deg,
            self.d_model_max,
            self.d_cloud_mean_max,
            self.d_cloud_std_max,
            self.bbox_overlap_min,
        ];
        if vals.iter().all(|v| *v > 0.0) {
            Ok(())
        } else {
            Err(Error::Config("confidence thresholds must be positive".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    CoarseFace,
    ScanCluster,
}

#[derive(Debug, Clone)]
pub struct ReferenceSurface {
    pub kind: ReferenceKind,
    /// Face index or cluster index in its source.
    pub source_id: usize,
    pub plane: Plane,
    pub frame: Frame,
    /// Reference region in `frame` as convex pieces (the hull for clusters,
    /// ear-clipped triangles for coarse faces).
    pub pieces: Vec<Vec<Point2>>,
    pub obb: Obb3,
    /// Inlier points (scan clusters only).
    pub points: Vec<Point3>,
}

impl ReferenceSurface {
    pub fn from_coarse_face(source_id: usize, face: &Polygon3, plane: &Plane) -> Option<Self> {
        let centroid = face.centroid();
        let frame = plane.frame_at(&centroid);
        let loop2d: Vec<Point2> = face.vertices.iter().map(|p| frame.to_local(p)).collect();
        let pieces: Vec<Vec<Point2>> = triangulate_2d(&loop2d)
            .into_iter()
            .map(|[a, b, c]| vec![loop2d[a], loop2d[b], loop2d[c]])
            .filter(|t| polygon_area_2d(t).abs() > 0.0)
            .collect();
        if pieces.is_empty() {
            return None;
        }
        let obb = obb_from_points(&face.vertices).ok()?;
        Some(ReferenceSurface {
            kind: ReferenceKind::CoarseFace,
            source_id,
            plane: *plane,
            frame,
            pieces,
            obb,
            points: Vec::new(),
        })
    }

    pub fn from_cluster(source_id: usize, cluster: &PlanarCluster, cloud: &PointCloud) -> Self {
        ReferenceSurface {
            kind: ReferenceKind::ScanCluster,
            source_id,
            plane: cluster.plane,
            frame: cluster.frame,
            pieces: vec![cluster.hull2d.clone()],
            obb: cluster.obb,
            points: cluster.points(cloud).copied().collect(),
        }
    }

    pub fn area(&self) -> f64 {
        self.pieces.iter().map(|p| polygon_area_2d(p).abs()).sum()
    }
}

/// Per-face geometry reused across references.
struct FaceGeom<'a> {
    face: &'a CandidateFace,
    plane: Plane,
    frame: Frame,
    local: Vec<Point2>,
    local_min: Point2,
    local_max: Point2,
    obb: Option<Obb3>,
}

impl<'a> FaceGeom<'a> {
    fn new(face: &'a CandidateFace) -> Self {
        let plane = face.polygon.supporting_plane();
        let frame = plane.frame_at(&face.polygon.centroid());
        let local = face.polygon.project_2d(&frame);
        let mut local_min = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut local_max = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for q in &local {
            local_min = local_min.inf(q);
            local_max = local_max.sup(q);
        }
        FaceGeom {
            face,
            plane,
            frame,
            local,
            local_min,
            local_max,
            obb: obb_from_points(face.polygon.vertices()).ok(),
        }
    }
}

/// Four-step filter and score for one candidate against one reference.
pub fn score_pair(face: &CandidateFace, reference: &ReferenceSurface, params: &ConfidenceParams) -> Option<f64> {
    score_geom(&FaceGeom::new(face), reference, params)
}

fn score_geom(g: &FaceGeom, r: &ReferenceSurface, params: &ConfidenceParams) -> Option<f64> {
    // 1: orientation
    if g.plane.angle_to_deg(&r.plane) > params.theta_filter_deg {
        return None;
    }
    // 2: distance
    match r.kind {
        ReferenceKind::CoarseFace => {
            let obb = g.obb.as_ref()?;
            let worst = obb.corners().iter().map(|c| r.plane.distance(c)).fold(0.0, f64::max);
            if worst > params.d_model_max {
                return None;
            }
        }
        ReferenceKind::ScanCluster => {
            let mut n = 0usize;
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for p in &r.points {
                let q = g.frame.to_local(p);
                if q.x < g.local_min.x || q.y < g.local_min.y || q.x > g.local_max.x || q.y > g.local_max.y {
                    continue;
                }
                if !point_in_convex_2d(&g.local, &q) {
                    continue;
                }
                let d = g.plane.distance(p);
                n += 1;
                sum += d;
                sum_sq += d * d;
            }
            if n < params.min_support_points {
                return None;
            }
            let mean = sum / n as f64;
            let std = (sum_sq / n as f64 - mean * mean).max(0.0).sqrt();
            if mean > params.d_cloud_mean_max || std > params.d_cloud_std_max {
                return None;
            }
        }
    }
    // 3: box overlap, coarse references only
    if r.kind == ReferenceKind::CoarseFace {
        let obb = g.obb.as_ref()?;
        let iou = obb_iou(obb, &r.obb);
        if iou < params.bbox_overlap_min {
            let inter = obb_intersection_volume(obb, &r.obb);
            let cover = (inter / obb.volume()).max(inter / r.obb.volume());
            if cover < params.bbox_overlap_min {
                return None;
            }
        }
    }
    // 4: orthogonal projection overlap
    let proj: Vec<Point2> = g.face.polygon.vertices().iter().map(|p| r.frame.to_local(p)).collect();
    let proj_area = polygon_area_2d(&proj).abs();
    if proj_area <= 0.0 {
        return None;
    }
    let inter: f64 = r.pieces.iter().map(|piece| convex_polygon_intersection_2d(&proj, piece)).sum();
    Some((inter / proj_area).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceRecord {
    pub face: usize,
    pub best_ref_kind: Option<ReferenceKind>,
    pub best_ref_id: Option<usize>,
    pub confidence: f64,
}

/// Fills every face's confidence with its best reference score (0 when no
/// reference passes the filters). Ties keep the earlier reference.
pub fn assign_confidences(
    set: &mut CandidateSet,
    refs: &[ReferenceSurface],
    params: &ConfidenceParams,
) -> Vec<ConfidenceRecord> {
    let records: Vec<ConfidenceRecord> = set
        .faces
        .par_iter()
        .enumerate()
        .map(|(fi, face)| {
            let g = FaceGeom::new(face);
            let mut best: Option<(usize, f64)> = None;
            for (ri, r) in refs.iter().enumerate() {
                if let Some(s) = score_geom(&g, r, params) {
                    if best.is_none_or(|(_, b)| s > b) {
                        best = Some((ri, s));
                    }
                }
            }
            ConfidenceRecord {
                face: fi,
                best_ref_kind: best.map(|(ri, _)| refs[ri].kind),
                best_ref_id: best.map(|(ri, _)| refs[ri].source_id),
                confidence: best.map_or(0.0, |(_, s)| s),
            }
        })
        .collect();
    for r in &records {
        set.faces[r.face].confidence = r.confidence;
    }
    records
}

pub fn confidence_csv(records: &[ConfidenceRecord]) -> String {
    let mut out = String::from("face_id,best_ref_kind,best_ref_id,confidence\n");
    for r in records {
        let kind = match r.best_ref_kind {
            Some(ReferenceKind::CoarseFace) => "coarse_face",
            Some(ReferenceKind::ScanCluster) => "scan_cluster",
            None => "",
        };
        let id = r.best_ref_id.map(|i| i.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{},{}\n", r.face, kind, id, r.confidence));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ConvexPolygon3, Vec3};

    fn rect_face(x0: f64, x1: f64, y0: f64, y1: f64, z: f64) -> CandidateFace {
        let poly = ConvexPolygon3::new(vec![
            Point3::new(x0, y0, z),
            Point3::new(x1, y0, z),
            Point3::new(x1, y1, z),
            Point3::new(x0, y1, z),
        ])
        .unwrap();
        CandidateFace {
            area: poly.area(),
            polygon: poly,
            plane_index: 0,
            confidence: 0.0,
            vertex_ids: vec![0, 1, 2, 3],
        }
    }

    fn coarse_ref(x0: f64, x1: f64, y0: f64, y1: f64, z: f64) -> ReferenceSurface {
        let f = rect_face(x0, x1, y0, y1, z);
        let poly = f.polygon.to_polygon();
        ReferenceSurface::from_coarse_face(0, &poly, &poly.plane().unwrap()).unwrap()
    }

    fn scan_ref(x0: f64, x1: f64, y0: f64, y1: f64, z: f64, step: f64) -> ReferenceSurface {
        let mut pts = Vec::new();
        let (nx, ny) = (((x1 - x0) / step).round() as usize, ((y1 - y0) / step).round() as usize);
        for i in 0..=nx {
            for j in 0..=ny {
                pts.push(Point3::new(x0 + i as f64 * step, y0 + j as f64 * step, z));
            }
        }
        let cloud = PointCloud::new(pts).unwrap();
        let plane = Plane::new(Vec3::z(), -z);
        let cl = PlanarCluster::from_inliers(&cloud, plane, (0..cloud.len()).collect()).unwrap();
        ReferenceSurface::from_cluster(0, &cl, &cloud)
    }

    #[test]
    fn identical_coarse_face_scores_one() {
        let p = ConfidenceParams::default();
        let s = score_pair(&rect_face(0.0, 2.0, 0.0, 1.0, 0.0), &coarse_ref(0.0, 2.0, 0.0, 1.0, 0.0), &p);
        assert!((s.unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn containment_and_half_cover_against_scan_hull() {
        let p = ConfidenceParams::default();
        let r = scan_ref(0.0, 2.0, 0.0, 2.0, 0.0, 0.05);
        let inside = score_pair(&rect_face(0.0, 1.0, 0.0, 2.0, 0.0), &r, &p).unwrap();
        assert!((inside - 1.0).abs() < 1e-9);
        let twice = score_pair(&rect_face(0.0, 4.0, 0.0, 2.0, 0.0), &r, &p).unwrap();
        assert!((twice - 0.5).abs() < 1e-9);
    }

    #[test]
    fn scan_points_behind_face_are_filtered() {
        let p = ConfidenceParams::default();
        let r = scan_ref(0.0, 2.0, 0.0, 2.0, -0.3, 0.05);
        assert!(score_pair(&rect_face(0.0, 2.0, 0.0, 2.0, 0.0), &r, &p).is_none());
    }

    #[test]
    fn sparse_support_is_filtered() {
        let p = ConfidenceParams::default();
        // 9 points inside the face: below the support floor
        let r = scan_ref(0.0, 2.0, 0.0, 2.0, 0.0, 0.25);
        assert!(score_pair(&rect_face(0.0, 0.5, 0.0, 0.5, 0.0), &r, &p).is_none());
    }

    #[test]
    fn tilted_face_fails_angle_step() {
        let p = ConfidenceParams::default();
        let t = 10f64.to_radians();
        let poly = ConvexPolygon3::new(vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(t.cos(), 0.0, t.sin()),
            Point3::new(t.cos(), 1.0, t.sin()),
            Point3::new(0.0, 1.0, 0.0),
        ])
        .unwrap();
        let face = CandidateFace {
            area: poly.area(),
            polygon: poly,
            plane_index: 0,
            confidence: 0.0,
            vertex_ids: vec![],
        };
        assert!(score_pair(&face, &coarse_ref(0.0, 1.0, 0.0, 1.0, 0.0), &p).is_none());
    }

    #[test]
    fn offset_coarse_face_fails_box_overlap() {
        let p = ConfidenceParams::default();
        // 0.3 m off: passes the 0.5 m corner distance, but the flat boxes are disjoint
        assert!(score_pair(&rect_face(0.0, 1.0, 0.0, 1.0, 0.3), &coarse_ref(0.0, 1.0, 0.0, 1.0, 0.0), &p).is_none());
        // small face inside a large one passes on directional coverage
        let s = score_pair(&rect_face(0.2, 0.4, 0.2, 0.4, 0.0), &coarse_ref(0.0, 3.0, 0.0, 3.0, 0.0), &p);
        assert_eq!(s, Some(1.0));
    }

    #[test]
    fn max_rule_over_references() {
        let p = ConfidenceParams::default();
        let mut set = CandidateSet {
            planes: vec![],
            faces: vec![rect_face(0.0, 1.0, 0.0, 1.0, 0.0), rect_face(5.0, 6.0, 0.0, 1.0, 3.0)],
            edges: vec![],
            vertices: vec![],
            dropped_planes: vec![],
        };
        // first covers 60% of face 0, second covers it entirely
        let refs = vec![coarse_ref(0.0, 0.6, 0.0, 1.0, 0.0), scan_ref(-1.0, 2.0, -1.0, 2.0, 0.0, 0.1)];
        let rec = assign_confidences(&mut set, &refs, &p);
        assert!((set.faces[0].confidence - 1.0).abs() < 1e-9);
        assert_eq!(rec[0].best_ref_kind, Some(ReferenceKind::ScanCluster));
        assert_eq!(set.faces[1].confidence, 0.0);
        assert_eq!(rec[1].best_ref_id, None);
    }
}
