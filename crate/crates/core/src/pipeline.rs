//! End-to-end orchestration: configuration, single and batch refinement,
//! threshold sweeps, output files and run manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::candidates::{generate_candidates, merge_planes, CandidateParams, CandidateSet, SupportingPlane};
use crate::confidence::{assign_confidences, confidence_csv, ConfidenceParams, ConfidenceRecord, ReferenceSurface};
use crate::error::{Error, ErrorCategory, Result};
use crate::evaluation::{evaluate, per_point_csv, validate_topology, EvaluationReport};
use crate::geometry::{expand_aabb, Point3, Vec3};
use crate::matching::{coarse_spatial_filter, remove_matched_faces, score_models, MatchParams, MatchReport};
use crate::model::{polygons_to_obj, write_atomic, CoarseModel, PlaneOrigin, RefinedModel};
use crate::pointcloud::{segment_planes_ransac, write_cluster_debug, PointCloud, RansacParams, SegmentedCloud};
use crate::selection::{
    build_problem, extract_mesh, ExtractOptions, SelectionParams, SelectionProblem, SolveStatus, Solution,
};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const ENV_PREFIX: &str = "LODREFINE_";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineParams {
    /// Bounding-box growth on each side, as a fraction of its extent.
    pub expansion: f64,
    /// Building-level worker threads; 0 uses every logical core.
    pub workers: usize,
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams {
            expansion: crate::model::DEFAULT_EXPANSION,
            workers: 0,
        }
    }
}

/// Every tunable of the pipeline, one section per stage.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub pipeline: PipelineParams,
    pub ransac: RansacParams,
    pub matching: MatchParams,
    pub candidates: CandidateParams,
    pub confidence: ConfidenceParams,
    pub selection: SelectionParams,
}

const SECTIONS: [&str; 6] = ["pipeline", "ransac", "matching", "candidates", "confidence", "selection"];

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pipeline.expansion >= 0.0 && self.pipeline.expansion.is_finite()) {
            return Err(Error::Config("expansion must be nonnegative".into()));
        }
        let r = &self.ransac;
        if !(r.distance > 0.0 && r.min_cluster_size >= 3 && r.max_iterations > 0 && r.max_planes > 0) {
            return Err(Error::Config(
                "ransac distance must be positive, min_cluster_size >= 3, iterations and planes > 0".into(),
            ));
        }
        self.matching.validate()?;
        self.candidates.validate()?;
        self.confidence.validate()?;
        self.selection.validate()
    }

    /// Applies `section.key = value` overrides. Values are parsed as TOML
    /// literals, falling back to plain strings.
    pub fn apply_overrides<I, K, V>(&mut self, overrides: I) -> Result<()>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut doc = toml::Table::try_from(&*self).map_err(|e| Error::Config(e.to_string()))?;
        for (key, raw) in overrides {
            let key = key.as_ref();
            let (section, field) = key
                .split_once('.')
                .ok_or_else(|| Error::Config(format!("override `{key}` must look like section.key")))?;
            if !SECTIONS.contains(&section) {
                return Err(Error::Config(format!("unknown config section `{section}`")));
            }
            let table = doc
                .get_mut(section)
                .and_then(|v| v.as_table_mut())
                .expect("every section serializes as a table");
            if !table.contains_key(field) {
                return Err(Error::Config(format!("unknown config key `{key}`")));
            }
            table.insert(field.to_string(), parse_literal(raw.as_ref()));
        }
        let cfg: PipelineConfig = doc.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        *self = cfg;
        Ok(())
    }

    /// Applies `LODREFINE_<SECTION>_<KEY>` variables from the given
    /// environment; other variables are ignored.
    pub fn apply_env<I>(&mut self, vars: I) -> Result<()>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut overrides: Vec<(String, String)> = Vec::new();
        for (name, value) in vars {
            let Some(rest) = name.strip_prefix(ENV_PREFIX) else { continue };
            let rest = rest.to_ascii_lowercase();
            let Some((section, field)) = rest.split_once('_') else { continue };
            if SECTIONS.contains(&section) {
                overrides.push((format!("{section}.{field}"), value));
            }
        }
        overrides.sort();
        self.apply_overrides(overrides)
    }

    fn thread_pool(&self) -> rayon::ThreadPool {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.pipeline.workers)
            .build()
            .expect("thread pool")
    }
}

fn parse_literal(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub segment_s: f64,
    pub match_s: f64,
    pub candidates_s: f64,
    pub confidence_s: f64,
    pub solve_s: f64,
    pub extract_s: f64,
    pub evaluate_s: f64,
}

/// State after matching, candidate generation and confidence scoring, in
/// local coordinates (world minus `origin`). Selection can be rerun on it
/// with different selection parameters.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub origin: Vec3,
    pub model: CoarseModel,
    pub cloud: PointCloud,
    pub segmentation: SegmentedCloud,
    pub match_report: MatchReport,
    pub removed_faces: Vec<usize>,
    pub candidates: CandidateSet,
    pub confidences: Vec<ConfidenceRecord>,
    pub timings: StageTimings,
}

#[derive(Debug, Clone)]
pub struct RefineOutput {
    pub model_id: String,
    pub prepared: Prepared,
    pub problem: SelectionProblem,
    pub solution: Solution,
    /// World coordinates.
    pub refined: RefinedModel,
    pub report: EvaluationReport,
    pub timings: StageTimings,
}

/// Local origin for a cloud: its bounding-box center rounded to meters.
pub fn local_origin(cloud: &PointCloud) -> Vec3 {
    cloud.aabb().center().coords.map(f64::round)
}

/// Segments the cloud and matches it against the candidate models.
pub fn prepare(models: &[&CoarseModel], cloud: &PointCloud, cfg: &PipelineConfig) -> Result<Prepared> {
    let mut timings = StageTimings::default();
    let origin = local_origin(cloud);
    let local_cloud = cloud.translated(&-origin);
    let local_models: Vec<CoarseModel> = models
        .iter()
        .map(|m| m.translated(&-origin).with_expansion(cfg.pipeline.expansion))
        .collect();

    let t = Instant::now();
    let seg = segment_planes_ransac(&local_cloud, &cfg.ransac);
    timings.segment_s = t.elapsed().as_secs_f64();
    log::info!("{} planar clusters from {} points", seg.clusters.len(), local_cloud.len());

    let t = Instant::now();
    let near = coarse_spatial_filter(&local_cloud.aabb().footprint(), &local_models);
    if near.is_empty() {
        return Err(Error::NoMatchFound);
    }
    let report = score_models(&seg, &near, &cfg.matching)?;
    let best = &report.candidates[report.best];
    let model = near
        .iter()
        .find(|m| m.id == best.model_id)
        .map(|m| (*m).clone())
        .expect("best model is a candidate");
    let partition = remove_matched_faces(&model, best)?;
    timings.match_s = t.elapsed().as_secs_f64();
    log::info!(
        "model {} matched {} facades (Q = {:.3})",
        model.id,
        best.matches.len(),
        best.q_model
    );

    let t = Instant::now();
    let mut planes: Vec<SupportingPlane> = partition
        .kept
        .iter()
        .map(|&i| SupportingPlane {
            plane: model.face_planes[i],
            origin: PlaneOrigin::Coarse(i),
        })
        .collect();
    let mut bbox = model.aabb;
    for m in &best.matches {
        let c = &seg.clusters[m.cluster_index];
        planes.push(SupportingPlane {
            plane: c.plane,
            origin: PlaneOrigin::Scan(m.cluster_index),
        });
        bbox = bbox.union(&c.aabb(&seg.source));
    }
    let merged = merge_planes(&planes, cfg.candidates.theta_merge_deg, cfg.candidates.d_merge);
    let mut set = generate_candidates(&merged, &expand_aabb(&bbox, cfg.pipeline.expansion))?;
    timings.candidates_s = t.elapsed().as_secs_f64();
    log::info!(
        "{} supporting planes, {} candidate faces, {} edges",
        set.planes.len(),
        set.faces.len(),
        set.edges.len()
    );

    let t = Instant::now();
    let mut refs: Vec<ReferenceSurface> = partition
        .kept
        .iter()
        .filter_map(|&i| ReferenceSurface::from_coarse_face(i, &model.faces[i], &model.face_planes[i]))
        .collect();
    for m in &best.matches {
        refs.push(ReferenceSurface::from_cluster(
            m.cluster_index,
            &seg.clusters[m.cluster_index],
            &seg.source,
        ));
    }
    let confidences = assign_confidences(&mut set, &refs, &cfg.confidence);
    timings.confidence_s = t.elapsed().as_secs_f64();

    Ok(Prepared {
        origin,
        model,
        cloud: local_cloud,
        segmentation: seg,
        match_report: report,
        removed_faces: partition.removed,
        candidates: set,
        confidences,
        timings,
    })
}

/// Selection, extraction and evaluation on a prepared building.
pub fn select_and_evaluate(prepared: Prepared, params: &SelectionParams) -> Result<RefineOutput> {
    let mut timings = prepared.timings.clone();
    let t = Instant::now();
    let problem = build_problem(&prepared.candidates, params)?;
    let solution = crate::selection::solve(&problem, params.time_limit_s);
    timings.solve_s = t.elapsed().as_secs_f64();
    log::info!(
        "solver: {:?}, objective {:.6}, {} faces, {} nodes",
        solution.status,
        solution.objective_value,
        solution.selected.len(),
        solution.log.nodes
    );
    match solution.status {
        SolveStatus::Infeasible => return Err(Error::Infeasible),
        SolveStatus::Timeout if solution.selected.is_empty() => {
            return Err(Error::Timeout {
                limit_s: params.time_limit_s,
            })
        }
        _ => {}
    }

    let t = Instant::now();
    let local = extract_mesh(
        &prepared.candidates,
        &solution,
        &ExtractOptions {
            merge_coplanar: params.merge_coplanar,
        },
    )?;
    timings.extract_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let report = evaluate(&prepared.cloud, &prepared.model.faces, &local.faces, true)?;
    timings.evaluate_s = t.elapsed().as_secs_f64();

    Ok(RefineOutput {
        model_id: prepared.model.id.clone(),
        refined: local.translated(&prepared.origin),
        problem,
        solution,
        report,
        timings,
        prepared,
    })
}

/// Full pipeline for one cloud against one model.
pub fn refine(model: &CoarseModel, cloud: &PointCloud, cfg: &PipelineConfig) -> Result<RefineOutput> {
    refine_among(&[model], cloud, cfg)
}

/// Full pipeline for one cloud; the building is chosen among `models`.
pub fn refine_among(models: &[&CoarseModel], cloud: &PointCloud, cfg: &PipelineConfig) -> Result<RefineOutput> {
    cfg.validate()?;
    let prepared = prepare(models, cloud, cfg)?;
    select_and_evaluate(prepared, &cfg.selection)
}

/// Which debug artifacts to write next to the main outputs.
#[derive(Debug, Clone, Copy, Default)]
pub struct DumpOptions {
    pub clusters: bool,
    pub candidates: bool,
    pub confidence: bool,
    pub per_point: bool,
}

/// Writes `<id>.obj`, `<id>.report.json`, `<id>.match.json` and
/// `<id>.solve.json`, plus any requested dumps.
pub fn write_refine_outputs(dir: &Path, out: &RefineOutput, dumps: &DumpOptions) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    let id = &out.model_id;
    let mut written = Vec::new();
    let mut put = |name: String, bytes: &[u8]| -> Result<()> {
        let path = dir.join(name);
        write_atomic(&path, bytes)?;
        written.push(path);
        Ok(())
    };
    let header = format!("refined model {id}");
    put(format!("{id}.obj"), polygons_to_obj(&out.refined.faces, Some(&header)).as_bytes())?;
    let mut report = out.report.clone();
    report.c2m_before.per_point_distances = None;
    report.c2m_after.per_point_distances = None;
    put(format!("{id}.report.json"), &to_json(&report))?;
    put(format!("{id}.match.json"), &to_json(&out.prepared.match_report))?;
    put(format!("{id}.solve.json"), &to_json(&out.solution))?;
    if dumps.candidates {
        let set = out.prepared.candidates.translated(&out.prepared.origin);
        put(format!("{id}.candidates.obj"), set.to_obj().as_bytes())?;
        put(format!("{id}.candidates.json"), &to_json(&set.adjacency_json()))?;
    }
    if dumps.confidence {
        put(format!("{id}.confidence.csv"), confidence_csv(&out.prepared.confidences).as_bytes())?;
    }
    if dumps.per_point {
        if let Some(csv) = per_point_csv(&out.report) {
            put(format!("{id}.distances.csv"), csv.as_bytes())?;
        }
    }
    if dumps.clusters {
        let seg = &out.prepared.segmentation;
        let world = SegmentedCloud {
            source: seg.source.translated(&out.prepared.origin),
            clusters: seg.clusters.clone(),
            unassigned: seg.unassigned.clone(),
        };
        let cdir = dir.join(format!("{id}.clusters"));
        write_cluster_debug(&cdir, &world)?;
        written.push(cdir);
    }
    Ok(written)
}

pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("serializable");
    v.push(b'\n');
    v
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

pub fn sha256_file(path: &Path) -> Result<InputDigest> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    Ok(InputDigest {
        path: path.to_path_buf(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum BuildingStatus {
    Refined { solve_status: SolveStatus },
    SkippedNoMatch,
    Failed { category: ErrorCategory, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildingRecord {
    pub model_id: String,
    #[serde(flatten)]
    pub status: BuildingStatus,
    /// Indices into the manifest's cloud inputs routed to this building.
    pub clouds: Vec<usize>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: String,
    pub config: PipelineConfig,
    pub inputs: Vec<InputDigest>,
    pub buildings: Vec<BuildingRecord>,
    pub wall_time_s: f64,
}

impl RunManifest {
    pub fn new(command: &str, config: &PipelineConfig, inputs: &[&Path]) -> Result<Self> {
        Ok(RunManifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config: config.clone(),
            inputs: inputs.iter().map(|p| sha256_file(p)).collect::<Result<_>>()?,
            buildings: Vec::new(),
            wall_time_s: 0.0,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &to_json(self))
    }
}

impl BuildingStatus {
    pub fn from_result(result: &Result<RefineOutput>) -> Self {
        match result {
            Ok(o) => BuildingStatus::Refined {
                solve_status: o.solution.status,
            },
            Err(e) => BuildingStatus::Failed {
                category: e.category(),
                reason: e.to_string(),
            },
        }
    }
}

#[derive(Debug)]
pub enum BuildingOutcome {
    Refined(Box<RefineOutput>),
    SkippedNoMatch,
    Failed(Error),
}

#[derive(Debug)]
pub struct BuildingResult {
    pub model_id: String,
    pub clouds: Vec<usize>,
    pub outcome: BuildingOutcome,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanC2M {
    pub rmse: f64,
    pub mae: f64,
    pub mean_signed: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub n_buildings: usize,
    pub n_refined: usize,
    pub n_skipped: usize,
    pub n_failed: usize,
    pub n_unrouted_clouds: usize,
    /// Over all buildings; skipped and failed ones keep their input mesh.
    pub watertight_rate_before: f64,
    pub watertight_rate_after: f64,
    /// Over refined buildings only.
    pub c2m_before: Option<MeanC2M>,
    pub c2m_after: Option<MeanC2M>,
    pub mean_delta_d: Option<f64>,
}

#[derive(Debug)]
pub struct BatchResult {
    /// Per cloud, the index of the model it was routed to.
    pub routes: Vec<Option<usize>>,
    pub buildings: Vec<BuildingResult>,
    pub summary: BatchSummary,
}

/// Routes every cloud to its best-matching model, then refines each model
/// that received at least one cloud (clouds routed to the same building are
/// concatenated in input order). Buildings run concurrently and never
/// affect each other.
pub fn refine_batch(models: &[CoarseModel], clouds: &[PointCloud], cfg: &PipelineConfig) -> Result<BatchResult> {
    cfg.validate()?;
    if models.is_empty() {
        return Err(Error::Config("no models to refine".into()));
    }
    if clouds.is_empty() {
        return Err(Error::Config("no point clouds given".into()));
    }
    let pool = cfg.thread_pool();
    let all: Vec<&CoarseModel> = models.iter().collect();
    let routes: Vec<Option<usize>> = pool.install(|| {
        clouds
            .par_iter()
            .map(|c| match prepare(&all, c, cfg) {
                Ok(p) => models.iter().position(|m| m.id == p.model.id),
                Err(e) => {
                    log::warn!("cloud not routed: {e}");
                    None
                }
            })
            .collect()
    });
    let mut assigned: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (ci, r) in routes.iter().enumerate() {
        if let Some(m) = r {
            assigned.entry(*m).or_default().push(ci);
        }
    }

    let buildings: Vec<BuildingResult> = pool.install(|| {
        models
            .par_iter()
            .enumerate()
            .map(|(mi, model)| {
                let t = Instant::now();
                let ids = assigned.get(&mi).cloned().unwrap_or_default();
                let outcome = if ids.is_empty() {
                    BuildingOutcome::SkippedNoMatch
                } else {
                    let merged = concat_clouds(ids.iter().map(|&i| &clouds[i]));
                    match merged.and_then(|c| refine(model, &c, cfg)) {
                        Ok(o) => BuildingOutcome::Refined(Box::new(o)),
                        Err(e) => BuildingOutcome::Failed(e),
                    }
                };
                BuildingResult {
                    model_id: model.id.clone(),
                    clouds: ids,
                    outcome,
                    wall_time_s: t.elapsed().as_secs_f64(),
                }
            })
            .collect()
    });
    let summary = summarize(models, &routes, &buildings);
    Ok(BatchResult {
        routes,
        buildings,
        summary,
    })
}

fn concat_clouds<'a>(clouds: impl Iterator<Item = &'a PointCloud>) -> Result<PointCloud> {
    let mut points: Vec<Point3> = Vec::new();
    for c in clouds {
        points.extend_from_slice(&c.points);
    }
    PointCloud::new(points)
}

fn summarize(models: &[CoarseModel], routes: &[Option<usize>], buildings: &[BuildingResult]) -> BatchSummary {
    let n = models.len();
    let (mut refined, mut skipped, mut failed) = (0, 0, 0);
    let (mut wt_before, mut wt_after) = (0usize, 0usize);
    let mut before = Vec::new();
    let mut after = Vec::new();
    let mut dd = Vec::new();
    for (m, b) in models.iter().zip(buildings) {
        let input_ok = validate_topology(&m.faces).watertight;
        wt_before += input_ok as usize;
        match &b.outcome {
            BuildingOutcome::Refined(o) => {
                refined += 1;
                wt_after += o.report.validity_after.watertight as usize;
                before.push(&o.report.c2m_before);
                after.push(&o.report.c2m_after);
                dd.push(o.report.delta_d);
            }
            BuildingOutcome::SkippedNoMatch => {
                skipped += 1;
                wt_after += input_ok as usize;
            }
            BuildingOutcome::Failed(_) => {
                failed += 1;
                wt_after += input_ok as usize;
            }
        }
    }
    let mean = |v: &[&crate::evaluation::C2MStats]| {
        (!v.is_empty()).then(|| {
            let k = v.len() as f64;
            MeanC2M {
                rmse: v.iter().map(|s| s.rmse).sum::<f64>() / k,
                mae: v.iter().map(|s| s.mae).sum::<f64>() / k,
                mean_signed: v.iter().map(|s| s.mean_signed).sum::<f64>() / k,
                std: v.iter().map(|s| s.std).sum::<f64>() / k,
            }
        })
    };
    BatchSummary {
        n_buildings: n,
        n_refined: refined,
        n_skipped: skipped,
        n_failed: failed,
        n_unrouted_clouds: routes.iter().filter(|r| r.is_none()).count(),
        watertight_rate_before: wt_before as f64 / n as f64,
        watertight_rate_after: wt_after as f64 / n as f64,
        c2m_before: mean(&before),
        c2m_after: mean(&after),
        mean_delta_d: (!dd.is_empty()).then(|| dd.iter().sum::<f64>() / dd.len() as f64),
    }
}

/// Writes per-building outputs for a batch run; skipped and failed
/// buildings get their input mesh copied through.
pub fn write_batch_outputs(
    dir: &Path,
    models: &[CoarseModel],
    result: &BatchResult,
    dumps: &DumpOptions,
    manifest: &mut RunManifest,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    for (m, b) in models.iter().zip(&result.buildings) {
        let status = match &b.outcome {
            BuildingOutcome::Refined(o) => {
                write_refine_outputs(dir, o, dumps)?;
                BuildingStatus::Refined {
                    solve_status: o.solution.status,
                }
            }
            BuildingOutcome::SkippedNoMatch => {
                let header = format!("unchanged model {}", m.id);
                write_atomic(&dir.join(format!("{}.obj", m.id)), polygons_to_obj(&m.faces, Some(&header)).as_bytes())?;
                BuildingStatus::SkippedNoMatch
            }
            BuildingOutcome::Failed(e) => {
                let header = format!("unchanged model {} ({})", m.id, e.category().as_str());
                write_atomic(&dir.join(format!("{}.obj", m.id)), polygons_to_obj(&m.faces, Some(&header)).as_bytes())?;
                BuildingStatus::Failed {
                    category: e.category(),
                    reason: e.to_string(),
                }
            }
        };
        manifest.buildings.push(BuildingRecord {
            model_id: b.model_id.clone(),
            status,
            clouds: b.clouds.clone(),
            wall_time_s: b.wall_time_s,
        });
    }
    write_atomic(&dir.join("summary.json"), &to_json(&result.summary))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub tau: f64,
    /// Means over fixtures that produced a valid mesh; NaN when none did.
    pub rmse: f64,
    pub mae: f64,
    pub validity_rate: f64,
    pub n_valid: usize,
    pub n_total: usize,
}

/// Runs selection at each threshold on every fixture. Preparation does not
/// depend on the threshold, so it runs once per fixture. A fixture counts
/// as valid when it yields a non-empty watertight mesh.
pub fn sweep_tau(fixtures: &[(CoarseModel, PointCloud)], taus: &[f64], cfg: &PipelineConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    if fixtures.is_empty() {
        return Err(Error::Config("sweep needs at least one fixture".into()));
    }
    for &tau in taus {
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::Config(format!("tau_cov must be in [0, 1], got {tau}")));
        }
    }
    let pool = cfg.thread_pool();
    let prepared: Vec<Result<Prepared>> =
        pool.install(|| fixtures.par_iter().map(|(m, c)| prepare(&[m], c, cfg)).collect());
    let rows = taus
        .iter()
        .map(|&tau| {
            let params = SelectionParams {
                tau_cov: tau,
                ..cfg.selection
            };
            let results: Vec<Option<(f64, f64)>> = pool.install(|| {
                prepared
                    .par_iter()
                    .map(|p| {
                        let p = p.as_ref().ok()?;
                        let out = select_and_evaluate(p.clone(), &params).ok()?;
                        let s = &out.report.c2m_after;
                        out.report.validity_after.watertight.then_some((s.rmse, s.mae))
                    })
                    .collect()
            });
            let valid: Vec<(f64, f64)> = results.iter().flatten().copied().collect();
            let k = valid.len() as f64;
            SweepRow {
                tau,
                rmse: if valid.is_empty() { f64::NAN } else { valid.iter().map(|v| v.0).sum::<f64>() / k },
                mae: if valid.is_empty() { f64::NAN } else { valid.iter().map(|v| v.1).sum::<f64>() / k },
                validity_rate: k / fixtures.len() as f64,
                n_valid: valid.len(),
                n_total: fixtures.len(),
            }
        })
        .collect();
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("tau,rmse,mae,validity_rate,n_valid,n_total\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.tau, r.rmse, r.mae, r.validity_rate, r.n_valid, r.n_total
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_round_trip() {
        let cfg = PipelineConfig::default();
        let text = cfg.to_toml_string();
        assert_eq!(PipelineConfig::from_toml_str(&text).unwrap(), cfg);
        assert_eq!(PipelineConfig::from_toml_str("").unwrap(), cfg);
    }

    #[test]
    fn config_partial_file_and_unknown_keys() {
        let cfg = PipelineConfig::from_toml_str("[selection]\ntau_cov = 0.5\n").unwrap();
        assert_eq!(cfg.selection.tau_cov, 0.5);
        assert_eq!(cfg.selection.lambda_coverage, 0.7);
        assert!(PipelineConfig::from_toml_str("[selection]\ntau = 0.5\n").is_err());
        assert!(PipelineConfig::from_toml_str("[selection]\ntau_cov = 1.5\n").is_err());
    }

    #[test]
    fn overrides_and_env() {
        let mut cfg = PipelineConfig::default();
        cfg.apply_overrides([("ransac.seed", "7"), ("selection.merge_coplanar", "false")])
            .unwrap();
        assert_eq!(cfg.ransac.seed, 7);
        assert!(!cfg.selection.merge_coplanar);
        assert!(cfg.apply_overrides([("selection.nope", "1")]).is_err());
        assert!(cfg.apply_overrides([("nosection.x", "1")]).is_err());
        assert!(cfg.apply_overrides([("ransac.seed", "\"text\"")]).is_err());

        cfg.apply_env([
            ("LODREFINE_SELECTION_TAU_COV".to_string(), "0.4".to_string()),
            ("LODREFINE_CONFIDENCE_THETA_FILTER_DEG".to_string(), "3".to_string()),
            ("LODREFINE_LOG".to_string(), "debug".to_string()),
            ("PATH".to_string(), "/bin".to_string()),
        ])
        .unwrap();
        assert_eq!(cfg.selection.tau_cov, 0.4);
        assert_eq!(cfg.confidence.theta_filter_deg, 3.0);
    }

    #[test]
    fn integer_literal_for_float_field() {
        let mut cfg = PipelineConfig::default();
        cfg.apply_overrides([("pipeline.expansion", "0")]).unwrap();
        assert_eq!(cfg.pipeline.expansion, 0.0);
    }
}
