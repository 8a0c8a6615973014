//! Point cloud I/O and greedy multi-plane RANSAC segmentation.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, ParseLocation, Result};
use crate::geometry::{
    convex_hull_2d, fit_plane_pca, obb_from_points, polygon_area_2d, Aabb3, Frame, Obb3, Plane,
    Point2, Point3, Vec3,
};

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3>,
    /// Carried through I/O, unused by the pipeline.
    pub intensity: Option<Vec<f32>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if points.iter().any(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::DegenerateInput("point cloud contains non-finite coordinates".into()));
        }
        Ok(PointCloud {
            points,
            intensity: None,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn aabb(&self) -> Aabb3 {
        Aabb3::from_points(&self.points).expect("cloud is non-empty")
    }

    pub fn centroid(&self) -> Point3 {
        Point3::from(self.points.iter().fold(Vec3::zeros(), |a, p| a + p.coords) / self.points.len() as f64)
    }

    pub fn translated(&self, offset: &Vec3) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| p + offset).collect(),
            intensity: self.intensity.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CloudFormat {
    XyzAscii,
    Ply,
}

impl CloudFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "xyz" | "txt" | "pts" => Some(CloudFormat::XyzAscii),
            "ply" => Some(CloudFormat::Ply),
            _ => None,
        }
    }
}

/// Loads a cloud, keeping points in file order.
pub fn load_cloud(path: &Path, format: CloudFormat) -> Result<PointCloud> {
    let file = fs::File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let cloud = match format {
        CloudFormat::XyzAscii => read_xyz(BufReader::new(file), path)?,
        CloudFormat::Ply => read_ply(BufReader::new(file), path)?,
    };
    if cloud.points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(cloud)
}

/// Picks the format from the file extension.
pub fn load_cloud_auto(path: &Path) -> Result<PointCloud> {
    let format = CloudFormat::from_path(path).ok_or_else(|| {
        Error::parse(path, ParseLocation::Line(0), "unknown point cloud extension (expected .xyz or .ply)")
    })?;
    load_cloud(path, format)
}

fn read_xyz(reader: impl BufRead, path: &Path) -> Result<PointCloud> {
    let mut points = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with("//") {
            continue;
        }
        let mut cols = trimmed.split(|c: char| c.is_whitespace() || c == ',').filter(|s| !s.is_empty());
        let mut xyz = [0.0; 3];
        for (k, slot) in xyz.iter_mut().enumerate() {
            let tok = cols
                .next()
                .ok_or_else(|| Error::parse(path, ParseLocation::Line(lineno), format!("expected 3 columns, found {k}")))?;
            *slot = tok
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(path, ParseLocation::Line(lineno), format!("invalid coordinate {tok:?}")))?;
        }
        points.push(Point3::new(xyz[0], xyz[1], xyz[2]));
    }
    Ok(PointCloud {
        points,
        intensity: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar(String, Scalar),
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PlyEncoding {
    Ascii,
    BinaryLe,
}

fn read_ply(mut reader: impl BufRead, path: &Path) -> Result<PointCloud> {
    let io_err = |e| Error::io(format!("reading {}", path.display()), e);
    let mut elements: Vec<Element> = Vec::new();
    let mut encoding = None;
    let mut lineno = 0;
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line).map_err(io_err)? == 0 {
            return Err(Error::parse(path, ParseLocation::Line(lineno), "unexpected end of PLY header"));
        }
        lineno += 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        let bad = |msg: &str| Error::parse(path, ParseLocation::Line(lineno), msg.to_string());
        match toks.as_slice() {
            ["ply"] if lineno == 1 => {}
            _ if lineno == 1 => return Err(bad("missing 'ply' magic")),
            ["format", "ascii", _] => encoding = Some(PlyEncoding::Ascii),
            ["format", "binary_little_endian", _] => encoding = Some(PlyEncoding::BinaryLe),
            ["format", other, _] => return Err(bad(&format!("unsupported PLY format {other}"))),
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| bad("invalid element count"))?,
                properties: Vec::new(),
            }),
            ["property", "list", count, item, _name] => {
                let el = elements.last_mut().ok_or_else(|| bad("property before element"))?;
                el.properties.push(Property::List {
                    count: Scalar::parse(count).ok_or_else(|| bad("unknown list count type"))?,
                    item: Scalar::parse(item).ok_or_else(|| bad("unknown list item type"))?,
                });
            }
            ["property", ty, name] => {
                let el = elements.last_mut().ok_or_else(|| bad("property before element"))?;
                let s = Scalar::parse(ty).ok_or_else(|| bad(&format!("unknown property type {ty}")))?;
                el.properties.push(Property::Scalar(name.to_string(), s));
            }
            ["end_header"] => break,
            _ => return Err(bad(&format!("unrecognized header line {:?}", line.trim()))),
        }
    }
    let encoding = encoding.ok_or_else(|| Error::parse(path, ParseLocation::Line(lineno), "missing format line"))?;
    let vertex_idx = elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| Error::parse(path, ParseLocation::Line(lineno), "no vertex element"))?;
    let vertex = &elements[vertex_idx];
    let find = |n: &str| {
        vertex
            .properties
            .iter()
            .position(|p| matches!(p, Property::Scalar(name, _) if name == n))
    };
    let (ix, iy, iz) = match (find("x"), find("y"), find("z")) {
        (Some(x), Some(y), Some(z)) => (x, y, z),
        _ => return Err(Error::parse(path, ParseLocation::Line(lineno), "vertex element lacks x, y, z")),
    };
    let iint = find("intensity").or_else(|| find("scalar_intensity"));
    if vertex.count == 0 {
        return Err(Error::EmptyCloud);
    }

    let mut points = Vec::with_capacity(vertex.count);
    let mut intensity = iint.map(|_| Vec::with_capacity(vertex.count));
    match encoding {
        PlyEncoding::Ascii => {
            let mut rows = reader.lines();
            for el in &elements[..=vertex_idx] {
                for _ in 0..el.count {
                    lineno += 1;
                    let row = rows
                        .next()
                        .ok_or_else(|| Error::parse(path, ParseLocation::Line(lineno), "unexpected end of data"))?
                        .map_err(io_err)?;
                    if el.name != "vertex" {
                        continue;
                    }
                    let vals: Vec<f64> = row
                        .split_whitespace()
                        .map(|t| t.parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| Error::parse(path, ParseLocation::Line(lineno), "invalid number"))?;
                    if vals.len() < el.properties.len() {
                        return Err(Error::parse(path, ParseLocation::Line(lineno), "too few values in vertex row"));
                    }
                    let p = Point3::new(vals[ix], vals[iy], vals[iz]);
                    if !p.coords.iter().all(|c| c.is_finite()) {
                        return Err(Error::parse(path, ParseLocation::Line(lineno), "non-finite coordinate"));
                    }
                    points.push(p);
                    if let (Some(k), Some(out)) = (iint, intensity.as_mut()) {
                        out.push(vals[k] as f32);
                    }
                }
            }
        }
        PlyEncoding::BinaryLe => {
            let mut data = Vec::new();
            reader.read_to_end(&mut data).map_err(io_err)?;
            let mut offset = 0usize;
            let truncated = |at: usize| Error::parse(path, ParseLocation::Byte(at), "truncated binary data");
            for el in &elements[..=vertex_idx] {
                for _ in 0..el.count {
                    let mut vals = vec![0.0; el.properties.len()];
                    for (k, prop) in el.properties.iter().enumerate() {
                        match prop {
                            Property::Scalar(_, s) => {
                                let end = offset + s.size();
                                let bytes = data.get(offset..end).ok_or_else(|| truncated(offset))?;
                                vals[k] = s.read_le(bytes);
                                offset = end;
                            }
                            Property::List { count, item } => {
                                let bytes = data.get(offset..offset + count.size()).ok_or_else(|| truncated(offset))?;
                                let n = count.read_le(bytes) as usize;
                                offset += count.size() + n * item.size();
                                if offset > data.len() {
                                    return Err(truncated(offset));
                                }
                            }
                        }
                    }
                    if el.name == "vertex" {
                        let p = Point3::new(vals[ix], vals[iy], vals[iz]);
                        if !p.coords.iter().all(|c| c.is_finite()) {
                            return Err(Error::parse(path, ParseLocation::Byte(offset), "non-finite coordinate"));
                        }
                        points.push(p);
                        if let (Some(k), Some(out)) = (iint, intensity.as_mut()) {
                            out.push(vals[k] as f32);
                        }
                    }
                }
            }
        }
    }
    Ok(PointCloud { points, intensity })
}

/// Writes an ASCII `.xyz` file.
pub fn write_xyz(path: &Path, points: &[Point3]) -> Result<()> {
    let mut out = String::with_capacity(points.len() * 32);
    for p in points {
        out.push_str(&format!("{} {} {}\n", p.x, p.y, p.z));
    }
    fs::write(path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Writes a binary little-endian PLY with optional per-point RGB.
pub fn write_ply(path: &Path, points: &[Point3], colors: Option<&[[u8; 3]]>) -> Result<()> {
    let mut buf = Vec::with_capacity(points.len() * 27 + 256);
    let mut header = format!("ply\nformat binary_little_endian 1.0\nelement vertex {}\n", points.len());
    header.push_str("property double x\nproperty double y\nproperty double z\n");
    if colors.is_some() {
        header.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    header.push_str("end_header\n");
    buf.extend_from_slice(header.as_bytes());
    for (i, p) in points.iter().enumerate() {
        for c in [p.x, p.y, p.z] {
            buf.extend_from_slice(&c.to_le_bytes());
        }
        if let Some(cols) = colors {
            buf.extend_from_slice(&cols[i]);
        }
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    f.write_all(&buf).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RansacParams {
    /// Inlier distance, m.
    pub distance: f64,
    pub min_cluster_size: usize,
    /// Hypotheses per extraction.
    pub max_iterations: usize,
    pub max_planes: usize,
    /// Post-pass merge gates for fragmented walls.
    pub merge_angle_deg: f64,
    pub merge_offset: f64,
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        RansacParams {
            distance: 0.05,
            min_cluster_size: 200,
            max_iterations: 2000,
            max_planes: 32,
            merge_angle_deg: 2.0,
            merge_offset: 0.05,
            seed: 42,
        }
    }
}

/// One planar segment of a cloud.
#[derive(Debug, Clone)]
pub struct PlanarCluster {
    pub plane: Plane,
    pub inliers: Vec<usize>,
    pub centroid: Point3,
    pub obb: Obb3,
    /// In-plane frame in which `hull2d` is expressed.
    pub frame: Frame,
    /// Counter-clockwise convex hull of the inliers projected on the plane.
    pub hull2d: Vec<Point2>,
}

impl PlanarCluster {
    /// Builds a cluster with `plane` fixed; `None` if the inliers span no area.
    pub fn from_inliers(cloud: &PointCloud, plane: Plane, inliers: Vec<usize>) -> Option<Self> {
        let pts: Vec<Point3> = inliers.iter().map(|&i| cloud.points[i]).collect();
        if pts.len() < 3 {
            return None;
        }
        let centroid = Point3::from(pts.iter().fold(Vec3::zeros(), |a, p| a + p.coords) / pts.len() as f64);
        let frame = plane.frame_at(&centroid);
        let local: Vec<Point2> = pts.iter().map(|p| frame.to_local(p)).collect();
        let hull2d = convex_hull_2d(&local).ok()?;
        if polygon_area_2d(&hull2d) <= 0.0 {
            return None;
        }
        let obb = obb_from_points(&pts).ok()?;
        Some(PlanarCluster {
            plane,
            inliers,
            centroid,
            obb,
            frame,
            hull2d,
        })
    }

    pub fn points<'a>(&'a self, cloud: &'a PointCloud) -> impl Iterator<Item = &'a Point3> + 'a {
        self.inliers.iter().map(move |&i| &cloud.points[i])
    }

    pub fn aabb(&self, cloud: &PointCloud) -> Aabb3 {
        Aabb3::from_points(self.points(cloud)).expect("cluster has inliers")
    }

    pub fn hull_area(&self) -> f64 {
        polygon_area_2d(&self.hull2d)
    }
}

#[derive(Debug, Clone)]
pub struct SegmentedCloud {
    pub source: PointCloud,
    pub clusters: Vec<PlanarCluster>,
    pub unassigned: Vec<usize>,
}

fn plane_through(a: &Point3, b: &Point3, c: &Point3) -> Option<Plane> {
    let n = (b - a).cross(&(c - a));
    let len = n.norm();
    let scale = (b - a).norm() * (c - a).norm();
    if len <= 1e-9 * scale || len == 0.0 {
        return None;
    }
    Some(Plane::from_point_normal(a, n / len))
}

fn inliers_of(cloud: &PointCloud, candidates: &[usize], plane: &Plane, dist: f64) -> Vec<usize> {
    candidates
        .iter()
        .copied()
        .filter(|&i| plane.distance(&cloud.points[i]) < dist)
        .collect()
}

/// Refits on the inliers until the inlier set is stable; the returned
/// inliers are exactly the candidates within `dist` of the returned plane.
fn refine_plane(cloud: &PointCloud, candidates: &[usize], seed_plane: Plane, dist: f64) -> (Plane, Vec<usize>) {
    let mut plane = seed_plane;
    let mut inliers = inliers_of(cloud, candidates, &plane, dist);
    for _ in 0..4 {
        let pts: Vec<Point3> = inliers.iter().map(|&i| cloud.points[i]).collect();
        let Ok(fit) = fit_plane_pca(&pts) else { break };
        let next = inliers_of(cloud, candidates, &fit.plane, dist);
        if next.len() < inliers.len() {
            break;
        }
        let stable = next == inliers;
        plane = fit.plane;
        inliers = next;
        if stable {
            break;
        }
    }
    (plane, inliers)
}

/// Greedy sequential RANSAC: extract the best-supported plane, remove its
/// inliers, repeat. Deterministic for a given `params.seed`.
pub fn segment_planes_ransac(cloud: &PointCloud, params: &RansacParams) -> SegmentedCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut remaining: Vec<usize> = (0..cloud.len()).collect();
    let mut raw: Vec<(Plane, Vec<usize>)> = Vec::new();
    let mut discarded: Vec<usize> = Vec::new();
    let min_size = params.min_cluster_size.max(3);

    while raw.len() < params.max_planes && remaining.len() >= min_size {
        let n = remaining.len();
        let mut best: Option<(usize, Plane)> = None;
        let mut budget = params.max_iterations;
        let mut it = 0;
        while it < budget {
            it += 1;
            let a = rng.random_range(0..n);
            let mut b = rng.random_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            let mut c = rng.random_range(0..n - 2);
            for taken in [a.min(b), a.max(b)] {
                if c >= taken {
                    c += 1;
                }
            }
            let (pa, pb, pc) = (
                &cloud.points[remaining[a]],
                &cloud.points[remaining[b]],
                &cloud.points[remaining[c]],
            );
            let Some(plane) = plane_through(pa, pb, pc) else { continue };
            let count = remaining
                .iter()
                .filter(|&&i| plane.distance(&cloud.points[i]) < params.distance)
                .count();
            if best.as_ref().is_none_or(|(bc, _)| count > *bc) {
                best = Some((count, plane));
                // adaptive stop at 99.9% confidence of having seen an all-inlier sample
                let w = count as f64 / n as f64;
                let p_good = w * w * w;
                let needed = if p_good >= 1.0 {
                    1.0
                } else {
                    (1e-3f64).ln() / (1.0 - p_good).ln()
                };
                budget = budget.min((needed.ceil() as usize).max(32));
            }
        }
        let Some((count, plane)) = best else { break };
        if count < min_size {
            break;
        }
        let (plane, inliers) = refine_plane(cloud, &remaining, plane, params.distance);
        if inliers.len() < min_size {
            break;
        }
        let taken: std::collections::HashSet<usize> = inliers.iter().copied().collect();
        remaining.retain(|i| !taken.contains(i));
        raw.push((plane, inliers));
    }

    let merged = merge_fragments(cloud, raw, params, &mut discarded);

    let cloud_centroid = cloud.centroid();
    let mut clusters = Vec::with_capacity(merged.len());
    for (plane, inliers) in merged {
        let plane = orient_away_from(plane, &inliers, cloud, &cloud_centroid);
        match PlanarCluster::from_inliers(cloud, plane, inliers.clone()) {
            Some(c) if c.inliers.len() >= min_size => clusters.push(c),
            _ => discarded.extend(inliers),
        }
    }
    let mut unassigned: Vec<usize> = remaining;
    unassigned.extend(discarded);
    unassigned.sort_unstable();
    SegmentedCloud {
        source: cloud.clone(),
        clusters,
        unassigned,
    }
}

fn orient_away_from(plane: Plane, inliers: &[usize], cloud: &PointCloud, center: &Point3) -> Plane {
    let c = inliers.iter().fold(Vec3::zeros(), |a, &i| a + cloud.points[i].coords) / inliers.len() as f64;
    let outward = c - center.coords;
    if plane.normal.dot(&outward) < -1e-6 {
        plane.flipped()
    } else {
        plane
    }
}

/// Joins clusters whose planes agree within the merge gates. Points of the
/// union that end up farther than the inlier distance are dropped.
fn merge_fragments(
    cloud: &PointCloud,
    mut clusters: Vec<(Plane, Vec<usize>)>,
    params: &RansacParams,
    dropped: &mut Vec<usize>,
) -> Vec<(Plane, Vec<usize>)> {
    loop {
        let mut pair = None;
        'search: for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                let (pi, ii) = &clusters[i];
                let (pj, ij) = &clusters[j];
                if pi.angle_to_deg(pj) >= params.merge_angle_deg {
                    continue;
                }
                let ci = mean_point(cloud, ii);
                let cj = mean_point(cloud, ij);
                if pi.distance(&cj).max(pj.distance(&ci)) < params.merge_offset {
                    pair = Some((i, j));
                    break 'search;
                }
            }
        }
        let Some((i, j)) = pair else { break };
        let (_, mut union) = clusters.remove(j);
        union.extend(clusters[i].1.iter().copied());
        union.sort_unstable();
        let pts: Vec<Point3> = union.iter().map(|&k| cloud.points[k]).collect();
        let plane = match fit_plane_pca(&pts) {
            Ok(fit) => fit.plane,
            Err(_) => clusters[i].0,
        };
        let (keep, drop): (Vec<usize>, Vec<usize>) =
            union.into_iter().partition(|&k| plane.distance(&cloud.points[k]) < params.distance);
        dropped.extend(drop);
        clusters[i] = (plane, keep);
    }
    clusters
}

fn mean_point(cloud: &PointCloud, idx: &[usize]) -> Point3 {
    Point3::from(idx.iter().fold(Vec3::zeros(), |a, &i| a + cloud.points[i].coords) / idx.len() as f64)
}

/// Writes `cluster_NNN.ply` per cluster plus `unassigned.ply`, colored by id.
pub fn write_cluster_debug(dir: &Path, seg: &SegmentedCloud) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    for (k, c) in seg.clusters.iter().enumerate() {
        let pts: Vec<Point3> = c.points(&seg.source).copied().collect();
        let color = cluster_color(k);
        let colors = vec![color; pts.len()];
        write_ply(&dir.join(format!("cluster_{k:03}.ply")), &pts, Some(&colors))?;
    }
    if !seg.unassigned.is_empty() {
        let pts: Vec<Point3> = seg.unassigned.iter().map(|&i| seg.source.points[i]).collect();
        let colors = vec![[128u8, 128, 128]; pts.len()];
        write_ply(&dir.join("unassigned.ply"), &pts, Some(&colors))?;
    }
    Ok(())
}

fn cluster_color(k: usize) -> [u8; 3] {
    // golden-angle hue walk
    let h = (k as f64 * 137.508) % 360.0;
    let x = 1.0 - ((h / 60.0) % 2.0 - 1.0).abs();
    let (r, g, b) = match (h / 60.0) as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    [(r * 255.0) as u8, (g * 255.0) as u8, (b * 255.0) as u8]
}
