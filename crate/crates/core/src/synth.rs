//! Synthetic buildings and scans for tests, benchmarks and demos.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::geometry::{Plane, Point3, Polygon3, Vec3};
use crate::model::{CoarseModel, DEFAULT_EXPANSION};
use crate::pointcloud::PointCloud;

/// Outward-wound faces of an axis-aligned box: -z, +z, -y, +y, -x, +x.
pub fn box_faces(min: Point3, max: Point3) -> Vec<Polygon3> {
    let p = Point3::new;
    let (a, b) = (min, max);
    vec![
        Polygon3::new(vec![p(a.x, a.y, a.z), p(a.x, b.y, a.z), p(b.x, b.y, a.z), p(b.x, a.y, a.z)]),
        Polygon3::new(vec![p(a.x, a.y, b.z), p(b.x, a.y, b.z), p(b.x, b.y, b.z), p(a.x, b.y, b.z)]),
        Polygon3::new(vec![p(a.x, a.y, a.z), p(b.x, a.y, a.z), p(b.x, a.y, b.z), p(a.x, a.y, b.z)]),
        Polygon3::new(vec![p(a.x, b.y, a.z), p(a.x, b.y, b.z), p(b.x, b.y, b.z), p(b.x, b.y, a.z)]),
        Polygon3::new(vec![p(a.x, a.y, a.z), p(a.x, a.y, b.z), p(a.x, b.y, b.z), p(a.x, b.y, a.z)]),
        Polygon3::new(vec![p(b.x, a.y, a.z), p(b.x, b.y, a.z), p(b.x, b.y, b.z), p(b.x, a.y, b.z)]),
    ]
}

pub fn box_model(id: &str, min: Point3, max: Point3) -> CoarseModel {
    CoarseModel::from_faces(id, box_faces(min, max), DEFAULT_EXPANSION).expect("box has six faces")
}

/// Vertical walls of a box, by outward direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Wall {
    PosX,
    NegX,
    PosY,
    NegY,
}

impl Wall {
    pub const ALL: [Wall; 4] = [Wall::PosX, Wall::NegX, Wall::PosY, Wall::NegY];

    pub fn normal(self) -> Vec3 {
        match self {
            Wall::PosX => Vec3::x(),
            Wall::NegX => -Vec3::x(),
            Wall::PosY => Vec3::y(),
            Wall::NegY => -Vec3::y(),
        }
    }

    /// The two walls meeting this one, ordered along the in-plane tangent
    /// `z × normal` (the first sits at negative tangent).
    fn neighbors(self) -> (Wall, Wall) {
        match self {
            Wall::PosX => (Wall::NegY, Wall::PosY),
            Wall::NegX => (Wall::PosY, Wall::NegY),
            Wall::PosY => (Wall::PosX, Wall::NegX),
            Wall::NegY => (Wall::NegX, Wall::PosX),
        }
    }
}

/// How one true wall differs from the coarse model's wall.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallChange {
    pub wall: Wall,
    /// Outward offset of the true wall from the coarse one, m.
    pub shift: f64,
    /// Rotation of the true wall about the vertical axis through its
    /// center, degrees.
    pub rotation_deg: f64,
    /// Fraction of the wall height covered by the scan, from the ground.
    pub scan_fraction: f64,
    pub n_points: usize,
}

impl WallChange {
    pub fn shifted(wall: Wall, shift: f64, n_points: usize) -> Self {
        WallChange {
            wall,
            shift,
            rotation_deg: 0.0,
            scan_fraction: 1.0,
            n_points,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    pub model: CoarseModel,
    pub cloud: PointCloud,
    /// True plane of each changed wall, outward normal, in `changes` order.
    pub truth_planes: Vec<Plane>,
    pub changes: Vec<WallChange>,
    /// `[start, end)` of each wall's points in the cloud.
    pub wall_ranges: Vec<(usize, usize)>,
}

/// A box `[0, size]` whose listed walls are moved or turned in reality and
/// scanned with Gaussian noise of `sigma` along the wall normal.
pub fn facade_fixture(name: &str, size: Vec3, changes: &[WallChange], sigma: f64, seed: u64) -> Fixture {
    let min = Point3::origin();
    let max = Point3::from(size);
    let model = box_model(name, min, max);
    let center = Point3::from(size / 2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma.max(0.0)).expect("finite sigma");
    let shift_of = |w: Wall| changes.iter().find(|c| c.wall == w).map_or(0.0, |c| c.shift);

    let mut points = Vec::new();
    let mut truth_planes = Vec::new();
    let mut wall_ranges = Vec::new();
    for ch in changes {
        let n0 = ch.wall.normal();
        let t0 = Vec3::z().cross(&n0);
        let half_depth = n0.abs().dot(&size) / 2.0;
        let half_len = t0.abs().dot(&size) / 2.0;
        let base = Point3::new(center.x, center.y, 0.0) + n0 * (half_depth + ch.shift);
        let (a, c) = (ch.rotation_deg.to_radians().sin(), ch.rotation_deg.to_radians().cos());
        let n = Vec3::new(n0.x * c - n0.y * a, n0.x * a + n0.y * c, 0.0);
        let t = Vec3::z().cross(&n);
        truth_planes.push(Plane::from_point_normal(&base, n));

        let (left, right) = ch.wall.neighbors();
        let lo = -(half_len + shift_of(left)) / c;
        let hi = (half_len + shift_of(right)) / c;
        let top = size.z * ch.scan_fraction;
        let start = points.len();
        for _ in 0..ch.n_points {
            let s = rng.random_range(lo..hi);
            let z = rng.random_range(0.0..top);
            let e: f64 = noise.sample(&mut rng);
            points.push(base + t * s + Vec3::z() * z + n * e);
        }
        wall_ranges.push((start, points.len()));
    }
    Fixture {
        name: name.to_string(),
        model,
        cloud: PointCloud::new(points).expect("fixture has points"),
        truth_planes,
        changes: changes.to_vec(),
        wall_ranges,
    }
}

/// A 10 x 10 x 8 m box whose +x facade sits 0.5 m inward in the model;
/// 5,000 scan points with 1 cm noise on the true facade.
pub fn shifted_facade_box(seed: u64) -> Fixture {
    facade_fixture(
        "box",
        Vec3::new(10.0, 10.0, 8.0),
        &[WallChange::shifted(Wall::PosX, 0.5, 5000)],
        0.01,
        seed,
    )
}

/// Random box size, wall, shift in `[0.1, 0.5]` m (either sign) and, for
/// odd `k`, a rotation of up to 3 degrees.
pub fn random_facade_fixture(k: usize, sigma: f64, seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = Vec3::new(
        rng.random_range(8.0..14.0),
        rng.random_range(8.0..14.0),
        rng.random_range(6.0..12.0),
    );
    let wall = Wall::ALL[rng.random_range(0..4)];
    let magnitude = rng.random_range(0.1..=0.5);
    let shift = if rng.random_bool(0.5) { magnitude } else { -magnitude };
    let rotation_deg = if k % 2 == 1 { rng.random_range(-3.0..3.0) } else { 0.0 };
    let change = WallChange {
        wall,
        shift,
        rotation_deg,
        scan_fraction: 1.0,
        n_points: 4000,
    };
    facade_fixture(&format!("fixture{k:02}"), size, &[change], sigma, seed ^ 0x5eed)
}

/// A 10 x 10 x 8 m building whose four walls all sit 0.3 m inward in the
/// model, scanned only up to 60% of their height.
pub fn occluded_fixture(seed: u64) -> Fixture {
    let changes: Vec<WallChange> = Wall::ALL
        .iter()
        .map(|&w| WallChange {
            wall: w,
            shift: 0.3,
            rotation_deg: 0.0,
            scan_fraction: 0.6,
            n_points: 3000,
        })
        .collect();
    facade_fixture("occluded", Vec3::new(10.0, 10.0, 8.0), &changes, 0.01, seed)
}

/// Two candidate buildings: `a` is the scanned one, `b` the same box moved
/// 5 m horizontally along `direction`. The scan covers two facades of `a`.
pub fn two_building_fixture(direction: Wall, seed: u64) -> (CoarseModel, CoarseModel, PointCloud) {
    let size = Vec3::new(10.0, 10.0, 8.0);
    let fx = facade_fixture(
        "a",
        size,
        &[
            WallChange::shifted(Wall::PosX, 0.0, 3000),
            WallChange::shifted(Wall::PosY, 0.0, 3000),
        ],
        0.01,
        seed,
    );
    let off = direction.normal() * 5.0;
    let b = box_model("b", Point3::from(off), Point3::from(size + off));
    (fx.model, b, fx.cloud)
}
