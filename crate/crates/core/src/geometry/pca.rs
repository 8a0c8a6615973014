use nalgebra::{Matrix3, SymmetricEigen};

use super::{Plane, Point3, Vec3};
use crate::error::{Error, Result};

/// Result of a principal-component plane fit.
#[derive(Debug, Clone, Copy)]
pub struct PlaneFit {
    pub plane: Plane,
    pub centroid: Point3,
    /// Root-mean-square point-plane distance, m.
    pub rms_residual: f64,
    /// Principal axes ordered by decreasing variance; `axes[2]` is the normal.
    pub axes: [Vec3; 3],
    pub variances: [f64; 3],
}

impl PlaneFit {
    /// Flips the normal (and axes) so it has a nonnegative dot with `dir`.
    pub fn oriented_towards(mut self, dir: &Vec3) -> Self {
        if self.plane.normal.dot(dir) < 0.0 {
            self.plane = self.plane.flipped();
            self.axes[2] = -self.axes[2];
            self.axes[1] = -self.axes[1];
        }
        self
    }
}

/// Population covariance of `points` about their centroid.
pub fn covariance(points: &[Point3]) -> (Point3, Matrix3<f64>) {
    let n = points.len() as f64;
    let centroid = Point3::from(points.iter().fold(Vec3::zeros(), |acc, p| acc + p.coords) / n);
    let mut cov = Matrix3::zeros();
    for p in points {
        let r = p - centroid;
        cov += r * r.transpose();
    }
    (centroid, cov / n)
}

/// Fits a plane through the centroid with the smallest-variance eigenvector
/// as normal. The normal sign is canonical (largest component positive);
/// callers orient it for their own convention.
pub fn fit_plane_pca(points: &[Point3]) -> Result<PlaneFit> {
    if points.len() < 3 {
        return Err(Error::DegenerateInput(format!(
            "plane fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    let (centroid, cov) = covariance(points);
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let variances = order.map(|i| eig.eigenvalues[i].max(0.0));
    let mut axes = order.map(|i| eig.eigenvectors.column(i).into_owned());

    if variances[0] <= 0.0 || variances[1] <= 1e-14 * variances[0] {
        return Err(Error::DegenerateInput("points are collinear or coincident".into()));
    }

    let n = axes[2];
    let largest = (0..3).max_by(|&a, &b| n[a].abs().total_cmp(&n[b].abs())).unwrap();
    if n[largest] < 0.0 {
        axes[2] = -axes[2];
    }
    // keep a right-handed basis
    if axes[0].cross(&axes[1]).dot(&axes[2]) < 0.0 {
        axes[1] = -axes[1];
    }
    let plane = Plane::from_point_normal(&centroid, axes[2]);
    let ss: f64 = points.iter().map(|p| plane.signed_distance(p).powi(2)).sum();
    Ok(PlaneFit {
        plane,
        centroid,
        rms_residual: (ss / points.len() as f64).sqrt(),
        axes,
        variances,
    })
}
