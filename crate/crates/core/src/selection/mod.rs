//! Face selection as a binary program: coverage cost, hard edge rules,
//! sharp-edge complexity. Solved exactly by branch and bound.

mod extract;
mod lp;
mod solver;

pub use extract::{extract_mesh, ExtractOptions};
pub use lp::{export_lp, problem_to_lp};
pub use solver::{solve, solve_with_options, SolveLog, SolveOptions, SolveStatus, Solution};

use serde::{Deserialize, Serialize};

use crate::candidates::CandidateSet;
use crate::error::{Error, Result};

/// Planes closer than this (degrees, meters) make two faces coplanar.
pub const COPLANAR_ANGLE_DEG: f64 = 1.0;
pub const COPLANAR_OFFSET: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionParams {
    pub tau_cov: f64,
    pub lambda_coverage: f64,
    pub lambda_complexity: f64,
    /// Seconds per building.
    pub time_limit_s: f64,
    /// Merge coplanar adjacent selected faces in the output mesh.
    pub merge_coplanar: bool,
}

impl Default for SelectionParams {
    fn default() -> Self {
        SelectionParams {
            tau_cov: 0.3,
            lambda_coverage: 0.7,
            lambda_complexity: 0.3,
            time_limit_s: 60.0,
            merge_coplanar: true,
        }
    }
}

impl SelectionParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.tau_cov) {
            return Err(Error::Config(format!("tau_cov must be in [0, 1], got {}", self.tau_cov)));
        }
        if self.lambda_coverage < 0.0 || self.lambda_complexity < 0.0 {
            return Err(Error::Config("lambda weights must be nonnegative".into()));
        }
        if self.lambda_coverage + self.lambda_complexity <= 0.0 {
            return Err(Error::Config("lambda weights must not both be zero".into()));
        }
        if self.time_limit_s <= 0.0 {
            return Err(Error::Config("time limit must be positive".into()));
        }
        Ok(())
    }
}

/// Sigmoid coverage cost: zero at `c == tau`, a reward above it and a
/// penalty below it, scaled by area.
pub fn coverage_cost(area: f64, c: f64, tau: f64) -> f64 {
    area * (1.0 / (1.0 + (c - tau).exp()) - 0.5)
}

/// Edge rule: the incident faces' selected count is 0 or 2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeConstraint {
    pub faces: Vec<usize>,
    /// Non-coplanar incident pairs; empty means the edge has no `z` variable.
    pub sharp_pairs: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionProblem {
    pub cov_costs: Vec<f64>,
    pub edges: Vec<EdgeConstraint>,
    pub lambda_coverage: f64,
    pub lambda_complexity: f64,
}

impl SelectionProblem {
    pub fn n_faces(&self) -> usize {
        self.cov_costs.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_sharp_vars(&self) -> usize {
        self.edges.iter().filter(|e| !e.sharp_pairs.is_empty()).count()
    }

    /// Every edge sees 0 or 2 selected faces.
    pub fn is_feasible(&self, x: &[bool]) -> bool {
        self.edges.iter().all(|e| {
            let s = e.faces.iter().filter(|&&f| x[f]).count();
            s == 0 || s == 2
        })
    }

    /// Edges with a selected non-coplanar pair.
    pub fn sharp_count(&self, x: &[bool]) -> usize {
        self.edges
            .iter()
            .filter(|e| e.sharp_pairs.iter().any(|&(i, j)| x[i] && x[j]))
            .count()
    }

    /// Objective value. Summation order is fixed so that every caller gets
    /// bit-identical values for the same assignment.
    pub fn objective(&self, x: &[bool]) -> f64 {
        let mut cov = 0.0;
        for (i, c) in self.cov_costs.iter().enumerate() {
            if x[i] {
                cov += c;
            }
        }
        let sharp = self.sharp_count(x);
        self.lambda_coverage * cov + self.lambda_complexity * (sharp as f64) / (self.edges.len() as f64)
    }
}

/// Whether faces `i` and `j` of the set lie on one plane.
pub fn faces_coplanar(set: &CandidateSet, i: usize, j: usize) -> bool {
    let (fi, fj) = (&set.faces[i], &set.faces[j]);
    if fi.plane_index == fj.plane_index {
        return true;
    }
    let (pi, pj) = (&set.planes[fi.plane_index].plane, &set.planes[fj.plane_index].plane);
    pi.angle_to_deg(pj) < COPLANAR_ANGLE_DEG
        && pi.distance(&fj.polygon.centroid()) <= COPLANAR_OFFSET
        && pj.distance(&fi.polygon.centroid()) <= COPLANAR_OFFSET
}

/// Builds the program from a candidate set with confidences assigned.
pub fn build_problem(set: &CandidateSet, params: &SelectionParams) -> Result<SelectionProblem> {
    if set.faces.is_empty() || set.edges.is_empty() {
        return Err(Error::EmptyProblem);
    }
    let cov_costs = set
        .faces
        .iter()
        .map(|f| coverage_cost(f.area, f.confidence, params.tau_cov))
        .collect();
    let edges = set
        .edges
        .iter()
        .map(|e| {
            let mut sharp_pairs = Vec::new();
            for (a, &i) in e.incident_faces.iter().enumerate() {
                for &j in &e.incident_faces[a + 1..] {
                    if !faces_coplanar(set, i, j) {
                        sharp_pairs.push((i, j));
                    }
                }
            }
            EdgeConstraint {
                faces: e.incident_faces.clone(),
                sharp_pairs,
            }
        })
        .collect();
    Ok(SelectionProblem {
        cov_costs,
        edges,
        lambda_coverage: params.lambda_coverage,
        lambda_complexity: params.lambda_complexity,
    })
}
