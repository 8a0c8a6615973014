use std::collections::HashMap;

use super::Point3;

/// Fuses points closer than a tolerance onto the first-inserted
/// representative. Lookup is a uniform grid with cell size = tolerance, so
/// a 27-cell neighborhood covers every candidate.
#[derive(Debug, Clone)]
pub struct VertexWelder {
    tol: f64,
    cells: HashMap<[i64; 3], Vec<usize>>,
    points: Vec<Point3>,
}

impl VertexWelder {
    pub fn new(tol: f64) -> Self {
        assert!(tol > 0.0, "weld tolerance must be positive");
        VertexWelder {
            tol,
            cells: HashMap::new(),
            points: Vec::new(),
        }
    }

    fn key(&self, p: &Point3) -> [i64; 3] {
        [
            (p.x / self.tol).floor() as i64,
            (p.y / self.tol).floor() as i64,
            (p.z / self.tol).floor() as i64,
        ]
    }

    /// Index of the representative within tolerance, if any.
    pub fn find(&self, p: &Point3) -> Option<usize> {
        let k = self.key(p);
        let mut best: Option<usize> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(ids) = self.cells.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) else { continue };
                    for &i in ids {
                        if (self.points[i] - p).norm() <= self.tol && best.is_none_or(|b| i < b) {
                            best = Some(i);
                        }
                    }
                }
            }
        }
        best
    }

    pub fn insert(&mut self, p: &Point3) -> usize {
        if let Some(i) = self.find(p) {
            return i;
        }
        let i = self.points.len();
        self.points.push(*p);
        let k = self.key(p);
        self.cells.entry(k).or_default().push(i);
        i
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point3> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
