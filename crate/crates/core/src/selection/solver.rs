use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::SelectionProblem;

/// Slack for pruning; keeps ties and rounding noise from cutting off an
/// optimum whose canonical value is marginally below the bound.
const PRUNE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveLog {
    pub nodes: u64,
    /// `(nodes explored, incumbent objective)` at each improvement.
    pub bound_trace: Vec<(u64, f64)>,
    pub wall_time_s: f64,
    pub faces: usize,
    pub edges: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    /// Sorted selected face indices.
    pub selected: Vec<usize>,
    pub objective_value: f64,
    pub status: SolveStatus,
    pub log: SolveLog,
}

impl Solution {
    pub fn assignment(&self, n: usize) -> Vec<bool> {
        let mut x = vec![false; n];
        for &i in &self.selected {
            x[i] = true;
        }
        x
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub time_limit_s: f64,
    /// Node budget, mostly for tests.
    pub max_nodes: Option<u64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            time_limit_s: 60.0,
            max_nodes: None,
        }
    }
}

pub fn solve(problem: &SelectionProblem, time_limit_s: f64) -> Solution {
    solve_with_options(
        problem,
        &SolveOptions {
            time_limit_s,
            max_nodes: None,
        },
    )
}

const UNFIXED: i8 = -1;

struct Search<'a> {
    p: &'a SelectionProblem,
    face_edges: Vec<Vec<usize>>,
    /// For each face, (edge, partner) for every sharp pair it belongs to.
    face_sharp: Vec<Vec<(usize, usize)>>,
    order: Vec<usize>,
    value: Vec<i8>,
    ones: Vec<u32>,
    unfixed: Vec<u32>,
    sharp_on: Vec<bool>,
    sharp_count: usize,
    fixed_cost: f64,
    /// Σ of negative costs over unfixed faces.
    neg_unfixed: f64,
    trail: Vec<Change>,
    best: Vec<bool>,
    best_value: f64,
    nodes: u64,
    trace: Vec<(u64, f64)>,
    start: Instant,
    opts: SolveOptions,
    timed_out: bool,
}

enum Change {
    Face(usize),
    Sharp(usize),
}

impl<'a> Search<'a> {
    fn new(p: &'a SelectionProblem, opts: SolveOptions) -> Self {
        let n = p.n_faces();
        let mut face_edges = vec![Vec::new(); n];
        let mut face_sharp = vec![Vec::new(); n];
        for (ei, e) in p.edges.iter().enumerate() {
            for &f in &e.faces {
                face_edges[f].push(ei);
            }
            for &(i, j) in &e.sharp_pairs {
                face_sharp[i].push((ei, j));
                face_sharp[j].push((ei, i));
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| p.cov_costs[b].abs().total_cmp(&p.cov_costs[a].abs()).then(a.cmp(&b)));
        let neg_unfixed = p.cov_costs.iter().filter(|c| **c < 0.0).sum();
        let empty = vec![false; n];
        let best_value = p.objective(&empty);
        Search {
            p,
            face_edges,
            face_sharp,
            order,
            value: vec![UNFIXED; n],
            ones: vec![0; p.n_edges()],
            unfixed: p.edges.iter().map(|e| e.faces.len() as u32).collect(),
            sharp_on: vec![false; p.n_edges()],
            sharp_count: 0,
            fixed_cost: 0.0,
            neg_unfixed,
            trail: Vec::new(),
            best: empty,
            best_value,
            nodes: 0,
            trace: vec![(0, best_value)],
            start: Instant::now(),
            opts,
            timed_out: false,
        }
    }

    fn assign(&mut self, f: usize, v: i8) {
        debug_assert_eq!(self.value[f], UNFIXED);
        self.value[f] = v;
        let c = self.p.cov_costs[f];
        if c < 0.0 {
            self.neg_unfixed -= c;
        }
        if v == 1 {
            self.fixed_cost += c;
        }
        for &e in &self.face_edges[f] {
            self.unfixed[e] -= 1;
            if v == 1 {
                self.ones[e] += 1;
            }
        }
        self.trail.push(Change::Face(f));
        if v == 1 {
            for k in 0..self.face_sharp[f].len() {
                let (e, partner) = self.face_sharp[f][k];
                if !self.sharp_on[e] && self.value[partner] == 1 {
                    self.sharp_on[e] = true;
                    self.sharp_count += 1;
                    self.trail.push(Change::Sharp(e));
                }
            }
        }
    }

    fn undo_to(&mut self, mark: usize) {
        while self.trail.len() > mark {
            match self.trail.pop().unwrap() {
                Change::Face(f) => {
                    let v = self.value[f];
                    let c = self.p.cov_costs[f];
                    if c < 0.0 {
                        self.neg_unfixed += c;
                    }
                    if v == 1 {
                        self.fixed_cost -= c;
                    }
                    for &e in &self.face_edges[f] {
                        self.unfixed[e] += 1;
                        if v == 1 {
                            self.ones[e] -= 1;
                        }
                    }
                    self.value[f] = UNFIXED;
                }
                Change::Sharp(e) => {
                    self.sharp_on[e] = false;
                    self.sharp_count -= 1;
                }
            }
        }
    }

    /// Fixes `f = v` and propagates the edge rules. False on conflict.
    fn fix_and_propagate(&mut self, f: usize, v: i8) -> bool {
        let mut queue: Vec<(usize, i8)> = vec![(f, v)];
        while let Some((g, val)) = queue.pop() {
            match self.value[g] {
                UNFIXED => self.assign(g, val),
                cur if cur == val => continue,
                _ => return false,
            }
            for k in 0..self.face_edges[g].len() {
                let e = self.face_edges[g][k];
                let (s1, u) = (self.ones[e], self.unfixed[e]);
                if s1 > 2 {
                    return false;
                }
                let forced = match (s1, u) {
                    (_, 0) => {
                        if s1 == 1 {
                            return false;
                        }
                        continue;
                    }
                    (2, _) => 0,
                    (1, 1) => 1,
                    (0, 1) => 0,
                    _ => continue,
                };
                for &h in &self.p.edges[e].faces {
                    if self.value[h] == UNFIXED {
                        queue.push((h, forced));
                    }
                }
            }
        }
        true
    }

    fn lower_bound(&self) -> f64 {
        self.p.lambda_coverage * (self.fixed_cost + self.neg_unfixed)
            + self.p.lambda_complexity * (self.sharp_count as f64) / (self.p.n_edges() as f64)
    }

    fn out_of_budget(&mut self) -> bool {
        if self.timed_out {
            return true;
        }
        if let Some(m) = self.opts.max_nodes {
            if self.nodes >= m {
                self.timed_out = true;
            }
        }
        if self.nodes.is_multiple_of(256) && self.start.elapsed().as_secs_f64() > self.opts.time_limit_s {
            self.timed_out = true;
        }
        self.timed_out
    }

    fn dfs(&mut self, depth: usize) {
        self.nodes += 1;
        if self.out_of_budget() {
            return;
        }
        if self.lower_bound() > self.best_value + PRUNE_SLACK {
            return;
        }
        let mut k = depth;
        while k < self.order.len() && self.value[self.order[k]] != UNFIXED {
            k += 1;
        }
        if k == self.order.len() {
            let x: Vec<bool> = self.value.iter().map(|&v| v == 1).collect();
            let obj = self.p.objective(&x);
            if obj < self.best_value {
                self.best_value = obj;
                self.best = x;
                self.trace.push((self.nodes, obj));
            }
            return;
        }
        let f = self.order[k];
        let first: i8 = if self.p.cov_costs[f] < 0.0 { 1 } else { 0 };
        for v in [first, 1 - first] {
            let mark = self.trail.len();
            if self.fix_and_propagate(f, v) {
                self.dfs(k + 1);
            }
            self.undo_to(mark);
            if self.timed_out {
                return;
            }
        }
    }
}

/// Exact branch and bound over the face variables. `y` and `z` are implied
/// by the face assignment, so only `x` is branched on.
pub fn solve_with_options(problem: &SelectionProblem, opts: &SolveOptions) -> Solution {
    let mut s = Search::new(problem, *opts);
    // root propagation: single-incident edges force their face to 0
    let mut ok = true;
    for e in 0..problem.n_edges() {
        if problem.edges[e].faces.len() == 1 {
            let f = problem.edges[e].faces[0];
            if !s.fix_and_propagate(f, 0) {
                ok = false;
                break;
            }
        }
    }
    if ok {
        s.dfs(0);
    }
    let status = if s.timed_out {
        SolveStatus::Timeout
    } else {
        SolveStatus::Optimal
    };
    let selected = s.best.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect();
    Solution {
        selected,
        objective_value: s.best_value,
        status,
        log: SolveLog {
            nodes: s.nodes,
            bound_trace: s.trace,
            wall_time_s: s.start.elapsed().as_secs_f64(),
            faces: problem.n_faces(),
            edges: problem.n_edges(),
        },
    }
}
