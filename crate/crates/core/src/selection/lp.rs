use std::fmt::Write as _;
use std::path::Path;

use super::SelectionProblem;
use crate::error::Result;
use crate::model::write_atomic;

fn term(out: &mut String, coef: f64, var: &str, first: bool) {
    if coef == 0.0 {
        return;
    }
    let sign = if coef < 0.0 { "-" } else if first { "" } else { "+" };
    let mag = coef.abs();
    if first {
        let _ = write!(out, "{sign}{} {var}", fmt_num(mag));
    } else {
        let _ = write!(out, " {sign} {} {var}", fmt_num(mag));
    }
}

/// Rust's float `Display` is the shortest exact round-trip form.
fn fmt_num(v: f64) -> String {
    format!("{v}")
}

/// The program in CPLEX LP text format with variables `x<i>`, `y<e>`, `z<e>`.
pub fn problem_to_lp(p: &SelectionProblem) -> String {
    let mut out = String::from("\\ candidate face selection\nMinimize\n obj:");
    let mut first = true;
    let mut line = String::new();
    for (i, c) in p.cov_costs.iter().enumerate() {
        let coef = p.lambda_coverage * c;
        if coef != 0.0 {
            term(&mut line, coef, &format!("x{i}"), first);
            first = false;
        }
    }
    let zc = p.lambda_complexity / p.n_edges() as f64;
    for (e, edge) in p.edges.iter().enumerate() {
        if !edge.sharp_pairs.is_empty() && zc != 0.0 {
            term(&mut line, zc, &format!("z{e}"), first);
            first = false;
        }
    }
    if first {
        line.push_str("0 x0");
    }
    out.push(' ');
    out.push_str(&line);
    out.push_str("\nSubject To\n");
    for (e, edge) in p.edges.iter().enumerate() {
        let _ = write!(out, " e{e}:");
        for &f in &edge.faces {
            let _ = write!(out, " + x{f}");
        }
        let _ = writeln!(out, " - 2 y{e} = 0");
        for (k, &(i, j)) in edge.sharp_pairs.iter().enumerate() {
            let _ = writeln!(out, " s{e}_{k}: z{e} - x{i} - x{j} >= -1");
        }
    }
    out.push_str("Binary\n");
    for i in 0..p.n_faces() {
        let _ = writeln!(out, " x{i}");
    }
    for e in 0..p.n_edges() {
        let _ = writeln!(out, " y{e}");
    }
    for (e, edge) in p.edges.iter().enumerate() {
        if !edge.sharp_pairs.is_empty() {
            let _ = writeln!(out, " z{e}");
        }
    }
    out.push_str("End\n");
    out
}

pub fn export_lp(p: &SelectionProblem, path: &Path) -> Result<()> {
    write_atomic(path, problem_to_lp(p).as_bytes())
}
