//! Plain-text problem dump for debugging against external solvers.
//!
//! ```text
//! blocks <n_1> <n_2> ...
//! free <n_free>
//! objective
//! e <block> <i> <j> <re> <im>      # Re(conj(re + j·im) · X[i, j]), 0-based, i ≤ j
//! f <index> <coef>
//! constraint <rhs>
//! e ...
//! ```
//!
//! Lines starting with `#` are ignored. Each `objective` / `constraint` line
//! opens a new linear form that collects the following `e`/`f` lines.

use std::fmt::Write as _;

use super::problem::{ConicProblem, LinearForm};
use crate::error::{DoaError, Result};
use crate::linalg::C64;

fn write_form(out: &mut String, form: &LinearForm) {
    for e in &form.entries {
        let _ = writeln!(out, "e {} {} {} {:e} {:e}", e.block, e.i, e.j, e.coef.re, e.coef.im);
    }
    for &(k, c) in &form.free {
        let _ = writeln!(out, "f {k} {c:e}");
    }
}

pub fn dump_problem(p: &ConicProblem) -> String {
    let mut out = String::new();
    let sizes: Vec<String> = p.blocks.iter().map(|n| n.to_string()).collect();
    let _ = writeln!(out, "blocks {}", sizes.join(" "));
    let _ = writeln!(out, "free {}", p.n_free);
    out.push_str("objective\n");
    write_form(&mut out, &p.objective);
    for c in &p.constraints {
        let _ = writeln!(out, "constraint {:e}", c.rhs);
        write_form(&mut out, &c.form);
    }
    out
}

fn parse<T: std::str::FromStr>(tok: Option<&str>, line: usize) -> Result<T> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| DoaError::Parse(format!("line {line}: bad or missing field")))
}

pub fn load_problem(text: &str) -> Result<ConicProblem> {
    let mut p = ConicProblem::default();
    // None: before any form; Some(None): objective; Some(Some(k)): constraint k
    let mut target: Option<Option<usize>> = None;
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        let mut toks = s.split_whitespace();
        match toks.next() {
            Some("blocks") => {
                p.blocks = toks.map(|t| parse(Some(t), line)).collect::<Result<_>>()?;
            }
            Some("free") => p.n_free = parse(toks.next(), line)?,
            Some("objective") => target = Some(None),
            Some("constraint") => {
                let rhs: f64 = parse(toks.next(), line)?;
                p.add_constraint(LinearForm::new(), rhs);
                target = Some(Some(p.constraints.len() - 1));
            }
            Some(kind @ ("e" | "f")) => {
                let form = match target {
                    Some(None) => &mut p.objective,
                    Some(Some(k)) => &mut p.constraints[k].form,
                    None => return Err(DoaError::Parse(format!("line {line}: term outside a form"))),
                };
                if kind == "e" {
                    let block = parse(toks.next(), line)?;
                    let i = parse(toks.next(), line)?;
                    let j = parse(toks.next(), line)?;
                    let re = parse(toks.next(), line)?;
                    let im = parse(toks.next(), line)?;
                    form.add(block, i, j, C64::new(re, im));
                } else {
                    let k = parse(toks.next(), line)?;
                    let c = parse(toks.next(), line)?;
                    form.add_free(k, c);
                }
            }
            Some(other) => return Err(DoaError::Parse(format!("line {line}: unknown record '{other}'"))),
            None => {}
        }
    }
    p.validate()?;
    Ok(p)
}
