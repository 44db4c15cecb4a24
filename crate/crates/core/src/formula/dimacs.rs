//! DIMACS CNF reading and writing. Variables are 1-based on disk.

use std::fmt::Write as _;

use super::{Clause, Formula, Literal};
use crate::error::{Error, Result};

/// Parameters recorded by the generator in a `c ksat-count ...` comment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenerationMeta {
    pub k: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl GenerationMeta {
    pub fn comment(&self) -> String {
        format!(
            "ksat-count k={} alpha={} seed={}",
            self.k, self.alpha, self.seed
        )
    }

    fn parse(body: &str) -> Option<Self> {
        let rest = body.trim().strip_prefix("ksat-count")?;
        let (mut k, mut alpha, mut seed) = (None, None, None);
        for tok in rest.split_whitespace() {
            let (key, val) = tok.split_once('=')?;
            match key {
                "k" => k = val.parse().ok(),
                "alpha" => alpha = val.parse().ok(),
                "seed" => seed = val.parse().ok(),
                _ => {}
            }
        }
        Some(GenerationMeta {
            k: k?,
            alpha: alpha?,
            seed: seed?,
        })
    }
}

pub fn parse_dimacs(text: &str) -> Result<Formula> {
    parse_dimacs_with_meta(text).map(|(f, _)| f)
}

/// Parses a uniform-width CNF. The clause width is taken from the clauses;
/// an empty formula takes it from the generation comment, or 0 without one.
pub fn parse_dimacs_with_meta(text: &str) -> Result<(Formula, Option<GenerationMeta>)> {
    let mut meta = None;
    let mut header: Option<(usize, usize)> = None;
    let mut clauses: Vec<Vec<Literal>> = Vec::new();
    let mut current: Vec<Literal> = Vec::new();

    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(body) = line.strip_prefix('c') {
            if meta.is_none() {
                meta = GenerationMeta::parse(body);
            }
            continue;
        }
        if line.starts_with('%') {
            // SATLIB end marker
            break;
        }
        if let Some(rest) = line.strip_prefix('p') {
            if header.is_some() {
                return Err(parse_err(lineno, "duplicate header"));
            }
            let toks: Vec<&str> = rest.split_whitespace().collect();
            if toks.len() != 3 || toks[0] != "cnf" {
                return Err(parse_err(lineno, "expected `p cnf <vars> <clauses>`"));
            }
            let n = toks[1]
                .parse()
                .map_err(|_| parse_err(lineno, "bad variable count"))?;
            let m = toks[2]
                .parse()
                .map_err(|_| parse_err(lineno, "bad clause count"))?;
            header = Some((n, m));
            continue;
        }
        let Some((n, _)) = header else {
            return Err(parse_err(lineno, "clause before header"));
        };
        for tok in line.split_whitespace() {
            let lit: i64 = tok
                .parse()
                .map_err(|_| parse_err(lineno, &format!("bad literal `{tok}`")))?;
            if lit == 0 {
                clauses.push(std::mem::take(&mut current));
                continue;
            }
            let var = lit.unsigned_abs() as usize;
            if var > n {
                return Err(parse_err(
                    lineno,
                    &format!("variable {var} exceeds declared count {n}"),
                ));
            }
            current.push(Literal::new(var - 1, lit < 0));
        }
    }

    let Some((n, m)) = header else {
        return Err(parse_err(0, "missing `p cnf` header"));
    };
    if !current.is_empty() {
        return Err(parse_err(0, "last clause is not terminated by 0"));
    }
    if clauses.len() != m {
        return Err(parse_err(
            0,
            &format!("header declares {m} clauses, found {}", clauses.len()),
        ));
    }
    let k = match clauses.first() {
        Some(c) => c.len(),
        None => meta.map_or(0, |m| m.k),
    };
    if let Some(c) = clauses.iter().find(|c| c.len() != k) {
        return Err(Error::UnsupportedFormula(format!(
            "mixed clause widths ({k} and {})",
            c.len()
        )));
    }
    let clauses = clauses
        .into_iter()
        .map(Clause::new)
        .collect::<Result<Vec<_>>>()?;
    Ok((Formula::new(n, k, clauses)?, meta))
}

fn parse_err(line: usize, msg: &str) -> Error {
    Error::Parse {
        line,
        msg: msg.to_string(),
    }
}

/// Canonical form: header, then one clause per line.
pub fn write_dimacs(f: &Formula) -> String {
    write_dimacs_with_comments(f, &[])
}

pub fn write_dimacs_with_comments(f: &Formula, comments: &[String]) -> String {
    let mut out = String::new();
    for c in comments {
        writeln!(out, "c {c}").unwrap();
    }
    writeln!(out, "p cnf {} {}", f.num_vars(), f.num_clauses()).unwrap();
    for c in f.clauses() {
        for l in c.literals() {
            let v = l.var as i64 + 1;
            write!(out, "{} ", if l.negated { -v } else { v }).unwrap();
        }
        out.push_str("0\n");
    }
    out
}
