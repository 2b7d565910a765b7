//! Plain-text certificate files for third-party audit.
//!
//! A certificate lists, for every disjunct pair `(i, j)` of a problem, the
//! relaxation parameters and the exact values of the certificate: full
//! rational Gram matrices, free multiplier coefficients and the strict-cone
//! scalars. The layout of each pair is not stored. [`audit`] rebuilds it
//! from the problem file, so a certificate can only pass against the
//! problem it was made for.
//!
//! ```text
//! certificate 1 1
//! pair 0 0
//! mode strict-left
//! degree 2
//! depth 3
//! block 0 2
//! 1 -1/2
//! -1/2 1
//! free 3 0
//! scalars 1
//! end
//! ```
//!
//! `#` starts a comment; the writer uses comments for the assembled
//! interpolant and block labels, which the reader ignores.

use std::fmt::Write as _;

use num_rational::BigRational;
use thiserror::Error;

use crate::driver::{prepare, Certified};
use crate::par::{self, Exec};
use crate::relax::{assemble, build, ExactCandidate, Interpolant, Mode, SymMat};
use crate::sas::Problem;
use crate::validate::{validate, ValidateError, ValidationReport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("pair ({i}, {j}): {msg}")]
    Shape { i: usize, j: usize, msg: String },
}

/// Values for one disjunct pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairCertificate {
    pub i: usize,
    pub j: usize,
    pub mode: Mode,
    pub degree: u32,
    /// Informational; validation does not depend on it.
    pub depth: u32,
    pub candidate: ExactCandidate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    /// Number of disjuncts of `T` and of `T'`.
    pub shape: (usize, usize),
    pub pairs: Vec<PairCertificate>,
}

impl Certificate {
    /// `certs[i][j]` certifies disjunct `i` of `T` against `j` of `T'`.
    pub fn from_certified(certs: &[Vec<&Certified>]) -> Self {
        let rows = certs.len();
        let cols = certs.first().map_or(0, Vec::len);
        let mut pairs = Vec::with_capacity(rows * cols);
        for (i, row) in certs.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                pairs.push(PairCertificate {
                    i,
                    j,
                    mode: c.mode,
                    degree: c.degree,
                    depth: c.depth,
                    candidate: c.candidate.clone(),
                });
            }
        }
        Certificate {
            shape: (rows, cols),
            pairs,
        }
    }

    pub fn to_text(&self) -> String {
        self.render(None)
    }

    /// Like [`Certificate::to_text`], with the interpolant of each pair and
    /// block labels as comments.
    pub fn to_text_annotated(&self, certs: &[Vec<&Certified>]) -> String {
        self.render(Some(certs))
    }

    fn render(&self, notes: Option<&[Vec<&Certified>]>) -> String {
        let mut out = String::new();
        let (r, c) = self.shape;
        writeln!(out, "certificate {r} {c}").unwrap();
        for p in &self.pairs {
            let note = notes.and_then(|n| n.get(p.i)).and_then(|row| row.get(p.j));
            writeln!(out, "pair {} {}", p.i, p.j).unwrap();
            if let Some(n) = note {
                writeln!(out, "# interpolant: {}", n.interpolant).unwrap();
            }
            writeln!(out, "mode {}", p.mode).unwrap();
            writeln!(out, "degree {}", p.degree).unwrap();
            writeln!(out, "depth {}", p.depth).unwrap();
            for (k, m) in p.candidate.blocks.iter().enumerate() {
                write!(out, "block {k} {}", m.dim()).unwrap();
                if let Some(n) = note {
                    write!(out, "  # {}", n.table.blocks[k].label).unwrap();
                }
                out.push('\n');
                for i in 0..m.dim() {
                    let row: Vec<String> = (0..m.dim()).map(|j| m.get(i, j).to_string()).collect();
                    writeln!(out, "{}", row.join(" ")).unwrap();
                }
            }
            writeln!(out, "free{}", join_values(&p.candidate.free)).unwrap();
            writeln!(out, "scalars{}", join_values(&p.candidate.scalars)).unwrap();
            out.push_str("end\n");
        }
        out
    }
}

fn join_values(v: &[BigRational]) -> String {
    v.iter().map(|x| format!(" {x}")).collect()
}

struct Lines<'a> {
    inner: Vec<(usize, Vec<&'a str>)>,
    pos: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        let inner = text
            .lines()
            .enumerate()
            .filter_map(|(k, l)| {
                let l = l.split('#').next().unwrap_or("");
                let toks: Vec<&str> = l.split_whitespace().collect();
                (!toks.is_empty()).then_some((k + 1, toks))
            })
            .collect();
        Lines { inner, pos: 0 }
    }

    fn next(&mut self) -> Option<(usize, Vec<&'a str>)> {
        let r = self.inner.get(self.pos).cloned();
        self.pos += 1;
        r
    }

    fn last_line(&self) -> usize {
        self.inner.last().map_or(1, |l| l.0)
    }

    /// Next line, which must start with `key`; returns the remaining tokens.
    fn expect(&mut self, key: &str) -> Result<(usize, Vec<&'a str>), CertError> {
        match self.next() {
            Some((line, toks)) if toks[0] == key => Ok((line, toks[1..].to_vec())),
            Some((line, toks)) => Err(syntax(
                line,
                format!("expected `{key}`, found `{}`", toks[0]),
            )),
            None => Err(syntax(
                self.last_line(),
                format!("expected `{key}`, found end of file"),
            )),
        }
    }
}

fn syntax(line: usize, msg: impl Into<String>) -> CertError {
    CertError::Syntax {
        line,
        msg: msg.into(),
    }
}

fn one<T: std::str::FromStr>(line: usize, toks: &[&str], what: &str) -> Result<T, CertError> {
    match toks {
        [t] => t
            .parse()
            .map_err(|_| syntax(line, format!("bad {what} `{t}`"))),
        _ => Err(syntax(line, format!("expected one {what}"))),
    }
}

fn rationals(line: usize, toks: &[&str]) -> Result<Vec<BigRational>, CertError> {
    toks.iter()
        .map(|t| {
            t.parse::<BigRational>()
                .map_err(|_| syntax(line, format!("bad rational `{t}`")))
        })
        .collect()
}

pub fn parse(text: &str) -> Result<Certificate, CertError> {
    let mut lines = Lines::new(text);
    let (line, head) = lines.expect("certificate")?;
    let shape = match head.as_slice() {
        [r, c] => (
            r.parse().map_err(|_| syntax(line, "bad disjunct count"))?,
            c.parse().map_err(|_| syntax(line, "bad disjunct count"))?,
        ),
        _ => return Err(syntax(line, "expected `certificate <rows> <cols>`")),
    };
    let mut pairs = Vec::new();
    while let Some((line, toks)) = lines.next() {
        if toks[0] != "pair" {
            return Err(syntax(
                line,
                format!("expected `pair`, found `{}`", toks[0]),
            ));
        }
        let (i, j) = match toks[1..] {
            [a, b] => (
                a.parse().map_err(|_| syntax(line, "bad pair index"))?,
                b.parse().map_err(|_| syntax(line, "bad pair index"))?,
            ),
            _ => return Err(syntax(line, "expected `pair <i> <j>`")),
        };
        let (l, t) = lines.expect("mode")?;
        let mode_text: String = one(l, &t, "mode")?;
        let mode: Mode = mode_text.parse().map_err(|e: String| syntax(l, e))?;
        let (l, t) = lines.expect("degree")?;
        let degree = one(l, &t, "degree")?;
        let (l, t) = lines.expect("depth")?;
        let depth = one(l, &t, "depth")?;

        let mut blocks = Vec::new();
        let (free, scalars) = loop {
            let Some((l, t)) = lines.next() else {
                return Err(syntax(lines.last_line(), "unterminated pair"));
            };
            match t[0] {
                "block" => {
                    let n: usize = match t[1..] {
                        [_, n] => n.parse().map_err(|_| syntax(l, "bad block dimension"))?,
                        _ => return Err(syntax(l, "expected `block <index> <dim>`")),
                    };
                    let mut rows = Vec::with_capacity(n);
                    for _ in 0..n {
                        let Some((rl, rt)) = lines.next() else {
                            return Err(syntax(lines.last_line(), "truncated block"));
                        };
                        let row = rationals(rl, &rt)?;
                        if row.len() != n {
                            return Err(syntax(
                                rl,
                                format!("row has {} entries, expected {n}", row.len()),
                            ));
                        }
                        rows.push(row);
                    }
                    let m = SymMat::from_rows(rows);
                    if !m.is_symmetric() {
                        return Err(syntax(
                            l,
                            format!("block {} is not symmetric", blocks.len()),
                        ));
                    }
                    blocks.push(m);
                }
                "free" => {
                    let free = rationals(l, &t[1..])?;
                    let (sl, st) = lines.expect("scalars")?;
                    let scalars = rationals(sl, &st)?;
                    lines.expect("end")?;
                    break (free, scalars);
                }
                other => return Err(syntax(l, format!("unexpected `{other}`"))),
            }
        };
        pairs.push(PairCertificate {
            i,
            j,
            mode,
            degree,
            depth,
            candidate: ExactCandidate {
                blocks,
                free,
                scalars,
            },
        });
    }
    Ok(Certificate { shape, pairs })
}

/// Exact re-validation of a certificate against its problem.
#[derive(Debug, Clone)]
pub struct Audit {
    /// One report per pair, in certificate order.
    pub reports: Vec<ValidationReport>,
    /// The assembled `⋁_i ⋀_j S_ij`, when every pair passes.
    pub interpolant: Option<Interpolant>,
}

impl Audit {
    pub fn passed(&self) -> bool {
        self.interpolant.is_some()
    }
}

/// Rebuilds every pair's relaxation from `problem`, checks that the
/// certificate fits it and validates the values exactly. Structural
/// mismatches (missing pairs, wrong dimensions) are errors.
pub fn audit(cert: &Certificate, problem: &Problem, exec: Exec) -> Result<Audit, CertError> {
    let rows = problem.t.disjuncts.len();
    let cols = problem.t_prime.disjuncts.len();
    let shape_err = |i, j, msg: String| CertError::Shape { i, j, msg };
    if cert.shape != (rows, cols) {
        return Err(shape_err(
            0,
            0,
            format!(
                "certificate is for {}x{} disjuncts, problem has {rows}x{cols}",
                cert.shape.0, cert.shape.1
            ),
        ));
    }
    let mut seen = vec![vec![false; cols]; rows];
    for p in &cert.pairs {
        if p.i >= rows || p.j >= cols {
            return Err(shape_err(p.i, p.j, "pair index out of range".into()));
        }
        if std::mem::replace(&mut seen[p.i][p.j], true) {
            return Err(shape_err(p.i, p.j, "pair listed twice".into()));
        }
    }
    if let Some((i, j)) = (0..rows)
        .flat_map(|i| (0..cols).map(move |j| (i, j)))
        .find(|&(i, j)| !seen[i][j])
    {
        return Err(shape_err(i, j, "pair missing".into()));
    }

    let checked = par::map(exec, &cert.pairs, |p| -> Result<_, CertError> {
        let t = prepare(&problem.t.disjuncts[p.i], p.mode);
        let tp = prepare(&problem.t_prime.disjuncts[p.j], p.mode);
        let (_, table) =
            build(&t, &tp, p.degree, p.mode).map_err(|e| shape_err(p.i, p.j, e.to_string()))?;
        p.candidate
            .check_shape(&table)
            .map_err(|e| shape_err(p.i, p.j, e.to_string()))?;
        let report = validate(&p.candidate, &table).map_err(|e| match e {
            ValidateError::Shape(e) => shape_err(p.i, p.j, e.to_string()),
            e @ ValidateError::TooLarge(_) => shape_err(p.i, p.j, e.to_string()),
        })?;
        let atom = assemble(&p.candidate, &table)
            .map_err(|e| shape_err(p.i, p.j, e.to_string()))?
            .interpolant;
        Ok((report, atom))
    });
    let mut reports = Vec::with_capacity(checked.len());
    let mut atoms = vec![vec![None; cols]; rows];
    for (p, r) in cert.pairs.iter().zip(checked) {
        let (report, interp) = r?;
        atoms[p.i][p.j] = report.verdict.then(|| interp.disjuncts[0].clone());
        reports.push(report);
    }
    let interpolant = atoms
        .into_iter()
        .map(|row| {
            row.into_iter()
                .collect::<Option<Vec<_>>>()
                .map(|v| v.concat())
        })
        .collect::<Option<Vec<_>>>()
        .map(|disjuncts| Interpolant { disjuncts });
    Ok(Audit {
        reports,
        interpolant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::{run_formula, RunConfig};
    use crate::poly::int;
    use crate::sas::parse_problem;

    fn row4() -> Problem {
        parse_problem("T: y > x /\\ x > -y\nT': y <= -x^2").unwrap()
    }

    fn certified(problem: &Problem) -> Certificate {
        let cfg = RunConfig {
            max_degree: 2,
            precision: 1,
            exec: Exec::Sequential,
            ..RunConfig::default()
        };
        let out = run_formula(&problem.t, &problem.t_prime, &cfg);
        let certs: Vec<Vec<&Certified>> = out
            .pairs
            .iter()
            .map(|r| r.iter().map(|p| p.result.as_ref().unwrap()).collect())
            .collect();
        Certificate::from_certified(&certs)
    }

    #[test]
    fn round_trip_and_audit() {
        let p = row4();
        let cert = certified(&p);
        let back = parse(&cert.to_text()).unwrap();
        assert_eq!(back, cert);
        let a = audit(&back, &p, Exec::Sequential).unwrap();
        assert!(a.passed());
    }

    #[test]
    fn zeroed_scalars_fail() {
        let p = row4();
        let mut cert = certified(&p);
        for s in &mut cert.pairs[0].candidate.scalars {
            *s = int(0);
        }
        let a = audit(&cert, &p, Exec::Sequential).unwrap();
        assert!(!a.passed());
        assert!(!a.reports[0].strict_cone);
    }

    #[test]
    fn wrong_dimensions_are_errors() {
        let p = row4();
        let mut cert = certified(&p);
        cert.pairs[0].candidate.free.push(int(1));
        assert!(matches!(
            audit(&cert, &p, Exec::Sequential),
            Err(CertError::Shape { .. })
        ));
        let mut cert = certified(&p);
        cert.pairs.clear();
        assert!(audit(&cert, &p, Exec::Sequential).is_err());
    }

    #[test]
    fn syntax_errors_carry_lines() {
        let e = parse("certificate 1 1\npair 0 0\nmode sideways\n").unwrap_err();
        assert!(matches!(e, CertError::Syntax { line: 3, .. }));
        let e =
            parse("certificate 1 1\npair 0 0\nmode dai\ndegree 0\ndepth 1\nblock 0 2\n1 2\n3 4\n")
                .unwrap_err();
        assert!(matches!(e, CertError::Syntax { line: 6, .. }));
        assert!(parse("").is_err());
    }
}
