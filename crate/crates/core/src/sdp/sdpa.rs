//! SDPA sparse format export and import of externally computed solutions.
//!
//! The exported problem is the one the embedded solver sees: free
//! multipliers eliminated, redundant rows dropped, the `Σγ >= 1` row with a
//! slack. All nonnegative scalars, slack included, form one diagonal block
//! written with a negative size. In SDPA's dual form the primal matrix `X`
//! is the `Y` variable, the `F_i` are our constraint matrices, `c_i` our
//! right-hand sides and `F_0 = -C`.
//!
//! A solution file lists the `X` entries of the upper triangle, one per
//! line as `block row col value` (1-based). Lines starting with `*` or `"`
//! are comments. Unlisted entries are zero.

use std::fmt::Write as _;

use thiserror::Error;

use super::ipm::StdForm;
use super::{
    primal_residual, reduce, solution_from_flat, Residuals, SdpSolution, SdpStatus, SolveOptions,
};
use crate::poly::rational_to_f64;
use crate::relax::{upper_index, SdpProblem};

#[derive(Debug, Error, PartialEq)]
pub enum SdpaError {
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

pub fn export_sdpa(p: &SdpProblem) -> String {
    let red = reduce(p);
    let std = StdForm::from_reduced(p, &red);
    let num_psd = std.num_psd;
    let num_lp = std.dims.len() - num_psd;
    let mut out = String::new();
    out.push_str("* polynomial interpolant relaxation\n");
    if red.inconsistent {
        out.push_str("* equations are inconsistent; problem is infeasible\n");
    }
    let _ = writeln!(out, "{}", std.rows.len());
    let _ = writeln!(out, "{}", num_psd + usize::from(num_lp > 0));
    let mut sizes: Vec<String> = std.dims[..num_psd].iter().map(|d| d.to_string()).collect();
    if num_lp > 0 {
        sizes.push(format!("-{num_lp}"));
    }
    let _ = writeln!(out, "{}", sizes.join(" "));
    let b: Vec<String> = std.b.iter().map(|v| fmt_f(*v)).collect();
    let _ = writeln!(out, "{}", b.join(" "));

    let place = |blk: usize, p: usize, q: usize| -> (usize, usize, usize) {
        if blk < num_psd {
            (blk + 1, p + 1, q + 1)
        } else {
            let k = blk - num_psd + 1;
            (num_psd + 1, k, k)
        }
    };
    for (blk, c) in std.c.iter().enumerate() {
        for i in 0..c.nrows() {
            for j in i..c.ncols() {
                if c[(i, j)] != 0.0 {
                    let (bb, r, cc) = place(blk, i, j);
                    let _ = writeln!(out, "0 {bb} {r} {cc} {}", fmt_f(-c[(i, j)]));
                }
            }
        }
    }
    for (i, row) in std.rows.iter().enumerate() {
        for e in row {
            let (bb, r, cc) = place(e.blk, e.p, e.q);
            let _ = writeln!(out, "{} {bb} {r} {cc} {}", i + 1, fmt_f(e.val));
        }
    }
    out
}

fn fmt_f(v: f64) -> String {
    format!("{v:e}")
}

/// Exported block layout: PSD blocks as `(problem block, kept basis
/// indices)` and the problem-flat columns of the diagonal block.
struct Layout {
    psd: Vec<(usize, Vec<usize>)>,
    lp_cols: Vec<usize>,
}

fn layout(p: &SdpProblem, red: &super::Reduced) -> Layout {
    let psd = red
        .keep
        .iter()
        .enumerate()
        .filter(|(_, k)| !k.is_empty())
        .map(|(b, k)| (b, k.clone()))
        .collect();
    let nvars = p.num_vars();
    let nonneg_offset = red.free_offset + red.num_free;
    let lp_cols = red
        .keep_lp
        .iter()
        .enumerate()
        .filter(|(_, live)| **live)
        .map(|(k, _)| {
            if k < p.num_nonneg {
                nonneg_offset + k
            } else {
                nvars + k - p.num_nonneg
            }
        })
        .collect();
    Layout { psd, lp_cols }
}

/// Reads a solution for `p` in the block numbering of [`export_sdpa`],
/// recovers the free multipliers and recomputes the residuals against the
/// original constraints.
pub fn import_solution(
    p: &SdpProblem,
    text: &str,
    opts: &SolveOptions,
) -> Result<SdpSolution, SdpaError> {
    let red = reduce(p);
    let lay = layout(p, &red);
    let nvars = p.num_vars();
    let num_psd = lay.psd.len();
    let num_lp = lay.lp_cols.len();
    let offsets = p.block_offsets();
    let mut flat = vec![0.0; nvars + red.num_slack];

    for (ln, line) in text.lines().enumerate() {
        let line_no = ln + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('*') || t.starts_with('"') {
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(SdpaError::Malformed {
                line: line_no,
                msg: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let idx = |k: usize| -> Result<usize, SdpaError> {
            fields[k]
                .parse::<usize>()
                .ok()
                .filter(|v| *v >= 1)
                .ok_or_else(|| SdpaError::Malformed {
                    line: line_no,
                    msg: format!("bad index '{}'", fields[k]),
                })
        };
        let (blk, r, c) = (idx(0)?, idx(1)?, idx(2)?);
        let val: f64 = fields[3]
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| SdpaError::Malformed {
                line: line_no,
                msg: format!("bad value '{}'", fields[3]),
            })?;
        let (r, c) = (r.min(c) - 1, r.max(c) - 1);
        if blk <= num_psd {
            let (b, keep) = &lay.psd[blk - 1];
            if c >= keep.len() {
                return Err(SdpaError::Dimension(format!(
                    "entry ({}, {}) outside block {blk} of size {}",
                    r + 1,
                    c + 1,
                    keep.len()
                )));
            }
            flat[offsets[*b] + upper_index(p.blocks[*b].dim, keep[r], keep[c])] = val;
        } else if blk == num_psd + 1 && num_lp > 0 {
            if r != c || r >= num_lp {
                return Err(SdpaError::Dimension(format!(
                    "entry ({}, {}) outside diagonal block of size {num_lp}",
                    r + 1,
                    c + 1
                )));
            }
            flat[lay.lp_cols[r]] = val;
        } else {
            return Err(SdpaError::Dimension(format!("block {blk} does not exist")));
        }
    }

    for (fcol, rec) in red.recovery.iter().enumerate() {
        let col = red.free_offset + fcol;
        if let Some((row, rhs)) = rec {
            let mut val = rational_to_f64(rhs);
            for (k, a) in row {
                if *k != col {
                    val -= rational_to_f64(a) * flat[*k];
                }
            }
            flat[col] = val;
        }
    }

    let mut sol = solution_from_flat(p, &flat[..nvars]);
    let primal = primal_residual(p, &flat[..nvars]);
    sol.residuals = Residuals {
        primal,
        dual: f64::NAN,
        gap: f64::NAN,
    };
    sol.status = if red.inconsistent {
        SdpStatus::Infeasible
    } else if primal <= opts.feas_tol {
        SdpStatus::Optimal
    } else if primal <= opts.feas_tol * 1e3 {
        SdpStatus::NearFeasible
    } else {
        SdpStatus::Stalled
    };
    Ok(sol)
}

/// Writes a solution in the format [`import_solution`] reads. Slack values
/// are not part of [`SdpSolution`] and are omitted.
pub fn write_solution(p: &SdpProblem, sol: &SdpSolution) -> String {
    let red = reduce(p);
    let lay = layout(p, &red);
    let flat = sol.flat();
    let offsets = p.block_offsets();
    let mut out = String::from("* block row col value\n");
    for (k, (b, keep)) in lay.psd.iter().enumerate() {
        for (a, &i) in keep.iter().enumerate() {
            for (c, &j) in keep.iter().enumerate().skip(a) {
                let v = flat[offsets[*b] + upper_index(p.blocks[*b].dim, i, j)];
                if v != 0.0 {
                    let _ = writeln!(out, "{} {} {} {}", k + 1, a + 1, c + 1, fmt_f(v));
                }
            }
        }
    }
    for (k, col) in lay.lp_cols.iter().enumerate() {
        if let Some(v) = flat.get(*col).filter(|v| **v != 0.0) {
            let _ = writeln!(
                out,
                "{} {} {} {}",
                lay.psd.len() + 1,
                k + 1,
                k + 1,
                fmt_f(*v)
            );
        }
    }
    out
}
