//! Numerical solution of [`SdpProblem`]s.
//!
//! Free variables (the `β` multipliers) are eliminated exactly before the
//! interior-point method runs, redundant equations are dropped, and the
//! single inequality `Σγ >= 1` gets a nonnegative slack. After the solve the
//! free variables are recovered by back substitution.

mod ipm;
pub mod sdpa;

use std::collections::BTreeMap;
use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::poly::rational_to_f64;
use crate::relax::{upper_index, FloatCandidate, SdpProblem, SymMat, SymbolTable};

pub use ipm::IterationLog;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    /// Residuals within the square root of the tolerances; good enough to
    /// round, not to trust.
    NearFeasible,
    Infeasible,
    Stalled,
}

impl fmt::Display for SdpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SdpStatus::Optimal => "optimal",
            SdpStatus::NearFeasible => "near-feasible",
            SdpStatus::Infeasible => "infeasible",
            SdpStatus::Stalled => "stalled",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    /// Largest violation of an equation or inequality of the original problem.
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub blocks: Vec<SymMat<f64>>,
    pub free: Vec<f64>,
    pub scalars: Vec<f64>,
    pub status: SdpStatus,
    pub residuals: Residuals,
    pub iterations: usize,
    pub trace: Vec<IterationLog>,
}

impl SdpSolution {
    pub fn has_candidate(&self) -> bool {
        matches!(self.status, SdpStatus::Optimal | SdpStatus::NearFeasible)
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.blocks.iter().flat_map(SymMat::upper).collect();
        v.extend(&self.free);
        v.extend(&self.scalars);
        v
    }

    pub fn candidate(&self, table: &SymbolTable) -> FloatCandidate {
        FloatCandidate::from_flat(table, &self.flat()).expect("solution matches its problem")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            feas_tol: 1e-8,
            gap_tol: 1e-8,
            max_iter: 200,
        }
    }
}

type Row = BTreeMap<usize, BigRational>;

/// The problem after eliminating free variables, in block form.
/// Columns are the problem's flat variables followed by one slack per
/// inequality.
#[derive(Debug, Clone)]
pub(crate) struct Reduced {
    pub rows: Vec<(Row, BigRational)>,
    /// `free index -> (pivot row, rhs)` used for back substitution.
    pub recovery: Vec<Option<(Row, BigRational)>>,
    pub free_offset: usize,
    pub num_free: usize,
    pub num_slack: usize,
    /// Basis indices of each block that are not forced to zero.
    pub keep: Vec<Vec<usize>>,
    /// Nonnegative scalars and slacks (in that order) not forced to zero.
    pub keep_lp: Vec<bool>,
    pub inconsistent: bool,
}

/// Where a column lives: a Gram entry, a free multiplier, or a nonnegative
/// scalar/slack (`lp` index).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Col {
    Gram { blk: usize, i: usize, j: usize },
    Free,
    Lp(usize),
}

pub(crate) fn classify(p: &SdpProblem, offsets: &[usize], col: usize) -> Col {
    let free_offset = offsets[p.blocks.len()];
    let nvars = p.num_vars();
    if col < free_offset {
        let blk = offsets.partition_point(|&o| o <= col) - 1;
        let (i, j) = upper_coords(p.blocks[blk].dim, col - offsets[blk]);
        Col::Gram { blk, i, j }
    } else if col < free_offset + p.num_free {
        Col::Free
    } else if col < nvars {
        Col::Lp(col - free_offset - p.num_free)
    } else {
        Col::Lp(p.num_nonneg + col - nvars)
    }
}

pub(crate) fn upper_coords(n: usize, mut k: usize) -> (usize, usize) {
    for i in 0..n {
        let len = n - i;
        if k < len {
            return (i, i + k);
        }
        k -= len;
    }
    panic!("upper index out of range")
}

fn reduce(p: &SdpProblem) -> Reduced {
    reduce_with(p, None)
}

/// Entries assumed zero on top of what the equations force: basis indices
/// per block and nonnegative scalar/slack indices.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Pinned {
    idx: Vec<Vec<bool>>,
    lp: Vec<bool>,
}

fn reduce_with(p: &SdpProblem, pinned: Option<&Pinned>) -> Reduced {
    let offsets = p.block_offsets();
    let free_offset = offsets[p.blocks.len()];
    let nvars = p.num_vars();
    let mut rows: Vec<(Row, BigRational)> = Vec::new();
    for c in &p.eq_constraints {
        rows.push((c.form.coeffs.clone(), c.rhs.clone()));
    }
    for (k, c) in p.ineq_constraints.iter().enumerate() {
        let mut r = c.form.coeffs.clone();
        r.insert(nvars + k, -BigRational::one());
        rows.push((r, c.rhs.clone()));
    }

    let mut is_pivot = vec![false; rows.len()];
    let mut recovery_rows: Vec<Option<usize>> = vec![None; p.num_free];
    for fcol in 0..p.num_free {
        let col = free_offset + fcol;
        let pick = (0..rows.len())
            .filter(|&r| !is_pivot[r] && rows[r].0.contains_key(&col))
            .min_by_key(|&r| (rows[r].0.len(), r));
        let Some(pr) = pick else { continue };
        let inv = BigRational::one() / rows[pr].0[&col].clone();
        scale_row(&mut rows[pr], &inv);
        let pivot = rows[pr].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != pr {
                if let Some(a) = row.0.get(&col).cloned() {
                    axpy_row(row, &-a, &pivot);
                }
            }
        }
        is_pivot[pr] = true;
        recovery_rows[fcol] = Some(pr);
    }
    let recovery = recovery_rows
        .into_iter()
        .map(|r| r.map(|i| rows[i].clone()))
        .collect();
    let mut rest: Vec<(Row, BigRational)> = rows
        .into_iter()
        .zip(is_pivot)
        .filter(|(_, piv)| !piv)
        .map(|(r, _)| r)
        .collect();

    // Forced zeros: a row with zero right-hand side whose live variables are
    // all sign-definite with coefficients of one sign pins them all to zero.
    // A zero Gram diagonal zeroes its whole row and column.
    let num_lp = p.num_nonneg + p.ineq_constraints.len();
    let (mut live_idx, mut live_lp): (Vec<Vec<bool>>, Vec<bool>) = match pinned {
        Some(z) => (
            z.idx
                .iter()
                .map(|b| b.iter().map(|d| !d).collect())
                .collect(),
            z.lp.iter().map(|d| !d).collect(),
        ),
        None => (
            p.blocks.iter().map(|b| vec![true; b.dim]).collect(),
            vec![true; num_lp],
        ),
    };
    let mut inconsistent = false;
    let is_live = |c: Col, live_idx: &Vec<Vec<bool>>, live_lp: &Vec<bool>| match c {
        Col::Gram { blk, i, j } => live_idx[blk][i] && live_idx[blk][j],
        Col::Free => true,
        Col::Lp(k) => live_lp[k],
    };
    loop {
        let mut changed = false;
        for (row, rhs) in &rest {
            let live: Vec<(Col, &BigRational)> = row
                .iter()
                .map(|(c, a)| (classify(p, &offsets, *c), a))
                .filter(|(c, _)| is_live(*c, &live_idx, &live_lp))
                .collect();
            let definite = live.iter().all(|(c, _)| match c {
                Col::Gram { i, j, .. } => i == j,
                Col::Free => false,
                Col::Lp(_) => true,
            });
            if !definite {
                continue;
            }
            let pos = live.iter().all(|(_, a)| a.is_positive());
            let neg = live.iter().all(|(_, a)| a.is_negative());
            if !(pos || neg) {
                continue;
            }
            if (pos && rhs.is_negative())
                || (neg && rhs.is_positive())
                || (live.is_empty() && !rhs.is_zero())
            {
                inconsistent = true;
            }
            if rhs.is_zero() {
                for (c, _) in live {
                    match c {
                        Col::Gram { blk, i, .. } => live_idx[blk][i] = false,
                        Col::Lp(k) => live_lp[k] = false,
                        Col::Free => unreachable!(),
                    }
                    changed = true;
                }
            }
        }
        if !changed || inconsistent {
            break;
        }
    }
    for (row, _) in rest.iter_mut() {
        row.retain(|c, _| is_live(classify(p, &offsets, *c), &live_idx, &live_lp));
    }

    // Keep an independent subset of the remaining rows.
    let mut basis: Vec<(Row, BigRational, usize)> = Vec::new();
    let mut kept = Vec::new();
    for row in &rest {
        let mut work = row.clone();
        for (brow, brhs, pcol) in &basis {
            if let Some(a) = work.0.get(pcol).cloned() {
                axpy_row(&mut work, &-a, &(brow.clone(), brhs.clone()));
            }
        }
        match work.0.iter().next() {
            None => {
                if !work.1.is_zero() {
                    inconsistent = true;
                }
            }
            Some((&pcol, a)) => {
                let inv = BigRational::one() / a.clone();
                scale_row(&mut work, &inv);
                basis.push((work.0, work.1, pcol));
                kept.push(row.clone());
            }
        }
    }

    Reduced {
        rows: kept,
        recovery,
        free_offset,
        num_free: p.num_free,
        num_slack: p.ineq_constraints.len(),
        keep: live_idx
            .iter()
            .map(|l| (0..l.len()).filter(|&i| l[i]).collect())
            .collect(),
        keep_lp: live_lp,
        inconsistent,
    }
}

fn scale_row(row: &mut (Row, BigRational), c: &BigRational) {
    for v in row.0.values_mut() {
        *v = &*v * c;
    }
    row.1 = &row.1 * c;
}

fn axpy_row(row: &mut (Row, BigRational), a: &BigRational, other: &(Row, BigRational)) {
    for (k, v) in &other.0 {
        let e = row.0.entry(*k).or_insert_with(BigRational::zero);
        *e += a * v;
        if e.is_zero() {
            row.0.remove(k);
        }
    }
    row.1 = &row.1 + a * &other.1;
}

/// Diagonal entries below this fraction of the largest one count as zero
/// when looking for a smaller face.
const FACE_TOL: f64 = 1e-6;

fn status_rank(s: SdpStatus) -> u8 {
    match s {
        SdpStatus::Optimal => 3,
        SdpStatus::NearFeasible => 2,
        SdpStatus::Stalled => 1,
        SdpStatus::Infeasible => 0,
    }
}

/// Solves the relaxation with the embedded interior-point method.
///
/// Without a strictly feasible point the iterates approach the boundary
/// slowly, and entries coupled to a vanishing diagonal keep noise of order
/// the square root of the tolerance, enough to spoil rounding. So near-zero
/// diagonals and scalars are pinned to zero and the smaller problem is
/// solved again, as long as that does not make the outcome worse.
pub fn solve(p: &SdpProblem, opts: &SolveOptions) -> SdpSolution {
    let red = reduce(p);
    if red.inconsistent {
        return empty_solution(p, SdpStatus::Infeasible);
    }
    let (mut best, mut flat) = solve_reduced(p, &red, opts);
    let mut pinned = Pinned {
        idx: red
            .keep
            .iter()
            .zip(&p.blocks)
            .map(|(k, b)| (0..b.dim).map(|i| !k.contains(&i)).collect())
            .collect(),
        lp: red.keep_lp.iter().map(|l| !l).collect(),
    };
    for _ in 0..4 {
        if best.status == SdpStatus::Infeasible {
            break;
        }
        let Some(next) = smaller_face(p, &best, &flat, &pinned) else {
            break;
        };
        let red = reduce_with(p, Some(&next));
        if red.inconsistent {
            break;
        }
        let (sol, f) = solve_reduced(p, &red, opts);
        if status_rank(sol.status) < status_rank(best.status) {
            break;
        }
        let iterations = best.iterations + sol.iterations;
        best = sol;
        best.iterations = iterations;
        flat = f;
        pinned = next;
    }
    best
}

/// `pinned` extended by the live diagonals and scalars that are
/// numerically zero in `sol`, or `None` if there are none.
fn smaller_face(
    p: &SdpProblem,
    sol: &SdpSolution,
    flat: &[f64],
    pinned: &Pinned,
) -> Option<Pinned> {
    let nvars = p.num_vars();
    let nonneg_offset = nvars - p.num_nonneg;
    let lp_val = |k: usize| {
        if k < p.num_nonneg {
            flat[nonneg_offset + k]
        } else {
            flat[nvars + k - p.num_nonneg]
        }
    };
    let mut scale = 0.0f64;
    for m in &sol.blocks {
        for i in 0..m.dim() {
            scale = scale.max(m.get(i, i).abs());
        }
    }
    for k in 0..pinned.lp.len() {
        scale = scale.max(lp_val(k).abs());
    }
    if !(scale.is_finite() && scale > 0.0) {
        return None;
    }
    let tol = FACE_TOL * scale;
    let mut next = pinned.clone();
    let mut changed = false;
    for (b, m) in sol.blocks.iter().enumerate() {
        for i in 0..m.dim() {
            if !next.idx[b][i] && *m.get(i, i) <= tol {
                next.idx[b][i] = true;
                changed = true;
            }
        }
    }
    for k in 0..next.lp.len() {
        if !next.lp[k] && lp_val(k) <= tol {
            next.lp[k] = true;
            changed = true;
        }
    }
    changed.then_some(next)
}

/// Runs the interior-point method on a reduced problem and maps the result
/// back. Also returns the flat values including slacks.
fn solve_reduced(p: &SdpProblem, red: &Reduced, opts: &SolveOptions) -> (SdpSolution, Vec<f64>) {
    let std = ipm::StdForm::from_reduced(p, red);
    let out = ipm::solve(&std, opts);

    // Map back to the problem's variable layout; pruned entries stay zero.
    let nvars = p.num_vars();
    let mut flat = vec![0.0; nvars + red.num_slack];
    let offsets = p.block_offsets();
    for (b, blk) in p.blocks.iter().enumerate() {
        let Some(x) = std.psd_index[b].map(|k| &out.blocks[k]) else {
            continue;
        };
        let keep = &red.keep[b];
        for (a, &i) in keep.iter().enumerate() {
            for (c, &j) in keep.iter().enumerate().skip(a) {
                flat[offsets[b] + upper_index(blk.dim, i, j)] = 0.5 * (x[(a, c)] + x[(c, a)]);
            }
        }
    }
    let nonneg_offset = red.free_offset + red.num_free;
    for (k, lp_idx) in std.lp_index.iter().enumerate() {
        let Some(pos) = lp_idx else { continue };
        let idx = if k < p.num_nonneg {
            nonneg_offset + k
        } else {
            nvars + (k - p.num_nonneg)
        };
        flat[idx] = out.lp[*pos];
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
    sol.residuals = Residuals {
        primal: primal_residual(p, &flat[..nvars]),
        dual: out.dual_residual,
        gap: out.gap,
    };
    sol.iterations = out.iterations;
    sol.trace = out.trace;
    sol.status = match out.status {
        SdpStatus::Optimal | SdpStatus::NearFeasible
            if sol.residuals.primal > opts.feas_tol.sqrt() =>
        {
            SdpStatus::Stalled
        }
        SdpStatus::Optimal if sol.residuals.primal > opts.feas_tol * 10.0 => {
            SdpStatus::NearFeasible
        }
        s => s,
    };
    (sol, flat)
}

fn empty_solution(p: &SdpProblem, status: SdpStatus) -> SdpSolution {
    let mut s = solution_from_flat(p, &vec![0.0; p.num_vars()]);
    s.status = status;
    s
}

pub(crate) fn solution_from_flat(p: &SdpProblem, flat: &[f64]) -> SdpSolution {
    let offsets = p.block_offsets();
    let blocks = p
        .blocks
        .iter()
        .enumerate()
        .map(|(b, blk)| SymMat::from_upper(blk.dim, &flat[offsets[b]..offsets[b + 1]]))
        .collect();
    let free_off = offsets[p.blocks.len()];
    SdpSolution {
        blocks,
        free: flat[free_off..free_off + p.num_free].to_vec(),
        scalars: flat[free_off + p.num_free..].to_vec(),
        status: SdpStatus::Stalled,
        residuals: Residuals {
            primal: f64::INFINITY,
            dual: f64::INFINITY,
            gap: f64::INFINITY,
        },
        iterations: 0,
        trace: Vec::new(),
    }
}

/// Largest equation residual or inequality violation, scaled by row size.
pub fn primal_residual(p: &SdpProblem, flat: &[f64]) -> f64 {
    let eval = |coeffs: &BTreeMap<usize, BigRational>| -> (f64, f64) {
        let mut s = 0.0;
        let mut norm = 0.0f64;
        for (k, a) in coeffs {
            let a = rational_to_f64(a);
            s += a * flat[*k];
            norm = norm.max(a.abs());
        }
        (s, norm.max(1.0))
    };
    let mut worst = 0.0f64;
    for c in &p.eq_constraints {
        let (s, n) = eval(&c.form.coeffs);
        worst = worst.max((s - rational_to_f64(&c.rhs)).abs() / n);
    }
    for c in &p.ineq_constraints {
        let (s, n) = eval(&c.form.coeffs);
        worst = worst.max((rational_to_f64(&c.rhs) - s).max(0.0) / n);
    }
    let offsets = p.block_offsets();
    for (b, blk) in p.blocks.iter().enumerate() {
        let m = SymMat::from_upper(blk.dim, &flat[offsets[b]..offsets[b + 1]]);
        let lmin = ipm::min_eigenvalue(&m);
        worst = worst.max(-lmin);
    }
    let nonneg = offsets[p.blocks.len()] + p.num_free;
    for v in &flat[nonneg..nonneg + p.num_nonneg] {
        worst = worst.max(-v);
    }
    worst
}

/// Exact count of rows kept after elimination; exposed for diagnostics.
pub fn reduced_row_count(p: &SdpProblem) -> usize {
    reduce(p).rows.len()
}
