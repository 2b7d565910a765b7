//! Infeasible-start primal-dual interior-point method with Nesterov-Todd
//! scaling and Mehrotra predictor-corrector steps.
//!
//! Problem form: minimize `<C, X>` subject to `<A_i, X> = b_i`, `X ⪰ 0`,
//! where `X` is block diagonal. Nonnegative scalars are 1x1 blocks.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{classify, Col, Reduced, SdpStatus, SolveOptions};
use crate::poly::rational_to_f64;
use crate::relax::{SdpProblem, SymMat};

/// One entry of a constraint matrix: `A[p][q] = A[q][p] = val`, `p <= q`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Entry {
    pub blk: usize,
    pub p: usize,
    pub q: usize,
    pub val: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct StdForm {
    pub dims: Vec<usize>,
    pub num_psd: usize,
    pub rows: Vec<Vec<Entry>>,
    pub b: DVector<f64>,
    pub c: Vec<DMatrix<f64>>,
    /// Position of each problem block among the PSD blocks, if not pruned.
    pub psd_index: Vec<Option<usize>>,
    /// Position of each nonnegative scalar or slack among the LP entries.
    pub lp_index: Vec<Option<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationLog {
    pub iter: usize,
    pub primal_obj: f64,
    pub dual_obj: f64,
    /// `<X, S>`, the complementarity gap.
    pub gap: f64,
    pub primal_infeas: f64,
    pub dual_infeas: f64,
    pub step_primal: f64,
    pub step_dual: f64,
}

pub(crate) struct IpmOutput {
    pub blocks: Vec<DMatrix<f64>>,
    pub lp: Vec<f64>,
    pub status: SdpStatus,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
    pub trace: Vec<IterationLog>,
}

impl StdForm {
    pub fn from_reduced(p: &SdpProblem, red: &Reduced) -> Self {
        let offsets = p.block_offsets();
        let mut dims = Vec::new();
        let mut psd_index = Vec::with_capacity(p.blocks.len());
        let mut local: Vec<Vec<Option<usize>>> = Vec::with_capacity(p.blocks.len());
        for (b, blk) in p.blocks.iter().enumerate() {
            let keep = &red.keep[b];
            let mut map = vec![None; blk.dim];
            for (k, &i) in keep.iter().enumerate() {
                map[i] = Some(k);
            }
            local.push(map);
            if keep.is_empty() {
                psd_index.push(None);
            } else {
                psd_index.push(Some(dims.len()));
                dims.push(keep.len());
            }
        }
        let num_psd = dims.len();
        let mut lp_index = Vec::with_capacity(red.keep_lp.len());
        let mut num_lp = 0;
        for &live in &red.keep_lp {
            lp_index.push(live.then(|| {
                num_lp += 1;
                num_lp - 1
            }));
        }
        dims.extend(std::iter::repeat_n(1, num_lp));

        // (block, row, col, off-diagonal) of a live column.
        let locate = |col: usize| -> Option<(usize, usize, usize, bool)> {
            match classify(p, &offsets, col) {
                Col::Gram { blk, i, j } => {
                    let (a, c) = (local[blk][i]?, local[blk][j]?);
                    Some((psd_index[blk]?, a, c, i != j))
                }
                Col::Free => unreachable!("free column {col} survived elimination"),
                Col::Lp(k) => Some((num_psd + lp_index[k]?, 0, 0, false)),
            }
        };

        let mut rows = Vec::with_capacity(red.rows.len());
        let mut b = Vec::with_capacity(red.rows.len());
        for (row, rhs) in &red.rows {
            let scale = row
                .values()
                .map(|a| rational_to_f64(a).abs())
                .fold(0.0, f64::max);
            let scale = if scale > 0.0 { scale } else { 1.0 };
            let entries = row
                .iter()
                .filter_map(|(col, a)| {
                    let (blk, i, j, off) = locate(*col)?;
                    let v = rational_to_f64(a) / scale;
                    Some(Entry {
                        blk,
                        p: i,
                        q: j,
                        val: if off { 0.5 * v } else { v },
                    })
                })
                .collect();
            rows.push(entries);
            b.push(rational_to_f64(rhs) / scale);
        }

        let mut c: Vec<DMatrix<f64>> = dims.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        for (col, v) in &p.objective {
            if classify(p, &offsets, *col) == Col::Free {
                continue;
            }
            let Some((blk, i, j, off)) = locate(*col) else {
                continue;
            };
            let v = if off { 0.5 * v } else { *v };
            c[blk][(i, j)] += v;
            if off {
                c[blk][(j, i)] += v;
            }
        }

        StdForm {
            dims,
            num_psd,
            rows,
            b: DVector::from_vec(b),
            c,
            psd_index,
            lp_index,
        }
    }

    /// Builds a problem directly from dense data.
    #[cfg(test)]
    pub fn dense(
        dims: Vec<usize>,
        a: Vec<Vec<DMatrix<f64>>>,
        b: Vec<f64>,
        c: Vec<DMatrix<f64>>,
    ) -> Self {
        let rows = a
            .iter()
            .map(|mats| {
                let mut out = Vec::new();
                for (blk, m) in mats.iter().enumerate() {
                    for p in 0..m.nrows() {
                        for q in p..m.ncols() {
                            if m[(p, q)] != 0.0 {
                                out.push(Entry {
                                    blk,
                                    p,
                                    q,
                                    val: m[(p, q)],
                                });
                            }
                        }
                    }
                }
                out
            })
            .collect();
        let num_psd = dims.len();
        let psd_index = (0..num_psd).map(Some).collect();
        StdForm {
            dims,
            num_psd,
            rows,
            b: DVector::from_vec(b),
            c,
            psd_index,
            lp_index: Vec::new(),
        }
    }

    fn m(&self) -> usize {
        self.rows.len()
    }

    fn apply(&self, x: &[DMatrix<f64>]) -> DVector<f64> {
        DVector::from_iterator(
            self.m(),
            self.rows.iter().map(|r| {
                r.iter()
                    .map(|e| {
                        let f = if e.p == e.q { 1.0 } else { 2.0 };
                        f * e.val * x[e.blk][(e.p, e.q)]
                    })
                    .sum::<f64>()
            }),
        )
    }

    fn adjoint(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = self.dims.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        for (i, r) in self.rows.iter().enumerate() {
            for e in r {
                out[e.blk][(e.p, e.q)] += y[i] * e.val;
                if e.p != e.q {
                    out[e.blk][(e.q, e.p)] += y[i] * e.val;
                }
            }
        }
        out
    }

    /// Constraint indices touching each block, with the dense matrices.
    fn per_block(&self) -> Vec<Vec<(usize, DMatrix<f64>)>> {
        let mut out: Vec<Vec<(usize, DMatrix<f64>)>> = vec![Vec::new(); self.dims.len()];
        for (i, r) in self.rows.iter().enumerate() {
            for e in r {
                let list = &mut out[e.blk];
                if list.last().map(|(k, _)| *k) != Some(i) {
                    let n = self.dims[e.blk];
                    list.push((i, DMatrix::zeros(n, n)));
                }
                let m = &mut list.last_mut().expect("just pushed").1;
                m[(e.p, e.q)] += e.val;
                if e.p != e.q {
                    m[(e.q, e.p)] += e.val;
                }
            }
        }
        out
    }
}

fn inner(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn fro(a: &[DMatrix<f64>]) -> f64 {
    a.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt()
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub(crate) fn min_eigenvalue(m: &SymMat<f64>) -> f64 {
    let n = m.dim();
    if n == 0 {
        return 0.0;
    }
    let d = DMatrix::from_fn(n, n, |i, j| *m.get(i, j));
    SymmetricEigen::new(d).eigenvalues.min()
}

/// Largest step keeping `X + αΔX ⪰ 0`, given the Cholesky factor of `X`.
fn max_step(l: &DMatrix<f64>, dx: &DMatrix<f64>) -> f64 {
    let n = l.nrows();
    let linv = l
        .clone()
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .expect("nonsingular factor");
    let e = &linv * dx * linv.transpose();
    let lmin = SymmetricEigen::new(e).eigenvalues.min();
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

struct Scaling {
    g: DMatrix<f64>,
    ginv: DMatrix<f64>,
    w: DMatrix<f64>,
    d: DVector<f64>,
    lx: DMatrix<f64>,
    ls: DMatrix<f64>,
}

fn nt_scaling(x: &DMatrix<f64>, s: &DMatrix<f64>) -> Option<Scaling> {
    let lx = x.clone().cholesky()?.l();
    let ls = s.clone().cholesky()?.l();
    let mut t = lx.transpose() * s * &lx;
    symmetrize(&mut t);
    let eig = SymmetricEigen::new(t);
    if eig.eigenvalues.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
        return None;
    }
    let d = eig.eigenvalues.map(f64::sqrt);
    let n = x.nrows();
    let mut g = &lx * &eig.eigenvectors;
    for j in 0..n {
        let f = 1.0 / d[j].sqrt();
        for i in 0..n {
            g[(i, j)] *= f;
        }
    }
    let ginv = g.clone().try_inverse()?;
    let mut w = &g * g.transpose();
    symmetrize(&mut w);
    Some(Scaling {
        g,
        ginv,
        w,
        d,
        lx,
        ls,
    })
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    ds: Vec<DMatrix<f64>>,
    dy: DVector<f64>,
}

pub(crate) fn solve(form: &StdForm, opts: &SolveOptions) -> IpmOutput {
    let nb = form.dims.len();
    let m = form.m();
    let per_block = form.per_block();
    let big_n: usize = form.dims.iter().sum();
    let bnorm = form.b.norm();
    let cnorm = fro(&form.c);

    // Starting point scaled to the data.
    let mut x = Vec::with_capacity(nb);
    let mut s = Vec::with_capacity(nb);
    for (blk, &n) in form.dims.iter().enumerate() {
        let mut xi = 10f64.max((n as f64).sqrt());
        let mut eta = 10f64.max((n as f64).sqrt()).max(form.c[blk].norm());
        for (i, a) in &per_block[blk] {
            let an = a.norm();
            xi = xi.max((n as f64) * (1.0 + form.b[*i].abs()) / (1.0 + an));
            eta = eta.max(an);
        }
        x.push(DMatrix::identity(n, n) * xi);
        s.push(DMatrix::identity(n, n) * eta);
    }
    let mut y = DVector::zeros(m);

    let mut trace = Vec::new();
    let mut status = SdpStatus::Stalled;
    let mut last_dinf = f64::INFINITY;
    let mut last_gap = f64::INFINITY;
    let mut iterations = 0;
    let mut step = (0.0, 0.0);

    for iter in 0..=opts.max_iter {
        iterations = iter;
        let rp = &form.b - form.apply(&x);
        let aty = form.adjoint(&y);
        let rd: Vec<DMatrix<f64>> = (0..nb).map(|k| &form.c[k] - &s[k] - &aty[k]).collect();
        let gap = inner(&x, &s);
        let mu = gap / big_n as f64;
        let pobj = inner(&form.c, &x);
        let dobj = form.b.dot(&y);
        let pinf = rp.norm() / (1.0 + bnorm);
        let dinf = fro(&rd) / (1.0 + cnorm);
        let relgap = gap / (1.0 + pobj.abs() + dobj.abs());
        last_dinf = dinf;
        last_gap = gap;
        trace.push(IterationLog {
            iter,
            primal_obj: pobj,
            dual_obj: dobj,
            gap,
            primal_infeas: pinf,
            dual_infeas: dinf,
            step_primal: step.0,
            step_dual: step.1,
        });
        if !gap.is_finite() || !pinf.is_finite() {
            break;
        }
        if pinf <= opts.feas_tol && dinf <= opts.feas_tol && relgap <= opts.gap_tol {
            status = SdpStatus::Optimal;
            break;
        }
        if dobj > 0.0 && farkas_certificate(form, &y, dobj) {
            status = SdpStatus::Infeasible;
            break;
        }
        if iter == opts.max_iter {
            break;
        }

        let Some(scal) = (0..nb)
            .map(|k| nt_scaling(&x[k], &s[k]))
            .collect::<Option<Vec<_>>>()
        else {
            break;
        };

        // Schur complement.
        let mut schur = DMatrix::<f64>::zeros(m, m);
        for (blk, list) in per_block.iter().enumerate() {
            let w = &scal[blk].w;
            for (j, aj) in list {
                let t = w * aj * w;
                for (i, ai) in list {
                    schur[(*i, *j)] += ai.dot(&t);
                }
            }
        }
        symmetrize(&mut schur);
        let diag_max = (0..m).map(|i| schur[(i, i)]).fold(0.0, f64::max).max(1.0);
        let chol = {
            let mut reg = 0.0;
            loop {
                let mut mm = schur.clone();
                for i in 0..m {
                    mm[(i, i)] += reg;
                }
                if let Some(c) = mm.cholesky() {
                    break Some(c);
                }
                reg = if reg == 0.0 {
                    1e-14 * diag_max
                } else {
                    reg * 100.0
                };
                if reg > 1e-4 * diag_max {
                    break None;
                }
            }
        };
        let Some(chol) = chol else { break };

        let wrdw: Vec<DMatrix<f64>> = (0..nb).map(|k| &scal[k].w * &rd[k] * &scal[k].w).collect();
        let a_wrdw = form.apply(&wrdw);
        let direction = |rt: &[DMatrix<f64>]| -> Direction {
            let kmat: Vec<DMatrix<f64>> = (0..nb)
                .map(|k| &scal[k].g * &rt[k] * scal[k].g.transpose())
                .collect();
            let rhs = &rp - form.apply(&kmat) + &a_wrdw;
            let dy = chol.solve(&rhs);
            let atdy = form.adjoint(&dy);
            let mut ds = Vec::with_capacity(nb);
            let mut dx = Vec::with_capacity(nb);
            for k in 0..nb {
                let mut dsk = &rd[k] - &atdy[k];
                symmetrize(&mut dsk);
                let mut dxk = &kmat[k] - &scal[k].w * &dsk * &scal[k].w;
                symmetrize(&mut dxk);
                ds.push(dsk);
                dx.push(dxk);
            }
            Direction { dx, ds, dy }
        };
        let steps = |dir: &Direction| -> (f64, f64) {
            let mut ap = f64::INFINITY;
            let mut ad = f64::INFINITY;
            for k in 0..nb {
                ap = ap.min(max_step(&scal[k].lx, &dir.dx[k]));
                ad = ad.min(max_step(&scal[k].ls, &dir.ds[k]));
            }
            (ap, ad)
        };

        // Predictor.
        let rt_aff: Vec<DMatrix<f64>> = scal
            .iter()
            .map(|sc| DMatrix::from_diagonal(&(-&sc.d)))
            .collect();
        let aff = direction(&rt_aff);
        let (ap, ad) = steps(&aff);
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let mut gap_aff = 0.0;
        for k in 0..nb {
            gap_aff += (&x[k] + &aff.dx[k] * ap).dot(&(&s[k] + &aff.ds[k] * ad));
        }
        let sigma = (gap_aff / gap).clamp(0.0, 1.0).powi(3);

        // Corrector.
        let rt: Vec<DMatrix<f64>> = (0..nb)
            .map(|k| {
                let sc = &scal[k];
                let n = form.dims[k];
                let dxt = &sc.ginv * &aff.dx[k] * sc.ginv.transpose();
                let dst = sc.g.transpose() * &aff.ds[k] * &sc.g;
                let cross = &dxt * &dst + &dst * &dxt;
                DMatrix::from_fn(n, n, |i, j| {
                    let mut h = -0.5 * cross[(i, j)];
                    if i == j {
                        h += sigma * mu - sc.d[i] * sc.d[i];
                    }
                    2.0 * h / (sc.d[i] + sc.d[j])
                })
            })
            .collect();
        let dir = direction(&rt);
        let (ap, ad) = steps(&dir);
        let (ap, ad) = ((0.95 * ap).min(1.0), (0.95 * ad).min(1.0));
        if ap.max(ad) < 1e-12 {
            break;
        }
        for k in 0..nb {
            x[k] += &dir.dx[k] * ap;
            s[k] += &dir.ds[k] * ad;
            symmetrize(&mut x[k]);
            symmetrize(&mut s[k]);
        }
        y += &dir.dy * ad;
        step = (ap, ad);
    }

    if status == SdpStatus::Stalled {
        if let Some(last) = trace.last() {
            let relgap = last.gap / (1.0 + last.primal_obj.abs() + last.dual_obj.abs());
            // Loose enough for rounding; validation is exact anyway.
            if last.primal_infeas <= opts.feas_tol.sqrt() && relgap <= opts.gap_tol.sqrt() {
                status = SdpStatus::NearFeasible;
            }
        }
    }

    let lp = x[form.num_psd..].iter().map(|m| m[(0, 0)]).collect();
    x.truncate(form.num_psd);
    IpmOutput {
        blocks: x,
        lp,
        status,
        dual_residual: last_dinf,
        gap: last_gap,
        iterations,
        trace,
    }
}

/// `y` normalized to `b·y = 1` with `-Aᵀy ⪰ -ε`: any feasible `X` would
/// need trace at least `1/ε`.
fn farkas_certificate(form: &StdForm, y: &DVector<f64>, dobj: f64) -> bool {
    const EPS: f64 = 1e-9;
    let yhat = y / dobj;
    let z = form.adjoint(&yhat);
    z.into_iter().all(|m| {
        if m.nrows() == 0 {
            return true;
        }
        let lmax = SymmetricEigen::new(m).eigenvalues.max();
        lmax <= EPS
    })
}
