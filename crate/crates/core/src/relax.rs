//! Relaxation of certificate search to a semidefinite program.
//!
//! A certificate for `T` and `T'` is a polynomial identity
//!
//! ```text
//!   Σ α_ij · f^i g^j  +  Σ α'_i'j' · f'^i' g'^j'  +  Σ γ_k · g^k  +  Σ β_j h_j  +  Σ β'_j' h'_j'  =  0
//! ```
//!
//! with SOS multipliers `α`, nonnegative scalars `γ` (at least one positive)
//! and free polynomial multipliers `β`. Each SOS multiplier is a Gram matrix
//! over a monomial basis; the identity becomes one linear equation per
//! monomial. Further equations force the interpolant part of the identity to
//! mention only variables shared by both systems.
//!
//! [`Mode::StrictLeft`] draws the strict-cone generators `g^k` from `T` and
//! yields `f + g + h > 0`. [`Mode::StrictRight`] draws them from `T'` and
//! yields `f + h >= 0`. [`Mode::Dai`] is the older disequality-based scheme
//! `1 + f + f' + g^2 + h + h' = 0` for a fixed monoid element `g`, yielding
//! `1/2 + f + g^2 + h > 0`; it is homogenized with a unit scalar `τ` standing
//! in for the constant so that every mode is invariant under positive scaling.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::poly::{monomials_up_to, rat, Coeff, Monomial, Polynomial, RatPoly, Var};
use crate::sas::{Sas, SasKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    StrictLeft,
    StrictRight,
    Dai,
}

impl Mode {
    pub fn required_kind(self) -> SasKind {
        match self {
            Mode::Dai => SasKind::WithDiseq,
            Mode::StrictLeft | Mode::StrictRight => SasKind::WithStrict,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::StrictLeft => "strict-left",
            Mode::StrictRight => "strict-right",
            Mode::Dai => "dai",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "strict-left" => Ok(Mode::StrictLeft),
            "strict-right" => Ok(Mode::StrictRight),
            "dai" => Ok(Mode::Dai),
            _ => Err(format!(
                "unknown mode `{s}` (expected strict-left, strict-right or dai)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RelaxError {
    #[error("mode {mode} needs {expected:?} systems; the {side} system is {found:?}")]
    ModeMismatch {
        mode: Mode,
        side: Side,
        expected: SasKind,
        found: SasKind,
    },
    #[error("candidate shape does not match the relaxation: {0}")]
    DimensionMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Left,
    Right,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "T",
            Side::Right => "T'",
        })
    }
}

/// A product of generator powers, `∏ f_a^{ge[a]} · ∏ g_b^{strict[b]}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductTerm {
    pub side: Side,
    pub ge: Vec<u32>,
    pub strict: Vec<u32>,
    pub product: RatPoly,
}

impl ProductTerm {
    pub fn new(side: Side, sys: &Sas, ge: Vec<u32>, strict: Vec<u32>) -> Self {
        let product = generator_product(sys, &ge, &strict);
        ProductTerm {
            side,
            ge,
            strict,
            product,
        }
    }

    pub fn selector_string(&self) -> String {
        let join = |v: &[u32]| v.iter().map(u32::to_string).collect::<Vec<_>>().join("");
        format!("{}[{}|{}]", self.side, join(&self.ge), join(&self.strict))
    }
}

pub fn generator_product(sys: &Sas, ge: &[u32], strict: &[u32]) -> RatPoly {
    let mut p = RatPoly::one();
    for (f, &e) in sys.ge.iter().zip(ge) {
        if e > 0 {
            p = &p * &f.pow(e);
        }
    }
    for (g, &e) in sys.strict_or_diseq.iter().zip(strict) {
        if e > 0 {
            p = &p * &g.pow(e);
        }
    }
    p
}

/// An SOS multiplier: Gram matrix over `basis`, multiplied by `term`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PsdBlock {
    pub label: String,
    pub basis: Vec<Monomial>,
    pub term: ProductTerm,
}

impl PsdBlock {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScalarRole {
    /// Strict-cone coefficient `γ_k` of `∏ g^k`.
    Gamma(ProductTerm),
    /// Homogenizing unit of the disequality scheme; multiplies `1 + g^2`.
    Unit(RatPoly),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScalarVar {
    pub label: String,
    pub role: ScalarRole,
}

impl ScalarVar {
    pub fn product(&self) -> &RatPoly {
        match &self.role {
            ScalarRole::Gamma(t) => &t.product,
            ScalarRole::Unit(p) => p,
        }
    }
}

/// One coefficient of a free multiplier `β_j` (or `β'_j`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FreeCoeff {
    pub label: String,
    pub side: Side,
    pub eq_index: usize,
    pub monomial: Monomial,
}

/// Maps certificate roles to variable indices. The flat variable vector is
/// laid out as: upper-triangular Gram entries of each block (row-major),
/// then free coefficients, then nonnegative scalars.
#[derive(Debug, Clone)]
pub struct SymbolTable {
    pub mode: Mode,
    pub degree_bound: u32,
    pub left: Sas,
    pub right: Sas,
    pub common_vars: BTreeSet<Var>,
    pub blocks: Vec<PsdBlock>,
    pub free: Vec<FreeCoeff>,
    pub scalars: Vec<ScalarVar>,
    /// Fixed monoid element of the disequality scheme.
    pub dai_g: Option<RatPoly>,
    block_offsets: Vec<usize>,
}

impl SymbolTable {
    pub fn block_offset(&self, b: usize) -> usize {
        self.block_offsets[b]
    }

    pub fn free_offset(&self) -> usize {
        self.block_offsets.last().copied().unwrap_or(0)
    }

    pub fn scalar_offset(&self) -> usize {
        self.free_offset() + self.free.len()
    }

    pub fn num_vars(&self) -> usize {
        self.scalar_offset() + self.scalars.len()
    }

    /// Flat index of Gram entry `(i, j)` of block `b` (either triangle).
    pub fn gram_index(&self, b: usize, i: usize, j: usize) -> usize {
        let n = self.blocks[b].dim();
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.block_offsets[b] + upper_index(n, i, j)
    }

    pub fn describe_var(&self, idx: usize) -> String {
        if idx >= self.scalar_offset() {
            return self.scalars[idx - self.scalar_offset()].label.clone();
        }
        if idx >= self.free_offset() {
            return self.free[idx - self.free_offset()].label.clone();
        }
        let b = self.block_offsets.partition_point(|&o| o <= idx) - 1;
        format!("{}[{}]", self.blocks[b].label, idx - self.block_offsets[b])
    }
}

pub(crate) fn upper_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < n);
    i * n - i * (i + 1) / 2 + j
}

pub(crate) fn upper_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Sparse linear form over the flat variable vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearForm {
    pub label: String,
    pub coeffs: BTreeMap<usize, BigRational>,
}

/// `form = rhs` or `form >= rhs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearConstraint {
    pub form: LinearForm,
    pub rhs: BigRational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSpec {
    pub label: String,
    pub dim: usize,
}

/// Variables: PSD blocks (upper triangles), free reals, nonnegative reals.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpProblem {
    pub blocks: Vec<BlockSpec>,
    pub num_free: usize,
    pub num_nonneg: usize,
    pub eq_constraints: Vec<LinearConstraint>,
    pub ineq_constraints: Vec<LinearConstraint>,
    /// Minimized.
    pub objective: BTreeMap<usize, f64>,
}

impl SdpProblem {
    pub fn num_vars(&self) -> usize {
        self.blocks.iter().map(|b| upper_len(b.dim)).sum::<usize>()
            + self.num_free
            + self.num_nonneg
    }

    pub fn block_offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.blocks.len() + 1);
        let mut acc = 0;
        out.push(0);
        for b in &self.blocks {
            acc += upper_len(b.dim);
            out.push(acc);
        }
        out
    }
}

/// `σ(b)`: exponent vectors of length `t` with sum at most `b + 1`.
pub fn sigma(t: usize, b: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; t];
    fn rec(idx: usize, rem: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if idx == cur.len() {
            out.push(cur.clone());
            return;
        }
        for e in 0..=rem {
            cur[idx] = e;
            rec(idx + 1, rem - e, cur, out);
        }
        cur[idx] = 0;
    }
    rec(0, b + 1, &mut cur, &mut out);
    out
}

/// Bit vectors of length `n`, i.e. the index set `2^n`.
pub fn bit_vectors(n: usize) -> Vec<Vec<u32>> {
    (0..1usize << n)
        .map(|mask| (0..n).map(|a| ((mask >> a) & 1) as u32).collect())
        .collect()
}

fn check_kind(mode: Mode, side: Side, s: &Sas) -> Result<Sas, RelaxError> {
    let expected = mode.required_kind();
    s.with_kind(expected).ok_or(RelaxError::ModeMismatch {
        mode,
        side,
        expected,
        found: s.kind,
    })
}

/// Fixed monoid element of the disequality scheme:
/// `(∏ g ∏ g')^⌊b / (2 deg)⌋`, or `1` when the product is constant.
pub fn dai_monoid_element(t: &Sas, tp: &Sas, b: u32) -> RatPoly {
    let mut h = RatPoly::one();
    for g in t.strict_or_diseq.iter().chain(&tp.strict_or_diseq) {
        h = &h * g;
    }
    match h.degree() {
        Some(d) if d > 0 => h.pow(b / (2 * d)),
        _ => RatPoly::one(),
    }
}

/// Builds the relaxation for degree bound `b`.
pub fn build(
    t: &Sas,
    tp: &Sas,
    b: u32,
    mode: Mode,
) -> Result<(SdpProblem, SymbolTable), RelaxError> {
    let t = check_kind(mode, Side::Left, t)?;
    let tp = check_kind(mode, Side::Right, tp)?;
    let common: BTreeSet<Var> = t.vars.intersection(&tp.vars).cloned().collect();
    let half = b / 2;

    let mut blocks = Vec::new();
    for (side, sys) in [(Side::Left, &t), (Side::Right, &tp)] {
        let basis = monomials_up_to(&sys.vars, half);
        // The disequality scheme only multiplies SOS terms with the f's.
        let strict_sel = if mode == Mode::Dai {
            vec![vec![0; sys.strict_or_diseq.len()]]
        } else {
            bit_vectors(sys.strict_or_diseq.len())
        };
        for ge in bit_vectors(sys.ge.len()) {
            for st in &strict_sel {
                let term = ProductTerm::new(side, sys, ge.clone(), st.clone());
                let label = format!("alpha{}", term.selector_string());
                blocks.push(PsdBlock {
                    label,
                    basis: basis.clone(),
                    term,
                });
            }
        }
    }

    let mut free = Vec::new();
    for (side, sys) in [(Side::Left, &t), (Side::Right, &tp)] {
        let basis = monomials_up_to(&sys.vars, b);
        for j in 0..sys.eq.len() {
            for m in &basis {
                free.push(FreeCoeff {
                    label: format!("beta{}{}[{}]", side, j, m),
                    side,
                    eq_index: j,
                    monomial: m.clone(),
                });
            }
        }
    }

    let mut dai_g = None;
    let mut scalars = Vec::new();
    match mode {
        Mode::StrictLeft | Mode::StrictRight => {
            let (side, sys) = if mode == Mode::StrictLeft {
                (Side::Left, &t)
            } else {
                (Side::Right, &tp)
            };
            for k in sigma(sys.strict_or_diseq.len(), b) {
                let term = ProductTerm::new(side, sys, vec![0; sys.ge.len()], k);
                let label = format!("gamma{}", term.selector_string());
                scalars.push(ScalarVar {
                    label,
                    role: ScalarRole::Gamma(term),
                });
            }
        }
        Mode::Dai => {
            let g = dai_monoid_element(&t, &tp, b);
            let unit = &RatPoly::one() + &(&g * &g);
            scalars.push(ScalarVar {
                label: "tau".into(),
                role: ScalarRole::Unit(unit),
            });
            dai_g = Some(g);
        }
    }

    let mut block_offsets = vec![0];
    for blk in &blocks {
        let last = *block_offsets.last().unwrap();
        block_offsets.push(last + upper_len(blk.dim()));
    }

    let table = SymbolTable {
        mode,
        degree_bound: b,
        left: t,
        right: tp,
        common_vars: common,
        blocks,
        free,
        scalars,
        dai_g,
        block_offsets,
    };
    let problem = linearize(&table);
    Ok((problem, table))
}

/// Whether variable contributions belong to the interpolant part of the identity.
fn in_interpolant(table: &SymbolTable, side: Side, is_strict_cone: bool) -> bool {
    match table.mode {
        Mode::StrictLeft => side == Side::Left,
        Mode::StrictRight => side == Side::Left && !is_strict_cone,
        Mode::Dai => side == Side::Left,
    }
}

type Rows = BTreeMap<Monomial, BTreeMap<usize, BigRational>>;

fn add_contrib(rows: &mut Rows, poly: &RatPoly, var: usize, scale: &BigRational) {
    for (m, c) in poly.terms() {
        let row = rows.entry(m.clone()).or_default();
        let e = row.entry(var).or_insert_with(BigRational::zero);
        *e += c * scale;
        if e.is_zero() {
            row.remove(&var);
        }
    }
}

fn linearize(table: &SymbolTable) -> SdpProblem {
    let mut identity: Rows = BTreeMap::new();
    let mut interp: Rows = BTreeMap::new();
    let one = BigRational::one();
    let two = rat(2, 1);

    for (bi, blk) in table.blocks.iter().enumerate() {
        let n = blk.dim();
        let into_interp = in_interpolant(table, blk.term.side, false);
        for i in 0..n {
            for j in i..n {
                let poly = blk
                    .term
                    .product
                    .mul_monomial(&blk.basis[i].mul(&blk.basis[j]));
                let w = if i == j { &one } else { &two };
                let var = table.gram_index(bi, i, j);
                add_contrib(&mut identity, &poly, var, w);
                if into_interp {
                    add_contrib(&mut interp, &poly, var, w);
                }
            }
        }
    }
    for (fi, fc) in table.free.iter().enumerate() {
        let sys = if fc.side == Side::Left {
            &table.left
        } else {
            &table.right
        };
        let poly = sys.eq[fc.eq_index].mul_monomial(&fc.monomial);
        let var = table.free_offset() + fi;
        add_contrib(&mut identity, &poly, var, &one);
        if in_interpolant(table, fc.side, false) {
            add_contrib(&mut interp, &poly, var, &one);
        }
    }
    for (si, sv) in table.scalars.iter().enumerate() {
        let var = table.scalar_offset() + si;
        add_contrib(&mut identity, sv.product(), var, &one);
        match &sv.role {
            ScalarRole::Gamma(term) => {
                if in_interpolant(table, term.side, true) {
                    add_contrib(&mut interp, &term.product, var, &one);
                }
            }
            ScalarRole::Unit(_) => {
                // Interpolant carries τ/2 + τ g^2.
                let g = table
                    .dai_g
                    .as_ref()
                    .expect("unit scalar implies disequality scheme");
                let part = &RatPoly::constant(rat(1, 2)) + &(g * g);
                add_contrib(&mut interp, &part, var, &one);
            }
        }
    }

    let mut eq_constraints = Vec::new();
    for (m, coeffs) in identity {
        if coeffs.is_empty() {
            continue;
        }
        eq_constraints.push(LinearConstraint {
            form: LinearForm {
                label: format!("identity[{m}]"),
                coeffs,
            },
            rhs: BigRational::zero(),
        });
    }
    for (m, coeffs) in interp {
        if coeffs.is_empty() || m.vars().all(|v| table.common_vars.contains(v)) {
            continue;
        }
        eq_constraints.push(LinearConstraint {
            form: LinearForm {
                label: format!("common[{m}]"),
                coeffs,
            },
            rhs: BigRational::zero(),
        });
    }

    let scalar_sum: BTreeMap<usize, BigRational> = (0..table.scalars.len())
        .map(|s| (table.scalar_offset() + s, BigRational::one()))
        .collect();
    let ineq_constraints = vec![LinearConstraint {
        form: LinearForm {
            label: "scalar_sum".into(),
            coeffs: scalar_sum,
        },
        rhs: BigRational::one(),
    }];

    let mut objective = BTreeMap::new();
    for (bi, blk) in table.blocks.iter().enumerate() {
        for i in 0..blk.dim() {
            objective.insert(table.gram_index(bi, i, i), 1.0);
        }
    }

    SdpProblem {
        blocks: table
            .blocks
            .iter()
            .map(|b| BlockSpec {
                label: b.label.clone(),
                dim: b.dim(),
            })
            .collect(),
        num_free: table.free.len(),
        num_nonneg: table.scalars.len(),
        eq_constraints,
        ineq_constraints,
        objective,
    }
}

/// Dense symmetric matrix stored in full.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMat<F> {
    n: usize,
    data: Vec<F>,
}

impl<F: Coeff> SymMat<F> {
    pub fn zeros(n: usize) -> Self {
        SymMat {
            n,
            data: vec![F::zero(); n * n],
        }
    }

    /// Mirrors the upper triangle given in row-major order.
    pub fn from_upper(n: usize, upper: &[F]) -> Self {
        assert_eq!(upper.len(), upper_len(n));
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = upper[upper_index(n, i, j)].clone();
                m.data[i * n + j] = v.clone();
                m.data[j * n + i] = v;
            }
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<F>>) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, r) in rows.into_iter().enumerate() {
            assert_eq!(r.len(), n, "matrix must be square");
            for (j, v) in r.into_iter().enumerate() {
                m.data[i * n + j] = v;
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &F {
        &self.data[i * self.n + j]
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (i + 1..self.n).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn upper(&self) -> Vec<F> {
        let mut out = Vec::with_capacity(upper_len(self.n));
        for i in 0..self.n {
            for j in i..self.n {
                out.push(self.get(i, j).clone());
            }
        }
        out
    }

    pub fn scale(&self, c: &F) -> Self {
        SymMat {
            n: self.n,
            data: self.data.iter().map(|v| v.clone() * c.clone()).collect(),
        }
    }
}

/// Valued certificate: Gram matrices, free coefficients and scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate<F> {
    pub blocks: Vec<SymMat<F>>,
    pub free: Vec<F>,
    pub scalars: Vec<F>,
}

pub type ExactCandidate = Candidate<BigRational>;
pub type FloatCandidate = Candidate<f64>;

impl<F: Coeff> Candidate<F> {
    pub fn zeros(table: &SymbolTable) -> Self {
        Candidate {
            blocks: table
                .blocks
                .iter()
                .map(|b| SymMat::zeros(b.dim()))
                .collect(),
            free: vec![F::zero(); table.free.len()],
            scalars: vec![F::zero(); table.scalars.len()],
        }
    }

    /// Rebuilds a candidate from the flat variable vector.
    pub fn from_flat(table: &SymbolTable, v: &[F]) -> Result<Self, RelaxError> {
        if v.len() != table.num_vars() {
            return Err(RelaxError::DimensionMismatch(format!(
                "expected {} variables, got {}",
                table.num_vars(),
                v.len()
            )));
        }
        let blocks = table
            .blocks
            .iter()
            .enumerate()
            .map(|(b, blk)| {
                let off = table.block_offset(b);
                SymMat::from_upper(blk.dim(), &v[off..off + upper_len(blk.dim())])
            })
            .collect();
        Ok(Candidate {
            blocks,
            free: v[table.free_offset()..table.scalar_offset()].to_vec(),
            scalars: v[table.scalar_offset()..].to_vec(),
        })
    }

    pub fn flatten(&self) -> Vec<F> {
        let mut out: Vec<F> = self.blocks.iter().flat_map(SymMat::upper).collect();
        out.extend(self.free.iter().cloned());
        out.extend(self.scalars.iter().cloned());
        out
    }

    pub fn scale(&self, c: &F) -> Self {
        Candidate {
            blocks: self.blocks.iter().map(|b| b.scale(c)).collect(),
            free: self.free.iter().map(|v| v.clone() * c.clone()).collect(),
            scalars: self.scalars.iter().map(|v| v.clone() * c.clone()).collect(),
        }
    }

    pub fn check_shape(&self, table: &SymbolTable) -> Result<(), RelaxError> {
        let bad = |what: String| Err(RelaxError::DimensionMismatch(what));
        if self.blocks.len() != table.blocks.len() {
            return bad(format!(
                "{} blocks, expected {}",
                self.blocks.len(),
                table.blocks.len()
            ));
        }
        for (k, (m, blk)) in self.blocks.iter().zip(&table.blocks).enumerate() {
            if m.dim() != blk.dim() {
                return bad(format!(
                    "block {k} has dimension {}, expected {}",
                    m.dim(),
                    blk.dim()
                ));
            }
        }
        if self.free.len() != table.free.len() {
            return bad(format!(
                "{} free coefficients, expected {}",
                self.free.len(),
                table.free.len()
            ));
        }
        if self.scalars.len() != table.scalars.len() {
            return bad(format!(
                "{} scalars, expected {}",
                self.scalars.len(),
                table.scalars.len()
            ));
        }
        Ok(())
    }
}

/// One atom `poly > 0` or `poly >= 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterpolantAtom {
    pub poly: RatPoly,
    pub strict: bool,
}

impl InterpolantAtom {
    pub fn holds_at(
        &self,
        point: &BTreeMap<Var, BigRational>,
    ) -> Result<bool, crate::poly::PolyError> {
        let v = self.poly.eval(point)?;
        Ok(if self.strict {
            v > BigRational::zero()
        } else {
            v >= BigRational::zero()
        })
    }
}

impl fmt::Display for InterpolantAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} 0",
            self.poly,
            if self.strict { ">" } else { ">=" }
        )
    }
}

/// Disjunction of conjunctions of atoms. A plain interpolant is 1×1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interpolant {
    pub disjuncts: Vec<Vec<InterpolantAtom>>,
}

impl Interpolant {
    pub fn atom(poly: RatPoly, strict: bool) -> Self {
        Interpolant {
            disjuncts: vec![vec![InterpolantAtom { poly, strict }]],
        }
    }

    pub fn as_atom(&self) -> Option<&InterpolantAtom> {
        match self.disjuncts.as_slice() {
            [conj] if conj.len() == 1 => Some(&conj[0]),
            _ => None,
        }
    }

    pub fn holds_at(
        &self,
        point: &BTreeMap<Var, BigRational>,
    ) -> Result<bool, crate::poly::PolyError> {
        for conj in &self.disjuncts {
            let mut all = true;
            for a in conj {
                if !a.holds_at(point)? {
                    all = false;
                    break;
                }
            }
            if all {
                return Ok(true);
            }
        }
        Ok(false)
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        self.disjuncts
            .iter()
            .flatten()
            .flat_map(|a| a.poly.vars())
            .collect()
    }
}

impl fmt::Display for Interpolant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(a) = self.as_atom() {
            return write!(f, "{a}");
        }
        let conj: Vec<String> = self
            .disjuncts
            .iter()
            .map(|c| {
                let atoms: Vec<String> = c.iter().map(|a| format!("({a})")).collect();
                format!("({})", atoms.join(" /\\ "))
            })
            .collect();
        f.write_str(&conj.join(" \\/ "))
    }
}

/// The polynomials of a valued certificate, expanded from scratch.
#[derive(Debug, Clone)]
pub struct Assembled<F: Coeff> {
    /// `Σ α · products` on the left system.
    pub f: Polynomial<F>,
    pub f_prime: Polynomial<F>,
    /// Strict-cone part `Σ γ_k g^k` (or `τ (1 + g^2)` for the disequality scheme).
    pub g: Polynomial<F>,
    pub h: Polynomial<F>,
    pub h_prime: Polynomial<F>,
    pub interpolant: Interpolant,
}

impl<F: Coeff> Assembled<F> {
    /// Left side of the certificate identity; zero for a valid certificate.
    pub fn identity(&self) -> Polynomial<F> {
        &(&(&(&self.f + &self.f_prime) + &self.g) + &self.h) + &self.h_prime
    }
}

fn gram_poly<F: Coeff>(
    blk: &PsdBlock,
    q: &SymMat<F>,
    lift: &impl Fn(&BigRational) -> F,
) -> Polynomial<F> {
    let mut sos = Polynomial::<F>::zero();
    let n = blk.dim();
    for i in 0..n {
        for j in 0..n {
            sos.add_term(blk.basis[i].mul(&blk.basis[j]), q.get(i, j).clone());
        }
    }
    let product = blk.term.product.map_coeffs(lift);
    &sos * &product
}

/// Expands a valued certificate into `f, f', g, h, h'` and the interpolant.
pub fn assemble(
    c: &ExactCandidate,
    table: &SymbolTable,
) -> Result<Assembled<BigRational>, RelaxError> {
    assemble_generic(c, table, |q| q.clone(), |p| p.clone())
}

/// Floating point assembly, used to inspect raw solver output.
pub fn assemble_float(
    c: &FloatCandidate,
    table: &SymbolTable,
) -> Result<Assembled<f64>, RelaxError> {
    assemble_generic(c, table, crate::poly::rational_to_f64, |p| {
        p.to_rational().expect("finite solver output")
    })
}

fn assemble_generic<F: Coeff>(
    c: &Candidate<F>,
    table: &SymbolTable,
    lift: impl Fn(&BigRational) -> F,
    exact: impl Fn(&Polynomial<F>) -> RatPoly,
) -> Result<Assembled<F>, RelaxError> {
    c.check_shape(table)?;
    let mut f = Polynomial::<F>::zero();
    let mut f_prime = Polynomial::<F>::zero();
    for (blk, q) in table.blocks.iter().zip(&c.blocks) {
        let p = gram_poly(blk, q, &lift);
        match blk.term.side {
            Side::Left => f = &f + &p,
            Side::Right => f_prime = &f_prime + &p,
        }
    }
    let mut h = Polynomial::<F>::zero();
    let mut h_prime = Polynomial::<F>::zero();
    for (fc, v) in table.free.iter().zip(&c.free) {
        let sys = if fc.side == Side::Left {
            &table.left
        } else {
            &table.right
        };
        let p = sys.eq[fc.eq_index]
            .mul_monomial(&fc.monomial)
            .map_coeffs(&lift)
            .scale(v);
        match fc.side {
            Side::Left => h = &h + &p,
            Side::Right => h_prime = &h_prime + &p,
        }
    }
    let mut g = Polynomial::<F>::zero();
    let mut interp_extra = Polynomial::<F>::zero();
    for (sv, v) in table.scalars.iter().zip(&c.scalars) {
        g = &g + &sv.product().map_coeffs(&lift).scale(v);
        if let ScalarRole::Unit(_) = sv.role {
            let dg = table
                .dai_g
                .as_ref()
                .expect("unit scalar implies disequality scheme");
            let part = &RatPoly::constant(rat(1, 2)) + &(dg * dg);
            interp_extra = &interp_extra + &part.map_coeffs(&lift).scale(v);
        }
    }
    let (poly, strict) = match table.mode {
        Mode::StrictLeft => (&(&f + &g) + &h, true),
        Mode::StrictRight => (&f + &h, false),
        Mode::Dai => (&(&f + &interp_extra) + &h, true),
    };
    let interpolant = Interpolant::atom(exact(&poly), strict);
    Ok(Assembled {
        f,
        f_prime,
        g,
        h,
        h_prime,
        interpolant,
    })
}
