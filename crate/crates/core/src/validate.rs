//! Exact checks of a rounded certificate.
//!
//! Nothing here trusts the linear system handed to the solver: the identity
//! is re-expanded from the Gram matrices, PSD-ness is decided by principal
//! minors over the integers, and the strict-cone and common-variable side
//! conditions are checked directly.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::poly::Monomial;
use crate::relax::{assemble, Assembled, ExactCandidate, RelaxError, SymMat, SymbolTable};

/// Principal-minor enumeration is exponential; larger blocks are refused.
pub const MAX_EXACT_PSD_DIM: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidateError {
    #[error(transparent)]
    Shape(#[from] RelaxError),
    #[error("block of dimension {0} exceeds the exact PSD limit of {MAX_EXACT_PSD_DIM}")]
    TooLarge(usize),
}

/// Outcome of [`validate`]; `verdict` is the conjunction of the checks.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub identity_zero: bool,
    /// A monomial with nonzero coefficient in the identity, if any.
    pub witness: Option<(Monomial, BigRational)>,
    /// Per block PSD verdict.
    pub psd: Vec<bool>,
    pub strict_cone: bool,
    pub common_vars: bool,
    pub verdict: bool,
}

impl ValidationReport {
    pub fn failed_checks(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some((m, c)) = &self.witness {
            out.push(format!("identity has coefficient {c} at {m}"));
        }
        for (i, ok) in self.psd.iter().enumerate() {
            if !ok {
                out.push(format!("block {i} is not PSD"));
            }
        }
        if !self.strict_cone {
            out.push("strict-cone part is not positive".into());
        }
        if !self.common_vars {
            out.push("interpolant uses a non-common variable".into());
        }
        out
    }
}

/// `None` if the identity is zero, otherwise its first nonzero term.
pub fn check_equalities<F: crate::poly::Coeff>(a: &Assembled<F>) -> Option<(Monomial, F)> {
    let id = a.identity();
    let first = id.terms().next().map(|(m, c)| (m.clone(), c.clone()));
    first
}

/// Fraction-free determinant of a square integer matrix.
pub fn bareiss_det(mut m: Vec<Vec<BigInt>>) -> BigInt {
    let n = m.len();
    if n == 0 {
        return BigInt::one();
    }
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n - 1 {
        if m[k][k].is_zero() {
            let Some(r) = (k + 1..n).find(|&r| !m[r][k].is_zero()) else {
                return BigInt::zero();
            };
            m.swap(k, r);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = &m[i][j] * &m[k][k] - &m[i][k] * &m[k][j];
                m[i][j] = v / &prev;
            }
        }
        prev = m[k][k].clone();
    }
    sign * &m[n - 1][n - 1]
}

/// Scales a rational matrix to integers by the lcm of its denominators.
fn integer_matrix(q: &SymMat<BigRational>) -> Vec<Vec<BigInt>> {
    let n = q.dim();
    let mut l = BigInt::one();
    for i in 0..n {
        for j in 0..n {
            l = l.lcm(q.get(i, j).denom());
        }
    }
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| (q.get(i, j) * BigRational::from_integer(l.clone())).to_integer())
                .collect()
        })
        .collect()
}

/// Exact PSD test: every principal minor (all `2^n - 1` of them) is
/// nonnegative. Returns the number of minors inspected alongside.
pub fn is_psd_exact(q: &SymMat<BigRational>) -> Result<(bool, usize), ValidateError> {
    let n = q.dim();
    if n > MAX_EXACT_PSD_DIM {
        return Err(ValidateError::TooLarge(n));
    }
    if !q.is_symmetric() {
        return Ok((false, 0));
    }
    if (0..n).any(|i| q.get(i, i).is_negative()) {
        return Ok((false, 0));
    }
    let m = integer_matrix(q);
    let mut count = 0;
    for mask in 1u32..(1u32 << n) {
        let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let sub: Vec<Vec<BigInt>> = idx
            .iter()
            .map(|&i| idx.iter().map(|&j| m[i][j].clone()).collect())
            .collect();
        count += 1;
        if bareiss_det(sub).is_negative() {
            return Ok((false, count));
        }
    }
    Ok((true, count))
}

/// All strict-cone coefficients are nonnegative and at least one is
/// positive; the disequality scheme's unit must be positive.
pub fn check_strict_cone(c: &ExactCandidate, table: &SymbolTable) -> bool {
    let mut any_positive = false;
    // Every scalar is either a `γ` or the unit; both must be nonnegative.
    for v in c.scalars.iter().take(table.scalars.len()) {
        if v.is_negative() {
            return false;
        }
        any_positive |= v.is_positive();
    }
    any_positive
}

pub fn validate(
    c: &ExactCandidate,
    table: &SymbolTable,
) -> Result<ValidationReport, ValidateError> {
    let a = assemble(c, table)?;
    let witness = check_equalities(&a);
    let mut psd = Vec::with_capacity(c.blocks.len());
    for q in &c.blocks {
        psd.push(is_psd_exact(q)?.0);
    }
    let strict_cone = check_strict_cone(c, table);
    let common_vars = a.interpolant.vars().is_subset(&table.common_vars);
    let identity_zero = witness.is_none();
    let verdict = identity_zero && psd.iter().all(|&b| b) && strict_cone && common_vars;
    Ok(ValidationReport {
        identity_zero,
        witness,
        psd,
        strict_cone,
        common_vars,
        verdict,
    })
}
