//! Sparse multivariate polynomials over `f64` and exact rationals.
//!
//! Monomials are kept in graded order: total degree first, then lexicographic
//! on the variable names where a larger exponent of an earlier variable sorts
//! first. Over `{x, y}` this gives `1 < x < y < x^2 < x*y < y^2 < ...`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, One, Signed, ToPrimitive};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolyError {
    #[error("no value assigned to variable `{0}`")]
    MissingVariable(String),
    #[error("coefficient is not finite: {0}")]
    NonFinite(f64),
}

/// A variable name. Ordering is lexicographic on the name.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(Arc<str>);

impl Var {
    pub fn new(name: &str) -> Self {
        assert!(!name.is_empty(), "variable names must be nonempty");
        Var(Arc::from(name))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A power product. Exponents are sorted by variable and never zero.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial(Vec<(Var, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(v: Var) -> Self {
        Monomial(vec![(v, 1)])
    }

    pub fn from_exponents<I: IntoIterator<Item = (Var, u32)>>(it: I) -> Self {
        let mut map: BTreeMap<Var, u32> = BTreeMap::new();
        for (v, e) in it {
            *map.entry(v).or_insert(0) += e;
        }
        Monomial(map.into_iter().filter(|(_, e)| *e > 0).collect())
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e).sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn exponent(&self, v: &Var) -> u32 {
        self.0
            .binary_search_by(|(w, _)| w.cmp(v))
            .map(|i| self.0[i].1)
            .unwrap_or(0)
    }

    pub fn exponents(&self) -> &[(Var, u32)] {
        &self.0
    }

    pub fn vars(&self) -> impl Iterator<Item = &Var> {
        self.0.iter().map(|(v, _)| v)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].0.cmp(&other.0[j].0) {
                Ordering::Less => {
                    out.push(self.0[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(other.0[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((self.0[i].0.clone(), self.0[i].1 + other.0[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Monomial(out)
    }

    pub fn pow(&self, k: u32) -> Monomial {
        Monomial(self.0.iter().map(|(v, e)| (v.clone(), e * k)).collect())
    }

    pub fn eval<F: Coeff>(&self, point: &BTreeMap<Var, F>) -> Result<F, PolyError> {
        let mut acc = F::one();
        for (v, e) in &self.0 {
            let x = point
                .get(v)
                .ok_or_else(|| PolyError::MissingVariable(v.name().to_string()))?;
            for _ in 0..*e {
                acc = acc * x.clone();
            }
        }
        Ok(acc)
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| {
            // Walk both exponent lists in variable order; the first variable
            // where they differ decides, larger exponent sorts first.
            let (mut i, mut j) = (0, 0);
            loop {
                match (self.0.get(i), other.0.get(j)) {
                    (None, None) => return Ordering::Equal,
                    (Some(_), None) => return Ordering::Less,
                    (None, Some(_)) => return Ordering::Greater,
                    (Some((a, ea)), Some((b, eb))) => match a.cmp(b) {
                        Ordering::Less => return Ordering::Less,
                        Ordering::Greater => return Ordering::Greater,
                        Ordering::Equal => {
                            if ea != eb {
                                return eb.cmp(ea);
                            }
                            i += 1;
                            j += 1;
                        }
                    },
                }
            }
        })
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("1");
        }
        for (k, (v, e)) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str("*")?;
            }
            if *e == 1 {
                write!(f, "{v}")?;
            } else {
                write!(f, "{v}^{e}")?;
            }
        }
        Ok(())
    }
}

/// All monomials over `vars` of total degree at most `d`, ascending.
pub fn monomials_up_to(vars: &BTreeSet<Var>, d: u32) -> Vec<Monomial> {
    let vars: Vec<Var> = vars.iter().cloned().collect();
    let mut out = Vec::new();
    for deg in 0..=d {
        let mut exps = vec![0u32; vars.len()];
        homogeneous(&vars, deg, 0, &mut exps, &mut out);
    }
    out
}

// Emits degree-`rem` monomials in ascending order: earlier variables take the
// largest exponents first.
fn homogeneous(vars: &[Var], rem: u32, idx: usize, exps: &mut [u32], out: &mut Vec<Monomial>) {
    if idx == vars.len() {
        if rem == 0 {
            out.push(Monomial(
                vars.iter()
                    .zip(exps.iter())
                    .filter(|(_, e)| **e > 0)
                    .map(|(v, e)| (v.clone(), *e))
                    .collect(),
            ));
        }
        return;
    }
    if idx + 1 == vars.len() {
        exps[idx] = rem;
        homogeneous(vars, 0, idx + 1, exps, out);
        exps[idx] = 0;
        return;
    }
    for e in (0..=rem).rev() {
        exps[idx] = e;
        homogeneous(vars, rem - e, idx + 1, exps, out);
    }
    exps[idx] = 0;
}

/// Coefficient field. Instantiated with `f64` and [`BigRational`].
pub trait Coeff:
    Clone + PartialEq + fmt::Debug + Num + Neg<Output = Self> + Send + Sync + 'static
{
    /// Sign-aware rendering of the magnitude used by the canonical printer.
    fn render_abs(&self) -> String;
    fn is_negative_coeff(&self) -> bool;
}

impl Coeff for f64 {
    fn render_abs(&self) -> String {
        format!("{}", self.abs())
    }
    fn is_negative_coeff(&self) -> bool {
        *self < 0.0
    }
}

impl Coeff for BigRational {
    fn render_abs(&self) -> String {
        let a = self.abs();
        if a.denom().is_one() {
            a.numer().to_string()
        } else {
            format!("{}/{}", a.numer(), a.denom())
        }
    }
    fn is_negative_coeff(&self) -> bool {
        self.is_negative()
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct Polynomial<F> {
    terms: BTreeMap<Monomial, F>,
}

pub type RatPoly = Polynomial<BigRational>;
pub type FloatPoly = Polynomial<f64>;

impl<F: Coeff> Default for Polynomial<F> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<F: Coeff> Polynomial<F> {
    pub fn zero() -> Self {
        Polynomial {
            terms: BTreeMap::new(),
        }
    }

    pub fn one() -> Self {
        Self::constant(F::one())
    }

    pub fn constant(c: F) -> Self {
        Self::from_terms([(Monomial::one(), c)])
    }

    pub fn var(v: Var) -> Self {
        Self::from_terms([(Monomial::var(v), F::one())])
    }

    pub fn monomial(m: Monomial, c: F) -> Self {
        Self::from_terms([(m, c)])
    }

    /// Builds a polynomial, summing duplicate monomials and pruning zeros.
    pub fn from_terms<I: IntoIterator<Item = (Monomial, F)>>(it: I) -> Self {
        let mut p = Self::zero();
        for (m, c) in it {
            p.add_term(m, c);
        }
        p
    }

    pub fn add_term(&mut self, m: Monomial, c: F) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(existing) => {
                let sum = existing.clone() + c;
                if sum.is_zero() {
                    self.terms.remove(&m);
                } else {
                    *existing = sum;
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &F)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, m: &Monomial) -> F {
        self.terms.get(m).cloned().unwrap_or_else(F::zero)
    }

    /// Total degree, `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(Monomial::degree).max()
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        self.terms.keys().flat_map(|m| m.vars().cloned()).collect()
    }

    pub fn scale(&self, c: &F) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Polynomial {
            terms: self
                .terms
                .iter()
                .map(|(m, a)| (m.clone(), a.clone() * c.clone()))
                .filter(|(_, a)| !a.is_zero())
                .collect(),
        }
    }

    pub fn mul_monomial(&self, m: &Monomial) -> Self {
        Polynomial {
            terms: self
                .terms
                .iter()
                .map(|(n, a)| (n.mul(m), a.clone()))
                .collect(),
        }
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::one();
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    pub fn eval(&self, point: &BTreeMap<Var, F>) -> Result<F, PolyError> {
        let mut acc = F::zero();
        for (m, c) in &self.terms {
            acc = acc + c.clone() * m.eval(point)?;
        }
        Ok(acc)
    }

    pub fn map_coeffs<G: Coeff>(&self, mut f: impl FnMut(&F) -> G) -> Polynomial<G> {
        Polynomial::from_terms(self.terms.iter().map(|(m, c)| (m.clone(), f(c))))
    }
}

impl FloatPoly {
    /// Exact conversion; every finite `f64` is a dyadic rational.
    pub fn to_rational(&self) -> Result<RatPoly, PolyError> {
        let mut out = RatPoly::zero();
        for (m, c) in &self.terms {
            out.add_term(m.clone(), f64_to_rational(*c)?);
        }
        Ok(out)
    }
}

impl RatPoly {
    /// `Some(λ)` with `λ > 0` and `self = λ · other`.
    pub fn positive_multiple_of(&self, other: &RatPoly) -> Option<BigRational> {
        let (m, a) = self.terms().next()?;
        let b = other.coeff(m);
        if num_traits::Zero::is_zero(&b) {
            return None;
        }
        let lambda = a / &b;
        (lambda.is_positive() && *self == other.scale(&lambda)).then_some(lambda)
    }

    pub fn to_float(&self) -> FloatPoly {
        self.map_coeffs(rational_to_f64)
    }
}

pub fn f64_to_rational(x: f64) -> Result<BigRational, PolyError> {
    BigRational::from_float(x).ok_or(PolyError::NonFinite(x))
}

pub fn rational_to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

impl<F: Coeff> Add for &Polynomial<F> {
    type Output = Polynomial<F>;
    fn add(self, rhs: &Polynomial<F>) -> Polynomial<F> {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl<F: Coeff> Sub for &Polynomial<F> {
    type Output = Polynomial<F>;
    fn sub(self, rhs: &Polynomial<F>) -> Polynomial<F> {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }
}

impl<F: Coeff> Mul for &Polynomial<F> {
    type Output = Polynomial<F>;
    fn mul(self, rhs: &Polynomial<F>) -> Polynomial<F> {
        let mut out = Polynomial::zero();
        for (m, a) in &self.terms {
            for (n, b) in &rhs.terms {
                out.add_term(m.mul(n), a.clone() * b.clone());
            }
        }
        out
    }
}

impl<F: Coeff> Neg for &Polynomial<F> {
    type Output = Polynomial<F>;
    fn neg(self) -> Polynomial<F> {
        Polynomial {
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), -c.clone()))
                .collect(),
        }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $method:ident) => {
        impl<F: Coeff> $tr for Polynomial<F> {
            type Output = Polynomial<F>;
            fn $method(self, rhs: Polynomial<F>) -> Polynomial<F> {
                (&self).$method(&rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl<F: Coeff> Neg for Polynomial<F> {
    type Output = Polynomial<F>;
    fn neg(self) -> Polynomial<F> {
        -&self
    }
}

/// Canonical rendering: leading (largest) term first, `*` products, `^` powers.
impl<F: Coeff> fmt::Display for Polynomial<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (k, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative_coeff();
            match (k, neg) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            let mag = c.render_abs();
            if m.is_one() {
                f.write_str(&mag)?;
            } else if mag == "1" {
                write!(f, "{m}")?;
            } else {
                write!(f, "{mag}*{m}")?;
            }
        }
        Ok(())
    }
}

impl<F: Coeff> fmt::Debug for Polynomial<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn x() -> RatPoly {
        RatPoly::var(Var::new("x"))
    }
    fn y() -> RatPoly {
        RatPoly::var(Var::new("y"))
    }
    fn c(n: i64) -> RatPoly {
        RatPoly::constant(int(n))
    }
    fn pt(vals: &[(&str, i64)]) -> BTreeMap<Var, BigRational> {
        vals.iter().map(|(n, v)| (Var::new(n), int(*v))).collect()
    }
    fn vars(names: &[&str]) -> BTreeSet<Var> {
        names.iter().map(|n| Var::new(n)).collect()
    }

    #[test]
    fn add_cancels_and_identity() {
        assert_eq!(&(&x() + &y()) + &(&x() - &y()), x().scale(&int(2)));
        assert_eq!(&x() + &RatPoly::zero(), x());
        assert_eq!(&(&y() - &x()) + &(&y() + &x()), y().scale(&int(2)));
    }

    #[test]
    fn mul_examples() {
        assert_eq!((&x() * &x()).to_string(), "x^2");
        assert_eq!(&x() * &c(1), x());
        let p = &(&y() - &x()) * &(&y() + &x());
        assert_eq!(p, &(&y() * &y()) - &(&x() * &x()));
    }

    #[test]
    fn eval_examples() {
        let p = &(&x() * &x()) + &(&y() * &y());
        assert_eq!(p.eval(&pt(&[("x", 0), ("y", -1)])).unwrap(), int(1));
        let q = &(&(&y() * &y()).scale(&int(34)) - &y().scale(&int(68))) - &c(102);
        assert_eq!(q.eval(&pt(&[("y", -1)])).unwrap(), int(0));
        assert_eq!(
            p.eval(&pt(&[("x", 0)])),
            Err(PolyError::MissingVariable("y".into()))
        );
    }

    #[test]
    fn float_candidate_is_negative_at_witness() {
        // Leading coefficients of the floating candidate from the barely
        // disjoint disk example; the tiny terms do not change the sign.
        let mut p = FloatPoly::zero();
        let yv = Monomial::var(Var::new("y"));
        p.add_term(Monomial::one(), -3.370437975);
        p.add_term(yv.clone(), -2.2469);
        p.add_term(yv.pow(2), 1.1235);
        p.add_term(Monomial::var(Var::new("x")), 8.1145e-14);
        let at: BTreeMap<Var, f64> = [(Var::new("x"), 0.0), (Var::new("y"), -1.0)].into();
        assert!(p.eval(&at).unwrap() < 0.0);
    }

    #[test]
    fn basis_sizes_and_order() {
        let b = monomials_up_to(&vars(&["x", "y"]), 1);
        let names: Vec<String> = b.iter().map(|m| m.to_string()).collect();
        assert_eq!(names, ["1", "x", "y"]);
        let b2 = monomials_up_to(&vars(&["x", "y"]), 2);
        let names: Vec<String> = b2.iter().map(|m| m.to_string()).collect();
        assert_eq!(names, ["1", "x", "y", "x^2", "x*y", "y^2"]);
        assert_eq!(monomials_up_to(&vars(&["x", "y", "z"]), 2).len(), 10);
        assert_eq!(monomials_up_to(&BTreeSet::new(), 3).len(), 1);
    }

    #[test]
    fn conversions() {
        let half = FloatPoly::var(Var::new("x")).scale(&0.5);
        assert_eq!(half.to_rational().unwrap(), x().scale(&rat(1, 2)));
        assert!(FloatPoly::zero().to_rational().unwrap().is_zero());
        let third = x().scale(&rat(1, 3)).to_float();
        assert_eq!(third.coeff(&Monomial::var(Var::new("x"))), 1.0 / 3.0);
        let bad = FloatPoly::constant(f64::INFINITY);
        assert!(matches!(bad.to_rational(), Err(PolyError::NonFinite(_))));
    }

    #[test]
    fn rendering() {
        let p = &(&(&y() * &y()).scale(&int(34)) - &y().scale(&int(68))) - &c(102);
        assert_eq!(p.to_string(), "34*y^2 - 68*y - 102");
        let q = &(&x() * &x()).scale(&int(4)) + &y().scale(&int(8));
        assert_eq!(q.to_string(), "4*x^2 + 8*y");
        assert_eq!(x().scale(&rat(-1, 2)).to_string(), "-1/2*x");
        assert_eq!(RatPoly::zero().to_string(), "0");
        assert_eq!(RatPoly::zero().degree(), None);
    }

    fn small_poly() -> impl Strategy<Value = RatPoly> {
        let term = (0u32..3, 0u32..3, -5i64..6, 1i64..4);
        prop::collection::vec(term, 0..5).prop_map(|ts| {
            RatPoly::from_terms(ts.into_iter().map(|(a, b, n, d)| {
                (
                    Monomial::from_exponents([(Var::new("x"), a), (Var::new("y"), b)]),
                    rat(n, d),
                )
            }))
        })
    }

    proptest! {
        #[test]
        fn ring_axioms(p in small_poly(), q in small_poly(), r in small_poly()) {
            prop_assert_eq!(&(&p + &q) + &r, &p + &(&q + &r));
            prop_assert_eq!(&p * &q, &q * &p);
            prop_assert_eq!(&(&p * &q) * &r, &p * &(&q * &r));
            prop_assert_eq!(&p * &(&q + &r), &(&p * &q) + &(&p * &r));
        }

        #[test]
        fn degree_is_additive(p in small_poly(), q in small_poly()) {
            prop_assume!(!p.is_zero() && !q.is_zero());
            prop_assert_eq!((&p * &q).degree(), Some(p.degree().unwrap() + q.degree().unwrap()));
        }

        #[test]
        fn eval_is_homomorphism(p in small_poly(), q in small_poly(), a in -4i64..5, b in -4i64..5) {
            let at = pt(&[("x", a), ("y", b)]);
            prop_assert_eq!((&p + &q).eval(&at).unwrap(), p.eval(&at).unwrap() + q.eval(&at).unwrap());
            prop_assert_eq!((&p * &q).eval(&at).unwrap(), p.eval(&at).unwrap() * q.eval(&at).unwrap());
        }

        #[test]
        fn basis_strictly_increasing(n in 0usize..4, d in 0u32..4) {
            let vs: BTreeSet<Var> = ["a", "b", "c", "d"][..n].iter().map(|s| Var::new(s)).collect();
            let b = monomials_up_to(&vs, d);
            prop_assert!(b.windows(2).all(|w| w[0] < w[1]));
            // C(n + d, d)
            let mut count = 1u64;
            for k in 1..=d as u64 { count = count * (n as u64 + k) / k; }
            prop_assert_eq!(b.len() as u64, count);
        }
    }
}
