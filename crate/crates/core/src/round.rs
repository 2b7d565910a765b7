//! Continued-fraction rounding of the solver's variable vector.
//!
//! The vector is first fixed to `c` decimal digits as integers (signs kept
//! aside), then approximated by [`cfe`] at increasing depth. Each depth
//! gives an integer vector whose ratios are simpler than the original ones;
//! at some depth it reproduces the pre-rounded ratios exactly
//! ([`stabilized`]).

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{FromPrimitive, Signed, Zero};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RoundError {
    #[error("vector has no nonzero entry")]
    AllZero,
    #[error("entries must be nonnegative")]
    Negative,
    #[error("depth must be at least 1")]
    ZeroDepth,
    #[error("value is not finite: {0}")]
    NonFinite(String),
}

/// Integer vector read up to positive scaling.
pub type RatioVec = Vec<BigInt>;

fn gcd_all(x: &[BigInt]) -> BigInt {
    x.iter().fold(BigInt::zero(), |g, v| g.gcd(v))
}

/// `x / gcd(x)`; the canonical representative of the ratio class.
pub fn normalize(x: &[BigInt]) -> RatioVec {
    let g = gcd_all(x);
    if g.is_zero() {
        return x.to_vec();
    }
    x.iter().map(|v| v / &g).collect()
}

/// Continued-fraction expansion of the ratio vector `x` at depth `d`.
///
/// `x` must be nonnegative with at least one nonzero entry. The result is
/// normalized and invariant under positive scaling of `x`.
pub fn cfe(x: &[BigInt], d: u32) -> Result<RatioVec, RoundError> {
    if d == 0 {
        return Err(RoundError::ZeroDepth);
    }
    if x.iter().any(Signed::is_negative) {
        return Err(RoundError::Negative);
    }
    if x.iter().all(Zero::is_zero) {
        return Err(RoundError::AllZero);
    }
    Ok(cfe_rec(x, d))
}

fn cfe_rec(x: &[BigInt], d: u32) -> RatioVec {
    let p = smallest_nonzero(x);
    let xp = &x[p];
    let a: Vec<BigInt> = x.iter().map(|v| v.div_floor(xp)).collect();
    if d == 1 {
        return normalize(&a);
    }
    let r: Vec<BigInt> = x
        .iter()
        .zip(&a)
        .enumerate()
        .map(|(i, (v, ai))| if i == p { xp.clone() } else { v - ai * xp })
        .collect();
    let rr = cfe_rec(&r, d - 1);
    let y: Vec<BigInt> = a
        .iter()
        .zip(&rr)
        .enumerate()
        .map(|(i, (ai, ri))| {
            if i == p {
                rr[p].clone()
            } else {
                ai * &rr[p] + ri
            }
        })
        .collect();
    normalize(&y)
}

/// First index of the smallest nonzero entry.
fn smallest_nonzero(x: &[BigInt]) -> usize {
    let mut best: Option<usize> = None;
    for (i, v) in x.iter().enumerate() {
        if !v.is_zero() && best.is_none_or(|b| v < &x[b]) {
            best = Some(i);
        }
    }
    best.expect("caller checked for a nonzero entry")
}

/// True when depth `d` reproduces the ratios of `x` exactly.
pub fn stabilized(x: &[BigInt], d: u32) -> Result<bool, RoundError> {
    Ok(cfe(x, d)? == normalize(x))
}

/// Fixes `v` to `c` decimal digits: `round(|v_i| * 10^c)` with half away
/// from zero, sign reattached.
pub fn pre_round(v: &[f64], c: u32) -> Result<Vec<BigInt>, RoundError> {
    let scale = 10f64.powi(c as i32);
    v.iter()
        .map(|x| {
            let s = (x.abs() * scale).round();
            if !s.is_finite() {
                return Err(RoundError::NonFinite(x.to_string()));
            }
            let m = BigInt::from_f64(s).ok_or_else(|| RoundError::NonFinite(x.to_string()))?;
            Ok(if *x < 0.0 { -m } else { m })
        })
        .collect()
}

/// Outcome of rounding one vector at one depth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rounded {
    /// Signed integer vector, proportional to a candidate certificate.
    pub values: RatioVec,
    /// The expansion at this depth equals the pre-rounded ratios.
    pub stabilized: bool,
}

/// Pre-rounded vector with its signs split off, ready for expansion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prepared {
    pub signed: Vec<BigInt>,
    magnitudes: Vec<BigInt>,
}

impl Prepared {
    pub fn new(v: &[f64], c: u32) -> Result<Self, RoundError> {
        let signed = pre_round(v, c)?;
        if signed.iter().all(Zero::is_zero) {
            return Err(RoundError::AllZero);
        }
        let magnitudes = signed.iter().map(|x| x.abs()).collect();
        Ok(Prepared { signed, magnitudes })
    }

    pub fn at_depth(&self, d: u32) -> Result<Rounded, RoundError> {
        let mags = cfe(&self.magnitudes, d)?;
        let stabilized = mags == normalize(&self.magnitudes);
        let values = mags
            .into_iter()
            .zip(&self.signed)
            .map(|(m, s)| if s.is_negative() { -m } else { m })
            .collect();
        Ok(Rounded { values, stabilized })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(xs: &[i64]) -> Vec<BigInt> {
        xs.iter().map(|&x| BigInt::from(x)).collect()
    }

    #[test]
    fn expansion_table() {
        let x = v(&[871465, 55625, 359255]);
        let expect: [&[i64]; 8] = [
            &[15, 1, 6],
            &[31, 2, 13],
            &[172, 11, 71],
            &[204, 13, 84],
            &[11515, 735, 4747],
            &[81389, 5195, 33552],
            &[174293, 11125, 71851],
            &[174293, 11125, 71851],
        ];
        for (d, e) in expect.iter().enumerate() {
            assert_eq!(cfe(&x, d as u32 + 1).unwrap(), v(e), "depth {}", d + 1);
        }
        assert!(!stabilized(&x, 6).unwrap());
        assert!(stabilized(&x, 7).unwrap());
    }

    #[test]
    fn zeros_stay_zero() {
        assert_eq!(cfe(&v(&[0, 3, 0, 6]), 1).unwrap(), v(&[0, 1, 0, 2]));
        assert_eq!(cfe(&v(&[0, 7]), 3).unwrap(), v(&[0, 1]));
    }

    #[test]
    fn errors() {
        assert_eq!(cfe(&v(&[0, 0]), 1), Err(RoundError::AllZero));
        assert_eq!(cfe(&v(&[1, -1]), 1), Err(RoundError::Negative));
        assert_eq!(cfe(&v(&[1]), 0), Err(RoundError::ZeroDepth));
        assert_eq!(Prepared::new(&[1e-9, -2e-9], 5), Err(RoundError::AllZero));
    }

    #[test]
    fn pre_rounding() {
        assert_eq!(
            pre_round(&[0.5, -0.25, 1.0049, -0.00005], 1).unwrap(),
            v(&[5, -3, 10, 0])
        );
        assert_eq!(pre_round(&[0.125], 2).unwrap(), v(&[13]));
        assert!(pre_round(&[f64::NAN], 2).is_err());
    }

    #[test]
    fn signs_are_reattached() {
        let p = Prepared::new(&[0.5, -1.0, 0.0], 3).unwrap();
        let r = p.at_depth(1).unwrap();
        assert_eq!(r.values, v(&[1, -2, 0]));
        assert!(r.stabilized);
    }

    fn ratio_vec() -> impl Strategy<Value = Vec<u64>> {
        prop::collection::vec(0u64..=1_000_000_000, 1..=6)
            .prop_filter("nonzero", |x| x.iter().any(|&v| v > 0))
    }

    proptest! {
        #[test]
        fn scale_invariant(x in ratio_vec(), lambda in 1u64..=10_000, d in 1u32..8) {
            let x: Vec<BigInt> = x.into_iter().map(BigInt::from).collect();
            let scaled: Vec<BigInt> = x.iter().map(|v| v * lambda).collect();
            prop_assert_eq!(cfe(&x, d).unwrap(), cfe(&scaled, d).unwrap());
        }

        #[test]
        fn eventually_exact(x in ratio_vec()) {
            let x: Vec<BigInt> = x.into_iter().map(BigInt::from).collect();
            let target = normalize(&x);
            let hit = (1..=200).find(|&d| cfe(&x, d).unwrap() == target);
            prop_assert!(hit.is_some());
            let d = hit.unwrap();
            prop_assert_eq!(cfe(&x, d + 1).unwrap(), target);
        }
    }
}
