//! Exact rational helpers.
//!
//! Every probability, bound and threshold in the crate is a [`Rational`]
//! (arbitrary precision, always in lowest terms). Floating point only ever
//! appears in human-facing renderings.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// `num / den` as a rational. Panics on a zero denominator.
pub fn q(num: i64, den: i64) -> Rational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(n: i64) -> Rational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn zero() -> Rational {
    Rational::zero()
}

pub fn one() -> Rational {
    Rational::one()
}

/// `2^-k`.
pub fn half_pow(k: u32) -> Rational {
    BigRational::new(BigInt::one(), BigInt::one() << k as usize)
}

pub fn pow(base: &Rational, exp: u32) -> Rational {
    // powers of coprime parts stay coprime, so no reduction is needed
    BigRational::new_raw(base.numer().pow(exp), base.denom().pow(exp))
}

/// Smallest natural `n` with `n >= r`. `r` must be non-negative.
pub fn ceil_nat(r: &Rational) -> Result<u64> {
    if r.is_negative() {
        return Err(Error::Params(format!("expected a non-negative value, got {}", fmt(r))));
    }
    r.ceil()
        .to_integer()
        .to_u64()
        .ok_or_else(|| Error::Budget(format!("value {} does not fit a 64-bit counter", fmt(r))))
}

/// Renders as `num/den`, also for integers.
pub fn fmt(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// `num/den` followed by a short decimal approximation, e.g. `1/8(0.125)`.
pub fn fmt_with_decimal(r: &Rational) -> String {
    format!("{}({})", fmt(r), decimal(r))
}

pub fn decimal(r: &Rational) -> String {
    let x = to_f64(r);
    if x != 0.0 && x.abs() < 1e-4 {
        return format!("{x:.4e}");
    }
    let s = format!("{x:.6}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Parses `num/den`, a plain integer, or a finite decimal like `0.99`.
pub fn parse(text: &str) -> Result<Rational> {
    let s = text.trim();
    let bad = || Error::Params(format!("cannot parse rational from {text:?}"));
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(Error::Params(format!("zero denominator in {text:?}")));
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        let negative = whole.starts_with('-');
        let whole_digits = whole.trim_start_matches(['-', '+']);
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let w: BigInt =
            if whole_digits.is_empty() { BigInt::zero() } else { whole_digits.parse().map_err(|_| bad())? };
        let scale = BigInt::from(10u32).pow(frac.len() as u32);
        let f: BigInt = frac.parse().map_err(|_| bad())?;
        let mag = BigRational::new(w * &scale + f, scale);
        return Ok(if negative { -mag } else { mag });
    }
    let n: BigInt = s.parse().map_err(|_| bad())?;
    Ok(BigRational::from_integer(n))
}

/// A closed rational interval `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interval {
    pub lo: Rational,
    pub hi: Rational,
}

impl Interval {
    pub fn new(lo: Rational, hi: Rational) -> Self {
        debug_assert!(lo <= hi);
        Interval { lo, hi }
    }

    pub fn point(x: Rational) -> Self {
        Interval { lo: x.clone(), hi: x }
    }

    pub fn width(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn contains(&self, x: &Rational) -> bool {
        &self.lo <= x && x <= &self.hi
    }
}

/// Certified bounds on `2^(-num/den)` with width at most `2^-precision`.
///
/// The integer part of the exponent is exact; the fractional part comes
/// from an integer `den`-th root.
pub fn pow2_neg_frac(num: &BigUint, den: &BigUint, precision: u32) -> Interval {
    let g = num.gcd(den);
    let (num, den) = (num / &g, den / &g);
    let den_u = den.to_u32().expect("exponent denominator too large");
    let whole = (&num / &den).to_usize().expect("exponent too large");
    let frac = (&num % &den).to_usize().expect("exponent too large");
    let scale = BigInt::one() << whole;
    if frac == 0 {
        return Interval::point(BigRational::new(BigInt::one(), scale));
    }
    // 2^-(frac/den) lies in (1/2, 1): x = floor(2^(p - frac/den)) is an
    // integer root, so the enclosure has width 2^-p before scaling.
    let p = precision as usize;
    let radicand = BigUint::one() << (p * den_u as usize - frac);
    let x = BigInt::from(radicand.nth_root(den_u));
    let denom = scale << p;
    let lo = BigRational::new(x.clone(), denom.clone());
    let exact = x.pow(den_u) == BigInt::one() << (p * den_u as usize - frac);
    let hi = if exact { lo.clone() } else { BigRational::new(x + 1, denom) };
    Interval::new(lo, hi)
}

/// Weight accumulator for dyadic masses `2^-len`, exact up to `2^-MAX_BITS`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DyadicSum {
    scaled: u128,
}

impl DyadicSum {
    pub const MAX_BITS: u32 = 120;

    pub fn add_weight(&mut self, bits: usize) {
        assert!(bits as u32 <= Self::MAX_BITS, "branch deeper than {} bits", Self::MAX_BITS);
        self.scaled += 1u128 << (Self::MAX_BITS - bits as u32);
    }

    pub fn add(&mut self, other: &DyadicSum) {
        self.scaled += other.scaled;
    }

    pub fn is_zero(&self) -> bool {
        self.scaled == 0
    }

    pub fn to_rational(&self) -> Rational {
        BigRational::new(BigInt::from(self.scaled), BigInt::one() << Self::MAX_BITS as usize)
    }
}
