//! Pre-drawn random tables.
//!
//! Every variable owns a stream of values `x^0, x^1, ...`; a draw always
//! takes the next unused one. Values are produced from fair coin bits by
//! interval inversion: the bits are read as a binary expansion that narrows
//! a dyadic interval until it fits inside one cell of the cumulative
//! distribution.
//!
//! A [`Tape`] is either seeded (bits come from a counter-based generator
//! keyed by `(seed, stream, draw index)`, so a variable's values do not
//! depend on the order in which streams are read) or explicit (a finite bit
//! string consumed front to back, used for exhaustive enumeration).

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::model::VariableSpec;
use crate::rational::Rational;

/// Default refusal threshold for [`enumerate_tapes`].
pub const DEFAULT_ENUMERATION_GUARD: u32 = 26;

/// Precomputed inversion data for one distribution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sampler {
    kind: SamplerKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum SamplerKind {
    /// Uniform over `2^bits` values: read `bits` bits as a binary number.
    PowerOfTwo { bits: u32 },
    /// Cumulative numerators `C_0 = 0 <= C_1 <= ... <= C_n = den`.
    General { cum: Vec<BigInt>, den: BigInt },
}

impl Sampler {
    pub fn new(distribution: &[Rational]) -> Self {
        let n = distribution.len();
        let uniform = distribution.iter().all(|p| *p == distribution[0]);
        if uniform && n.is_power_of_two() {
            return Sampler { kind: SamplerKind::PowerOfTwo { bits: n.trailing_zeros() } };
        }
        let den = distribution.iter().fold(BigInt::one(), |acc, p| acc.lcm(p.denom()));
        let mut cum = Vec::with_capacity(n + 1);
        let mut acc = BigInt::zero();
        cum.push(acc.clone());
        for p in distribution {
            acc += p.numer() * (&den / p.denom());
            cum.push(acc.clone());
        }
        Sampler { kind: SamplerKind::General { cum, den } }
    }

    pub fn for_variable(var: &VariableSpec) -> Self {
        Sampler::new(var.distribution())
    }

    fn sample(&self, mut next_bit: impl FnMut() -> Result<bool>) -> Result<u32> {
        match &self.kind {
            SamplerKind::PowerOfTwo { bits } => {
                let mut v = 0u32;
                for _ in 0..*bits {
                    v = (v << 1) | next_bit()? as u32;
                }
                Ok(v)
            }
            SamplerKind::General { cum, den } => {
                // current dyadic interval is [a / 2^b, (a + 1) / 2^b)
                let mut a = BigInt::zero();
                let mut scale = BigInt::one();
                loop {
                    let left = &a * den;
                    let right = (&a + 1u32) * den;
                    // cell v holds x iff cum[v] * 2^b <= x * den < cum[v+1] * 2^b
                    let v = cum[1..]
                        .iter()
                        .position(|c| c * &scale > left)
                        .expect("left end of the dyadic interval is below 1");
                    if right <= &cum[v + 1] * &scale {
                        return Ok(v as u32);
                    }
                    a = (a << 1) + next_bit()? as u32;
                    scale <<= 1;
                }
            }
        }
    }
}

#[derive(Clone, PartialEq, Eq)]
enum Mode {
    Seeded { seed: u64 },
    Explicit { bits: Vec<bool> },
}

/// A replayable source of variable values.
#[derive(Clone, PartialEq, Eq)]
pub struct Tape {
    mode: Mode,
    consumed: Vec<u64>,
    bit_cursor: usize,
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.mode {
            Mode::Seeded { seed } => write!(f, "Tape(seed={seed}, bits_used={})", self.bit_cursor),
            Mode::Explicit { .. } => {
                write!(f, "Tape({}, cursor={})", self.to_hex().unwrap_or_default(), self.bit_cursor)
            }
        }
    }
}

pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn keyed_word(seed: u64, stream: u64, draw: u64, word: u64) -> u64 {
    let k = mix64(seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let k = mix64(k ^ stream.wrapping_mul(0xd6e8_feb8_6659_fd93));
    let k = mix64(k ^ draw.wrapping_mul(0xa076_1d64_78bd_642f));
    mix64(k.wrapping_add(word.wrapping_mul(0xe703_7ed1_a0b4_28db)))
}

impl Tape {
    pub fn seeded(seed: u64) -> Self {
        Tape { mode: Mode::Seeded { seed }, consumed: Vec::new(), bit_cursor: 0 }
    }

    pub fn explicit(bits: Vec<bool>) -> Self {
        Tape { mode: Mode::Explicit { bits }, consumed: Vec::new(), bit_cursor: 0 }
    }

    /// Explicit tape from a `0`/`1` string; other characters (separators) are ignored.
    pub fn from_bit_str(s: &str) -> Self {
        Tape::explicit(
            s.chars()
                .filter_map(|c| match c {
                    '0' => Some(false),
                    '1' => Some(true),
                    _ => None,
                })
                .collect(),
        )
    }

    /// Parses the `<len>:<hex>` form produced by [`Tape::to_hex`]; bits are
    /// packed most significant first.
    pub fn from_hex(s: &str) -> Result<Self> {
        let (len, hex) =
            s.split_once(':').ok_or_else(|| Error::Params(format!("tape {s:?} is not of the form <len>:<hex>")))?;
        let len: usize = len.trim().parse().map_err(|_| Error::Params(format!("bad tape length in {s:?}")))?;
        let mut bits = Vec::with_capacity(len);
        for c in hex.trim().chars() {
            let nib = c.to_digit(16).ok_or_else(|| Error::Params(format!("bad hex digit {c:?}")))?;
            for shift in (0..4).rev() {
                bits.push((nib >> shift) & 1 == 1);
            }
        }
        if bits.len() < len || bits.len() >= len + 4 {
            return Err(Error::Params(format!("tape {s:?}: hex length does not match {len} bits")));
        }
        bits.truncate(len);
        Ok(Tape::explicit(bits))
    }

    /// `None` for seeded tapes.
    pub fn to_hex(&self) -> Option<String> {
        let Mode::Explicit { bits } = &self.mode else { return None };
        let mut out = format!("{}:", bits.len());
        for chunk in bits.chunks(4) {
            let mut nib = 0u32;
            for i in 0..4 {
                nib = (nib << 1) | chunk.get(i).copied().unwrap_or(false) as u32;
            }
            out.push(char::from_digit(nib, 16).expect("nibble"));
        }
        Some(out)
    }

    pub fn seed(&self) -> Option<u64> {
        match self.mode {
            Mode::Seeded { seed } => Some(seed),
            Mode::Explicit { .. } => None,
        }
    }

    pub fn is_explicit(&self) -> bool {
        matches!(self.mode, Mode::Explicit { .. })
    }

    /// Bits read so far (all streams).
    pub fn bits_used(&self) -> usize {
        self.bit_cursor
    }

    /// Length of an explicit tape.
    pub fn explicit_len(&self) -> Option<usize> {
        match &self.mode {
            Mode::Explicit { bits } => Some(bits.len()),
            Mode::Seeded { .. } => None,
        }
    }

    /// Number of values drawn so far from `stream`.
    pub fn consumed(&self, stream: usize) -> u64 {
        self.consumed.get(stream).copied().unwrap_or(0)
    }

    /// Draws the next value of `stream` through `sampler`.
    pub fn draw(&mut self, stream: usize, sampler: &Sampler) -> Result<u32> {
        let draw_index = self.consumed(stream);
        let start = self.bit_cursor;
        let value = match &self.mode {
            Mode::Seeded { seed } => {
                let seed = *seed;
                let mut local = 0u64;
                let mut word = 0u64;
                let v = sampler.sample(|| {
                    if local.is_multiple_of(64) {
                        word = keyed_word(seed, stream as u64, draw_index, local / 64);
                    }
                    let bit = (word >> (63 - local % 64)) & 1 == 1;
                    local += 1;
                    Ok(bit)
                })?;
                self.bit_cursor += local as usize;
                v
            }
            Mode::Explicit { bits } => {
                let mut cursor = start;
                let v = sampler.sample(|| {
                    let b =
                        bits.get(cursor).copied().ok_or(Error::TapeExhausted { bits: bits.len(), partial: None })?;
                    cursor += 1;
                    Ok(b)
                })?;
                self.bit_cursor = cursor;
                v
            }
        };
        if self.consumed.len() <= stream {
            self.consumed.resize(stream + 1, 0);
        }
        self.consumed[stream] += 1;
        Ok(value)
    }

    /// The next value `x_i^j` of the variable's stream.
    pub fn fresh_value(&mut self, var: &VariableSpec) -> Result<u32> {
        self.draw(var.index, &Sampler::for_variable(var))
    }

    /// A Bernoulli draw with success probability `p` on `stream`.
    pub fn bernoulli(&mut self, stream: usize, p: &Rational) -> Result<bool> {
        if p.is_negative() || *p > Rational::one() {
            return Err(Error::Params("probability outside [0,1]".into()));
        }
        let sampler = Sampler::new(&[Rational::one() - p, p.clone()]);
        Ok(self.draw(stream, &sampler)? == 1)
    }
}

/// Every explicit tape of exactly `bit_budget` bits, in lexicographic order.
#[derive(Clone, Debug)]
pub struct TapeEnumeration {
    budget: u32,
    next: u64,
    end: u64,
}

impl Iterator for TapeEnumeration {
    type Item = Tape;

    fn next(&mut self) -> Option<Tape> {
        if self.next >= self.end {
            return None;
        }
        let n = self.next;
        self.next += 1;
        let bits = (0..self.budget).map(|i| (n >> (self.budget - 1 - i)) & 1 == 1).collect();
        Some(Tape::explicit(bits))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.end - self.next) as usize;
        (left, Some(left))
    }
}

/// Enumerates all `2^bit_budget` tapes; refused above `guard` bits.
pub fn enumerate_tapes(bit_budget: u32, guard: u32) -> Result<TapeEnumeration> {
    if bit_budget > guard {
        return Err(Error::Budget(format!("enumerating 2^{bit_budget} tapes exceeds the guard of 2^{guard}")));
    }
    if bit_budget >= 64 {
        return Err(Error::Budget("tape enumeration is limited to 63 bits".into()));
    }
    Ok(TapeEnumeration { budget: bit_budget, next: 0, end: 1u64 << bit_budget })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{half_pow, q};
    use num_traits::Zero;

    fn bit_var(dist: Vec<Rational>) -> VariableSpec {
        VariableSpec::new(0, dist).unwrap()
    }

    #[test]
    fn fair_bit_reads_one_bit() {
        let v = VariableSpec::bit(0);
        let mut t = Tape::from_bit_str("0");
        assert_eq!(t.fresh_value(&v).unwrap(), 0);
        assert_eq!(t.bits_used(), 1);
    }

    #[test]
    fn three_quarter_split() {
        let v = bit_var(vec![q(3, 4), q(1, 4)]);
        let mut t = Tape::from_bit_str("11");
        assert_eq!(t.fresh_value(&v).unwrap(), 1);
        assert_eq!(t.bits_used(), 2);
        let mut t = Tape::from_bit_str("0");
        assert_eq!(t.fresh_value(&v).unwrap(), 0);
        assert_eq!(t.bits_used(), 1);
        let mut t = Tape::from_bit_str("10");
        assert_eq!(t.fresh_value(&v).unwrap(), 0);
        assert_eq!(t.bits_used(), 2);
    }

    #[test]
    fn explicit_exhaustion_is_reported() {
        let v = VariableSpec::bit(0);
        let mut t = Tape::from_bit_str("1");
        t.fresh_value(&v).unwrap();
        assert!(matches!(t.fresh_value(&v), Err(Error::TapeExhausted { bits: 1, .. })));
        assert_eq!(t.consumed(0), 1);
    }

    #[test]
    fn degenerate_distribution_uses_no_bits() {
        let v = bit_var(vec![Rational::zero(), Rational::one()]);
        let mut t = Tape::from_bit_str("");
        assert_eq!(t.fresh_value(&v).unwrap(), 1);
        assert_eq!(t.bits_used(), 0);
    }

    #[test]
    fn power_of_two_matches_interval_rule() {
        let dist = vec![q(1, 4); 4];
        let fast = Sampler::new(&dist);
        let general =
            Sampler { kind: SamplerKind::General { cum: (0..=4).map(BigInt::from).collect(), den: BigInt::from(4) } };
        for tape in enumerate_tapes(2, 26).unwrap() {
            let mut a = tape.clone();
            let mut b = tape;
            assert_eq!(a.draw(0, &fast).unwrap(), b.draw(0, &general).unwrap());
            assert_eq!(a.bits_used(), b.bits_used());
        }
    }

    /// Sum of `2^-len` over bit strings (up to `depth`) that resolve to each value.
    fn resolved_weights(dist: &[Rational], depth: u32) -> (Vec<Rational>, Rational) {
        let sampler = Sampler::new(dist);
        let mut weights = vec![Rational::zero(); dist.len()];
        let mut unresolved = Rational::zero();
        for tape in enumerate_tapes(depth, 26).unwrap() {
            let mut t = tape;
            match t.draw(0, &sampler) {
                Ok(v) => weights[v as usize] += half_pow(depth),
                Err(_) => unresolved += half_pow(depth),
            }
        }
        (weights, unresolved)
    }

    #[test]
    fn dyadic_distributions_are_exact() {
        let dist = vec![q(3, 8), q(1, 8), q(1, 2)];
        let (w, unresolved) = resolved_weights(&dist, 3);
        assert_eq!(w, dist);
        assert!(unresolved.is_zero());
    }

    #[test]
    fn non_dyadic_distributions_are_bracketed() {
        let dist = vec![q(1, 3), q(2, 3)];
        for depth in [2, 6, 10] {
            let (w, unresolved) = resolved_weights(&dist, depth);
            for (wi, pi) in w.iter().zip(&dist) {
                assert!(wi <= pi && *pi <= wi + &unresolved);
            }
            assert!(unresolved <= half_pow(depth - 1));
        }
    }

    #[test]
    fn enumeration_shape() {
        let all: Vec<Tape> = enumerate_tapes(0, 26).unwrap().collect();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].explicit_len(), Some(0));
        let three: Vec<String> = enumerate_tapes(3, 26).unwrap().map(|t| t.to_hex().unwrap()).collect();
        assert_eq!(three, ["3:0", "3:2", "3:4", "3:6", "3:8", "3:a", "3:c", "3:e"]);
        let total: Rational = enumerate_tapes(5, 26).unwrap().map(|_| half_pow(5)).sum();
        assert_eq!(total, Rational::one());
        assert!(enumerate_tapes(30, 26).is_err());
    }

    #[test]
    fn hex_roundtrip() {
        let t = Tape::from_bit_str("1011001");
        let hex = t.to_hex().unwrap();
        assert_eq!(hex, "7:b2");
        assert_eq!(Tape::from_hex(&hex).unwrap(), t);
        assert!(Tape::from_hex("9:b2").is_err());
        assert!(Tape::from_hex("b2").is_err());
        assert_eq!(Tape::seeded(1).to_hex(), None);
    }

    #[test]
    fn seeded_streams_are_order_independent() {
        let v0 = VariableSpec::uniform(0, 3);
        let v1 = VariableSpec::uniform(1, 3);
        let mut a = Tape::seeded(42);
        let mut b = Tape::seeded(42);
        let a0: Vec<u32> = (0..5).map(|_| a.fresh_value(&v0).unwrap()).collect();
        let _ = (0..7).map(|_| b.fresh_value(&v1).unwrap()).count();
        let b0: Vec<u32> = (0..5).map(|_| b.fresh_value(&v0).unwrap()).collect();
        assert_eq!(a0, b0);
        assert_ne!(Tape::seeded(1), Tape::seeded(2));
    }

    #[test]
    fn seeded_uniform_is_roughly_fair() {
        let v = VariableSpec::bit(0);
        let mut t = Tape::seeded(7);
        let ones: u32 = (0..20_000).map(|_| t.fresh_value(&v).unwrap()).sum();
        assert!((9_500..10_500).contains(&ones), "{ones}");
    }
}
