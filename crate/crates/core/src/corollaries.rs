//! Infinite CNFs and forbidden substrings.
//!
//! Three families are provided: [`SlidingCnf`] (every clause has `m`
//! variables), [`BlockCnf`] (clauses of every size, with a bounded number
//! per variable and size) together with its trimmed version
//! [`TrimmedCnf`], and [`ForbiddenSubstrings`], which turns a finite list of
//! binary strings into one clause per string and starting position.

use std::collections::BTreeMap;
use std::sync::Mutex;

use num_bigint::BigUint;
use num_traits::{One, Signed, ToPrimitive};

use crate::engine::{run_finite, RunStatus};
use crate::error::{Error, Result};
use crate::family::{EventFamily, FamilyParams};
use crate::layerwise::{compute_assignment_prefix, PrefixMode};
use crate::model::{check_computable_lll, ConditionReport, ConstraintSystem, Event, VariableSpec};
use crate::rational::{self, Interval, Rational};
use crate::tape::{mix64, Tape};

fn sign(seed: u64, a: u64, b: u64, c: u64) -> bool {
    mix64(mix64(mix64(seed ^ 0x5bd1_e995) ^ a) ^ b.wrapping_mul(31) ^ c.rotate_left(17)) & 1 == 1
}

/// `count <= 2^(gamma * m)`, decided exactly.
pub fn within_power(count: u64, m: usize, gamma: &Rational) -> bool {
    if gamma.is_negative() {
        return count == 0;
    }
    let p = gamma.numer().to_u64().expect("gamma numerator");
    let q = gamma.denom().to_u32().expect("gamma denominator");
    BigUint::from(count).pow(q) <= BigUint::one() << (p as usize * m)
}

/// Largest `c <= cap` with `c <= 2^(gamma * m)`.
pub fn floor_power(m: usize, gamma: &Rational, cap: u64) -> u64 {
    let mut c = 1u64;
    while c < cap && within_power(c + 1, m, gamma) {
        c += 1;
    }
    c
}

/// The fixed-size condition: `2^-m <= alpha z (1-z)^(2^(m-2))` with
/// `z = 2^-(m-2)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixedCnfCheck {
    pub m: usize,
    pub z: Rational,
    pub lhs: Rational,
    pub rhs: Rational,
    pub holds: bool,
    /// Largest number of proper neighbors seen on the checked prefix.
    pub max_neighbors: Option<usize>,
}

/// Exact evaluation of the fixed-size condition for one `m`.
pub fn fixed_cnf_condition(m: usize, alpha: &Rational) -> Result<FixedCnfCheck> {
    if m < 2 {
        return Err(Error::Params("clause size must be at least 2".into()));
    }
    let z = rational::half_pow((m - 2) as u32);
    let degree = 1u32 << (m - 2);
    let lhs = rational::half_pow(m as u32);
    let rhs = alpha * &z * rational::pow(&(Rational::one() - &z), degree);
    let holds = lhs <= rhs;
    Ok(FixedCnfCheck { m, z, lhs, rhs, holds, max_neighbors: None })
}

/// Checks clause sizes and neighbor counts on the first `prefix` events,
/// then evaluates the condition with `z = 2^-(m-2)`.
pub fn fixed_cnf_params(family: &dyn EventFamily, m: usize, alpha: &Rational, prefix: usize) -> Result<FixedCnfCheck> {
    let mut check = fixed_cnf_condition(m, alpha)?;
    let limit = 1usize << (m - 2);
    let mut worst = 0;
    for j in 0..prefix {
        let Some(e) = family.event(j)? else { break };
        if e.vbl().len() != m {
            return Err(Error::Family(format!("event {j} has {} variables, expected {m}", e.vbl().len())));
        }
        let proper = family.neighbors(j)?.len() - 1;
        if proper > limit {
            return Err(Error::Family(format!("event {j} has {proper} neighbors, more than {limit}")));
        }
        worst = worst.max(proper);
    }
    check.max_neighbors = Some(worst);
    Ok(check)
}

/// Random clauses with `m` distinct variables out of `num_vars`, each
/// sharing variables with at most `max_neighbors` other clauses. Candidates
/// breaking the bound are redrawn.
pub fn random_bounded_cnf(
    m: usize,
    num_clauses: usize,
    num_vars: usize,
    max_neighbors: usize,
    seed: u64,
) -> Result<Vec<Vec<(usize, bool)>>> {
    if m == 0 || m > num_vars {
        return Err(Error::Params(format!("cannot pick {m} distinct variables out of {num_vars}")));
    }
    let mut counter = 0u64;
    let mut next = |bound: usize| {
        counter += 1;
        (mix64(seed ^ mix64(counter)) % bound as u64) as usize
    };
    let mut by_var: Vec<Vec<usize>> = vec![Vec::new(); num_vars];
    let mut degree: Vec<usize> = Vec::with_capacity(num_clauses);
    let mut clauses = Vec::with_capacity(num_clauses);
    let attempts = 1000 * num_clauses.max(1);
    for _ in 0..attempts {
        if clauses.len() == num_clauses {
            break;
        }
        let mut vars: Vec<usize> = Vec::with_capacity(m);
        while vars.len() < m {
            let v = next(num_vars);
            if !vars.contains(&v) {
                vars.push(v);
            }
        }
        vars.sort_unstable();
        let mut nb: Vec<usize> = vars.iter().flat_map(|&v| by_var[v].iter().copied()).collect();
        nb.sort_unstable();
        nb.dedup();
        if nb.len() > max_neighbors || nb.iter().any(|&c| degree[c] >= max_neighbors) {
            continue;
        }
        let id = clauses.len();
        for &c in &nb {
            degree[c] += 1;
        }
        degree.push(nb.len());
        for &v in &vars {
            by_var[v].push(id);
        }
        clauses.push(vars.into_iter().map(|v| (v, next(2) == 1)).collect());
    }
    if clauses.len() < num_clauses {
        return Err(Error::Budget(format!("placed {} of {num_clauses} clauses", clauses.len())));
    }
    Ok(clauses)
}

/// Clauses over windows `j*stride .. j*stride+m` with pseudo-random signs.
#[derive(Clone, Debug)]
pub struct SlidingCnf {
    pub m: usize,
    pub stride: usize,
    pub seed: u64,
}

impl SlidingCnf {
    pub fn new(m: usize, stride: usize, seed: u64) -> Result<Self> {
        if m == 0 || stride == 0 {
            return Err(Error::Params("clause size and stride must be positive".into()));
        }
        Ok(SlidingCnf { m, stride, seed })
    }

    pub fn literals(&self, j: usize) -> Vec<(usize, bool)> {
        let start = j * self.stride;
        (start..start + self.m).map(|v| (v, sign(self.seed, j as u64, v as u64, 0))).collect()
    }
}

impl EventFamily for SlidingCnf {
    fn variable(&self, index: usize) -> Result<VariableSpec> {
        Ok(VariableSpec::bit(index))
    }

    fn event(&self, index: usize) -> Result<Option<Event>> {
        Event::clause(index, &self.literals(index)).map(Some)
    }

    fn events_with_var(&self, var: usize) -> Result<Vec<usize>> {
        let hi = var / self.stride;
        let lo = (var + 1).saturating_sub(self.m).div_ceil(self.stride);
        Ok((lo..=hi).collect())
    }
}

/// Identifies a clause of a [`BlockCnf`]: variables `start..start+size`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct BlockKey {
    pub end: usize,
    pub size: usize,
    pub layer: usize,
}

impl BlockKey {
    pub fn start(&self) -> usize {
        self.end - self.size
    }
}

/// Clauses of every size `m >= min_size`. For size `m` there are
/// `min(m, floor(2^(gamma m)))` layers; layer `l` cuts the variables from
/// `l` on into consecutive blocks of `m`. A variable therefore lies in at
/// most `2^(gamma m)` clauses of size `m`, but in infinitely many clauses
/// overall. Events are ordered by end position, then size, then layer.
#[derive(Debug)]
pub struct BlockCnf {
    pub gamma: Rational,
    pub min_size: usize,
    pub seed: u64,
    keys: Mutex<(usize, Vec<BlockKey>)>,
}

impl Clone for BlockCnf {
    fn clone(&self) -> Self {
        BlockCnf::new(self.gamma.clone(), self.min_size, self.seed).expect("validated")
    }
}

impl BlockCnf {
    pub fn new(gamma: Rational, min_size: usize, seed: u64) -> Result<Self> {
        if !gamma.is_positive() || gamma >= Rational::one() {
            return Err(Error::Params("gamma must lie in (0,1)".into()));
        }
        if min_size == 0 {
            return Err(Error::Params("clause sizes start at 1".into()));
        }
        Ok(BlockCnf { gamma, min_size, seed, keys: Mutex::new((0, Vec::new())) })
    }

    pub fn layers(&self, size: usize) -> usize {
        floor_power(size, &self.gamma, size as u64) as usize
    }

    fn with_keys<T>(&self, upto: impl Fn(&[BlockKey], usize) -> bool, f: impl FnOnce(&[BlockKey]) -> T) -> T {
        let mut guard = self.keys.lock().expect("key cache");
        let (done_end, keys) = &mut *guard;
        while !upto(keys, *done_end) {
            let end = *done_end + 1;
            for size in self.min_size..=end {
                for layer in 0..self.layers(size) {
                    let start = end - size;
                    if start >= layer && (start - layer) % size == 0 {
                        keys.push(BlockKey { end, size, layer });
                    }
                }
            }
            *done_end = end;
        }
        f(keys)
    }

    pub fn key(&self, index: usize) -> BlockKey {
        self.with_keys(|k, _| k.len() > index, |k| k[index])
    }

    pub fn index_of(&self, key: BlockKey) -> usize {
        self.with_keys(|_, done| done >= key.end, |k| k.binary_search(&key).expect("key exists"))
    }

    pub fn literals(&self, key: BlockKey) -> Vec<(usize, bool)> {
        (key.start()..key.end).map(|v| (v, sign(self.seed, key.size as u64, key.layer as u64, v as u64))).collect()
    }

    /// Clauses of size `size` containing `var`.
    pub fn events_with_var_of_size(&self, var: usize, size: usize) -> Vec<usize> {
        if size < self.min_size {
            return vec![];
        }
        let mut out: Vec<usize> = (0..self.layers(size))
            .filter(|&l| var >= l)
            .map(|l| {
                let start = l + (var - l) / size * size;
                self.index_of(BlockKey { end: start + size, size, layer: l })
            })
            .collect();
        out.sort_unstable();
        out
    }
}

impl EventFamily for BlockCnf {
    fn variable(&self, index: usize) -> Result<VariableSpec> {
        Ok(VariableSpec::bit(index))
    }

    fn event(&self, index: usize) -> Result<Option<Event>> {
        let key = self.key(index);
        Event::clause(index, &self.literals(key)).map(Some)
    }

    fn events_with_var(&self, var: usize) -> Result<Vec<usize>> {
        Err(Error::Family(format!("variable {var} lies in clauses of every size; trim the family first")))
    }
}

/// A [`BlockCnf`] with the `ceil(rho * s)` lowest variables deleted from
/// every clause of size `s`.
#[derive(Clone, Debug)]
pub struct TrimmedCnf {
    pub inner: BlockCnf,
    pub rho: Rational,
}

pub fn trim_clauses(family: &BlockCnf, rho: Rational) -> Result<TrimmedCnf> {
    if !rho.is_positive() || rho >= Rational::one() {
        return Err(Error::Params("rho must lie in (0,1)".into()));
    }
    Ok(TrimmedCnf { inner: family.clone(), rho })
}

impl TrimmedCnf {
    pub fn dropped(&self, size: usize) -> usize {
        rational::ceil_nat(&(&self.rho * Rational::from_integer(size.into()))).expect("small") as usize
    }

    /// Every variable of the trimmed clause `index` lies in the original one.
    pub fn original(&self, index: usize) -> Result<Event> {
        EventFamily::event(&self.inner, index)?.ok_or_else(|| Error::Family(format!("no event {index}")))
    }

    /// Exponent `gamma / (1 - rho)`, the natural candidate for the trimmed
    /// degree bound.
    pub fn nominal_gamma(&self) -> Rational {
        &self.inner.gamma / (Rational::one() - &self.rho)
    }

    /// Largest clause size (before trimming) in which `var` survives.
    pub fn largest_size_with(&self, var: usize) -> Option<usize> {
        let mut best = None;
        let mut size = self.inner.min_size;
        while self.dropped(size) <= var {
            if self.inner.events_with_var_of_size(var, size).iter().any(|&j| {
                let k = self.inner.key(j);
                var - k.start() >= self.dropped(size)
            }) {
                best = Some(size);
            }
            size += 1;
        }
        best
    }
}

impl EventFamily for TrimmedCnf {
    fn variable(&self, index: usize) -> Result<VariableSpec> {
        Ok(VariableSpec::bit(index))
    }

    fn event(&self, index: usize) -> Result<Option<Event>> {
        let key = self.inner.key(index);
        let d = self.dropped(key.size);
        let lits = self.inner.literals(key);
        Event::clause(index, &lits[d..]).map(Some)
    }

    fn events_with_var(&self, var: usize) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        let mut size = self.inner.min_size;
        while self.dropped(size) <= var {
            for j in self.inner.events_with_var_of_size(var, size) {
                if var - self.inner.key(j).start() >= self.dropped(size) {
                    out.push(j);
                }
            }
            size += 1;
        }
        out.sort_unstable();
        Ok(out)
    }
}

/// For each variable in `vars` and each clause size, how many events of
/// that size contain the variable.
pub fn degree_audit(family: &dyn EventFamily, vars: std::ops::Range<usize>) -> Result<BTreeMap<(usize, usize), u64>> {
    let mut out = BTreeMap::new();
    for v in vars {
        for j in family.events_with_var(v)? {
            let e = family.event(j)?.ok_or_else(|| Error::Family(format!("no event {j}")))?;
            *out.entry((v, e.vbl().len())).or_insert(0) += 1;
        }
    }
    Ok(out)
}

/// Entries of an audit exceeding `2^(gamma * size)`.
pub fn audit_violations(audit: &BTreeMap<(usize, usize), u64>, gamma: &Rational) -> Vec<(usize, usize, u64)> {
    audit
        .iter()
        .filter(|((_, size), count)| !within_power(**count, *size, gamma))
        .map(|(&(v, s), &c)| (v, s, c))
        .collect()
}

/// Smallest `gamma'` on the grid `k/64` above the family's `gamma` for which
/// the audit of `vars` passes.
pub fn trimmed_gamma(family: &TrimmedCnf, vars: std::ops::Range<usize>) -> Result<Rational> {
    let audit = degree_audit(family, vars)?;
    let start = (&family.inner.gamma * rational::int(64)).floor().to_integer().to_u64().unwrap_or(0) + 1;
    (start..64)
        .map(|k| Rational::new(k.into(), 64.into()))
        .find(|g| audit_violations(&audit, g).is_empty())
        .ok_or_else(|| Error::Family("no gamma' below 1 bounds the trimmed degrees".into()))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BetaM {
    pub beta: Rational,
    pub m: usize,
    /// Certified lower bound of the right-hand side at `m`.
    pub rhs_at_m: Interval,
    /// Certified enclosure of the right-hand side at `m - 1`.
    pub rhs_below: Option<Interval>,
}

const BETA_PRECISION: u32 = 96;

/// Encloses `alpha 2^-beta (1 - 2^-(d*size) / (1 - 2^-d))` with
/// `d = beta - gamma`.
pub fn master_rhs(gamma: &Rational, alpha: &Rational, beta: &Rational, size: usize, precision: u32) -> Interval {
    let pw = |r: &Rational| {
        let n = r.numer().to_biguint().expect("non-negative");
        let d = r.denom().to_biguint().expect("positive");
        rational::pow2_neg_frac(&n, &d, precision)
    };
    let d = beta - gamma;
    let two_beta = pw(beta);
    let two_d = pw(&d);
    let tail_top = pw(&(&d * Rational::from_integer(size.into())));
    let one = Rational::one();
    let tail_hi = &tail_top.hi / (&one - &two_d.hi);
    let tail_lo = &tail_top.lo / (&one - &two_d.lo);
    let lo = alpha * &two_beta.lo * (&one - &tail_hi);
    let hi = alpha * &two_beta.hi * (&one - &tail_lo);
    Interval::new(lo, hi)
}

/// `beta = (1 + gamma)/2` and the least `M` for which
/// `1/2 <= alpha 2^-beta (1 - sum_{m >= M} 2^((gamma - beta) m))` is
/// certified, with `M - 1` certified to fail.
pub fn compute_beta_m(gamma: &Rational, alpha: &Rational) -> Result<BetaM> {
    let one = Rational::one();
    if !gamma.is_positive() || gamma >= &one || !alpha.is_positive() || alpha >= &one {
        return Err(Error::Params("need 0 < gamma < 1 and 0 < alpha < 1".into()));
    }
    let beta = (&one + gamma) / Rational::from_integer(2.into());
    let half = rational::q(1, 2);
    let mut precision = 64;
    loop {
        let pw = {
            let n = beta.numer().to_biguint().expect("positive");
            let d = beta.denom().to_biguint().expect("positive");
            rational::pow2_neg_frac(&n, &d, precision)
        };
        if alpha * &pw.hi <= half {
            return Err(Error::Params("alpha/gamma incompatible: alpha 2^-beta is at most 1/2".into()));
        }
        if alpha * &pw.lo > half {
            break;
        }
        precision += 32;
        if precision > 1024 {
            return Err(Error::Params("alpha 2^-beta is too close to 1/2 to certify".into()));
        }
    }
    let mut precision = BETA_PRECISION;
    loop {
        let certified = |size: usize| master_rhs(gamma, alpha, &beta, size, precision).lo >= half;
        // the right-hand side increases with the size: gallop, then bisect
        let mut hi = 1usize;
        while !certified(hi) {
            hi *= 2;
            if hi > 1 << 20 {
                return Err(Error::Params("no certifiable M below 2^20".into()));
            }
        }
        let mut lo = hi / 2;
        while lo + 1 < hi {
            let mid = (lo + hi) / 2;
            if certified(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let size = if hi == 1 || lo == 0 { 1 } else { hi };
        let rhs = master_rhs(gamma, alpha, &beta, size, precision);
        let below = (size > 1).then(|| master_rhs(gamma, alpha, &beta, size - 1, precision));
        if below.as_ref().is_some_and(|b| b.hi >= half) {
            // M - 1 is neither certified nor refuted: sharpen
            precision *= 2;
            if precision > 2048 {
                return Err(Error::Params("cannot separate M from M-1".into()));
            }
            continue;
        }
        return Ok(BetaM { beta, m: size, rhs_at_m: rhs, rhs_below: below });
    }
}

/// Weights `z = 2^-ceil(beta k)` for a clause of size `k`.
pub fn dyadic_weights(beta: &Rational, alpha: Rational) -> FamilyParams {
    let beta = beta.clone();
    FamilyParams::new(alpha, move |e: &Event| {
        let k = Rational::from_integer(e.vbl().len().into());
        let exp = rational::ceil_nat(&(&beta * k)).expect("small exponent");
        rational::half_pow(exp as u32)
    })
}

/// Strings dropped while building a family, with the reason.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub string: String,
    pub reason: String,
}

/// One clause per kept string and starting position, forbidding exactly that
/// string. Events are ordered by end position, then start, then string.
#[derive(Clone, Debug)]
pub struct ForbiddenSubstrings {
    strings: Vec<Vec<u32>>,
    pub dropped: Vec<Diagnostic>,
    pub gamma: Rational,
    pub min_len: usize,
}

fn parse_bits(s: &str) -> Option<Vec<u32>> {
    s.chars()
        .map(|c| match c {
            '0' => Some(0),
            '1' => Some(1),
            _ => None,
        })
        .collect()
}

fn render_bits(b: &[u32]) -> String {
    b.iter().map(|x| if *x == 1 { '1' } else { '0' }).collect()
}

pub fn forbidden_substrings_to_family(
    forbidden: &[String],
    gamma: &Rational,
    min_len: usize,
) -> Result<ForbiddenSubstrings> {
    let mut kept: Vec<Vec<u32>> = Vec::new();
    let mut dropped = Vec::new();
    for s in forbidden {
        let s = s.trim();
        let Some(bits) = parse_bits(s).filter(|b| !b.is_empty()) else {
            return Err(Error::Family(format!("{s:?} is not a non-empty binary string")));
        };
        if bits.len() < min_len {
            dropped.push(Diagnostic { string: s.to_string(), reason: format!("shorter than M = {min_len}") });
        } else if !kept.contains(&bits) {
            kept.push(bits);
        }
    }
    let mut by_len: BTreeMap<usize, u64> = BTreeMap::new();
    for f in &kept {
        *by_len.entry(f.len()).or_insert(0) += 1;
    }
    if let Some((len, count)) = by_len.iter().find(|(len, c)| !within_power(**c, **len, gamma)) {
        return Err(Error::Family(format!("{count} strings of length {len} exceed 2^(gamma {len})")));
    }
    // within one end position, a later start means a shorter string
    kept.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    Ok(ForbiddenSubstrings { strings: kept, dropped, gamma: gamma.clone(), min_len })
}

impl ForbiddenSubstrings {
    pub fn strings(&self) -> &[Vec<u32>] {
        &self.strings
    }

    pub fn max_len(&self) -> usize {
        self.strings.first().map_or(0, Vec::len)
    }

    /// Number of events whose variables lie in `0..len`.
    pub fn events_within(&self, len: usize) -> usize {
        self.strings.iter().map(|f| (len + 1).saturating_sub(f.len())).sum()
    }

    /// Index of the event for string number `s` at `position`.
    pub fn index_of(&self, s: usize, position: usize) -> usize {
        let end = position + self.strings[s].len();
        self.events_within(end - 1) + self.strings[..s].iter().filter(|f| f.len() <= end).count()
    }

    /// `(string number, position)` of event `index`.
    pub fn locate(&self, index: usize) -> Option<(usize, usize)> {
        if self.strings.is_empty() {
            return None;
        }
        let (mut lo, mut hi) = (0usize, index + self.max_len() + 1);
        // smallest end with events_within(end) > index
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.events_within(mid) > index {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        let end = lo;
        let mut rank = index - self.events_within(end - 1);
        for (s, f) in self.strings.iter().enumerate() {
            if f.len() <= end {
                if rank == 0 {
                    return Some((s, end - f.len()));
                }
                rank -= 1;
            }
        }
        None
    }

    /// Finite system over variables `0..len` with every event inside.
    pub fn system_within(&self, len: usize) -> Result<ConstraintSystem> {
        let k = self.events_within(len);
        let events = (0..k)
            .map(|j| EventFamily::event(self, j).map(|e| e.expect("inside the family")))
            .collect::<Result<Vec<_>>>()?;
        ConstraintSystem::new((0..len).map(VariableSpec::bit).collect(), events)
    }
}

impl EventFamily for ForbiddenSubstrings {
    fn variable(&self, index: usize) -> Result<VariableSpec> {
        Ok(VariableSpec::bit(index))
    }

    fn event(&self, index: usize) -> Result<Option<Event>> {
        let Some((s, p)) = self.locate(index) else { return Ok(None) };
        let f = &self.strings[s];
        Event::new(index, (p..p + f.len()).collect(), vec![f.clone()]).map(Some)
    }

    fn events_with_var(&self, var: usize) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        for (s, f) in self.strings.iter().enumerate() {
            for p in (var + 1).saturating_sub(f.len())..=var {
                out.push(self.index_of(s, p));
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    fn event_count(&self) -> Option<usize> {
        self.strings.is_empty().then_some(0)
    }
}

/// Independent oracle: first occurrence of a forbidden string of length at
/// least `min_len` in `bits`, by direct comparison.
pub fn scan_forbidden(bits: &[u32], forbidden: &[String], min_len: usize) -> Option<(usize, String)> {
    for s in forbidden {
        let s = s.trim();
        if s.len() < min_len || s.len() > bits.len() {
            continue;
        }
        let f = parse_bits(s)?;
        if let Some(p) = bits.windows(f.len()).position(|w| w == f.as_slice()) {
            return Some((p, s.to_string()));
        }
    }
    None
}

#[derive(Clone, Debug)]
pub enum AvoidMode {
    Empirical { seed: u64 },
    Exact { bit_guard: usize },
}

#[derive(Clone, Debug)]
pub struct AvoidOutcome {
    pub bits: Vec<u32>,
    pub beta_m: BetaM,
    pub dropped: Vec<Diagnostic>,
    pub kept: usize,
    pub events: usize,
    pub resamples: Option<usize>,
    /// The strengthened condition on the events inside the prefix.
    pub condition: Option<ConditionReport>,
}

/// A prefix of length `len` containing no string of `forbidden` of length at
/// least `M`, where `M` comes from [`compute_beta_m`].
pub fn build_avoiding_sequence(
    forbidden: &[String],
    gamma: &Rational,
    alpha: &Rational,
    len: usize,
    mode: &AvoidMode,
) -> Result<AvoidOutcome> {
    let beta_m = compute_beta_m(gamma, alpha)?;
    let family = forbidden_substrings_to_family(forbidden, gamma, beta_m.m)?;
    let weights = dyadic_weights(&beta_m.beta, alpha.clone());
    let system = family.system_within(len)?;
    let condition = if system.num_events() > 0 {
        Some(check_computable_lll(&system, &weights.to_lll(system.events())?)?)
    } else {
        None
    };
    let (bits, resamples) = match mode {
        AvoidMode::Empirical { seed } => {
            let max_steps = weights.to_lll(system.events())?.default_max_steps()?.max(1000);
            let r = run_finite(&system, &mut Tape::seeded(*seed), max_steps)?;
            if r.status != RunStatus::Satisfied {
                return Err(Error::Budget(format!("no avoiding prefix within {max_steps} resamplings")));
            }
            (r.assignment, Some(r.resample_count))
        }
        AvoidMode::Exact { bit_guard } => {
            let out = compute_assignment_prefix(
                &system,
                &weights,
                len,
                &PrefixMode::Exact { events: None, bit_guard: *bit_guard },
            )?;
            (out.values, None)
        }
    };
    if let Some((p, s)) = scan_forbidden(&bits, forbidden, beta_m.m) {
        return Err(Error::Verification(format!("forbidden string {s} found at position {p}")));
    }
    Ok(AvoidOutcome {
        bits,
        beta_m,
        dropped: family.dropped.clone(),
        kept: family.strings().len(),
        events: system.num_events(),
        resamples,
        condition,
    })
}

/// `{0^m, 1^m : lo <= m <= hi}`.
pub fn runs_family(lo: usize, hi: usize) -> Vec<String> {
    (lo..=hi).flat_map(|m| ["0".repeat(m), "1".repeat(m)]).collect()
}

/// Renders bits as a `0`/`1` string.
pub fn bit_string(bits: &[u32]) -> String {
    render_bits(bits)
}
