//! The fireworks game and its use against computable upper bounds.
//!
//! The buyer picks `k` uniformly in `0..n`, tests `k` fireworks and takes the
//! next one home. Against a budgeted program for `f`, "testing" `f(u)` means
//! writing zeros into `g` while `f(u)` runs, and "taking" it means waiting for
//! `f(u)` and writing `f(u) + 1`.

use std::collections::BTreeSet;
use std::fmt;

use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rational::{self, Rational};
use crate::tape::{Sampler, Tape};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GameConfig {
    pub n: u64,
    /// Good fireworks sold before the bad one; `None` when all are good.
    pub seller_k: Option<u64>,
}

impl GameConfig {
    pub fn new(n: u64, seller_k: Option<u64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Params("n must be at least 1".into()));
        }
        Ok(GameConfig { n, seller_k })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Win,
    Lose,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Win => "win",
            Outcome::Lose => "lose",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GameResult {
    pub outcome: Outcome,
    pub k: u64,
    pub tests_made: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Action {
    Test { good: bool },
    Take,
}

/// What the seller sees when the buyer's number is `k`.
pub fn trace(config: &GameConfig, k: u64) -> Vec<Action> {
    let mut out = Vec::new();
    for i in 0..k {
        let good = config.seller_k != Some(i);
        out.push(Action::Test { good });
        if !good {
            return out;
        }
    }
    out.push(Action::Take);
    out
}

pub fn play_with_k(config: &GameConfig, k: u64) -> GameResult {
    let actions = trace(config, k);
    let tests_made = actions.iter().filter(|a| matches!(a, Action::Test { .. })).count() as u64;
    let outcome =
        if actions.last() == Some(&Action::Take) && config.seller_k == Some(k) { Outcome::Lose } else { Outcome::Win };
    GameResult { outcome, k, tests_made }
}

fn uniform_sampler(n: u64) -> Sampler {
    Sampler::new(&vec![rational::q(1, n as i64); n as usize])
}

/// One game with `k` drawn from stream 0 of the tape.
pub fn play_game(config: &GameConfig, tape: &mut Tape) -> Result<GameResult> {
    let k = tape.draw(0, &uniform_sampler(config.n))? as u64;
    Ok(play_with_k(config, k))
}

/// Probability of losing against a fixed seller, summed over every `k`.
pub fn loss_probability_exact(config: &GameConfig) -> Rational {
    let losses = (0..config.n).filter(|&k| play_with_k(config, k).outcome == Outcome::Lose).count();
    rational::q(losses as i64, config.n as i64)
}

/// Worst-case win probability over sellers with `K` in `0..2n` or all good.
pub fn win_probability_exact(n: u64) -> Result<Rational> {
    let worst = (0..2 * n)
        .map(Some)
        .chain([None])
        .map(|s| GameConfig::new(n, s).map(|c| loss_probability_exact(&c)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .max()
        .expect("non-empty sweep");
    Ok(Rational::one() - worst)
}

/// Probability of taking firework `t` home when every firework is good,
/// under the uniform choice of `k`.
pub fn take_time_uniform(n: u64) -> Vec<Rational> {
    (0..n).map(|_| rational::q(1, n as i64)).collect()
}

/// The same distribution when firework `t` is taken with probability
/// `1/(n-t)` after `t` good tests.
pub fn take_time_sequential(n: u64) -> Vec<Rational> {
    let mut reach = Rational::one();
    let mut out = Vec::with_capacity(n as usize);
    for t in 0..n {
        let take = rational::q(1, (n - t) as i64);
        out.push(&reach * &take);
        reach *= Rational::one() - take;
    }
    out
}

/// A program for `f`, run with a step budget.
pub trait FnOracle: Send + Sync {
    fn name(&self) -> String;

    /// `f(i)` if its computation halts within `budget` steps. Once a value is
    /// returned for some budget it is returned for every larger one.
    fn eval(&self, i: u64, budget: u64) -> Option<u64>;
}

/// The oracles available from the command line. Computing `f(i)` costs
/// `i + 1` steps except for constants, which cost one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Builtin {
    Constant(u64),
    Identity,
    /// The identity, diverging on the listed inputs.
    DivergeAt(BTreeSet<u64>),
}

impl Builtin {
    /// `constant:C`, `identity` or `diverge-at:I,J,...`.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = || Error::Params(format!("unknown oracle {text:?}; use constant:C, identity or diverge-at:I,J"));
        let (name, arg) = text.split_once(':').unwrap_or((text, ""));
        match name.trim() {
            "identity" => Ok(Builtin::Identity),
            "constant" => arg.trim().parse().map(Builtin::Constant).map_err(|_| bad()),
            "diverge-at" => arg
                .split(',')
                .map(|s| s.trim().parse::<u64>())
                .collect::<std::result::Result<BTreeSet<_>, _>>()
                .map(Builtin::DivergeAt)
                .map_err(|_| bad()),
            _ => Err(bad()),
        }
    }
}

impl FnOracle for Builtin {
    fn name(&self) -> String {
        match self {
            Builtin::Constant(c) => format!("constant:{c}"),
            Builtin::Identity => "identity".into(),
            Builtin::DivergeAt(s) => {
                let list: Vec<String> = s.iter().map(u64::to_string).collect();
                format!("diverge-at:{}", list.join(","))
            }
        }
    }

    fn eval(&self, i: u64, budget: u64) -> Option<u64> {
        match self {
            Builtin::Constant(c) => (budget >= 1).then_some(*c),
            Builtin::Identity => (budget > i).then_some(i),
            Builtin::DivergeAt(s) => (!s.contains(&i) && budget > i).then_some(i),
        }
    }
}

impl<F: FnOracle + ?Sized> FnOracle for &F {
    fn name(&self) -> String {
        (**self).name()
    }

    fn eval(&self, i: u64, budget: u64) -> Option<u64> {
        (**self).eval(i, budget)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum BeatStatus {
    /// Testing `f(position)`, zeros are being written.
    Testing { position: u64, tests: u64 },
    /// Waiting for `f(position)` to halt before writing `f(position) + 1`.
    Taking { position: u64 },
    /// `g(position) = f(position) + 1`; later values are zeros.
    Beaten { position: u64 },
}

/// The protocol for one `k`, advanced one step at a time.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BeatState {
    pub k: u64,
    pub g: Vec<u64>,
    pub status: BeatStatus,
    /// Steps spent on the current computation of `f`.
    running: u64,
    pub ticks: u64,
}

impl BeatState {
    pub fn new(k: u64) -> Self {
        let status =
            if k == 0 { BeatStatus::Taking { position: 0 } } else { BeatStatus::Testing { position: 0, tests: 0 } };
        BeatState { k, g: Vec::new(), status, running: 0, ticks: 0 }
    }

    pub fn advance(&mut self, f: &dyn FnOracle, ticks: u64) {
        for _ in 0..ticks {
            self.tick(f);
        }
    }

    fn tick(&mut self, f: &dyn FnOracle) {
        self.ticks += 1;
        match self.status {
            BeatStatus::Testing { position, tests } => {
                self.g.push(0);
                self.running += 1;
                if f.eval(position, self.running).is_some() {
                    self.running = 0;
                    let next = self.g.len() as u64;
                    self.status = if tests + 1 == self.k {
                        BeatStatus::Taking { position: next }
                    } else {
                        BeatStatus::Testing { position: next, tests: tests + 1 }
                    };
                }
            }
            BeatStatus::Taking { position } => {
                self.running += 1;
                if let Some(v) = f.eval(position, self.running) {
                    self.g.push(v + 1);
                    self.status = BeatStatus::Beaten { position };
                }
            }
            BeatStatus::Beaten { .. } => self.g.push(0),
        }
    }

    pub fn beaten(&self) -> bool {
        matches!(self.status, BeatStatus::Beaten { .. })
    }
}

/// Reduces `epsilon` to `1/n` with `n = ceil(1/epsilon)`.
pub fn reciprocal(epsilon: &Rational) -> Result<u64> {
    if epsilon <= &Rational::zero() || epsilon > &Rational::one() {
        return Err(Error::Params("epsilon must lie in (0,1]".into()));
    }
    rational::ceil_nat(&epsilon.recip())
}

/// Runs the protocol for `ticks` steps with `k` fixed.
pub fn beat_function_with_k(f: &dyn FnOracle, k: u64, ticks: u64) -> BeatState {
    let mut s = BeatState::new(k);
    s.advance(f, ticks);
    s
}

/// Draws `k` uniformly in `0..ceil(1/epsilon)` from stream 0 and runs the
/// protocol.
pub fn beat_function(f: &dyn FnOracle, epsilon: &Rational, tape: &mut Tape, ticks: u64) -> Result<BeatState> {
    let n = reciprocal(epsilon)?;
    let k = tape.draw(0, &uniform_sampler(n))? as u64;
    Ok(beat_function_with_k(f, k, ticks))
}

/// Exact probability over the `n` choices of `k` that `g` beats `f` within
/// `ticks` steps.
pub fn beat_probability_exact(f: &dyn FnOracle, n: u64, ticks: u64) -> Rational {
    let wins = (0..n).into_par_iter().filter(|&k| beat_function_with_k(f, k, ticks).beaten()).count();
    rational::q(wins as i64, n as i64)
}

/// `g` as a bit sequence: a one, then `g(k)` zeros, for every `k`.
pub fn to_bits(g: &[u64]) -> Vec<u32> {
    let mut out = Vec::new();
    for &v in g {
        out.push(1);
        out.extend(std::iter::repeat_n(0, v as usize));
    }
    out
}

/// Some `k` for which the gap after the `k`-th one in `bits` exceeds
/// `f(k)` as computed within `budget` steps.
pub fn gap_exceeds(bits: &[u32], f: &dyn FnOracle, budget: u64) -> Option<u64> {
    let ones: Vec<usize> = bits.iter().enumerate().filter(|(_, b)| **b == 1).map(|(i, _)| i).collect();
    ones.windows(2).enumerate().find_map(|(k, w)| {
        let gap = (w[1] - w[0] - 1) as u64;
        f.eval(k as u64, budget).filter(|&v| gap > v).map(|_| k as u64)
    })
}

pub fn cantor_pair(i: u64, j: u64) -> u64 {
    (i + j) * (i + j + 1) / 2 + j
}

pub fn cantor_unpair(x: u64) -> (u64, u64) {
    let w = (((8 * x as u128 + 1) as f64).sqrt() as u64).saturating_sub(1) / 2;
    // correct the float estimate
    let w = (w.saturating_sub(2)..w + 3).rev().find(|w| w * (w + 1) / 2 <= x).expect("triangle root");
    let j = x - w * (w + 1) / 2;
    (w - j, j)
}

/// Rows of `g`: row `i` plays against oracle `i` with `n_i = n 2^i`.
#[derive(Clone, Debug)]
pub struct BeatMany {
    pub n: Vec<u64>,
    pub rows: Vec<BeatState>,
    pub rounds: u32,
}

impl BeatMany {
    /// `g(x)` when row `i` of `x = pair(i, j)` has reached column `j`; rows
    /// without an oracle are zero.
    pub fn value(&self, x: u64) -> Option<u64> {
        let (i, j) = cantor_unpair(x);
        match self.rows.get(i as usize) {
            None => Some(0),
            Some(r) => r.g.get(j as usize).copied(),
        }
    }

    /// Longest prefix of `g` on which every value is known.
    pub fn defined_prefix(&self) -> Vec<u64> {
        (0..).map_while(|x| self.value(x)).take(1 << 20).collect()
    }

    pub fn all_beaten(&self) -> bool {
        self.rows.iter().all(BeatState::beaten)
    }
}

/// Round `r` gives every row `2^r` more steps; rows are independent, so `ks`
/// fully determines the result.
pub fn beat_many_with_ks(oracles: &[&dyn FnOracle], n: u64, ks: &[u64], rounds: u32) -> BeatMany {
    let mut rows: Vec<BeatState> = ks.iter().map(|&k| BeatState::new(k)).collect();
    for r in 0..rounds {
        for (row, f) in rows.iter_mut().zip(oracles) {
            row.advance(*f, 1u64 << r);
        }
    }
    let n = (0..oracles.len()).map(|i| n << i).collect();
    BeatMany { n, rows, rounds }
}

/// Draws `k_i` uniformly in `0..n_i` from stream `i` of the tape.
pub fn beat_many(oracles: &[&dyn FnOracle], epsilon: &Rational, tape: &mut Tape, rounds: u32) -> Result<BeatMany> {
    let n = reciprocal(epsilon)?;
    let ks = (0..oracles.len())
        .map(|i| {
            let n_i = n
                .checked_shl(i as u32)
                .filter(|v| v >> i == n)
                .ok_or_else(|| Error::Budget("row size overflows".into()))?;
            tape.draw(i, &uniform_sampler(n_i)).map(|k| k as u64)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(beat_many_with_ks(oracles, n, &ks, rounds))
}

/// Exact probability, over every combination of `k_i`, that every row beats
/// its oracle within the schedule.
pub fn beat_many_probability_exact(oracles: &[&dyn FnOracle], n: u64, rounds: u32) -> Result<Rational> {
    let sizes: Vec<u64> = (0..oracles.len()).map(|i| n << i).collect();
    let total: u64 = sizes.iter().product();
    if total > 1 << 20 {
        return Err(Error::Budget(format!("{total} combinations of k")));
    }
    let wins = (0..total)
        .into_par_iter()
        .filter(|&code| {
            let mut rest = code;
            let ks: Vec<u64> = sizes
                .iter()
                .map(|s| {
                    let k = rest % s;
                    rest /= s;
                    k
                })
                .collect();
            beat_many_with_ks(oracles, n, &ks, rounds).all_beaten()
        })
        .count();
    Ok(Rational::new((wins as u64).into(), total.into()))
}

impl fmt::Display for BeatState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let shown: Vec<String> = self.g.iter().take(32).map(u64::to_string).collect();
        let more = if self.g.len() > 32 { ",..." } else { "" };
        write!(f, "k={} ticks={} g=[{}{}]", self.k, self.ticks, shown.join(","), more)
    }
}

/// `1 - prod (1 - 1/n_i)`, the error allowed by the per-row bounds.
pub fn union_error(n: u64, rows: usize) -> Rational {
    let keep: Rational = (0..rows).map(|i| Rational::one() - rational::q(1, (n << i) as i64)).product();
    Rational::one() - keep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q;

    #[test]
    fn strategy_cases() {
        let one = GameConfig::new(1, Some(0)).unwrap();
        assert_eq!(play_with_k(&one, 0).outcome, Outcome::Lose);
        let one_good = GameConfig::new(1, Some(3)).unwrap();
        assert_eq!(play_with_k(&one_good, 0).outcome, Outcome::Win);
        let c = GameConfig::new(10, Some(4)).unwrap();
        assert_eq!(play_with_k(&c, 7), GameResult { outcome: Outcome::Win, k: 7, tests_made: 5 });
        assert_eq!(play_with_k(&c, 4).outcome, Outcome::Lose);
        assert_eq!(play_with_k(&c, 2).tests_made, 2);
        let beyond = GameConfig::new(10, Some(10)).unwrap();
        assert!((0..10).all(|k| play_with_k(&beyond, k).outcome == Outcome::Win));
        assert!(GameConfig::new(0, None).is_err());
    }

    #[test]
    fn exact_win_probabilities() {
        assert_eq!(win_probability_exact(100).unwrap(), q(99, 100));
        assert_eq!(win_probability_exact(1).unwrap(), q(0, 1));
        assert_eq!(win_probability_exact(2).unwrap(), q(1, 2));
        for k in 0..100 {
            assert_eq!(loss_probability_exact(&GameConfig::new(100, Some(k)).unwrap()), q(1, 100));
        }
    }

    #[test]
    fn seller_sees_nothing_before_the_take() {
        let c = GameConfig::new(20, None).unwrap();
        for t in 0..20u64 {
            let prefixes: BTreeSet<Vec<Action>> = (t + 1..20).map(|k| trace(&c, k)[..t as usize].to_vec()).collect();
            assert!(prefixes.len() <= 1);
        }
    }

    #[test]
    fn sequential_description_matches() {
        for n in 1..=100 {
            assert_eq!(take_time_sequential(n), take_time_uniform(n));
        }
    }

    #[test]
    fn protocol_traces() {
        let five = Builtin::Constant(5);
        let s = beat_function_with_k(&five, 0, 10);
        assert_eq!(s.g[0], 6);
        assert!(s.g[1..].iter().all(|&v| v == 0));
        let stuck = Builtin::DivergeAt([0].into());
        for k in 1..5 {
            let s = beat_function_with_k(&stuck, k, 50);
            assert_eq!(s.g, vec![0; 50]);
            assert!(!s.beaten());
        }
        let id = Builtin::Identity;
        let s = beat_function_with_k(&id, 2, 10);
        // f(0) costs one step, f(1) two steps, then f(3) is taken
        assert_eq!(&s.g[..4], &[0, 0, 0, 4]);
        assert_eq!(s.status, BeatStatus::Beaten { position: 3 });
    }

    #[test]
    fn beating_identity_with_four_choices() {
        let p = beat_probability_exact(&Builtin::Identity, 4, 200);
        assert!(p >= q(3, 4));
        for k in 0..4 {
            let s = beat_function_with_k(&Builtin::Identity, k, 200);
            let bits = to_bits(&s.g);
            assert!(gap_exceeds(&bits, &Builtin::Identity, 1000).is_some());
        }
    }

    #[test]
    fn pairing_roundtrip() {
        for i in 0..40 {
            for j in 0..40 {
                assert_eq!(cantor_unpair(cantor_pair(i, j)), (i, j));
            }
        }
        assert_eq!(cantor_unpair(0), (0, 0));
    }

    #[test]
    fn rows() {
        let id = Builtin::Identity;
        let c = Builtin::Constant(3);
        let none = beat_many(&[], &q(1, 2), &mut Tape::seeded(1), 5).unwrap();
        assert!((0..100).all(|x| none.value(x) == Some(0)));
        // one row is the single protocol with doubling steps
        let single = beat_many_with_ks(&[&id], 4, &[2], 6);
        assert_eq!(single.rows[0], beat_function_with_k(&id, 2, 63));
        let p = beat_many_probability_exact(&[&id, &c], 2, 8).unwrap();
        assert!(p >= (Rational::one() - q(1, 2)) * (Rational::one() - q(1, 4)));
        assert!(Rational::one() - &p <= union_error(2, 2));
    }
}
