//! Nested switching-function integrals of the Dyson expansion.
//!
//! The coefficient of a word `α_1 … α_n` is
//! `∫_0^1 ds_n f_{α_n}(s_n) ∫_0^{s_n} ds_{n-1} f_{α_{n-1}} ⋯ ∫_0^{s_2} ds_1 f_{α_1}(s_1)`,
//! with `α_1 = letters[0]` innermost. Every switching function is piecewise
//! ±1 on the grid of pulse times, so each stage is a piecewise polynomial
//! antiderivative evaluated in one of two arithmetics:
//!
//! * [`BigRational`]: exact, available when every pulse time is rational
//!   (orders 0, 1 and 2).
//! * [`TwoFloat`]: double-double, about 31 significant digits, for any order.
//!
//! ```
//! use ddbound::dyson::{word_integral, DysonGrid, Word};
//! use num_rational::BigRational;
//!
//! let grid = DysonGrid::<BigRational>::qdd(2, 2).unwrap();
//! let z: Word = "z".parse().unwrap();
//! assert_eq!(word_integral(&z, &grid, 6).unwrap(), BigRational::from_integer(0.into()));
//! let zero3: Word = "000".parse().unwrap();
//! assert_eq!(word_integral(&zero3, &grid, 6).unwrap(), BigRational::new(1.into(), 6.into()));
//! ```

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::pauli::Pauli;
use crate::qdd_bounds::{channel_of_class, class_of_parity, decoupling_orders, DecouplingOrders, OrderMode};
use crate::{Error, Result};

/// Default limit on word length.
pub const DEFAULT_MAX_DEPTH: usize = 6;

/// Arithmetic for the piecewise integration.
pub trait Scalar:
    Clone + PartialEq + PartialOrd + fmt::Debug
    + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn div_int(&self, k: u64) -> Self;
    fn to_f64(&self) -> f64;
    /// `sin²(jπ / (2n + 2))`.
    fn udd_offset(j: usize, n: usize) -> Result<Self>;
}

impl Scalar for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }

    fn one() -> Self {
        One::one()
    }

    fn div_int(&self, k: u64) -> Self {
        self / BigRational::from_integer(BigInt::from(k))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn udd_offset(j: usize, n: usize) -> Result<Self> {
        let r = |a: i64, b: i64| BigRational::new(a.into(), b.into());
        if j == 0 {
            return Ok(r(0, 1));
        }
        if j == n + 1 {
            return Ok(r(1, 1));
        }
        match (n, j) {
            (1, 1) => Ok(r(1, 2)),
            (2, 1) => Ok(r(1, 4)),
            (2, 2) => Ok(r(3, 4)),
            _ => Err(Error::NotRational(n)),
        }
    }
}

impl Scalar for TwoFloat {
    fn zero() -> Self {
        TwoFloat::from(0.0)
    }

    fn one() -> Self {
        TwoFloat::from(1.0)
    }

    fn div_int(&self, k: u64) -> Self {
        *self / k as f64
    }

    fn to_f64(&self) -> f64 {
        self.hi() + self.lo()
    }

    fn udd_offset(j: usize, n: usize) -> Result<Self> {
        if j == 0 {
            return Ok(<Self as Scalar>::zero());
        }
        if j == n + 1 {
            return Ok(<Self as Scalar>::one());
        }
        let theta = twofloat::consts::PI * j as f64 / (2 * n + 2) as f64;
        let s = dd_sin(theta);
        Ok(s * s)
    }
}

/// Taylor series for `sin x`, `0 ≤ x ≤ π/2`, to double-double accuracy (the
/// library's own `sin` stops near 1e-23).
fn dd_sin(x: TwoFloat) -> TwoFloat {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    for k in 1..40u32 {
        term = -(term * x2) / f64::from((2 * k) * (2 * k + 1));
        sum += term;
        if term.hi().abs() < 1e-36 {
            break;
        }
    }
    sum
}

/// An ordered word over `{0, x, y, z}`; `letters[0]` is integrated first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Word(pub Vec<Pauli>);

impl Word {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Letter-count parities `(px, py, pz)`.
    pub fn parities(&self) -> (u8, u8, u8) {
        let count = |p: Pauli| (self.0.iter().filter(|&&l| l == p).count() % 2) as u8;
        (count(Pauli::X), count(Pauli::Y), count(Pauli::Z))
    }

    pub fn channel(&self) -> Pauli {
        word_channel(self)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.0 {
            write!(f, "{}", p.symbol())?;
        }
        Ok(())
    }
}

impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .filter(|c| !matches!(c, ',' | ' ' | '(' | ')'))
            .map(|c| Pauli::from_symbol(c).ok_or_else(|| Error::invalid(format!("bad letter {c:?} in word {s:?}"))))
            .collect::<Result<Vec<_>>>()
            .map(Word)
    }
}

/// Error channel whose operator carries this word: odd letter counts select
/// a Pauli by parity; all-even and all-odd map to the identity.
pub fn word_channel(word: &Word) -> Pauli {
    let (px, py, pz) = word.parities();
    channel_of_class(class_of_parity(px, py, pz))
}

/// Switching functions of one QDD sequence on the union grid of its pulse
/// times.
#[derive(Clone, Debug)]
pub struct DysonGrid<S> {
    /// `0 = b_0 < b_1 < … < b_K = 1`.
    breakpoints: Vec<S>,
    /// `signs[i][p]`: value of `f_p` on `[b_i, b_{i+1}]`, indexed by
    /// [`Pauli::index`].
    signs: Vec<[i8; 4]>,
}

impl<S: Scalar> DysonGrid<S> {
    /// Grid for `QDD(n1, n2)`, with pulse times evaluated in `S`.
    pub fn qdd(n1: usize, n2: usize) -> Result<Self> {
        let outer = (0..=n2 + 1)
            .map(|j| S::udd_offset(j, n2))
            .collect::<Result<Vec<_>>>()?;
        let inner_count = n1 + n1 % 2;
        let inner = (1..=inner_count)
            .map(|k| S::udd_offset(k, n1))
            .collect::<Result<Vec<_>>>()?;
        let mut x_times = Vec::new();
        for j in 1..=(n2 + n2 % 2) {
            x_times.push(outer[j].clone());
        }
        let mut z_times = Vec::new();
        for j in 1..=n2 + 1 {
            let (a, b) = (&outer[j - 1], &outer[j]);
            for mu in &inner {
                if *mu == S::one() {
                    z_times.push(b.clone());
                } else {
                    z_times.push(a.clone() + (b.clone() - a.clone()) * mu.clone());
                }
            }
        }
        Ok(Self::from_flips(&x_times, &z_times))
    }

    /// Grid from the times of x pulses (which flip `f_z`) and z pulses (which
    /// flip `f_x`). Times outside `(0, 1)` do not affect the profiles.
    pub fn from_flips(x_times: &[S], z_times: &[S]) -> Self {
        let zero = S::zero();
        let one = S::one();
        let mut events: Vec<(S, bool)> = x_times
            .iter()
            .map(|t| (t.clone(), true))
            .chain(z_times.iter().map(|t| (t.clone(), false)))
            .filter(|(t, _)| *t > zero && *t < one)
            .collect();
        events.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("pulse times are comparable"));

        let mut breakpoints = vec![zero];
        let mut signs = vec![[1i8; 4]];
        let mut current = [1i8; 4];
        let mut i = 0;
        while i < events.len() {
            let t = events[i].0.clone();
            let (mut x_flip, mut z_flip) = (false, false);
            while i < events.len() && events[i].0 == t {
                if events[i].1 {
                    x_flip = !x_flip;
                } else {
                    z_flip = !z_flip;
                }
                i += 1;
            }
            if z_flip {
                current[Pauli::X.index()] *= -1;
            }
            if x_flip {
                current[Pauli::Z.index()] *= -1;
            }
            current[Pauli::Y.index()] = current[Pauli::X.index()] * current[Pauli::Z.index()];
            breakpoints.push(t);
            signs.push(current);
        }
        breakpoints.push(one);
        DysonGrid { breakpoints, signs }
    }

    pub fn intervals(&self) -> usize {
        self.signs.len()
    }

    pub fn breakpoints(&self) -> &[S] {
        &self.breakpoints
    }

    /// Value of `f_p` on interval `i`.
    pub fn sign(&self, i: usize, p: Pauli) -> i8 {
        self.signs[i][p.index()]
    }

    fn widths(&self) -> Vec<S> {
        self.breakpoints
            .windows(2)
            .map(|w| w[1].clone() - w[0].clone())
            .collect()
    }
}

/// Piecewise polynomial on a grid, each piece in the local variable
/// `u = s − b_i`.
#[derive(Clone, Debug)]
struct PiecewisePoly<S> {
    pieces: Vec<Vec<S>>,
}

impl<S: Scalar> PiecewisePoly<S> {
    fn constant_one(intervals: usize) -> Self {
        PiecewisePoly { pieces: vec![vec![S::one()]; intervals] }
    }

    /// `G(s) = ∫_0^s f_p g`, continuous across breakpoints; also returns `G(1)`.
    fn integrate(&self, grid: &DysonGrid<S>, widths: &[S], p: Pauli) -> (Self, S) {
        let mut start = S::zero();
        let mut pieces = Vec::with_capacity(self.pieces.len());
        for (i, piece) in self.pieces.iter().enumerate() {
            let negative = grid.sign(i, p) < 0;
            let mut out = Vec::with_capacity(piece.len() + 1);
            out.push(start.clone());
            for (k, c) in piece.iter().enumerate() {
                let term = c.div_int(k as u64 + 1);
                out.push(if negative { -term } else { term });
            }
            start = horner(&out, &widths[i]);
            pieces.push(out);
        }
        (PiecewisePoly { pieces }, start)
    }
}

fn horner<S: Scalar>(coeffs: &[S], u: &S) -> S {
    coeffs
        .iter()
        .rev()
        .fold(S::zero(), |acc, c| acc * u.clone() + c.clone())
}

fn check_depth(n: usize, max_depth: usize) -> Result<()> {
    if n > max_depth {
        Err(Error::DepthExceeded { requested: n, max_depth })
    } else {
        Ok(())
    }
}

/// The nested integral of `word` against the switching functions of `grid`.
pub fn word_integral<S: Scalar>(word: &Word, grid: &DysonGrid<S>, max_depth: usize) -> Result<S> {
    if word.is_empty() {
        return Err(Error::invalid("word must contain at least one letter"));
    }
    check_depth(word.len(), max_depth)?;
    let widths = grid.widths();
    let mut g = PiecewisePoly::constant_one(grid.intervals());
    let mut value = S::zero();
    for &p in &word.0 {
        let (next, end) = g.integrate(grid, &widths, p);
        g = next;
        value = end;
    }
    Ok(value)
}

/// Calls `visit(word, integral)` for every word of length `1..=n_max`,
/// sharing the inner integrals between words with a common prefix.
pub fn for_each_word<S: Scalar>(
    grid: &DysonGrid<S>,
    n_max: usize,
    max_depth: usize,
    mut visit: impl FnMut(&[Pauli], &S),
) -> Result<()> {
    check_depth(n_max, max_depth)?;
    let widths = grid.widths();
    let mut letters = Vec::with_capacity(n_max);
    fn descend<S: Scalar>(
        grid: &DysonGrid<S>,
        widths: &[S],
        g: &PiecewisePoly<S>,
        letters: &mut Vec<Pauli>,
        n_max: usize,
        visit: &mut dyn FnMut(&[Pauli], &S),
    ) {
        if letters.len() == n_max {
            return;
        }
        for p in Pauli::ALL {
            let (next, value) = g.integrate(grid, widths, p);
            letters.push(p);
            visit(letters, &value);
            descend(grid, widths, &next, letters, n_max, visit);
            letters.pop();
        }
    }
    let start = PiecewisePoly::constant_one(grid.intervals());
    descend(grid, &widths, &start, &mut letters, n_max, &mut visit);
    Ok(())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    /// Rational arithmetic; orders above 2 are rejected.
    Exact,
    /// Double-double arithmetic with a zero threshold.
    #[default]
    Extended,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Backend::Exact => "exact",
            Backend::Extended => "extended",
        }
    }

    /// Whether both orders have rational pulse times.
    pub fn exact_supported(n1: usize, n2: usize) -> bool {
        n1 <= 2 && n2 <= 2
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Backend::Exact),
            "extended" => Ok(Backend::Extended),
            other => Err(Error::invalid(format!("unknown backend {other:?} (expected exact or extended)"))),
        }
    }
}

/// Default `|integral|` below which the extended backend reports zero.
pub const EXTENDED_ZERO_THRESHOLD: f64 = 1e-25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntryStatus {
    /// Within the decoupling order and every word vanishes.
    Vanishes,
    /// Within the decoupling order but some word does not vanish.
    Violated,
    /// First order past the decoupling order, with a nonzero word found.
    Saturated,
    /// First order past the decoupling order, every word vanishes.
    Inconclusive,
    /// Beyond the first unprotected order; reported only.
    Unconstrained,
}

/// Summary of all words of one channel and length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderEntry {
    pub channel: Pauli,
    pub n: usize,
    pub words: usize,
    pub max_abs: f64,
    /// Word attaining `max_abs`, when that exceeds the zero threshold.
    pub witness: Option<String>,
    pub status: EntryStatus,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub word: String,
    pub channel: Pauli,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderReport {
    pub n1: usize,
    pub n2: usize,
    pub n_max: usize,
    pub backend: Backend,
    pub zero_threshold: f64,
    pub orders: DecouplingOrders,
    pub entries: Vec<OrderEntry>,
    pub violations: Vec<Violation>,
    pub passed: bool,
}

/// Checks every word of length `≤ n_max` on the error channels of
/// `QDD(n1, n2)` against the analytic decoupling orders.
///
/// `zero_threshold` applies to the extended backend only; exact zeros are
/// exact. Words longer than the order of their channel are summarized but
/// never fail the check.
pub fn verify_orders(
    n1: usize,
    n2: usize,
    n_max: usize,
    backend: Backend,
    zero_threshold: f64,
    max_depth: usize,
) -> Result<OrderReport> {
    if n_max == 0 {
        return Err(Error::invalid("n_max must be at least 1"));
    }
    check_depth(n_max, max_depth)?;
    let (accumulator, threshold) = match backend {
        Backend::Exact => {
            let grid = DysonGrid::<BigRational>::qdd(n1, n2)?;
            let mut acc = Accumulator::new(n_max);
            for_each_word(&grid, n_max, max_depth, |w, v| {
                acc.record(w, if v.is_zero() { 0.0 } else { Scalar::to_f64(&v.abs()) }, !v.is_zero())
            })?;
            (acc, 0.0)
        }
        Backend::Extended => {
            if !(zero_threshold.is_finite() && zero_threshold >= 0.0) {
                return Err(Error::invalid(format!("zero threshold must be >= 0, got {zero_threshold}")));
            }
            let grid = DysonGrid::<TwoFloat>::qdd(n1, n2)?;
            let mut acc = Accumulator::new(n_max);
            for_each_word(&grid, n_max, max_depth, |w, v| {
                let a = Scalar::to_f64(v).abs();
                acc.record(w, a, a > zero_threshold)
            })?;
            (acc, zero_threshold)
        }
    };
    let orders = decoupling_orders(n1, n2, OrderMode::Analytic);
    let mut entries = Vec::new();
    for channel in Pauli::ERRORS {
        let d = orders.get(channel).expect("error channel");
        for n in 1..=n_max {
            let slot = &accumulator.slots[channel.index()][n - 1];
            let nonzero = slot.witness.is_some();
            let status = if n <= d {
                if nonzero { EntryStatus::Violated } else { EntryStatus::Vanishes }
            } else if n == d + 1 {
                if nonzero { EntryStatus::Saturated } else { EntryStatus::Inconclusive }
            } else {
                EntryStatus::Unconstrained
            };
            entries.push(OrderEntry {
                channel,
                n,
                words: slot.words,
                max_abs: slot.max_abs,
                witness: slot.witness.clone(),
                status,
            });
        }
    }
    let violations: Vec<Violation> = accumulator
        .nonzero
        .into_iter()
        .filter(|v| orders.get(v.channel).is_some_and(|d| v.word.chars().count() <= d))
        .collect();
    Ok(OrderReport {
        n1,
        n2,
        n_max,
        backend,
        zero_threshold: threshold,
        orders,
        passed: violations.is_empty(),
        entries,
        violations,
    })
}

#[derive(Clone, Default)]
struct Slot {
    words: usize,
    max_abs: f64,
    witness: Option<String>,
}

struct Accumulator {
    /// `[channel index][n - 1]`.
    slots: Vec<Vec<Slot>>,
    nonzero: Vec<Violation>,
}

impl Accumulator {
    fn new(n_max: usize) -> Self {
        Accumulator { slots: vec![vec![Slot::default(); n_max]; 4], nonzero: Vec::new() }
    }

    fn record(&mut self, letters: &[Pauli], abs: f64, nonzero: bool) {
        let word = Word(letters.to_vec());
        let channel = word_channel(&word);
        let slot = &mut self.slots[channel.index()][letters.len() - 1];
        slot.words += 1;
        if nonzero && (slot.witness.is_none() || abs > slot.max_abs) {
            slot.witness = Some(word.to_string());
        }
        slot.max_abs = slot.max_abs.max(abs);
        if nonzero && channel != Pauli::I {
            self.nonzero.push(Violation { word: word.to_string(), channel, value: abs });
        }
    }
}
