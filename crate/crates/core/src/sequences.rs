//! UDD, QDD and NUDD pulse schedules and their switching functions.
//!
//! Time is the dimensionless fraction `s = t / T` of the total sequence
//! duration. Nesting levels are numbered from 1 (innermost) to `2m`
//! (outermost). Odd levels carry `σz` pulses and even levels `σx` pulses;
//! level `i` acts on qubit `(i - 1) / 2` (zero-indexed).
//!
//! Every level runs a UDD sequence of order `N_i` inside each interval of the
//! enclosing level. Odd orders get one extra pulse at the end of the
//! interval so that each level applies an even number of pulses.

use std::cmp::Ordering;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::pauli::Pauli;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Z,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Z => "z",
        }
    }

    pub fn pauli(self) -> Pauli {
        match self {
            Axis::X => Pauli::X,
            Axis::Z => Pauli::Z,
        }
    }

    /// Axis carried by nesting level `level` (1-based).
    pub fn of_level(level: usize) -> Axis {
        if level % 2 == 0 {
            Axis::X
        } else {
            Axis::Z
        }
    }
}

/// Qubit (zero-indexed) addressed by nesting level `level` (1-based).
pub fn qubit_of_level(level: usize) -> usize {
    (level - 1) / 2
}

/// An instantaneous π pulse.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseEvent {
    /// Dimensionless instant in `(0, 1]`.
    pub time: f64,
    pub axis: Axis,
    /// Zero-indexed target qubit.
    pub qubit: usize,
    /// Nesting level, 1 (innermost) to `2m`.
    pub level: usize,
}

/// How pulses that fire at the same instant are ordered.
///
/// Pulses at one instant are applied back to back, so the choice only changes
/// the global sign of the evolution operator. It is exposed so that this can
/// be checked.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieOrder {
    /// Inner (lower) levels fire before outer ones.
    #[default]
    InnerFirst,
    OuterFirst,
}

impl TieOrder {
    pub fn as_str(self) -> &'static str {
        match self {
            TieOrder::InnerFirst => "inner-first",
            TieOrder::OuterFirst => "outer-first",
        }
    }
}

impl std::str::FromStr for TieOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inner-first" => Ok(TieOrder::InnerFirst),
            "outer-first" => Ok(TieOrder::OuterFirst),
            other => Err(Error::invalid(format!(
                "unknown tie order {other:?} (expected inner-first or outer-first)"
            ))),
        }
    }
}

/// A complete nested schedule on `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    events: Vec<PulseEvent>,
    orders: Vec<usize>,
    effective_orders: Vec<usize>,
    qubit_count: usize,
    tie_order: TieOrder,
}

impl PulseSchedule {
    fn new(mut events: Vec<PulseEvent>, orders: Vec<usize>, qubit_count: usize) -> Self {
        let tie_order = TieOrder::default();
        sort_events(&mut events, tie_order);
        let effective_orders = orders.iter().map(|&n| effective_order(n)).collect();
        PulseSchedule {
            events,
            orders,
            effective_orders,
            qubit_count,
            tie_order,
        }
    }

    pub fn events(&self) -> &[PulseEvent] {
        &self.events
    }

    /// Requested UDD orders `N_i`, innermost level first.
    pub fn orders(&self) -> &[usize] {
        &self.orders
    }

    /// Pulse counts `N'_i = N_i + (N_i mod 2)` per level.
    pub fn effective_orders(&self) -> &[usize] {
        &self.effective_orders
    }

    pub fn qubit_count(&self) -> usize {
        self.qubit_count
    }

    pub fn levels(&self) -> usize {
        self.orders.len()
    }

    pub fn tie_order(&self) -> TieOrder {
        self.tie_order
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn events_at_level(&self, level: usize) -> impl Iterator<Item = &PulseEvent> + '_ {
        self.events.iter().filter(move |e| e.level == level)
    }

    pub fn with_tie_order(mut self, tie_order: TieOrder) -> Self {
        sort_events(&mut self.events, tie_order);
        self.tie_order = tie_order;
        self
    }
}

fn sort_events(events: &mut [PulseEvent], tie_order: TieOrder) {
    events.sort_by(|a, b| {
        a.time
            .partial_cmp(&b.time)
            .unwrap_or(Ordering::Equal)
            .then_with(|| match tie_order {
                TieOrder::InnerFirst => a.level.cmp(&b.level),
                TieOrder::OuterFirst => b.level.cmp(&a.level),
            })
    });
}

/// Number of pulses a UDD level of order `n` actually applies.
pub fn effective_order(n: usize) -> usize {
    n + n % 2
}

/// `sin²(jπ / (2n + 2))`.
///
/// `j = n + 1` gives exactly `1.0`; that is where the extra pulse of an odd
/// order sits.
pub fn udd_offset(j: usize, n: usize) -> f64 {
    if j == n + 1 {
        return 1.0;
    }
    let s = (j as f64 * PI / (2 * n + 2) as f64).sin();
    s * s
}

/// Relative pulse instants of UDD of order `n`: `sin²(jπ/(2n+2))` for
/// `j = 1..=N'`.
///
/// ```
/// use ddbound::sequences::udd_offsets;
/// let t = udd_offsets(1);
/// assert!((t[0] - 0.5).abs() < 1e-15);
/// assert_eq!(t[1], 1.0);
/// assert!(udd_offsets(0).is_empty());
/// ```
pub fn udd_offsets(n: usize) -> Vec<f64> {
    (1..=effective_order(n)).map(|j| udd_offset(j, n)).collect()
}

/// `a + (b - a) λ`, returning `b` bit-exactly when `λ == 1`.
fn place(a: f64, b: f64, lambda: f64) -> f64 {
    if lambda == 1.0 {
        b
    } else {
        a + (b - a) * lambda
    }
}

/// Boundaries `[a, t_1, …, t_n, b]` of the `n + 1` sub-intervals a UDD of
/// order `n` cuts `[a, b]` into.
fn subdivide(a: f64, b: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 2);
    out.push(a);
    out.extend((1..=n).map(|j| place(a, b, udd_offset(j, n))));
    out.push(b);
    out
}

/// QDD with `n1` inner `Z` pulses per outer interval and `n2` outer `X`
/// pulses.
pub fn qdd_schedule(n1: usize, n2: usize) -> PulseSchedule {
    let mut events = Vec::new();
    for j in 1..=effective_order(n2) {
        events.push(PulseEvent {
            time: udd_offset(j, n2),
            axis: Axis::X,
            qubit: 0,
            level: 2,
        });
    }
    for j in 1..=n2 + 1 {
        let lo = if j == 1 { 0.0 } else { udd_offset(j - 1, n2) };
        let hi = udd_offset(j, n2);
        for k in 1..=effective_order(n1) {
            events.push(PulseEvent {
                time: place(lo, hi, udd_offset(k, n1)),
                axis: Axis::Z,
                qubit: 0,
                level: 1,
            });
        }
    }
    PulseSchedule::new(events, vec![n1, n2], 1)
}

/// NUDD on `m` qubits; `orders[i - 1]` is the UDD order of level `i`.
pub fn nudd_schedule(orders: &[usize], m: usize) -> Result<PulseSchedule> {
    if m == 0 {
        return Err(Error::invalid("NUDD needs at least one qubit"));
    }
    if orders.len() != 2 * m {
        return Err(Error::invalid(format!(
            "NUDD on {m} qubit(s) needs {} orders, got {}",
            2 * m,
            orders.len()
        )));
    }
    let mut events = Vec::new();
    fill_level(orders, orders.len(), 0.0, 1.0, &mut events);
    Ok(PulseSchedule::new(events, orders.to_vec(), m))
}

fn fill_level(orders: &[usize], level: usize, a: f64, b: f64, events: &mut Vec<PulseEvent>) {
    let n = orders[level - 1];
    let bounds = subdivide(a, b, n);
    // The extra pulse of an odd order lands on the interval end.
    for &time in bounds.iter().skip(1).take(effective_order(n)) {
        events.push(PulseEvent {
            time,
            axis: Axis::of_level(level),
            qubit: qubit_of_level(level),
            level,
        });
    }
    if level > 1 {
        for w in bounds.windows(2) {
            fill_level(orders, level - 1, w[0], w[1], events);
        }
    }
}

/// A `±1`-valued piecewise-constant function on `[0, 1]`.
///
/// Interval `i` is `[breakpoints[i], breakpoints[i + 1])`; the last one is
/// closed at 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchingProfile {
    breakpoints: Vec<f64>,
    signs: Vec<i8>,
}

impl SwitchingProfile {
    pub fn constant() -> Self {
        SwitchingProfile {
            breakpoints: vec![0.0, 1.0],
            signs: vec![1],
        }
    }

    /// Starts at `+1` and flips at every given instant. Flips at `s >= 1`
    /// have no effect on `[0, 1]`; two flips at the same instant cancel.
    pub fn from_flips(times: impl IntoIterator<Item = f64>) -> Self {
        let mut times: Vec<f64> = times.into_iter().filter(|&t| t > 0.0 && t < 1.0).collect();
        times.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
        let mut breakpoints = vec![0.0];
        let mut signs = vec![1i8];
        let mut i = 0;
        while i < times.len() {
            let t = times[i];
            let mut count = 0;
            while i < times.len() && times[i] == t {
                count += 1;
                i += 1;
            }
            if count % 2 == 1 {
                let last = *signs.last().unwrap();
                breakpoints.push(t);
                signs.push(-last);
            }
        }
        breakpoints.push(1.0);
        SwitchingProfile { breakpoints, signs }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn value_at(&self, s: f64) -> i8 {
        let idx = self.breakpoints[1..self.breakpoints.len() - 1].partition_point(|&b| b <= s);
        self.signs[idx]
    }

    /// Pointwise product.
    pub fn product(&self, other: &SwitchingProfile) -> SwitchingProfile {
        let flips = self.breakpoints[1..self.breakpoints.len() - 1]
            .iter()
            .chain(&other.breakpoints[1..other.breakpoints.len() - 1])
            .copied();
        let mut out = SwitchingProfile::from_flips(flips);
        // Both factors start at +1 only if their first signs are +1.
        let start = self.signs[0] * other.signs[0];
        if start < 0 {
            out.signs.iter_mut().for_each(|s| *s = -*s);
        }
        out
    }

    /// `∫₀¹ f(s) ds`, summed interval by interval.
    pub fn integral(&self) -> f64 {
        self.breakpoints
            .windows(2)
            .zip(&self.signs)
            .map(|(w, &s)| f64::from(s) * (w[1] - w[0]))
            .sum()
    }

    /// Number of interior sign changes.
    pub fn sign_changes(&self) -> usize {
        self.signs.windows(2).filter(|w| w[0] != w[1]).count()
    }
}

/// The four QDD switching functions `f_0, f_x, f_y, f_z`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QddSwitching {
    pub f0: SwitchingProfile,
    pub fx: SwitchingProfile,
    pub fy: SwitchingProfile,
    pub fz: SwitchingProfile,
}

impl QddSwitching {
    pub fn get(&self, channel: Pauli) -> &SwitchingProfile {
        match channel {
            Pauli::I => &self.f0,
            Pauli::X => &self.fx,
            Pauli::Y => &self.fy,
            Pauli::Z => &self.fz,
        }
    }
}

/// `f_x` flips at every `Z` pulse, `f_z` at every `X` pulse, `f_y = f_x f_z`.
pub fn switching_qdd(n1: usize, n2: usize) -> QddSwitching {
    let schedule = qdd_schedule(n1, n2);
    let fx = SwitchingProfile::from_flips(schedule.events_at_level(1).map(|e| e.time));
    let fz = SwitchingProfile::from_flips(schedule.events_at_level(2).map(|e| e.time));
    let fy = fx.product(&fz);
    QddSwitching {
        f0: SwitchingProfile::constant(),
        fx,
        fy,
        fz,
    }
}

/// Per-qubit switching functions of a nested schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NuddSwitching {
    /// `per_qubit[j][p.index()]` is `f_{j, p}`.
    per_qubit: Vec<[SwitchingProfile; 4]>,
}

impl NuddSwitching {
    pub fn qubit_count(&self) -> usize {
        self.per_qubit.len()
    }

    pub fn get(&self, qubit: usize, label: Pauli) -> &SwitchingProfile {
        &self.per_qubit[qubit][label.index()]
    }

    /// `f_μ = ∏_j f_{j, μ_j}`.
    pub fn string(&self, labels: &[Pauli]) -> Result<SwitchingProfile> {
        if labels.len() != self.per_qubit.len() {
            return Err(Error::DimensionMismatch(format!(
                "Pauli string of length {} for {} qubit(s)",
                labels.len(),
                self.per_qubit.len()
            )));
        }
        Ok(labels
            .iter()
            .enumerate()
            .fold(SwitchingProfile::constant(), |acc, (j, &p)| {
                acc.product(self.get(j, p))
            }))
    }
}

/// Switching functions of a nested schedule: `f_{j,x}` flips at the `Z`
/// pulses on qubit `j`, `f_{j,z}` at its `X` pulses.
pub fn switching_nudd(schedule: &PulseSchedule) -> NuddSwitching {
    let per_qubit = (0..schedule.qubit_count())
        .map(|j| {
            let fx = SwitchingProfile::from_flips(
                schedule.events_at_level(2 * j + 1).map(|e| e.time),
            );
            let fz = SwitchingProfile::from_flips(
                schedule.events_at_level(2 * j + 2).map(|e| e.time),
            );
            let fy = fx.product(&fz);
            [SwitchingProfile::constant(), fx, fy, fz]
        })
        .collect();
    NuddSwitching { per_qubit }
}
