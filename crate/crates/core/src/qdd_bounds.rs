//! Analytic QDD error bounds.
//!
//! The norm of the full Dyson series is bounded by `exp(ε(1 + ηx + ηy + ηz))`.
//! Splitting each `exp(ηα ε)` into its even (`cosh`) and odd (`sinh`) parts
//! sorts the bound into eight parity classes `j = pz + 2 py + 4 px`. Classes
//! `{3, 4}`, `{2, 5}` and `{1, 6}` feed the `σx`, `σy` and `σz` channels; the
//! identity channel collects `{0, 7}`.
//!
//! A QDD sequence removes every term of a channel up to its decoupling order
//! `d`, so the channel is bounded by the Taylor tail `Δ_d` of its two classes.

use serde::{Deserialize, Serialize};

use crate::pauli::Pauli;
use crate::series::{self, check_epsilon, check_rel_tol};
use crate::{Error, Result};

pub use crate::series::DEFAULT_REL_TOL;

/// Coupling ratios `ηα = Jα / J0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtaVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl EtaVector {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let eta = EtaVector { x, y, z };
        eta.validate()?;
        Ok(eta)
    }

    pub fn isotropic(eta: f64) -> Result<Self> {
        Self::new(eta, eta, eta)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("eta_x", self.x), ("eta_y", self.y), ("eta_z", self.z)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }

    pub fn get(&self, channel: Pauli) -> f64 {
        match channel {
            Pauli::I => 1.0,
            Pauli::X => self.x,
            Pauli::Y => self.y,
            Pauli::Z => self.z,
        }
    }

    pub fn sum(&self) -> f64 {
        self.x + self.y + self.z
    }
}

/// Which row of the single-axis suppression table to use for `dz` when `N1`
/// is odd.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderMode {
    /// Proven orders; bounds built on them are rigorous.
    #[default]
    Analytic,
    /// `dz = min(2 N1 + 1, N2)` for odd `N1`, observed numerically but not
    /// proven. Bounds built on it are not rigorous.
    NumericFootnote,
}

impl OrderMode {
    pub fn as_str(self) -> &'static str {
        match self {
            OrderMode::Analytic => "analytic",
            OrderMode::NumericFootnote => "numeric-footnote",
        }
    }

    pub fn is_rigorous(self) -> bool {
        self == OrderMode::Analytic
    }
}

impl std::str::FromStr for OrderMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(OrderMode::Analytic),
            "numeric-footnote" => Ok(OrderMode::NumericFootnote),
            other => Err(Error::invalid(format!(
                "unknown order mode {other:?} (expected analytic or numeric-footnote)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecouplingOrders {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

impl DecouplingOrders {
    pub fn get(&self, channel: Pauli) -> Option<usize> {
        match channel {
            Pauli::I => None,
            Pauli::X => Some(self.x),
            Pauli::Y => Some(self.y),
            Pauli::Z => Some(self.z),
        }
    }

    pub fn min(&self) -> usize {
        self.x.min(self.y).min(self.z)
    }
}

/// Single-axis decoupling orders of `QDD(N1, N2)`.
pub fn decoupling_orders(n1: usize, n2: usize, mode: OrderMode) -> DecouplingOrders {
    let n1_odd = n1 % 2 == 1;
    let n2_odd = n2 % 2 == 1;
    let y = match (n1_odd, n2_odd) {
        (false, false) => n1.max(n2),
        (false, true) => (n1 + 1).max(n2),
        (true, false) => n1,
        (true, true) => n1 + 1,
    };
    let z = match (n1_odd, mode) {
        (false, _) => n2,
        (true, OrderMode::Analytic) => (n1 + 1).min(n2),
        (true, OrderMode::NumericFootnote) => (2 * n1 + 1).min(n2),
    };
    DecouplingOrders { x: n1, y, z }
}

/// Parities `(px, py, pz)` of class `j = pz + 2 py + 4 px`.
pub fn parity_of_class(j: usize) -> (u8, u8, u8) {
    (((j >> 2) & 1) as u8, ((j >> 1) & 1) as u8, (j & 1) as u8)
}

/// Class index of a parity triple.
pub fn class_of_parity(px: u8, py: u8, pz: u8) -> usize {
    usize::from(pz & 1) + 2 * usize::from(py & 1) + 4 * usize::from(px & 1)
}

/// Channel whose operator collects the terms of parity class `j`.
pub fn channel_of_class(j: usize) -> Pauli {
    match j {
        1 | 6 => Pauli::Z,
        2 | 5 => Pauli::Y,
        3 | 4 => Pauli::X,
        _ => Pauli::I,
    }
}

/// The two parity classes bounding an error channel.
pub fn classes_of_channel(channel: Pauli) -> [usize; 2] {
    match channel {
        Pauli::X => [3, 4],
        Pauli::Y => [2, 5],
        Pauli::Z => [1, 6],
        Pauli::I => [0, 7],
    }
}

fn check_class(j: usize) -> Result<()> {
    if j < 8 {
        Ok(())
    } else {
        Err(Error::invalid(format!("parity class must be in 0..=7, got {j}")))
    }
}

/// `S_j(ε, η) = e^ε ∏α (cosh | sinh)(ηα ε)`, `sinh` where `pα = 1`.
///
/// Overflows to infinity for large arguments; see
/// [`log_bounding_function`].
pub fn bounding_function(j: usize, epsilon: f64, eta: &EtaVector) -> Result<f64> {
    check_class(j)?;
    let (px, py, pz) = parity_of_class(j);
    let factor = |p: u8, e: f64| if p == 1 { (e * epsilon).sinh() } else { (e * epsilon).cosh() };
    Ok(epsilon.exp() * factor(px, eta.x) * factor(py, eta.y) * factor(pz, eta.z))
}

fn ln_cosh(x: f64) -> f64 {
    let x = x.abs();
    x + (-2.0 * x).exp().ln_1p() - std::f64::consts::LN_2
}

fn ln_sinh(x: f64) -> f64 {
    if x == 0.0 {
        f64::NEG_INFINITY
    } else if x < 1.0 {
        x.sinh().ln()
    } else {
        x + (-(-2.0 * x).exp()).ln_1p() - std::f64::consts::LN_2
    }
}

/// `ln S_j(ε, η)`, finite wherever `S_j > 0` even when `S_j` itself overflows.
pub fn log_bounding_function(j: usize, epsilon: f64, eta: &EtaVector) -> Result<f64> {
    check_class(j)?;
    let (px, py, pz) = parity_of_class(j);
    let factor = |p: u8, e: f64| if p == 1 { ln_sinh(e * epsilon) } else { ln_cosh(e * epsilon) };
    Ok(epsilon + factor(px, eta.x) + factor(py, eta.y) + factor(pz, eta.z))
}

/// Taylor coefficient `g_l^{(j)}(η)` of `S_j` in `ε`.
///
/// Equal to the signed sum `Σ_s c_j(s) (1 + s·η)^l / (8 l!)` over the eight
/// sign patterns `s`, but evaluated as a product of nonnegative series, so
/// there is no cancellation and low orders come out exact (`g_1^{(4)} = ηx`).
pub fn g_poly(j: usize, l: usize, eta: &EtaVector) -> Result<f64> {
    taylor_term(j, l, 1.0, eta)
}

/// Incremental Taylor coefficients of `e^{u0} · F1(u1) · F2(u2) · F3(u3)`
/// where each `F` is `cosh` or `sinh`.
///
/// Every factor series has nonnegative coefficients, so the Cauchy products
/// never cancel and every coefficient is `>= 0`.
struct ProductSeries {
    args: [f64; 4],
    /// Required parity of the power for each factor; `None` keeps all powers.
    parity: [Option<u8>; 4],
    /// Running `args[k]^n / n!`.
    powers: [f64; 4],
    factors: [Vec<f64>; 4],
    left: Vec<f64>,
    right: Vec<f64>,
    n: usize,
}

impl ProductSeries {
    fn new(j: usize, epsilon: f64, eta: &EtaVector) -> Self {
        let (px, py, pz) = parity_of_class(j);
        ProductSeries {
            args: [epsilon, eta.x * epsilon, eta.y * epsilon, eta.z * epsilon],
            parity: [None, Some(px), Some(py), Some(pz)],
            powers: [1.0; 4],
            factors: Default::default(),
            left: Vec::new(),
            right: Vec::new(),
            n: 0,
        }
    }

    /// Coefficient of `ε^n` times `ε^n`, for `n = 0, 1, 2, …` in turn.
    fn next_term(&mut self) -> f64 {
        let n = self.n;
        for k in 0..4 {
            if n > 0 {
                self.powers[k] *= self.args[k] / n as f64;
            }
            let keep = self.parity[k].map_or(true, |p| n % 2 == usize::from(p));
            self.factors[k].push(if keep { self.powers[k] } else { 0.0 });
        }
        let conv = |a: &[f64], b: &[f64]| -> f64 { (0..=n).map(|i| a[i] * b[n - i]).sum() };
        let l = conv(&self.factors[0], &self.factors[1]);
        let r = conv(&self.factors[2], &self.factors[3]);
        self.left.push(l);
        self.right.push(r);
        self.n += 1;
        conv(&self.left, &self.right)
    }

    /// Number of odd factors with a nonzero argument: the lowest power that can
    /// appear. `None` if an odd factor has a zero argument (the series vanishes).
    fn min_order(&self) -> Option<usize> {
        let mut order = 0;
        for k in 1..4 {
            if self.parity[k] == Some(1) {
                if self.args[k] == 0.0 {
                    return None;
                }
                order += 1;
            }
        }
        Some(order)
    }
}

/// The `ε^n` term `g_n^{(j)}(η) ε^n` of `S_j`, evaluated without cancellation.
pub fn taylor_term(j: usize, n: usize, epsilon: f64, eta: &EtaVector) -> Result<f64> {
    check_class(j)?;
    check_epsilon(epsilon)?;
    eta.validate()?;
    let mut series = ProductSeries::new(j, epsilon, eta);
    let mut term = 0.0;
    for _ in 0..=n {
        term = series.next_term();
    }
    Ok(term)
}

/// Taylor tail `Δ_d^{(j)} = Σ_{n>d} g_n^{(j)}(η) ε^n`.
pub fn delta_tail(j: usize, d: usize, epsilon: f64, eta: &EtaVector, rel_tol: f64) -> Result<f64> {
    check_class(j)?;
    check_epsilon(epsilon)?;
    check_rel_tol(rel_tol)?;
    eta.validate()?;
    let mut series = ProductSeries::new(j, epsilon, eta);
    let Some(min_order) = series.min_order() else {
        return Ok(0.0);
    };
    if epsilon == 0.0 {
        return Ok(0.0);
    }
    let rate = epsilon * (1.0 + eta.sum());
    series::sum_tail(d + 1, rate, min_order, rel_tol, |_| series.next_term())
}

/// Per-channel operator-norm bounds `Lα ≥ ‖Aα‖`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelBounds {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl ChannelBounds {
    pub fn get(&self, channel: Pauli) -> Option<f64> {
        match channel {
            Pauli::I => None,
            Pauli::X => Some(self.x),
            Pauli::Y => Some(self.y),
            Pauli::Z => Some(self.z),
        }
    }

    /// `Σ Lα + Σ Lα² + Lx Ly + Ly Lz + Lx Lz`.
    pub fn distance_bound(&self) -> f64 {
        let (x, y, z) = (self.x, self.y, self.z);
        x + y + z + x * x + y * y + z * z + x * y + y * z + x * z
    }
}

/// The six Taylor tails entering the QDD distance bound, indexed by class.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassTails {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub d4: f64,
    pub d5: f64,
    pub d6: f64,
}

impl ClassTails {
    pub fn channel_bounds(&self) -> ChannelBounds {
        ChannelBounds {
            x: self.d3 + self.d4,
            y: self.d2 + self.d5,
            z: self.d1 + self.d6,
        }
    }

    /// The distance bound written out term by term over the six tails.
    pub fn distance_bound(&self) -> f64 {
        let ClassTails { d1, d2, d3, d4, d5, d6 } = *self;
        let linear = d3 + d4 + d2 + d5 + d1 + d6;
        let squares = d3 * d3 + d4 * d4 + d2 * d2 + d5 * d5 + d1 * d1 + d6 * d6;
        let same_channel = 2.0 * d3 * d4 + 2.0 * d2 * d5 + 2.0 * d1 * d6;
        let mixed = d3 * d2 + d3 * d5 + d4 * d2 + d4 * d5
            + d2 * d1 + d2 * d6 + d5 * d1 + d5 * d6
            + d3 * d1 + d3 * d6 + d4 * d1 + d4 * d6;
        linear + squares + same_channel + mixed
    }
}

/// Everything the QDD bound says about one `(N1, N2, ε, η)` point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub n1: usize,
    pub n2: usize,
    pub epsilon: f64,
    pub eta: EtaVector,
    pub mode: OrderMode,
    pub orders: DecouplingOrders,
    pub tails: ClassTails,
    pub channel_bounds: ChannelBounds,
    pub distance_bound: f64,
    /// Lowest-order part of the bound, `Σα Σ_{j∈α} g_{dα+1}^{(j)} ε^{dα+1}`.
    pub leading_term: f64,
    /// `false` when the orders come from [`OrderMode::NumericFootnote`].
    pub rigorous: bool,
}

pub fn channel_bounds(
    n1: usize,
    n2: usize,
    epsilon: f64,
    eta: &EtaVector,
    mode: OrderMode,
) -> Result<ChannelBounds> {
    Ok(class_tails(&decoupling_orders(n1, n2, mode), epsilon, eta, DEFAULT_REL_TOL)?.channel_bounds())
}

fn class_tails(orders: &DecouplingOrders, epsilon: f64, eta: &EtaVector, rel_tol: f64) -> Result<ClassTails> {
    let tail = |j, d| delta_tail(j, d, epsilon, eta, rel_tol);
    Ok(ClassTails {
        d1: tail(1, orders.z)?,
        d2: tail(2, orders.y)?,
        d3: tail(3, orders.x)?,
        d4: tail(4, orders.x)?,
        d5: tail(5, orders.y)?,
        d6: tail(6, orders.z)?,
    })
}

/// Trace-norm distance bound for `QDD(N1, N2)`.
pub fn distance_bound(
    n1: usize,
    n2: usize,
    epsilon: f64,
    eta: &EtaVector,
    mode: OrderMode,
) -> Result<BoundReport> {
    let orders = decoupling_orders(n1, n2, mode);
    let tails = class_tails(&orders, epsilon, eta, DEFAULT_REL_TOL)?;
    let mut leading_term = 0.0;
    for channel in Pauli::ERRORS {
        let d = orders.get(channel).unwrap_or(0);
        for j in classes_of_channel(channel) {
            leading_term += taylor_term(j, d + 1, epsilon, eta)?;
        }
    }
    Ok(BoundReport {
        n1,
        n2,
        epsilon,
        eta: *eta,
        mode,
        orders,
        tails,
        channel_bounds: tails.channel_bounds(),
        distance_bound: tails.distance_bound(),
        leading_term,
        rigorous: mode.is_rigorous(),
    })
}

/// `points` values spaced evenly in `log10` between `min` and `max`.
pub fn log_grid(min: f64, max: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![min],
        _ => {
            let (a, b) = (min.log10(), max.log10());
            (0..points)
                .map(|i| 10f64.powf(a + (b - a) * i as f64 / (points - 1) as f64))
                .collect()
        }
    }
}

/// One grid point of a QDD sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QddCell {
    pub epsilon: f64,
    pub n1: usize,
    pub n2: usize,
    pub eta: EtaVector,
}

/// A QDD bound sweep: every `eta` × every sequence × every `epsilon`, in that
/// nesting order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QddSweep {
    pub epsilons: Vec<f64>,
    pub sequences: Vec<(usize, usize)>,
    pub etas: Vec<EtaVector>,
    pub mode: OrderMode,
}

impl QddSweep {
    /// Isotropic `η ∈ {1e-4, 1e-2, 1, 1e2}`, `N1 = N2 = N ∈ {2, 6, 16, 34}`.
    pub fn figure2(epsilons: Vec<f64>) -> Self {
        QddSweep {
            epsilons,
            sequences: [2, 6, 16, 34].iter().map(|&n| (n, n)).collect(),
            etas: [1e-4, 1e-2, 1.0, 1e2]
                .iter()
                .map(|&e| EtaVector { x: e, y: e, z: e })
                .collect(),
            mode: OrderMode::Analytic,
        }
    }

    /// `N2 = 10`, `N1 ∈ {2, 10, 18, 34}`, `ηz = 1e-2`, `ηx = ηy` swept.
    pub fn figure3(epsilons: Vec<f64>) -> Self {
        Self::anisotropic(epsilons, 10, &[2, 10, 18, 34])
    }

    /// `N2 = 9`, `N1 ∈ {3, 10, 19, 34}`, `ηz = 1e-2`, `ηx = ηy` swept.
    pub fn figure4(epsilons: Vec<f64>) -> Self {
        Self::anisotropic(epsilons, 9, &[3, 10, 19, 34])
    }

    fn anisotropic(epsilons: Vec<f64>, n2: usize, n1s: &[usize]) -> Self {
        QddSweep {
            epsilons,
            sequences: n1s.iter().map(|&n1| (n1, n2)).collect(),
            etas: [1e-4, 1e-2, 1.0, 1e2]
                .iter()
                .map(|&e| EtaVector { x: e, y: e, z: 1e-2 })
                .collect(),
            mode: OrderMode::Analytic,
        }
    }

    pub fn cells(&self) -> Vec<QddCell> {
        let mut out = Vec::with_capacity(self.etas.len() * self.sequences.len() * self.epsilons.len());
        for eta in &self.etas {
            for &(n1, n2) in &self.sequences {
                for &epsilon in &self.epsilons {
                    out.push(QddCell { epsilon, n1, n2, eta: *eta });
                }
            }
        }
        out
    }

    pub fn evaluate(&self, cell: &QddCell) -> Result<BoundReport> {
        distance_bound(cell.n1, cell.n2, cell.epsilon, &cell.eta, self.mode)
    }
}

/// Evaluates a whole sweep in cell order, stopping at the first failure.
pub fn figure_sweep(sweep: &QddSweep) -> Result<Vec<BoundReport>> {
    sweep.cells().iter().map(|c| sweep.evaluate(c)).collect()
}
