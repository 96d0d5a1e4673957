//! Analytic NUDD error bounds.
//!
//! All `γ = 4^m − 1` non-identity couplings are collapsed onto the single
//! norm `J1`, so every error word is bounded by the same series and the
//! total error weight obeys a 2×2 linear ODE with closed-form solution
//! `S_K(T) = γ e^{J0 T}(e^{γ J1 T} − e^{−J1 T}) / (γ + 1)`.

use serde::{Deserialize, Serialize};

use crate::qdd_bounds::log_grid;
use crate::sequences::PulseSchedule;
use crate::series::{self, check_epsilon, check_rel_tol};
use crate::{Error, Result};

pub use crate::series::DEFAULT_REL_TOL;

/// Largest qubit count for which `4^m − 1` is held exactly.
pub const MAX_QUBITS: usize = 31;

/// `γ = 4^m − 1`, the number of non-identity Pauli strings on `m` qubits.
pub fn gamma(m: usize) -> Result<u64> {
    if m == 0 || m > MAX_QUBITS {
        return Err(Error::invalid(format!("qubit count m must lie in 1..={MAX_QUBITS}, got {m}")));
    }
    Ok((1u64 << (2 * m)) - 1)
}

/// Coupling norms of the collapsed NUDD model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NuddCouplings {
    pub m: usize,
    pub j0: f64,
    pub j1: f64,
}

impl NuddCouplings {
    pub fn new(m: usize, j0: f64, j1: f64) -> Result<Self> {
        gamma(m)?;
        if !(j0.is_finite() && j0 > 0.0) {
            return Err(Error::invalid(format!("J0 must be finite and > 0, got {j0}")));
        }
        if !(j1.is_finite() && j1 >= 0.0) {
            return Err(Error::invalid(format!("J1 must be finite and >= 0, got {j1}")));
        }
        Ok(NuddCouplings { m, j0, j1 })
    }

    pub fn gamma(&self) -> u64 {
        (1u64 << (2 * self.m)) - 1
    }

    pub fn epsilon(&self, t: f64) -> f64 {
        self.j0 * t
    }

    pub fn eta(&self) -> f64 {
        self.j1 / self.j0
    }
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("duration T must be finite and >= 0, got {t}")))
    }
}

fn check_couplings(j0: f64, j1: f64) -> Result<()> {
    for (name, v) in [("J0", j0), ("J1", j1)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")));
        }
    }
    Ok(())
}

/// Total bound `S_K(T)` on the error channels.
pub fn s_error_sum(t: f64, j0: f64, j1: f64, m: usize) -> Result<f64> {
    check_time(t)?;
    check_couplings(j0, j1)?;
    let g = gamma(m)? as f64;
    // e^{γ J1 T} − e^{−J1 T} = e^{−J1 T} (e^{(γ+1) J1 T} − 1), free of cancellation.
    Ok(g / (g + 1.0) * ((j0 - j1) * t).exp() * ((g + 1.0) * j1 * t).exp_m1())
}

/// Bound `S_0(T)` on the identity channel.
pub fn s_identity(t: f64, j0: f64, j1: f64, m: usize) -> Result<f64> {
    check_time(t)?;
    check_couplings(j0, j1)?;
    let g = gamma(m)? as f64;
    Ok((j0 * t).exp() * ((g * j1 * t).exp() + g * (-j1 * t).exp()) / (g + 1.0))
}

/// `(a^k − b^k) / k!` for `a > |b|`, without cancellation when `b ≈ a`.
/// `gap = a − b` is passed separately because subtracting the rounded `a`
/// and `b` would lose exactly the digits that matter.
fn power_difference(k: usize, a: f64, b: f64, gap: f64) -> f64 {
    if k == 0 || a == 0.0 {
        return 0.0;
    }
    let scaled = (1..=k).fold(1.0, |acc, i| acc * a / i as f64);
    scaled * one_minus_ratio_power(k, a, b, gap)
}

/// `1 − (b/a)^k` for `a > |b|`, with `gap = a − b`.
fn one_minus_ratio_power(k: usize, a: f64, b: f64, gap: f64) -> f64 {
    if b > 0.0 {
        -((k as f64) * (-gap / a).ln_1p()).exp_m1()
    } else {
        1.0 - (b / a).powi(k as i32)
    }
}

/// Taylor coefficient `p_k = γ/(γ+1) [(J0 + γ J1)^k − (J0 − J1)^k] / k!` of
/// `S_K` in `T`.
pub fn nudd_taylor_coeff(k: usize, j0: f64, j1: f64, m: usize) -> Result<f64> {
    check_couplings(j0, j1)?;
    let g = gamma(m)? as f64;
    Ok(g / (g + 1.0) * power_difference(k, j0 + g * j1, j0 - j1, (g + 1.0) * j1))
}

/// Leading-order polynomial `g_l(η, m)`, the `ε^l` coefficient of `S_K`.
pub fn nudd_g(l: usize, eta: f64, m: usize) -> Result<f64> {
    check_eta(eta)?;
    nudd_taylor_coeff(l, 1.0, eta, m)
}

fn check_eta(eta: f64) -> Result<()> {
    if eta.is_finite() && eta >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("eta must be finite and >= 0, got {eta}")))
    }
}

/// Taylor tail `Δ_d = Σ_{l>d} g_l(η, m) ε^l` of `S_K`.
pub fn nudd_delta(d: usize, epsilon: f64, eta: f64, m: usize, rel_tol: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    check_eta(eta)?;
    check_rel_tol(rel_tol)?;
    let g = gamma(m)? as f64;
    if epsilon == 0.0 || eta == 0.0 {
        return Ok(0.0);
    }
    let a = 1.0 + g * eta;
    let b = 1.0 - eta;
    let prefactor = g / (g + 1.0);
    let mut scaled = 1.0;
    series::sum_tail(d + 1, a * epsilon, 1, rel_tol, |k| {
        if k == 0 {
            return 0.0;
        }
        scaled *= a * epsilon / k as f64;
        prefactor * scaled * one_minus_ratio_power(k, a, b, (g + 1.0) * eta)
    })
}

/// Decoupling order of a NUDD schedule: the smallest requested level order.
///
/// With the appended-pulse timing, an odd level of order `N` cancels the
/// error only through order `N`, so the requested (not the padded) orders
/// set the guarantee.
pub fn schedule_decoupling_order(schedule: &PulseSchedule) -> usize {
    schedule.orders().iter().copied().min().unwrap_or(0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NuddBoundReport {
    pub m: usize,
    pub d_min: usize,
    pub epsilon: f64,
    pub eta: f64,
    pub delta: f64,
    /// `Δ² + Δ`.
    pub distance_bound: f64,
    /// `g_{d+1}(η, m) ε^{d+1}`.
    pub leading_term: f64,
}

pub fn nudd_distance_bound(d_min: usize, epsilon: f64, eta: f64, m: usize) -> Result<NuddBoundReport> {
    let delta = nudd_delta(d_min, epsilon, eta, m, DEFAULT_REL_TOL)?;
    let leading_term = if epsilon == 0.0 {
        0.0
    } else {
        // Power and coefficient combined stepwise so that neither overflows alone.
        let g = gamma(m)? as f64;
        let a = 1.0 + g * eta;
        let k = d_min + 1;
        let scaled = (1..=k).fold(1.0, |acc, i| acc * a * epsilon / i as f64);
        g / (g + 1.0) * scaled * one_minus_ratio_power(k, a, 1.0 - eta, (g + 1.0) * eta)
    };
    Ok(NuddBoundReport {
        m,
        d_min,
        epsilon,
        eta,
        delta,
        distance_bound: delta * delta + delta,
        leading_term,
    })
}

/// `min(1, 1 / (1 + γη))`: the `ε` scale below which the tail is dominated by
/// its leading term.
pub fn asymptotic_scale(eta: f64, m: usize) -> Result<f64> {
    check_eta(eta)?;
    let g = gamma(m)? as f64;
    Ok((1.0 / (1.0 + g * eta)).min(1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NuddPanel {
    pub eta: f64,
    pub epsilons: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NuddCell {
    pub epsilon: f64,
    pub m: usize,
    pub d_min: usize,
    pub eta: f64,
}

/// A NUDD bound sweep: every panel × every `d_min` × the panel's `ε` grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NuddSweep {
    pub m: usize,
    pub d_mins: Vec<usize>,
    pub panels: Vec<NuddPanel>,
}

impl NuddSweep {
    /// The same `ε` grid in every panel.
    pub fn uniform(m: usize, d_mins: Vec<usize>, etas: &[f64], epsilons: &[f64]) -> Self {
        NuddSweep {
            m,
            d_mins,
            panels: etas
                .iter()
                .map(|&eta| NuddPanel { eta, epsilons: epsilons.to_vec() })
                .collect(),
        }
    }

    /// `m = 10`, `d_min ∈ {5, 10, 20, 40}`, `η ∈ {1e-4, 1e-2, 1, 1e2}`. Each
    /// panel spans `ε ∈ [1e-4, 1] · asymptotic_scale(η, m)`, since larger `ε`
    /// overflows the bound for strong coupling.
    pub fn figure5(points: usize) -> Result<Self> {
        let m = 10;
        let panels = [1e-4, 1e-2, 1.0, 1e2]
            .iter()
            .map(|&eta| {
                let s = asymptotic_scale(eta, m)?;
                Ok(NuddPanel { eta, epsilons: log_grid(1e-4 * s, s, points) })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(NuddSweep { m, d_mins: vec![5, 10, 20, 40], panels })
    }

    pub fn cells(&self) -> Vec<NuddCell> {
        let mut out = Vec::new();
        for panel in &self.panels {
            for &d_min in &self.d_mins {
                for &epsilon in &panel.epsilons {
                    out.push(NuddCell { epsilon, m: self.m, d_min, eta: panel.eta });
                }
            }
        }
        out
    }

    pub fn evaluate(&self, cell: &NuddCell) -> Result<NuddBoundReport> {
        nudd_distance_bound(cell.d_min, cell.epsilon, cell.eta, cell.m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequences::nudd_schedule;
    use num_complex::Complex64;
    use proptest::prelude::*;

    /// Classical RK4 on `S0' = J0 S0 + γ J1 S1`, `S1' = J0 S1 + J1 S0 + (γ−1) J1 S1`.
    fn integrate(t: f64, j0: f64, j1: f64, g: f64, steps: usize) -> (f64, f64) {
        let rhs = |s: [f64; 2]| {
            [j0 * s[0] + g * j1 * s[1], j0 * s[1] + j1 * s[0] + (g - 1.0) * j1 * s[1]]
        };
        let h = t / steps as f64;
        let mut s = [1.0, 0.0];
        for _ in 0..steps {
            let k1 = rhs(s);
            let k2 = rhs([s[0] + h / 2.0 * k1[0], s[1] + h / 2.0 * k1[1]]);
            let k3 = rhs([s[0] + h / 2.0 * k2[0], s[1] + h / 2.0 * k2[1]]);
            let k4 = rhs([s[0] + h * k3[0], s[1] + h * k3[1]]);
            for i in 0..2 {
                s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        (s[0], s[1])
    }

    fn literal_g(l: usize, eta: f64, m: usize) -> f64 {
        let four_m = 4f64.powi(m as i32);
        let fact: f64 = (1..=l).map(|k| k as f64).product();
        (1.0 - 1.0 / four_m) * ((1.0 - eta + four_m * eta).powi(l as i32) - (1.0 - eta).powi(l as i32)) / fact
    }

    #[test]
    fn gamma_range() {
        assert_eq!(gamma(1).unwrap(), 3);
        assert_eq!(gamma(10).unwrap(), 1_048_575);
        assert_eq!(gamma(31).unwrap(), (1u64 << 62) - 1);
        assert!(gamma(0).is_err());
        assert!(gamma(32).is_err());
    }

    #[test]
    fn error_sum_edge_cases() {
        assert_eq!(s_error_sum(0.0, 1.0, 0.5, 2).unwrap(), 0.0);
        assert_eq!(s_error_sum(3.0, 1.0, 0.0, 1).unwrap(), 0.0);
        assert_eq!(nudd_taylor_coeff(0, 1.0, 0.3, 3).unwrap(), 0.0);
    }

    #[test]
    fn sum_identity() {
        for (t, j0, j1, m) in [(0.1, 1.0, 0.2, 1), (1.3, 0.4, 0.05, 2), (0.01, 2.0, 3.0, 4)] {
            let g = gamma(m).unwrap() as f64;
            let sum = s_identity(t, j0, j1, m).unwrap() + s_error_sum(t, j0, j1, m).unwrap();
            let expected = ((j0 + g * j1) * t).exp();
            assert!((sum / expected - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ode_matches_closed_forms() {
        for (t, j0, j1, m) in [(0.5, 1.0, 0.3, 1), (0.2, 0.7, 0.4, 2), (2.0, 1.0, 0.001, 3)] {
            let g = gamma(m).unwrap() as f64;
            let (s0, s1) = integrate(t, j0, j1, g, 4000);
            let sk = s_error_sum(t, j0, j1, m).unwrap();
            assert!((s1 * g / sk - 1.0).abs() < 1e-9, "S_K at t={t}");
            assert!((s0 / s_identity(t, j0, j1, m).unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn tiny_eta_keeps_full_precision() {
        for m in [1, 3, 10] {
            let g = gamma(m).unwrap() as f64;
            for eta in [1e-9, 1e-12] {
                assert!((nudd_g(1, eta, m).unwrap() / (g * eta) - 1.0).abs() < 1e-14, "m={m} eta={eta}");
                let lead = nudd_distance_bound(0, 1e-6, eta, m).unwrap().leading_term;
                assert!((lead / (g * eta * 1e-6) - 1.0).abs() < 1e-14, "m={m} eta={eta}");
            }
        }
    }

    #[test]
    fn first_coefficients() {
        let (j0, j1) = (0.8, 0.25);
        for m in 1..4 {
            let g = gamma(m).unwrap() as f64;
            let p1 = nudd_taylor_coeff(1, j0, j1, m).unwrap();
            assert!((p1 - g * j1).abs() < 1e-14 * g);
            let g1 = nudd_g(1, 0.3, m).unwrap();
            assert!((g1 - g * 0.3).abs() < 1e-13 * g);
        }
    }

    #[test]
    fn coefficients_match_contour_derivatives() {
        let (j0, j1, m) = (0.9, 0.35, 2);
        let g = gamma(m).unwrap() as f64;
        let f = |z: Complex64| z.scale(j0).exp() * (z.scale(g * j1).exp() - z.scale(-j1).exp()) * (g / (g + 1.0));
        let r = 0.2;
        let points = 128;
        for k in 0..=6 {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..points {
                let theta = 2.0 * std::f64::consts::PI * i as f64 / points as f64;
                acc += f(Complex64::from_polar(r, theta)) * Complex64::from_polar(r.powi(-(k as i32)), -(k as f64) * theta);
            }
            let oracle = acc.re / points as f64;
            let p = nudd_taylor_coeff(k, j0, j1, m).unwrap();
            assert!((p - oracle).abs() <= 1e-6 * oracle.abs().max(1e-9), "k={k}: {p} vs {oracle}");
        }
    }

    #[test]
    fn g_matches_literal_polynomial() {
        for m in [1, 2, 5] {
            for eta in [1e-3, 0.5, 1.0, 7.0] {
                for l in 0..12 {
                    let lit = literal_g(l, eta, m);
                    let got = nudd_g(l, eta, m).unwrap();
                    assert!((got - lit).abs() <= 1e-11 * lit.abs().max(1e-300), "m={m} eta={eta} l={l}");
                }
            }
        }
    }

    #[test]
    fn tail_from_zero_is_full_function() {
        let (eps, eta, m) = (0.3, 0.4, 2);
        let delta = nudd_delta(0, eps, eta, m, DEFAULT_REL_TOL).unwrap();
        let sk = s_error_sum(eps, 1.0, eta, m).unwrap();
        assert!((delta / sk - 1.0).abs() < 1e-13);
    }

    #[test]
    fn leading_ratio_tends_to_one() {
        for d in [1, 5, 20] {
            let r = nudd_distance_bound(d, 1e-6, 0.5, 3).unwrap();
            assert!((r.delta / r.leading_term - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn zero_epsilon_bound_is_zero() {
        let r = nudd_distance_bound(4, 0.0, 1.0, 2).unwrap();
        assert_eq!((r.delta, r.distance_bound, r.leading_term), (0.0, 0.0, 0.0));
    }

    #[test]
    fn single_qubit_bound_is_looser_than_qdd() {
        use crate::qdd_bounds::{distance_bound, EtaVector, OrderMode};
        let eta = EtaVector::new(0.3, 0.6, 1.0).unwrap();
        for eps in [1e-3, 1e-2] {
            let q = distance_bound(2, 2, eps, &eta, OrderMode::Analytic).unwrap();
            let n = nudd_distance_bound(2, eps, 1.0, 1).unwrap();
            assert!(n.distance_bound > q.distance_bound);
        }
    }

    #[test]
    fn decoupling_order_uses_requested_orders() {
        let s = nudd_schedule(&[3, 2, 4, 5], 2).unwrap();
        assert_eq!(schedule_decoupling_order(&s), 2);
        let s = nudd_schedule(&[1, 1], 1).unwrap();
        assert_eq!(schedule_decoupling_order(&s), 1);
    }

    #[test]
    fn figure5_panels_are_scaled() {
        let sweep = NuddSweep::figure5(5).unwrap();
        assert_eq!(sweep.cells().len(), 4 * 4 * 5);
        let last = sweep.panels.last().unwrap();
        assert!(*last.epsilons.last().unwrap() < 1e-7);
        for cell in sweep.cells() {
            assert!(sweep.evaluate(&cell).unwrap().distance_bound.is_finite());
        }
    }

    proptest! {
        #[test]
        fn coefficients_are_nonnegative(k in 0usize..60, j0 in 0.0f64..3.0, j1 in 0.0f64..3.0, m in 1usize..6) {
            prop_assert!(nudd_taylor_coeff(k, j0, j1, m).unwrap() >= 0.0);
        }

        #[test]
        fn tail_monotone_in_order_and_epsilon(eps in 1e-4f64..0.05, eta in 0.0f64..2.0, m in 1usize..4) {
            let mut prev = f64::INFINITY;
            for d in 0..30 {
                let t = nudd_delta(d, eps, eta, m, DEFAULT_REL_TOL).unwrap();
                prop_assert!(t <= prev);
                prev = t;
            }
            if eta > 0.0 {
                let a = nudd_delta(3, eps, eta, m, DEFAULT_REL_TOL).unwrap();
                let b = nudd_delta(3, eps * 1.01, eta, m, DEFAULT_REL_TOL).unwrap();
                prop_assert!(b > a);
            }
        }

        #[test]
        fn ode_consistency(t in 0.0f64..1.0, j0 in 0.01f64..2.0, j1 in 0.0f64..1.0, m in 1usize..=4) {
            let g = gamma(m).unwrap() as f64;
            // keep T (J0 + γ J1) ≤ 5
            let t = t * 5.0 / (j0 + g * j1);
            let (_, s1) = integrate(t, j0, j1, g, 4000);
            let sk = s_error_sum(t, j0, j1, m).unwrap();
            if sk > 0.0 {
                prop_assert!((g * s1 / sk - 1.0).abs() < 1e-9);
            }
        }
    }
}
