//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process fails if any criterion fails or exceeds its time budget.

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use ddbound::dyson::{self, Backend, EntryStatus};
use ddbound::nudd_bounds;
use ddbound::pauli::Pauli;
use ddbound::qdd_bounds::{self, EtaVector, OrderMode};
use ddbound::simulator::{self, CMatrix, ExperimentConfig};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

fn ddbound_bin(args: &[&str]) -> Result<(i32, String), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_ddbound"))
        .args(args)
        .output()
        .map_err(|e| format!("cannot run ddbound: {e}"))?;
    let code = out.status.code().ok_or("ddbound killed by a signal")?;
    Ok((code, String::from_utf8_lossy(&out.stdout).into_owned()))
}

/// Data rows of a CSV document as maps from column name to value.
fn csv_rows(text: &str) -> Vec<std::collections::HashMap<String, String>> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let Some(head) = lines.next() else { return Vec::new() };
    let cols: Vec<&str> = head.split(',').collect();
    lines
        .map(|l| cols.iter().map(|c| c.to_string()).zip(l.split(',').map(str::to_string)).collect())
        .collect()
}

fn field(row: &std::collections::HashMap<String, String>, name: &str) -> f64 {
    row[name].parse().unwrap_or(f64::NAN)
}

fn partition_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let eps = rng.gen_range(0.0..=5.0);
        let eta = EtaVector::new(rng.gen_range(0.0..=100.0), rng.gen_range(0.0..=100.0), rng.gen_range(0.0..=100.0))
            .map_err(|e| e.to_string())?;
        // The sum reaches e^1505, so compare logarithms: an absolute error of
        // δ in the log is a relative error of about δ in the sum.
        let logs: Vec<f64> = (0..8)
            .map(|j| qdd_bounds::log_bounding_function(j, eps, &eta))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = top + logs.iter().map(|l| (l - top).exp()).sum::<f64>().ln();
        let expected = eps * (1.0 + eta.sum());
        let rel = (log_sum - expected).abs().exp_m1();
        worst = worst.max(rel);
        ensure(rel <= 1e-12, || format!("eps={eps} eta={eta:?}: relative error {rel:e}"))?;
    }
    Ok(format!("100 samples, worst relative error {worst:.1e}"))
}

/// `S_j(z)` for complex `z`, straight from its product form.
fn s_complex(j: usize, z: Complex64, eta: &EtaVector) -> Complex64 {
    let (px, py, pz) = qdd_bounds::parity_of_class(j);
    let f = |p: u8, e: f64| if p == 1 { (z * e).sinh() } else { (z * e).cosh() };
    z.exp() * f(px, eta.x) * f(py, eta.y) * f(pz, eta.z)
}

/// Taylor coefficient of order `l` from samples of `S_j` on a circle: the
/// discrete Fourier form of the `l`-th finite difference, which avoids the
/// cancellation of real-axis stencils at high order.
fn fd_coefficient(j: usize, l: usize, eta: &EtaVector) -> f64 {
    let points = 64;
    let r = 0.5;
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..points {
        let theta = std::f64::consts::TAU * k as f64 / points as f64;
        acc += s_complex(j, Complex64::from_polar(r, theta), eta) * Complex64::from_polar(1.0, -(l as f64) * theta);
    }
    acc.re / points as f64 / r.powi(l as i32)
}

fn appendix_a() -> Outcome {
    let etas = [(0.3, 0.7, 1.3), (1.0, 1.0, 1.0), (2.0, 0.5, 0.1), (0.05, 3.0, 0.8)];
    let mut worst: f64 = 0.0;
    for (x, y, z) in etas {
        let eta = EtaVector::new(x, y, z).map_err(|e| e.to_string())?;
        for j in 1..=6 {
            for l in 0..=6 {
                let g = qdd_bounds::g_poly(j, l, &eta).map_err(|e| e.to_string())?;
                let fd = fd_coefficient(j, l, &eta);
                let scale = fd.abs().max(g.abs());
                if scale < 1e-12 {
                    continue;
                }
                let rel = (g - fd).abs() / scale;
                worst = worst.max(rel);
                ensure(rel <= 1e-6, || format!("g_{l}^({j}) at eta={eta:?}: {g} vs {fd}"))?;
            }
        }
        ensure(qdd_bounds::g_poly(4, 1, &eta).unwrap() == eta.x, || format!("g_1^(4) != eta_x at {eta:?}"))?;
        ensure(qdd_bounds::g_poly(1, 1, &eta).unwrap() == eta.z, || format!("g_1^(1) != eta_z at {eta:?}"))?;
    }
    Ok(format!("4 eta vectors x 6 classes x 7 orders, worst relative error {worst:.1e}; anchors exact"))
}

/// The decoupling-order table, written out row by row.
fn table_row(n1: usize, n2: usize, footnote: bool) -> (usize, usize, usize) {
    let d_x = n1;
    let d_y = match (n1 % 2, n2 % 2) {
        (0, 0) => n1.max(n2),
        (0, _) => (n1 + 1).max(n2),
        (_, 0) => n1,
        _ => n1 + 1,
    };
    let d_z = match (n1 % 2, footnote) {
        (0, _) => n2,
        (_, false) => (n1 + 1).min(n2),
        (_, true) => (2 * n1 + 1).min(n2),
    };
    (d_x, d_y, d_z)
}

fn table_fidelity() -> Outcome {
    for mode in [OrderMode::Analytic, OrderMode::NumericFootnote] {
        for n1 in 0..=10 {
            for n2 in 0..=10 {
                let o = qdd_bounds::decoupling_orders(n1, n2, mode);
                let want = table_row(n1, n2, mode == OrderMode::NumericFootnote);
                ensure((o.x, o.y, o.z) == want, || format!("{mode:?} ({n1},{n2}): {o:?} vs {want:?}"))?;
            }
        }
    }
    Ok("121 pairs x 2 modes".into())
}

fn order_certification() -> Outcome {
    let mut jobs = Vec::new();
    for n1 in [1, 2] {
        for n2 in [1, 2] {
            jobs.push((n1, n2, Backend::Exact, 0.0));
        }
    }
    for n1 in [3, 4] {
        for n2 in [3, 4] {
            jobs.push((n1, n2, Backend::Extended, 1e-20));
        }
    }
    let reports = jobs
        .par_iter()
        .map(|&(n1, n2, backend, threshold)| dyson::verify_orders(n1, n2, 4, backend, threshold, dyson::DEFAULT_MAX_DEPTH))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let mut words = 0;
    for r in &reports {
        ensure(r.passed && r.violations.is_empty(), || format!("QDD({},{}): {:?}", r.n1, r.n2, r.violations))?;
        for channel in Pauli::ERRORS {
            let d = r.orders.get(channel).unwrap();
            for n in 1..=d.min(4) {
                let e = r.entries.iter().find(|e| e.channel == channel && e.n == n);
                let e = e.ok_or_else(|| format!("QDD({},{}) lacks {channel:?} n={n}", r.n1, r.n2))?;
                ensure(e.status == EntryStatus::Vanishes, || format!("QDD({},{}): {e:?}", r.n1, r.n2))?;
                words += e.words;
            }
        }
    }
    Ok(format!("8 sequences, {words} words within their channel orders vanish"))
}

fn slope(e0: f64, v0: f64, e1: f64, v1: f64) -> f64 {
    (v1 / v0).ln() / (e1 / e0).ln()
}

fn figure2() -> Outcome {
    let (code, text) = ddbound_bin(&["bounds", "qdd", "--fig2"])?;
    ensure(code == 0, || format!("bounds qdd --fig2 exited {code}"))?;
    let rows = csv_rows(&text);
    ensure(rows.len() == 4 * 4 * 41, || format!("{} rows", rows.len()))?;
    let ns = [2usize, 6, 16, 34];
    let mut worst_slope: f64 = 0.0;
    for eta in [1e-4, 1e-2, 1.0, 1e2] {
        let eps_star = 1e-3 * f64::min(1.0, 1.0 / eta);
        let mut at_star = Vec::new();
        for n in ns {
            let curve: Vec<_> = rows
                .iter()
                .filter(|r| field(r, "eta_x") == eta && field(r, "N1") == n as f64)
                .map(|r| (field(r, "epsilon"), field(r, "D_bound")))
                .collect();
            ensure(curve.windows(2).all(|w| w[1].1 >= w[0].1), || format!("eta={eta} N={n} not monotone"))?;
            let l = |eps: f64| {
                qdd_bounds::distance_bound(n, n, eps, &EtaVector::isotropic(eta).unwrap(), OrderMode::Analytic)
                    .map(|r| r.distance_bound)
            };
            at_star.push(l(eps_star).map_err(|e| e.to_string())?);
            // The emitted curve must contain the window endpoints.
            let v0 = curve.iter().find(|c| (c.0 / 1e-4 - 1.0).abs() < 1e-12).map(|c| c.1);
            let v1 = curve.iter().find(|c| (c.0 / 1e-3 - 1.0).abs() < 1e-12).map(|c| c.1);
            let (Some(v0), Some(v1)) = (v0, v1) else {
                return Err(format!("eta={eta} N={n}: window endpoints missing from the grid"));
            };
            let s = slope(1e-4, v0, 1e-3, v1);
            worst_slope = worst_slope.max((s - (n + 1) as f64).abs());
            ensure((s - (n + 1) as f64).abs() <= 0.1, || format!("eta={eta} N={n}: slope {s}"))?;
        }
        ensure(at_star.windows(2).all(|w| w[1] < w[0]), || format!("eta={eta}: not ordered in N: {at_star:?}"))?;
    }
    Ok(format!("16 curves monotone and ordered; worst |slope-(N+1)| {worst_slope:.3}"))
}

fn figure5() -> Outcome {
    let m = 10;
    let mut worst: f64 = 0.0;
    for eta in [1e-4, 1e-2, 1.0, 1e2] {
        let s = nudd_bounds::asymptotic_scale(eta, m).map_err(|e| e.to_string())?;
        let (e0, e1) = (1e-4 * s, 1e-3 * s);
        let eps = format!("{e0:e},{e1:e}");
        let eta_s = format!("{eta:e}");
        let (code, text) =
            ddbound_bin(&["bounds", "nudd", "--m", "10", "--d-min", "5,10,20,40", "--eta", &eta_s, "--eps", &eps])?;
        ensure(code == 0, || format!("bounds nudd exited {code}"))?;
        let rows = csv_rows(&text);
        for d in [5usize, 10, 20, 40] {
            let pts: Vec<_> = rows
                .iter()
                .filter(|r| field(r, "d_min") == d as f64)
                .map(|r| (field(r, "epsilon"), field(r, "D_bound")))
                .collect();
            ensure(pts.len() == 2, || format!("eta={eta} d={d}: {} rows", pts.len()))?;
            let sl = slope(pts[0].0, pts[0].1, pts[1].0, pts[1].1);
            worst = worst.max((sl - (d + 1) as f64).abs());
            ensure((sl - (d + 1) as f64).abs() <= 0.1, || format!("eta={eta} d_min={d}: slope {sl}"))?;
        }
    }
    Ok(format!("16 curves, worst |slope-(d_min+1)| {worst:.3} over [1e-4,1e-3] x asymptotic scale"))
}

/// RK4 on the two-component weight equations of the collapsed NUDD model.
fn rk4(t: f64, j0: f64, j1: f64, g: f64) -> (f64, f64) {
    let rhs = |s: [f64; 2]| [j0 * s[0] + g * j1 * s[1], j0 * s[1] + j1 * s[0] + (g - 1.0) * j1 * s[1]];
    let rate = (j0 + g * j1) * t;
    let steps = (rate * 1000.0) as usize + 1000;
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
    (s[0], g * s[1])
}

fn nudd_ode() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let j0 = rng.gen_range(0.1..2.0);
        let j1 = rng.gen_range(1e-3..1.0);
        let m = rng.gen_range(1..=4);
        let t = rng.gen_range(0.01..1.0);
        let g = nudd_bounds::gamma(m).map_err(|e| e.to_string())? as f64;
        let (s0, sk) = rk4(t, j0, j1, g);
        let c0 = nudd_bounds::s_identity(t, j0, j1, m).map_err(|e| e.to_string())?;
        let ck = nudd_bounds::s_error_sum(t, j0, j1, m).map_err(|e| e.to_string())?;
        let rel = f64::max((s0 / c0 - 1.0).abs(), (sk / ck - 1.0).abs());
        worst = worst.max(rel);
        ensure(rel <= 1e-9, || format!("J0={j0} J1={j1} m={m} T={t}: relative error {rel:e}"))?;
    }
    Ok(format!("20 samples, worst relative error {worst:.1e}"))
}

/// Largest residual of the one-qubit unitarity relations, written out by
/// hand from the Pauli multiplication table.
fn one_qubit_relations(a: &[CMatrix]) -> f64 {
    let i = Complex64::new(0.0, 1.0);
    let id = CMatrix::identity(a[0].nrows(), a[0].ncols());
    let p = |m: usize, n: usize| a[m].adjoint() * &a[n];
    let complete = p(0, 0) + p(1, 1) + p(2, 2) + p(3, 3) - id;
    let rx = p(0, 1) + p(1, 0) + (p(2, 3) - p(3, 2)) * i;
    let ry = p(0, 2) + p(2, 0) + (p(3, 1) - p(1, 3)) * i;
    let rz = p(0, 3) + p(3, 0) + (p(1, 2) - p(2, 1)) * i;
    [complete, rx, ry, rz].iter().map(|m| m.norm()).fold(0.0, f64::max)
}

struct DominanceSummary {
    runs: usize,
    worst_margin: f64,
    worst_relation: f64,
}

fn dominance_runs() -> Result<DominanceSummary, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let sequences = [(1, 1), (2, 2), (1, 4), (3, 3)];
    let dims = [2, 8, 32];
    let mut configs = Vec::new();
    for k in 0..200 {
        let (n1, n2) = sequences[k % 4];
        let dim = dims[(k / 4) % 3];
        let eps = log_uniform(&mut rng, 1e-3, 1.0);
        let eta = EtaVector::new(
            log_uniform(&mut rng, 1e-2, 10.0),
            log_uniform(&mut rng, 1e-2, 10.0),
            log_uniform(&mut rng, 1e-2, 10.0),
        )
        .map_err(|e| e.to_string())?;
        configs.push(ExperimentConfig::qdd(n1, n2, eps, eta, dim, rng.gen()));
    }
    for _ in 0..20 {
        let eps = log_uniform(&mut rng, 1e-3, 0.3);
        let eta = log_uniform(&mut rng, 1e-2, 1.0);
        let dim = [2, 4, 8][rng.gen_range(0..3)];
        configs.push(ExperimentConfig::nudd(vec![1, 1, 1, 1], 2, eps, eta, dim, rng.gen()));
    }
    let checked = configs
        .par_iter()
        .map(|c| -> Result<(f64, f64), String> {
            let r = simulator::run_experiment(c).map_err(|e| format!("{c:?}: {e}"))?;
            let mut relation = r.relation_residual;
            if c.bath.norms.qubits() == 1 {
                let schedule = c.sequence.schedule(c.tie_order).map_err(|e| e.to_string())?;
                let model = simulator::HamiltonianModel::build(&c.bath).map_err(|e| e.to_string())?;
                let u = simulator::evolve(&schedule, &model, c.duration().map_err(|e| e.to_string())?)
                    .map_err(|e| e.to_string())?;
                let ops = simulator::extract_channel_ops(&u, 1).map_err(|e| e.to_string())?;
                relation = relation.max(one_qubit_relations(&ops));
            }
            ensure(r.worst_margin() >= -1e-12, || format!("{c:?}: margin {}", r.worst_margin()))?;
            ensure(r.unitarity_residual <= 1e-12, || format!("{c:?}: |U'U-1| = {:e}", r.unitarity_residual))?;
            Ok((r.worst_margin(), relation))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DominanceSummary {
        runs: checked.len(),
        worst_margin: checked.iter().map(|c| c.0).fold(f64::INFINITY, f64::min),
        worst_relation: checked.iter().map(|c| c.1).fold(0.0, f64::max),
    })
}

fn scaling() -> Outcome {
    let grid = qdd_bounds::log_grid(1e-3, 1e-2, 6);
    let fit = |n1, n2| {
        let config = ExperimentConfig::qdd(n1, n2, 1.0, EtaVector::isotropic(1.0).unwrap(), 4, 5);
        simulator::fit_scaling(&config, &grid).map_err(|e| e.to_string())
    };
    let mut report = Vec::new();
    for s in fit(2, 2)? {
        let v = s.slope.ok_or_else(|| format!("QDD(2,2) {} unresolved", s.channel))?;
        ensure(v >= 2.7, || format!("QDD(2,2) {} slope {v}", s.channel))?;
        report.push(format!("{}:{v:.2}", s.channel));
    }
    let z = fit(1, 4)?.into_iter().find(|s| s.channel == "z").ok_or("no z channel")?;
    let v = z.slope.ok_or("QDD(1,4) z unresolved")?;
    ensure(v >= 2.7, || format!("QDD(1,4) z slope {v}"))?;
    report.push(format!("QDD(1,4) z:{v:.2}"));

    for (bz, eps) in [(0.3, 0.5), (1.0, 2.0), (2.0, 0.1), (0.7, 1.3)] {
        let eta = EtaVector::new(0.0, 0.0, bz).unwrap();
        let r = simulator::run_experiment(&ExperimentConfig::qdd(0, 0, eps, eta, 1, 11)).map_err(|e| e.to_string())?;
        let want = (bz * eps).sin().abs();
        ensure((r.distance_actual - want).abs() <= 1e-12, || format!("free dephasing {} vs {want}", r.distance_actual))?;
    }
    for n2 in 1..=5 {
        for n1 in 0..=3 {
            let eta = EtaVector::new(0.0, 0.0, 0.9).unwrap();
            let r = simulator::run_experiment(&ExperimentConfig::qdd(n1, n2, 0.8, eta, 1, 4)).map_err(|e| e.to_string())?;
            ensure(r.distance_actual <= 1e-12, || format!("QDD({n1},{n2}) dephasing left {:e}", r.distance_actual))?;
        }
    }
    Ok(format!("slopes {}; scalar-bath cases exact", report.join(" ")))
}

fn negative_control() -> Outcome {
    let (code, text) =
        ddbound_bin(&["verify", "bound", "--qdd", "2", "2", "--eps", "0.1", "--eta", "1", "--seeds", "5", "--loosen", "-1"])?;
    ensure(code == 1, || format!("exit code {code}, expected 1"))?;
    let flagged = csv_rows(&text).iter().filter(|r| r["pass"] == "false").count();
    ensure(flagged == 5, || format!("{flagged} of 5 runs flagged"))?;
    let (code, _) = ddbound_bin(&["verify", "bound", "--qdd", "2", "2", "--eps", "0.1", "--eta", "1", "--seeds", "5"])?;
    ensure(code == 0, || format!("unloosened run exited {code}"))?;
    Ok("loosened bound caught (exit 1), honest bound passes (exit 0)".into())
}

fn report(number: usize, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = f();
    let elapsed = start.elapsed();
    let outcome = outcome.and_then(|msg| {
        if elapsed <= budget {
            Ok(msg)
        } else {
            Err(format!("{msg}; took {elapsed:.1?}, budget {budget:?}"))
        }
    });
    match &outcome {
        Ok(msg) => println!("criterion {number:>2}: PASS  {msg} [{elapsed:.2?}]"),
        Err(msg) => println!("criterion {number:>2}: FAIL  {msg} [{elapsed:.2?}]"),
    }
    outcome.is_ok()
}

fn main() -> ExitCode {
    let s = Duration::from_secs;
    let mut ok = true;
    ok &= report(1, s(1), partition_identity);
    ok &= report(2, s(1), appendix_a);
    ok &= report(3, s(1), table_fidelity);
    ok &= report(4, s(60), order_certification);
    ok &= report(5, s(10), figure2);
    ok &= report(6, s(10), figure5);
    ok &= report(7, s(5), nudd_ode);

    let start = Instant::now();
    let dominance = dominance_runs();
    let elapsed = start.elapsed();
    ok &= report(8, s(600), || {
        let d = dominance.as_ref().map_err(Clone::clone)?;
        Ok(format!("{} runs (200 QDD, 20 NUDD), worst margin {:.3e} [{elapsed:.2?} incl. 9]", d.runs, d.worst_margin))
    });
    ok &= report(9, s(600), || {
        let d = dominance.as_ref().map_err(|e| format!("runs failed: {e}"))?;
        ensure(d.worst_relation <= 1e-10, || format!("worst relation residual {:e}", d.worst_relation))?;
        Ok(format!("worst unitarity-relation residual {:.1e} over {} runs", d.worst_relation, d.runs))
    });
    ok &= report(10, s(120), scaling);
    ok &= report(11, s(60), negative_control);

    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
