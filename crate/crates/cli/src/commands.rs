use ddbound::dyson::{self, Backend};
use ddbound::nudd_bounds::{self, NuddPanel, NuddSweep};
use ddbound::qdd_bounds::{self, EtaVector, OrderMode, QddSweep};
use ddbound::sequences::{nudd_schedule, qdd_schedule, PulseSchedule};
use ddbound::simulator::{self, ExperimentConfig, SimResult};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::args::*;
use crate::failure::Failure;
use crate::output::{emit, json_document, mode_label, num, Csv, Header};

/// Margins below this count as violations; above it they are rounding.
const MARGIN_FLOOR: f64 = -1e-12;
/// Largest tolerated residual of the unitarity relations.
const RELATION_TOLERANCE: f64 = 1e-10;

const DEFAULT_EPS_MIN: f64 = 1e-4;
const DEFAULT_EPS_MAX: f64 = 1.0;
const DEFAULT_EPS_POINTS: i64 = 41;

pub fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Sequence(o) => sequence(o.resolve()?),
        Command::Bounds(BoundsCommand::Qdd(o)) => bounds_qdd(o.resolve()?),
        Command::Bounds(BoundsCommand::Nudd(o)) => bounds_nudd(o.resolve()?),
        Command::Simulate(o) => simulate(o.resolve()?),
        Command::Verify(VerifyCommand::Orders(o)) => verify_orders(o.resolve()?),
        Command::Verify(VerifyCommand::Bound(o)) => verify_bound(o.resolve()?),
        Command::Sweep(o) => sweep(o.resolve()?),
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Invalid(msg.into())
}

fn count(flag: &str, v: i64) -> Result<usize, Failure> {
    usize::try_from(v).map_err(|_| invalid(format!("--{flag} must be non-negative, got {v}")))
}

fn counts(flag: &str, vs: &[i64]) -> Result<Vec<usize>, Failure> {
    vs.iter().map(|&v| count(flag, v)).collect()
}

fn positive(flag: &str, v: f64) -> Result<f64, Failure> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(format!("--{flag} must be finite and > 0, got {v}")))
    }
}

fn non_negative(flag: &str, v: f64) -> Result<f64, Failure> {
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(invalid(format!("--{flag} must be finite and >= 0, got {v}")))
    }
}

fn pair(flag: &str, v: &[i64]) -> Result<(usize, usize), Failure> {
    match v {
        [a, b] => Ok((count(flag, *a)?, count(flag, *b)?)),
        _ => Err(invalid(format!("--{flag} takes two orders N1 N2"))),
    }
}

fn pairs(flag: &str, v: &[i64]) -> Result<Vec<(usize, usize)>, Failure> {
    if v.len() % 2 != 0 {
        return Err(invalid(format!("--{flag} takes pairs N1 N2")));
    }
    v.chunks(2).map(|c| pair(flag, c)).collect()
}

fn eta_vectors(iso: Option<&[f64]>, triples: Option<&[f64]>) -> Result<Vec<EtaVector>, Failure> {
    let mut out = Vec::new();
    for &e in iso.unwrap_or_default() {
        out.push(EtaVector::isotropic(non_negative("eta", e)?)?);
    }
    if let Some(t) = triples {
        if t.len() % 3 != 0 {
            return Err(invalid("--eta-vec takes triples eta_x eta_y eta_z"));
        }
        for c in t.chunks(3) {
            out.push(EtaVector::new(
                non_negative("eta-vec", c[0])?,
                non_negative("eta-vec", c[1])?,
                non_negative("eta-vec", c[2])?,
            )?);
        }
    }
    Ok(out)
}

/// Fills the grid defaults and returns the epsilon values.
fn epsilon_grid(grid: &mut GridOpts) -> Result<Vec<f64>, Failure> {
    if let Some(eps) = &grid.eps {
        return eps.iter().map(|&e| positive("eps", e)).collect();
    }
    let min = positive("eps-min", *grid.eps_min.get_or_insert(DEFAULT_EPS_MIN))?;
    let max = positive("eps-max", *grid.eps_max.get_or_insert(DEFAULT_EPS_MAX))?;
    let points = count("eps-points", *grid.eps_points.get_or_insert(DEFAULT_EPS_POINTS))?;
    if min > max {
        return Err(invalid(format!("--eps-min {min} exceeds --eps-max {max}")));
    }
    Ok(qdd_bounds::log_grid(min, max, points))
}

/// The effective configuration recorded in headers. The output path is not
/// part of it, so the same run hashes identically wherever it is written.
fn effective(opts: &impl Serialize) -> Value {
    let mut v = serde_json::to_value(opts).expect("options serialize");
    if let Value::Object(map) = &mut v {
        map.remove("out");
        map.retain(|_, x| !x.is_null());
    }
    v
}

fn sequence(mut o: SequenceOpts) -> Result<(), Failure> {
    let schedule: PulseSchedule = match (&o.qdd, &o.nudd) {
        (Some(q), None) => {
            let (n1, n2) = pair("qdd", q)?;
            qdd_schedule(n1, n2)
        }
        (None, Some(orders)) => {
            let orders = counts("nudd", orders)?;
            let m = count("qubits", o.qubits.ok_or_else(|| invalid("--nudd needs --qubits"))?)?;
            nudd_schedule(&orders, m)?
        }
        (Some(_), Some(_)) => return Err(invalid("give either --qdd or --nudd, not both")),
        (None, None) => return Err(invalid("give --qdd N1 N2 or --nudd ORDERS --qubits M")),
    };
    let tie = *o.tie_order.get_or_insert_with(Default::default);
    let schedule = schedule.with_tie_order(tie);

    let header = Header::new("sequence", effective(&o), None, "n/a");
    let mut csv = Csv::new(&header, &["time", "axis", "qubit", "level"]);
    for e in schedule.events() {
        csv.row(&[num(e.time), e.axis.as_str().to_string(), e.qubit.to_string(), e.level.to_string()]);
    }
    emit(&csv.into_string(), o.out.as_deref(), false)
}

/// Finishes a bounds CSV: rows that did not converge were written as NaN and
/// turn into exit code 3 once the document is out.
fn finish_bounds(mut csv: Csv, failures: Vec<(usize, String)>, out: Option<&std::path::Path>) -> Result<(), Failure> {
    for (row, msg) in &failures {
        csv.comment(&format!("row {row} not computed: {msg}"));
    }
    emit(&csv.into_string(), out, false)?;
    match failures.first() {
        None => Ok(()),
        Some((row, msg)) => Err(Failure::NonConvergence(format!(
            "{} row(s) not computed, first at row {row}: {msg}",
            failures.len()
        ))),
    }
}

/// Collects per-row errors, failing hard on anything but non-convergence.
fn split_rows<T>(results: Vec<ddbound::Result<T>>) -> Result<(Vec<Option<T>>, Vec<(usize, String)>), Failure> {
    let mut rows = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(v) => rows.push(Some(v)),
            Err(e @ ddbound::Error::NonConvergence { .. }) => {
                failures.push((i, e.to_string()));
                rows.push(None);
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok((rows, failures))
}

fn bounds_qdd(mut o: BoundsQddOpts) -> Result<(), Failure> {
    let epsilons = epsilon_grid(&mut o.grid)?;
    let mode = *o.mode.get_or_insert(OrderMode::Analytic);
    let mut sweep = if o.fig2 {
        QddSweep::figure2(epsilons)
    } else if o.fig3 {
        QddSweep::figure3(epsilons)
    } else if o.fig4 {
        QddSweep::figure4(epsilons)
    } else {
        let sequences = match &o.qdd {
            Some(q) => pairs("qdd", q)?,
            None => Vec::new(),
        };
        QddSweep { epsilons, sequences, etas: Vec::new(), mode }
    };
    sweep.mode = mode;
    let etas = eta_vectors(o.eta.as_deref(), o.eta_vec.as_deref())?;
    if !etas.is_empty() {
        sweep.etas = etas;
    } else if sweep.etas.is_empty() {
        o.eta = Some(vec![1.0]);
        sweep.etas = vec![EtaVector::isotropic(1.0)?];
    }

    let cells = sweep.cells();
    let (rows, failures) = split_rows(cells.par_iter().map(|c| sweep.evaluate(c)).collect())?;

    let header = Header::new("bounds qdd", effective(&o), None, &mode_label(mode));
    let mut csv = Csv::new(
        &header,
        &[
            "epsilon", "N1", "N2", "eta_x", "eta_y", "eta_z", "d_x", "d_y", "d_z", "L_x", "L_y", "L_z", "D_bound",
            "D_leading",
        ],
    );
    for (cell, row) in cells.iter().zip(rows) {
        let orders = qdd_bounds::decoupling_orders(cell.n1, cell.n2, mode);
        let (l, d, lead) = match row {
            Some(r) => (r.channel_bounds, r.distance_bound, r.leading_term),
            None => (qdd_bounds::ChannelBounds { x: f64::NAN, y: f64::NAN, z: f64::NAN }, f64::NAN, f64::NAN),
        };
        csv.row(&[
            num(cell.epsilon),
            cell.n1.to_string(),
            cell.n2.to_string(),
            num(cell.eta.x),
            num(cell.eta.y),
            num(cell.eta.z),
            orders.x.to_string(),
            orders.y.to_string(),
            orders.z.to_string(),
            num(l.x),
            num(l.y),
            num(l.z),
            num(d),
            num(lead),
        ]);
    }
    finish_bounds(csv, failures, o.out.as_deref())
}

fn bounds_nudd(mut o: BoundsNuddOpts) -> Result<(), Failure> {
    let fig_m = o.fig5.then_some(10);
    let m = count("m", *o.m.get_or_insert(fig_m.unwrap_or(1)))?;
    let d_mins = match (&o.d_min, &o.nudd) {
        (Some(d), _) => counts("d-min", d)?,
        (None, Some(orders)) => {
            let schedule = nudd_schedule(&counts("nudd", orders)?, m)?;
            vec![nudd_bounds::schedule_decoupling_order(&schedule)]
        }
        (None, None) if o.fig5 => vec![5, 10, 20, 40],
        (None, None) => Vec::new(),
    };
    let etas = match &o.eta {
        Some(e) => e.iter().map(|&x| non_negative("eta", x)).collect::<Result<Vec<_>, _>>()?,
        None if o.fig5 => vec![1e-4, 1e-2, 1.0, 1e2],
        None => vec![1.0],
    };
    o.eta = Some(etas.clone());
    if o.d_min.is_none() && o.nudd.is_none() && o.fig5 {
        o.d_min = Some(d_mins.iter().map(|&d| d as i64).collect());
    }
    let sweep = if o.fig5 && !o.grid.explicit() {
        let points = count("eps-points", *o.grid.eps_points.get_or_insert(DEFAULT_EPS_POINTS))?;
        let panels = etas
            .iter()
            .map(|&eta| {
                let s = nudd_bounds::asymptotic_scale(eta, m)?;
                Ok(NuddPanel { eta, epsilons: qdd_bounds::log_grid(1e-4 * s, s, points) })
            })
            .collect::<ddbound::Result<Vec<_>>>()?;
        NuddSweep { m, d_mins, panels }
    } else {
        let epsilons = epsilon_grid(&mut o.grid)?;
        NuddSweep::uniform(m, d_mins, &etas, &epsilons)
    };

    let cells = sweep.cells();
    let (rows, failures) = split_rows(cells.par_iter().map(|c| sweep.evaluate(c)).collect())?;

    let header = Header::new("bounds nudd", effective(&o), None, "analytic (rigorous)");
    let mut csv = Csv::new(&header, &["epsilon", "m", "d_min", "eta", "Delta", "D_bound", "D_leading"]);
    for (cell, row) in cells.iter().zip(rows) {
        let (delta, d, lead) = row.map_or((f64::NAN, f64::NAN, f64::NAN), |r| (r.delta, r.distance_bound, r.leading_term));
        csv.row(&[
            num(cell.epsilon),
            cell.m.to_string(),
            cell.d_min.to_string(),
            num(cell.eta),
            num(delta),
            num(d),
            num(lead),
        ]);
    }
    finish_bounds(csv, failures, o.out.as_deref())
}

/// Builds the experiment for `bath_seed`, filling defaults into `e`.
fn experiment(e: &mut ExperimentOpts, bath_seed: u64) -> Result<ExperimentConfig, Failure> {
    let epsilon = positive("eps", *e.eps.get_or_insert(0.1))?;
    let bath_dim = count("bath-dim", *e.bath_dim.get_or_insert(4))?;
    let mut config = match (&e.qdd, &e.nudd) {
        (Some(q), None) => {
            let (n1, n2) = pair("qdd", q)?;
            let eta = match &e.eta_vec {
                Some(t) => eta_vectors(None, Some(t))?[0],
                None => EtaVector::isotropic(non_negative("eta", *e.eta.get_or_insert(1.0))?)?,
            };
            ExperimentConfig::qdd(n1, n2, epsilon, eta, bath_dim, bath_seed)
        }
        (None, Some(orders)) => {
            if e.eta_vec.is_some() {
                return Err(invalid("--eta-vec applies to --qdd only; use --eta with --nudd"));
            }
            let orders = counts("nudd", orders)?;
            let m = count("qubits", e.qubits.ok_or_else(|| invalid("--nudd needs --qubits"))?)?;
            let eta = non_negative("eta", *e.eta.get_or_insert(1.0))?;
            ExperimentConfig::nudd(orders, m, epsilon, eta, bath_dim, bath_seed)
        }
        (Some(_), Some(_)) => return Err(invalid("give either --qdd or --nudd, not both")),
        (None, None) => return Err(invalid("give --qdd N1 N2 or --nudd ORDERS --qubits M")),
    };
    config.initial_state = *e.initial_state.get_or_insert(config.initial_state);
    config.bath_state = *e.bath_state.get_or_insert(config.bath_state);
    config.tie_order = *e.tie_order.get_or_insert(config.tie_order);
    config.mode = *e.mode.get_or_insert(config.mode);
    Ok(config)
}

#[derive(Serialize)]
struct SimulateRecord<'a> {
    experiment: &'a ExperimentConfig,
    result: &'a SimResult,
}

fn simulate(mut o: SimulateOpts) -> Result<(), Failure> {
    let seed = *o.seed.get_or_insert(0);
    let config = experiment(&mut o.experiment, seed)?;
    let result = simulator::run_experiment(&config)?;
    let header = Header::new("simulate", effective(&o), Some(seed), &mode_label(config.mode));
    let text = json_document(&header, "record", &SimulateRecord { experiment: &config, result: &result })?;
    emit(&text, o.out.as_deref(), true)
}

const DOMINANCE_COLUMNS: [&str; 8] = [
    "distance_actual",
    "distance_bound",
    "margin",
    "worst_channel_margin",
    "unitarity_residual",
    "relation_residual",
    "loosen",
    "pass",
];

/// Dominance fields of one run with the bound shifted by `loosen`.
fn dominance_fields(r: &SimResult, loosen: f64) -> (Vec<String>, bool) {
    let margin = r.margin + loosen;
    let channel = r.channel_margins.iter().map(|m| m + loosen).fold(f64::INFINITY, f64::min);
    let pass = margin >= MARGIN_FLOOR && channel >= MARGIN_FLOOR && r.relation_residual <= RELATION_TOLERANCE;
    let fields = vec![
        num(r.distance_actual),
        num(r.distance_bound + loosen),
        num(margin),
        num(channel),
        num(r.unitarity_residual),
        num(r.relation_residual),
        num(loosen),
        pass.to_string(),
    ];
    (fields, pass)
}

fn dominance_verdict(failed: usize, total: usize) -> Result<(), Failure> {
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::Assertion(format!(
            "{failed} of {total} runs violated a bound or a unitarity relation"
        )))
    }
}

fn verify_bound(mut o: VerifyBoundOpts) -> Result<(), Failure> {
    let seed = *o.seed.get_or_insert(0);
    let runs = count("seeds", *o.seeds.get_or_insert(20))?;
    let loosen = *o.loosen.get_or_insert(0.0);
    if !loosen.is_finite() {
        return Err(invalid(format!("--loosen must be finite, got {loosen}")));
    }
    let base = experiment(&mut o.experiment, seed)?;
    let results = (0..runs)
        .into_par_iter()
        .map(|k| {
            let mut config = base.clone();
            config.bath.seed = simulator::derive_seed(seed, k as u64);
            simulator::run_experiment(&config).map(|r| (config.bath.seed, r))
        })
        .collect::<ddbound::Result<Vec<_>>>()?;

    let header = Header::new("verify bound", effective(&o), Some(seed), &mode_label(base.mode));
    let mut columns = vec!["run", "bath_seed", "epsilon", "bath_dim"];
    columns.extend(DOMINANCE_COLUMNS);
    let mut csv = Csv::new(&header, &columns);
    let mut failed = 0;
    for (k, (bath_seed, r)) in results.iter().enumerate() {
        let (fields, pass) = dominance_fields(r, loosen);
        failed += usize::from(!pass);
        let mut row = vec![k.to_string(), bath_seed.to_string(), num(base.epsilon), base.bath.dim.to_string()];
        row.extend(fields);
        csv.row(&row);
    }
    emit(&csv.into_string(), o.out.as_deref(), true)?;
    dominance_verdict(failed, runs)
}

fn sweep(mut o: SweepOpts) -> Result<(), Failure> {
    let sequences = pairs("qdd", o.qdd.get_or_insert_with(|| vec![2, 2]))?;
    let epsilons = o.eps.get_or_insert_with(|| vec![0.01, 0.1]).clone();
    let etas = o.eta.get_or_insert_with(|| vec![1.0]).clone();
    let dims = counts("bath-dim", o.bath_dim.get_or_insert_with(|| vec![4]))?;
    let runs = count("seeds", *o.seeds.get_or_insert(4))?;
    let seed = *o.seed.get_or_insert(0);
    let loosen = *o.loosen.get_or_insert(0.0);
    if !loosen.is_finite() {
        return Err(invalid(format!("--loosen must be finite, got {loosen}")));
    }
    let initial_state = *o.initial_state.get_or_insert_with(Default::default);
    let bath_state = *o.bath_state.get_or_insert_with(Default::default);
    let mode = *o.mode.get_or_insert(OrderMode::Analytic);

    let mut cells = Vec::new();
    for &(n1, n2) in &sequences {
        for &eps in &epsilons {
            for &eta in &etas {
                for &dim in &dims {
                    for _ in 0..runs {
                        let index = cells.len() as u64;
                        let mut c = ExperimentConfig::qdd(
                            n1,
                            n2,
                            positive("eps", eps)?,
                            EtaVector::isotropic(non_negative("eta", eta)?)?,
                            dim,
                            simulator::derive_seed(seed, index),
                        );
                        c.initial_state = initial_state;
                        c.bath_state = bath_state;
                        c.mode = mode;
                        cells.push((c, eta));
                    }
                }
            }
        }
    }
    let results = cells
        .par_iter()
        .map(|(c, _)| simulator::run_experiment(c))
        .collect::<ddbound::Result<Vec<_>>>()?;

    let header = Header::new("sweep", effective(&o), Some(seed), &mode_label(mode));
    let mut columns = vec!["cell", "N1", "N2", "epsilon", "eta", "bath_dim", "bath_seed"];
    columns.extend(DOMINANCE_COLUMNS);
    let mut csv = Csv::new(&header, &columns);
    let mut failed = 0;
    for (i, ((c, eta), r)) in cells.iter().zip(&results).enumerate() {
        let simulator::SequenceSpec::Qdd { n1, n2 } = c.sequence else { unreachable!("sweeps are QDD only") };
        let (fields, pass) = dominance_fields(r, loosen);
        failed += usize::from(!pass);
        let mut row = vec![
            i.to_string(),
            n1.to_string(),
            n2.to_string(),
            num(c.epsilon),
            num(*eta),
            c.bath.dim.to_string(),
            c.bath.seed.to_string(),
        ];
        row.extend(fields);
        csv.row(&row);
    }
    emit(&csv.into_string(), o.out.as_deref(), false)?;
    dominance_verdict(failed, cells.len())
}

fn verify_orders(mut o: VerifyOrdersOpts) -> Result<(), Failure> {
    let (n1, n2) = pair("qdd", o.qdd.as_deref().ok_or_else(|| invalid("verify orders needs --qdd N1 N2"))?)?;
    let n_max = count("nmax", *o.nmax.get_or_insert(4))?;
    let max_depth = count("max-depth", *o.max_depth.get_or_insert(dyson::DEFAULT_MAX_DEPTH as i64))?;
    let default_backend = if Backend::exact_supported(n1, n2) { Backend::Exact } else { Backend::Extended };
    let backend = *o.backend.get_or_insert(default_backend);
    let threshold = non_negative("threshold", *o.threshold.get_or_insert(dyson::EXTENDED_ZERO_THRESHOLD))?;
    if backend == Backend::Exact && !Backend::exact_supported(n1, n2) {
        return Err(invalid(format!(
            "--backend exact needs rational pulse times (N1, N2 <= 2), got QDD({n1},{n2})"
        )));
    }
    let report = dyson::verify_orders(n1, n2, n_max, backend, threshold, max_depth)?;
    let header = Header::new("verify orders", effective(&o), None, &mode_label(OrderMode::Analytic));
    emit(&json_document(&header, "report", &report)?, o.out.as_deref(), false)?;
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Assertion(format!(
            "{} word(s) survive below their channel's decoupling order",
            report.violations.len()
        )))
    }
}
