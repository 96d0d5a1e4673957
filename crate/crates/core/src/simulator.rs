//! Exact evolution of qubits coupled to a finite random bath.
//!
//! The Hamiltonian `H = Σ_μ σ_μ ⊗ B_μ` is constant between pulses, so the
//! lab-frame propagator is a product of `exp(−i H τ T)` factors (one
//! eigendecomposition of `H`) and instantaneous Pauli pulses. Pulses are
//! applied as exact Pauli matrices; the global phase of an ideal π rotation
//! is dropped.
//!
//! Basis index = `system · d_B + bath`, with qubit 0 the most significant
//! system bit.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::nudd_bounds::{nudd_distance_bound, schedule_decoupling_order};
use crate::pauli::PauliString;
use crate::qdd_bounds::{distance_bound, ChannelBounds, EtaVector, OrderMode};
use crate::sequences::{nudd_schedule, qdd_schedule, Axis, PulseSchedule, TieOrder};
use crate::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Largest supported bath dimension.
pub const MAX_BATH_DIM: usize = 64;
/// Largest supported total Hilbert-space dimension.
pub const MAX_TOTAL_DIM: usize = 256;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// SplitMix64 mix of a master seed and a cell index.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn complex_normal(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Largest singular value.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

fn hermitian_norm(m: &CMatrix) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.amax()
}

/// Random Hermitian `dim × dim` matrix with spectral norm exactly `j`,
/// drawn from the Gaussian unitary ensemble and rescaled.
pub fn random_bath(dim: usize, j: f64, seed: u64) -> Result<CMatrix> {
    if dim == 0 {
        return Err(Error::invalid("bath dimension must be at least 1"));
    }
    if !(j.is_finite() && j >= 0.0) {
        return Err(Error::invalid(format!("coupling norm must be finite and >= 0, got {j}")));
    }
    if j == 0.0 {
        return Ok(CMatrix::zeros(dim, dim));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if dim == 1 {
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        return Ok(CMatrix::from_element(1, 1, Complex64::new(sign * j, 0.0)));
    }
    let a = CMatrix::from_fn(dim, dim, |_, _| complex_normal(&mut rng));
    let h = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let norm = hermitian_norm(&h);
    Ok(h * Complex64::new(j / norm, 0.0))
}

/// Norms of the bath operators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum CouplingNorms {
    /// One qubit: `(J0, Jx, Jy, Jz)`.
    Qdd { j0: f64, jx: f64, jy: f64, jz: f64 },
    /// `m` qubits, pure-bath norm `J0`, every non-identity string `J1`.
    Nudd { m: usize, j0: f64, j1: f64 },
    /// `m` qubits, one norm per Pauli string in index order.
    PerString { m: usize, norms: Vec<f64> },
}

impl CouplingNorms {
    pub fn qubits(&self) -> usize {
        match self {
            CouplingNorms::Qdd { .. } => 1,
            CouplingNorms::Nudd { m, .. } | CouplingNorms::PerString { m, .. } => *m,
        }
    }

    /// Norms indexed by [`PauliString::index`].
    pub fn per_string(&self) -> Result<Vec<f64>> {
        match self {
            CouplingNorms::Qdd { j0, jx, jy, jz } => Ok(vec![*j0, *jx, *jy, *jz]),
            CouplingNorms::Nudd { m, j0, j1 } => {
                let count = 4usize.pow(*m as u32);
                Ok((0..count).map(|i| if i == 0 { *j0 } else { *j1 }).collect())
            }
            CouplingNorms::PerString { m, norms } => {
                let count = 4usize.pow(*m as u32);
                if norms.len() != count {
                    return Err(Error::DimensionMismatch(format!(
                        "{m} qubits need {count} coupling norms, got {}",
                        norms.len()
                    )));
                }
                Ok(norms.clone())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BathSpec {
    pub dim: usize,
    pub seed: u64,
    pub norms: CouplingNorms,
}

/// `H = Σ_μ σ_μ ⊗ B_μ` on `2^m · d_B` dimensions.
#[derive(Clone, Debug)]
pub struct HamiltonianModel {
    pub qubits: usize,
    pub bath_dim: usize,
    /// `B_μ` indexed by [`PauliString::index`].
    pub couplings: Vec<CMatrix>,
    pub total: CMatrix,
}

/// Dense matrix of a Pauli string.
pub fn pauli_string_matrix(s: &PauliString) -> CMatrix {
    let mut out = CMatrix::from_element(1, 1, ONE);
    for p in &s.0 {
        let m = p.matrix();
        let single = CMatrix::from_fn(2, 2, |r, c| Complex64::new(m[r][c].0, m[r][c].1));
        out = out.kronecker(&single);
    }
    out
}

impl HamiltonianModel {
    pub fn build(spec: &BathSpec) -> Result<Self> {
        let m = spec.norms.qubits();
        if m == 0 || m > 2 {
            return Err(Error::invalid(format!("the simulator supports 1 or 2 qubits, got {m}")));
        }
        if spec.dim == 0 || spec.dim > MAX_BATH_DIM {
            return Err(Error::invalid(format!("bath dimension must lie in 1..={MAX_BATH_DIM}, got {}", spec.dim)));
        }
        let sys = 1usize << m;
        if sys * spec.dim > MAX_TOTAL_DIM {
            return Err(Error::invalid(format!(
                "total dimension {} exceeds {MAX_TOTAL_DIM}",
                sys * spec.dim
            )));
        }
        let norms = spec.norms.per_string()?;
        let couplings = norms
            .iter()
            .enumerate()
            .map(|(i, &j)| random_bath(spec.dim, j, derive_seed(spec.seed, i as u64)))
            .collect::<Result<Vec<_>>>()?;
        let mut total = CMatrix::zeros(sys * spec.dim, sys * spec.dim);
        for (i, b) in couplings.iter().enumerate() {
            total += pauli_string_matrix(&PauliString::from_index(i, m)).kronecker(b);
        }
        Ok(HamiltonianModel { qubits: m, bath_dim: spec.dim, couplings, total })
    }

    pub fn dim(&self) -> usize {
        self.total.nrows()
    }
}

/// Left-multiplies `u` by the pulse `σ_axis` on `qubit`.
fn apply_pulse(u: &mut CMatrix, axis: Axis, qubit: usize, qubits: usize, bath_dim: usize) {
    let bit = 1usize << (qubits - 1 - qubit);
    let sys = 1usize << qubits;
    for s in 0..sys {
        if s & bit == 0 {
            continue;
        }
        for b in 0..bath_dim {
            let r1 = s * bath_dim + b;
            match axis {
                Axis::X => u.swap_rows(r1, (s ^ bit) * bath_dim + b),
                Axis::Z => u.row_mut(r1).neg_mut(),
            }
        }
    }
}

/// Propagator over `[0, T]` under the schedule, in the lab frame.
pub fn evolve(schedule: &PulseSchedule, model: &HamiltonianModel, t: f64) -> Result<CMatrix> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::invalid(format!("duration T must be finite and > 0, got {t}")));
    }
    if schedule.qubit_count() != model.qubits {
        return Err(Error::DimensionMismatch(format!(
            "schedule acts on {} qubits, model on {}",
            schedule.qubit_count(),
            model.qubits
        )));
    }
    let eig = SymmetricEigen::new(model.total.clone());
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::LinearAlgebra("eigendecomposition of H produced non-finite values".into()));
    }
    let v = eig.eigenvectors;
    let v_adj = v.adjoint();
    let propagate = |u: &CMatrix, tau: f64| -> CMatrix {
        if tau == 0.0 {
            return u.clone();
        }
        // V diag(e^{−iλτT}) V† u
        let mut w = &v_adj * u;
        for (r, lambda) in eig.eigenvalues.iter().enumerate() {
            let phase = Complex64::from_polar(1.0, -lambda * tau * t);
            for c in 0..w.ncols() {
                w[(r, c)] *= phase;
            }
        }
        &v * w
    };
    let dim = model.dim();
    let mut u = CMatrix::identity(dim, dim);
    let mut now = 0.0;
    for event in schedule.events() {
        u = propagate(&u, event.time - now);
        now = event.time;
        apply_pulse(&mut u, event.axis, event.qubit, model.qubits, model.bath_dim);
    }
    Ok(propagate(&u, 1.0 - now))
}

/// Frobenius norm of `U†U − 1`, an upper bound on its spectral norm.
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let n = u.nrows();
    (u.adjoint() * u - CMatrix::identity(n, n)).norm()
}

/// `A_μ = 2^{−m} tr_S[(σ_μ ⊗ 1)† U]`, indexed by [`PauliString::index`].
pub fn extract_channel_ops(u: &CMatrix, qubits: usize) -> Result<Vec<CMatrix>> {
    let sys = 1usize << qubits;
    if u.nrows() != u.ncols() || u.nrows() % sys != 0 {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} operator is not on 2^{qubits} x bath",
            u.nrows(),
            u.ncols()
        )));
    }
    let d = u.nrows() / sys;
    let scale = Complex64::new(1.0 / sys as f64, 0.0);
    Ok(PauliString::all(qubits)
        .map(|s| {
            let sigma = pauli_string_matrix(&s);
            let mut a = CMatrix::zeros(d, d);
            for r in 0..sys {
                for c in 0..sys {
                    // (σ†)_{c r} multiplies the block U_{r c}
                    let coeff = sigma[(r, c)].conj();
                    if coeff != ZERO {
                        a += u.view((r * d, c * d), (d, d)) * coeff;
                    }
                }
            }
            a * scale
        })
        .collect())
}

/// `Σ_μ σ_μ ⊗ A_μ`.
pub fn reconstruct(ops: &[CMatrix], qubits: usize) -> CMatrix {
    let mut out: Option<CMatrix> = None;
    for (i, a) in ops.iter().enumerate() {
        let term = pauli_string_matrix(&PauliString::from_index(i, qubits)).kronecker(a);
        out = Some(match out {
            Some(acc) => acc + term,
            None => term,
        });
    }
    out.unwrap_or_else(|| CMatrix::zeros(0, 0))
}

/// Residuals of the relations implied by `U†U = 1`: for each string `κ`,
/// `‖Σ_{σ_μ σ_ν ∝ σ_κ} c_{μν} A_μ† A_ν − δ_{κ0} 1‖` (Frobenius), where
/// `σ_μ σ_ν = c_{μν} σ_κ`. For one qubit, `κ = 0` is `Σ A†A = 1` and
/// `κ = x` is `A_x†A_0 + A_0†A_x + i A_y†A_z − i A_z†A_y = 0`.
pub fn unitarity_relations(ops: &[CMatrix], qubits: usize) -> Vec<f64> {
    let count = ops.len();
    let sys = 1usize << qubits;
    let d = ops.first().map_or(0, |a| a.nrows());
    let strings: Vec<CMatrix> = PauliString::all(qubits).map(|s| pauli_string_matrix(&s)).collect();
    let mut sums = vec![CMatrix::zeros(d, d); count];
    for mu in 0..count {
        let a_mu_adj = ops[mu].adjoint();
        for nu in 0..count {
            let product = &strings[mu] * &strings[nu];
            // exactly one κ has a nonzero overlap
            let (kappa, c) = (0..count)
                .map(|k| (k, (strings[k].adjoint() * &product).trace() / sys as f64))
                .find(|(_, c)| c.norm() > 0.5)
                .expect("Pauli strings are closed under multiplication");
            sums[kappa] += &a_mu_adj * &ops[nu] * c;
        }
    }
    sums[0] -= CMatrix::identity(d, d);
    sums.iter().map(|m| m.norm()).collect()
}

fn check_density(rho: &CMatrix, name: &str) -> Result<()> {
    const TOL: f64 = 1e-10;
    if rho.nrows() != rho.ncols() {
        return Err(Error::NotDensityMatrix(format!("{name} is not square")));
    }
    if (rho - rho.adjoint()).camax() > TOL {
        return Err(Error::NotDensityMatrix(format!("{name} is not Hermitian")));
    }
    let tr = rho.trace();
    if (tr - ONE).norm() > TOL {
        return Err(Error::NotDensityMatrix(format!("{name} has trace {tr}")));
    }
    let min = SymmetricEigen::new(rho.clone()).eigenvalues.min();
    if min < -TOL {
        return Err(Error::NotDensityMatrix(format!("{name} has eigenvalue {min}")));
    }
    Ok(())
}

/// `½ ‖ρ1 − ρ2‖₁`.
pub fn trace_distance(rho1: &CMatrix, rho2: &CMatrix) -> Result<f64> {
    if rho1.shape() != rho2.shape() {
        return Err(Error::DimensionMismatch(format!(
            "density matrices of shapes {:?} and {:?}",
            rho1.shape(),
            rho2.shape()
        )));
    }
    check_density(rho1, "first state")?;
    check_density(rho2, "second state")?;
    let diff = rho1 - rho2;
    Ok(0.5 * diff.svd(false, false).singular_values.sum())
}

/// Trace over the bath factor of a `sys·d × sys·d` operator.
pub fn partial_trace_bath(rho: &CMatrix, sys: usize, bath_dim: usize) -> CMatrix {
    CMatrix::from_fn(sys, sys, |r, c| {
        (0..bath_dim).map(|b| rho[(r * bath_dim + b, c * bath_dim + b)]).sum()
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialState {
    /// `|+⟩` on every qubit.
    #[default]
    Plus,
    Zero,
    One,
    /// Seeded random pure state.
    Random,
}

impl InitialState {
    pub fn vector(self, qubits: usize, seed: u64) -> DVector<Complex64> {
        let sys = 1usize << qubits;
        match self {
            InitialState::Plus => DVector::from_element(sys, Complex64::new(1.0 / (sys as f64).sqrt(), 0.0)),
            InitialState::Zero => DVector::from_fn(sys, |i, _| if i == 0 { ONE } else { ZERO }),
            InitialState::One => DVector::from_fn(sys, |i, _| if i == sys - 1 { ONE } else { ZERO }),
            InitialState::Random => random_pure_state(sys, seed),
        }
    }
}

impl std::str::FromStr for InitialState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "+" | "plus" => Ok(InitialState::Plus),
            "0" | "zero" => Ok(InitialState::Zero),
            "1" | "one" => Ok(InitialState::One),
            "random" => Ok(InitialState::Random),
            other => Err(Error::invalid(format!("unknown initial state {other:?}"))),
        }
    }
}

fn random_pure_state(dim: usize, seed: u64) -> DVector<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = DVector::from_fn(dim, |_, _| complex_normal(&mut rng));
    let norm = v.norm();
    v / Complex64::new(norm, 0.0)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BathState {
    #[default]
    MaximallyMixed,
    /// Seeded random pure state.
    PureRandom,
}

impl std::str::FromStr for BathState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "maximally-mixed" | "mixed" => Ok(BathState::MaximallyMixed),
            "pure-random" | "pure" => Ok(BathState::PureRandom),
            other => Err(Error::invalid(format!("unknown bath state {other:?}"))),
        }
    }
}

/// Pulse sequence of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SequenceSpec {
    Qdd { n1: usize, n2: usize },
    Nudd { orders: Vec<usize>, m: usize },
}

impl SequenceSpec {
    pub fn schedule(&self, tie_order: TieOrder) -> Result<PulseSchedule> {
        let s = match self {
            SequenceSpec::Qdd { n1, n2 } => qdd_schedule(*n1, *n2),
            SequenceSpec::Nudd { orders, m } => nudd_schedule(orders, *m)?,
        };
        Ok(s.with_tie_order(tie_order))
    }

    pub fn qubits(&self) -> usize {
        match self {
            SequenceSpec::Qdd { .. } => 1,
            SequenceSpec::Nudd { m, .. } => *m,
        }
    }
}

/// One simulated run. Energies are in units of `J0`, so `T = ε / J0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sequence: SequenceSpec,
    pub epsilon: f64,
    pub bath: BathSpec,
    #[serde(default)]
    pub initial_state: InitialState,
    #[serde(default)]
    pub bath_state: BathState,
    #[serde(default)]
    pub tie_order: TieOrder,
    #[serde(default)]
    pub mode: OrderMode,
}

impl ExperimentConfig {
    /// `QDD(n1, n2)` with `J0 = 1` and `Jα = ηα`.
    pub fn qdd(n1: usize, n2: usize, epsilon: f64, eta: EtaVector, bath_dim: usize, seed: u64) -> Self {
        ExperimentConfig {
            sequence: SequenceSpec::Qdd { n1, n2 },
            epsilon,
            bath: BathSpec {
                dim: bath_dim,
                seed,
                norms: CouplingNorms::Qdd { j0: 1.0, jx: eta.x, jy: eta.y, jz: eta.z },
            },
            initial_state: InitialState::Plus,
            bath_state: BathState::MaximallyMixed,
            tie_order: TieOrder::default(),
            mode: OrderMode::Analytic,
        }
    }

    /// NUDD with `J0 = 1` and every error coupling `η`.
    pub fn nudd(orders: Vec<usize>, m: usize, epsilon: f64, eta: f64, bath_dim: usize, seed: u64) -> Self {
        ExperimentConfig {
            sequence: SequenceSpec::Nudd { orders, m },
            epsilon,
            bath: BathSpec { dim: bath_dim, seed, norms: CouplingNorms::Nudd { m, j0: 1.0, j1: eta } },
            initial_state: InitialState::Plus,
            bath_state: BathState::MaximallyMixed,
            tie_order: TieOrder::default(),
            mode: OrderMode::Analytic,
        }
    }

    fn j0(&self) -> Result<f64> {
        let j0 = self.bath.norms.per_string()?[0];
        if !(j0.is_finite() && j0 > 0.0) {
            return Err(Error::invalid(format!("J0 must be > 0 to define epsilon, got {j0}")));
        }
        Ok(j0)
    }

    pub fn duration(&self) -> Result<f64> {
        Ok(self.epsilon / self.j0()?)
    }
}

/// Measured quantities and the analytic bounds they must respect.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    /// `‖A_μ‖` in [`PauliString::index`] order, identity first.
    pub channel_norms: Vec<f64>,
    pub channel_labels: Vec<String>,
    pub distance_actual: f64,
    pub distance_bound: f64,
    pub margin: f64,
    /// QDD only: `Lα` for x, y, z.
    pub channel_bounds: Option<ChannelBounds>,
    /// QDD: `Lα − ‖Aα‖` for x, y, z. NUDD: `Δ − Σ_{μ≠0} ‖A_μ‖`.
    pub channel_margins: Vec<f64>,
    /// `‖U†U − 1‖`.
    pub unitarity_residual: f64,
    /// Largest residual of the relations from [`unitarity_relations`].
    pub relation_residual: f64,
}

impl SimResult {
    /// Smallest of all margins.
    pub fn worst_margin(&self) -> f64 {
        self.channel_margins.iter().copied().fold(self.margin, f64::min)
    }
}

/// Runs one experiment and compares it with the matching bound.
pub fn run_experiment(config: &ExperimentConfig) -> Result<SimResult> {
    if config.sequence.qubits() != config.bath.norms.qubits() {
        return Err(Error::DimensionMismatch(format!(
            "sequence acts on {} qubits, couplings on {}",
            config.sequence.qubits(),
            config.bath.norms.qubits()
        )));
    }
    if !(config.epsilon.is_finite() && config.epsilon > 0.0) {
        return Err(Error::invalid(format!("epsilon must be finite and > 0, got {}", config.epsilon)));
    }
    let schedule = config.sequence.schedule(config.tie_order)?;
    let model = HamiltonianModel::build(&config.bath)?;
    let t = config.duration()?;
    let u = evolve(&schedule, &model, t)?;
    let m = model.qubits;
    let sys = 1usize << m;
    let d = model.bath_dim;

    let ops = extract_channel_ops(&u, m)?;
    let channel_norms: Vec<f64> = ops.iter().map(spectral_norm).collect();
    let relation_residual = unitarity_relations(&ops, m).into_iter().fold(0.0, f64::max);
    let unitarity_residual = unitarity_defect(&u);

    let psi = config.initial_state.vector(m, derive_seed(config.bath.seed, 1 << 32));
    let rho_s0 = &psi * psi.adjoint();
    let rho_b = match config.bath_state {
        BathState::MaximallyMixed => CMatrix::identity(d, d) / Complex64::new(d as f64, 0.0),
        BathState::PureRandom => {
            let phi = random_pure_state(d, derive_seed(config.bath.seed, (1 << 32) + 1));
            &phi * phi.adjoint()
        }
    };
    let rho0 = rho_s0.kronecker(&rho_b);
    let rho_t = &u * &rho0 * u.adjoint();
    let free = {
        let eig = SymmetricEigen::new(model.couplings[0].clone());
        let phases = CMatrix::from_diagonal(&DVector::from_iterator(
            d,
            eig.eigenvalues.iter().map(|l| Complex64::from_polar(1.0, -l * t)),
        ));
        CMatrix::identity(sys, sys).kronecker(&(&eig.eigenvectors * phases * eig.eigenvectors.adjoint()))
    };
    let rho_free = &free * &rho0 * free.adjoint();
    let distance_actual = trace_distance(
        &hermitize(partial_trace_bath(&rho_t, sys, d)),
        &hermitize(partial_trace_bath(&rho_free, sys, d)),
    )?;

    let (distance_bound, channel_bounds, channel_margins) = match &config.sequence {
        SequenceSpec::Qdd { n1, n2 } => {
            let norms = config.bath.norms.per_string()?;
            let j0 = norms[0];
            let eta = EtaVector::new(norms[1] / j0, norms[2] / j0, norms[3] / j0)?;
            let report = distance_bound(*n1, *n2, config.epsilon, &eta, config.mode)?;
            let l = report.channel_bounds;
            let margins = vec![l.x - channel_norms[1], l.y - channel_norms[2], l.z - channel_norms[3]];
            (report.distance_bound, Some(l), margins)
        }
        SequenceSpec::Nudd { m, .. } => {
            let norms = config.bath.norms.per_string()?;
            let j0 = norms[0];
            let j1 = norms[1..].iter().copied().fold(0.0, f64::max);
            let d_min = schedule_decoupling_order(&schedule);
            let report = nudd_distance_bound(d_min, config.epsilon, j1 / j0, *m)?;
            let error_sum: f64 = channel_norms[1..].iter().sum();
            (report.distance_bound, None, vec![report.delta - error_sum])
        }
    };
    Ok(SimResult {
        channel_labels: PauliString::all(m).map(|s| s.to_string()).collect(),
        channel_norms,
        distance_actual,
        distance_bound,
        margin: distance_bound - distance_actual,
        channel_bounds,
        channel_margins,
        unitarity_residual,
        relation_residual,
    })
}

fn hermitize(m: CMatrix) -> CMatrix {
    (&m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Norms below this are treated as unresolved in slope fits.
pub const RESOLUTION_FLOOR: f64 = 1e-14;

/// Log-log slope of one channel norm against `ε`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelSlope {
    pub channel: String,
    /// `None` when fewer than three points lie above [`RESOLUTION_FLOOR`]: the
    /// order is too high to resolve.
    pub slope: Option<f64>,
    pub points: usize,
}

/// Fits `log ‖A_μ‖` against `log ε` for every error channel, keeping the
/// bath fixed across the grid.
pub fn fit_scaling(config: &ExperimentConfig, epsilons: &[f64]) -> Result<Vec<ChannelSlope>> {
    if epsilons.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(Error::invalid("epsilon grid must be positive"));
    }
    let schedule = config.sequence.schedule(config.tie_order)?;
    let model = HamiltonianModel::build(&config.bath)?;
    let j0 = config.j0()?;
    let m = model.qubits;
    let mut norms = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let u = evolve(&schedule, &model, eps / j0)?;
        norms.push(extract_channel_ops(&u, m)?.iter().map(spectral_norm).collect::<Vec<_>>());
    }
    Ok(PauliString::all(m)
        .enumerate()
        .skip(1)
        .map(|(i, s)| {
            let points: Vec<(f64, f64)> = epsilons
                .iter()
                .zip(&norms)
                .filter(|(_, n)| n[i] >= RESOLUTION_FLOOR)
                .map(|(e, n)| (e.ln(), n[i].ln()))
                .collect();
            ChannelSlope {
                channel: s.to_string(),
                slope: (points.len() >= 3).then(|| least_squares_slope(&points)),
                points: points.len(),
            }
        })
        .collect())
}

pub fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// `(|tr(Q ρ Q′)|, ‖Q‖ ‖Q′‖)` for random bounded `Q, Q′` and a random
/// density matrix `ρ`.
pub fn correlation_check(dim: usize, seed: u64) -> Result<(f64, f64)> {
    if dim == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q1 = CMatrix::from_fn(dim, dim, |_, _| complex_normal(&mut rng));
    let q2 = CMatrix::from_fn(dim, dim, |_, _| complex_normal(&mut rng));
    let g = CMatrix::from_fn(dim, dim, |_, _| complex_normal(&mut rng));
    let w = &g * g.adjoint();
    let rho = &w / w.trace();
    let lhs = (&q1 * rho * &q2).trace().norm();
    Ok((lhs, spectral_norm(&q1) * spectral_norm(&q2)))
}
