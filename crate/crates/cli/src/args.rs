//! Flag definitions. Every option struct doubles as the schema of the JSON
//! document accepted by `--config`: keys are the flag names, unknown keys are
//! rejected, and flags given on the command line win over the file.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{ArgAction, Args, Parser, Subcommand};
use ddbound::dyson::Backend;
use ddbound::qdd_bounds::OrderMode;
use ddbound::sequences::TieOrder;
use ddbound::simulator::{BathState, InitialState};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::failure::Failure;

#[derive(Parser)]
#[command(name = "ddbound", version, about = "Nested UDD schedules, rigorous error bounds and their numerical verification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Print a pulse schedule as CSV.
    Sequence(SequenceOpts),
    /// Evaluate analytic bounds over a grid.
    #[command(subcommand)]
    Bounds(BoundsCommand),
    /// Run one simulated experiment.
    Simulate(SimulateOpts),
    /// Check decoupling orders or bound dominance.
    #[command(subcommand)]
    Verify(VerifyCommand),
    /// Simulate a grid of QDD experiments against their bounds.
    Sweep(SweepOpts),
}

#[derive(Subcommand)]
pub enum BoundsCommand {
    Qdd(BoundsQddOpts),
    Nudd(BoundsNuddOpts),
}

#[derive(Subcommand)]
pub enum VerifyCommand {
    /// Certify decoupling orders with the nested-integral oracle.
    Orders(VerifyOrdersOpts),
    /// Check simulated distances against the bound over several seeds.
    Bound(VerifyBoundOpts),
}

fn parse_with<T: FromStr<Err = ddbound::Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: ddbound::Error| e.to_string())
}

/// Fills every unset field of `$a` from `$b`.
macro_rules! merge_from {
    ($a:expr, $b:expr; $($field:ident),* ; flags: $($flag:ident),*) => {{
        $( if $a.$field.is_none() { $a.$field = $b.$field.take(); } )*
        $( $a.$flag = $a.$flag || $b.$flag; )*
    }};
}

pub trait ConfigFile: DeserializeOwned + Sized {
    fn config_path(&self) -> Option<&Path>;
    fn merge(&mut self, file: Self);

    /// Applies the `--config` document, if any, beneath the flags.
    fn resolve(mut self) -> Result<Self, Failure> {
        if let Some(path) = self.config_path() {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Invalid(format!("--config {}: {e}", path.display())))?;
            let file: Self = serde_json::from_str(&text)
                .map_err(|e| Failure::Invalid(format!("--config {}: {e}", path.display())))?;
            self.merge(file);
        }
        Ok(self)
    }
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SequenceOpts {
    /// QDD orders N1 (inner, z pulses) and N2 (outer, x pulses).
    #[arg(long, num_args = 2, value_names = ["N1", "N2"], allow_negative_numbers = true)]
    pub qdd: Option<Vec<i64>>,
    /// NUDD orders, innermost level first, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, requires = "qubits")]
    pub nudd: Option<Vec<i64>>,
    /// Number of protected qubits for --nudd.
    #[arg(long, allow_negative_numbers = true)]
    pub qubits: Option<i64>,
    /// Order of pulses firing at the same instant.
    #[arg(long, value_parser = parse_with::<TieOrder>)]
    pub tie_order: Option<TieOrder>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file with defaults for any of these flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl ConfigFile for SequenceOpts {
    fn config_path(&self) -> Option<&Path> {
        self.config.as_deref()
    }

    fn merge(&mut self, mut file: Self) {
        merge_from!(self, file; qdd, nudd, qubits, tie_order, out ; flags:);
    }
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct GridOpts {
    /// Explicit epsilon values, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub eps: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true)]
    pub eps_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub eps_max: Option<f64>,
    /// Number of log-spaced points between --eps-min and --eps-max.
    #[arg(long, allow_negative_numbers = true)]
    pub eps_points: Option<i64>,
}

impl GridOpts {
    fn merge(&mut self, mut file: Self) {
        merge_from!(self, file; eps, eps_min, eps_max, eps_points ; flags:);
    }

    pub fn explicit(&self) -> bool {
        self.eps.is_some() || self.eps_min.is_some() || self.eps_max.is_some()
    }
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct BoundsQddOpts {
    /// Isotropic eta in {1e-4,1e-2,1,1e2}, N1 = N2 in {2,6,16,34}.
    #[arg(long, conflicts_with_all = ["fig3", "fig4", "qdd"])]
    #[serde(default)]
    pub fig2: bool,
    /// N2 = 10, N1 in {2,10,18,34}, eta_z = 1e-2, eta_x = eta_y swept.
    #[arg(long, conflicts_with_all = ["fig4", "qdd"])]
    #[serde(default)]
    pub fig3: bool,
    /// N2 = 9, N1 in {3,10,19,34}, eta_z = 1e-2, eta_x = eta_y swept.
    #[arg(long, conflicts_with = "qdd")]
    #[serde(default)]
    pub fig4: bool,
    /// A sequence N1 N2; repeat for several.
    #[arg(long, num_args = 2, value_names = ["N1", "N2"], action = ArgAction::Append, allow_negative_numbers = true)]
    pub qdd: Option<Vec<i64>>,
    /// Isotropic eta values, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub eta: Option<Vec<f64>>,
    /// An anisotropic eta as eta_x eta_y eta_z; repeat for several.
    #[arg(long, num_args = 3, value_names = ["X", "Y", "Z"], action = ArgAction::Append, allow_negative_numbers = true)]
    pub eta_vec: Option<Vec<f64>>,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridOpts,
    #[arg(long, value_parser = parse_with::<OrderMode>)]
    pub mode: Option<OrderMode>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl ConfigFile for BoundsQddOpts {
    fn config_path(&self) -> Option<&Path> {
        self.config.as_deref()
    }

    fn merge(&mut self, mut file: Self) {
        self.grid.merge(std::mem::take(&mut file.grid));
        merge_from!(self, file; qdd, eta, eta_vec, mode, out ; flags: fig2, fig3, fig4);
    }
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct BoundsNuddOpts {
    /// m = 10, d_min in {5,10,20,40}, eta in {1e-4,1e-2,1,1e2}.
    #[arg(long)]
    #[serde(default)]
    pub fig5: bool,
    /// Number of qubits.
    #[arg(long, allow_negative_numbers = true)]
    pub m: Option<i64>,
    /// Decoupling orders, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, conflicts_with = "nudd")]
    pub d_min: Option<Vec<i64>>,
    /// Take the decoupling order from these NUDD level orders (needs --m).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub nudd: Option<Vec<i64>>,
    /// Eta values, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub eta: Option<Vec<f64>>,
    #[command(flatten)]
    #[serde(flatten)]
    pub grid: GridOpts,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl ConfigFile for BoundsNuddOpts {
    fn config_path(&self) -> Option<&Path> {
        self.config.as_deref()
    }

    fn merge(&mut self, mut file: Self) {
        self.grid.merge(std::mem::take(&mut file.grid));
        merge_from!(self, file; m, d_min, nudd, eta, out ; flags: fig5);
    }
}

/// Options shared by every simulated experiment.
#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ExperimentOpts {
    /// QDD orders N1 N2.
    #[arg(long, num_args = 2, value_names = ["N1", "N2"], allow_negative_numbers = true)]
    pub qdd: Option<Vec<i64>>,
    /// NUDD orders, innermost level first, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, conflicts_with = "qdd")]
    pub nudd: Option<Vec<i64>>,
    #[arg(long, allow_negative_numbers = true)]
    pub qubits: Option<i64>,
    /// epsilon = J0 T.
    #[arg(long, allow_negative_numbers = true)]
    pub eps: Option<f64>,
    /// Isotropic eta (QDD) or the common error coupling J1/J0 (NUDD).
    #[arg(long, allow_negative_numbers = true)]
    pub eta: Option<f64>,
    /// Anisotropic QDD eta as eta_x eta_y eta_z.
    #[arg(long, num_args = 3, value_names = ["X", "Y", "Z"], allow_negative_numbers = true, conflicts_with = "eta")]
    pub eta_vec: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true)]
    pub bath_dim: Option<i64>,
    #[arg(long, value_parser = parse_with::<InitialState>)]
    pub initial_state: Option<InitialState>,
    #[arg(long, value_parser = parse_with::<BathState>)]
    pub bath_state: Option<BathState>,
    #[arg(long, value_parser = parse_with::<TieOrder>)]
    pub tie_order: Option<TieOrder>,
    #[arg(long, value_parser = parse_with::<OrderMode>)]
    pub mode: Option<OrderMode>,
}

impl ExperimentOpts {
    fn merge(&mut self, mut file: Self) {
        merge_from!(self, file; qdd, nudd, qubits, eps, eta, eta_vec, bath_dim, initial_state, bath_state, tie_order, mode ; flags:);
    }
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SimulateOpts {
    #[command(flatten)]
    #[serde(flatten)]
    pub experiment: ExperimentOpts,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl ConfigFile for SimulateOpts {
    fn config_path(&self) -> Option<&Path> {
        self.config.as_deref()
    }

    fn merge(&mut self, mut file: Self) {
        self.experiment.merge(std::mem::take(&mut file.experiment));
        merge_from!(self, file; seed, out ; flags:);
    }
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct VerifyOrdersOpts {
    #[arg(long, num_args = 2, value_names = ["N1", "N2"], allow_negative_numbers = true)]
    pub qdd: Option<Vec<i64>>,
    /// Longest word to integrate.
    #[arg(long, allow_negative_numbers = true)]
    pub nmax: Option<i64>,
    /// exact (orders <= 2 only) or extended; default exact when possible.
    #[arg(long, value_parser = parse_with::<Backend>)]
    pub backend: Option<Backend>,
    /// |integral| treated as zero by the extended backend.
    #[arg(long, allow_negative_numbers = true)]
    pub threshold: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub max_depth: Option<i64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl ConfigFile for VerifyOrdersOpts {
    fn config_path(&self) -> Option<&Path> {
        self.config.as_deref()
    }

    fn merge(&mut self, mut file: Self) {
        merge_from!(self, file; qdd, nmax, backend, threshold, max_depth, out ; flags:);
    }
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct VerifyBoundOpts {
    #[command(flatten)]
    #[serde(flatten)]
    pub experiment: ExperimentOpts,
    /// Number of random baths.
    #[arg(long, allow_negative_numbers = true)]
    pub seeds: Option<i64>,
    /// Master seed; run k uses a seed derived from it and k.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Test hook: add this to every bound before comparing.
    #[arg(long, allow_negative_numbers = true)]
    pub loosen: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl ConfigFile for VerifyBoundOpts {
    fn config_path(&self) -> Option<&Path> {
        self.config.as_deref()
    }

    fn merge(&mut self, mut file: Self) {
        self.experiment.merge(std::mem::take(&mut file.experiment));
        merge_from!(self, file; seeds, seed, loosen, out ; flags:);
    }
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SweepOpts {
    /// A sequence N1 N2; repeat for several.
    #[arg(long, num_args = 2, value_names = ["N1", "N2"], action = ArgAction::Append, allow_negative_numbers = true)]
    pub qdd: Option<Vec<i64>>,
    /// Epsilon values, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub eps: Option<Vec<f64>>,
    /// Isotropic eta values, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub eta: Option<Vec<f64>>,
    /// Bath dimensions, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub bath_dim: Option<Vec<i64>>,
    /// Random baths per grid point.
    #[arg(long, allow_negative_numbers = true)]
    pub seeds: Option<i64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_with::<InitialState>)]
    pub initial_state: Option<InitialState>,
    #[arg(long, value_parser = parse_with::<BathState>)]
    pub bath_state: Option<BathState>,
    #[arg(long, value_parser = parse_with::<OrderMode>)]
    pub mode: Option<OrderMode>,
    #[arg(long, allow_negative_numbers = true)]
    pub loosen: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl ConfigFile for SweepOpts {
    fn config_path(&self) -> Option<&Path> {
        self.config.as_deref()
    }

    fn merge(&mut self, mut file: Self) {
        merge_from!(self, file; qdd, eps, eta, bath_dim, seeds, seed, initial_state, bath_state, mode, loosen, out ; flags:);
    }
}
