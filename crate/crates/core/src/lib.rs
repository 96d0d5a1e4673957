//! Nested Uhrig dynamical decoupling (QDD and NUDD) with certified error bounds.
//!
//! The crate is split along the life of a decoupling experiment:
//!
//! - [`sequences`] builds pulse schedules and their toggling-frame switching
//!   functions.
//! - [`qdd_bounds`] and [`nudd_bounds`] evaluate the analytic bounding series,
//!   their Taylor tails and the resulting trace-norm distance bounds.
//! - [`dyson`] integrates nested switching-function products exactly and
//!   certifies decoupling orders word by word.
//! - [`simulator`] evolves a qubit register coupled to a finite random bath
//!   and checks that measured errors respect the bounds.
//!
//! All quantities are dimensionless: time is measured in units of the total
//! sequence duration `T`, couplings enter through `epsilon = J0 * T` and the
//! ratios `eta = J / J0`.

pub mod dyson;
mod error;
pub mod nudd_bounds;
pub mod pauli;
pub mod qdd_bounds;
mod series;
pub mod sequences;
pub mod simulator;

pub use error::{Error, Result};

// Runs the code listings of the guide under `book/` as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/sequences.md")]
    mod sequences {}
    #[doc = include_str!("../../../book/src/qdd-bounds.md")]
    mod qdd_bounds {}
    #[doc = include_str!("../../../book/src/nudd-bounds.md")]
    mod nudd_bounds {}
    #[doc = include_str!("../../../book/src/dyson.md")]
    mod dyson {}
    #[doc = include_str!("../../../book/src/simulator.md")]
    mod simulator {}
}
