use std::fmt;

/// Why a command did not succeed, and the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    /// A checked property did not hold.
    Assertion(String),
    Invalid(String),
    NonConvergence(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Assertion(_) => 1,
            Failure::Invalid(_) => 2,
            Failure::NonConvergence(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Assertion(m) => write!(f, "check failed: {m}"),
            Failure::Invalid(m) => write!(f, "invalid input: {m}"),
            Failure::NonConvergence(m) => write!(f, "non-convergence: {m}"),
        }
    }
}

impl From<ddbound::Error> for Failure {
    fn from(e: ddbound::Error) -> Self {
        match e {
            ddbound::Error::NonConvergence { .. } | ddbound::Error::LinearAlgebra(_) => {
                Failure::NonConvergence(e.to_string())
            }
            ddbound::Error::InvalidInput(m) => Failure::Invalid(m),
            other => Failure::Invalid(other.to_string()),
        }
    }
}
