//! Single-qubit Pauli labels and their tensor-product strings.

use std::fmt;

use serde::{Deserialize, Serialize};

/// One of `1, σx, σy, σz`.
///
/// The binary label `(a, b)` used for nested sequences is `I=(0,0)`,
/// `X=(1,0)`, `Y=(1,1)`, `Z=(0,1)`, so multiplication of Paulis is addition
/// of labels modulo 2 up to a phase.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    pub const ERRORS: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    pub fn bits(self) -> (u8, u8) {
        match self {
            Pauli::I => (0, 0),
            Pauli::X => (1, 0),
            Pauli::Y => (1, 1),
            Pauli::Z => (0, 1),
        }
    }

    pub fn from_bits(a: u8, b: u8) -> Pauli {
        match (a & 1, b & 1) {
            (0, 0) => Pauli::I,
            (1, 0) => Pauli::X,
            (1, 1) => Pauli::Y,
            _ => Pauli::Z,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Pauli::I => 0,
            Pauli::X => 1,
            Pauli::Y => 2,
            Pauli::Z => 3,
        }
    }

    pub fn from_index(i: usize) -> Pauli {
        Pauli::ALL[i % 4]
    }

    pub fn symbol(self) -> char {
        match self {
            Pauli::I => '0',
            Pauli::X => 'x',
            Pauli::Y => 'y',
            Pauli::Z => 'z',
        }
    }

    pub fn from_symbol(c: char) -> Option<Pauli> {
        match c {
            '0' | 'i' | 'I' => Some(Pauli::I),
            'x' | 'X' => Some(Pauli::X),
            'y' | 'Y' => Some(Pauli::Y),
            'z' | 'Z' => Some(Pauli::Z),
            _ => None,
        }
    }

    /// Row-major 2x2 matrix entries as `(re, im)` pairs.
    pub fn matrix(self) -> [[(f64, f64); 2]; 2] {
        match self {
            Pauli::I => [[(1.0, 0.0), (0.0, 0.0)], [(0.0, 0.0), (1.0, 0.0)]],
            Pauli::X => [[(0.0, 0.0), (1.0, 0.0)], [(1.0, 0.0), (0.0, 0.0)]],
            Pauli::Y => [[(0.0, 0.0), (0.0, -1.0)], [(0.0, 1.0), (0.0, 0.0)]],
            Pauli::Z => [[(1.0, 0.0), (0.0, 0.0)], [(0.0, 0.0), (-1.0, 0.0)]],
        }
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Pauli::I => "0",
            Pauli::X => "x",
            Pauli::Y => "y",
            Pauli::Z => "z",
        };
        f.write_str(s)
    }
}

/// A tensor product `σ_{1,μ1} ⊗ … ⊗ σ_{m,μm}`; qubit 0 is the most
/// significant tensor factor.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PauliString(pub Vec<Pauli>);

impl PauliString {
    pub fn identity(m: usize) -> Self {
        PauliString(vec![Pauli::I; m])
    }

    pub fn qubits(&self) -> usize {
        self.0.len()
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|&p| p == Pauli::I)
    }

    /// Base-4 index with qubit 0 as the leading digit.
    pub fn index(&self) -> usize {
        self.0.iter().fold(0, |acc, p| acc * 4 + p.index())
    }

    pub fn from_index(index: usize, m: usize) -> Self {
        let mut out = vec![Pauli::I; m];
        let mut rest = index;
        for slot in out.iter_mut().rev() {
            *slot = Pauli::from_index(rest % 4);
            rest /= 4;
        }
        PauliString(out)
    }

    /// All `4^m` strings in index order.
    pub fn all(m: usize) -> impl Iterator<Item = PauliString> {
        (0..4usize.pow(m as u32)).map(move |i| PauliString::from_index(i, m))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.0 {
            write!(f, "{p}")?;
        }
        Ok(())
    }
}
