// SPDX-License-Identifier: Apache-2.0

//! Single-qubit operators and Pauli strings.
//!
//! Basis convention: computational state `|0⟩` is spin down (σᶻ = −1) and
//! `|1⟩` is spin up, so `σᶻ = diag(−1, 1)` and the decay jump operator
//! `σ⁻ = |0⟩⟨1|` drives every spin to `|0⟩`. The usual algebra
//! `σˣσʸ = iσᶻ` and `σ⁻ = (σˣ − iσʸ)/2` holds in this basis.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::linalg::{kron, CMat, I, ONE, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];

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

    pub fn matrix(self) -> CMat {
        match self {
            Pauli::I => Mat::identity(2, 2),
            Pauli::X => Mat::from_fn(2, 2, |i, j| if i != j { ONE } else { ZERO }),
            Pauli::Y => Mat::from_fn(2, 2, |i, j| match (i, j) {
                (0, 1) => I,
                (1, 0) => -I,
                _ => ZERO,
            }),
            Pauli::Z => Mat::from_fn(2, 2, |i, j| match (i, j) {
                (0, 0) => -ONE,
                (1, 1) => ONE,
                _ => ZERO,
            }),
        }
    }

    /// Whether two single-qubit Paulis commute.
    pub fn commutes(self, other: Pauli) -> bool {
        self == Pauli::I || other == Pauli::I || self == other
    }

    pub fn label(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Lowering operator σ⁻ = |0⟩⟨1| (spin up → spin down).
pub fn sigma_minus() -> CMat {
    Mat::from_fn(2, 2, |i, j| if (i, j) == (0, 1) { ONE } else { ZERO })
}

/// Raising operator σ⁺ = |1⟩⟨0|.
pub fn sigma_plus() -> CMat {
    Mat::from_fn(2, 2, |i, j| if (i, j) == (1, 0) { ONE } else { ZERO })
}

/// A tensor product of Paulis on `k` consecutive local slots; slot 0 is the
/// most significant qubit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PauliString(pub Vec<Pauli>);

impl PauliString {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index in base 4 with slot 0 most significant (I=0, X=1, Y=2, Z=3).
    pub fn index(&self) -> usize {
        self.0.iter().fold(0, |acc, p| acc * 4 + p.index())
    }

    pub fn from_index(mut index: usize, k: usize) -> PauliString {
        let mut v = vec![Pauli::I; k];
        for slot in (0..k).rev() {
            v[slot] = Pauli::from_index(index % 4);
            index /= 4;
        }
        PauliString(v)
    }

    /// All `4^k` strings in index order.
    pub fn all(k: usize) -> Vec<PauliString> {
        (0..4usize.pow(k as u32)).map(|i| Self::from_index(i, k)).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().all(|p| *p == Pauli::I)
    }

    pub fn matrix(&self) -> CMat {
        let mut m: CMat = Mat::identity(1, 1);
        for p in &self.0 {
            m = kron(&m, &p.matrix());
        }
        m
    }

    /// Two Pauli strings commute iff they anticommute on an even number of slots.
    pub fn commutes(&self, other: &PauliString) -> bool {
        self.0
            .iter()
            .zip(&other.0)
            .filter(|(a, b)| !a.commutes(**b))
            .count()
            % 2
            == 0
    }

    pub fn label(&self) -> String {
        self.0.iter().map(|p| p.label()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, scale};

    #[test]
    fn pauli_algebra_holds_in_this_basis() {
        let xy = Pauli::X.matrix() * Pauli::Y.matrix();
        let iz = scale(&Pauli::Z.matrix(), I);
        assert!(max_abs_diff(&xy, &iz) < 1e-15);
    }

    #[test]
    fn sigma_minus_is_x_minus_iy() {
        let lhs = sigma_minus();
        let rhs = scale(&(Pauli::X.matrix() - scale(&Pauli::Y.matrix(), I)), 0.5.into());
        assert!(max_abs_diff(&lhs, &rhs) < 1e-15);
        // σ⁺σ⁻ projects on spin up
        let n = sigma_plus() * sigma_minus();
        assert_eq!(n[(1, 1)], ONE);
        assert_eq!(n[(0, 0)], ZERO);
    }

    #[test]
    fn string_index_roundtrip() {
        for i in 0..16 {
            assert_eq!(PauliString::from_index(i, 2).index(), i);
        }
        assert_eq!(PauliString::from_index(7, 2).label(), "XZ");
    }

    #[test]
    fn string_commutation() {
        let zz = PauliString(vec![Pauli::Z, Pauli::Z]);
        let xx = PauliString(vec![Pauli::X, Pauli::X]);
        let xi = PauliString(vec![Pauli::X, Pauli::I]);
        assert!(zz.commutes(&xx));
        assert!(!zz.commutes(&xi));
    }
}
