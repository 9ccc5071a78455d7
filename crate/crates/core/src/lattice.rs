// SPDX-License-Identifier: Apache-2.0

//! Square qubit lattices with a fixed row-major site ordering.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    #[default]
    Open,
    Periodic,
}

/// A nearest-neighbour pair `(a, b)` with `a` preceding `b` in the bond's
/// own orientation (down for column bonds, right for row bonds).
pub type Bond = (usize, usize);

/// `rows × cols` lattice. Site `(i, j)` has index `i * cols + j`; site 0 is the
/// most significant qubit of the full Hilbert space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QubitLattice {
    rows: usize,
    cols: usize,
    boundary: Boundary,
}

impl QubitLattice {
    pub fn new(rows: usize, cols: usize, boundary: Boundary) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument("lattice must have at least one site".into()));
        }
        // Wrap-around bonds would duplicate the open ones below three sites.
        if boundary == Boundary::Periodic && (rows < 3 || cols < 3) {
            return Err(Error::InvalidArgument(
                "periodic boundary needs at least 3 rows and 3 columns".into(),
            ));
        }
        Ok(Self { rows, cols, boundary })
    }

    pub fn square(l: usize, boundary: Boundary) -> Result<Self> {
        Self::new(l, l, boundary)
    }

    /// A bare register of `n` qubits without bonds (one row).
    pub fn chain(n: usize) -> Result<Self> {
        Self::new(1, n, Boundary::Open)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn n_sites(&self) -> usize {
        self.rows * self.cols
    }

    /// Hilbert-space dimension `2^n`.
    pub fn dim(&self) -> usize {
        1usize << self.n_sites()
    }

    pub fn site(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    /// Bonds between rows `i` and `i+1` in the same column, row-major.
    pub fn column_bonds(&self) -> Vec<Bond> {
        let mut out = Vec::new();
        let last = match self.boundary {
            Boundary::Open => self.rows.saturating_sub(1),
            Boundary::Periodic => self.rows,
        };
        for i in 0..last {
            for j in 0..self.cols {
                out.push((self.site(i, j), self.site((i + 1) % self.rows, j)));
            }
        }
        out
    }

    /// Bonds between columns `j` and `j+1` in the same row, row-major.
    pub fn row_bonds(&self) -> Vec<Bond> {
        let mut out = Vec::new();
        let last = match self.boundary {
            Boundary::Open => self.cols.saturating_sub(1),
            Boundary::Periodic => self.cols,
        };
        for i in 0..self.rows {
            for j in 0..last {
                out.push((self.site(i, j), self.site(i, (j + 1) % self.cols)));
            }
        }
        out
    }

    pub fn bonds(&self) -> Vec<Bond> {
        let mut b = self.column_bonds();
        b.extend(self.row_bonds());
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn open_bond_count() {
        for l in 1..=4 {
            let lat = QubitLattice::square(l, Boundary::Open).unwrap();
            assert_eq!(lat.bonds().len(), 2 * l * (l - 1));
        }
    }

    #[test]
    fn periodic_bond_count_and_uniqueness() {
        for l in 3..=5 {
            let lat = QubitLattice::square(l, Boundary::Periodic).unwrap();
            let bonds = lat.bonds();
            assert_eq!(bonds.len(), 2 * l * l);
            let set: HashSet<_> = bonds.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
            assert_eq!(set.len(), bonds.len());
        }
    }

    #[test]
    fn small_periodic_rejected() {
        assert!(QubitLattice::square(2, Boundary::Periodic).is_err());
    }

    #[test]
    fn two_by_two_bonds_row_major() {
        let lat = QubitLattice::square(2, Boundary::Open).unwrap();
        assert_eq!(lat.column_bonds(), vec![(0, 2), (1, 3)]);
        assert_eq!(lat.row_bonds(), vec![(0, 1), (2, 3)]);
    }
}
