// SPDX-License-Identifier: Apache-2.0

//! Classical simulation of Trotterized, noisy open-system dynamics on small
//! qubit lattices, together with the analysis tools needed to mitigate the
//! noise afterwards.
//!
//! The crate is organised bottom-up:
//!
//! * [`hs`]: Hilbert–Schmidt linear algebra (vectorization, Lindbladian
//!   matrices, local channel application on full-lattice density matrices).
//! * [`lattice`] and [`xyz`]: the square-lattice dissipative XYZ model and its
//!   grouped Trotter gate schedule.
//! * [`noise`]: gate noise generators, Pauli twirling and error boosting.
//! * [`trotter`]: propagation of density matrices through the noisy schedule.
//! * [`spectral`]: exact Liouvillian diagonalization and perturbation theory.
//! * [`magnus`]: effective generator of one noisy Trotter step.
//! * [`meanfield`]: single-site mean-field dynamics and phase curves.
//! * [`mitigation`]: Richardson extrapolation, critical-scaling fits and the
//!   matrix pencil method.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled and plain iteration otherwise.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod hs;
pub mod lattice;
pub mod linalg;
pub mod magnus;
pub mod meanfield;
pub mod mitigation;
pub mod noise;
pub mod par;
pub mod pauli;
pub mod spectral;
pub mod trotter;
pub mod xyz;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
