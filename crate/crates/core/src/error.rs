// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("operator is not Hermitian (max |A - A^dag| = {0:.3e})")]
    NotHermitian(f64),
    #[error("negative rate {0}")]
    NegativeRate(f64),
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
    #[error("map is not trace preserving (defect {0:.3e})")]
    NotTracePreserving(f64),
    #[error("map is not completely positive (min Choi eigenvalue {0:.3e})")]
    NotCompletelyPositive(f64),
    #[error("sites overlap or are out of range: {0}")]
    BadSites(String),
    #[error("matrix is defective or ill-conditioned (eigenvector condition number {0:.3e})")]
    Defective(f64),
    #[error("steady state is not unique ({0} eigenvalues within tolerance of zero)")]
    DegenerateSteadyState(usize),
    #[error("target eigenvalue is degenerate (nearest distance {0:.3e})")]
    DegenerateEigenvalue(f64),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("perturbation series diverges (correction norms {0:?})")]
    Divergent(Vec<f64>),
    #[error("underdetermined fit: {0}")]
    Underdetermined(String),
    #[error("fit failed: {0}")]
    FitFailed(String),
    #[error("no phase transition found: {0}")]
    NoTransition(String),
    #[error("signal rank collapsed: {0}")]
    RankCollapse(String),
    #[error("dimension too large for dense construction: {0}")]
    TooLarge(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
