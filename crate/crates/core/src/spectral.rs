// SPDX-License-Identifier: Apache-2.0

//! Dense Liouvillian spectra, exact steady states and perturbation series.
//!
//! Only the diagonalizable case is handled. A large eigenvector condition
//! number is reported as [`Error::Defective`] instead of attempting a Jordan
//! decomposition.

use faer::Mat;

use crate::error::{Error, Result};
use crate::hs::{devectorize, hermitize, vectorize, DenseOperator, DensityMatrix, HSVector, SuperOp};
use crate::linalg::{self, CMat, ZERO};
use crate::C64;

pub const MAX_SPECTRAL_DIM: usize = 4096;
pub const CLUSTER_TOL: f64 = 1e-8;
pub const DEFECTIVE_COND: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<C64>,
    /// Right eigenvectors as columns.
    right: CMat,
    /// `right⁻¹`; row α is `⟨⟨L_α|` without conjugation.
    left: CMat,
    hsdim: usize,
    condition: f64,
    biorthonormality_residual: f64,
}

impl SpectralDecomposition {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Sorted by decreasing real part, then increasing imaginary part.
    pub fn eigenvalues(&self) -> &[C64] {
        &self.eigenvalues
    }

    pub fn hsdim(&self) -> usize {
        self.hsdim
    }

    pub fn condition_number(&self) -> f64 {
        self.condition
    }

    /// `max |⟨⟨L_α|R_β⟩⟩ − δ_αβ|`.
    pub fn biorthonormality_residual(&self) -> f64 {
        self.biorthonormality_residual
    }

    pub fn right_vector(&self, alpha: usize) -> HSVector {
        HSVector::new(linalg::column(&self.right, alpha))
    }

    /// Left vector stored so that `left_vector(α).inner(right_vector(β)) = δ_αβ`.
    pub fn left_vector(&self, alpha: usize) -> HSVector {
        HSVector::new((0..self.left.ncols()).map(|j| self.left[(alpha, j)].conj()).collect())
    }

    /// Index groups of eigenvalues closer than [`CLUSTER_TOL`].
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = Vec::new();
        for (i, l) in self.eigenvalues.iter().enumerate() {
            match out
                .iter_mut()
                .find(|c| c.iter().any(|&j| (self.eigenvalues[j] - l).norm() < CLUSTER_TOL))
            {
                Some(c) => c.push(i),
                None => out.push(vec![i]),
            }
        }
        out
    }

    fn zero_tolerance(&self) -> f64 {
        let scale = self.eigenvalues.iter().map(|l| l.norm()).fold(1.0, f64::max);
        1e-10 * scale
    }

    /// Indices of eigenvalues with `|λ| ≤ 1e−10 · max(1, max|λ|)`.
    pub fn null_indices(&self) -> Vec<usize> {
        let tol = self.zero_tolerance();
        (0..self.len()).filter(|&i| self.eigenvalues[i].norm() <= tol).collect()
    }

    /// Index of the unique steady eigenvalue.
    pub fn steady_index(&self) -> Result<usize> {
        let nulls = self.null_indices();
        match nulls.as_slice() {
            [i] => Ok(*i),
            [] => Err(Error::DegenerateSteadyState(0)),
            many => Err(Error::DegenerateSteadyState(many.len())),
        }
    }
}

/// Eigendecomposition of a superoperator with biorthonormal left vectors.
pub fn spectrum(l: &SuperOp) -> Result<SpectralDecomposition> {
    let n = l.mat().nrows();
    if n > MAX_SPECTRAL_DIM {
        return Err(Error::TooLarge(format!("{n}x{n} superoperator")));
    }
    let (vals, vecs) = linalg::eig(l.mat())?;
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| {
        vals[b]
            .re
            .total_cmp(&vals[a].re)
            .then(vals[a].im.total_cmp(&vals[b].im))
    });
    let eigenvalues: Vec<C64> = order.iter().map(|&i| vals[i]).collect();
    let right = Mat::from_fn(n, n, |i, j| vecs[(i, order[j])]);
    let (_, s, _) = linalg::svd(&right)?;
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let smin = s.iter().cloned().fold(f64::INFINITY, f64::min);
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition < DEFECTIVE_COND) {
        return Err(Error::Defective(condition));
    }
    let left = linalg::inverse(&right).map_err(|_| Error::Defective(condition))?;
    let biorthonormality_residual = linalg::max_abs_diff(&(&left * &right), &linalg::identity(n));
    Ok(SpectralDecomposition {
        eigenvalues,
        right,
        left,
        hsdim: l.hsdim(),
        condition,
        biorthonormality_residual,
    })
}

/// Steady state from the null right eigenvector, rescaled to unit trace.
pub fn steady_state_from(dec: &SpectralDecomposition) -> Result<DensityMatrix> {
    let idx = dec.steady_index()?;
    let op = devectorize(&dec.right_vector(idx))?;
    let tr = op.trace();
    if tr.norm() < 1e-14 {
        return Err(Error::Numerical("steady eigenvector is traceless".into()));
    }
    let rho = DenseOperator::new(hermitize(op.scaled(C64::from(1.0) / tr).mat()))?;
    DensityMatrix::new(rho)
}

/// Steady state from the null space of `L` via SVD. Unlike [`spectrum`]
/// this does not need `L` to be diagonalizable.
pub fn steady_state_exact(l: &SuperOp) -> Result<DensityMatrix> {
    let n = l.mat().nrows();
    if n > MAX_SPECTRAL_DIM {
        return Err(Error::TooLarge(format!("{n}x{n} superoperator")));
    }
    let (_, s, v) = linalg::svd(l.mat())?;
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let tol = 1e-10 * smax.max(1.0);
    let nulls: Vec<usize> = (0..s.len()).filter(|&i| s[i] <= tol).collect();
    let idx = match nulls.as_slice() {
        [i] => *i,
        other => return Err(Error::DegenerateSteadyState(other.len())),
    };
    let op = devectorize(&HSVector::new(linalg::column(&v, idx)))?;
    let tr = op.trace();
    if tr.norm() < 1e-14 {
        return Err(Error::Numerical("null vector is traceless".into()));
    }
    DensityMatrix::new(DenseOperator::new(hermitize(op.scaled(C64::from(1.0) / tr).mat()))?)
}

/// Fixed point of a channel `T`, i.e. the null vector of `T − 1`.
pub fn channel_fixed_point(t: &SuperOp) -> Result<DensityMatrix> {
    steady_state_exact(&t.sub(&SuperOp::identity(t.hsdim())))
}

/// `Γ = min{−Re λ_α : α not steady}`.
pub fn relaxation_gap_from(dec: &SpectralDecomposition) -> Result<f64> {
    let idx = dec.steady_index()?;
    dec.eigenvalues
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != idx)
        .map(|(_, l)| -l.re)
        .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.min(x))))
        .ok_or_else(|| Error::InvalidArgument("spectrum has a single eigenvalue".into()))
}

pub fn relaxation_gap(l: &SuperOp) -> Result<f64> {
    relaxation_gap_from(&spectrum(l)?)
}

/// Eigenvalues other than the steady one, ordered from slowest to fastest decay.
pub fn nonzero_eigenvalues(dec: &SpectralDecomposition) -> Result<Vec<C64>> {
    let idx = dec.steady_index()?;
    Ok(dec.eigenvalues.iter().enumerate().filter(|(i, _)| *i != idx).map(|(_, l)| *l).collect())
}

/// `L₀⁻¹ = Σ_{α ≠ steady} |R_α⟩⟩ λ_α⁻¹ ⟨⟨L_α|`.
pub fn generalized_inverse(dec: &SpectralDecomposition) -> Result<SuperOp> {
    let idx = dec.steady_index()?;
    let tol = dec.zero_tolerance();
    let n = dec.len();
    let mut inv_diag = vec![ZERO; n];
    for (i, l) in dec.eigenvalues.iter().enumerate() {
        if i == idx {
            continue;
        }
        if l.norm() <= tol {
            return Err(Error::Singular(format!("non-steady eigenvalue {l} is numerically zero")));
        }
        inv_diag[i] = C64::from(1.0) / l;
    }
    let scaled = Mat::from_fn(n, n, |i, j| dec.right[(i, j)] * inv_diag[j]);
    SuperOp::new(&scaled * &dec.left, dec.hsdim)
}

#[derive(Debug, Clone)]
pub struct PerturbationResult {
    /// `ρ⁽⁰⁾, ρ⁽¹⁾, …, ρ⁽ᵏ⁾`.
    pub corrections: Vec<DenseOperator>,
    /// Spectral norm of `L₀⁻¹L′`.
    pub contraction: f64,
}

impl PerturbationResult {
    /// `Σ₀ᵏ ρ⁽ⁿ⁾`.
    pub fn partial_sum(&self, k: usize) -> DenseOperator {
        let d = self.corrections[0].dim();
        self.corrections
            .iter()
            .take(k + 1)
            .fold(DenseOperator::zeros(d), |acc, c| acc.add(c))
    }

    pub fn correction_norms(&self) -> Vec<f64> {
        self.corrections.iter().map(|c| linalg::frobenius(c.mat())).collect()
    }
}

/// Steady-state series `ρ⁽ᵏ⁾ = −L₀⁻¹ L′ ρ⁽ᵏ⁻¹⁾`.
pub fn perturb_steady_state(dec: &SpectralDecomposition, lp: &SuperOp, k_max: usize) -> Result<PerturbationResult> {
    if lp.hsdim() != dec.hsdim {
        return Err(Error::Dimension(format!("perturbation d={} vs d={}", lp.hsdim(), dec.hsdim)));
    }
    let rho0 = steady_state_from(dec)?.into_op();
    let ginv = generalized_inverse(dec)?;
    let step = ginv.compose(lp).scaled(-1.0);
    let contraction = linalg::norm2(step.mat());
    let mut corrections = vec![rho0];
    let mut norms = vec![];
    for _ in 0..k_max {
        let next = step.apply(corrections.last().expect("non-empty"));
        norms.push(linalg::frobenius(next.mat()));
        corrections.push(next);
    }
    let growing = norms.len() >= 3 && norms.windows(2).rev().take(2).all(|w| w[1] > w[0]);
    if contraction >= 1.0 && growing {
        return Err(Error::Divergent(norms));
    }
    Ok(PerturbationResult { corrections, contraction })
}

/// First and second order corrections to the non-degenerate eigenvalue `α`.
pub fn perturb_eigenvalue(dec: &SpectralDecomposition, lp: &SuperOp, alpha: usize) -> Result<(C64, C64)> {
    if lp.hsdim() != dec.hsdim {
        return Err(Error::Dimension(format!("perturbation d={} vs d={}", lp.hsdim(), dec.hsdim)));
    }
    if alpha >= dec.len() {
        return Err(Error::InvalidArgument(format!("eigenvalue index {alpha} out of range")));
    }
    let la = dec.eigenvalues[alpha];
    if dec
        .eigenvalues
        .iter()
        .enumerate()
        .any(|(b, lb)| b != alpha && (lb - la).norm() < CLUSTER_TOL)
    {
        return Err(Error::DegenerateEigenvalue(la.re));
    }
    // Row α and column α of R⁻¹ L′ R.
    let row: Vec<C64> = linalg::vecmat(&linalg::vecmat(&(0..dec.len()).map(|j| dec.left[(alpha, j)]).collect::<Vec<_>>(), lp.mat()), &dec.right);
    let col: Vec<C64> = linalg::matvec(&dec.left, &linalg::matvec(lp.mat(), &linalg::column(&dec.right, alpha)));
    let l1 = row[alpha];
    let l2 = (0..dec.len())
        .filter(|&b| b != alpha)
        .map(|b| row[b] * col[b] / (la - dec.eigenvalues[b]))
        .sum();
    Ok((l1, l2))
}

/// `⟨⟨A|S|B⟩⟩` helper used by tests and reports.
pub fn matrix_element(a: &DenseOperator, s: &SuperOp, b: &DenseOperator) -> C64 {
    vectorize(a).inner(&s.apply_vec(&vectorize(b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hs::lindbladian_matrix;
    use crate::pauli::{sigma_minus, Pauli};

    fn decay(gamma: f64) -> SuperOp {
        let a = DenseOperator::new(sigma_minus()).unwrap();
        lindbladian_matrix(&DenseOperator::zeros(2), &[(a, gamma)]).unwrap()
    }

    #[test]
    fn decay_spectrum_and_steady_state() {
        let dec = spectrum(&decay(0.7)).unwrap();
        let ev = dec.eigenvalues();
        let want = [0.0, -0.35, -0.35, -0.7];
        for (l, w) in ev.iter().zip(want) {
            assert!((l - C64::from(w)).norm() < 1e-12, "{ev:?}");
        }
        assert!((relaxation_gap_from(&dec).unwrap() - 0.35).abs() < 1e-12);
        let rho = steady_state_from(&dec).unwrap();
        assert!((rho.mat()[(0, 0)].re - 1.0).abs() < 1e-12);
        assert!(dec.biorthonormality_residual() < 1e-12);
        assert_eq!(dec.clusters().len(), 3);
    }

    #[test]
    fn zero_superop_has_degenerate_null_space() {
        let dec = spectrum(&SuperOp::zeros(2)).unwrap();
        assert!(dec.eigenvalues().iter().all(|l| l.norm() == 0.0));
        assert!(matches!(dec.steady_index(), Err(Error::DegenerateSteadyState(4))));
    }

    #[test]
    fn hamiltonian_only_coherences_rotate() {
        let l = lindbladian_matrix(&Pauli::Z.into(), &[]).unwrap();
        let mut ev: Vec<C64> = spectrum(&l).unwrap().eigenvalues().to_vec();
        ev.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert!((ev[0] - C64::new(0.0, -2.0)).norm() < 1e-12);
        assert!((ev[3] - C64::new(0.0, 2.0)).norm() < 1e-12);
    }

    #[test]
    fn depolarizing_fixed_point_is_maximally_mixed() {
        let e = crate::noise::depolarizing_generator(2).unwrap();
        let rho = steady_state_exact(&e).unwrap();
        assert!(linalg::max_abs_diff(rho.mat(), DensityMatrix::maximally_mixed(4).mat()) < 1e-12);
    }

    #[test]
    fn generalized_inverse_annihilates_steady_state() {
        let dec = spectrum(&decay(1.0)).unwrap();
        let g = generalized_inverse(&dec).unwrap();
        let rho = steady_state_from(&dec).unwrap();
        assert!(linalg::max_abs(g.apply(rho.op()).mat()) < 1e-12);
    }

    #[test]
    fn eigenvalue_correction_of_scaled_generator() {
        let l = decay(1.0);
        let dec = spectrum(&l).unwrap();
        let c = 0.1;
        let (l1, l2) = perturb_eigenvalue(&dec, &l.scaled(c), 3).unwrap();
        assert!((l1 - dec.eigenvalues()[3] * c).norm() < 1e-12);
        assert!(l2.norm() < 1e-12);
        assert!(matches!(perturb_eigenvalue(&dec, &l, 1), Err(Error::DegenerateEigenvalue(_))));
    }

    #[test]
    fn zero_perturbation_gives_zero_corrections() {
        let dec = spectrum(&decay(1.0)).unwrap();
        let res = perturb_steady_state(&dec, &SuperOp::zeros(2), 3).unwrap();
        assert!(res.correction_norms()[1..].iter().all(|n| *n == 0.0));
    }
}
