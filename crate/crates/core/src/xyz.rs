// SPDX-License-Identifier: Apache-2.0

//! The dissipative XYZ model on a square lattice.
//!
//! `H = Σ_⟨ij⟩ Σ_α J_α σᵢᵅσⱼᵅ` with single-site decay `γ 𝒟[σ⁻]`. The Trotter
//! schedule groups gates as column bonds, row bonds, then dissipators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hs::{embed_local, DenseOperator, DensityMatrix, SuperOp};
use crate::lattice::{Bond, QubitLattice};
use crate::linalg::{self, ZERO};
use crate::noise::{Granularity, NoiseModel};
use crate::pauli::{sigma_minus, Pauli};
use crate::C64;

pub const DEFAULT_JX: f64 = 0.9;
pub const EXACT_MAX_QUBITS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub jx: f64,
    pub jy: f64,
    pub jz: f64,
    pub gamma: f64,
    pub lattice: QubitLattice,
}

impl ModelSpec {
    pub fn new(jx: f64, jy: f64, jz: f64, gamma: f64, lattice: QubitLattice) -> Result<Self> {
        let spec = Self { jx, jy, jz, gamma, lattice };
        spec.validate()?;
        Ok(spec)
    }

    /// Default parametrization at aspect ratio `g`: `Jx = 0.9`, `Jy = Jx + 2g`, `Jz = γ = 1`.
    pub fn from_g(lattice: QubitLattice, g: f64) -> Result<Self> {
        Self::new(DEFAULT_JX, DEFAULT_JX + 2.0 * g, 1.0, 1.0, lattice)
    }

    /// Pure decay (`J = 0`).
    pub fn decay_only(lattice: QubitLattice, gamma: f64) -> Result<Self> {
        Self::new(0.0, 0.0, 0.0, gamma, lattice)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("jx", self.jx), ("jy", self.jy), ("jz", self.jz)] {
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be finite, got {v}")));
            }
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::NegativeRate(self.gamma));
        }
        Ok(())
    }

    /// `g = |Jx − Jy| / (2γ)`.
    pub fn g(&self) -> f64 {
        (self.jx - self.jy).abs() / (2.0 * self.gamma)
    }

    pub fn coupling(&self, axis: Pauli) -> f64 {
        match axis {
            Pauli::X => self.jx,
            Pauli::Y => self.jy,
            Pauli::Z => self.jz,
            Pauli::I => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Group {
    Column,
    Row,
    Dissipation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateKind {
    Bond { axis: Pauli, bond: Bond },
    Dissipator { site: usize },
}

/// One Trotter factor `𝒢 = 𝒢ⁱᵈ + r𝓔` acting on at most two sites.
#[derive(Debug, Clone)]
pub struct GateGenerator {
    pub kind: GateKind,
    pub group: Group,
    pub sites: Vec<usize>,
    pub ideal: SuperOp,
    /// Unit-strength noise generator on the same support.
    pub noise: Option<SuperOp>,
}

impl GateGenerator {
    /// `𝒢ⁱᵈ + r𝓔` on the gate support.
    pub fn generator(&self, r: f64) -> SuperOp {
        match &self.noise {
            Some(e) if r != 0.0 => self.ideal.add(&e.scaled(r)),
            _ => self.ideal.clone(),
        }
    }
}

fn bond_hamiltonian(axis: Pauli, j: f64) -> DenseOperator {
    let m = linalg::kron(&axis.matrix(), &axis.matrix());
    DenseOperator::new(linalg::scale(&m, C64::from(j))).expect("4x4")
}

/// `γ 𝒟[σ⁻]` on one site.
pub fn decay_generator(gamma: f64) -> SuperOp {
    SuperOp::dissipator(&DenseOperator::new(sigma_minus()).expect("2x2"), gamma)
}

/// Ordered gate schedule of the model with `noise` attached.
pub fn build_xyz(spec: &ModelSpec, noise: &NoiseModel) -> Result<Vec<GateGenerator>> {
    spec.validate()?;
    let two = noise.generator(2)?;
    let one = noise.generator(1)?;
    let mut gates = Vec::new();
    let lat = &spec.lattice;
    for (group, bonds) in [(Group::Column, lat.column_bonds()), (Group::Row, lat.row_bonds())] {
        for bond in bonds {
            for axis in [Pauli::X, Pauli::Y, Pauli::Z] {
                let attach = match noise.granularity {
                    Granularity::PerAxis => true,
                    Granularity::PerBond => axis == Pauli::Z,
                };
                gates.push(GateGenerator {
                    kind: GateKind::Bond { axis, bond },
                    group,
                    sites: vec![bond.0, bond.1],
                    ideal: SuperOp::hamiltonian(&bond_hamiltonian(axis, spec.coupling(axis))),
                    noise: if attach { two.clone() } else { None },
                });
            }
        }
    }
    for site in 0..lat.n_sites() {
        gates.push(GateGenerator {
            kind: GateKind::Dissipator { site },
            group: Group::Dissipation,
            sites: vec![site],
            ideal: decay_generator(spec.gamma),
            noise: one.clone(),
        });
    }
    Ok(gates)
}

fn require_exact_size(n: usize) -> Result<()> {
    if n > EXACT_MAX_QUBITS {
        return Err(Error::TooLarge(format!(
            "{n} qubits exceeds the dense limit of {EXACT_MAX_QUBITS}"
        )));
    }
    Ok(())
}

/// Full Hamiltonian of the model.
pub fn hamiltonian(spec: &ModelSpec) -> Result<DenseOperator> {
    require_exact_size(spec.lattice.n_sites())?;
    let mut h = DenseOperator::zeros(spec.lattice.dim());
    for bond in spec.lattice.bonds() {
        for axis in [Pauli::X, Pauli::Y, Pauli::Z] {
            let term = embed_local(&bond_hamiltonian(axis, spec.coupling(axis)), &[bond.0, bond.1], &spec.lattice)?;
            h = h.add(&term);
        }
    }
    Ok(h)
}

/// Exact Lindbladian `L₀` assembled from the Hamiltonian and jump operators.
pub fn exact_lindbladian(spec: &ModelSpec) -> Result<SuperOp> {
    let h = hamiltonian(spec)?;
    let sm = DenseOperator::new(sigma_minus()).expect("2x2");
    let jumps = (0..spec.lattice.n_sites())
        .map(|i| Ok((embed_local(&sm, &[i], &spec.lattice)?, spec.gamma)))
        .collect::<Result<Vec<_>>>()?;
    crate::hs::lindbladian_matrix(&h, &jumps)
}

/// Sum of the full-space embeddings of `𝒢ᵢᵈ + r𝓔ᵢ` over the schedule.
pub fn schedule_generator_sum(gates: &[GateGenerator], n: usize, r: f64) -> Result<SuperOp> {
    require_exact_size(n)?;
    gates.iter().try_fold(SuperOp::zeros(1 << n), |acc, g| {
        Ok(acc.add(&crate::hs::embed_superop(&g.generator(r), &g.sites, n)?))
    })
}

fn check_dim(rho: &DensityMatrix, lattice: &QubitLattice) -> Result<usize> {
    if rho.dim() != lattice.dim() {
        return Err(Error::Dimension(format!(
            "state dim {} vs lattice dim {}",
            rho.dim(),
            lattice.dim()
        )));
    }
    Ok(lattice.n_sites())
}

/// `M = (1/N) Σᵢ Tr[σᵢᶻ ρ]`.
pub fn magnetization(rho: &DensityMatrix, lattice: &QubitLattice) -> Result<f64> {
    let n = check_dim(rho, lattice)?;
    let m = rho.mat();
    let total: f64 = (0..rho.dim())
        .map(|k| m[(k, k)].re * (2.0 * k.count_ones() as f64 - n as f64))
        .sum();
    Ok(total / n as f64)
}

/// `Tr[σᵢᵅ ρ]` for a single site.
pub fn site_expectation(rho: &DensityMatrix, lattice: &QubitLattice, site: usize, axis: Pauli) -> Result<f64> {
    let n = check_dim(rho, lattice)?;
    if site >= n {
        return Err(Error::BadSites(format!("site {site} out of range")));
    }
    let bit = 1usize << (n - 1 - site);
    let m = rho.mat();
    let d = rho.dim();
    let v: f64 = match axis {
        Pauli::I => (0..d).map(|k| m[(k, k)].re).sum(),
        Pauli::Z => (0..d).map(|k| if k & bit != 0 { m[(k, k)].re } else { -m[(k, k)].re }).sum(),
        // Tr[σˣρ] = Σ_k ρ[k ⊕ b, k]
        Pauli::X => (0..d).map(|k| m[(k ^ bit, k)].re).sum(),
        // σʸ|0⟩ = −i|1⟩, σʸ|1⟩ = i|0⟩; Tr[σʸρ] = Σ_k ⟨k|σʸ ρ|k⟩
        Pauli::Y => (0..d)
            .map(|k| {
                let phase = if k & bit == 0 { C64::new(0.0, 1.0) } else { C64::new(0.0, -1.0) };
                (phase * m[(k ^ bit, k)]).re
            })
            .sum(),
    };
    Ok(v)
}

/// `m = (1/N) Σᵢ Tr[σᵢˣ ρ]`.
pub fn order_parameter(rho: &DensityMatrix, lattice: &QubitLattice) -> Result<f64> {
    let n = check_dim(rho, lattice)?;
    let s = (0..n)
        .map(|i| site_expectation(rho, lattice, i, Pauli::X))
        .sum::<Result<f64>>()?;
    Ok(s / n as f64)
}

/// Global σᶻ conjugation `𝒵 = [Πᵢσᵢᶻ • Πᵢσᵢᶻ]` on `n` qubits (diagonal).
pub fn z2_superop(n: usize) -> SuperOp {
    let d = 1usize << n;
    let sign = |k: usize| if (n - k.count_ones() as usize).is_multiple_of(2) { 1.0 } else { -1.0 };
    let mat = faer::Mat::from_fn(d * d, d * d, |r, c| {
        if r == c {
            C64::from(sign(r / d) * sign(r % d))
        } else {
            ZERO
        }
    });
    SuperOp::new(mat, d).expect("square")
}

/// `‖[𝒵, S]‖_F`.
pub fn z2_defect(s: &SuperOp) -> f64 {
    let n = s.hsdim().trailing_zeros() as usize;
    z2_superop(n).commutator(s).frobenius()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Boundary;

    fn lat(l: usize) -> QubitLattice {
        QubitLattice::square(l, Boundary::Open).unwrap()
    }

    #[test]
    fn single_site_schedule() {
        let spec = ModelSpec::from_g(lat(1), 0.1).unwrap();
        let gates = build_xyz(&spec, &NoiseModel::none()).unwrap();
        assert_eq!(gates.len(), 1);
        assert_eq!(gates[0].group, Group::Dissipation);
    }

    #[test]
    fn two_by_two_counts_and_order() {
        let spec = ModelSpec::from_g(lat(2), 0.1).unwrap();
        let gates = build_xyz(&spec, &NoiseModel::depolarizing()).unwrap();
        let bonds = gates.iter().filter(|g| matches!(g.kind, GateKind::Bond { .. })).count();
        assert_eq!(bonds, 12);
        assert_eq!(gates.len(), 16);
        let groups: Vec<Group> = gates.iter().map(|g| g.group).collect();
        let mut sorted = groups.clone();
        sorted.sort_by_key(|g| *g as u8);
        assert_eq!(groups, sorted);
        // per-bond noise: one channel per bond plus one per site
        assert_eq!(gates.iter().filter(|g| g.noise.is_some()).count(), 8);
    }

    #[test]
    fn g_is_derived_from_couplings() {
        for g in [0.025, 0.1, 0.25] {
            let spec = ModelSpec::from_g(lat(3), g).unwrap();
            assert!((spec.g() - g).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_non_finite_coupling() {
        assert!(ModelSpec::new(f64::NAN, 0.0, 1.0, 1.0, lat(1)).is_err());
        assert!(ModelSpec::new(0.0, 0.0, 1.0, -1.0, lat(1)).is_err());
    }

    #[test]
    fn schedule_sums_to_lindbladian() {
        let spec = ModelSpec::from_g(lat(2), 0.1).unwrap();
        let gates = build_xyz(&spec, &NoiseModel::none()).unwrap();
        let sum = schedule_generator_sum(&gates, 4, 0.0).unwrap();
        let l0 = exact_lindbladian(&spec).unwrap();
        assert!(linalg::max_abs_diff(sum.mat(), l0.mat()) < 1e-12);
    }

    #[test]
    fn exact_lindbladian_is_z2_symmetric() {
        let spec = ModelSpec::from_g(lat(2), 0.1).unwrap();
        assert!(z2_defect(&exact_lindbladian(&spec).unwrap()) < 1e-10);
    }

    #[test]
    fn observables_on_reference_states() {
        let l = lat(2);
        let down = DensityMatrix::all_down(4);
        assert!((magnetization(&down, &l).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(order_parameter(&down, &l).unwrap(), 0.0);
        let mm = DensityMatrix::maximally_mixed(16);
        assert!(magnetization(&mm, &l).unwrap().abs() < 1e-15);
        assert!(order_parameter(&mm, &l).unwrap().abs() < 1e-15);
    }

    #[test]
    fn site_expectations_match_embedded_operators() {
        use rand::SeedableRng;
        let l = lat(2);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let rho = DensityMatrix::random(16, &mut rng);
        for site in 0..4 {
            for axis in [Pauli::X, Pauli::Y, Pauli::Z] {
                let op = embed_local(&DenseOperator::from(axis), &[site], &l).unwrap();
                let want = rho.expectation(&op).re;
                let got = site_expectation(&rho, &l, site, axis).unwrap();
                assert!((want - got).abs() < 1e-12, "{site} {axis:?}");
            }
        }
    }
}
