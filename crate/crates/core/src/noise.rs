// SPDX-License-Identifier: Apache-2.0

//! Gate noise generators, the Pauli transfer representation, twirling and
//! quasi-probability error boosting.
//!
//! Every generator `𝓔` is trace-annihilating, so `exp(rτ𝓔)` is a channel for
//! `r, τ ≥ 0`. Random-Pauli and transverse-damping generators are rescaled so
//! their Pauli-basis Frobenius norm equals that of the depolarizing generator
//! on the same support; equal `r` therefore means equal noise norm.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hs::{embed_superop, DenseOperator, SuperOp};
use crate::linalg::{self, CMat, I, ONE, ZERO};
use crate::pauli::{sigma_minus, Pauli, PauliString};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    #[default]
    None,
    Depolarizing,
    RandomPauli,
    TransverseDamping,
}

/// How noise attaches to the bond generators of the schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Granularity {
    /// One two-site noise channel per bond, after its last axis generator.
    #[default]
    PerBond,
    /// One two-site noise channel after every axis generator.
    PerAxis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    #[serde(default)]
    pub granularity: Granularity,
    /// Allow all fifteen two-site Paulis in the random-Pauli mixture instead
    /// of only those commuting with σᶻσᶻ.
    #[serde(default)]
    pub loosened_pauli_set: bool,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind) -> Self {
        Self { kind, ..Self::default() }
    }

    pub fn none() -> Self {
        Self::default()
    }

    pub fn depolarizing() -> Self {
        Self::new(NoiseKind::Depolarizing)
    }

    pub fn with_granularity(mut self, g: Granularity) -> Self {
        self.granularity = g;
        self
    }

    /// Whether the generators commute with global σᶻ conjugation.
    pub fn is_z2_symmetric(&self) -> bool {
        !matches!(self.kind, NoiseKind::TransverseDamping)
    }

    /// Unscaled generator on `k` sites, before norm matching.
    pub fn raw_generator(&self, k: usize) -> Result<Option<SuperOp>> {
        check_support(k)?;
        Ok(match self.kind {
            NoiseKind::None => None,
            NoiseKind::Depolarizing => Some(depolarizing_generator(k)?),
            NoiseKind::RandomPauli => Some(random_pauli_raw(k, self.loosened_pauli_set)?),
            NoiseKind::TransverseDamping => Some(transverse_damping_raw(k)?),
        })
    }

    /// Ratio `‖𝓔ᵈ‖ / ‖𝓔_raw‖` absorbed into the noise strength.
    pub fn norm_factor(&self, k: usize) -> Result<f64> {
        match self.raw_generator(k)? {
            None => Ok(1.0),
            Some(e) => Ok(noise_norm(&depolarizing_generator(k)?)? / noise_norm(&e)?),
        }
    }

    /// Norm-matched generator on `k` sites (`None` for the noiseless model).
    pub fn generator(&self, k: usize) -> Result<Option<SuperOp>> {
        let Some(raw) = self.raw_generator(k)? else {
            return Ok(None);
        };
        if self.kind == NoiseKind::Depolarizing {
            return Ok(Some(raw));
        }
        let f = noise_norm(&depolarizing_generator(k)?)? / noise_norm(&raw)?;
        Ok(Some(raw.scaled(f)))
    }
}

fn check_support(k: usize) -> Result<()> {
    if k == 1 || k == 2 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("noise acts on 1 or 2 sites, got {k}")))
    }
}

/// `𝓔 = 𝟙/2ᵏ Tr(•) − •` on `k ∈ {1, 2}` sites.
pub fn depolarizing_generator(k: usize) -> Result<SuperOp> {
    check_support(k)?;
    let d = 1usize << k;
    let n = d * d;
    let inv_d = 1.0 / d as f64;
    let mat = Mat::from_fn(n, n, |r, c| {
        let diag_r = r % (d + 1) == 0;
        let diag_c = c % (d + 1) == 0;
        let tr = if diag_r && diag_c { C64::from(inv_d) } else { ZERO };
        if r == c {
            tr - ONE
        } else {
            tr
        }
    });
    SuperOp::new(mat, d)
}

/// Transverse lowering operators `(σ^{x−}, σ^{y−})`.
///
/// `σ^{x−} = (σᶻ + iσʸ)/2` damps along x; `σ^{y−} = (σᶻ − iσˣ)/2` damps along y.
pub fn transverse_ladders() -> (CMat, CMat) {
    let z = Pauli::Z.matrix();
    let half = C64::from(0.5);
    let ax = linalg::scale(&(&z + linalg::scale(&Pauli::Y.matrix(), I)), half);
    let ay = linalg::scale(&(&z - linalg::scale(&Pauli::X.matrix(), I)), half);
    (ax, ay)
}

/// Single-site `(𝒟ˣ + 𝒟ʸ)/2`, not norm-matched.
pub fn transverse_damping_generator() -> SuperOp {
    let (ax, ay) = transverse_ladders();
    let dx = SuperOp::dissipator(&DenseOperator::new(ax).expect("2x2"), 1.0);
    let dy = SuperOp::dissipator(&DenseOperator::new(ay).expect("2x2"), 1.0);
    dx.add(&dy).scaled(0.5)
}

fn transverse_damping_raw(k: usize) -> Result<SuperOp> {
    let one = transverse_damping_generator();
    if k == 1 {
        return Ok(one);
    }
    Ok(embed_superop(&one, &[0], 2)?.add(&embed_superop(&one, &[1], 2)?))
}

/// Paulis allowed in the random-Pauli mixture on `k` sites.
pub fn random_pauli_set(k: usize, loosened: bool) -> Result<Vec<PauliString>> {
    check_support(k)?;
    if k == 1 {
        return Ok(vec![PauliString(vec![Pauli::Z])]);
    }
    let zz = PauliString(vec![Pauli::Z, Pauli::Z]);
    Ok(PauliString::all(2)
        .into_iter()
        .filter(|p| !p.is_identity() && (loosened || p.commutes(&zz)))
        .collect())
}

/// `𝓔_P = [P • P†] − [•]` for a Pauli string.
pub fn pauli_conjugation_generator(p: &PauliString) -> SuperOp {
    let op = DenseOperator::new(p.matrix()).expect("pauli string is square");
    let d = op.dim();
    SuperOp::conjugation(&op).sub(&SuperOp::identity(d))
}

fn random_pauli_raw(k: usize, loosened: bool) -> Result<SuperOp> {
    let set = random_pauli_set(k, loosened)?;
    if set.is_empty() {
        return Err(Error::InvalidArgument("empty random-Pauli set".into()));
    }
    let d = 1usize << k;
    let w = 1.0 / set.len() as f64;
    Ok(set
        .iter()
        .fold(SuperOp::zeros(d), |acc, p| acc.add(&pauli_conjugation_generator(p).scaled(w))))
}

/// Norm-matched random-Pauli generator on `k` sites.
pub fn random_pauli_generator(k: usize, loosened: bool) -> Result<SuperOp> {
    let m = NoiseModel { kind: NoiseKind::RandomPauli, loosened_pauli_set: loosened, ..NoiseModel::default() };
    Ok(m.generator(k)?.expect("random-Pauli model has a generator"))
}

/// Pauli transfer matrix `R[P, Q] = Tr(P S(Q)) / 2ᵏ`, indexed by [`PauliString::index`].
pub fn pauli_transfer_matrix(s: &SuperOp) -> Result<CMat> {
    let d = s.hsdim();
    let k = d.trailing_zeros() as usize;
    if d != 1 << k || !(1..=2).contains(&k) {
        return Err(Error::Dimension(format!("transfer matrix needs 1 or 2 qubits, got d={d}")));
    }
    let paulis: Vec<DenseOperator> = PauliString::all(k)
        .iter()
        .map(|p| DenseOperator::new(p.matrix()).expect("square"))
        .collect();
    let images: Vec<DenseOperator> = paulis.iter().map(|q| s.apply(q)).collect();
    let n = paulis.len();
    Ok(Mat::from_fn(n, n, |p, q| paulis[p].trace_product(&images[q]) / d as f64))
}

/// Frobenius norm of the Pauli-basis matrix of `e`.
pub fn noise_norm(e: &SuperOp) -> Result<f64> {
    Ok(linalg::frobenius(&pauli_transfer_matrix(e)?))
}

/// `+1` if the strings commute, `−1` otherwise.
fn commutation_sign(p: &PauliString, q: &PauliString) -> f64 {
    if p.commutes(q) {
        1.0
    } else {
        -1.0
    }
}

/// Walsh–Hadamard map from Pauli fidelities `f_P` to probabilities
/// `p_Q = 4⁻ᵏ Σ_P s(P, Q) f_P`.
fn fidelities_to_probs(f: &[f64], k: usize) -> Vec<f64> {
    let all = PauliString::all(k);
    let n = all.len() as f64;
    all.iter()
        .map(|q| all.iter().zip(f).map(|(p, fp)| commutation_sign(p, q) * fp).sum::<f64>() / n)
        .collect()
}

fn probs_to_fidelities(p: &[f64], k: usize) -> Vec<f64> {
    let all = PauliString::all(k);
    all.iter()
        .map(|a| all.iter().zip(p).map(|(q, pq)| commutation_sign(a, q) * pq).sum())
        .collect()
}

/// Pauli channel `ρ ↦ Σ_Q p_Q Q ρ Q` on one or two sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliChannel {
    k: usize,
    probs: Vec<f64>,
}

impl PauliChannel {
    pub fn new(k: usize, probs: Vec<f64>) -> Result<Self> {
        check_support(k)?;
        if probs.len() != 1 << (2 * k) {
            return Err(Error::Dimension(format!("{} probabilities for {k} sites", probs.len())));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!("probabilities sum to {total}")));
        }
        if let Some(p) = probs.iter().find(|p| **p < -1e-12) {
            return Err(Error::InvalidArgument(format!("negative probability {p}")));
        }
        Ok(Self { k, probs })
    }

    /// Depolarizing channel: total error probability `p` spread evenly over non-identity Paulis.
    pub fn depolarizing(k: usize, p: f64) -> Result<Self> {
        let n = 1usize << (2 * k);
        let mut probs = vec![p / (n - 1) as f64; n];
        probs[0] = 1.0 - p;
        Self::new(k, probs)
    }

    pub fn n_sites(&self) -> usize {
        self.k
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, p: &PauliString) -> f64 {
        self.probs[p.index()]
    }

    /// Diagonal of the transfer matrix.
    pub fn fidelities(&self) -> Vec<f64> {
        probs_to_fidelities(&self.probs, self.k)
    }

    pub fn superop(&self) -> SuperOp {
        let d = 1usize << self.k;
        PauliString::all(self.k)
            .iter()
            .zip(&self.probs)
            .filter(|(_, p)| **p != 0.0)
            .fold(SuperOp::zeros(d), |acc, (q, p)| {
                let op = DenseOperator::new(q.matrix()).expect("square");
                acc.add(&SuperOp::conjugation(&op).scaled(*p))
            })
    }
}

/// Average `P† ∘ S ∘ P` over the Pauli group of the support.
pub fn twirl_superop(channel: &SuperOp) -> Result<SuperOp> {
    let d = channel.hsdim();
    let k = d.trailing_zeros() as usize;
    check_support(k)?;
    let all = PauliString::all(k);
    let w = 1.0 / all.len() as f64;
    Ok(all.iter().fold(SuperOp::zeros(d), |acc, p| {
        let c = SuperOp::conjugation(&DenseOperator::new(p.matrix()).expect("square"));
        acc.add(&c.compose(channel).compose(&c).scaled(w))
    }))
}

/// Pauli twirl of a CPTP channel on one or two sites.
pub fn pauli_twirl(channel: &SuperOp) -> Result<PauliChannel> {
    channel.require_cptp(1e-10, 1e-10)?;
    let twirled = twirl_superop(channel)?;
    let r = pauli_transfer_matrix(&twirled)?;
    let k = channel.hsdim().trailing_zeros() as usize;
    let f: Vec<f64> = (0..r.nrows()).map(|i| r[(i, i)].re).collect();
    let mut probs = fidelities_to_probs(&f, k);
    for p in probs.iter_mut() {
        if p.abs() < 1e-15 {
            *p = 0.0;
        }
    }
    PauliChannel::new(k, probs)
}

/// Signed Pauli weights `q` with `Σ q_Q [Q] ∘ N = N_target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuasiProbabilityScheme {
    pub k: usize,
    pub weights: Vec<f64>,
}

impl QuasiProbabilityScheme {
    pub fn one_norm(&self) -> f64 {
        self.weights.iter().map(|q| q.abs()).sum()
    }

    /// All weights non-negative, so the correction can be sampled directly.
    pub fn is_physical(&self) -> bool {
        self.weights.iter().all(|q| *q >= -1e-14)
    }

    pub fn signed_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// The correction map `Σ q_Q [Q]`.
    pub fn superop(&self) -> SuperOp {
        let d = 1usize << self.k;
        PauliString::all(self.k).iter().zip(&self.weights).fold(SuperOp::zeros(d), |acc, (q, w)| {
            let op = DenseOperator::new(q.matrix()).expect("square");
            acc.add(&SuperOp::conjugation(&op).scaled(*w))
        })
    }
}

/// Solve for the quasi-probability correction that turns `n` into `target`.
pub fn boost_error(n: &PauliChannel, target: &PauliChannel) -> Result<QuasiProbabilityScheme> {
    if n.k != target.k {
        return Err(Error::Dimension("channels act on different supports".into()));
    }
    let f = n.fidelities();
    let ft = target.fidelities();
    if let Some(bad) = f.iter().find(|x| x.abs() < 1e-12) {
        return Err(Error::Singular(format!("Pauli fidelity {bad:e}")));
    }
    let ratio: Vec<f64> = ft.iter().zip(&f).map(|(a, b)| a / b).collect();
    Ok(QuasiProbabilityScheme { k: n.k, weights: fidelities_to_probs(&ratio, n.k) })
}

/// Single-qubit amplitude damping channel with decay probability `p`.
pub fn amplitude_damping_channel(p: f64) -> SuperOp {
    let sm = DenseOperator::new(linalg::scale(&sigma_minus(), C64::from(p.sqrt()))).expect("2x2");
    let k0 = DenseOperator::new(Mat::from_fn(2, 2, |i, j| match (i, j) {
        (0, 0) => ONE,
        (1, 1) => C64::from((1.0 - p).sqrt()),
        _ => ZERO,
    }))
    .expect("2x2");
    SuperOp::conjugation(&k0).add(&SuperOp::conjugation(&sm))
}
