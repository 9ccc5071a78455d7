// SPDX-License-Identifier: Apache-2.0

//! Hilbert–Schmidt space linear algebra.
//!
//! Operators are vectorized by **row stacking**: entry `A[i, j]` of a `d × d`
//! matrix lands at index `i * d + j`. With this convention
//! `vec(A X B) = (A ⊗ Bᵀ) vec(X)`, and the Lindbladian of
//! `H` and jump operators `Aₖ` is
//!
//! ```text
//! L = −i(H ⊗ 1 − 1 ⊗ Hᵀ) + Σₖ γₖ [Aₖ ⊗ Aₖ* − ½(Aₖ†Aₖ ⊗ 1 + 1 ⊗ AₖᵀAₖ*)]
//! ```
//!
//! Every superoperator in the crate uses this layout; [`ROW_STACKING`]
//! documents it in code.

use faer::Mat;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::lattice::QubitLattice;
use crate::linalg::{self, CMat, ONE, ZERO};
use crate::par::{self, Exec};
use crate::C64;

/// Vectorization convention marker: `vec(A)[i * d + j] = A[i, j]`.
pub const ROW_STACKING: bool = true;

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const STATE_TRACE_TOL: f64 = 1e-10;
pub const STATE_HERMITIAN_TOL: f64 = 1e-10;
pub const STATE_POSITIVITY_TOL: f64 = -1e-8;
pub const TRACE_PRESERVATION_TOL: f64 = 1e-10;

// ---------------------------------------------------------------------------
// Operators and states
// ---------------------------------------------------------------------------

/// Square complex matrix on a Hilbert space of dimension `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    mat: CMat,
}

impl DenseOperator {
    pub fn new(mat: CMat) -> Result<Self> {
        if mat.nrows() != mat.ncols() || mat.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "operator must be square and non-empty, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        Ok(Self { mat })
    }

    /// Construct and verify Hermiticity to [`HERMITIAN_TOL`].
    pub fn hermitian(mat: CMat) -> Result<Self> {
        let op = Self::new(mat)?;
        op.require_hermitian(HERMITIAN_TOL)?;
        Ok(op)
    }

    pub fn identity(dim: usize) -> Self {
        Self { mat: linalg::identity(dim) }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { mat: linalg::zeros(dim, dim) }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn mat(&self) -> &CMat {
        &self.mat
    }

    pub fn into_mat(self) -> CMat {
        self.mat
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.mat[(i, j)]
    }

    /// `max |A − A†|`.
    pub fn hermitian_defect(&self) -> f64 {
        let d = self.dim();
        let mut m = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                m = m.max((self.mat[(i, j)] - self.mat[(j, i)].conj()).norm());
            }
        }
        m
    }

    pub fn require_hermitian(&self, tol: f64) -> Result<()> {
        let defect = self.hermitian_defect();
        if defect > tol {
            return Err(Error::NotHermitian(defect));
        }
        Ok(())
    }

    pub fn adjoint(&self) -> Self {
        Self { mat: linalg::adjoint(&self.mat) }
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.mat)
    }

    pub fn matmul(&self, other: &DenseOperator) -> DenseOperator {
        Self { mat: &self.mat * &other.mat }
    }

    pub fn kron(&self, other: &DenseOperator) -> DenseOperator {
        Self { mat: linalg::kron(&self.mat, &other.mat) }
    }

    pub fn scaled(&self, s: C64) -> DenseOperator {
        Self { mat: linalg::scale(&self.mat, s) }
    }

    pub fn add(&self, other: &DenseOperator) -> DenseOperator {
        Self { mat: &self.mat + &other.mat }
    }

    pub fn sub(&self, other: &DenseOperator) -> DenseOperator {
        Self { mat: &self.mat - &other.mat }
    }

    /// `Tr(A B)`.
    pub fn trace_product(&self, other: &DenseOperator) -> C64 {
        let d = self.dim();
        let mut s = ZERO;
        for i in 0..d {
            for k in 0..d {
                s += self.mat[(i, k)] * other.mat[(k, i)];
            }
        }
        s
    }

    /// Trace norm `‖A‖₁` of the Hermitian part.
    pub fn trace_norm_hermitian(&self) -> Result<f64> {
        Ok(linalg::hermitian_eigenvalues(&self.mat)?.iter().map(|x| x.abs()).sum())
    }
}

impl From<crate::pauli::Pauli> for DenseOperator {
    fn from(p: crate::pauli::Pauli) -> Self {
        DenseOperator { mat: p.matrix() }
    }
}

/// A validated density matrix: unit trace, Hermitian, positive semidefinite
/// up to the crate tolerances.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    op: DenseOperator,
}

impl DensityMatrix {
    pub fn new(op: DenseOperator) -> Result<Self> {
        let rho = Self { op };
        rho.validate()?;
        Ok(rho)
    }

    /// Wrap without checks; used on the hot path after CPTP propagation.
    pub fn new_unchecked(op: DenseOperator) -> Self {
        Self { op }
    }

    pub fn validate(&self) -> Result<()> {
        let tr = self.op.trace();
        if (tr - ONE).norm() > STATE_TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr}")));
        }
        let herm = self.op.hermitian_defect();
        if herm > STATE_HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("hermiticity defect {herm:.3e}")));
        }
        let min = self.min_eigenvalue()?;
        if min < STATE_POSITIVITY_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(())
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(linalg::hermitian_eigenvalues(self.op.mat())?[0])
    }

    /// Computational basis state `|k⟩⟨k|`.
    pub fn basis_state(dim: usize, k: usize) -> Self {
        let mat = Mat::from_fn(dim, dim, |i, j| if i == k && j == k { ONE } else { ZERO });
        Self { op: DenseOperator { mat } }
    }

    /// All spins down: `|0…0⟩`.
    pub fn all_down(n_qubits: usize) -> Self {
        Self::basis_state(1 << n_qubits, 0)
    }

    pub fn all_up(n_qubits: usize) -> Self {
        let d = 1 << n_qubits;
        Self::basis_state(d, d - 1)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        let mat = Mat::from_fn(dim, dim, |i, j| if i == j { C64::from(1.0 / dim as f64) } else { ZERO });
        Self { op: DenseOperator { mat } }
    }

    /// Single-qubit state `(1 + s·σ)/2`; requires `|s| ≤ 1`.
    pub fn bloch(s: [f64; 3]) -> Result<Self> {
        use crate::pauli::Pauli;
        let mut mat = linalg::identity(2);
        for (p, c) in [Pauli::X, Pauli::Y, Pauli::Z].iter().zip(s) {
            mat += linalg::scale(&p.matrix(), C64::from(c));
        }
        Self::new(DenseOperator::new(linalg::scale(&mat, C64::from(0.5)))?)
    }

    /// `ρ₀ ⊗ ρ₁ ⊗ …` with site 0 as the leftmost factor.
    pub fn product(sites: &[DensityMatrix]) -> Result<Self> {
        let (first, rest) = sites.split_first().ok_or_else(|| Error::InvalidArgument("empty product".into()))?;
        Ok(Self { op: rest.iter().fold(first.op.clone(), |acc, s| acc.kron(&s.op)) })
    }

    /// Random full-rank state `G G† / Tr(G G†)` from a complex Ginibre matrix.
    pub fn random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let g = random_ginibre(dim, dim, rng);
        let gg = &g * linalg::adjoint(&g);
        let tr = linalg::trace(&gg);
        let mat = linalg::scale(&gg, ONE / tr);
        let mut op = DenseOperator { mat };
        op.mat = hermitize(&op.mat);
        Self { op }
    }

    pub fn op(&self) -> &DenseOperator {
        &self.op
    }

    pub fn mat(&self) -> &CMat {
        self.op.mat()
    }

    pub fn into_op(self) -> DenseOperator {
        self.op
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    /// `Tr(O ρ)`.
    pub fn expectation(&self, obs: &DenseOperator) -> C64 {
        obs.trace_product(&self.op)
    }

    /// `½ ‖ρ − σ‖₁`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        Ok(0.5 * self.op.sub(&other.op).trace_norm_hermitian()?)
    }
}

pub(crate) fn hermitize(a: &CMat) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| (a[(i, j)] + a[(j, i)].conj()) * 0.5)
}

pub(crate) fn random_ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    Mat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    })
}

// ---------------------------------------------------------------------------
// Hilbert–Schmidt vectors
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct HSVector {
    data: Vec<C64>,
}

impl HSVector {
    pub fn new(data: Vec<C64>) -> Self {
        Self { data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    /// `⟨⟨self|other⟩⟩ = Σ conj(selfᵢ) otherᵢ`.
    pub fn inner(&self, other: &HSVector) -> C64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

pub fn vectorize(a: &DenseOperator) -> HSVector {
    let d = a.dim();
    let mut data = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            data.push(a.mat[(i, j)]);
        }
    }
    HSVector { data }
}

pub fn devectorize(v: &HSVector) -> Result<DenseOperator> {
    let d = perfect_square_root(v.len())
        .ok_or_else(|| Error::Dimension(format!("length {} is not a perfect square", v.len())))?;
    let mat = Mat::from_fn(d, d, |i, j| v.data[i * d + j]);
    DenseOperator::new(mat)
}

fn perfect_square_root(n: usize) -> Option<usize> {
    if n == 0 {
        return None;
    }
    let r = (n as f64).sqrt().round() as usize;
    (r * r == n).then_some(r)
}

/// `⟨⟨A|B⟩⟩ = Tr(A†B)`.
pub fn hs_inner(a: &DenseOperator, b: &DenseOperator) -> C64 {
    vectorize(a).inner(&vectorize(b))
}

// ---------------------------------------------------------------------------
// Superoperators
// ---------------------------------------------------------------------------

/// A `d² × d²` matrix acting on row-stacked operators of dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperOp {
    mat: CMat,
    hsdim: usize,
}

impl SuperOp {
    pub fn new(mat: CMat, hsdim: usize) -> Result<Self> {
        let n = hsdim * hsdim;
        if mat.nrows() != n || mat.ncols() != n {
            return Err(Error::Dimension(format!(
                "superoperator for d={hsdim} must be {n}x{n}, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        Ok(Self { mat, hsdim })
    }

    pub fn zeros(hsdim: usize) -> Self {
        let n = hsdim * hsdim;
        Self { mat: linalg::zeros(n, n), hsdim }
    }

    pub fn identity(hsdim: usize) -> Self {
        Self { mat: linalg::identity(hsdim * hsdim), hsdim }
    }

    /// `X ↦ A X B`, i.e. `A ⊗ Bᵀ`.
    pub fn sandwich(a: &DenseOperator, b: &DenseOperator) -> Self {
        Self { mat: linalg::kron(a.mat(), &linalg::transpose(b.mat())), hsdim: a.dim() }
    }

    /// `X ↦ U X U†`.
    pub fn conjugation(u: &DenseOperator) -> Self {
        Self::sandwich(u, &u.adjoint())
    }

    /// `X ↦ −i[H, X]`.
    pub fn hamiltonian(h: &DenseOperator) -> Self {
        let d = h.dim();
        let id = linalg::identity(d);
        let m = linalg::kron(h.mat(), &id) - linalg::kron(&id, &linalg::transpose(h.mat()));
        Self { mat: linalg::scale(&m, C64::new(0.0, -1.0)), hsdim: d }
    }

    /// `X ↦ γ(A X A† − ½{A†A, X})`.
    pub fn dissipator(a: &DenseOperator, gamma: f64) -> Self {
        let d = a.dim();
        let id = linalg::identity(d);
        let ad_a = linalg::adjoint(a.mat()) * a.mat();
        let m = linalg::kron(a.mat(), &linalg::conj(a.mat()))
            - linalg::scale(
                &(linalg::kron(&ad_a, &id) + linalg::kron(&id, &linalg::transpose(&ad_a))),
                C64::from(0.5),
            );
        Self { mat: linalg::scale(&m, C64::from(gamma)), hsdim: d }
    }

    pub fn hsdim(&self) -> usize {
        self.hsdim
    }

    pub fn mat(&self) -> &CMat {
        &self.mat
    }

    pub fn into_mat(self) -> CMat {
        self.mat
    }

    pub fn apply_vec(&self, v: &HSVector) -> HSVector {
        HSVector { data: linalg::matvec(&self.mat, &v.data) }
    }

    pub fn apply(&self, x: &DenseOperator) -> DenseOperator {
        let v = self.apply_vec(&vectorize(x));
        let d = self.hsdim;
        DenseOperator { mat: Mat::from_fn(d, d, |i, j| v.data[i * d + j]) }
    }

    /// `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &SuperOp) -> SuperOp {
        SuperOp { mat: &self.mat * &other.mat, hsdim: self.hsdim }
    }

    pub fn add(&self, other: &SuperOp) -> SuperOp {
        SuperOp { mat: &self.mat + &other.mat, hsdim: self.hsdim }
    }

    pub fn sub(&self, other: &SuperOp) -> SuperOp {
        SuperOp { mat: &self.mat - &other.mat, hsdim: self.hsdim }
    }

    pub fn scaled(&self, s: f64) -> SuperOp {
        SuperOp { mat: linalg::scale(&self.mat, C64::from(s)), hsdim: self.hsdim }
    }

    pub fn commutator(&self, other: &SuperOp) -> SuperOp {
        SuperOp { mat: linalg::commutator(&self.mat, &other.mat), hsdim: self.hsdim }
    }

    /// `exp(t · self)`.
    pub fn exp(&self, t: f64) -> SuperOp {
        SuperOp { mat: linalg::expm(&linalg::scale(&self.mat, C64::from(t))), hsdim: self.hsdim }
    }

    pub fn frobenius(&self) -> f64 {
        linalg::frobenius(&self.mat)
    }

    /// `max |⟨⟨1|L|`; zero for trace-annihilating generators.
    pub fn trace_annihilation_defect(&self) -> f64 {
        let d = self.hsdim;
        let n = d * d;
        (0..n)
            .map(|col| (0..d).map(|k| self.mat[(k * d + k, col)]).sum::<C64>().norm())
            .fold(0.0, f64::max)
    }

    /// `max |⟨⟨1|V − ⟨⟨1||`; zero for trace-preserving channels.
    pub fn trace_preservation_defect(&self) -> f64 {
        let d = self.hsdim;
        let n = d * d;
        (0..n)
            .map(|col| {
                let s: C64 = (0..d).map(|k| self.mat[(k * d + k, col)]).sum();
                let target = if col % (d + 1) == 0 { ONE } else { ZERO };
                (s - target).norm()
            })
            .fold(0.0, f64::max)
    }

    /// Choi matrix `J = Σ_{kl} |k⟩⟨l| ⊗ S(|k⟩⟨l|)`.
    pub fn choi(&self) -> CMat {
        let d = self.hsdim;
        // J[(k, i), (l, j)] = S[(i, j), (k, l)]
        Mat::from_fn(d * d, d * d, |r, c| {
            let (k, i) = (r / d, r % d);
            let (l, j) = (c / d, c % d);
            self.mat[(i * d + j, k * d + l)]
        })
    }

    pub fn choi_min_eigenvalue(&self) -> Result<f64> {
        Ok(linalg::hermitian_eigenvalues(&self.choi())?[0])
    }

    /// Hermiticity-preservation defect `max |J − J†|` of the Choi matrix.
    pub fn choi_hermitian_defect(&self) -> f64 {
        let j = self.choi();
        linalg::max_abs_diff(&j, &linalg::adjoint(&j))
    }

    /// Check trace preservation and complete positivity.
    pub fn require_cptp(&self, tp_tol: f64, cp_tol: f64) -> Result<()> {
        let tp = self.trace_preservation_defect();
        if tp > tp_tol {
            return Err(Error::NotTracePreserving(tp));
        }
        let min = self.choi_min_eigenvalue()?;
        if min < -cp_tol {
            return Err(Error::NotCompletelyPositive(min));
        }
        Ok(())
    }
}

/// Lindbladian matrix of `H` and jump operators `(Aₖ, γₖ)`.
pub fn lindbladian_matrix(h: &DenseOperator, jumps: &[(DenseOperator, f64)]) -> Result<SuperOp> {
    h.require_hermitian(HERMITIAN_TOL)?;
    let d = h.dim();
    let mut l = SuperOp::hamiltonian(h);
    for (a, gamma) in jumps {
        if *gamma < 0.0 {
            return Err(Error::NegativeRate(*gamma));
        }
        if a.dim() != d {
            return Err(Error::Dimension(format!("jump operator dim {} vs H dim {d}", a.dim())));
        }
        l = l.add(&SuperOp::dissipator(a, *gamma));
    }
    Ok(l)
}

// ---------------------------------------------------------------------------
// Local embeddings
// ---------------------------------------------------------------------------

fn check_sites(sites: &[usize], n: usize) -> Result<()> {
    for (k, s) in sites.iter().enumerate() {
        if *s >= n {
            return Err(Error::BadSites(format!("site {s} out of range for {n} qubits")));
        }
        if sites[..k].contains(s) {
            return Err(Error::BadSites(format!("site {s} repeated")));
        }
    }
    Ok(())
}

/// Bit position of `site` in a full index (site 0 is the most significant bit).
#[inline]
fn bit_of(site: usize, n: usize) -> usize {
    n - 1 - site
}

/// Local index of full basis index `i` for the given sites (slot 0 most significant).
#[inline]
fn local_index(i: usize, sites: &[usize], n: usize) -> usize {
    sites.iter().fold(0, |acc, &s| (acc << 1) | ((i >> bit_of(s, n)) & 1))
}

/// Full-index offset of local index `a`.
fn local_offset(a: usize, sites: &[usize], n: usize) -> usize {
    let k = sites.len();
    sites
        .iter()
        .enumerate()
        .fold(0, |acc, (slot, &s)| acc | (((a >> (k - 1 - slot)) & 1) << bit_of(s, n)))
}

fn site_mask(sites: &[usize], n: usize) -> usize {
    sites.iter().fold(0, |acc, &s| acc | (1 << bit_of(s, n)))
}

/// Tensor `a` on `sites` (slot order as given) with identity elsewhere.
pub fn embed_local(a: &DenseOperator, sites: &[usize], lattice: &QubitLattice) -> Result<DenseOperator> {
    embed_local_n(a, sites, lattice.n_sites())
}

pub fn embed_local_n(a: &DenseOperator, sites: &[usize], n: usize) -> Result<DenseOperator> {
    check_sites(sites, n)?;
    if a.dim() != 1 << sites.len() {
        return Err(Error::Dimension(format!(
            "operator of dim {} cannot act on {} sites",
            a.dim(),
            sites.len()
        )));
    }
    let d = 1usize << n;
    let mask = site_mask(sites, n);
    let mat = Mat::from_fn(d, d, |i, j| {
        if (i & !mask) != (j & !mask) {
            ZERO
        } else {
            a.mat[(local_index(i, sites, n), local_index(j, sites, n))]
        }
    });
    Ok(DenseOperator { mat })
}

/// Dense full-space embedding of a local superoperator (oracle route; small `n` only).
pub fn embed_superop(s: &SuperOp, sites: &[usize], n: usize) -> Result<SuperOp> {
    check_sites(sites, n)?;
    let k = sites.len();
    if s.hsdim != 1 << k {
        return Err(Error::Dimension(format!("superop on d={} cannot act on {k} sites", s.hsdim)));
    }
    if n > 6 {
        return Err(Error::TooLarge(format!("{n} qubits")));
    }
    let d = 1usize << n;
    let dl = 1usize << k;
    let mask = site_mask(sites, n);
    // S_full[(i,j),(i',j')] = S[(a,b),(a',b')] if rest(i)=rest(i') and rest(j)=rest(j')
    let mat = Mat::from_fn(d * d, d * d, |r, c| {
        let (i, j) = (r / d, r % d);
        let (ip, jp) = (c / d, c % d);
        if (i & !mask) != (ip & !mask) || (j & !mask) != (jp & !mask) {
            return ZERO;
        }
        let (a, b) = (local_index(i, sites, n), local_index(j, sites, n));
        let (ap, bp) = (local_index(ip, sites, n), local_index(jp, sites, n));
        s.mat[(a * dl + b, ap * dl + bp)]
    });
    Ok(SuperOp { mat, hsdim: d })
}

// ---------------------------------------------------------------------------
// Local channel kernel
// ---------------------------------------------------------------------------

/// Row-major `d × d` buffer holding a full-lattice operator.
#[derive(Debug, Clone, PartialEq)]
pub struct StateBuffer {
    dim: usize,
    data: Vec<C64>,
}

impl StateBuffer {
    pub fn from_operator(op: &DenseOperator) -> Self {
        let d = op.dim();
        let mut data = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                data.push(op.mat[(i, j)]);
            }
        }
        Self { dim: d, data }
    }

    pub fn to_operator(&self) -> DenseOperator {
        let d = self.dim;
        DenseOperator { mat: Mat::from_fn(d, d, |i, j| self.data[i * d + j]) }
    }

    pub fn to_density(&self) -> DensityMatrix {
        DensityMatrix::new_unchecked(self.to_operator())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }
}

/// A channel on `k ≤ 2` sites prepared for repeated application to full-lattice
/// states without forming the `4ⁿ × 4ⁿ` embedding.
#[derive(Debug, Clone)]
pub struct LocalChannel {
    n: usize,
    sites: Vec<usize>,
    /// `4^k × 4^k` local superoperator, row-major.
    local: Vec<C64>,
    dl: usize,
    /// Local index of every full basis index.
    local_of: Vec<usize>,
    /// Full index with the local bits cleared.
    rest_of: Vec<usize>,
    /// Full-index offset of every local index.
    offsets: Vec<usize>,
}

impl LocalChannel {
    pub fn new(channel: &SuperOp, sites: &[usize], n_qubits: usize) -> Result<Self> {
        check_sites(sites, n_qubits)?;
        let k = sites.len();
        if k == 0 || k > 2 {
            return Err(Error::InvalidArgument(format!("local channels act on 1 or 2 sites, got {k}")));
        }
        if channel.hsdim != 1 << k {
            return Err(Error::Dimension(format!(
                "channel of d={} cannot act on {k} sites",
                channel.hsdim
            )));
        }
        let dl = 1usize << k;
        let nl = dl * dl;
        let mut local = Vec::with_capacity(nl * nl);
        for r in 0..nl {
            for c in 0..nl {
                local.push(channel.mat[(r, c)]);
            }
        }
        let d = 1usize << n_qubits;
        let mask = site_mask(sites, n_qubits);
        let local_of = (0..d).map(|i| local_index(i, sites, n_qubits)).collect();
        let rest_of = (0..d).map(|i| i & !mask).collect();
        let offsets = (0..dl).map(|a| local_offset(a, sites, n_qubits)).collect();
        Ok(Self { n: n_qubits, sites: sites.to_vec(), local, dl, local_of, rest_of, offsets })
    }

    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn n_qubits(&self) -> usize {
        self.n
    }

    /// `dst = channel(src)`; both are row-major `2ⁿ × 2ⁿ` buffers.
    pub fn apply_into(&self, src: &[C64], dst: &mut [C64], exec: Exec) {
        let d = 1usize << self.n;
        debug_assert_eq!(src.len(), d * d);
        debug_assert_eq!(dst.len(), d * d);
        let dl = self.dl;
        let nl = dl * dl;
        let exec = if d >= 64 { exec } else { Exec::Sequential };
        par::for_each_chunk_mut(dst, d, exec, |i, row| {
            let a = self.local_of[i];
            let base_i = self.rest_of[i];
            for (j, out) in row.iter_mut().enumerate() {
                let b = self.local_of[j];
                let base_j = self.rest_of[j];
                let coeffs = &self.local[(a * dl + b) * nl..(a * dl + b + 1) * nl];
                let mut acc = ZERO;
                for ap in 0..dl {
                    let src_row = (base_i + self.offsets[ap]) * d + base_j;
                    let crow = &coeffs[ap * dl..(ap + 1) * dl];
                    for (bp, c) in crow.iter().enumerate() {
                        acc += c * src[src_row + self.offsets[bp]];
                    }
                }
                *out = acc;
            }
        });
    }

    /// Apply in place using `scratch` as the second buffer.
    pub fn apply(&self, state: &mut StateBuffer, scratch: &mut Vec<C64>, exec: Exec) {
        scratch.resize(state.data.len(), ZERO);
        self.apply_into(&state.data, scratch, exec);
        std::mem::swap(&mut state.data, scratch);
    }
}

/// Apply a CPTP channel on `sites` of the lattice to `rho`.
pub fn apply_local_channel(
    rho: &DensityMatrix,
    channel: &SuperOp,
    sites: &[usize],
    lattice: &QubitLattice,
) -> Result<DensityMatrix> {
    let tp = channel.trace_preservation_defect();
    if tp > TRACE_PRESERVATION_TOL {
        return Err(Error::NotTracePreserving(tp));
    }
    if rho.dim() != lattice.dim() {
        return Err(Error::Dimension(format!("state dim {} vs lattice dim {}", rho.dim(), lattice.dim())));
    }
    let kernel = LocalChannel::new(channel, sites, lattice.n_sites())?;
    let mut state = StateBuffer::from_operator(rho.op());
    let mut scratch = Vec::new();
    kernel.apply(&mut state, &mut scratch, Exec::Parallel);
    Ok(state.to_density())
}

// ---------------------------------------------------------------------------
// Reductions and random channels
// ---------------------------------------------------------------------------

/// Partial trace keeping `keep` (slot order as given) of an `n`-qubit operator.
pub fn partial_trace(op: &DenseOperator, keep: &[usize], n: usize) -> Result<DenseOperator> {
    check_sites(keep, n)?;
    if op.dim() != 1 << n {
        return Err(Error::Dimension(format!("operator dim {} vs {n} qubits", op.dim())));
    }
    let dk = 1usize << keep.len();
    let mask = site_mask(keep, n);
    let d = 1usize << n;
    let mut out = linalg::zeros(dk, dk);
    for i in 0..d {
        for j in 0..d {
            if (i & !mask) == (j & !mask) {
                let (a, b) = (local_index(i, keep, n), local_index(j, keep, n));
                out[(a, b)] += op.mat[(i, j)];
            }
        }
    }
    Ok(DenseOperator { mat: out })
}

/// Reduce a two-site superoperator to the map `X ↦ Tr_other[S(X ⊗ σ)]` on slot
/// `keep` (0 or 1), with `partner` the state of the traced slot.
pub fn reduce_two_site(s: &SuperOp, keep: usize, partner: &DenseOperator) -> Result<SuperOp> {
    if s.hsdim != 4 || partner.dim() != 2 || keep > 1 {
        return Err(Error::Dimension("two-site reduction needs a 16x16 superop and a qubit partner".into()));
    }
    let mut out = linalg::zeros(4, 4);
    for a in 0..2 {
        for b in 0..2 {
            let e = DenseOperator { mat: Mat::from_fn(2, 2, |i, j| if (i, j) == (a, b) { ONE } else { ZERO }) };
            let joint = if keep == 0 { e.kron(partner) } else { partner.kron(&e) };
            let img = s.apply(&joint);
            let red = partial_trace(&img, &[keep], 2)?;
            for i in 0..2 {
                for j in 0..2 {
                    out[(i * 2 + j, a * 2 + b)] = red.mat[(i, j)];
                }
            }
        }
    }
    SuperOp::new(out, 2)
}

/// Random CPTP channel on `k` qubits from `n_kraus` normalised Ginibre Kraus operators.
pub fn random_channel<R: Rng + ?Sized>(k: usize, n_kraus: usize, rng: &mut R) -> Result<SuperOp> {
    let d = 1usize << k;
    let ks: Vec<CMat> = (0..n_kraus.max(1)).map(|_| random_ginibre(d, d, rng)).collect();
    let mut s = linalg::zeros(d, d);
    for g in &ks {
        s += linalg::adjoint(g) * g;
    }
    let (vals, vecs) = linalg::eigh(&s)?;
    let inv_sqrt = Mat::from_fn(d, d, |i, j| if i == j { C64::from(1.0 / vals[i].sqrt()) } else { ZERO });
    let norm = &vecs * inv_sqrt * linalg::adjoint(&vecs);
    let mut out = SuperOp::zeros(d);
    for g in &ks {
        let kop = DenseOperator { mat: g * &norm };
        out = out.add(&SuperOp::conjugation(&kop));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::{sigma_minus, Pauli};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn op(p: Pauli) -> DenseOperator {
        p.into()
    }

    #[test]
    fn vectorize_identity_row_stacking() {
        let v = vectorize(&DenseOperator::identity(2));
        assert_eq!(v.as_slice(), &[ONE, ZERO, ZERO, ONE]);
    }

    #[test]
    fn pauli_inner_products() {
        assert!((hs_inner(&op(Pauli::Z), &op(Pauli::Z)) - C64::from(2.0)).norm() < 1e-15);
        assert!(hs_inner(&op(Pauli::X), &op(Pauli::Y)).norm() < 1e-15);
    }

    #[test]
    fn devectorize_rejects_non_square_length() {
        assert!(devectorize(&HSVector::new(vec![ONE; 5])).is_err());
    }

    #[test]
    fn sandwich_matches_row_stacking_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DenseOperator::new(random_ginibre(3, 3, &mut rng)).unwrap();
        let b = DenseOperator::new(random_ginibre(3, 3, &mut rng)).unwrap();
        let x = DenseOperator::new(random_ginibre(3, 3, &mut rng)).unwrap();
        let direct = a.matmul(&x).matmul(&b);
        let via = SuperOp::sandwich(&a, &b).apply(&x);
        assert!(linalg::max_abs_diff(direct.mat(), via.mat()) < 1e-12);
    }

    #[test]
    fn lindbladian_rejects_bad_input() {
        let h = DenseOperator::new(Pauli::Y.matrix() * Pauli::X.matrix()).unwrap();
        assert!(matches!(lindbladian_matrix(&h, &[]), Err(Error::NotHermitian(_))));
        let h = op(Pauli::Z);
        let a = DenseOperator::new(sigma_minus()).unwrap();
        assert!(matches!(lindbladian_matrix(&h, &[(a, -1.0)]), Err(Error::NegativeRate(_))));
    }

    #[test]
    fn empty_lindbladian_is_zero() {
        let l = lindbladian_matrix(&DenseOperator::zeros(2), &[]).unwrap();
        assert_eq!(linalg::max_abs(l.mat()), 0.0);
    }

    #[test]
    fn embed_examples() {
        let lat = QubitLattice::chain(2).unwrap();
        let e = embed_local(&op(Pauli::Z), &[0], &lat).unwrap();
        let expect = linalg::kron(&Pauli::Z.matrix(), &linalg::identity(2));
        assert!(linalg::max_abs_diff(e.mat(), &expect) < 1e-15);

        let lat3 = QubitLattice::chain(3).unwrap();
        let id = embed_local(&DenseOperator::identity(2), &[2], &lat3).unwrap();
        assert!(linalg::max_abs_diff(id.mat(), &linalg::identity(8)) < 1e-15);

        let x1 = embed_local(&op(Pauli::X), &[1], &lat3).unwrap();
        assert!((x1.trace_product(&x1) - C64::from(8.0)).norm() < 1e-12);
    }

    #[test]
    fn embed_rejects_bad_sites() {
        let lat = QubitLattice::chain(2).unwrap();
        let zz = op(Pauli::Z).kron(&op(Pauli::Z));
        assert!(matches!(embed_local(&zz, &[1, 1], &lat), Err(Error::BadSites(_))));
        assert!(matches!(embed_local(&op(Pauli::Z), &[2], &lat), Err(Error::BadSites(_))));
    }

    #[test]
    fn embed_respects_slot_order() {
        // X on slot 0, Z on slot 1, placed on sites (2, 0) of 3 qubits = Z ⊗ 1 ⊗ X
        let xz = op(Pauli::X).kron(&op(Pauli::Z));
        let e = embed_local_n(&xz, &[2, 0], 3).unwrap();
        let expect = op(Pauli::Z).kron(&DenseOperator::identity(2)).kron(&op(Pauli::X));
        assert!(linalg::max_abs_diff(e.mat(), expect.mat()) < 1e-15);
    }

    #[test]
    fn identity_channel_leaves_state() {
        let lat = QubitLattice::chain(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = DensityMatrix::random(8, &mut rng);
        let out = apply_local_channel(&rho, &SuperOp::identity(4), &[0, 2], &lat).unwrap();
        assert!(linalg::max_abs_diff(out.mat(), rho.mat()) < 1e-14);
    }

    #[test]
    fn apply_local_rejects_non_tp_channel() {
        let lat = QubitLattice::chain(2).unwrap();
        let rho = DensityMatrix::all_down(2);
        let bad = SuperOp::identity(2).scaled(0.5);
        assert!(matches!(
            apply_local_channel(&rho, &bad, &[0], &lat),
            Err(Error::NotTracePreserving(_))
        ));
    }

    #[test]
    fn partial_trace_of_product() {
        let a = DensityMatrix::basis_state(2, 1);
        let b = DensityMatrix::maximally_mixed(2);
        let ab = a.op().kron(b.op());
        let ra = partial_trace(&ab, &[0], 2).unwrap();
        assert!(linalg::max_abs_diff(ra.mat(), a.mat()) < 1e-15);
        let rb = partial_trace(&ab, &[1], 2).unwrap();
        assert!(linalg::max_abs_diff(rb.mat(), b.mat()) < 1e-15);
    }

    #[test]
    fn random_channel_is_cptp() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c = random_channel(2, 3, &mut rng).unwrap();
        c.require_cptp(1e-12, 1e-12).unwrap();
    }
}
