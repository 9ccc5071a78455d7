// SPDX-License-Identifier: Apache-2.0

//! Effective Lindbladian of one noisy Trotter step by the Magnus expansion.
//!
//! With gate generators `𝒢ⱼ = 𝒢ⱼⁱᵈ + r𝓔ⱼ` applied in schedule order, the step
//! is `e^{𝒢_N τ} ⋯ e^{𝒢_1 τ} = exp(Ω₁ + Ω₂ + Ω₃ + Ω₄ + ⋯)` where
//!
//! ```text
//! Ω₁ = τ Σⱼ 𝒢ⱼ
//! Ω₂ = τ²/2  Σ_{j₁≥j₂}       M⁻¹ [𝒢_{j₁}, 𝒢_{j₂}]
//! Ω₃ = τ³/6  Σ_{j₁≥j₂≥j₃}    M⁻¹ ([𝒢_{j₁},[𝒢_{j₂},𝒢_{j₃}]] + [𝒢_{j₃},[𝒢_{j₂},𝒢_{j₁}]])
//! Ω₄ = τ⁴/12 Σ_{j₁≥…≥j₄}     M⁻¹ ([[[𝒢₁,𝒢₂],𝒢₃],𝒢₄] + [𝒢₁,[[𝒢₂,𝒢₃],𝒢₄]]
//!                                + [𝒢₁,[𝒢₂,[𝒢₃,𝒢₄]]] + [𝒢₂,[𝒢₃,[𝒢₄,𝒢₁]]])
//! ```
//!
//! and `M(j₁, j₂, …) = Π mₗ!` over index occupation numbers. Each slot is
//! expanded multilinearly in `𝒢ⁱᵈ` and `r𝓔`; a term from `Ωₙ` with `k` noise
//! slots has degree `n − 1 + k` in `(τ, r)` and lands in `L_eff⁽ⁿ⁻¹⁺ᵏ⁾`.

use crate::error::{Error, Result};
use crate::hs::{embed_superop, reduce_two_site, DenseOperator, SuperOp};
use crate::linalg::{self, CMat};
use crate::noise::{Granularity, NoiseModel};
use crate::par::{self, Exec};
use crate::pauli::Pauli;
use crate::xyz::{decay_generator, ModelSpec, EXACT_MAX_QUBITS};
use crate::C64;

pub const MAX_ORDER: usize = 3;

#[derive(Debug, Clone)]
pub struct MagnusResult {
    /// `L_eff⁽⁰⁾ … L_eff⁽ᵏ⁾`.
    pub terms: Vec<SuperOp>,
    pub tau: f64,
    pub r: f64,
}

impl MagnusResult {
    pub fn order(&self) -> usize {
        self.terms.len() - 1
    }

    /// `Σ₀ᵏ L_eff⁽ⁿ⁾`.
    pub fn partial_sum(&self, k: usize) -> SuperOp {
        let mut it = self.terms.iter().take(k + 1);
        let first = it.next().expect("at least order 0").clone();
        it.fold(first, |acc, t| acc.add(t))
    }

    pub fn total(&self) -> SuperOp {
        self.partial_sum(self.order())
    }
}

/// A generator piece on the full space with the bitmask of sites it touches.
#[derive(Debug, Clone)]
struct Piece {
    mask: u64,
    mat: CMat,
}

/// Operand of a nested commutator; `None` is an exact zero.
type Operand = Option<Piece>;

fn bracket(a: &Operand, b: &Operand) -> Operand {
    match (a, b) {
        (Some(a), Some(b)) if a.mask & b.mask != 0 => Some(Piece {
            mask: a.mask | b.mask,
            mat: linalg::commutator(&a.mat, &b.mat),
        }),
        _ => None,
    }
}

fn multiplicity(js: &[usize]) -> f64 {
    // indices arrive in non-increasing order, so equal values are adjacent
    let mut m = 1.0;
    let mut run = 1;
    for w in js.windows(2) {
        if w[0] == w[1] {
            run += 1;
            m *= run as f64;
        } else {
            run = 1;
        }
    }
    m
}

fn nested(x: &[&Operand]) -> Vec<Operand> {
    match x.len() {
        1 => vec![x[0].clone()],
        2 => vec![bracket(x[0], x[1])],
        3 => vec![
            bracket(x[0], &bracket(x[1], x[2])),
            bracket(x[2], &bracket(x[1], x[0])),
        ],
        4 => vec![
            bracket(&bracket(&bracket(x[0], x[1]), x[2]), x[3]),
            bracket(x[0], &bracket(&bracket(x[1], x[2]), x[3])),
            bracket(x[0], &bracket(x[1], &bracket(x[2], x[3]))),
            bracket(x[1], &bracket(x[2], &bracket(x[3], x[0]))),
        ],
        _ => unreachable!("Magnus terms stop at four generators"),
    }
}

const OMEGA_COEFF: [f64; 5] = [0.0, 1.0, 0.5, 1.0 / 6.0, 1.0 / 12.0];

/// Magnus terms on already-embedded operators.
///
/// `ideal[j]` and `noise[j]` act on the full space; `masks[j]` lists the
/// sites gate `j` touches.
#[allow(clippy::too_many_arguments)]
fn magnus_terms(
    ideal: &[CMat],
    noise: &[Option<CMat>],
    masks: &[u64],
    hsdim: usize,
    tau: f64,
    r: f64,
    order: usize,
    exec: Exec,
) -> Result<MagnusResult> {
    if order > MAX_ORDER {
        return Err(Error::InvalidArgument(format!("Magnus order {order} > {MAX_ORDER}")));
    }
    let n_gates = ideal.len();
    let dim = hsdim * hsdim;
    let gid: Vec<Operand> = ideal.iter().zip(masks).map(|(m, &mask)| Some(Piece { mask, mat: m.clone() })).collect();
    let gnoise: Vec<Operand> = noise
        .iter()
        .zip(masks)
        .map(|(m, &mask)| m.as_ref().map(|m| Piece { mask, mat: m.clone() }))
        .collect();

    // terms[d] accumulates L_eff^(d); the outer index j₁ is distributed.
    let partials = par::map_range(n_gates, exec, |j1| {
        let mut acc: Vec<CMat> = (0..=order).map(|_| linalg::zeros(dim, dim)).collect();
        let mut js = vec![j1];
        accumulate(&mut js, order, &gid, &gnoise, tau, r, &mut acc);
        acc
    });
    let mut terms: Vec<CMat> = (0..=order).map(|_| linalg::zeros(dim, dim)).collect();
    for p in partials {
        for (t, x) in terms.iter_mut().zip(p) {
            *t += x;
        }
    }
    let terms = terms.into_iter().map(|m| SuperOp::new(m, hsdim)).collect::<Result<Vec<_>>>()?;
    Ok(MagnusResult { terms, tau, r })
}

/// Visit every non-increasing index tuple starting with `js`, up to length `order + 1`.
fn accumulate(
    js: &mut Vec<usize>,
    order: usize,
    gid: &[Operand],
    gnoise: &[Operand],
    tau: f64,
    r: f64,
    acc: &mut [CMat],
) {
    let n = js.len();
    add_tuple(js, order, gid, gnoise, tau, r, acc);
    if n > order {
        return;
    }
    let last = *js.last().expect("non-empty");
    for j in 0..=last {
        js.push(j);
        accumulate(js, order, gid, gnoise, tau, r, acc);
        js.pop();
    }
}

fn add_tuple(
    js: &[usize],
    order: usize,
    gid: &[Operand],
    gnoise: &[Operand],
    tau: f64,
    r: f64,
    acc: &mut [CMat],
) {
    let n = js.len();
    let m = multiplicity(js);
    // every subset of slots carrying the noise generator
    for subset in 0u32..(1 << n) {
        let k = subset.count_ones() as usize;
        let degree = n - 1 + k;
        if degree > order {
            continue;
        }
        let slots: Vec<&Operand> = js
            .iter()
            .enumerate()
            .map(|(slot, &j)| if subset & (1 << slot) != 0 { &gnoise[j] } else { &gid[j] })
            .collect();
        if slots.iter().any(|s| s.is_none()) {
            continue;
        }
        let coeff = OMEGA_COEFF[n] * tau.powi(n as i32 - 1) * r.powi(k as i32) / m;
        for piece in nested(&slots).into_iter().flatten() {
            acc[degree] += linalg::scale(&piece.mat, C64::from(coeff));
        }
    }
}

fn mask_of(sites: &[usize]) -> u64 {
    sites.iter().fold(0, |m, s| m | (1u64 << s))
}

/// Magnus terms `L_eff⁽⁰⁾ … L_eff⁽ᵒʳᵈᵉʳ⁾` of the schedule on `n_qubits ≤ 5`.
pub fn magnus_effective(
    gates: &[crate::xyz::GateGenerator],
    n_qubits: usize,
    tau: f64,
    r: f64,
    order: usize,
) -> Result<MagnusResult> {
    if n_qubits > EXACT_MAX_QUBITS {
        return Err(Error::TooLarge(format!("{n_qubits} qubits")));
    }
    let ideal = gates
        .iter()
        .map(|g| Ok(embed_superop(&g.ideal, &g.sites, n_qubits)?.into_mat()))
        .collect::<Result<Vec<_>>>()?;
    let noise = gates
        .iter()
        .map(|g| g.noise.as_ref().map(|e| Ok(embed_superop(e, &g.sites, n_qubits)?.into_mat())).transpose())
        .collect::<Result<Vec<_>>>()?;
    let masks: Vec<u64> = gates.iter().map(|g| mask_of(&g.sites)).collect();
    magnus_terms(&ideal, &noise, &masks, 1 << n_qubits, tau, r, order, Exec::Parallel)
}

/// Magnus terms of an arbitrary sequence of generators on a common space,
/// treated as mutually non-commuting.
pub fn magnus_of_sequence(
    ideal: &[SuperOp],
    noise: &[Option<SuperOp>],
    tau: f64,
    r: f64,
    order: usize,
) -> Result<MagnusResult> {
    if ideal.len() != noise.len() || ideal.is_empty() {
        return Err(Error::Dimension("ideal and noise lists must be equal and non-empty".into()));
    }
    let hsdim = ideal[0].hsdim();
    let ideal_m: Vec<CMat> = ideal.iter().map(|s| s.mat().clone()).collect();
    let noise_m: Vec<Option<CMat>> = noise.iter().map(|s| s.as_ref().map(|s| s.mat().clone())).collect();
    let masks = vec![1u64; ideal.len()];
    magnus_terms(&ideal_m, &noise_m, &masks, hsdim, tau, r, order, Exec::Sequential)
}

/// Exact step product `Πⱼ e^{𝒢ⱼτ}` (later gates on the left) on the full space.
pub fn step_product(gates: &[crate::xyz::GateGenerator], n_qubits: usize, tau: f64, r: f64) -> Result<SuperOp> {
    if n_qubits > EXACT_MAX_QUBITS {
        return Err(Error::TooLarge(format!("{n_qubits} qubits")));
    }
    gates.iter().try_fold(SuperOp::identity(1 << n_qubits), |acc, g| {
        let e = embed_superop(&g.generator(r), &g.sites, n_qubits)?.exp(tau);
        Ok(e.compose(&acc))
    })
}

/// `log(Πⱼ e^{𝒢ⱼτ}) / τ`, the brute-force effective generator.
pub fn exact_effective(gates: &[crate::xyz::GateGenerator], n_qubits: usize, tau: f64, r: f64) -> Result<SuperOp> {
    let p = step_product(gates, n_qubits, tau, r)?;
    let log = linalg::logm(p.mat())?;
    SuperOp::new(linalg::scale(&log, C64::from(1.0 / tau)), 1 << n_qubits)
}

// ---------------------------------------------------------------------------
// Single-site mean-field reduction
// ---------------------------------------------------------------------------

/// Single-site superoperator affine in the mean field: `A₀ + Σ_β s_β A_β`.
#[derive(Debug, Clone)]
pub struct AffineSuperOp {
    pub parts: [SuperOp; 4],
}

impl AffineSuperOp {
    pub fn constant(s: SuperOp) -> Self {
        Self { parts: [s, SuperOp::zeros(2), SuperOp::zeros(2), SuperOp::zeros(2)] }
    }

    /// Reduce a two-site generator to the slot `keep`, the partner being `ρ(s) = (𝟙 + s·σ)/2`.
    pub fn from_two_site(s: &SuperOp, keep: usize) -> Result<Self> {
        let parts = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z]
            .map(|p| reduce_two_site(s, keep, &DenseOperator::from(p).scaled(C64::from(0.5))));
        let [a, b, c, d] = parts;
        Ok(Self { parts: [a?, b?, c?, d?] })
    }

    pub fn at(&self, s: [f64; 3]) -> SuperOp {
        self.parts[1..]
            .iter()
            .zip(s)
            .fold(self.parts[0].clone(), |acc, (p, x)| acc.add(&p.scaled(x)))
    }

    pub fn add(&self, other: &AffineSuperOp) -> AffineSuperOp {
        let mut parts = self.parts.clone();
        for (p, q) in parts.iter_mut().zip(&other.parts) {
            *p = p.add(q);
        }
        AffineSuperOp { parts }
    }

    pub fn scaled(&self, x: f64) -> AffineSuperOp {
        AffineSuperOp { parts: self.parts.clone().map(|p| p.scaled(x)) }
    }
}

/// One gate of the single-site mean-field schedule.
#[derive(Debug, Clone)]
pub struct MeanFieldGate {
    pub ideal: AffineSuperOp,
    pub noise: Option<AffineSuperOp>,
}

/// Coordination number of the square lattice.
pub const COORDINATION: usize = 4;

/// Single-site gate list: for each of the `z` bonds of a site (column bonds
/// as upper then lower partner, then row bonds likewise) the three axis
/// generators with noise attached per the model's granularity, then the
/// dissipator.
pub fn mean_field_gates(spec: &ModelSpec, noise: &NoiseModel) -> Result<Vec<MeanFieldGate>> {
    spec.validate()?;
    let two = noise.generator(2)?;
    let one = noise.generator(1)?;
    let mut out = Vec::new();
    for _group in 0..2 {
        for keep in 0..2 {
            for axis in [Pauli::X, Pauli::Y, Pauli::Z] {
                let m = linalg::kron(&axis.matrix(), &axis.matrix());
                let h = DenseOperator::new(linalg::scale(&m, C64::from(spec.coupling(axis))))?;
                let attach = match noise.granularity {
                    Granularity::PerAxis => true,
                    Granularity::PerBond => axis == Pauli::Z,
                };
                let e = match (&two, attach) {
                    (Some(e), true) => Some(AffineSuperOp::from_two_site(e, keep)?),
                    _ => None,
                };
                out.push(MeanFieldGate { ideal: AffineSuperOp::from_two_site(&SuperOp::hamiltonian(&h), keep)?, noise: e });
            }
        }
    }
    out.push(MeanFieldGate {
        ideal: AffineSuperOp::constant(decay_generator(spec.gamma)),
        noise: one.map(AffineSuperOp::constant),
    });
    Ok(out)
}

/// First-order single-site generator `Σ (𝒢ⁱᵈ + r𝓔)` as an affine map in `s`.
pub fn mean_field_first_order(gates: &[MeanFieldGate], r: f64) -> AffineSuperOp {
    gates.iter().fold(AffineSuperOp::constant(SuperOp::zeros(2)), |acc, g| {
        let acc = acc.add(&g.ideal);
        match &g.noise {
            Some(e) => acc.add(&e.scaled(r)),
            None => acc,
        }
    })
}

/// Single-site effective generator at mean field `s` through Magnus order `order`.
pub fn mean_field_effective(gates: &[MeanFieldGate], s: [f64; 3], tau: f64, r: f64, order: usize) -> Result<SuperOp> {
    let ideal: Vec<SuperOp> = gates.iter().map(|g| g.ideal.at(s)).collect();
    let noise: Vec<Option<SuperOp>> = gates.iter().map(|g| g.noise.as_ref().map(|e| e.at(s))).collect();
    Ok(magnus_of_sequence(&ideal, &noise, tau, r, order)?.total())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn multiplicity_counts_runs() {
        assert_eq!(multiplicity(&[3, 2, 1]), 1.0);
        assert_eq!(multiplicity(&[2, 2, 1]), 2.0);
        assert_eq!(multiplicity(&[2, 2, 2, 0]), 6.0);
        assert_eq!(multiplicity(&[2, 2, 1, 1]), 4.0);
    }

    #[test]
    fn commuting_gates_have_no_corrections() {
        let z = SuperOp::hamiltonian(&Pauli::Z.into());
        let zz = z.scaled(0.3);
        let res = magnus_of_sequence(&[z.clone(), zz], &[None, None], 0.1, 0.0, 3).unwrap();
        assert!(linalg::max_abs_diff(res.terms[0].mat(), z.scaled(1.3).mat()) < 1e-14);
        for t in &res.terms[1..] {
            assert!(linalg::max_abs(t.mat()) < 1e-14);
        }
    }

    #[test]
    fn two_gate_first_order_formula() {
        let a = SuperOp::hamiltonian(&Pauli::X.into());
        let b = decay_generator(1.0);
        let e1 = crate::noise::depolarizing_generator(1).unwrap();
        let (tau, r) = (0.05, 0.02);
        let res = magnus_of_sequence(&[a.clone(), b.clone()], &[Some(e1.clone()), Some(e1.clone())], tau, r, 1).unwrap();
        let want = b.commutator(&a).scaled(tau / 2.0).add(&e1.scaled(2.0 * r));
        assert!(linalg::max_abs_diff(res.terms[1].mat(), want.mat()) < 1e-14);
    }

    #[test]
    fn order_one_term_scales_jointly() {
        let a = SuperOp::hamiltonian(&Pauli::X.into());
        let b = decay_generator(1.0);
        let e = Some(crate::noise::depolarizing_generator(1).unwrap());
        let r1 = magnus_of_sequence(&[a.clone(), b.clone()], &[e.clone(), e.clone()], 0.01, 0.02, 1).unwrap();
        let r2 = magnus_of_sequence(&[a, b], &[e.clone(), e], 0.02, 0.04, 1).unwrap();
        assert!(linalg::max_abs_diff(r1.terms[1].scaled(2.0).mat(), r2.terms[1].mat()) < 1e-14);
    }

    #[test]
    fn rejects_high_order() {
        let a = SuperOp::identity(2);
        assert!(magnus_of_sequence(&[a], &[None], 0.1, 0.0, 4).is_err());
    }
}
