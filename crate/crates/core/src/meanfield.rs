// SPDX-License-Identifier: Apache-2.0

//! Mean-field dynamics of the noisy dissipative XYZ model.
//!
//! The equations of motion come from the single-site effective generator
//! (bonds reduced against the mean field `ρ(s) = (𝟙 + s·σ)/2`) rather than from
//! hand-written formulas: `ṡ_α = Tr[σᵅ 𝓛(s) ρ(s)]`. At Magnus order one and
//! `τ = 0` the generator is affine in `s`, so the right-hand side is a
//! quadratic form evaluated from precomputed Pauli transfer matrices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hs::SuperOp;
use crate::linalg;
use crate::magnus::{mean_field_effective, mean_field_first_order, mean_field_gates, MeanFieldGate};
use crate::noise::{pauli_transfer_matrix, NoiseModel};
use crate::par::{self, Exec};
use crate::xyz::ModelSpec;

pub const EPS_PM: f64 = 1e-6;
pub const BLOCH_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanFieldState {
    pub s: [f64; 3],
}

impl MeanFieldState {
    pub fn new(sx: f64, sy: f64, sz: f64) -> Result<Self> {
        let st = Self { s: [sx, sy, sz] };
        if st.bloch_norm() > 1.0 + BLOCH_SLACK {
            return Err(Error::InvalidState(format!("Bloch vector norm {} > 1", st.bloch_norm())));
        }
        Ok(st)
    }

    pub fn sx(&self) -> f64 {
        self.s[0]
    }

    pub fn sy(&self) -> f64 {
        self.s[1]
    }

    pub fn sz(&self) -> f64 {
        self.s[2]
    }

    pub fn bloch_norm(&self) -> f64 {
        self.s.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Transverse magnitude `max(|sx|, |sy|)`.
    pub fn order(&self) -> f64 {
        self.s[0].abs().max(self.s[1].abs())
    }

    pub fn is_paramagnetic(&self) -> bool {
        self.order() < EPS_PM
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeanFieldConfig {
    /// Magnus order of the single-site generator.
    pub magnus_order: usize,
    /// Trotter step entering the Magnus terms; `0` keeps only `L₀ + rΣ𝓔`.
    pub tau: f64,
    pub t_max: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Integration stops once `‖ṡ‖` drops below this.
    pub rate_tol: f64,
}

impl Default for MeanFieldConfig {
    fn default() -> Self {
        Self { magnus_order: 1, tau: 0.0, t_max: 5000.0, rtol: 1e-10, atol: 1e-12, rate_tol: 1e-12 }
    }
}

type Ptm = [[f64; 4]; 4];

fn real_ptm(s: &SuperOp) -> Result<Ptm> {
    let r = pauli_transfer_matrix(s)?;
    let mut out = [[0.0; 4]; 4];
    for (a, row) in out.iter_mut().enumerate() {
        for (b, x) in row.iter_mut().enumerate() {
            *x = r[(a, b)].re;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
enum Rhs {
    /// `R(s) = P₀ + Σ_β s_β P_β`.
    Affine(Box<[Ptm; 4]>),
    Magnus { gates: Vec<MeanFieldGate>, tau: f64, r: f64, order: usize },
}

/// Mean-field equations of motion for fixed model, noise and strength `r`.
#[derive(Debug, Clone)]
pub struct MeanFieldSystem {
    rhs: Rhs,
    pub r: f64,
    pub z2_symmetric: bool,
}

impl MeanFieldSystem {
    pub fn new(spec: &ModelSpec, noise: &NoiseModel, r: f64, cfg: &MeanFieldConfig) -> Result<Self> {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::NegativeRate(r));
        }
        let gates = mean_field_gates(spec, noise)?;
        let rhs = if cfg.magnus_order == 1 && cfg.tau == 0.0 {
            let aff = mean_field_first_order(&gates, r);
            let [a, b, c, d] = &aff.parts;
            Rhs::Affine(Box::new([real_ptm(a)?, real_ptm(b)?, real_ptm(c)?, real_ptm(d)?]))
        } else {
            Rhs::Magnus { gates, tau: cfg.tau, r, order: cfg.magnus_order }
        };
        Ok(Self { rhs, r, z2_symmetric: noise.is_z2_symmetric() })
    }

    /// Single-site generator at mean field `s`.
    pub fn generator(&self, s: [f64; 3]) -> Result<Ptm> {
        match &self.rhs {
            Rhs::Affine(p) => {
                let mut out = p[0];
                for (beta, sb) in s.iter().enumerate() {
                    for a in 0..4 {
                        for b in 0..4 {
                            out[a][b] += sb * p[beta + 1][a][b];
                        }
                    }
                }
                Ok(out)
            }
            Rhs::Magnus { gates, tau, r, order } => real_ptm(&mean_field_effective(gates, s, *tau, *r, *order)?),
        }
    }

    /// `ṡ`.
    pub fn rhs(&self, s: [f64; 3]) -> [f64; 3] {
        let r = self.generator(s).expect("single-site generator is well formed");
        let v = [1.0, s[0], s[1], s[2]];
        let mut out = [0.0; 3];
        for (a, o) in out.iter_mut().enumerate() {
            *o = (0..4).map(|b| r[a + 1][b] * v[b]).sum();
        }
        out
    }

    /// Central-difference Jacobian of [`rhs`](Self::rhs).
    pub fn jacobian(&self, s: [f64; 3]) -> [[f64; 3]; 3] {
        let h = 1e-6;
        let mut j = [[0.0; 3]; 3];
        for c in 0..3 {
            let mut sp = s;
            let mut sm = s;
            sp[c] += h;
            sm[c] -= h;
            let (fp, fm) = (self.rhs(sp), self.rhs(sm));
            for a in 0..3 {
                j[a][c] = (fp[a] - fm[a]) / (2.0 * h);
            }
        }
        j
    }

    /// Largest real part of the Jacobian spectrum at `s`.
    pub fn stability_exponent(&self, s: [f64; 3]) -> Result<f64> {
        let j = self.jacobian(s);
        let m = faer::Mat::from_fn(3, 3, |a, b| crate::C64::from(j[a][b]));
        Ok(linalg::eigenvalues(&m)?.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max))
    }
}

fn norm3(v: [f64; 3]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy)]
pub struct Integration {
    pub state: [f64; 3],
    pub time: f64,
    pub rate: f64,
    pub max_norm: f64,
    pub steps: usize,
}

/// Dormand–Prince 5(4) integration until `‖ṡ‖ < rate_tol` or `t_max`.
pub fn integrate(sys: &MeanFieldSystem, s0: [f64; 3], cfg: &MeanFieldConfig) -> Integration {
    const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    let _ = C;
    let mut y = s0;
    let mut t = 0.0;
    let mut h: f64 = 1e-2;
    let mut f = sys.rhs(y);
    let mut max_norm = norm3(y);
    let mut steps = 0;
    while t < cfg.t_max && norm3(f) >= cfg.rate_tol {
        h = h.min(cfg.t_max - t);
        let mut k = [[0.0; 3]; 7];
        k[0] = f;
        for stage in 1..7 {
            let mut ys = y;
            for (prev, kp) in k.iter().enumerate().take(stage) {
                for c in 0..3 {
                    ys[c] += h * A[stage][prev] * kp[c];
                }
            }
            k[stage] = sys.rhs(ys);
        }
        let mut y5 = y;
        let mut err = 0.0f64;
        for c in 0..3 {
            let incr: f64 = (0..7).map(|i| B[i] * k[i][c]).sum();
            let e: f64 = (0..7).map(|i| E[i] * k[i][c]).sum();
            y5[c] += h * incr;
            let scale = cfg.atol + cfg.rtol * y[c].abs().max(y5[c].abs());
            err = err.max((h * e).abs() / scale);
        }
        if err <= 1.0 {
            t += h;
            y = y5;
            f = k[6];
            max_norm = max_norm.max(norm3(y));
            steps += 1;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h < 1e-14 {
            break;
        }
    }
    Integration { state: y, time: t, rate: norm3(f), max_norm, steps }
}

fn solve3(j: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(j);
    if d.abs() < 1e-300 {
        return None;
    }
    let mut x = [0.0; 3];
    for (c, xc) in x.iter_mut().enumerate() {
        let mut m = j;
        for r in 0..3 {
            m[r][c] = b[r];
        }
        *xc = det(m) / d;
    }
    Some(x)
}

/// Damped Newton refinement of a fixed point.
pub fn newton_polish(sys: &MeanFieldSystem, s0: [f64; 3]) -> [f64; 3] {
    let mut s = s0;
    let mut f = sys.rhs(s);
    for _ in 0..50 {
        let fn0 = norm3(f);
        if fn0 < 1e-14 {
            break;
        }
        let Some(dx) = solve3(sys.jacobian(s), f) else { break };
        let mut lambda = 1.0;
        let mut improved = false;
        while lambda > 1e-4 {
            let trial = [s[0] - lambda * dx[0], s[1] - lambda * dx[1], s[2] - lambda * dx[2]];
            let ft = sys.rhs(trial);
            if norm3(ft) < fn0 {
                s = trial;
                f = ft;
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if !improved {
            break;
        }
    }
    s
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SteadyPoint {
    pub state: MeanFieldState,
    pub stable: bool,
    pub converged: bool,
    /// `‖ṡ‖` at the reported state.
    pub residual: f64,
    pub max_norm: f64,
}

/// Default symmetry-broken seed.
pub const BROKEN_SEED: [f64; 3] = [1e-3, -3e-4, -0.99];
pub const SYMMETRIC_SEED: [f64; 3] = [0.0, 0.0, -0.99];

fn relax(sys: &MeanFieldSystem, seed: [f64; 3], cfg: &MeanFieldConfig) -> Result<SteadyPoint> {
    let run = integrate(sys, seed, cfg);
    let s = newton_polish(sys, run.state);
    let residual = norm3(sys.rhs(s));
    let converged = residual < 1e-9;
    let stable = converged && sys.stability_exponent(s)? < 1e-9;
    Ok(SteadyPoint {
        state: MeanFieldState { s },
        stable,
        converged,
        residual,
        max_norm: run.max_norm.max(norm3(s)),
    })
}

/// Stable fixed point reached from `seed`, falling back to the symmetric seed.
pub fn mf_steady_from(sys: &MeanFieldSystem, seed: [f64; 3], cfg: &MeanFieldConfig) -> Result<SteadyPoint> {
    let broken = relax(sys, seed, cfg)?;
    if broken.stable {
        return Ok(broken);
    }
    let sym = relax(sys, SYMMETRIC_SEED, cfg)?;
    if sym.stable {
        return Ok(sym);
    }
    if !broken.converged {
        log::debug!("mean-field: no fixed point from seed {seed:?}, residual {:.3e}", broken.residual);
    }
    Ok(broken)
}

pub fn mf_steady(spec: &ModelSpec, noise: &NoiseModel, r: f64, cfg: &MeanFieldConfig) -> Result<SteadyPoint> {
    let sys = MeanFieldSystem::new(spec, noise, r, cfg)?;
    mf_steady_from(&sys, BROKEN_SEED, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    G,
    R,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Paramagnetic,
    Ferromagnetic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhasePoint {
    pub param: f64,
    pub point: SteadyPoint,
    pub phase: Phase,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseCurve {
    pub axis: SweepAxis,
    /// Value of the other parameter, held fixed.
    pub fixed: f64,
    pub points: Vec<PhasePoint>,
}

impl PhaseCurve {
    pub fn params(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.param).collect()
    }

    /// `|⟨σˣ⟩|` along the curve.
    pub fn order_parameter(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.point.state.sx().abs()).collect()
    }

    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| !p.point.converged).count()
    }
}

/// Model and system for one grid point of a sweep.
pub fn system_at(
    axis: SweepAxis,
    param: f64,
    fixed: f64,
    base: &ModelSpec,
    noise: &NoiseModel,
    cfg: &MeanFieldConfig,
) -> Result<MeanFieldSystem> {
    let (g, r) = match axis {
        SweepAxis::G => (param, fixed),
        SweepAxis::R => (fixed, param),
    };
    let spec = ModelSpec::new(base.jx, base.jx + 2.0 * g * base.gamma, base.jz, base.gamma, base.lattice.clone())?;
    MeanFieldSystem::new(&spec, noise, r, cfg)
}

fn classify(p: &SteadyPoint) -> Phase {
    if p.state.is_paramagnetic() {
        Phase::Paramagnetic
    } else {
        Phase::Ferromagnetic
    }
}

/// Sweep one parameter with warm starts along a monotone grid. `base.jx`,
/// `base.jz` and `base.gamma` are kept; `Jy = Jx + 2gγ`.
pub fn sweep(
    axis: SweepAxis,
    grid: &[f64],
    fixed: f64,
    base: &ModelSpec,
    noise: &NoiseModel,
    cfg: &MeanFieldConfig,
) -> Result<PhaseCurve> {
    let increasing = grid.windows(2).all(|w| w[1] > w[0]);
    let decreasing = grid.windows(2).all(|w| w[1] < w[0]);
    if !(increasing || decreasing) {
        return Err(Error::InvalidArgument("sweep grid must be strictly monotone".into()));
    }
    let mut points = Vec::with_capacity(grid.len());
    let mut seed = BROKEN_SEED;
    for &param in grid {
        let sys = system_at(axis, param, fixed, base, noise, cfg)?;
        let mut p = mf_steady_from(&sys, seed, cfg)?;
        if seed != BROKEN_SEED && !p.stable {
            p = mf_steady_from(&sys, BROKEN_SEED, cfg)?;
        }
        if p.converged && !p.state.is_paramagnetic() {
            seed = p.state.s;
        } else {
            seed = BROKEN_SEED;
        }
        points.push(PhasePoint { param, phase: classify(&p), point: p });
    }
    Ok(PhaseCurve { axis, fixed, points })
}

/// Independent sweeps at several values of the fixed parameter.
pub fn sweep_many(
    axis: SweepAxis,
    grid: &[f64],
    fixed: &[f64],
    base: &ModelSpec,
    noise: &NoiseModel,
    cfg: &MeanFieldConfig,
    exec: Exec,
) -> Result<Vec<PhaseCurve>> {
    par::map(fixed, exec, |&f| sweep(axis, grid, f, base, noise, cfg)).into_iter().collect()
}

/// Whether the stable branch at `param` is ordered.
pub fn is_ordered(
    axis: SweepAxis,
    param: f64,
    fixed: f64,
    base: &ModelSpec,
    noise: &NoiseModel,
    cfg: &MeanFieldConfig,
) -> Result<bool> {
    let sys = system_at(axis, param, fixed, base, noise, cfg)?;
    Ok(!mf_steady_from(&sys, BROKEN_SEED, cfg)?.state.is_paramagnetic())
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub value: f64,
    /// Final bracket `(lo, hi)`.
    pub bracket: (f64, f64),
    pub iterations: usize,
}

/// Bisection on the order parameter crossing `ε_PM` inside `[lo, hi]`.
#[allow(clippy::too_many_arguments)]
pub fn critical_point(
    axis: SweepAxis,
    lo: f64,
    hi: f64,
    fixed: f64,
    base: &ModelSpec,
    noise: &NoiseModel,
    cfg: &MeanFieldConfig,
    tol: f64,
) -> Result<CriticalPoint> {
    let ordered = |x: f64| is_ordered(axis, x, fixed, base, noise, cfg);
    let (mut a, mut b) = (lo, hi);
    let fa = ordered(a)?;
    let fb = ordered(b)?;
    if fa == fb {
        return Err(Error::NoTransition(format!(
            "same phase at both ends of [{lo}, {hi}] (ordered = {fa})"
        )));
    }
    let mut iterations = 0;
    while (b - a).abs() > tol && iterations < 200 {
        let m = 0.5 * (a + b);
        if ordered(m)? == fa {
            a = m;
        } else {
            b = m;
        }
        iterations += 1;
    }
    Ok(CriticalPoint { value: 0.5 * (a + b), bracket: (a, b), iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Boundary, QubitLattice};

    fn spec(g: f64) -> ModelSpec {
        ModelSpec::from_g(QubitLattice::square(3, Boundary::Periodic).unwrap(), g).unwrap()
    }

    #[test]
    fn all_down_is_stationary() {
        let sys = MeanFieldSystem::new(&spec(0.1), &NoiseModel::none(), 0.0, &MeanFieldConfig::default()).unwrap();
        assert!(norm3(sys.rhs([0.0, 0.0, -1.0])) < 1e-14);
    }

    #[test]
    fn pure_decay_rates() {
        let lat = QubitLattice::square(3, Boundary::Periodic).unwrap();
        let s = ModelSpec::decay_only(lat, 1.0).unwrap();
        let sys = MeanFieldSystem::new(&s, &NoiseModel::none(), 0.0, &MeanFieldConfig::default()).unwrap();
        let st = [0.3, -0.2, 0.1];
        let d = sys.rhs(st);
        assert!((d[0] + 0.15).abs() < 1e-14);
        assert!((d[1] - 0.1).abs() < 1e-14);
        assert!((d[2] + 1.1).abs() < 1e-14);
    }

    #[test]
    fn closed_form_equations() {
        // ṡx = 2z(Jy−Jz) sy sz − (γ/2 + u) sx, and cyclic, with u = 5r per-bond depolarizing
        let g = 0.1;
        let r = 0.01;
        let m = spec(g);
        let sys = MeanFieldSystem::new(&m, &NoiseModel::depolarizing(), r, &MeanFieldConfig::default()).unwrap();
        let s = [0.2, -0.3, -0.5];
        let (jx, jy, jz) = (m.jx, m.jy, m.jz);
        let z = 4.0;
        let u = 5.0 * r;
        let want = [
            2.0 * z * (jy - jz) * s[1] * s[2] - (0.5 + u) * s[0],
            2.0 * z * (jz - jx) * s[0] * s[2] - (0.5 + u) * s[1],
            2.0 * z * (jx - jy) * s[0] * s[1] - (s[2] + 1.0) - u * s[2],
        ];
        let got = sys.rhs(s);
        for c in 0..3 {
            assert!((got[c] - want[c]).abs() < 1e-13, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn g_zero_is_paramagnetic() {
        let p = mf_steady(&spec(0.0), &NoiseModel::none(), 0.0, &MeanFieldConfig::default()).unwrap();
        assert!(p.stable && p.state.is_paramagnetic());
    }

    #[test]
    fn g_point_one_is_ferromagnetic() {
        let p = mf_steady(&spec(0.1), &NoiseModel::none(), 0.0, &MeanFieldConfig::default()).unwrap();
        assert!(p.stable && !p.state.is_paramagnetic());
        assert!((p.state.sx().abs() - 0.484).abs() < 1e-3);
    }

    #[test]
    fn non_monotone_grid_rejected() {
        let r = sweep(SweepAxis::G, &[0.1, 0.05, 0.2], 0.0, &spec(0.0), &NoiseModel::none(), &MeanFieldConfig::default());
        assert!(r.is_err());
    }
}
