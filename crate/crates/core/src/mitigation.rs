// SPDX-License-Identifier: Apache-2.0

//! Error-mitigation estimators: Richardson extrapolation, power-law scaling
//! fits of critical points, and matrix-pencil spectroscopy.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::meanfield::PhaseCurve;
use crate::trotter::TimeSeries;
use crate::C64;

// ---------------------------------------------------------------------------
// Small dense real solvers
// ---------------------------------------------------------------------------

/// Solve `a x = b` by Gaussian elimination with partial pivoting.
fn solve_real(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty");
        if a[piv][col].abs() < 1e-300 {
            return Err(Error::Singular("normal equations".into()));
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            let (top, bottom) = a.split_at_mut(row);
            for (x, p) in bottom[0][col..].iter_mut().zip(&top[col][col..]) {
                *x -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Ok(x)
}

/// Least-squares polynomial `Σ cₖ xᵏ` of degree `deg`, coefficients low to high.
pub fn polyfit(x: &[f64], y: &[f64], deg: usize) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!("{} abscissae vs {} values", x.len(), y.len())));
    }
    let mut distinct = x.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < deg + 1 {
        return Err(Error::Underdetermined(format!(
            "degree {deg} needs {} distinct points, got {}",
            deg + 1,
            distinct.len()
        )));
    }
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let xs: Vec<f64> = x.iter().map(|v| v / scale).collect();
    let n = deg + 1;
    let mut ata = vec![vec![0.0; n]; n];
    let mut aty = vec![0.0; n];
    for (xi, yi) in xs.iter().zip(y) {
        let pow: Vec<f64> = (0..n).map(|k| xi.powi(k as i32)).collect();
        for a in 0..n {
            aty[a] += pow[a] * yi;
            for b in 0..n {
                ata[a][b] += pow[a] * pow[b];
            }
        }
    }
    let c = solve_real(ata, aty)?;
    Ok(c.iter().enumerate().map(|(k, ck)| ck / scale.powi(k as i32)).collect())
}

fn polyval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, ck| acc * x + ck)
}

// ---------------------------------------------------------------------------
// Richardson extrapolation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyObservations {
    pub observable: String,
    pub r: Vec<f64>,
    pub values: Vec<f64>,
}

impl NoisyObservations {
    pub fn new(observable: impl Into<String>, r: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if r.len() != values.len() {
            return Err(Error::Dimension(format!("{} noise levels vs {} values", r.len(), values.len())));
        }
        if let Some(bad) = r.iter().find(|x| !(**x > 0.0)) {
            return Err(Error::InvalidArgument(format!("noise levels must be positive, got {bad}")));
        }
        let mut sorted = r.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("noise levels must be distinct".into()));
        }
        Ok(Self { observable: observable.into(), r, values })
    }

    /// Observations at `r₀ · cᵢ`.
    pub fn boosted(observable: impl Into<String>, r0: f64, c: &[f64], values: Vec<f64>) -> Result<Self> {
        Self::new(observable, c.iter().map(|ci| r0 * ci).collect(), values)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RichardsonResult {
    pub estimate: f64,
    /// Polynomial coefficients in `r`, constant term first.
    pub coefficients: Vec<f64>,
    /// Root-mean-square fit residual.
    pub residual: f64,
}

/// Polynomial extrapolation of order 1 or 2 to `r = 0`.
pub fn richardson(obs: &NoisyObservations, order: usize) -> Result<RichardsonResult> {
    if !(1..=2).contains(&order) {
        return Err(Error::InvalidArgument(format!("Richardson order must be 1 or 2, got {order}")));
    }
    let c = polyfit(&obs.r, &obs.values, order)?;
    let residual = (obs
        .r
        .iter()
        .zip(&obs.values)
        .map(|(r, v)| (polyval(&c, *r) - v).powi(2))
        .sum::<f64>()
        / obs.r.len() as f64)
        .sqrt();
    Ok(RichardsonResult { estimate: c[0], coefficients: c, residual })
}

// ---------------------------------------------------------------------------
// Levenberg–Marquardt
// ---------------------------------------------------------------------------

/// Minimise `Σ resid(p)ᵢ²` from `p0` with a forward-difference Jacobian.
pub fn levenberg_marquardt<F>(resid: F, p0: &[f64], max_iter: usize) -> Result<(Vec<f64>, f64)>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let cost = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>();
    let mut p = p0.to_vec();
    let mut r = resid(&p).ok_or_else(|| Error::FitFailed("initial guess outside model domain".into()))?;
    let mut c = cost(&r);
    let mut mu = 1e-3;
    let np = p.len();
    for _ in 0..max_iter {
        let mut jac = vec![vec![0.0; np]; r.len()];
        for k in 0..np {
            let h = 1e-7 * p[k].abs().max(1e-7);
            let mut q = p.clone();
            q[k] += h;
            let Some(rq) = resid(&q) else {
                return Err(Error::FitFailed("jacobian probe left model domain".into()));
            };
            for (i, row) in jac.iter_mut().enumerate() {
                row[k] = (rq[i] - r[i]) / h;
            }
        }
        let mut jtj = vec![vec![0.0; np]; np];
        let mut jtr = vec![0.0; np];
        for (i, row) in jac.iter().enumerate() {
            for a in 0..np {
                jtr[a] -= row[a] * r[i];
                for b in 0..np {
                    jtj[a][b] += row[a] * row[b];
                }
            }
        }
        let mut accepted = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for (k, row) in a.iter_mut().enumerate() {
                row[k] += mu * jtj[k][k].max(1e-12);
            }
            let Ok(dp) = solve_real(a, jtr.clone()) else {
                mu *= 10.0;
                continue;
            };
            let q: Vec<f64> = p.iter().zip(&dp).map(|(x, d)| x + d).collect();
            if let Some(rq) = resid(&q) {
                let cq = cost(&rq);
                if cq < c {
                    let rel = (c - cq) / c.max(1e-300);
                    p = q;
                    r = rq;
                    c = cq;
                    mu = (mu * 0.3).max(1e-12);
                    accepted = true;
                    if rel < 1e-15 {
                        return Ok((p, c));
                    }
                    break;
                }
            }
            mu *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    Ok((p, c))
}

// ---------------------------------------------------------------------------
// Power-law scaling fits
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    pub min: f64,
    pub max: f64,
}

impl Default for FitWindow {
    fn default() -> Self {
        Self { min: 0.005, max: 0.05 }
    }
}

/// `y = A · x^β` fitted on `x > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLaw {
    pub amplitude: f64,
    pub beta: f64,
    /// Largest relative deviation `|fit − y| / |y|` over the fitted points.
    pub max_rel_residual: f64,
}

/// Power-law fit by least squares on relative residuals.
pub fn fit_power_law(x: &[f64], y: &[f64]) -> Result<PowerLaw> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::Underdetermined("power law needs at least 3 points".into()));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidArgument("power-law data must be positive".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let c = polyfit(&lx, &ly, 1)?;
    let resid = |p: &[f64]| Some(x.iter().zip(y).map(|(xi, yi)| p[0] * xi.powf(p[1]) / yi - 1.0).collect());
    let (p, _) = levenberg_marquardt(resid, &[c[0].exp(), c[1]], 200)?;
    let max_rel = x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (p[0] * xi.powf(p[1]) / yi - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(PowerLaw { amplitude: p[0], beta: p[1], max_rel_residual: max_rel })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub g_cri: f64,
    pub beta: f64,
    pub amplitude: f64,
    /// Constant offset `a(r) + b(r)·r` of the modified ansatz.
    pub offset: Option<f64>,
    pub window: FitWindow,
    /// Root-mean-square relative residual over the fitted points.
    pub residual: f64,
    pub n_points: usize,
}

/// Largest accepted root-mean-square relative residual of a scaling fit.
pub const SCALING_MAX_RESIDUAL: f64 = 0.05;

/// Critical-point guess: midpoint between the last disordered and first
/// ordered grid point (curves in either direction).
fn transition_guess(params: &[f64], m: &[f64], threshold: f64) -> Option<f64> {
    let ordered: Vec<bool> = m.iter().map(|v| *v > threshold).collect();
    ordered
        .windows(2)
        .position(|w| w[0] != w[1])
        .map(|i| 0.5 * (params[i] + params[i + 1]))
}

/// Fit `m = A |p − p_c|^β (+ offset)` on the ordered side of a phase curve,
/// keeping points with `|p − p_c|` inside `window`.
pub fn fit_scaling(curve: &PhaseCurve, window: FitWindow, modified: bool) -> Result<ScalingFit> {
    let params = curve.params();
    let m = curve.order_parameter();
    let lo = m.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = m.iter().cloned().fold(0.0, f64::max);
    let threshold = if modified { lo + 0.1 * (hi - lo) } else { crate::meanfield::EPS_PM };
    let mut pc = transition_guess(&params, &m, threshold)
        .ok_or_else(|| Error::NoTransition("order parameter never crosses the threshold".into()))?;
    // ordered side: sign of (p − p_c) where m is large
    let imax = m.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).expect("non-empty");
    let side = if params[imax] > pc { 1.0 } else { -1.0 };
    let mut best = None;
    for _ in 0..4 {
        let pts: Vec<(f64, f64)> = params
            .iter()
            .zip(&m)
            .filter(|(p, _)| {
                let d = side * (**p - pc);
                d >= window.min && d <= window.max
            })
            .map(|(p, v)| (*p, *v))
            .collect();
        let nparam = if modified { 4 } else { 3 };
        if pts.len() < nparam + 1 {
            return Err(Error::Underdetermined(format!(
                "{} points inside the fit window, need {}",
                pts.len(),
                nparam + 1
            )));
        }
        let resid = |q: &[f64]| -> Option<Vec<f64>> {
            pts.iter()
                .map(|(p, v)| {
                    let d = side * (p - q[1]);
                    if d <= 0.0 {
                        return None;
                    }
                    let off = if modified { q[3] } else { 0.0 };
                    Some((q[0] * d.powf(q[2]) + off - v) / v.abs().max(1e-12))
                })
                .collect()
        };
        let dmin = pts.iter().map(|(p, _)| side * (p - pc)).fold(f64::INFINITY, f64::min);
        // keep the initial critical point strictly outside the fitted range
        let pc0 = pc - side * 0.5 * dmin.min(window.min);
        let (amp0, beta0) = {
            let xs: Vec<f64> = pts.iter().map(|(p, _)| side * (p - pc0)).collect();
            let ys: Vec<f64> = pts.iter().map(|(_, v)| v.max(1e-12)).collect();
            fit_power_law(&xs, &ys).map(|f| (f.amplitude, f.beta)).unwrap_or((1.0, 0.5))
        };
        let mut p0 = vec![amp0, pc0, beta0];
        if modified {
            p0.push(0.0);
        }
        let (q, cost) = levenberg_marquardt(resid, &p0, 500)?;
        let fit = ScalingFit {
            g_cri: q[1],
            beta: q[2],
            amplitude: q[0],
            offset: modified.then(|| q[3]),
            window,
            residual: (cost / pts.len() as f64).sqrt(),
            n_points: pts.len(),
        };
        let moved = (fit.g_cri - pc).abs();
        pc = fit.g_cri;
        best = Some(fit);
        if moved < 1e-10 {
            break;
        }
    }
    let fit = best.expect("at least one iteration");
    if !(fit.beta > 0.0) {
        return Err(Error::FitFailed(format!("non-positive exponent {}", fit.beta)));
    }
    if !(fit.residual <= SCALING_MAX_RESIDUAL) {
        return Err(Error::FitFailed(format!("relative residual {:.3e} above {SCALING_MAX_RESIDUAL}", fit.residual)));
    }
    Ok(fit)
}

/// Shift of the fitted critical point when the window's upper edge is halved.
pub fn window_sensitivity(curve: &PhaseCurve, window: FitWindow, modified: bool) -> Result<f64> {
    let full = fit_scaling(curve, window, modified)?;
    let narrow = fit_scaling(curve, FitWindow { min: window.min, max: 0.5 * window.max }, modified)?;
    Ok((narrow.g_cri - full.g_cri).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Extrapolation {
    Linear,
    Quadratic,
}

impl Extrapolation {
    pub fn order(self) -> usize {
        match self {
            Extrapolation::Linear => 1,
            Extrapolation::Quadratic => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingExtrapolation {
    pub g_cri: f64,
    pub beta: f64,
    pub fits: Vec<(f64, ScalingFit)>,
}

/// Fit each `(r, curve)` and extrapolate `g_cri(r)`, `β(r)` to `r = 0`.
pub fn scaling_extrapolate(
    curves: &[(f64, PhaseCurve)],
    window: FitWindow,
    modified: bool,
    method: Extrapolation,
) -> Result<ScalingExtrapolation> {
    let fits = curves
        .iter()
        .map(|(r, c)| Ok((*r, fit_scaling(c, window, modified)?)))
        .collect::<Result<Vec<_>>>()?;
    let rs: Vec<f64> = fits.iter().map(|(r, _)| *r).collect();
    let g = NoisyObservations::new("g_cri", rs.clone(), fits.iter().map(|(_, f)| f.g_cri).collect())?;
    let b = NoisyObservations::new("beta", rs, fits.iter().map(|(_, f)| f.beta).collect())?;
    Ok(ScalingExtrapolation {
        g_cri: richardson(&g, method.order())?.estimate,
        beta: richardson(&b, method.order())?.estimate,
        fits,
    })
}

/// Extrapolate known critical points `g_cri(r)` directly.
pub fn extrapolate_critical_points(r: &[f64], g_cri: &[f64], method: Extrapolation) -> Result<f64> {
    Ok(richardson(&NoisyObservations::new("g_cri", r.to_vec(), g_cri.to_vec())?, method.order())?.estimate)
}

// ---------------------------------------------------------------------------
// Matrix pencil
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub amplitude: f64,
    /// Phase in `[0, 2π)`.
    pub phase: f64,
    pub lambda: C64,
}

impl Mode {
    pub fn coefficient(&self) -> C64 {
        C64::from_polar(self.amplitude, self.phase)
    }
}

/// `s(t) = Σ_α A_α e^{iθ_α} e^{λ_α (t − t₀)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentialModel {
    pub modes: Vec<Mode>,
    pub t0: f64,
    /// Root-mean-square reconstruction error on the fitted samples.
    pub residual: f64,
    /// Modes dropped because `Re λ > 1e−8`.
    pub rejected: Vec<C64>,
    pub aliasing: bool,
}

impl ExponentialModel {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn eval(&self, t: f64) -> C64 {
        self.modes.iter().map(|m| m.coefficient() * (m.lambda * (t - self.t0)).exp()).sum()
    }

    pub fn lambdas(&self) -> Vec<C64> {
        self.modes.iter().map(|m| m.lambda).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ModeCount {
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PencilOptions {
    /// Pencil parameter; `None` uses `⌊N/3⌋`.
    pub pencil: Option<usize>,
    /// Relative singular-value threshold in auto-rank mode.
    pub sv_threshold: f64,
    pub max_real_part: f64,
}

impl Default for PencilOptions {
    fn default() -> Self {
        Self { pencil: None, sv_threshold: 1e-8, max_real_part: 1e-8 }
    }
}

/// Modes shared by several signals sampled on the same grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharedModes {
    pub lambdas: Vec<C64>,
    pub models: Vec<ExponentialModel>,
    pub singular_values: Vec<f64>,
}

fn uniform_grid(series: &[&TimeSeries]) -> Result<(f64, f64, usize)> {
    let first = series.first().ok_or_else(|| Error::InvalidArgument("no series".into()))?;
    let dt = first
        .uniform_step()
        .ok_or_else(|| Error::InvalidArgument("matrix pencil needs uniform sampling".into()))?;
    for s in series {
        if s.len() != first.len() || s.times.first() != first.times.first() || s.uniform_step().is_none() {
            return Err(Error::InvalidArgument("series must share one uniform grid".into()));
        }
    }
    Ok((dt, first.times[0], first.len()))
}

fn fit_amplitudes(values: &[f64], z: &[C64]) -> Result<(Vec<C64>, f64)> {
    let n = values.len();
    let p = z.len();
    let v = Mat::from_fn(n, p, |k, m| z[m].powi(k as i32));
    let y = Mat::from_fn(n, 1, |k, _| C64::from(values[k]));
    let c = linalg::pinv(&v, 1e-13)? * &y;
    let fit = &v * &c;
    let rms = ((0..n).map(|k| (fit[(k, 0)] - y[(k, 0)]).norm_sqr()).sum::<f64>() / n as f64).sqrt();
    Ok(((0..p).map(|m| c[(m, 0)]).collect(), rms))
}

/// Matrix pencil on several signals with common poles (stacked Hankel blocks).
pub fn matrix_pencil_multi(series: &[&TimeSeries], count: ModeCount, opts: &PencilOptions) -> Result<SharedModes> {
    let (dt, t0, n) = uniform_grid(series)?;
    let l = opts.pencil.unwrap_or(n / 3);
    if l < 1 || l >= n {
        return Err(Error::RankCollapse(format!("pencil parameter {l} invalid for {n} samples")));
    }
    let rows = n - l;
    let blocks = series.len();
    let y: CMat = Mat::from_fn(rows * blocks, l + 1, |i, j| C64::from(series[i / rows].values[i % rows + j]));
    let (_, sv, v) = linalg::svd(&y)?;
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return Err(Error::RankCollapse("signal is identically zero".into()));
    }
    let rank = match count {
        ModeCount::Auto => sv.iter().filter(|s| **s > opts.sv_threshold * smax).count(),
        ModeCount::Fixed(p) => p,
    };
    if let ModeCount::Fixed(p) = count {
        if n < 2 * p + l {
            return Err(Error::RankCollapse(format!("{n} samples cannot resolve {p} modes with pencil {l}")));
        }
    }
    let max_rank = l.min(rows * blocks);
    if rank == 0 || rank > max_rank {
        return Err(Error::RankCollapse(format!(
            "{rank} modes requested but the pencil supports at most {max_rank}"
        )));
    }
    // conj(V') spans the signal row space; drop its last / first row.
    let v1 = Mat::from_fn(l, rank, |i, j| v[(i, j)].conj());
    let v2 = Mat::from_fn(l, rank, |i, j| v[(i + 1, j)].conj());
    let a = linalg::pinv(&v1, 1e-14)? * &v2;
    let z = linalg::eigenvalues(&a)?;
    let nyquist = std::f64::consts::PI / dt;
    let mut lambdas: Vec<C64> = z.iter().map(|zi| zi.ln() / dt).collect();
    let aliasing = lambdas.iter().any(|l| l.im.abs() > 0.9 * nyquist);
    if aliasing {
        log::warn!("matrix pencil: modes close to the Nyquist frequency {nyquist:.3}");
    }
    let rejected: Vec<C64> = lambdas.iter().cloned().filter(|l| l.re > opts.max_real_part).collect();
    lambdas.retain(|l| l.re <= opts.max_real_part);
    lambdas.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
    let zk: Vec<C64> = lambdas.iter().map(|l| (l * dt).exp()).collect();
    let models = series
        .iter()
        .map(|s| {
            let (c, residual) = fit_amplitudes(&s.values, &zk)?;
            let modes = c
                .iter()
                .zip(&lambdas)
                .map(|(ci, li)| Mode { amplitude: ci.norm(), phase: ci.arg().rem_euclid(2.0 * std::f64::consts::PI), lambda: *li })
                .collect();
            Ok(ExponentialModel { modes, t0, residual, rejected: rejected.clone(), aliasing })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SharedModes { lambdas, models, singular_values: sv })
}

pub fn matrix_pencil(series: &TimeSeries, count: ModeCount, opts: &PencilOptions) -> Result<ExponentialModel> {
    Ok(matrix_pencil_multi(&[series], count, opts)?.models.remove(0))
}

/// Uniformly sampled `Σ c_α e^{λ_α t}` (real part).
pub fn synthesize(modes: &[(C64, C64)], dt: f64, n: usize) -> Result<TimeSeries> {
    let times: Vec<f64> = (0..n).map(|k| k as f64 * dt).collect();
    let values = times.iter().map(|t| modes.iter().map(|(c, l)| c * (l * t).exp()).sum::<C64>().re).collect();
    TimeSeries::new("synthetic", times, values)
}

// ---------------------------------------------------------------------------
// Spectrum extrapolation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedMode {
    pub first: C64,
    pub second: C64,
    pub extrapolated: C64,
    /// Real part clipped to zero.
    pub clipped: bool,
    /// More than one candidate inside the pairing radius.
    pub ambiguous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumExtrapolation {
    pub pairs: Vec<PairedMode>,
    pub unmatched: Vec<C64>,
}

impl SpectrumExtrapolation {
    pub fn extrapolated(&self) -> Vec<C64> {
        self.pairs.iter().map(|p| p.extrapolated).collect()
    }
}

pub const CLIP_TOL: f64 = 1e-6;

/// Pair modes at `r_a` and `r_b` by nearest neighbour in ℂ within `radius`
/// and extrapolate each pair linearly to `r = 0`. Conjugate partners are
/// paired in the upper half plane and mirrored.
pub fn extrapolate_spectrum(r_a: f64, a: &[C64], r_b: f64, b: &[C64], radius: f64) -> Result<SpectrumExtrapolation> {
    if r_a == r_b {
        return Err(Error::InvalidArgument("noise levels must differ".into()));
    }
    let tol = 1e-9;
    let upper = |v: &[C64]| -> Vec<C64> { v.iter().cloned().filter(|l| l.im >= -tol).collect() };
    let (ua, ub) = (upper(a), upper(b));
    let mut used = vec![false; ub.len()];
    let mut pairs = Vec::new();
    let mut unmatched = Vec::new();
    for la in &ua {
        let mut cands: Vec<(usize, f64)> = ub
            .iter()
            .enumerate()
            .filter(|(j, lb)| !used[*j] && ((la.im.abs() <= tol) == (lb.im.abs() <= tol)))
            .map(|(j, lb)| (j, (lb - la).norm()))
            .filter(|(_, d)| *d <= radius)
            .collect();
        cands.sort_by(|x, y| x.1.total_cmp(&y.1));
        let Some(&(j, _)) = cands.first() else {
            unmatched.push(*la);
            continue;
        };
        used[j] = true;
        let lb = ub[j];
        let mut ex = la - (lb - la) * (r_a / (r_b - r_a));
        let clipped = ex.re > CLIP_TOL;
        if clipped {
            log::warn!("extrapolated eigenvalue {ex} has positive real part; clipped");
            ex.re = 0.0;
        }
        let ambiguous = cands.len() > 1;
        let real = la.im.abs() <= tol;
        if real {
            ex.im = 0.0;
        }
        pairs.push(PairedMode { first: *la, second: lb, extrapolated: ex, clipped, ambiguous });
        if !real {
            pairs.push(PairedMode { first: la.conj(), second: lb.conj(), extrapolated: ex.conj(), clipped, ambiguous });
        }
    }
    unmatched.extend(ub.iter().zip(&used).filter(|(_, u)| !**u).map(|(l, _)| *l));
    Ok(SpectrumExtrapolation { pairs, unmatched })
}

/// Extrapolate a single real scalar linearly from `(r_a, a)` and `(r_b, b)`.
pub fn linear_to_zero(r_a: f64, a: f64, r_b: f64, b: f64) -> f64 {
    a - (b - a) * r_a / (r_b - r_a)
}

/// Nearest element of `pool` to `x`.
pub fn nearest(x: C64, pool: &[C64]) -> Option<C64> {
    pool.iter().cloned().min_by(|a, b| (a - x).norm().total_cmp(&(b - x).norm()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn richardson_linear_example() {
        let obs = NoisyObservations::new("M", vec![0.01, 0.02], vec![1.03, 1.06]).unwrap();
        assert!((richardson(&obs, 1).unwrap().estimate - 1.0).abs() < 1e-12);
    }

    #[test]
    fn richardson_constant_data() {
        let obs = NoisyObservations::new("M", vec![0.01, 0.015, 0.02], vec![0.7; 3]).unwrap();
        for order in 1..=2 {
            assert!((richardson(&obs, order).unwrap().estimate - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn richardson_underdetermined() {
        let obs = NoisyObservations::new("M", vec![0.01, 0.02], vec![1.0, 2.0]).unwrap();
        assert!(matches!(richardson(&obs, 2), Err(Error::Underdetermined(_))));
        assert!(NoisyObservations::new("M", vec![0.01, 0.01], vec![1.0, 2.0]).is_err());
        assert!(NoisyObservations::new("M", vec![0.0, 0.01], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn power_law_exact_recovery() {
        let x: Vec<f64> = (1..=10).map(|k| 0.001 * k as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v.powf(0.37)).collect();
        let f = fit_power_law(&x, &y).unwrap();
        assert!((f.beta - 0.37).abs() < 1e-8);
        assert!((f.amplitude - 2.5).abs() < 1e-7);
    }

    #[test]
    fn pencil_single_exponential() {
        let ts = synthesize(&[(C64::from(2.0), C64::from(-0.5))], 0.05, 120).unwrap();
        let m = matrix_pencil(&ts, ModeCount::Auto, &PencilOptions::default()).unwrap();
        assert_eq!(m.len(), 1);
        let mode = m.modes[0];
        assert!((mode.lambda - C64::from(-0.5)).norm() < 1e-10);
        assert!((mode.amplitude - 2.0).abs() < 1e-10);
        assert!(mode.phase.abs() < 1e-10 || (mode.phase - 2.0 * std::f64::consts::PI).abs() < 1e-10);
    }

    #[test]
    fn pencil_rejects_zero_signal() {
        let ts = TimeSeries::new("z", (0..30).map(|k| k as f64).collect(), vec![0.0; 30]).unwrap();
        assert!(matches!(matrix_pencil(&ts, ModeCount::Auto, &PencilOptions::default()), Err(Error::RankCollapse(_))));
    }

    #[test]
    fn spectrum_extrapolation_linear_data() {
        let l0 = [C64::new(-0.3, 0.0), C64::new(-1.0, 0.7), C64::new(-1.0, -0.7)];
        let d = [C64::new(-2.0, 0.0), C64::new(-3.0, 1.0), C64::new(-3.0, -1.0)];
        let at = |r: f64| l0.iter().zip(&d).map(|(a, b)| a + b * r).collect::<Vec<_>>();
        let res = extrapolate_spectrum(0.01, &at(0.01), 0.02, &at(0.02), 0.2).unwrap();
        assert!(res.unmatched.is_empty());
        for l in l0 {
            let got = nearest(l, &res.extrapolated()).unwrap();
            assert!((got - l).norm() < 1e-12);
        }
    }

    #[test]
    fn identical_spectra_unchanged() {
        let s = [C64::new(-0.5, 0.0), C64::new(-1.0, 2.0), C64::new(-1.0, -2.0)];
        let res = extrapolate_spectrum(0.01, &s, 0.02, &s, 0.1).unwrap();
        assert_eq!(res.pairs.len(), 3);
        for p in &res.pairs {
            assert!((p.extrapolated - p.first).norm() < 1e-15);
        }
    }
}
