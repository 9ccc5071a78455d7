// SPDX-License-Identifier: Apache-2.0

//! Noisy Trotterized propagation of full-lattice density matrices.
//!
//! Each gate contributes the channel `e^{rτ𝓔} e^{τ𝒢ⁱᵈ}`. Runs of consecutive
//! gates on the same support are multiplied into a single local channel when
//! the schedule is compiled, which is exact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hs::{DensityMatrix, LocalChannel, StateBuffer, SuperOp};
use crate::lattice::QubitLattice;
use crate::linalg::ZERO;
use crate::par::{self, Exec};
use crate::pauli::Pauli;
use crate::xyz::{magnetization, order_parameter, site_expectation, GateGenerator};
use crate::C64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolutionConfig {
    pub tau: f64,
    pub r: f64,
    pub max_time: f64,
    pub delta_ss: f64,
    /// Spacing of the convergence probes, in units of `1/γ`.
    pub probe_window: f64,
    /// Record every `stride` Trotter steps.
    pub stride: usize,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self { tau: 0.01, r: 0.0, max_time: 50.0, delta_ss: 1e-7, probe_window: 1.0, stride: 1, exec: Exec::Parallel }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidArgument(format!("tau must be non-negative, got {}", self.tau)));
        }
        if !(self.delta_ss > 0.0) {
            return Err(Error::InvalidArgument(format!("delta_ss must be positive, got {}", self.delta_ss)));
        }
        if !(self.r >= 0.0 && self.r.is_finite()) {
            return Err(Error::NegativeRate(self.r));
        }
        if !(self.probe_window > 0.0) || self.stride == 0 {
            return Err(Error::InvalidArgument("probe window and stride must be positive".into()));
        }
        if !(self.max_time >= 0.0) {
            return Err(Error::InvalidArgument(format!("max_time must be non-negative, got {}", self.max_time)));
        }
        Ok(())
    }

    fn probe_steps(&self) -> Result<usize> {
        if self.tau <= 0.0 {
            return Err(Error::InvalidArgument("evolution needs tau > 0".into()));
        }
        Ok(((self.probe_window / self.tau).round() as usize).max(1))
    }

    fn max_steps(&self) -> usize {
        if self.tau <= 0.0 {
            return 0;
        }
        (self.max_time / self.tau).round() as usize
    }
}

/// `e^{rτ𝓔} e^{τ𝒢ⁱᵈ}` for one gate on its own support.
pub fn gate_channel(gate: &GateGenerator, tau: f64, r: f64) -> SuperOp {
    let ideal = gate.ideal.exp(tau);
    match &gate.noise {
        Some(e) if r * tau != 0.0 => e.exp(r * tau).compose(&ideal),
        _ => ideal,
    }
}

/// A schedule with every gate exponentiated and same-support runs fused.
#[derive(Debug, Clone)]
pub struct CompiledSchedule {
    n_qubits: usize,
    channels: Vec<LocalChannel>,
}

impl CompiledSchedule {
    pub fn new(gates: &[GateGenerator], n_qubits: usize, tau: f64, r: f64, exec: Exec) -> Result<Self> {
        let locals = par::map(gates, exec, |g| gate_channel(g, tau, r));
        let mut fused: Vec<(Vec<usize>, SuperOp)> = Vec::new();
        for (g, ch) in gates.iter().zip(locals) {
            match fused.last_mut() {
                Some((sites, acc)) if *sites == g.sites => *acc = ch.compose(acc),
                _ => fused.push((g.sites.clone(), ch)),
            }
        }
        let channels = fused
            .iter()
            .map(|(sites, ch)| LocalChannel::new(ch, sites, n_qubits))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n_qubits, channels })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Number of local channels after fusion.
    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    /// One Trotter step in place.
    pub fn step(&self, state: &mut StateBuffer, scratch: &mut Vec<C64>, exec: Exec) {
        for ch in &self.channels {
            ch.apply(state, scratch, exec);
        }
    }
}

fn check_state(rho: &DensityMatrix, n: usize) -> Result<()> {
    if rho.dim() != 1 << n {
        return Err(Error::Dimension(format!("state dim {} vs {n} qubits", rho.dim())));
    }
    Ok(())
}

/// One noisy Trotter step.
pub fn trotter_step(
    rho: &DensityMatrix,
    gates: &[GateGenerator],
    n_qubits: usize,
    cfg: &EvolutionConfig,
) -> Result<DensityMatrix> {
    cfg.validate()?;
    check_state(rho, n_qubits)?;
    let sched = CompiledSchedule::new(gates, n_qubits, cfg.tau, cfg.r, cfg.exec)?;
    let mut state = StateBuffer::from_operator(rho.op());
    let mut scratch = Vec::new();
    sched.step(&mut state, &mut scratch, cfg.exec);
    Ok(state.to_density())
}

#[derive(Debug, Clone)]
pub struct SteadyState {
    pub rho: DensityMatrix,
    pub steps: usize,
    /// Trace distance between the last two probes.
    pub residual: f64,
    pub converged: bool,
}

/// Iterate Trotter steps until two states one probe window apart are within
/// `δ_ss` in trace distance, or `max_time` is reached.
pub fn evolve_to_steady(
    rho_in: &DensityMatrix,
    gates: &[GateGenerator],
    n_qubits: usize,
    cfg: &EvolutionConfig,
) -> Result<SteadyState> {
    cfg.validate()?;
    check_state(rho_in, n_qubits)?;
    let sched = CompiledSchedule::new(gates, n_qubits, cfg.tau, cfg.r, cfg.exec)?;
    evolve_compiled(rho_in, &sched, cfg)
}

pub fn evolve_compiled(rho_in: &DensityMatrix, sched: &CompiledSchedule, cfg: &EvolutionConfig) -> Result<SteadyState> {
    let window = cfg.probe_steps()?;
    let max_steps = cfg.max_steps();
    let mut state = StateBuffer::from_operator(rho_in.op());
    let mut scratch = Vec::new();
    let mut probe = state.to_density();
    let mut steps = 0;
    let mut residual = f64::INFINITY;
    while steps < max_steps {
        let n = window.min(max_steps - steps);
        for _ in 0..n {
            sched.step(&mut state, &mut scratch, cfg.exec);
        }
        steps += n;
        let current = state.to_density();
        residual = current.trace_distance(&probe)?;
        probe = current;
        if residual < cfg.delta_ss {
            return Ok(SteadyState { rho: probe, steps, residual, converged: true });
        }
    }
    if residual.is_finite() {
        log::warn!("no steady state after {steps} steps, residual {residual:.3e}");
    }
    Ok(SteadyState { rho: probe, steps, residual, converged: false })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Observable {
    Trace,
    Magnetization,
    OrderParameter,
    Site { site: usize, axis: Pauli },
}

impl Observable {
    pub fn name(&self) -> String {
        match self {
            Observable::Trace => "trace".into(),
            Observable::Magnetization => "M".into(),
            Observable::OrderParameter => "m".into(),
            Observable::Site { site, axis } => format!("{}{site}", axis.label().to_ascii_lowercase()),
        }
    }

    pub fn evaluate(&self, rho: &DensityMatrix, lattice: &QubitLattice) -> Result<f64> {
        match self {
            Observable::Trace => Ok(rho.op().trace().re),
            Observable::Magnetization => magnetization(rho, lattice),
            Observable::OrderParameter => order_parameter(rho, lattice),
            Observable::Site { site, axis } => site_expectation(rho, lattice, *site, *axis),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub observable: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub g: Option<f64>,
    pub r: Option<f64>,
    pub seed: Option<u64>,
}

impl TimeSeries {
    pub fn new(observable: impl Into<String>, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Dimension(format!("{} times vs {} values", times.len(), values.len())));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("times must be strictly increasing".into()));
        }
        Ok(Self { observable: observable.into(), times, values, g: None, r: None, seed: None })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Sampling interval, if the grid is uniform to 1e−9 relative.
    pub fn uniform_step(&self) -> Option<f64> {
        if self.times.len() < 2 {
            return None;
        }
        let dt = self.times[1] - self.times[0];
        self.times
            .windows(2)
            .all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt.abs().max(1.0))
            .then_some(dt)
    }
}

/// Record several observables along one trajectory, stopping at `max_time`
/// or once the state is steady to `δ_ss` over a probe window.
pub fn record_trajectories(
    rho_in: &DensityMatrix,
    gates: &[GateGenerator],
    lattice: &QubitLattice,
    cfg: &EvolutionConfig,
    observables: &[Observable],
) -> Result<Vec<TimeSeries>> {
    cfg.validate()?;
    let n = lattice.n_sites();
    check_state(rho_in, n)?;
    let sched = CompiledSchedule::new(gates, n, cfg.tau, cfg.r, cfg.exec)?;
    let window = cfg.probe_steps()?;
    let max_steps = cfg.max_steps();
    let mut state = StateBuffer::from_operator(rho_in.op());
    let mut scratch = vec![ZERO; 0];
    let mut times = vec![0.0];
    let mut values: Vec<Vec<f64>> = observables
        .iter()
        .map(|o| o.evaluate(rho_in, lattice).map(|v| vec![v]))
        .collect::<Result<_>>()?;
    let mut probe = rho_in.clone();
    for step in 1..=max_steps {
        sched.step(&mut state, &mut scratch, cfg.exec);
        let sample = step % cfg.stride == 0;
        let check = step % window == 0;
        if !(sample || check) {
            continue;
        }
        let rho = state.to_density();
        if sample {
            times.push(step as f64 * cfg.tau);
            for (o, v) in observables.iter().zip(values.iter_mut()) {
                v.push(o.evaluate(&rho, lattice)?);
            }
        }
        if check {
            let done = rho.trace_distance(&probe)? < cfg.delta_ss;
            probe = rho;
            if done {
                break;
            }
        }
    }
    observables
        .iter()
        .zip(values)
        .map(|(o, v)| {
            let mut ts = TimeSeries::new(o.name(), times.clone(), v)?;
            ts.r = Some(cfg.r);
            Ok(ts)
        })
        .collect()
}

pub fn record_trajectory(
    rho_in: &DensityMatrix,
    gates: &[GateGenerator],
    lattice: &QubitLattice,
    cfg: &EvolutionConfig,
    observable: Observable,
) -> Result<TimeSeries> {
    Ok(record_trajectories(rho_in, gates, lattice, cfg, &[observable])?.remove(0))
}
