// SPDX-License-Identifier: Apache-2.0

//! Experiment configuration files (TOML). Times are in units of `1/γ`,
//! couplings and rates in units of `γ`.

use std::path::{Path, PathBuf};

use oqs_core::lattice::{Boundary, QubitLattice};
use oqs_core::meanfield::SweepAxis;
use oqs_core::mitigation::{Extrapolation, FitWindow};
use oqs_core::noise::{Granularity, NoiseKind, NoiseModel};
use oqs_core::xyz::ModelSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    SteadyState,
    GSweep,
    RSweep,
    MeanfieldPhase,
    Spectroscopy,
    MitigateCriticalPoint,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::SteadyState => "steady-state",
            ExperimentKind::GSweep => "g-sweep",
            ExperimentKind::RSweep => "r-sweep",
            ExperimentKind::MeanfieldPhase => "meanfield-phase",
            ExperimentKind::Spectroscopy => "spectroscopy",
            ExperimentKind::MitigateCriticalPoint => "mitigate-critical-point",
        }
    }
}

/// A scalar, an explicit list, or an inline range `{ start, stop, step }`
/// (inclusive of `stop` up to rounding) or `{ start, stop, n }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Range {
    Value(f64),
    List(Vec<f64>),
    Step { start: f64, stop: f64, step: f64 },
    Count { start: f64, stop: f64, n: usize },
}

impl Range {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        let v = match self {
            Range::Value(x) => vec![*x],
            Range::List(v) => v.clone(),
            Range::Step { start, stop, step } => {
                if !(*step > 0.0) || stop < start {
                    return Err(CliError::Config(format!("range needs step > 0 and stop >= start, got {self:?}")));
                }
                let n = ((stop - start) / step + 1e-9).floor() as usize;
                (0..=n).map(|k| start + k as f64 * step).collect()
            }
            Range::Count { start, stop, n } => match n {
                0 => return Err(CliError::Config("range with n = 0".into())),
                1 => vec![*start],
                _ => (0..*n).map(|k| start + (stop - start) * k as f64 / (*n - 1) as f64).collect(),
            },
        };
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            return Err(CliError::Config(format!("range {self:?} is empty or not finite")));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Linear lattice size; overridden by `rows`/`cols`.
    #[serde(rename = "L", default)]
    pub l: Option<usize>,
    #[serde(default)]
    pub rows: Option<usize>,
    #[serde(default)]
    pub cols: Option<usize>,
    #[serde(default = "default_jx")]
    pub jx: f64,
    /// Explicit `Jy`; excludes `g`.
    #[serde(default)]
    pub jy: Option<f64>,
    #[serde(default = "one")]
    pub jz: f64,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default)]
    pub boundary: BoundaryConfig,
    /// Anisotropy `g = |Jx − Jy| / 2γ`, giving `Jy = Jx + 2gγ`.
    #[serde(default)]
    pub g: Option<Range>,
}

fn default_jx() -> f64 {
    oqs_core::xyz::DEFAULT_JX
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryConfig {
    #[default]
    Open,
    Periodic,
}

impl ModelConfig {
    pub fn lattice(&self) -> Result<QubitLattice, CliError> {
        let rows = self.rows.or(self.l).ok_or_else(|| CliError::Config("model: set L or rows/cols".into()))?;
        let cols = self.cols.or(self.l).unwrap_or(rows);
        let b = match self.boundary {
            BoundaryConfig::Open => Boundary::Open,
            BoundaryConfig::Periodic => Boundary::Periodic,
        };
        QubitLattice::new(rows, cols, b).map_err(CliError::config)
    }

    /// Values of `g` to run; a single implicit point when `jy` is explicit.
    pub fn g_values(&self) -> Result<Vec<Option<f64>>, CliError> {
        match (&self.g, self.jy) {
            (Some(_), Some(_)) => Err(CliError::Config("model: give either g or jy, not both".into())),
            (Some(g), None) => Ok(g.values()?.into_iter().map(Some).collect()),
            (None, Some(_)) => Ok(vec![None]),
            (None, None) => Err(CliError::Config("model: g (or jy) is required".into())),
        }
    }

    pub fn spec(&self, g: Option<f64>) -> Result<ModelSpec, CliError> {
        let jy = match g {
            Some(g) => self.jx + 2.0 * g * self.gamma,
            None => self.jy.expect("jy is set when g is absent"),
        };
        ModelSpec::new(self.jx, jy, self.jz, self.gamma, self.lattice()?).map_err(CliError::config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialState {
    #[default]
    AllDown,
    AllUp,
    /// Site-dependent tilted product state.
    Tilted,
    /// Product of Haar-random pure qubit states drawn from the seed.
    RandomProduct,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolutionSection {
    pub tau: f64,
    /// Maximum evolution time `T`.
    #[serde(rename = "T")]
    pub t_max: f64,
    pub delta_ss: f64,
    pub probe_window: f64,
    pub stride: usize,
    pub initial: InitialState,
    /// Use the dense exact oracle for the noiseless reference when the
    /// lattice has at most this many sites.
    pub oracle_max_sites: usize,
}

impl Default for EvolutionSection {
    fn default() -> Self {
        Self {
            tau: 0.01,
            t_max: 200.0,
            delta_ss: 1e-9,
            probe_window: 1.0,
            stride: 10,
            initial: InitialState::AllDown,
            oracle_max_sites: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default = "default_kind")]
    pub kind: NoiseKind,
    #[serde(default)]
    pub granularity: Granularity,
    #[serde(default)]
    pub loosened_pauli_set: bool,
    /// Intrinsic error rate `r₀`.
    #[serde(default)]
    pub r0: Option<f64>,
    /// Boost factors; `r = c·r₀`.
    #[serde(default)]
    pub c: Option<Vec<f64>>,
    /// Explicit error rates (r-sweep, meanfield-phase).
    #[serde(default)]
    pub r: Option<Range>,
}

fn default_kind() -> NoiseKind {
    NoiseKind::Depolarizing
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self { kind: default_kind(), granularity: Granularity::default(), loosened_pauli_set: false, r0: None, c: None, r: None }
    }
}

impl NoiseSection {
    pub fn model(&self) -> NoiseModel {
        NoiseModel { kind: self.kind, granularity: self.granularity, loosened_pauli_set: self.loosened_pauli_set }
    }

    /// `(r₀, c list)` with `c₁ = 1 < c₂ < …`.
    pub fn boosts(&self) -> Result<(f64, Vec<f64>), CliError> {
        let r0 = self.r0.ok_or_else(|| CliError::Config("noise.r0 is required".into()))?;
        if !(r0 > 0.0) {
            return Err(CliError::Config(format!("noise.r0 must be positive, got {r0}")));
        }
        let c = self.c.clone().unwrap_or_else(|| vec![1.0, 2.0]);
        if c.first() != Some(&1.0) || c.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Config(format!("noise.c must start at 1 and increase, got {c:?}")));
        }
        Ok((r0, c))
    }

    /// Noise rates: explicit `r`, else `c·r₀`, else `0`.
    pub fn rates(&self) -> Result<Vec<f64>, CliError> {
        if let Some(r) = &self.r {
            let v = r.values()?;
            if let Some(bad) = v.iter().find(|x| **x < 0.0) {
                return Err(CliError::Config(format!("noise.r must be non-negative, got {bad}")));
            }
            return Ok(v);
        }
        if self.r0.is_some() {
            let (r0, c) = self.boosts()?;
            return Ok(c.iter().map(|ci| ci * r0).collect());
        }
        Ok(vec![0.0])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeanfieldSection {
    pub axis: SweepAxis,
    pub magnus_order: usize,
    pub tau: f64,
    pub t_max: f64,
    /// Fit window `|g − g_cri| ∈ [min, max]`.
    pub window: [f64; 2],
    pub extrapolation: Option<Extrapolation>,
    /// Bisection bracket for the noiseless critical point.
    pub bracket: [f64; 2],
}

impl Default for MeanfieldSection {
    fn default() -> Self {
        let w = FitWindow::default();
        Self {
            axis: SweepAxis::G,
            magnus_order: 1,
            tau: 0.0,
            t_max: 5000.0,
            window: [w.min, w.max],
            extrapolation: None,
            bracket: [0.0, 0.5],
        }
    }
}

impl MeanfieldSection {
    pub fn window(&self) -> FitWindow {
        FitWindow { min: self.window[0], max: self.window[1] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectroscopySection {
    /// Samples before `skip` are dropped as transient.
    pub skip: f64,
    pub modes: Option<usize>,
    pub sv_threshold: f64,
    pub pairing_radius: f64,
}

impl Default for SpectroscopySection {
    fn default() -> Self {
        Self { skip: 5.0, modes: None, sv_threshold: 1e-8, pairing_radius: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub model: ModelConfig,
    #[serde(default)]
    pub evolution: EvolutionSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub meanfield: MeanfieldSection,
    #[serde(default)]
    pub spectroscopy: SpectroscopySection,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.model.lattice()?;
        for g in self.model.g_values()? {
            self.model.spec(g)?;
        }
        self.noise.rates()?;
        if !(self.evolution.tau > 0.0) || !(self.evolution.delta_ss > 0.0) || self.evolution.stride == 0 {
            return Err(CliError::Config("evolution: tau, delta_ss and stride must be positive".into()));
        }
        match self.kind {
            ExperimentKind::GSweep | ExperimentKind::Spectroscopy | ExperimentKind::MitigateCriticalPoint => {
                self.noise.boosts()?;
            }
            _ => {}
        }
        if self.kind == ExperimentKind::MitigateCriticalPoint && self.noise.c.as_ref().map_or(2, Vec::len) > 3 {
            return Err(CliError::Config("mitigate-critical-point supports at most three boost factors".into()));
        }
        let [wmin, wmax] = self.meanfield.window;
        if !(wmin >= 0.0 && wmax > wmin) {
            return Err(CliError::Config(format!("meanfield.window must satisfy 0 <= min < max, got {:?}", self.meanfield.window)));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form of the parsed configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&canonical).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
kind = "steady-state"
[model]
L = 1
jx = 0.0
jy = 0.0
jz = 0.0
"#;

    #[test]
    fn parses_minimal() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.kind, ExperimentKind::SteadyState);
        assert_eq!(cfg.model.g_values().unwrap(), vec![None]);
    }

    #[test]
    fn rejects_unknown_key() {
        let err = ExperimentConfig::parse(&format!("{MINIMAL}bogus = 1\n")).unwrap_err();
        assert!(matches!(err, CliError::Config(m) if m.contains("bogus")));
    }

    #[test]
    fn ranges_expand() {
        let r = Range::Step { start: 0.025, stop: 0.25, step: 0.025 };
        let v = r.values().unwrap();
        assert_eq!(v.len(), 10);
        assert!((v[9] - 0.25).abs() < 1e-12);
        assert_eq!(Range::Count { start: 0.0, stop: 1.0, n: 5 }.values().unwrap()[2], 0.5);
    }

    #[test]
    fn inline_range_syntax() {
        let text = r#"
kind = "g-sweep"
[model]
L = 2
g = { start = 0.025, stop = 0.1, step = 0.025 }
[noise]
r0 = 0.01
c = [1, 2]
"#;
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.model.g_values().unwrap().len(), 4);
    }

    #[test]
    fn hash_ignores_formatting() {
        let a = ExperimentConfig::parse(MINIMAL).unwrap();
        let b = ExperimentConfig::parse(&MINIMAL.replace("L = 1", "L   =   1")).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn g_and_jy_conflict() {
        let text = MINIMAL.replace("jz = 0.0", "jz = 0.0\ng = 0.1");
        assert!(ExperimentConfig::parse(&text).is_err());
    }
}
