// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::PI;

use oqs_core::hs::DensityMatrix;
use oqs_core::magnus::step_product;
use oqs_core::meanfield::{critical_point, sweep, MeanFieldConfig, PhaseCurve, SweepAxis};
use oqs_core::mitigation::{
    extrapolate_spectrum, fit_scaling, matrix_pencil_multi, nearest, richardson, scaling_extrapolate, Extrapolation,
    ModeCount, NoisyObservations, PencilOptions,
};
use oqs_core::noise::NoiseModel;
use oqs_core::par::{self, Exec};
use oqs_core::pauli::Pauli;
use oqs_core::spectral::{channel_fixed_point, relaxation_gap_from, spectrum, steady_state_exact};
use oqs_core::trotter::{evolve_to_steady, record_trajectories, EvolutionConfig, Observable, SteadyState, TimeSeries};
use oqs_core::xyz::{build_xyz, exact_lindbladian, magnetization, order_parameter, schedule_generator_sum, ModelSpec};
use oqs_core::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::config::{ExperimentConfig, ExperimentKind, InitialState};
use crate::error::CliError;
use crate::table::{col, Cell, Table};

type PointResult = Result<Vec<Vec<Cell>>, String>;

fn msg(e: oqs_core::Error) -> String {
    e.to_string()
}

/// Run the experiment named by `cfg.kind`. Configuration problems are
/// returned as errors; numerical failures are recorded per point.
pub fn run(cfg: &ExperimentConfig, seed: u64) -> Result<Table, CliError> {
    cfg.validate()?;
    match cfg.kind {
        ExperimentKind::SteadyState => steady_state(cfg, seed),
        ExperimentKind::GSweep => g_sweep(cfg, seed),
        ExperimentKind::RSweep => r_sweep(cfg, seed),
        ExperimentKind::MeanfieldPhase => meanfield_phase(cfg),
        ExperimentKind::Spectroscopy => spectroscopy(cfg, seed),
        ExperimentKind::MitigateCriticalPoint => mitigate_critical_point(cfg),
    }
}

pub fn initial_state(kind: InitialState, n: usize, seed: u64) -> DensityMatrix {
    let bloch: Vec<[f64; 3]> = match kind {
        InitialState::AllDown => return DensityMatrix::all_down(n),
        InitialState::AllUp => return DensityMatrix::all_up(n),
        InitialState::Tilted => (0..n)
            .map(|k| {
                let (th, ph) = (0.8 + k as f64, 1.1 * k as f64);
                [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]
            })
            .collect(),
        InitialState::RandomProduct => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n)
                .map(|_| {
                    let z: f64 = rng.gen_range(-1.0..=1.0);
                    let ph: f64 = rng.gen_range(0.0..2.0 * PI);
                    let s = (1.0 - z * z).max(0.0).sqrt();
                    [s * ph.cos(), s * ph.sin(), z]
                })
                .collect()
        }
    };
    let sites: Vec<DensityMatrix> =
        bloch.into_iter().map(|b| DensityMatrix::bloch(b).expect("unit Bloch vector")).collect();
    DensityMatrix::product(&sites).expect("product of qubit states")
}

/// Inner kernels run sequentially when the outer loop already spans several points.
fn inner_exec(points: usize) -> Exec {
    if points > 1 {
        Exec::Sequential
    } else {
        Exec::Parallel
    }
}

fn evolution(cfg: &ExperimentConfig, r: f64, exec: Exec) -> EvolutionConfig {
    let e = &cfg.evolution;
    EvolutionConfig {
        tau: e.tau,
        r,
        max_time: e.t_max,
        delta_ss: e.delta_ss,
        probe_window: e.probe_window,
        stride: e.stride,
        exec,
    }
}

fn engine(cfg: &ExperimentConfig, spec: &ModelSpec, r: f64, seed: u64, exec: Exec) -> oqs_core::Result<SteadyState> {
    let n = spec.lattice.n_sites();
    let gates = build_xyz(spec, &cfg.noise.model())?;
    let rho0 = initial_state(cfg.evolution.initial, n, seed);
    evolve_to_steady(&rho0, &gates, n, &evolution(cfg, r, exec))
}

/// Magnetization at the exact fixed point of one Trotter step.
fn fixed_point_m(cfg: &ExperimentConfig, spec: &ModelSpec, r: f64) -> oqs_core::Result<f64> {
    let gates = build_xyz(spec, &cfg.noise.model())?;
    let t = step_product(&gates, spec.lattice.n_sites(), cfg.evolution.tau, r)?;
    magnetization(&channel_fixed_point(&t)?, &spec.lattice)
}

fn use_oracle(cfg: &ExperimentConfig, spec: &ModelSpec) -> bool {
    spec.lattice.n_sites() <= cfg.evolution.oracle_max_sites
}

fn grid(cfg: &ExperimentConfig) -> Result<Vec<(Option<f64>, f64)>, CliError> {
    let gs = cfg.model.g_values()?;
    let rs = cfg.noise.rates()?;
    Ok(gs.iter().flat_map(|&g| rs.iter().map(move |&r| (g, r))).collect())
}

fn steady_state(cfg: &ExperimentConfig, seed: u64) -> Result<Table, CliError> {
    let mut table = Table::new(vec![
        col("g", "anisotropy (Jy - Jx)/2gamma"),
        col("r", "noise strength"),
        col("M", "engine steady-state magnetization"),
        col("m", "engine steady-state order parameter |<sigma^x>|"),
        col("steps", "Trotter steps taken"),
        col("converged", "trace-distance change below delta_ss"),
        col("residual", "trace distance between the last two probes"),
        col("M_fixed_point", "magnetization at the exact fixed point of one Trotter step"),
        col("M_exact", "magnetization at the null vector of the summed generators (tau -> 0)"),
        col("gap", "smallest nonzero |Re lambda| of the summed generators"),
    ]);
    let points = grid(cfg)?;
    let exec = inner_exec(points.len());
    let results = par::map(&points, Exec::Parallel, |&(g, r)| -> PointResult {
        let spec = cfg.model.spec(g).map_err(|e| e.to_string())?;
        let ss = engine(cfg, &spec, r, seed, exec).map_err(msg)?;
        let lat = &spec.lattice;
        let mut row: Vec<Cell> = vec![
            g.unwrap_or_else(|| spec.g()).into(),
            r.into(),
            magnetization(&ss.rho, lat).map_err(msg)?.into(),
            order_parameter(&ss.rho, lat).map_err(msg)?.into(),
            ss.steps.into(),
            ss.converged.into(),
            ss.residual.into(),
        ];
        if use_oracle(cfg, &spec) {
            let n = lat.n_sites();
            let gates = build_xyz(&spec, &cfg.noise.model()).map_err(msg)?;
            let l = schedule_generator_sum(&gates, n, r).map_err(msg)?;
            row.push(fixed_point_m(cfg, &spec, r).map_err(msg)?.into());
            row.push(magnetization(&steady_state_exact(&l).map_err(msg)?, lat).map_err(msg)?.into());
            row.push(spectrum(&l).and_then(|d| relaxation_gap_from(&d)).ok().into());
        } else {
            row.extend([Cell::Empty, Cell::Empty, Cell::Empty]);
        }
        Ok(vec![row])
    });
    for (i, res) in results.into_iter().enumerate() {
        table.push_point(i, res);
    }
    Ok(table)
}

fn c_label(c: f64) -> String {
    format!("M_c{c}")
}

fn g_sweep(cfg: &ExperimentConfig, seed: u64) -> Result<Table, CliError> {
    let (r0, cs) = cfg.noise.boosts()?;
    let order = (cs.len() - 1).min(2);
    let mut columns = vec![
        col("g", "anisotropy (Jy - Jx)/2gamma"),
        col("r0", "intrinsic noise strength"),
        col("M0", "noiseless magnetization (exact Trotter fixed point on small lattices, else engine)"),
        col("M0_method", "fixed-point or engine"),
        col("M_eff", "engine magnetization at r0"),
    ];
    columns.extend(cs[1..].iter().map(|&c| col(c_label(c), format!("engine magnetization at r = {c} r0"))));
    columns.extend([
        col("M_ex", format!("Richardson estimate of order {order}")),
        col("err_eff", "|M_eff - M0|"),
        col("err_ex", "|M_ex - M0|"),
    ]);
    let mut table = Table::new(columns);
    let gs = cfg.model.g_values()?;
    let exec = inner_exec(gs.len());
    let results = par::map(&gs, Exec::Parallel, |&g| -> PointResult {
        let spec = cfg.model.spec(g).map_err(|e| e.to_string())?;
        let lat = &spec.lattice;
        let m_at = |r: f64| -> Result<f64, String> {
            let ss = engine(cfg, &spec, r, seed, exec).map_err(msg)?;
            if !ss.converged {
                log::warn!("g = {:?}, r = {r}: not converged, residual {:.3e}", g, ss.residual);
            }
            magnetization(&ss.rho, lat).map_err(msg)
        };
        let (m0, method) = if use_oracle(cfg, &spec) {
            (fixed_point_m(cfg, &spec, 0.0).map_err(msg)?, "fixed-point")
        } else {
            (m_at(0.0)?, "engine")
        };
        let noisy = cs.iter().map(|c| m_at(c * r0)).collect::<Result<Vec<f64>, String>>()?;
        let obs = NoisyObservations::boosted("M", r0, &cs, noisy.clone()).map_err(msg)?;
        let ex = richardson(&obs, order).map_err(msg)?.estimate;
        let mut row: Vec<Cell> = vec![g.unwrap_or_else(|| spec.g()).into(), r0.into(), m0.into(), method.into(), noisy[0].into()];
        row.extend(noisy[1..].iter().map(|&m| Cell::from(m)));
        row.extend([ex.into(), (noisy[0] - m0).abs().into(), (ex - m0).abs().into()]);
        Ok(vec![row])
    });
    for (i, res) in results.into_iter().enumerate() {
        table.push_point(i, res);
    }
    Ok(table)
}

fn r_sweep(cfg: &ExperimentConfig, seed: u64) -> Result<Table, CliError> {
    let mut table = Table::new(vec![
        col("g", "anisotropy (Jy - Jx)/2gamma"),
        col("r", "noise strength"),
        col("M", "engine steady-state magnetization"),
        col("m", "engine steady-state order parameter |<sigma^x>|"),
        col("converged", "trace-distance change below delta_ss"),
        col("M_fixed_point", "magnetization at the exact fixed point of one Trotter step"),
    ]);
    let points = grid(cfg)?;
    let exec = inner_exec(points.len());
    let results = par::map(&points, Exec::Parallel, |&(g, r)| -> PointResult {
        let spec = cfg.model.spec(g).map_err(|e| e.to_string())?;
        let ss = engine(cfg, &spec, r, seed, exec).map_err(msg)?;
        let fp = if use_oracle(cfg, &spec) { Cell::from(fixed_point_m(cfg, &spec, r).map_err(msg)?) } else { Cell::Empty };
        Ok(vec![vec![
            g.unwrap_or_else(|| spec.g()).into(),
            r.into(),
            magnetization(&ss.rho, &spec.lattice).map_err(msg)?.into(),
            order_parameter(&ss.rho, &spec.lattice).map_err(msg)?.into(),
            ss.converged.into(),
            fp,
        ]])
    });
    for (i, res) in results.into_iter().enumerate() {
        table.push_point(i, res);
    }
    Ok(table)
}

fn mf_config(cfg: &ExperimentConfig) -> MeanFieldConfig {
    let m = &cfg.meanfield;
    MeanFieldConfig { magnus_order: m.magnus_order, tau: m.tau, t_max: m.t_max, ..MeanFieldConfig::default() }
}

fn mf_base(cfg: &ExperimentConfig) -> Result<ModelSpec, CliError> {
    if cfg.model.jy.is_some() {
        return Err(CliError::Config("mean-field experiments sweep g; set model.g instead of model.jy".into()));
    }
    cfg.model.spec(Some(0.0))
}

fn meanfield_phase(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let mut table = Table::new(vec![
        col("g", "anisotropy (Jy - Jx)/2gamma"),
        col("r", "noise strength"),
        col("sx", "<sigma^x> at the stable fixed point"),
        col("sy", "<sigma^y> at the stable fixed point"),
        col("sz", "<sigma^z> at the stable fixed point"),
        col("m", "|<sigma^x>|"),
        col("phase", "paramagnetic or ferromagnetic"),
        col("stable", "fixed point is linearly stable"),
        col("converged", "fixed-point residual below 1e-9"),
        col("residual", "norm of the mean-field velocity at the reported state"),
    ]);
    let base = mf_base(cfg)?;
    let noise = cfg.noise.model();
    let mfc = mf_config(cfg);
    let axis = cfg.meanfield.axis;
    let gs: Vec<f64> = cfg.model.g_values()?.into_iter().flatten().collect();
    let rs = cfg.noise.rates()?;
    let (grid, fixed) = match axis {
        SweepAxis::G => (gs, rs),
        SweepAxis::R => (rs, gs),
    };
    let [lo, hi] = match axis {
        SweepAxis::G => cfg.meanfield.bracket,
        SweepAxis::R => [grid[0], grid[grid.len() - 1]],
    };
    let results = par::map(&fixed, Exec::Parallel, |&f| {
        let curve = sweep(axis, &grid, f, &base, &noise, &mfc).map_err(msg)?;
        let crit = critical_point(axis, lo, hi, f, &base, &noise, &mfc, 1e-10);
        Ok::<_, String>((curve, crit))
    });
    let mut crits = Vec::new();
    for (i, (f, res)) in fixed.iter().zip(results).enumerate() {
        let rows = res.map(|(curve, crit)| {
            crits.push(match crit {
                Ok(c) => json!({ "fixed": f, "critical": c.value, "bracket": [c.bracket.0, c.bracket.1] }),
                Err(e) => json!({ "fixed": f, "critical": null, "error": e.to_string() }),
            });
            curve_rows(&curve)
        });
        table.push_point(i, rows);
    }
    table.summary = json!({ "axis": axis, "critical_points": crits });
    Ok(table)
}

fn curve_rows(curve: &PhaseCurve) -> Vec<Vec<Cell>> {
    curve
        .points
        .iter()
        .map(|p| {
            let (g, r) = match curve.axis {
                SweepAxis::G => (p.param, curve.fixed),
                SweepAxis::R => (curve.fixed, p.param),
            };
            let s = &p.point.state;
            let phase = serde_json::to_value(p.phase).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            vec![
                g.into(),
                r.into(),
                s.sx().into(),
                s.sy().into(),
                s.sz().into(),
                s.order().into(),
                phase.into(),
                p.point.stable.into(),
                p.point.converged.into(),
                p.point.residual.into(),
            ]
        })
        .collect()
}

fn mitigate_critical_point(cfg: &ExperimentConfig) -> Result<Table, CliError> {
    let mut table = Table::new(vec![
        col("source", "fit at one noise strength, or the extrapolation to r = 0"),
        col("r", "noise strength"),
        col("g_cri", "critical anisotropy from the scaling fit"),
        col("beta", "critical exponent from the scaling fit"),
        col("amplitude", "scaling amplitude A in |sx| = A |g - g_cri|^beta"),
        col("offset", "constant offset of the modified ansatz"),
        col("residual", "maximum relative residual of the fit"),
        col("n_points", "grid points inside the fit window"),
        col("g_cri_bisect", "critical anisotropy by bisection on the order parameter"),
    ]);
    let (r0, cs) = cfg.noise.boosts()?;
    let method = cfg.meanfield.extrapolation.unwrap_or(if cs.len() >= 3 {
        Extrapolation::Quadratic
    } else {
        Extrapolation::Linear
    });
    let base = mf_base(cfg)?;
    let noise = cfg.noise.model();
    let mfc = mf_config(cfg);
    let window = cfg.meanfield.window();
    let modified = !noise.is_z2_symmetric();
    let grid: Vec<f64> = cfg.model.g_values()?.into_iter().flatten().collect();
    let [lo, hi] = cfg.meanfield.bracket;
    let bisect = |r: f64| -> Cell {
        critical_point(SweepAxis::G, lo, hi, r, &base, &noise, &mfc, 1e-10).map(|c| c.value).ok().into()
    };

    let mut rates = vec![0.0];
    rates.extend(cs.iter().map(|c| c * r0));
    let mut results = par::map(&rates, Exec::Parallel, |&r| {
        if r == 0.0 {
            return Ok::<_, String>((None, bisect(r)));
        }
        let curve = sweep(SweepAxis::G, &grid, r, &base, &noise, &mfc).map_err(msg)?;
        Ok((Some(curve), bisect(r)))
    });
    let oracle = results.remove(0).map_or(Cell::Empty, |(_, o)| o);
    let mut curves = Vec::new();
    let mut failed = None;
    for (i, (&r, res)) in (1..).zip(rates[1..].iter().zip(results)) {
        let row = res.and_then(|(curve, oracle)| {
            let curve = curve.expect("noisy rates carry a curve");
            let fit = fit_scaling(&curve, window, modified).map_err(msg)?;
            curves.push((r, curve));
            Ok(vec![vec![
                "fit".into(),
                r.into(),
                fit.g_cri.into(),
                fit.beta.into(),
                fit.amplitude.into(),
                fit.offset.into(),
                fit.residual.into(),
                fit.n_points.into(),
                oracle,
            ]])
        });
        if let Err(e) = &row {
            failed.get_or_insert_with(|| format!("fit at r = {r} failed: {e}"));
        }
        table.push_point(i, row);
    }
    let ex = match failed {
        Some(e) => Err(e),
        None => scaling_extrapolate(&curves, window, modified, method).map_err(msg).map(|ex| {
            vec![vec![
                "extrapolated".into(),
                0.0.into(),
                ex.g_cri.into(),
                ex.beta.into(),
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
                oracle,
            ]]
        }),
    };
    table.push_point(rates.len(), ex);
    table.summary = json!({ "extrapolation": method, "modified_ansatz": modified, "window": [window.min, window.max] });
    Ok(table)
}

fn site_observables(n: usize) -> Vec<Observable> {
    (0..n)
        .flat_map(|site| [Pauli::X, Pauli::Y, Pauli::Z].map(|axis| Observable::Site { site, axis }))
        .collect()
}

fn spectroscopy(cfg: &ExperimentConfig, seed: u64) -> Result<Table, CliError> {
    let mut table = Table::new(vec![
        col("g", "anisotropy (Jy - Jx)/2gamma"),
        col("r", "noise strength; 0 for extrapolated rows"),
        col("source", "pencil (fitted at r) or extrapolated (to r = 0)"),
        col("index", "mode index within the point"),
        col("re", "Re lambda"),
        col("im", "Im lambda"),
        col("exact_re", "Re of the nearest exact eigenvalue"),
        col("exact_im", "Im of the nearest exact eigenvalue"),
        col("clipped", "extrapolated Re lambda clipped to zero"),
        col("ambiguous", "pairing between the two noise strengths was ambiguous"),
    ]);
    let (r0, cs) = cfg.noise.boosts()?;
    let sp = &cfg.spectroscopy;
    let opts = PencilOptions { sv_threshold: sp.sv_threshold, ..PencilOptions::default() };
    let count = sp.modes.map_or(ModeCount::Auto, ModeCount::Fixed);
    let skip = (sp.skip / (cfg.evolution.tau * cfg.evolution.stride as f64)).round() as usize;
    let gs = cfg.model.g_values()?;
    let exec = inner_exec(gs.len());

    let results = par::map(&gs, Exec::Parallel, |&g| -> PointResult {
        let spec = cfg.model.spec(g).map_err(|e| e.to_string())?;
        let lat = &spec.lattice;
        let n = lat.n_sites();
        let noise: NoiseModel = cfg.noise.model();
        let gates = build_xyz(&spec, &noise).map_err(msg)?;
        let rho0 = initial_state(cfg.evolution.initial, n, seed);
        let obs = site_observables(n);
        let oracle = use_oracle(cfg, &spec);
        let exact_at = |r: f64| -> Result<Vec<C64>, String> {
            let l = if r == 0.0 { exact_lindbladian(&spec) } else { schedule_generator_sum(&gates, n, r) };
            spectrum(&l.map_err(msg)?).map(|d| d.eigenvalues().to_vec()).map_err(msg)
        };
        let rates: Vec<f64> = cs.iter().map(|c| c * r0).collect();
        let mut rows = Vec::new();
        let mut fitted = Vec::new();
        for &r in &rates {
            let ts = record_trajectories(&rho0, &gates, lat, &evolution(cfg, r, exec), &obs).map_err(msg)?;
            if ts[0].len() <= skip + 2 {
                return Err(format!("r = {r}: only {} samples, {skip} skipped", ts[0].len()));
            }
            let cut = ts
                .iter()
                .map(|t| TimeSeries::new(t.observable.clone(), t.times[skip..].to_vec(), t.values[skip..].to_vec()))
                .collect::<oqs_core::Result<Vec<_>>>()
                .map_err(msg)?;
            let refs: Vec<&TimeSeries> = cut.iter().collect();
            let lambdas = matrix_pencil_multi(&refs, count, &opts).map_err(msg)?.lambdas;
            let exact = if oracle { Some(exact_at(r)?) } else { None };
            for (k, l) in lambdas.iter().enumerate() {
                rows.push(mode_row(g.unwrap_or_else(|| spec.g()), r, "pencil", k, *l, exact.as_deref(), false, false));
            }
            fitted.push((r, lambdas));
        }
        if fitted.len() >= 2 {
            let (ra, la) = &fitted[0];
            let (rb, lb) = &fitted[1];
            let ex = extrapolate_spectrum(*ra, la, *rb, lb, sp.pairing_radius).map_err(msg)?;
            let exact = if oracle { Some(exact_at(0.0)?) } else { None };
            for (k, p) in ex.pairs.iter().enumerate() {
                rows.push(mode_row(g.unwrap_or_else(|| spec.g()), 0.0, "extrapolated", k, p.extrapolated, exact.as_deref(), p.clipped, p.ambiguous));
            }
        }
        Ok(rows)
    });
    for (i, res) in results.into_iter().enumerate() {
        table.push_point(i, res);
    }
    Ok(table)
}

#[allow(clippy::too_many_arguments)]
fn mode_row(g: f64, r: f64, source: &str, k: usize, l: C64, exact: Option<&[C64]>, clipped: bool, ambiguous: bool) -> Vec<Cell> {
    let near = exact.and_then(|pool| nearest(l, pool));
    vec![
        g.into(),
        r.into(),
        source.into(),
        k.into(),
        l.re.into(),
        l.im.into(),
        near.map(|z| z.re).into(),
        near.map(|z| z.im).into(),
        clipped.into(),
        ambiguous.into(),
    ]
}
