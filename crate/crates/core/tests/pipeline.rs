// SPDX-License-Identifier: Apache-2.0

use oqs_core::hs::DensityMatrix;
use oqs_core::lattice::QubitLattice;
use oqs_core::mitigation::{matrix_pencil, ModeCount, PencilOptions};
use oqs_core::noise::NoiseModel;
use oqs_core::pauli::Pauli;
use oqs_core::trotter::{record_trajectory, EvolutionConfig, Observable};
use oqs_core::xyz::{build_xyz, ModelSpec};

fn decaying_qubit() -> (QubitLattice, Vec<oqs_core::xyz::GateGenerator>) {
    let lat = QubitLattice::chain(1).unwrap();
    let spec = ModelSpec::decay_only(lat.clone(), 1.0).unwrap();
    (lat.clone(), build_xyz(&spec, &NoiseModel::none()).unwrap())
}

#[test]
fn amplitude_damping_trajectory_is_analytic() {
    let (lat, gates) = decaying_qubit();
    let cfg = EvolutionConfig { tau: 0.01, max_time: 5.0, delta_ss: 1e-300, stride: 5, ..Default::default() };
    let obs = Observable::Site { site: 0, axis: Pauli::Z };
    let ts = record_trajectory(&DensityMatrix::all_up(1), &gates, &lat, &cfg, obs).unwrap();
    for (t, v) in ts.times.iter().zip(&ts.values) {
        assert!((v - (2.0 * (-t).exp() - 1.0)).abs() < 1e-12, "t = {t}: {v}");
    }
}

#[test]
fn pencil_reads_the_decay_rate_off_a_simulated_trajectory() {
    let (lat, gates) = decaying_qubit();
    let cfg = EvolutionConfig { tau: 0.01, max_time: 6.0, delta_ss: 1e-300, stride: 10, ..Default::default() };
    let obs = Observable::Site { site: 0, axis: Pauli::Z };
    let ts = record_trajectory(&DensityMatrix::all_up(1), &gates, &lat, &cfg, obs).unwrap();
    let mut l = matrix_pencil(&ts, ModeCount::Auto, &PencilOptions::default()).unwrap().lambdas();
    l.sort_by(|a, b| b.re.total_cmp(&a.re));
    assert_eq!(l.len(), 2, "{l:?}");
    assert!(l[0].norm() < 1e-8);
    assert!((l[1].re + 1.0).abs() < 1e-8 && l[1].im.abs() < 1e-8);
}

#[test]
fn trace_observable_is_constant() {
    let (lat, gates) = decaying_qubit();
    let cfg = EvolutionConfig { tau: 0.05, max_time: 3.0, delta_ss: 1e-300, ..Default::default() };
    let ts = record_trajectory(&DensityMatrix::maximally_mixed(2), &gates, &lat, &cfg, Observable::Trace).unwrap();
    assert!(ts.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
}
