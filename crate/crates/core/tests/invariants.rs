// SPDX-License-Identifier: Apache-2.0

use oqs_core::hs::{embed_superop, lindbladian_matrix, random_channel, DenseOperator, DensityMatrix, LocalChannel, StateBuffer};
use oqs_core::lattice::{Boundary, QubitLattice};
use oqs_core::linalg::{self, CMat};
use oqs_core::magnus::step_product;
use oqs_core::meanfield::{integrate, MeanFieldConfig, MeanFieldSystem};
use oqs_core::mitigation::{matrix_pencil, richardson, synthesize, ModeCount, NoisyObservations, PencilOptions};
use oqs_core::noise::{NoiseKind, NoiseModel};
use oqs_core::par::Exec;
use oqs_core::spectral::spectrum;
use oqs_core::trotter::CompiledSchedule;
use oqs_core::xyz::{build_xyz, z2_defect, ModelSpec};
use oqs_core::C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig { cases: n, ..ProptestConfig::default() }
}

fn shuffled_sites(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut s: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        s.swap(i, rng.gen_range(0..=i));
    }
    s.truncate(k);
    s
}

fn random_matrix(d: usize, rng: &mut ChaCha8Rng) -> CMat {
    CMat::from_fn(d, d, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

fn chain(g: f64) -> ModelSpec {
    ModelSpec::from_g(QubitLattice::chain(2).unwrap(), g).unwrap()
}

proptest! {
    #![proptest_config(cases(128))]

    #[test]
    fn local_kernel_matches_dense_embedding(seed in any::<u64>(), n in 2usize..=4, k in 1usize..=2, kraus in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = random_channel(k, kraus, &mut rng).unwrap();
        let sites = shuffled_sites(n, k, &mut rng);
        let rho = DensityMatrix::random(1 << n, &mut rng);
        let lc = LocalChannel::new(&ch, &sites, n).unwrap();
        let mut state = StateBuffer::from_operator(rho.op());
        lc.apply(&mut state, &mut Vec::new(), Exec::Sequential);
        let dense = embed_superop(&ch, &sites, n).unwrap().apply(rho.op());
        prop_assert!(linalg::max_abs_diff(state.to_operator().mat(), dense.mat()) < 1e-12);
    }

    #[test]
    fn parallel_and_sequential_kernels_agree_bitwise(seed in any::<u64>(), k in 1usize..=2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 6;
        let ch = random_channel(k, 2, &mut rng).unwrap();
        let sites = shuffled_sites(n, k, &mut rng);
        let rho = DensityMatrix::random(1 << n, &mut rng);
        let lc = LocalChannel::new(&ch, &sites, n).unwrap();
        let (mut a, mut b) = (StateBuffer::from_operator(rho.op()), StateBuffer::from_operator(rho.op()));
        lc.apply(&mut a, &mut Vec::new(), Exec::Sequential);
        lc.apply(&mut b, &mut Vec::new(), Exec::Parallel);
        prop_assert_eq!(a.data(), b.data());
    }

    #[test]
    fn noisy_step_keeps_states_physical(
        seed in any::<u64>(),
        g in 0.0f64..0.3,
        r in 0.0f64..0.1,
        tau in 0.001f64..0.05,
        kind in prop_oneof![Just(NoiseKind::Depolarizing), Just(NoiseKind::RandomPauli), Just(NoiseKind::TransverseDamping)],
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = ModelSpec::from_g(QubitLattice::square(2, Boundary::Open).unwrap(), g).unwrap();
        let gates = build_xyz(&spec, &NoiseModel::new(kind)).unwrap();
        let sched = CompiledSchedule::new(&gates, 4, tau, r, Exec::Sequential).unwrap();
        let mut state = StateBuffer::from_operator(DensityMatrix::random(16, &mut rng).op());
        let mut scratch = Vec::new();
        for _ in 0..5 {
            sched.step(&mut state, &mut scratch, Exec::Sequential);
        }
        prop_assert!((state.trace() - C64::from(1.0)).norm() < 1e-12);
        let rho = DensityMatrix::new_unchecked(state.to_operator());
        prop_assert!(rho.op().hermitian_defect() < 1e-12);
        prop_assert!(rho.min_eigenvalue().unwrap() > -1e-10);
    }

    #[test]
    fn symmetric_noise_commutes_with_global_z(g in 0.0f64..0.3, r in 0.0f64..0.1, tau in 0.001f64..0.05, random_pauli in any::<bool>()) {
        let kind = if random_pauli { NoiseKind::RandomPauli } else { NoiseKind::Depolarizing };
        let gates = build_xyz(&chain(g), &NoiseModel::new(kind)).unwrap();
        let t = step_product(&gates, 2, tau, r).unwrap();
        prop_assert!(z2_defect(&t) < 1e-10);
    }

    #[test]
    fn mean_field_stays_in_bloch_ball(
        g in 0.0f64..0.3,
        r in 0.0f64..0.05,
        th in 0.0f64..std::f64::consts::PI,
        ph in 0.0f64..std::f64::consts::TAU,
        len in 0.0f64..=1.0,
    ) {
        let spec = ModelSpec::from_g(QubitLattice::square(3, Boundary::Periodic).unwrap(), g).unwrap();
        let cfg = MeanFieldConfig { t_max: 20.0, ..MeanFieldConfig::default() };
        let sys = MeanFieldSystem::new(&spec, &NoiseModel::depolarizing(), r, &cfg).unwrap();
        let s0 = [len * th.sin() * ph.cos(), len * th.sin() * ph.sin(), len * th.cos()];
        let run = integrate(&sys, s0, &cfg);
        prop_assert!(run.max_norm <= 1.0 + 1e-8, "max |s| = {}", run.max_norm);
    }

    #[test]
    fn random_lindbladians_are_biorthonormal(seed in any::<u64>(), n in 1usize..=2, jumps in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 1 << n;
        let a = random_matrix(d, &mut rng);
        let h = DenseOperator::hermitian(&a + linalg::adjoint(&a)).unwrap();
        let js: Vec<(DenseOperator, f64)> = (0..jumps)
            .map(|_| (DenseOperator::new(random_matrix(d, &mut rng)).unwrap(), rng.gen_range(0.1..1.0)))
            .collect();
        let l = lindbladian_matrix(&h, &js).unwrap();
        prop_assert!(l.trace_annihilation_defect() < 1e-10);
        let dec = spectrum(&l).unwrap();
        prop_assert!(dec.biorthonormality_residual() < 1e-8);
        prop_assert!(dec.eigenvalues().iter().all(|z| z.re < 1e-9));
    }

    #[test]
    fn richardson_is_exact_on_polynomials(a in -1.0f64..1.0, b in -10.0f64..10.0, c in -10.0f64..10.0, r0 in 0.001f64..0.05) {
        let lin = NoisyObservations::boosted("M", r0, &[1.0, 2.0], vec![a + b * r0, a + 2.0 * b * r0]).unwrap();
        prop_assert!((richardson(&lin, 1).unwrap().estimate - a).abs() < 1e-10);
        let f = |x: f64| a + b * x + c * x * x;
        let quad = NoisyObservations::boosted("M", r0, &[1.0, 2.0, 3.0], vec![f(r0), f(2.0 * r0), f(3.0 * r0)]).unwrap();
        prop_assert!((richardson(&quad, 2).unwrap().estimate - a).abs() < 1e-9);
    }

    #[test]
    fn pencil_recovers_damped_oscillations(
        amp in 0.5f64..2.0,
        rate in 0.1f64..1.0,
        freq in 0.5f64..3.0,
        slow in 0.01f64..0.08,
    ) {
        let (z, w) = (C64::new(-rate, freq), C64::new(-slow, 0.0));
        let modes = [(C64::from(amp / 2.0), z), (C64::from(amp / 2.0), z.conj()), (C64::from(1.0), w)];
        let ts = synthesize(&modes, 0.05, 160).unwrap();
        let m = matrix_pencil(&ts, ModeCount::Auto, &PencilOptions::default()).unwrap();
        prop_assert_eq!(m.len(), 3);
        for (_, l) in modes {
            let err = m.lambdas().iter().map(|x| (x - l).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(err < 1e-6, "{l}: error {err}");
        }
    }
}
