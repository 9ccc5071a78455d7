// SPDX-License-Identifier: Apache-2.0

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use oqs_core::hs::{random_channel, DensityMatrix, LocalChannel, StateBuffer};
use oqs_core::lattice::{Boundary, QubitLattice};
use oqs_core::noise::NoiseModel;
use oqs_core::par::Exec;
use oqs_core::trotter::CompiledSchedule;
use oqs_core::xyz::{build_xyz, ModelSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const POLICIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn local_channel(c: &mut Criterion) {
    let mut group = c.benchmark_group("local_channel");
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let ch = random_channel(2, 3, &mut rng).unwrap();
    for n in [6, 8, 10] {
        let lc = LocalChannel::new(&ch, &[1, n - 2], n).unwrap();
        let rho = DensityMatrix::random(1 << n, &mut rng);
        for (name, exec) in POLICIES {
            let mut state = StateBuffer::from_operator(rho.op());
            let mut scratch = Vec::new();
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, _| {
                b.iter(|| lc.apply(&mut state, &mut scratch, exec));
            });
        }
    }
    group.finish();
}

fn trotter_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("trotter_step");
    group.sample_size(10);
    for (l, boundary) in [(2, Boundary::Open), (3, Boundary::Periodic)] {
        let spec = ModelSpec::from_g(QubitLattice::square(l, boundary).unwrap(), 0.1).unwrap();
        let n = spec.lattice.n_sites();
        let gates = build_xyz(&spec, &NoiseModel::depolarizing()).unwrap();
        let sched = CompiledSchedule::new(&gates, n, 0.01, 0.01, Exec::Parallel).unwrap();
        for (name, exec) in POLICIES {
            let mut state = StateBuffer::from_operator(DensityMatrix::all_down(n).op());
            let mut scratch = Vec::new();
            group.bench_with_input(BenchmarkId::new(name, format!("{l}x{l}")), &l, |b, _| {
                b.iter(|| sched.step(&mut state, &mut scratch, exec));
            });
        }
    }
    group.finish();
}

criterion_group!(benches, local_channel, trotter_step);
criterion_main!(benches);
