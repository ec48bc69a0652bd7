use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use powerlaw_ghz::{encode, EncodeRequest, Gate, PhaseCoupling, ProtocolOptions};
use powerlaw_ghz_bench::chain;

fn evolve_phase(c: &mut Criterion) {
    let mut group = c.benchmark_group("evolve_phase");
    for (levels, q) in [(3, 2), (2, 3)] {
        let fx = chain(levels, q, 2.5);
        let parts = fx.lattice.full_region().partition(2).unwrap();
        let coupling = PhaseCoupling::for_merge(&fx.lattice, &parts, 2, 2.5).unwrap();
        let t2 = fx.plan.root.t2;
        let id = BenchmarkId::from_parameter(format!("n{}_q{q}", fx.input.n()));
        group.bench_function(id, |b| {
            b.iter_batched_ref(
                || fx.input.clone(),
                |s| s.evolve_phase(&coupling, black_box(t2)).unwrap(),
                BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

fn gates(c: &mut Criterion) {
    let fx = chain(3, 2, 2.5);
    let h = Gate::hadamard(7);
    c.bench_function("hadamard_n16", |b| {
        b.iter_batched_ref(|| fx.input.clone(), |s| s.apply_gate(&h).unwrap(), BatchSize::LargeInput)
    });
    c.bench_function("cnot_n16", |b| {
        b.iter_batched_ref(
            || fx.input.clone(),
            |s| s.apply_controlled_increment(0, 9).unwrap(),
            BatchSize::LargeInput,
        )
    });
}

fn encode_chain(c: &mut Criterion) {
    let mut group = c.benchmark_group("encode");
    group.sample_size(20);
    for verify in [true, false] {
        let fx = chain(3, 2, 2.5);
        let req = EncodeRequest::new(fx.lattice, fx.lattice.full_region(), 0);
        let opts = ProtocolOptions {
            verify_steps: verify,
            check_merge_phase: verify,
            ..Default::default()
        };
        let name = if verify { "n16_verified" } else { "n16_unverified" };
        group.bench_function(name, |b| {
            b.iter_batched_ref(
                || fx.input.clone(),
                |s| encode(s, &req, &fx.plan, &opts).unwrap(),
                BatchSize::LargeInput,
            )
        });
    }
    group.finish();
}

criterion_group!(benches, evolve_phase, gates, encode_chain);
criterion_main!(benches);
