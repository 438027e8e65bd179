use criterion::{criterion_group, criterion_main, Criterion};

use qbrst_core::glq::{build_instance, nf_poly};
use qbrst_core::qla::derive_from_glq;
use qbrst_core::wedge::build_tower;

fn normal_form_of_the_squared_charge(c: &mut Criterion) {
    let inst = build_instance(1).expect("N = 1 instance builds");
    let q = inst.build_q().expect("charge assembles");
    let qq = q.mul(&q);
    c.bench_function("normal_form squared charge N=1", |b| {
        b.iter(|| nf_poly(&inst.rels, &qq))
    });
}

fn antisymmetrizer_tower(c: &mut Criterion) {
    let qla = derive_from_glq(2).expect("exchange solves are consistent");
    let sigma = qla.sigma_expr(1, 2);
    let mut g = c.benchmark_group("antisymmetrizer");
    g.sample_size(10);
    g.bench_function("tower to height, braid dim 4", |b| {
        b.iter(|| build_tower(&sigma, 6).expect("tower builds"))
    });
    g.finish();
}

fn instance_construction(c: &mut Criterion) {
    let mut g = c.benchmark_group("build_instance");
    g.sample_size(10);
    g.bench_function("N=2 exchange derivation", |b| {
        b.iter(|| build_instance(2).expect("instance builds"))
    });
    g.finish();
}

criterion_group!(
    benches,
    normal_form_of_the_squared_charge,
    antisymmetrizer_tower,
    instance_construction
);
criterion_main!(benches);
