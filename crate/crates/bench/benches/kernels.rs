use criterion::{black_box, criterion_group, criterion_main, Criterion};
use rvmret_core::characteristics::integrate_characteristic;
use rvmret_core::density::FnField;
use rvmret_core::lightcone::{eval_i, ConeIntegralQuery, Family};
use rvmret_core::retarded::kernel_eval;
use rvmret_core::{FieldValue, QuadratureSpec, Vec3, ZeroField};

fn kernels(c: &mut Criterion) {
    let omega = Vec3::new(0.6, 0.0, 0.8);
    let p = Vec3::new(0.3, -0.2, 0.5);
    c.bench_function("kernel_eval", |b| b.iter(|| kernel_eval(black_box(omega), black_box(p)).unwrap()));

    let quad = QuadratureSpec::default();
    let field = FnField(|t: f64, x: Vec3| {
        let g = 0.1 * (-(x.norm2() + t * t) / 8.0).exp();
        FieldValue::new(Vec3::new(g, 0.0, 0.0), Vec3::new(0.0, 0.0, g))
    });
    let x = Vec3::new(0.2, 0.1, 0.0);
    c.bench_function("characteristic_free", |b| {
        b.iter(|| integrate_characteristic(3.0, black_box(x), p, &ZeroField, 0.0, &quad).unwrap())
    });
    c.bench_function("characteristic_smooth_field", |b| {
        b.iter(|| integrate_characteristic(3.0, black_box(x), p, &field, 0.0, &quad).unwrap())
    });

    let q = ConeIntegralQuery { family: Family::I1, q: 5.0, t: 3.0, x_norm: 2.0 };
    c.bench_function("cone_integral_i1", |b| b.iter(|| eval_i(black_box(&q)).unwrap()));
}

criterion_group!(benches, kernels);
criterion_main!(benches);
