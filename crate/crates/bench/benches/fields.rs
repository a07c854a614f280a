use criterion::{black_box, criterion_group, criterion_main, Criterion};
use rvmret_core::iterates::{FreeStreaming, IterateDensity};
use rvmret_core::picard::{iterate_density, synthetic_table};
use rvmret_core::retarded::{field_raw, field_repr};
use rvmret_core::{FieldValue, GridSpec, InitialData, PhaseDensity, QuadratureSpec, Vec3};
use std::sync::Arc;

fn fields(c: &mut Criterion) {
    let initial = Arc::new(InitialData::cubic(1.0, 1e-4).unwrap());
    let quad = QuadratureSpec { angular_theta: 6, angular_phi: 8, momentum_nodes: 6, ..Default::default() };
    let free = IterateDensity::Free(FreeStreaming::new(initial.clone(), quad.momentum_slack));
    let x = Vec3::new(1.0, 0.5, -0.5);

    let mut g = c.benchmark_group("fields");
    g.sample_size(10);
    g.bench_function("field_repr_free", |b| b.iter(|| field_repr(1.0, black_box(x), &free, None, &quad).unwrap()));
    g.bench_function("field_raw_free", |b| b.iter(|| field_raw(1.0, black_box(x), &free, &quad).unwrap()));

    let grid = GridSpec { t_min: -4.0, t_max: 4.0, half_width: 6.0, n_t: 5, n_x: 5 };
    let table = Arc::new(synthetic_table(&grid, |t, y| {
        let s = 1e-6 * (-(y.norm2() + t * t) / 8.0).exp();
        FieldValue::new(Vec3::new(s, 0.0, 0.0), Vec3::new(0.0, s, 0.0))
    }));
    let transported = iterate_density(2, &initial, Some(&table), &quad);
    g.bench_function("density_eval_transported", |b| {
        b.iter(|| transported.eval(2.0, black_box(Vec3::new(0.5, 0.0, 0.0)), Vec3::new(0.1, 0.0, 0.0)))
    });
    g.bench_function("field_repr_transported", |b| {
        b.iter(|| field_repr(1.0, black_box(x), &transported, transported.force(), &quad).unwrap())
    });
    g.finish();
}

criterion_group!(benches, fields);
criterion_main!(benches);
