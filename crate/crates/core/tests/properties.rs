use proptest::prelude::*;
use rvmret_core::characteristics::integrate_characteristic;
use rvmret_core::density::FnField;
use rvmret_core::iterates::{FreeStreaming, IterateDensity};
use rvmret_core::lightcone::{check_trick_inequality, eval_i, ConeIntegralQuery, Family};
use rvmret_core::picard::{synthetic_table, weighted_norm};
use rvmret_core::retarded::kernel_eval;
use rvmret_core::sources::sources;
use rvmret_core::table::FieldTable;
use rvmret_core::*;
use std::sync::Arc;

fn vec3(s: f64) -> impl Strategy<Value = Vec3> {
    (-s..s, -s..s, -s..s).prop_map(|(a, b, c)| Vec3::new(a, b, c))
}

fn unit() -> impl Strategy<Value = Vec3> {
    vec3(1.0).prop_filter("nonzero", |v| v.norm() > 1e-3).prop_map(|v| v / v.norm())
}

/// Smooth, bounded, decaying test field.
fn smooth_field(scale: f64) -> impl Fn(f64, Vec3) -> FieldValue + Sync {
    move |t: f64, x: Vec3| {
        let g = scale * (-(x.norm2() + 0.25 * t * t) / 8.0).exp();
        FieldValue::new(Vec3::new(g, 0.5 * g, -0.3 * g), Vec3::new(0.0, 0.4 * g, 0.2 * g))
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn p_hat_is_subluminal_and_odd(p in vec3(1e3)) {
        prop_assert!(p_hat(p).norm() < 1.0);
        prop_assert_eq!(p_hat(-p), -p_hat(p));
    }

    #[test]
    fn a_of_beta_is_increasing_below_one(b1 in 0.0..50.0f64, db in 1e-6..10.0f64) {
        let (lo, hi) = (a_of_beta(b1), a_of_beta(b1 + db));
        prop_assert!(lo >= 0.0 && hi < 1.0 && lo < hi);
    }

    #[test]
    fn initial_density_is_nonnegative_with_compact_support(x in vec3(2.0), p in vec3(2.0)) {
        for f in [
            InitialData::cubic(1.0, 0.3).unwrap(),
            InitialData::new(1.0, 0.3, Profile::OffsetBump { x_center: [0.2, 0.0, 0.0], p_center: [0.3, 0.1, 0.0], radius: 0.6 }).unwrap(),
        ] {
            let v = f.eval(x, p);
            prop_assert!(v >= 0.0);
            if x.norm2() + p.norm2() >= 1.0 {
                prop_assert_eq!(v, 0.0);
            }
            let h = f.hessian(x, p);
            prop_assert!(h.iter().flatten().all(|e| e.is_finite() && e.abs() < 1e3));
        }
    }

    #[test]
    fn current_is_bounded_by_charge(t in -3.0..3.0f64, x in vec3(2.5)) {
        let init = Arc::new(InitialData::cubic(1.0, 1.0).unwrap());
        let f = IterateDensity::Free(FreeStreaming::new(init, 0.0));
        let quad = QuadratureSpec { momentum_nodes: 6, ..Default::default() };
        let (rho, j) = sources(t, x, &f, &quad).unwrap();
        prop_assert!(j.norm() <= rho * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn free_characteristics_are_affine(t in -5.0..5.0f64, s in -5.0..5.0f64, x in vec3(3.0), p in vec3(3.0)) {
        let r = integrate_characteristic(t, x, p, &ZeroField, s, &QuadratureSpec::default()).unwrap();
        let expect = x + p_hat(p) * (s - t);
        prop_assert!((r.x - expect).norm() <= 1e-12 * (1.0 + expect.norm()));
        prop_assert_eq!(r.p, p);
    }

    #[test]
    fn characteristics_compose(t in -3.0..3.0f64, s1 in -3.0..3.0f64, s2 in -3.0..3.0f64, x in vec3(1.0), p in vec3(1.0)) {
        let field = FnField(smooth_field(0.3));
        let quad = QuadratureSpec::default();
        let direct = integrate_characteristic(t, x, p, &field, s2, &quad).unwrap();
        let mid = integrate_characteristic(t, x, p, &field, s1, &quad).unwrap();
        let two = integrate_characteristic(s1, mid.x, mid.p, &field, s2, &quad).unwrap();
        let err = (direct.x - two.x).norm() + (direct.p - two.p).norm();
        prop_assert!(err <= 10.0 * quad.ode_tol, "{err:e}");
    }

    #[test]
    fn support_spreads_below_light_speed(s in -6.0..6.0f64, w in unit(), v in unit(), u in 0.0..1.0f64) {
        // a point of the initial support ball |x|² + |p|² ≤ 1
        let (x, p) = (w * (0.8 * u), v * (0.6 * u));
        let field = FnField(smooth_field(0.02));
        let quad = QuadratureSpec::default();
        let r = integrate_characteristic(0.0, x, p, &field, s, &quad).unwrap();
        prop_assert!(r.x.norm() <= 1.0 + a_of_beta(2.0) * s.abs() + 10.0 * quad.ode_tol);
    }

    #[test]
    fn a2_is_the_momentum_derivative_of_b(omega in unit(), p in vec3(1.2)) {
        let k = kernel_eval(omega, p).unwrap();
        let h = 1e-5;
        for c in 0..3 {
            let e = Vec3::unit(c) * h;
            let d = (kernel_eval(omega, p + e).unwrap().b - kernel_eval(omega, p - e).unwrap().b) / (2.0 * h);
            for i in 0..3 {
                prop_assert!((k.a2[i][c] - d[i]).abs() <= 1e-6, "a2[{i}][{c}] = {} vs {}", k.a2[i][c], d[i]);
            }
        }
    }

    #[test]
    fn kernels_are_bounded_on_the_momentum_support(omega in unit(), p in vec3(1.15)) {
        let k = kernel_eval(omega, p).unwrap();
        let g = (1.0 + p.norm2()).sqrt();
        prop_assert!(k.a1.norm() / g < 1e3);
        prop_assert!(k.a2.iter().flatten().all(|e| e.is_finite() && e.abs() < 1e3));
    }

    #[test]
    fn trick_constant_is_finite_and_stable(t in -8.0..8.0f64, x in vec3(6.0), seed in 0u64..1000) {
        let a = a_of_beta(2.0);
        let first = check_trick_inequality(t, x, 1.0, a, 400, seed);
        let second = check_trick_inequality(t, x, 1.0, a, 400, seed + 1);
        prop_assert!(first.max_ratio.is_finite() && first.max_ratio <= first.bound);
        prop_assert!(second.max_ratio <= 2.0 * first.max_ratio.max(1.0));
    }

    #[test]
    fn weighted_norms_are_ordered_and_homogeneous(c in -5.0..5.0f64, k in 0.1..2.0f64) {
        let grid = GridSpec { t_min: -2.0, t_max: 2.0, half_width: 3.0, n_t: 3, n_x: 5 };
        let f = synthetic_table(&grid, |t, x| FieldValue::new(Vec3::new((-k * (x.norm2() + t * t)).exp(), 0.0, 0.0), Vec3::ZERO));
        let scaled = f.map(|_, _, v| v.scale(c));
        let (n34, n1) = (weighted_norm(&f, 0.75), weighted_norm(&f, 1.0));
        prop_assert!(n1 >= n34);
        // (1+|t−|x||) ≤ 1 + t_max + half_width·√3
        let spread = 1.0 + 2.0 + 3.0 * 3f64.sqrt();
        prop_assert!(n1 <= n34 * spread.powf(0.25) * (1.0 + 1e-12));
        prop_assert!((weighted_norm(&scaled, 0.75) - c.abs() * n34).abs() <= 1e-12 * n34.max(1e-300) * (1.0 + c.abs()));
    }

    #[test]
    fn table_roundtrip_and_node_exactness(seed in 0u64..1000) {
        let grid = GridSpec { t_min: -1.0, t_max: 1.0, half_width: 2.0, n_t: 3, n_x: 4 };
        let s = seed as f64;
        let f = synthetic_table(&grid, |t, x| FieldValue::new(Vec3::new((s + t).sin(), x.x * x.y, x.z), Vec3::new(t * x.x, s.cos(), -x.y)));
        let mut bytes = Vec::new();
        f.write_to(&mut bytes).unwrap();
        let g = FieldTable::read_from(bytes.as_slice()).unwrap();
        prop_assert_eq!(&f, &g);
        for i in (0..g.len()).step_by(7) {
            let (t, x) = g.coords(i);
            prop_assert_eq!(g.interpolate(t, x), g.value(i));
        }
    }

    #[test]
    fn cone_integral_is_bounded_for_nonpositive_times(t in -20.0..0.0f64, x_norm in 0.0..20.0f64) {
        // for t ≤ 0 the light cone stays away from the source peak
        let q = 5.0;
        let v = eval_i(&ConeIntegralQuery { family: Family::I1, q, t, x_norm }).unwrap();
        let ratio = v / (1.0 - t + x_norm).powf(2.0 - q);
        prop_assert!(ratio.is_finite() && ratio < 50.0, "{ratio}");
    }
}
