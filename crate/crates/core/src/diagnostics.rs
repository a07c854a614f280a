//! Physical checks on computed densities and fields: energies, radiation
//! fluxes, decay fits, conservation laws and support volumes.

use crate::density::{Domain, FieldFn, PhaseDensity};
use crate::error::{Error, Result};
use crate::iterates::IterateDensity;
use crate::kinematics::{FieldValue, Vec3};
use crate::quadrature::{integrate_to_pos_inf, orthonormal_frame, AdaptiveOptions, GaussLegendre};
use crate::settings::MomentumRule;
use crate::sources::{MomentumNode, MomentumQuadrature};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Tensor Gauss–Legendre rule in x over the spatial support box, with the
/// support-adapted momentum rule at every x node.
#[derive(Debug, Clone)]
pub struct PhaseRule {
    x_gl: GaussLegendre,
    momentum: MomentumQuadrature,
}

impl PhaseRule {
    pub fn new(x_nodes: usize, p_nodes: usize) -> Self {
        PhaseRule { x_gl: GaussLegendre::new(x_nodes), momentum: MomentumQuadrature::with_nodes(MomentumRule::SupportAdapted, p_nodes) }
    }

    /// Σ w·g(p, f) over the phase nodes at time t, and the largest f seen.
    pub fn integrate<const K: usize>(
        &self,
        t: f64,
        f: &dyn PhaseDensity,
        g: impl Fn(Vec3, f64) -> [f64; K] + Sync,
    ) -> ([f64; K], f64) {
        let bound = f.support();
        let rho = bound.spatial_radius(t);
        let xs: Vec<(f64, f64)> = self.x_gl.on(-rho, rho).collect();
        let slabs: Vec<([f64; K], f64)> = xs
            .par_iter()
            .map(|&(x1, w1)| {
                let mut acc = [0.0; K];
                let mut peak: f64 = 0.0;
                let mut nodes: Vec<MomentumNode> = Vec::new();
                for &(x2, w2) in &xs {
                    for &(x3, w3) in &xs {
                        let x = Vec3::new(x1, x2, x3);
                        if x.norm() > rho {
                            continue;
                        }
                        self.momentum.nodes_into(t, x, &bound, &mut nodes);
                        for nd in &nodes {
                            let val = f.eval(t, x, nd.p);
                            if val == 0.0 {
                                continue;
                            }
                            peak = peak.max(val);
                            let w = w1 * w2 * w3 * nd.w;
                            for (a, v) in acc.iter_mut().zip(g(nd.p, val)) {
                                *a += w * v;
                            }
                        }
                    }
                }
                (acc, peak)
            })
            .collect();
        let mut total = [0.0; K];
        let mut peak: f64 = 0.0;
        for (acc, p) in slabs {
            for (a, v) in total.iter_mut().zip(acc) {
                *a += v;
            }
            peak = peak.max(p);
        }
        (total, peak)
    }
}

/// ∫ h over [−L, L]³ by composite 3-point Gauss rules on `panels` panels
/// per axis.
fn cube_integral(l: f64, panels: usize, h: impl Fn(Vec3) -> f64 + Sync) -> f64 {
    let gl = GaussLegendre::new(3);
    let width = 2.0 * l / panels as f64;
    let nodes: Vec<(f64, f64)> = (0..panels)
        .flat_map(|k| {
            let a = -l + k as f64 * width;
            gl.on(a, a + width).collect::<Vec<_>>()
        })
        .collect();
    let slabs: Vec<f64> = nodes
        .par_iter()
        .map(|&(x1, w1)| {
            let mut s = 0.0;
            for &(x2, w2) in &nodes {
                for &(x3, w3) in &nodes {
                    s += w1 * w2 * w3 * h(Vec3::new(x1, x2, x3));
                }
            }
            s
        })
        .collect();
    slabs.iter().sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub t: f64,
    pub kinetic: f64,
    pub field_energy: f64,
    pub total: f64,
    /// Bound on the field energy outside the cube, from the decay fit.
    pub field_tail: f64,
}

/// Kinetic energy ∫∫√(1+|p|²) f and field energy ½∫(|E|²+|B|²) over the
/// cube [−L, L]³.
pub fn energies(t: f64, f: &dyn PhaseDensity, field: &dyn FieldFn, cube: f64, rule: &PhaseRule, panels: usize) -> EnergyReport {
    let ([kinetic], _) = rule.integrate(t, f, |p, v| [(1.0 + p.norm2()).sqrt() * v]);
    let field_energy = 0.5 * cube_integral(cube, panels, |x| {
        let v = field.eval(t, x);
        v.e.norm2() + v.b.norm2()
    });
    EnergyReport { t, kinetic, field_energy, total: kinetic + field_energy, field_tail: 0.0 }
}

/// ½∫_{|x|>L} C²(1+|t|+|x|)^{−2}(1+|t−|x||)^{−2} dx.
pub fn field_energy_tail(c: f64, t: f64, cube: f64) -> f64 {
    let h = |r: f64| 4.0 * PI * r * r * ((1.0 + t.abs() + r) * (1.0 + (t - r).abs())).powi(-2);
    0.5 * c * c * integrate_to_pos_inf(h, cube, AdaptiveOptions::default()).value
}

/// Sphere and time rule for Poynting fluxes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxRule {
    pub theta: usize,
    pub phi: usize,
    pub time_nodes: usize,
}

/// ∫_{|x|=r} (E∧B)·ω dS at time t.
pub fn sphere_flux(field: &dyn FieldFn, t: f64, r: f64, rule: &FluxRule) -> f64 {
    let gl = GaussLegendre::new(rule.theta);
    let dphi = 2.0 * PI / rule.phi as f64;
    let (e1, e2) = orthonormal_frame(Vec3::new(0.0, 0.0, 1.0));
    let mut s = 0.0;
    for (mu, wmu) in gl.on(-1.0, 1.0) {
        let st = (1.0 - mu * mu).sqrt();
        for k in 0..rule.phi {
            let phi = (k as f64 + 0.5) * dphi;
            let omega = Vec3::new(0.0, 0.0, mu) + e1 * (st * phi.cos()) + e2 * (st * phi.sin());
            let v = field.eval(t, omega * r);
            s += wmu * dphi * v.e.cross(v.b).dot(omega);
        }
    }
    s * r * r
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiationReport {
    /// Null-time window (advanced time for incoming, retarded for outgoing).
    pub window: (f64, f64),
    pub radii: Vec<f64>,
    pub fluxes: Vec<f64>,
    /// Intercept of a polynomial fit in 1/r.
    pub extrapolated: f64,
    /// |flux| strictly decreases with r.
    pub decreasing: bool,
}

fn radiation(
    window: (f64, f64),
    radii: &[f64],
    field: &dyn FieldFn,
    coverage: Domain,
    rule: &FluxRule,
    time_of: impl Fn(f64, f64) -> f64,
    sign: f64,
) -> Result<RadiationReport> {
    if radii.is_empty() {
        return Err(Error::Invalid("radiation needs at least one radius".into()));
    }
    let gl = GaussLegendre::new(rule.time_nodes);
    let mut fluxes = Vec::with_capacity(radii.len());
    for &r in radii {
        for s in [window.0, window.1] {
            let t = time_of(s, r);
            if !coverage.contains(t, Vec3::new(r, 0.0, 0.0)) || r > coverage.half_width {
                return Err(Error::DomainExceeded { t, x_norm: r });
            }
        }
        let total: f64 = gl.on(window.0, window.1).map(|(s, w)| w * sphere_flux(field, time_of(s, r), r, rule)).sum();
        fluxes.push(sign * total);
    }
    let extrapolated = extrapolate_inverse_radius(radii, &fluxes);
    let decreasing = fluxes.windows(2).all(|w| w[1].abs() < w[0].abs());
    Ok(RadiationReport { window, radii: radii.to_vec(), fluxes, extrapolated, decreasing })
}

/// ℰ_in(v₁, v₂) at each radius: −∫dv ∫_{|x|=r} (E∧B)·ω at t = v − r.
pub fn incoming_radiation(
    v1: f64,
    v2: f64,
    radii: &[f64],
    field: &dyn FieldFn,
    coverage: Domain,
    rule: &FluxRule,
) -> Result<RadiationReport> {
    radiation((v1, v2), radii, field, coverage, rule, |v, r| v - r, -1.0)
}

/// Outgoing analogue: ∫du ∫_{|x|=r} (E∧B)·ω at t = u + r.
pub fn outgoing_radiation(
    u1: f64,
    u2: f64,
    radii: &[f64],
    field: &dyn FieldFn,
    coverage: Domain,
    rule: &FluxRule,
) -> Result<RadiationReport> {
    radiation((u1, u2), radii, field, coverage, rule, |u, r| u + r, 1.0)
}

/// Value at 1/r = 0 of the least-squares polynomial in 1/r of degree
/// min(2, n−1): radiative, mixed and bound parts of a flux scale like
/// r⁰, r⁻¹ and r⁻².
pub fn extrapolate_inverse_radius(radii: &[f64], values: &[f64]) -> f64 {
    let n = radii.len();
    if n == 1 {
        return values[0];
    }
    let deg = (n - 1).min(2);
    let a = DMatrix::from_fn(n, deg + 1, |i, j| radii[i].recip().powi(j as i32));
    let b = DVector::from_column_slice(values);
    let svd = a.svd(true, true);
    svd.solve(&b, 1e-14).map(|c| c[0]).unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FscReport {
    /// Smallest η satisfying both inequalities on the sample.
    pub eta: f64,
    pub eta_field: f64,
    pub eta_gradient: f64,
    pub samples: usize,
    pub pass: bool,
}

/// Seeded (t, x) with t uniform in [t_min, t_max] and x uniform in the ball
/// |x| ≤ R + |t|.
pub fn fsc_samples(radius: f64, t_min: f64, t_max: f64, count: usize, seed: u64) -> Vec<(f64, Vec3)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let t = rng.gen_range(t_min..=t_max);
            let x = loop {
                let d = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                if d.norm2() <= 1.0 {
                    break d * (radius + t.abs());
                }
            };
            (t, x)
        })
        .collect()
}

/// Measures the smallest η with |F| ≤ η w^{−α} and |∂ₓF| ≤ η w^{−α}
/// (1+R+|t|−|x|)^{−1}, where w = (1+|t|+|x|)(1+R+|t|−|x|), on the sample
/// points with |x| ≤ R + |t|. Spatial derivatives are central differences
/// of step h.
pub fn fsc_check(
    field: &dyn FieldFn,
    h: f64,
    eta: f64,
    alpha: f64,
    radius: f64,
    sample: &[(f64, Vec3)],
) -> Result<FscReport> {
    if !(alpha > 0.5) {
        return Err(Error::Invalid(format!("free streaming condition needs alpha > 1/2, got {alpha}")));
    }
    let mut eta_field: f64 = 0.0;
    let mut eta_gradient: f64 = 0.0;
    let mut used = 0;
    for &(t, x) in sample {
        let r = x.norm();
        if r > radius + t.abs() {
            continue;
        }
        used += 1;
        let inner = 1.0 + radius + t.abs() - r;
        let w = ((1.0 + t.abs() + r) * inner).powf(alpha);
        eta_field = eta_field.max(field.eval(t, x).norm() * w);
        let mut g2 = 0.0;
        for i in 0..3 {
            let e = Vec3::unit(i) * h;
            let d = (field.eval(t, x + e) - field.eval(t, x - e)).scale(0.5 / h);
            g2 += d.norm().powi(2);
        }
        eta_gradient = eta_gradient.max(g2.sqrt() * w * inner);
    }
    let measured = eta_field.max(eta_gradient);
    Ok(FscReport { eta: measured, eta_field, eta_gradient, samples: used, pass: measured <= eta })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    #[serde(rename = "C")]
    pub c: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    /// Largest |log|F| − log(fit)| over the probes.
    pub residual: f64,
    pub probes: usize,
}

/// Least squares for log|F| ≈ log C − α₁ log(1+|t|+|x|) − α₂ log(1+|t−|x||)
/// on probes (t, |x|, |F|).
pub fn decay_fit(probes: &[(f64, f64, f64)]) -> Result<DecayFit> {
    if probes.len() < 3 {
        return Err(Error::IllConditioned(format!("{} probes for three parameters", probes.len())));
    }
    if let Some(bad) = probes.iter().find(|p| !(p.2 > 0.0) || !p.2.is_finite()) {
        return Err(Error::Invalid(format!("decay probe with non-positive value {bad:?}")));
    }
    let u: Vec<f64> = probes.iter().map(|&(t, r, _)| (1.0 + t.abs() + r).ln()).collect();
    let w: Vec<f64> = probes.iter().map(|&(t, r, _)| (1.0 + (t - r).abs()).ln()).collect();
    let span = |v: &[f64]| v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min);
    if span(&u) < 4f64.ln() || span(&w) < 4f64.ln() {
        return Err(Error::IllConditioned(format!(
            "probes span factors {:.2} and {:.2}, need 4 in both weights",
            span(&u).exp(),
            span(&w).exp()
        )));
    }
    let n = probes.len();
    let a = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => 1.0,
        1 => -u[i],
        _ => -w[i],
    });
    let b = DVector::from_iterator(n, probes.iter().map(|p| p.2.ln()));
    let svd = a.clone().svd(true, true);
    let sv = &svd.singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    if !(smin > 1e-10 * smax) {
        return Err(Error::IllConditioned(format!("design singular values {smax:.3e} / {smin:.3e}")));
    }
    let x = svd.solve(&b, 0.0).map_err(|e| Error::IllConditioned(e.to_string()))?;
    let fitted = &a * &x;
    let residual = (0..n).map(|i| (b[i] - fitted[i]).abs()).fold(0.0, f64::max);
    Ok(DecayFit { c: x[0].exp(), alpha1: x[1], alpha2: x[2], residual, probes: n })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpRow {
    pub t: f64,
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
    pub l1_drift: f64,
    pub l2_drift: f64,
    pub linf_drift: f64,
}

/// ‖f(t)‖_{L¹}, ‖f(t)‖_{L²} by phase quadrature and ‖f(t)‖_∞ over the
/// quadrature nodes and the image of the peak of f^in, each with its
/// relative drift from the exact value for f^in.
pub fn lp_conservation(f: &IterateDensity, times: &[f64], rule: &PhaseRule) -> Vec<LpRow> {
    let init = f.initial();
    let l1_ref = init.lp_power_integral(1);
    let l2_ref = init.lp_power_integral(2).sqrt();
    let linf_ref = init.peak();
    let drift = |v: f64, r: f64| if r > 0.0 { (v - r).abs() / r } else { v.abs() };
    times
        .iter()
        .map(|&t| {
            let ([l1, l2sq], node_peak) = rule.integrate(t, f, |_, v| [v, v * v]);
            let (x0, p0) = init.peak_location();
            let (xt, pt) = f.forward(t, x0, p0);
            let linf = node_peak.max(f.eval(t, xt, pt));
            let l2 = l2sq.sqrt();
            LpRow {
                t,
                l1,
                l2,
                linf,
                l1_drift: drift(l1, l1_ref),
                l2_drift: drift(l2, l2_ref),
                linf_drift: drift(linf, linf_ref),
            }
        })
        .collect()
}

/// Measure of {p : f(t, x, p) > threshold} by a midpoint grid in velocity
/// over the box allowed by the support bound.
pub fn support_volume(t: f64, x: Vec3, f: &dyn PhaseDensity, cells: usize) -> f64 {
    let bound = f.support();
    let thr = f.support_threshold();
    let mq = MomentumQuadrature::with_nodes(MomentumRule::SupportAdapted, 1);
    let Some(b) = mq.bounds(t, x, &bound) else { return 0.0 };
    let h: Vec<f64> = b.iter().map(|iv| (iv.1 - iv.0) / cells as f64).collect();
    let mid = |axis: usize, k: usize| b[axis].0 + (k as f64 + 0.5) * h[axis];
    let cell = h[0] * h[1] * h[2];
    (0..cells)
        .into_par_iter()
        .map(|i| {
            let mut s = 0.0;
            for j in 0..cells {
                for k in 0..cells {
                    let v = Vec3::new(mid(0, i), mid(1, j), mid(2, k));
                    let v2 = v.norm2();
                    if v2 >= 1.0 {
                        continue;
                    }
                    let q = 1.0 - v2;
                    let p = v / q.sqrt();
                    if f.eval(t, x, p) > thr {
                        s += cell / (q * q * q.sqrt());
                    }
                }
            }
            s
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum()
}

/// Least-squares slope of log y against log x.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = points.iter().filter(|p| p.0 > 0.0 && p.1 > 0.0).map(|p| (p.0.ln(), p.1.ln())).collect();
    if pts.len() < 2 {
        return Err(Error::IllConditioned("slope needs two positive points".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::IllConditioned("slope needs distinct abscissae".into()));
    }
    Ok(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

/// ‖F(t, ·)‖_{L²} over the cube [−L, L]³.
pub fn field_l2(field: &dyn FieldFn, t: f64, cube: f64, panels: usize) -> f64 {
    cube_integral(cube, panels, |x| {
        let v: FieldValue = field.eval(t, x);
        v.e.norm2() + v.b.norm2()
    })
    .sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    /// (t, ‖F(t)‖_{L²}) sorted by t.
    pub rows: Vec<(f64, f64)>,
    pub pass: bool,
}

/// Passes when ‖F(t)‖_{L²} strictly decreases as t decreases over the
/// three most negative times.
pub fn uniqueness_class_check(slices: &[(f64, f64)]) -> UniquenessReport {
    let mut rows = slices.to_vec();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let head = &rows[..rows.len().min(3)];
    let all_zero = rows.iter().all(|r| r.1 == 0.0);
    let pass = all_zero || (head.len() >= 2 && head.windows(2).all(|w| w[0].1 < w[1].1));
    UniquenessReport { rows, pass }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{FnField, ZeroDensity, ZeroField};
    use crate::initial::InitialData;
    use crate::iterates::FreeStreaming;
    use std::sync::Arc;

    fn free(amplitude: f64) -> IterateDensity {
        IterateDensity::Free(FreeStreaming::new(Arc::new(InitialData::cubic(1.0, amplitude).unwrap()), 0.0))
    }

    #[test]
    fn zero_energies() {
        let r = energies(1.0, &ZeroDensity { radius: 1.0 }, &ZeroField, 4.0, &PhaseRule::new(6, 4), 2);
        assert_eq!((r.kinetic, r.field_energy, r.total), (0.0, 0.0, 0.0));
    }

    #[test]
    fn free_streaming_conserves_mass_and_energy() {
        let f = free(1.0);
        let rule = PhaseRule::new(20, 16);
        let rows = lp_conservation(&f, &[0.0, 3.0, 5.0], &rule);
        for r in &rows {
            assert!(r.l1_drift < 1e-3 && r.l2_drift < 1e-3, "{r:?}");
            assert!(r.linf_drift < 1e-12, "{r:?}");
        }
        let e0 = energies(0.0, &f, &ZeroField, 1.0, &rule, 1).kinetic;
        let e3 = energies(3.0, &f, &ZeroField, 1.0, &rule, 1).kinetic;
        assert!((e3 - e0).abs() < 1e-3 * e0, "{e0} {e3}");
    }

    fn pulse(t: f64, x: Vec3) -> FieldValue {
        let r = x.norm();
        let u = t - r;
        let g = if u.abs() < 1.0 { (1.0 - u * u).powi(3) } else { 0.0 };
        let omega = x / r;
        let e = Vec3::new(0.0, 0.0, 1.0).cross(omega) * (g / r);
        FieldValue::new(e, omega.cross(e))
    }

    #[test]
    fn outgoing_pulse_has_no_incoming_flux() {
        let field = FnField(pulse);
        let rule = FluxRule { theta: 12, phi: 24, time_nodes: 24 };
        let radii = [4.0, 5.0, 6.0, 8.0];
        let inc = incoming_radiation(2.0, 6.0, &radii, &field, Domain::EVERYWHERE, &rule).unwrap();
        assert!(inc.fluxes.iter().all(|f| *f == 0.0));
        let out = outgoing_radiation(-1.0, 1.0, &radii, &field, Domain::EVERYWHERE, &rule).unwrap();
        // ∫(1−u²)⁶ du over [−1, 1] times ∫|ẑ∧ω|² dΩ = 8π/3
        let exact = 2048.0 / 3003.0 * 8.0 * PI / 3.0;
        for f in &out.fluxes {
            assert!((f - exact).abs() < 1e-3 * exact, "{f} vs {exact}");
        }
        assert!((out.extrapolated - exact).abs() < 1e-3 * exact);
        let zero = incoming_radiation(2.0, 6.0, &radii, &ZeroField, Domain::EVERYWHERE, &rule).unwrap();
        assert!(zero.fluxes.iter().all(|f| *f == 0.0));
    }

    #[test]
    fn radiation_outside_coverage_is_an_error() {
        let dom = Domain { t_min: -4.0, t_max: 4.0, half_width: 6.0 };
        let rule = FluxRule { theta: 2, phi: 2, time_nodes: 2 };
        let err = incoming_radiation(2.0, 6.0, &[1.0], &ZeroField, dom, &rule).unwrap_err();
        assert!(matches!(err, Error::DomainExceeded { .. }));
    }

    #[test]
    fn extrapolation_removes_bound_terms() {
        let radii = [2.0, 3.0, 4.0, 5.0, 6.0];
        let vals: Vec<f64> = radii.iter().map(|r| 0.5 + 2.0 / r - 3.0 / (r * r)).collect();
        assert!((extrapolate_inverse_radius(&radii, &vals) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fsc_examples() {
        let s = fsc_samples(1.0, -4.0, 4.0, 100, 3);
        let zero = fsc_check(&ZeroField, 1e-3, 0.0, 1.0, 1.0, &s).unwrap();
        assert!(zero.pass && zero.eta == 0.0);
        let shaped = FnField(|t: f64, x: Vec3| {
            let v = 1.0 / ((1.0 + t.abs() + x.norm()) * (2.0 + t.abs() - x.norm()));
            FieldValue::new(Vec3::new(v, 0.0, 0.0), Vec3::ZERO)
        });
        let r = fsc_check(&shaped, 1e-5, 1.0, 1.0, 1.0, &s).unwrap();
        assert!((r.eta_field - 1.0).abs() < 1e-12);
        assert!(fsc_check(&shaped, 1e-5, 1.0, 0.5, 1.0, &s).is_err());
    }

    fn synthetic(a1: f64, a2: f64) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for t in [-8.0f64, -3.0, 0.0, 2.0, 5.0, 9.0] {
            for r in [0.0, 1.0, 4.0, 8.0, 12.0] {
                out.push((t, r, 3.0 * (1.0 + t.abs() + r).powf(-a1) * (1.0 + (t - r).abs()).powf(-a2)));
            }
        }
        out
    }

    #[test]
    fn decay_fit_recovers_exponents() {
        for (a1, a2) in [(1.0, 1.0), (1.0, 1.75), (0.0, 0.0)] {
            let fit = decay_fit(&synthetic(a1, a2)).unwrap();
            assert!((fit.alpha1 - a1).abs() < 1e-3 && (fit.alpha2 - a2).abs() < 1e-3, "{fit:?}");
            assert!((fit.c - 3.0).abs() < 1e-6 && fit.residual < 1e-9);
        }
        let narrow: Vec<_> = (0..10).map(|i| (0.1 * i as f64, 0.0, 1.0)).collect();
        assert!(matches!(decay_fit(&narrow), Err(Error::IllConditioned(_))));
    }

    #[test]
    fn support_volume_examples() {
        let f = free(1.0);
        let v0 = support_volume(0.0, Vec3::ZERO, &f, 40);
        let ball = 4.0 / 3.0 * PI;
        assert!(v0 <= ball * 1.02 && v0 > 0.9 * ball, "{v0}");
        assert_eq!(support_volume(0.0, Vec3::ZERO, &ZeroDensity { radius: 1.0 }, 10), 0.0);
        let pts: Vec<(f64, f64)> =
            [2.0, 4.0, 8.0].iter().map(|&t| (1.0 + t, support_volume(t, Vec3::ZERO, &f, 40))).collect();
        assert!(loglog_slope(&pts).unwrap() < -2.5);
    }

    #[test]
    fn uniqueness_examples() {
        assert!(uniqueness_class_check(&[(-2.0, 0.0), (-1.0, 0.0), (0.0, 0.0)]).pass);
        let shaped = FnField(|t: f64, x: Vec3| {
            let v = 1.0 / ((1.0 + t.abs() + x.norm()) * (1.0 + (t - x.norm()).abs()));
            FieldValue::new(Vec3::new(v, 0.0, 0.0), Vec3::ZERO)
        });
        let radial = |t: f64| {
            let h = |r: f64| 4.0 * PI * r * r * ((1.0 + t.abs() + r) * (1.0 + (t - r).abs())).powi(-2);
            integrate_to_pos_inf(h, 0.0, AdaptiveOptions::default()).value.sqrt()
        };
        let times = [-40.0, -20.0, -10.0, 0.0];
        let oracle: Vec<(f64, f64)> = times.iter().map(|&t| (t, radial(t))).collect();
        assert!(uniqueness_class_check(&oracle).pass);
        let measured: Vec<(f64, f64)> = times.iter().map(|&t| (t, field_l2(&shaped, t, 12.0, 12))).collect();
        let rep = uniqueness_class_check(&measured);
        assert!(rep.pass, "{rep:?}");
        for (m, o) in measured.iter().zip(&oracle) {
            assert!(m.1 <= o.1 * 1.01);
        }
    }
}
