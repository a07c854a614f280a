//! Retarded fields of a density: raw source integrals, the kernel
//! representation, gradients and the kernel functions themselves.

use crate::density::{FieldFn, PhaseDensity, SupportBound};
use crate::error::{Error, Result};
use crate::kinematics::{p_hat, FieldValue, Vec3};
use crate::quadrature::{CapRule, GaussLegendre};
use crate::settings::QuadratureSpec;
use crate::sources::{moments, MomentumNode, MomentumQuadrature};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelValue {
    pub a1: Vec3,
    pub b: Vec3,
    /// a2[i][k] = ∂b_i/∂p_k.
    pub a2: [[f64; 3]; 3],
}

/// The kernels a1, b and a2 = ∂ₚb for direction ω and momentum p.
pub fn kernel_eval(omega: Vec3, p: Vec3) -> Result<KernelValue> {
    let n = omega.norm();
    if (n - 1.0).abs() > 1e-12 {
        return Err(Error::NonUnitDirection(n));
    }
    let g2 = 1.0 + p.norm2();
    let g = g2.sqrt();
    let v = p / g;
    let d = 1.0 + omega.dot(v);
    let ov = omega + v;
    let a1 = ov / (g2 * d * d);
    let b = ov / d;
    let mut a2 = [[0.0; 3]; 3];
    for (i, row) in a2.iter_mut().enumerate() {
        for (k, e) in row.iter_mut().enumerate() {
            let dv = |j: usize| (if j == k { 1.0 } else { 0.0 } - v[j] * v[k]) / g;
            let domega_v: f64 = (0..3).map(|j| omega[j] * dv(j)).sum();
            *e = (dv(i) * d - ov[i] * domega_v) / (d * d);
        }
    }
    Ok(KernelValue { a1, b, a2 })
}

/// a1 + r·(a2·K) for unit ω, velocity v and force K; the combination that
/// enters both field components.
#[inline]
fn kernel_combo(omega: Vec3, v: Vec3, k: Option<Vec3>, r: f64) -> Vec3 {
    let om = 1.0 - v.norm2();
    let d = 1.0 + omega.dot(v);
    let inv2 = 1.0 / (d * d);
    let ov = omega + v;
    let mut out = ov * (om * inv2);
    if let Some(k) = k {
        let vk = v.dot(k);
        let wk = omega.dot(k);
        let wv = d - 1.0;
        let a2k = ((k - v * vk) * d - ov * (wk - wv * vk)) * (om.sqrt() * inv2);
        out += a2k * r;
    }
    out
}

/// Radial truncation of the region of the backward cone where the density
/// can be nonzero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeDomain {
    pub t: f64,
    pub x: Vec3,
    pub r_max: f64,
    pub a: f64,
}

/// Bounding radius for {y : |y| ≤ R + a|t − |x−y||} around x.
pub fn cone_domain(t: f64, x: Vec3, radius: f64, a: f64) -> ConeDomain {
    assert!(a >= 0.0 && a < 1.0, "speed bound must lie in [0, 1)");
    let r_max = (radius + a * t.abs() + a * x.norm()) / (1.0 - a) + radius;
    ConeDomain { t, x, r_max, a }
}

impl ConeDomain {
    /// Whether y lies in the cone region with support radius R.
    pub fn contains(&self, y: Vec3, radius: f64) -> bool {
        let tau = self.t - (self.x - y).norm();
        y.norm() <= radius + self.a * tau.abs()
    }
}

/// Exact radial interval {r : the sphere |y − x| = r meets the support at
/// time t − r}, or None.
pub fn radial_range(t: f64, x_norm: f64, bound: &SupportBound) -> Option<(f64, f64)> {
    let g = |r: f64| bound.spatial_radius(t - r) - (x_norm - r).abs();
    let mut peak = 0.0;
    let mut gmax = g(0.0);
    for c in [t, x_norm] {
        if c > 0.0 && g(c) > gmax {
            gmax = g(c);
            peak = c;
        }
    }
    if gmax < 0.0 {
        return None;
    }
    let lo = if g(0.0) >= 0.0 { 0.0 } else { bisect(&g, 0.0, peak) };
    let mut hi = peak + 1.0;
    while g(hi) >= 0.0 {
        hi = peak + 2.0 * (hi - peak);
    }
    Some((lo, bisect(&g, hi, peak)))
}

/// Root of g between `outside` (g < 0) and `inside` (g ≥ 0); returns the
/// outside end of the final bracket so the whole region is covered.
fn bisect(g: &impl Fn(f64) -> f64, mut outside: f64, mut inside: f64) -> f64 {
    for _ in 0..100 {
        let m = 0.5 * (outside + inside);
        if m == outside || m == inside {
            break;
        }
        if g(m) >= 0.0 {
            inside = m;
        } else {
            outside = m;
        }
    }
    outside
}

/// Radial nodes (r, w) over [lo, hi] with geometric panels and breaks.
pub fn radial_nodes(lo: f64, hi: f64, breaks: &[f64], quad: &QuadratureSpec, gl: &GaussLegendre) -> Vec<(f64, f64)> {
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&b| b > lo && b < hi).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.insert(0, lo);
    cuts.push(hi);
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mut cur = a;
        while cur < b {
            let width = quad.radial_panel_min.max(quad.radial_panel_growth * cur);
            let mut next = cur + width;
            if next + 0.25 * width >= b {
                next = b;
            }
            out.extend(gl.on(cur, next));
            cur = next;
        }
    }
    out
}

/// Visits every spatial node (s, y, ω, r, weight) of the backward-cone
/// quadrature centred at (t, x) for a density with the given support bound.
fn for_each_cone_node(
    t: f64,
    x: Vec3,
    bound: &SupportBound,
    quad: &QuadratureSpec,
    mut visit: impl FnMut(f64, Vec3, Vec3, f64, f64),
) {
    let xn = x.norm();
    let Some((lo, hi)) = radial_range(t, xn, bound) else { return };
    let gl_r = GaussLegendre::new(quad.radial_nodes);
    let gl_t = GaussLegendre::new(quad.angular_theta);
    let axis = if xn > 1e-12 { -(x / xn) } else { Vec3::new(0.0, 0.0, 1.0) };
    for (r, wr) in radial_nodes(lo, hi, &[t, xn], quad, &gl_r) {
        if r <= 0.0 {
            continue;
        }
        let s = t - r;
        let rho = bound.spatial_radius(s);
        let mu_min = if xn > 1e-12 {
            (xn * xn + r * r - rho * rho) / (2.0 * r * xn)
        } else if r <= rho {
            -1.0
        } else {
            continue;
        };
        if mu_min >= 1.0 {
            continue;
        }
        let cap = CapRule::new(&gl_t, quad.angular_phi, axis, mu_min);
        for (omega, wo) in cap.dirs {
            visit(s, x + omega * r, omega, r, wr * wo);
        }
    }
}

/// Retarded field via the kernel representation: the density f and the
/// force field K = E + p̂∧B that transports it.
pub fn field_repr(
    t: f64,
    x: Vec3,
    f: &dyn PhaseDensity,
    force: Option<&dyn FieldFn>,
    quad: &QuadratureSpec,
) -> Result<FieldValue> {
    let bound = f.support();
    let mq = MomentumQuadrature::new(quad);
    let mut nodes: Vec<MomentumNode> = Vec::new();
    let mut e = Vec3::ZERO;
    let mut b = Vec3::ZERO;
    for_each_cone_node(t, x, &bound, quad, |s, y, omega, r, w| {
        mq.nodes_into(s, y, &bound, &mut nodes);
        if nodes.is_empty() {
            return;
        }
        let fv = force.map(|k| k.eval(s, y));
        let mut m = Vec3::ZERO;
        for nd in &nodes {
            let val = f.eval(s, y, nd.p);
            if val == 0.0 {
                continue;
            }
            let k = fv.map(|fv| fv.force(nd.v));
            m += kernel_combo(omega, nd.v, k, r) * (val * nd.w);
        }
        e -= m * w;
        b += omega.cross(m) * w;
    });
    let out = FieldValue::new(e, b);
    if !out.is_finite() {
        return Err(Error::NonFinite(format!("field_repr at t = {t}, x = {x:?}")));
    }
    Ok(out)
}

/// Retarded field from the source integrals, with source derivatives by
/// central differences of step `quad.fd_source`.
pub fn field_raw(t: f64, x: Vec3, f: &dyn PhaseDensity, quad: &QuadratureSpec) -> Result<FieldValue> {
    let h = quad.fd_source;
    let inner = f.support();
    // nodes are built once per centre and reused on the whole stencil, so the
    // bound is widened to cover every stencil point
    let mut bound = inner;
    bound.radius += 2.0 * h;
    let mq = MomentumQuadrature::new(quad);
    let mut nodes: Vec<MomentumNode> = Vec::new();
    let mut e = Vec3::ZERO;
    let mut b = Vec3::ZERO;
    for_each_cone_node(t, x, &bound, quad, |s, y, _omega, r, w| {
        mq.nodes_into(s, y, &bound, &mut nodes);
        if nodes.is_empty() {
            return;
        }
        let (_, jp) = moments(s + h, y, f, &nodes);
        let (_, jm) = moments(s - h, y, f, &nodes);
        let dtj = (jp - jm) / (2.0 * h);
        let mut grad_rho = [0.0; 3];
        let mut dj = [Vec3::ZERO; 3];
        for i in 0..3 {
            let ei = Vec3::unit(i) * h;
            let (rp, jp) = moments(s, y + ei, f, &nodes);
            let (rm, jm) = moments(s, y - ei, f, &nodes);
            grad_rho[i] = (rp - rm) / (2.0 * h);
            dj[i] = (jp - jm) / (2.0 * h);
        }
        let curl = Vec3::new(dj[1].z - dj[2].y, dj[2].x - dj[0].z, dj[0].y - dj[1].x);
        e -= (Vec3::from_array(grad_rho) + dtj) * (w * r);
        b += curl * (w * r);
    });
    let out = FieldValue::new(e, b);
    if !out.is_finite() {
        return Err(Error::NonFinite(format!("field_raw at t = {t}, x = {x:?}")));
    }
    Ok(out)
}

/// Central-difference gradient [∂ₜ, ∂₁, ∂₂, ∂₃] of a field evaluator.
pub fn fd_gradient(
    eval: impl Fn(f64, Vec3) -> Result<FieldValue>,
    t: f64,
    x: Vec3,
    h: f64,
) -> Result<[FieldValue; 4]> {
    let diff = |a: FieldValue, b: FieldValue| (a - b).scale(0.5 / h);
    let mut out = [FieldValue::ZERO; 4];
    out[0] = diff(eval(t + h, x)?, eval(t - h, x)?);
    for i in 0..3 {
        let ei = Vec3::unit(i) * h;
        out[i + 1] = diff(eval(t, x + ei)?, eval(t, x - ei)?);
    }
    Ok(out)
}

/// Gradient of the represented field by central differences.
pub fn field_gradient(
    t: f64,
    x: Vec3,
    f: &dyn PhaseDensity,
    force: Option<&dyn FieldFn>,
    quad: &QuadratureSpec,
) -> Result<[FieldValue; 4]> {
    fd_gradient(|s, y| field_repr(s, y, f, force, quad), t, x, quad.fd_field)
}

/// Central-difference residuals (∇·E − 4πρ, ∇·B) of the represented field.
pub fn maxwell_constraint_residual(
    t: f64,
    x: Vec3,
    f: &dyn PhaseDensity,
    force: Option<&dyn FieldFn>,
    quad: &QuadratureSpec,
) -> Result<(f64, f64)> {
    let g = field_gradient(t, x, f, force, quad)?;
    let div_e = g[1].e.x + g[2].e.y + g[3].e.z;
    let div_b = g[1].b.x + g[2].b.y + g[3].b.z;
    let (rho, _) = crate::sources::sources(t, x, f, quad)?;
    Ok((div_e - 4.0 * std::f64::consts::PI * rho, div_b))
}

/// Scalar test function g(t, y) with analytic first derivatives.
pub trait SmoothTest {
    fn value(&self, t: f64, y: Vec3) -> f64;
    /// (∂ₜg, ∇g).
    fn grad(&self, t: f64, y: Vec3) -> (f64, Vec3);
}

pub struct ConstantTest(pub f64);

impl SmoothTest for ConstantTest {
    fn value(&self, _t: f64, _y: Vec3) -> f64 {
        self.0
    }
    fn grad(&self, _t: f64, _y: Vec3) -> (f64, Vec3) {
        (0.0, Vec3::ZERO)
    }
}

/// g = t·y₁.
pub struct TimesFirstCoordinate;

impl SmoothTest for TimesFirstCoordinate {
    fn value(&self, t: f64, y: Vec3) -> f64 {
        t * y.x
    }
    fn grad(&self, t: f64, y: Vec3) -> (f64, Vec3) {
        (y.x, Vec3::new(t, 0.0, 0.0))
    }
}

/// g = exp(−(t−t₀)²/σ² − |y−c|²/σ²).
pub struct GaussianBump {
    pub t0: f64,
    pub center: Vec3,
    pub sigma: f64,
}

impl SmoothTest for GaussianBump {
    fn value(&self, t: f64, y: Vec3) -> f64 {
        let s2 = self.sigma * self.sigma;
        (-((t - self.t0).powi(2) + (y - self.center).norm2()) / s2).exp()
    }
    fn grad(&self, t: f64, y: Vec3) -> (f64, Vec3) {
        let s2 = self.sigma * self.sigma;
        let g = self.value(t, y);
        (-2.0 * (t - self.t0) / s2 * g, (y - self.center) * (-2.0 * g / s2))
    }
}

/// Largest residual of the two identities expressing ∂ᵢf and ∂ₜf at
/// (t − |x−y|, y) through Tf = ∂ₜf + p̂·∇f and the derivatives of
/// y ↦ f(t − |x−y|, y).
pub fn chain_rule_identity_residual(t: f64, x: Vec3, y: Vec3, p: Vec3, g: &dyn SmoothTest) -> f64 {
    let d = y - x;
    let r = d.norm();
    let omega = d / r;
    let v = p_hat(p);
    let dd = 1.0 + omega.dot(v);
    let s = t - r;
    let (gt, gx) = g.grad(s, y);
    let tf = gt + v.dot(gx);
    let h = 1e-5 * (1.0 + r);
    let along = |z: Vec3| g.value(t - (x - z).norm(), z);
    let mut perfect = [0.0; 3];
    for (k, pk) in perfect.iter_mut().enumerate() {
        let ek = Vec3::unit(k) * h;
        *pk = (along(y + ek) - along(y - ek)) / (2.0 * h);
    }
    let pd = Vec3::from_array(perfect);
    let mut worst: f64 = 0.0;
    for i in 0..3 {
        let rhs = omega[i] / dd * tf + pd[i] - omega[i] * v.dot(pd) / dd;
        worst = worst.max((gx[i] - rhs).abs());
    }
    let rhs_t = tf / dd - v.dot(pd) / dd;
    worst.max((gt - rhs_t).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_examples() {
        let k = kernel_eval(Vec3::new(1.0, 0.0, 0.0), Vec3::ZERO).unwrap();
        assert_eq!(k.a1, Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(k.b, Vec3::new(1.0, 0.0, 0.0));
        let k = kernel_eval(Vec3::new(1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert!((k.a1.x - 0.29289322).abs() < 1e-8 && k.a1.y == 0.0);
        assert!(matches!(kernel_eval(Vec3::new(1.1, 0.0, 0.0), Vec3::ZERO), Err(Error::NonUnitDirection(_))));
    }

    #[test]
    fn combo_matches_matrix_kernels() {
        let omega = Vec3::new(0.36, -0.48, 0.8);
        let p = Vec3::new(0.4, 0.9, -0.3);
        let kf = Vec3::new(0.2, -0.1, 0.5);
        let kv = kernel_eval(omega, p).unwrap();
        let r = 1.7;
        let mut want = kv.a1;
        for i in 0..3 {
            let s: f64 = (0..3).map(|k| kv.a2[i][k] * kf[k]).sum();
            want = want.with(i, want[i] + r * s);
        }
        let got = kernel_combo(omega, p_hat(p), Some(kf), r);
        assert!((got - want).norm() < 1e-14);
    }

    #[test]
    fn cone_domain_examples() {
        let c = cone_domain(0.0, Vec3::ZERO, 1.0, 0.8944);
        assert!((c.r_max - 10.47).abs() < 0.01);
        let c = cone_domain(3.0, Vec3::new(1.0, 2.0, 0.0), 1.0, 0.0);
        assert_eq!(c.r_max, 2.0);
    }

    #[test]
    fn radial_range_matches_brute_force() {
        let bound = SupportBound::new(1.0, 0.05);
        for &(t, xn) in &[(0.0, 0.0), (3.0, 4.0), (-2.0, 5.0), (4.0, 0.5), (1.0, 9.0)] {
            let (lo, hi) = radial_range(t, xn, &bound).unwrap();
            let g = |r: f64| bound.spatial_radius(t - r) - (xn - r).abs();
            let n = 20000;
            let top = 2.0 * cone_domain(t, Vec3::new(xn, 0.0, 0.0), 1.0, bound.speed()).r_max;
            for k in 0..=n {
                let r = top * k as f64 / n as f64;
                if g(r) > 1e-9 {
                    assert!(r >= lo - 1e-9 && r <= hi + 1e-9, "t={t} xn={xn} r={r} range=({lo},{hi})");
                }
            }
        }
    }
}
