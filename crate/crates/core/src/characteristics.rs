//! Characteristic curves dX/ds = p̂(P), dP/ds = E(s,X) + p̂(P)∧B(s,X).

use crate::density::{FieldFn, PhaseDensity};
use crate::error::{Error, Result};
use crate::kinematics::{p_hat, Vec3};
use crate::settings::QuadratureSpec;
use crate::sources::MomentumQuadrature;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharResult {
    pub x: Vec3,
    pub p: Vec3,
    pub steps_taken: usize,
    pub est_local_error: f64,
}

#[inline]
fn rhs(field: &dyn FieldFn, s: f64, x: Vec3, p: Vec3) -> (Vec3, Vec3) {
    let v = p_hat(p);
    (v, field.eval(s, x).force(v))
}

/// Fixed-step RK4 from s0 to s1 with `n` steps.
fn rk4(field: &dyn FieldFn, s0: f64, s1: f64, n: usize, mut x: Vec3, mut p: Vec3, check: bool) -> Result<(Vec3, Vec3)> {
    let h = (s1 - s0) / n as f64;
    let dom = field.domain();
    for k in 0..n {
        let s = s0 + k as f64 * h;
        if check {
            for (ss, xx) in [(s, x), (s + h, x + p_hat(p) * h)] {
                if !dom.contains(ss, xx) {
                    return Err(Error::DomainExceeded { t: ss, x_norm: xx.norm() });
                }
            }
        }
        let (k1x, k1p) = rhs(field, s, x, p);
        let (k2x, k2p) = rhs(field, s + 0.5 * h, x + k1x * (0.5 * h), p + k1p * (0.5 * h));
        let (k3x, k3p) = rhs(field, s + 0.5 * h, x + k2x * (0.5 * h), p + k2p * (0.5 * h));
        let (k4x, k4p) = rhs(field, s + h, x + k3x * h, p + k3p * h);
        x += (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (h / 6.0);
        p += (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * (h / 6.0);
    }
    Ok((x, p))
}

/// Ordered pieces of [t → s] on which the field may be nonzero.
fn active_piece(field: &dyn FieldFn, t: f64, s: f64) -> Option<(f64, f64)> {
    let (lo, hi) = field.active_window().unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let (a, b) = if t <= s { (t, s) } else { (s, t) };
    let (ca, cb) = (a.max(lo), b.min(hi));
    if ca >= cb {
        return None;
    }
    Some(if t <= s { (ca, cb) } else { (cb, ca) })
}

fn steps_for(span: f64, h: f64) -> usize {
    ((span.abs() / h).ceil() as usize).max(1)
}

/// Fixed-step solve without error control: free streaming outside the
/// field's active window, RK4 with steps ≤ `h` inside it.
pub fn solve_fixed(field: &dyn FieldFn, t: f64, x: Vec3, p: Vec3, s_target: f64, h: f64) -> (Vec3, Vec3) {
    match active_piece(field, t, s_target) {
        None => (x + p_hat(p) * (s_target - t), p),
        Some((a, b)) => {
            let x = x + p_hat(p) * (a - t);
            let (x, p) = rk4(field, a, b, steps_for(b - a, h), x, p, false).expect("unchecked solve");
            (x + p_hat(p) * (s_target - b), p)
        }
    }
}

/// Solves the characteristic through (t, x, p) to time `s_target`.
///
/// Runs RK4 with step ≤ `quad.ode_step`, estimates the error by Richardson
/// comparison with the half-step solution and halves the step until the
/// estimate meets `quad.ode_tol`.
pub fn integrate_characteristic(
    t: f64,
    x: Vec3,
    p: Vec3,
    field: &dyn FieldFn,
    s_target: f64,
    quad: &QuadratureSpec,
) -> Result<CharResult> {
    let dom = field.domain();
    if !dom.contains(t, x) {
        return Err(Error::DomainExceeded { t, x_norm: x.norm() });
    }
    let Some((a, b)) = active_piece(field, t, s_target) else {
        let xs = x + p_hat(p) * (s_target - t);
        if !dom.contains(s_target, xs) {
            return Err(Error::DomainExceeded { t: s_target, x_norm: xs.norm() });
        }
        return Ok(CharResult { x: xs, p, steps_taken: 0, est_local_error: 0.0 });
    };
    let x0 = x + p_hat(p) * (a - t);
    let mut n = steps_for(b - a, quad.ode_step);
    let mut total_steps = 0;
    let mut last = f64::INFINITY;
    for _ in 0..8 {
        let (xc, pc) = rk4(field, a, b, n, x0, p, true)?;
        let (xf, pf) = rk4(field, a, b, 2 * n, x0, p, true)?;
        total_steps += 3 * n;
        let est = ((xf - xc).norm() + (pf - pc).norm()) / 15.0;
        last = est;
        if est <= quad.ode_tol {
            let xs = xf + p_hat(pf) * (s_target - b);
            if !dom.contains(s_target, xs) {
                return Err(Error::DomainExceeded { t: s_target, x_norm: xs.norm() });
            }
            return Ok(CharResult { x: xs, p: pf, steps_taken: total_steps, est_local_error: est });
        }
        n *= 2;
    }
    Err(Error::ToleranceNotMet { estimate: last, tolerance: quad.ode_tol })
}

/// (X(0), P(0)) for the characteristic through (t, x, p).
pub fn backward_to_zero(t: f64, x: Vec3, p: Vec3, field: &dyn FieldFn, quad: &QuadratureSpec) -> Result<CharResult> {
    integrate_characteristic(t, x, p, field, 0.0, quad)
}

/// Determinant of the finite-difference Jacobian of (x, p) ↦ (X(0), P(0)).
pub fn flow_jacobian(t: f64, x: Vec3, p: Vec3, field: &dyn FieldFn, quad: &QuadratureSpec) -> Result<f64> {
    if t == 0.0 {
        return Ok(1.0);
    }
    let h = quad.fd_phase;
    let base = crate::PhasePoint::new(x, p);
    let mut jac = nalgebra::Matrix6::<f64>::zeros();
    for j in 0..6 {
        let plus = base.with_coord(j, base.coord(j) + h);
        let minus = base.with_coord(j, base.coord(j) - h);
        let (xp, pp) = checked_fixed(field, t, plus.x, plus.p, quad.ode_step)?;
        let (xm, pm) = checked_fixed(field, t, minus.x, minus.p, quad.ode_step)?;
        let dp = [xp - xm, pp - pm];
        for i in 0..6 {
            jac[(i, j)] = dp[i / 3][i % 3] / (2.0 * h);
        }
    }
    Ok(jac.determinant())
}

fn checked_fixed(field: &dyn FieldFn, t: f64, x: Vec3, p: Vec3, h: f64) -> Result<(Vec3, Vec3)> {
    let (xs, ps) = solve_fixed(field, t, x, p, 0.0, h);
    if !(xs.is_finite() && ps.is_finite()) {
        return Err(Error::NonFinite("characteristic endpoint".into()));
    }
    Ok((xs, ps))
}

/// Largest |p| over a deterministic phase sample where f exceeds its
/// support threshold; 0 for an empty support.
pub fn max_momentum_estimate(t: f64, f: &dyn PhaseDensity, quad: &QuadratureSpec) -> f64 {
    let bound = f.support();
    let thr = f.support_threshold();
    let mq = MomentumQuadrature::new(quad);
    let r = bound.spatial_radius(t);
    let n = 9;
    let mut nodes = Vec::new();
    let mut best: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let c = |m: usize| -r + 2.0 * r * m as f64 / (n - 1) as f64;
                let x = Vec3::new(c(i), c(j), c(k));
                if x.norm() > r {
                    continue;
                }
                mq.nodes_into(t, x, &bound, &mut nodes);
                for nd in &nodes {
                    let pn = nd.p.norm();
                    if pn > best && f.eval(t, x, nd.p) > thr {
                        best = pn;
                    }
                }
            }
        }
    }
    best
}
