//! Momentum quadrature and the charge/current moments ρ, j.

use crate::density::{PhaseDensity, SupportBound};
use crate::error::{Error, Result};
use crate::kinematics::{a_of_beta, Vec3};
use crate::quadrature::GaussLegendre;
use crate::settings::{MomentumRule, QuadratureSpec};

const MAX_AXIS_NODES: usize = 32;

/// Largest boundary value, relative to the interior peak, that still
/// counts as zero.
const BOUNDARY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy)]
pub struct MomentumNode {
    pub p: Vec3,
    /// p̂ at the node.
    pub v: Vec3,
    /// Weight for dp.
    pub w: f64,
}

/// Builds momentum nodes for integrals over p at fixed (t, x).
#[derive(Debug, Clone)]
pub struct MomentumQuadrature {
    rule: MomentumRule,
    gl: GaussLegendre,
}

impl MomentumQuadrature {
    pub fn new(spec: &QuadratureSpec) -> Self {
        Self::with_nodes(spec.momentum_rule, spec.momentum_nodes)
    }

    pub fn with_nodes(rule: MomentumRule, n: usize) -> Self {
        MomentumQuadrature { rule, gl: GaussLegendre::new(n) }
    }

    /// Box (per-axis intervals) in the integration variable, or None if the
    /// support bound excludes every momentum at (t, x).
    pub fn bounds(&self, t: f64, x: Vec3, bound: &SupportBound) -> Option<[(f64, f64); 3]> {
        match self.rule {
            MomentumRule::FixedBox => {
                let l = 2.0 * bound.radius.max(bound.max_momentum() * 0.5);
                Some([(-l, l); 3])
            }
            MomentumRule::SupportAdapted => {
                let pmax = bound.momentum_radius_at(t, x);
                if pmax <= 0.0 {
                    return None;
                }
                let amax = a_of_beta(pmax);
                let mut b = [(-amax, amax); 3];
                if !bound.frozen && t != 0.0 {
                    let c = x / t;
                    let rho = (bound.radius + t.abs() * bound.momentum_slack) / t.abs();
                    for (i, iv) in b.iter_mut().enumerate() {
                        iv.0 = iv.0.max(c[i] - rho);
                        iv.1 = iv.1.min(c[i] + rho);
                        if iv.0 >= iv.1 {
                            return None;
                        }
                    }
                }
                Some(b)
            }
        }
    }

    /// Fills `out` with the nodes at (t, x), dropping nodes where the
    /// support bound proves f = 0.
    pub fn nodes_into(&self, t: f64, x: Vec3, bound: &SupportBound, out: &mut Vec<MomentumNode>) {
        out.clear();
        let Some(b) = self.bounds(t, x, bound) else { return };
        let n = self.gl.len();
        if n > MAX_AXIS_NODES {
            return self.nodes_into_large(b, t, x, bound, out);
        }
        let mut ax = [[(0.0, 0.0); MAX_AXIS_NODES]; 3];
        for (i, (lo, hi)) in b.iter().enumerate() {
            for (k, node) in self.gl.on(*lo, *hi).enumerate() {
                ax[i][k] = node;
            }
        }
        match self.rule {
            MomentumRule::FixedBox => {
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            let p = Vec3::new(ax[0][i].0, ax[1][j].0, ax[2][k].0);
                            let w = ax[0][i].1 * ax[1][j].1 * ax[2][k].1;
                            out.push(MomentumNode { p, v: crate::p_hat(p), w });
                        }
                    }
                }
            }
            MomentumRule::SupportAdapted => {
                let amax = a_of_beta(bound.momentum_radius_at(t, x));
                let a2 = amax * amax;
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            let v = Vec3::new(ax[0][i].0, ax[1][j].0, ax[2][k].0);
                            let v2 = v.norm2();
                            if v2 >= a2 || !bound.may_contain(t, x, v) {
                                continue;
                            }
                            let s = 1.0 - v2;
                            let w = ax[0][i].1 * ax[1][j].1 * ax[2][k].1 / (s * s * s.sqrt());
                            out.push(MomentumNode { p: v / s.sqrt(), v, w });
                        }
                    }
                }
            }
        }
    }

    fn nodes_into_large(&self, b: [(f64, f64); 3], t: f64, x: Vec3, bound: &SupportBound, out: &mut Vec<MomentumNode>) {
        let ax: Vec<Vec<(f64, f64)>> = b.iter().map(|(lo, hi)| self.gl.on(*lo, *hi).collect()).collect();
        let amax = a_of_beta(bound.momentum_radius_at(t, x));
        for a in &ax[0] {
            for bb in &ax[1] {
                for c in &ax[2] {
                    let q = Vec3::new(a.0, bb.0, c.0);
                    let w = a.1 * bb.1 * c.1;
                    match self.rule {
                        MomentumRule::FixedBox => out.push(MomentumNode { p: q, v: crate::p_hat(q), w }),
                        MomentumRule::SupportAdapted => {
                            let v2 = q.norm2();
                            if v2 >= amax * amax || !bound.may_contain(t, x, q) {
                                continue;
                            }
                            let s = 1.0 - v2;
                            out.push(MomentumNode { p: q / s.sqrt(), v: q, w: w / (s * s * s.sqrt()) });
                        }
                    }
                }
            }
        }
    }

    /// Momenta at the centres of the box faces, used to detect densities
    /// that leak past the quadrature box.
    pub fn boundary_probes(&self, t: f64, x: Vec3, bound: &SupportBound) -> Vec<Vec3> {
        let Some(b) = self.bounds(t, x, bound) else { return Vec::new() };
        let mid = Vec3::new(0.5 * (b[0].0 + b[0].1), 0.5 * (b[1].0 + b[1].1), 0.5 * (b[2].0 + b[2].1));
        let mut out = Vec::with_capacity(6);
        for (i, iv) in b.iter().enumerate() {
            for e in [iv.0, iv.1] {
                let q = mid.with(i, e);
                match self.rule {
                    MomentumRule::FixedBox => out.push(q),
                    MomentumRule::SupportAdapted => {
                        if q.norm2() < 1.0 {
                            out.push(crate::kinematics::momentum_from_velocity(q));
                        }
                    }
                }
            }
        }
        out
    }
}

/// Charge density ρ = ∫ f dp and current j = ∫ p̂ f dp at (t, x).
pub fn sources(t: f64, x: Vec3, f: &dyn PhaseDensity, spec: &QuadratureSpec) -> Result<(f64, Vec3)> {
    let mq = MomentumQuadrature::new(spec);
    let bound = f.support();
    let mut nodes = Vec::new();
    mq.nodes_into(t, x, &bound, &mut nodes);
    let peak = nodes.iter().map(|n| f.eval(t, x, n.p)).fold(0.0, f64::max);
    let tol = (BOUNDARY_TOLERANCE * peak).max(f.support_threshold()).max(f64::MIN_POSITIVE);
    for p in mq.boundary_probes(t, x, &bound) {
        let v = f.eval(t, x, p);
        if v > tol {
            return Err(Error::QuadratureDomainViolation { value: v });
        }
    }
    Ok(moments(t, x, f, &nodes))
}

/// (ρ, j) from precomputed nodes.
#[inline]
pub fn moments(t: f64, x: Vec3, f: &dyn PhaseDensity, nodes: &[MomentumNode]) -> (f64, Vec3) {
    let mut rho = 0.0;
    let mut j = Vec3::ZERO;
    for n in nodes {
        let fw = f.eval(t, x, n.p) * n.w;
        rho += fw;
        j += n.v * fw;
    }
    (rho, j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{FrozenDensity, ZeroDensity};
    use crate::InitialData;

    #[test]
    fn zero_density_has_zero_sources() {
        let (rho, j) = sources(0.3, Vec3::new(0.1, 0.0, 0.0), &ZeroDensity { radius: 1.0 }, &QuadratureSpec::default()).unwrap();
        assert_eq!(rho, 0.0);
        assert_eq!(j, Vec3::ZERO);
    }

    fn rho_origin_oracle() -> f64 {
        // ρ(0,0) = ∫ (1 − |p|²)³ dp = 4π ∫₀¹ (1 − r²)³ r² dr
        let gl = GaussLegendre::new(40);
        4.0 * std::f64::consts::PI * gl.integrate(0.0, 1.0, |r| (1.0 - r * r).powi(3) * r * r)
    }

    #[test]
    fn rho_at_origin_matches_radial_oracle() {
        let d = InitialData::cubic(1.0, 1.0).unwrap();
        let f = FrozenDensity { initial: &d };
        let want = rho_origin_oracle();
        for rule in [MomentumRule::SupportAdapted, MomentumRule::FixedBox] {
            let spec = QuadratureSpec { momentum_rule: rule, momentum_nodes: 16, ..Default::default() };
            let (rho, j) = sources(0.0, Vec3::ZERO, &f, &spec).unwrap();
            assert!(((rho - want) / want).abs() < 2e-3, "{rule:?}: {rho} vs {want}");
            assert!(j.norm() < 1e-12 * rho);
        }
    }

    #[test]
    fn leaking_density_is_reported() {
        struct Wide;
        impl PhaseDensity for Wide {
            fn eval(&self, _t: f64, _x: Vec3, _p: Vec3) -> f64 {
                1.0
            }
            fn support(&self) -> SupportBound {
                SupportBound::new(1.0, 0.0)
            }
        }
        let err = sources(0.0, Vec3::ZERO, &Wide, &QuadratureSpec::default());
        assert!(matches!(err, Err(Error::QuadratureDomainViolation { .. })));
    }
}
