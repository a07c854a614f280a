//! Discretisation parameters.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// How momentum integrals are discretised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MomentumRule {
    /// Tensor Gauss–Legendre in velocity space over the box that the support
    /// bound allows at (t, x), with dp = (1−|v|²)^{−5/2} dv.
    #[default]
    SupportAdapted,
    /// Tensor Gauss–Legendre over the fixed box |p_i| ≤ 2R.
    FixedBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSpec {
    /// Gauss–Legendre nodes per radial panel.
    pub radial_nodes: usize,
    /// Smallest radial panel width.
    pub radial_panel_min: f64,
    /// Panel width as a fraction of the panel's starting radius.
    pub radial_panel_growth: f64,
    /// Gauss–Legendre nodes in cos θ.
    pub angular_theta: usize,
    /// Uniform nodes in φ.
    pub angular_phi: usize,
    /// Momentum nodes per axis.
    pub momentum_nodes: usize,
    pub momentum_rule: MomentumRule,
    /// Allowed drift |P(s) − p| along characteristics; fixes the momentum
    /// boxes for every iterate and is checked against the field tables.
    pub momentum_slack: f64,
    /// Largest Runge–Kutta step.
    pub ode_step: f64,
    /// Local error tolerance of the controlled integrator.
    pub ode_tol: f64,
    /// Central-difference step for source derivatives.
    pub fd_source: f64,
    /// Central-difference step for field gradients.
    pub fd_field: f64,
    /// Central-difference step in phase coordinates.
    pub fd_phase: f64,
    /// Points per axis of the Δ lattice.
    pub delta_lattice: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            radial_nodes: 4,
            radial_panel_min: 0.5,
            radial_panel_growth: 0.25,
            angular_theta: 8,
            angular_phi: 16,
            momentum_nodes: 8,
            momentum_rule: MomentumRule::SupportAdapted,
            momentum_slack: 0.005,
            ode_step: 0.25,
            ode_tol: 1e-6,
            fd_source: 1e-3,
            fd_field: 1e-2,
            fd_phase: 1e-4,
            delta_lattice: crate::initial::DELTA_LATTICE,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("radial_nodes", self.radial_nodes),
            ("angular_theta", self.angular_theta),
            ("angular_phi", self.angular_phi),
            ("momentum_nodes", self.momentum_nodes),
            ("delta_lattice", self.delta_lattice),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("quadrature.{name} must be positive")));
            }
        }
        let reals = [
            ("radial_panel_min", self.radial_panel_min),
            ("ode_step", self.ode_step),
            ("ode_tol", self.ode_tol),
            ("fd_source", self.fd_source),
            ("fd_field", self.fd_field),
            ("fd_phase", self.fd_phase),
        ];
        for (name, v) in reals {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("quadrature.{name} must be positive, got {v}")));
            }
        }
        if !(self.radial_panel_growth >= 0.0) || !(self.momentum_slack >= 0.0) {
            return Err(Error::Config("quadrature growth and slack must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Uniform space-time grid of a field table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub t_min: f64,
    pub t_max: f64,
    /// Half-width L of the cube [−L, L]³.
    pub half_width: f64,
    pub n_t: usize,
    pub n_x: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { t_min: -4.0, t_max: 4.0, half_width: 6.0, n_t: 5, n_x: 5 }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_max > self.t_min) || !(self.half_width > 0.0) {
            return Err(Error::Config("grid needs t_max > t_min and half_width > 0".into()));
        }
        if self.n_t < 2 || self.n_x < 2 {
            return Err(Error::Config("grid needs at least two nodes per axis".into()));
        }
        Ok(())
    }

    pub fn node_count(&self) -> u64 {
        self.n_t as u64 * (self.n_x as u64).pow(3)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IterationSpec {
    pub max_iter: usize,
    /// Iterates computed before the stopping test may end the run.
    pub min_iter: usize,
    /// Stop when ‖F_n − F_{n−1}‖_{3/4} ≤ tolerance·‖F₁‖_{3/4}.
    pub tolerance: f64,
    /// Largest table (in nodes) the domain chain may ask for.
    pub memory_ceiling_nodes: u64,
    /// Δ above which a warning is recorded.
    pub smallness_threshold: f64,
}

impl Default for IterationSpec {
    fn default() -> Self {
        IterationSpec { max_iter: 3, min_iter: 1, tolerance: 1e-3, memory_ceiling_nodes: 50_000_000, smallness_threshold: 0.05 }
    }
}
