//! Evaluator abstractions shared by the field and kinetic modules.

use crate::kinematics::{a_of_beta, FieldValue, Vec3};

/// Space-time box on which a field is declared valid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub t_min: f64,
    pub t_max: f64,
    /// Half-width of the spatial cube.
    pub half_width: f64,
}

impl Domain {
    pub const EVERYWHERE: Domain =
        Domain { t_min: f64::NEG_INFINITY, t_max: f64::INFINITY, half_width: f64::INFINITY };

    pub fn contains(&self, t: f64, x: Vec3) -> bool {
        t >= self.t_min && t <= self.t_max && x.max_abs() <= self.half_width
    }
}

/// A field F(t, x) with its declared domain.
pub trait FieldFn: Sync {
    fn eval(&self, t: f64, x: Vec3) -> FieldValue;

    fn domain(&self) -> Domain {
        Domain::EVERYWHERE
    }

    /// Time window outside of which the field vanishes identically, if any.
    fn active_window(&self) -> Option<(f64, f64)> {
        None
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroField;

impl FieldFn for ZeroField {
    fn eval(&self, _t: f64, _x: Vec3) -> FieldValue {
        FieldValue::ZERO
    }

    fn active_window(&self) -> Option<(f64, f64)> {
        Some((0.0, 0.0))
    }
}

/// Adapter turning a closure into a [`FieldFn`] valid everywhere.
pub struct FnField<F>(pub F);

impl<F: Fn(f64, Vec3) -> FieldValue + Sync> FieldFn for FnField<F> {
    fn eval(&self, t: f64, x: Vec3) -> FieldValue {
        (self.0)(t, x)
    }
}

/// A priori bound on where a density can be nonzero.
///
/// f(t, x, p) = f^in(X(0), P(0)) with |X(0)|² + |P(0)|² < R² and
/// |P(s) − p| ≤ `momentum_slack` along the whole characteristic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportBound {
    pub radius: f64,
    pub momentum_slack: f64,
    /// Density does not move (time-frozen test sources).
    pub frozen: bool,
}

impl SupportBound {
    pub fn new(radius: f64, momentum_slack: f64) -> Self {
        SupportBound { radius, momentum_slack, frozen: false }
    }

    pub fn frozen(radius: f64) -> Self {
        SupportBound { radius, momentum_slack: 0.0, frozen: true }
    }

    fn moving_time(&self, t: f64) -> f64 {
        if self.frozen {
            0.0
        } else {
            t.abs()
        }
    }

    pub fn max_momentum(&self) -> f64 {
        self.radius + self.momentum_slack
    }

    /// Speed bound for particles in the support.
    pub fn speed(&self) -> f64 {
        a_of_beta(self.max_momentum())
    }

    /// Spatial support radius at time t.
    pub fn spatial_radius(&self, t: f64) -> f64 {
        self.radius + self.speed() * self.moving_time(t)
    }

    /// Bound on |p| for the support at (t, x).
    pub fn momentum_radius_at(&self, t: f64, x: Vec3) -> f64 {
        let d = (x.norm() - self.speed() * self.moving_time(t)).max(0.0);
        if d >= self.radius {
            return 0.0;
        }
        (self.radius * self.radius - d * d).sqrt() + self.momentum_slack
    }

    /// Whether (t, x, p) can be in the support.
    #[inline]
    pub fn may_contain(&self, t: f64, x: Vec3, v: Vec3) -> bool {
        if self.frozen {
            return x.norm2() <= self.radius * self.radius;
        }
        let reach = self.radius + t.abs() * self.momentum_slack;
        (x - v * t).norm2() <= reach * reach
    }
}

/// A phase-space density f(t, x, p).
pub trait PhaseDensity: Sync {
    fn eval(&self, t: f64, x: Vec3, p: Vec3) -> f64;

    fn support(&self) -> SupportBound;

    /// Threshold above which a value counts as being in the support.
    fn support_threshold(&self) -> f64 {
        0.0
    }
}

/// The identically vanishing density.
#[derive(Debug, Clone, Copy)]
pub struct ZeroDensity {
    pub radius: f64,
}

impl PhaseDensity for ZeroDensity {
    fn eval(&self, _t: f64, _x: Vec3, _p: Vec3) -> f64 {
        0.0
    }

    fn support(&self) -> SupportBound {
        SupportBound::new(self.radius, 0.0)
    }
}

/// f^in transported without time dependence (a frozen charge cloud).
pub struct FrozenDensity<'a> {
    pub initial: &'a crate::InitialData,
}

impl PhaseDensity for FrozenDensity<'_> {
    fn eval(&self, _t: f64, x: Vec3, p: Vec3) -> f64 {
        self.initial.eval(x, p)
    }

    fn support(&self) -> SupportBound {
        SupportBound::frozen(self.initial.radius)
    }
}
