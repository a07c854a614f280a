//! Densities of the approximation sequence.

use crate::characteristics::solve_fixed;
use crate::density::{FieldFn, PhaseDensity, SupportBound};
use crate::initial::InitialData;
use crate::kinematics::{p_hat, Vec3};
use crate::table::FieldTable;
use std::sync::Arc;

/// Relative threshold below which density values count as outside the
/// support.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;

/// f₁(t, x, p) = f^in(x − p̂t, p).
#[derive(Debug, Clone)]
pub struct FreeStreaming {
    pub initial: Arc<InitialData>,
    /// Momentum slack used for the quadrature boxes (kept equal across
    /// iterates so that all iterates share one discretisation).
    pub slack: f64,
}

impl FreeStreaming {
    pub fn new(initial: Arc<InitialData>, slack: f64) -> Self {
        FreeStreaming { initial, slack }
    }
}

/// Closed-form free-streaming density.
pub fn free_streaming_density(initial: &InitialData, t: f64, x: Vec3, p: Vec3) -> f64 {
    initial.eval(x - p_hat(p) * t, p)
}

impl PhaseDensity for FreeStreaming {
    #[inline]
    fn eval(&self, t: f64, x: Vec3, p: Vec3) -> f64 {
        free_streaming_density(&self.initial, t, x, p)
    }

    fn support(&self) -> SupportBound {
        SupportBound::new(self.initial.radius, self.slack)
    }

    fn support_threshold(&self) -> f64 {
        SUPPORT_THRESHOLD * self.initial.amplitude
    }
}

/// f_{n+1}(t, x, p) = f^in(X(0), P(0)) along characteristics of the
/// interpolated field F_n.
#[derive(Debug, Clone)]
pub struct TableDensity {
    pub initial: Arc<InitialData>,
    pub field: Arc<FieldTable>,
    pub slack: f64,
    /// Runge–Kutta step inside the table's time window.
    pub step: f64,
}

impl TableDensity {
    /// Foot point (X(0), P(0)) of the characteristic through (t, x, p).
    pub fn foot(&self, t: f64, x: Vec3, p: Vec3) -> (Vec3, Vec3) {
        solve_fixed(self.field.as_ref(), t, x, p, 0.0, self.step)
    }
}

impl PhaseDensity for TableDensity {
    #[inline]
    fn eval(&self, t: f64, x: Vec3, p: Vec3) -> f64 {
        let (x0, p0) = self.foot(t, x, p);
        self.initial.eval(x0, p0)
    }

    fn support(&self) -> SupportBound {
        SupportBound::new(self.initial.radius, self.slack)
    }

    fn support_threshold(&self) -> f64 {
        SUPPORT_THRESHOLD * self.initial.amplitude
    }
}

/// Density of iterate n ≥ 1: free streaming for n = 1, otherwise transported
/// by the previous field.
#[derive(Debug, Clone)]
pub enum IterateDensity {
    Free(FreeStreaming),
    Table(TableDensity),
}

impl IterateDensity {
    /// Foot point of the characteristic (free streaming for n = 1).
    pub fn foot(&self, t: f64, x: Vec3, p: Vec3) -> (Vec3, Vec3) {
        match self {
            IterateDensity::Free(_) => (x - p_hat(p) * t, p),
            IterateDensity::Table(d) => d.foot(t, x, p),
        }
    }

    /// Image at time t of the phase point (x0, p0) at time 0.
    pub fn forward(&self, t: f64, x0: Vec3, p0: Vec3) -> (Vec3, Vec3) {
        match self {
            IterateDensity::Free(_) => (x0 + p_hat(p0) * t, p0),
            IterateDensity::Table(d) => solve_fixed(d.field.as_ref(), 0.0, x0, p0, t, d.step),
        }
    }

    /// Field that transports this density, if any.
    pub fn transport_field(&self) -> Option<&FieldTable> {
        match self {
            IterateDensity::Free(_) => None,
            IterateDensity::Table(d) => Some(d.field.as_ref()),
        }
    }

    pub fn force(&self) -> Option<&dyn FieldFn> {
        self.transport_field().map(|t| t as &dyn FieldFn)
    }

    pub fn initial(&self) -> &InitialData {
        match self {
            IterateDensity::Free(d) => &d.initial,
            IterateDensity::Table(d) => &d.initial,
        }
    }
}

impl PhaseDensity for IterateDensity {
    #[inline]
    fn eval(&self, t: f64, x: Vec3, p: Vec3) -> f64 {
        match self {
            IterateDensity::Free(d) => d.eval(t, x, p),
            IterateDensity::Table(d) => d.eval(t, x, p),
        }
    }

    fn support(&self) -> SupportBound {
        match self {
            IterateDensity::Free(d) => d.support(),
            IterateDensity::Table(d) => d.support(),
        }
    }

    fn support_threshold(&self) -> f64 {
        SUPPORT_THRESHOLD * self.initial().amplitude
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::settings::GridSpec;

    #[test]
    fn free_streaming_examples() {
        let d = Arc::new(InitialData::cubic(1.0, 1.0).unwrap());
        let x = Vec3::new(0.2, 0.1, -0.3);
        let p = Vec3::new(0.1, 0.4, 0.0);
        assert_eq!(free_streaming_density(&d, 0.0, x, p), d.eval(x, p));
        let far = Vec3::new(1.0 + crate::a_of_beta(1.0) * 3.0 + 1e-9, 0.0, 0.0);
        for p in [Vec3::new(0.9, 0.0, 0.0), Vec3::new(0.3, 0.3, 0.0), Vec3::ZERO] {
            assert_eq!(free_streaming_density(&d, 3.0, far, p), 0.0);
        }
    }

    #[test]
    fn zero_table_reproduces_free_streaming() {
        let init = Arc::new(InitialData::cubic(1.0, 1.0).unwrap());
        let table = Arc::new(FieldTable::zeros(&GridSpec::default()));
        let td = TableDensity { initial: init.clone(), field: table, slack: 0.0, step: 0.25 };
        let fs = FreeStreaming::new(init, 0.0);
        for &(t, x, p) in &[
            (2.0, Vec3::new(1.0, 0.2, 0.0), Vec3::new(0.5, 0.1, 0.0)),
            (-3.0, Vec3::new(-1.5, 0.0, 0.3), Vec3::new(0.4, 0.0, -0.2)),
        ] {
            assert!((td.eval(t, x, p) - fs.eval(t, x, p)).abs() < 1e-15);
        }
        assert_eq!(td.eval(0.0, Vec3::new(0.1, 0.2, 0.3), Vec3::new(0.3, 0.0, 0.1)), fs.eval(0.0, Vec3::new(0.1, 0.2, 0.3), Vec3::new(0.3, 0.0, 0.1)));
    }
}
