//! The approximation sequence f₁ → F₁ → f₂ → F₂ → … and its monitoring.

use crate::characteristics::max_momentum_estimate;
use crate::density::PhaseDensity;
use crate::error::{Error, Result};
use crate::initial::InitialData;
use crate::iterates::{FreeStreaming, IterateDensity, TableDensity};
use crate::kinematics::{a_of_beta, p_hat, FieldValue, Vec3};
use crate::retarded::{cone_domain, field_repr};
use crate::settings::{GridSpec, IterationSpec, QuadratureSpec};
use crate::table::FieldTable;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use std::time::Instant;

/// Density of iterate `n` (n ≥ 1); `prev` is F_{n−1} and is ignored for n = 1.
pub fn iterate_density(
    n: usize,
    initial: &Arc<InitialData>,
    prev: Option<&Arc<FieldTable>>,
    quad: &QuadratureSpec,
) -> IterateDensity {
    match (n, prev) {
        (1, _) | (_, None) => IterateDensity::Free(FreeStreaming::new(initial.clone(), quad.momentum_slack)),
        (_, Some(table)) => IterateDensity::Table(TableDensity {
            initial: initial.clone(),
            field: table.clone(),
            slack: quad.momentum_slack,
            step: quad.ode_step,
        }),
    }
}

/// f_{n+1}(t, x, p) by backward characteristics in the table of F_n.
pub fn density_from_table(
    initial: &InitialData,
    t: f64,
    x: Vec3,
    p: Vec3,
    table_prev: &FieldTable,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let r = crate::characteristics::backward_to_zero(t, x, p, table_prev, quad)?;
    Ok(initial.eval(r.x, r.p))
}

/// Fills a table with the represented field of `density`, transported by
/// its own force field.
pub fn build_field_table(density: &IterateDensity, grid: &GridSpec, quad: &QuadratureSpec) -> Result<FieldTable> {
    if density.initial().amplitude == 0.0 {
        return Ok(FieldTable::zeros(grid));
    }
    let force = density.force();
    FieldTable::from_fn(grid, |t, x| field_repr(t, x, density, force, quad))
}

/// (1 + |t| + |x|)(1 + |t − |x||)^w.
#[inline]
pub fn norm_weight(t: f64, x: Vec3, w: f64) -> f64 {
    let r = x.norm();
    (1.0 + t.abs() + r) * (1.0 + (t - r).abs()).powf(w)
}

/// sup over nodes of (1 + |t| + |x|)(1 + |t − |x||)^w |F|.
pub fn weighted_norm(table: &FieldTable, w: f64) -> f64 {
    (0..table.len())
        .map(|i| {
            let (t, x) = table.coords(i);
            norm_weight(t, x, w) * table.value(i).norm()
        })
        .fold(0.0, f64::max)
}

/// Weighted norm with w = 1 of the finite-difference gradient (∂ₜ and ∂ₓ).
pub fn gradient_norm(table: &FieldTable) -> f64 {
    (0..table.len())
        .map(|i| {
            let (t, x) = table.coords(i);
            let g = table.node_gradient(i);
            let mag = g.iter().map(|d| d.norm().powi(2)).sum::<f64>().sqrt();
            norm_weight(t, x, 1.0) * mag
        })
        .fold(0.0, f64::max)
}

/// Extents for iterates 1..=n_iter (the last one is `grid`), such that the
/// cone domains and characteristics of iterate n stay inside extent n−1.
pub fn domain_chain(grid: &GridSpec, radius: f64, n_iter: usize, ceiling_nodes: u64) -> Result<Vec<GridSpec>> {
    if n_iter == 0 {
        return Err(Error::Invalid("domain chain needs at least one iterate".into()));
    }
    let a = a_of_beta(2.0 * radius);
    let dt = (grid.t_max - grid.t_min) / (grid.n_t - 1) as f64;
    let dx = 2.0 * grid.half_width / (grid.n_x - 1) as f64;
    let mut out = vec![grid.clone()];
    for _ in 1..n_iter {
        let g = out.last().expect("nonempty chain");
        let far_t = g.t_min.abs().max(g.t_max.abs());
        let corner = Vec3::new(1.0, 1.0, 1.0) * g.half_width;
        let reach = cone_domain(far_t, corner, radius, a).r_max;
        let t_min = (g.t_min - reach).min(0.0);
        let t_max = g.t_max.max(0.0);
        let half = g.half_width.max(radius + a * t_min.abs().max(t_max.abs()));
        let n_t = ((t_max - t_min) / dt).ceil() as usize + 1;
        let n_x = 2 * ((half / dx).ceil() as usize) + 1;
        let next = GridSpec { t_min, t_max, half_width: half, n_t, n_x };
        if next.node_count() > ceiling_nodes {
            return Err(Error::InfeasibleBudget { needed: next.node_count(), ceiling: ceiling_nodes });
        }
        out.push(next);
    }
    out.reverse();
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct IterateDiagnostics {
    /// Rigorous bound on |P(s) − p| along characteristics of this field.
    pub momentum_drift_bound: f64,
    /// Fitted C in |F| ≤ C(1+|t|+|x|)^{−1}(1+|t−|x||)^{−1} on the grid.
    pub decay_constant: f64,
    /// Estimated impulse a particle would receive from the field outside
    /// the time window of the table.
    pub truncation_impulse: f64,
    /// Sampled 𝒫(t) of the density at the grid times.
    pub max_momentum: Vec<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct IterateRecord {
    pub n: usize,
    pub field: Arc<FieldTable>,
    pub norm_w34: f64,
    pub norm_w1: f64,
    /// ‖F_n − F_{n−1}‖_{3/4} with F₀ = 0.
    pub delta_norm: f64,
    pub contraction_ratio: Option<f64>,
    /// ‖D(F_n − F_{n−1})‖₁ of the finite-difference gradient.
    pub gradient_delta_norm: f64,
    pub gradient_ratio: Option<f64>,
    pub diagnostics: IterateDiagnostics,
}

/// Serializable part of an [`IterateRecord`].
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct IterateSummary {
    pub n: usize,
    pub norm_w34: f64,
    pub norm_w1: f64,
    pub delta_norm: f64,
    pub contraction_ratio: Option<f64>,
    pub gradient_delta_norm: f64,
    pub gradient_ratio: Option<f64>,
    pub converged: bool,
    pub diagnostics: IterateDiagnostics,
}

impl IterateRecord {
    pub fn summary(&self, converged: bool) -> IterateSummary {
        IterateSummary {
            n: self.n,
            norm_w34: self.norm_w34,
            norm_w1: self.norm_w1,
            delta_norm: self.delta_norm,
            contraction_ratio: self.contraction_ratio,
            gradient_delta_norm: self.gradient_delta_norm,
            gradient_ratio: self.gradient_ratio,
            converged,
            diagnostics: self.diagnostics.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Converged,
    MaxIterations,
    NonContraction,
}

pub struct RunOutput {
    pub initial: Arc<InitialData>,
    pub quad: QuadratureSpec,
    pub records: Vec<IterateRecord>,
    pub status: RunStatus,
    pub warnings: Vec<String>,
}

impl RunOutput {
    pub fn final_field(&self) -> &Arc<FieldTable> {
        &self.records.last().expect("a run has at least one iterate").field
    }

    /// Density of the last computed iterate, f_N (transported by F_{N−1}).
    pub fn final_density(&self) -> IterateDensity {
        self.density(self.records.len())
    }

    /// Density f_n of iterate n (1-based).
    pub fn density(&self, n: usize) -> IterateDensity {
        let prev = if n >= 2 { Some(&self.records[n - 2].field) } else { None };
        iterate_density(n, &self.initial, prev, &self.quad)
    }

    pub fn converged(&self) -> bool {
        self.status == RunStatus::Converged
    }

    pub fn into_result(self) -> Result<Self> {
        if self.status == RunStatus::NonContraction {
            let ratios = self.records.iter().filter_map(|r| r.contraction_ratio).collect();
            return Err(Error::NonContraction(ratios));
        }
        Ok(self)
    }
}

/// Runs the approximation sequence on `grid`; every iterate lives on the
/// same grid with zero field outside it.
pub fn run(
    initial: Arc<InitialData>,
    grid: &GridSpec,
    quad: &QuadratureSpec,
    iteration: &IterationSpec,
    mut progress: impl FnMut(&IterateRecord),
) -> Result<RunOutput> {
    grid.validate()?;
    quad.validate()?;
    let mut warnings = Vec::new();
    if initial.delta > iteration.smallness_threshold {
        warnings.push(format!(
            "Delta = {:.3e} exceeds the smallness threshold {:.3e}",
            initial.delta, iteration.smallness_threshold
        ));
    }
    let a2r = a_of_beta(2.0 * initial.radius);
    let needed = initial.radius + a2r * grid.t_min.abs().max(grid.t_max.abs());
    if grid.half_width < needed {
        warnings.push(format!("grid half-width {} is smaller than the support reach {needed:.3}", grid.half_width));
    }
    let mut records: Vec<IterateRecord> = Vec::new();
    let mut norm_f1 = 0.0;
    let mut status = RunStatus::MaxIterations;
    let mut rising = 0;
    for n in 1..=iteration.max_iter.max(1) {
        let started = Instant::now();
        let prev = records.last().map(|r| r.field.clone());
        let density = iterate_density(n, &initial, prev.as_ref(), quad);
        let table = build_field_table(&density, grid, quad)?;
        let drift = table.momentum_drift_bound();
        if drift > quad.momentum_slack {
            return Err(Error::MomentumSlackExceeded { bound: drift, slack: quad.momentum_slack });
        }
        let (delta, grad_delta) = match &prev {
            None => (weighted_norm(&table, 0.75), gradient_norm(&table)),
            Some(p) => {
                let d = table.difference(p)?;
                (weighted_norm(&d, 0.75), gradient_norm(&d))
            }
        };
        let ratio = |cur: f64, last: Option<f64>| match last {
            Some(l) if l > 0.0 => Some(cur / l),
            _ => None,
        };
        let contraction_ratio = ratio(delta, records.last().map(|r| r.delta_norm));
        let gradient_ratio = ratio(grad_delta, records.last().map(|r| r.gradient_delta_norm));
        let decay_constant = weighted_norm(&table, 1.0);
        let edge = grid.t_min.abs().min(grid.t_max.abs());
        let times: Vec<f64> = (0..grid.n_t).map(|i| table.t.node(i)).collect();
        let max_momentum = times.iter().map(|&t| max_momentum_estimate(t, &density, quad)).collect();
        let diagnostics = IterateDiagnostics {
            momentum_drift_bound: drift,
            decay_constant,
            truncation_impulse: decay_constant / ((1.0 - a2r) * (1.0 + edge)),
            max_momentum,
            seconds: started.elapsed().as_secs_f64(),
        };
        let record = IterateRecord {
            n,
            norm_w34: weighted_norm(&table, 0.75),
            norm_w1: weighted_norm(&table, 1.0),
            field: Arc::new(table),
            delta_norm: delta,
            contraction_ratio,
            gradient_delta_norm: grad_delta,
            gradient_ratio,
            diagnostics,
        };
        if n == 1 {
            norm_f1 = record.norm_w34;
        }
        progress(&record);
        let small = delta <= iteration.tolerance * norm_f1 && (n > 1 || norm_f1 == 0.0);
        let done = small && (n >= iteration.min_iter || norm_f1 == 0.0);
        rising = if contraction_ratio.is_some_and(|r| r > 1.0) { rising + 1 } else { 0 };
        records.push(record);
        if done {
            status = RunStatus::Converged;
            break;
        }
        if rising >= 2 {
            status = RunStatus::NonContraction;
            break;
        }
    }
    Ok(RunOutput { initial, quad: quad.clone(), records, status, warnings })
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CharDifference {
    pub n: usize,
    pub m: usize,
    /// sup |f_n − f_m| / (1+|t|)^{1/4}.
    pub density: f64,
    /// sup |X_n(0) − X_m(0)| / (1+|t|).
    pub position: f64,
    /// sup |P_n(0) − P_m(0)|.
    pub momentum: f64,
}

/// Seeded phase points near the support: (t, x, p) with (x − p̂t, p) drawn
/// from the initial support ball and t from `times`.
pub fn phase_samples(initial: &InitialData, times: &[f64], count: usize, seed: u64) -> Vec<(f64, Vec3, Vec3)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (c, r) = initial.support_ball();
    (0..count)
        .map(|k| {
            let z = loop {
                let z: [f64; 6] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
                if z.iter().map(|v| v * v).sum::<f64>() < 1.0 {
                    break z;
                }
            };
            let x0 = Vec3::new(c[0] + r * z[0], c[1] + r * z[1], c[2] + r * z[2]);
            let p = Vec3::new(c[3] + r * z[3], c[4] + r * z[4], c[5] + r * z[5]);
            let t = times[k % times.len()];
            (t, x0 + p_hat(p) * t, p)
        })
        .collect()
}

/// Sampled sups of the density and foot-point differences between two
/// iterates.
pub fn char_difference_diagnostics(
    n: usize,
    fn_: &IterateDensity,
    m: usize,
    fm: &IterateDensity,
    samples: &[(f64, Vec3, Vec3)],
) -> CharDifference {
    let mut out = CharDifference { n, m, density: 0.0, position: 0.0, momentum: 0.0 };
    for &(t, x, p) in samples {
        let (xn, pn) = fn_.foot(t, x, p);
        let (xm, pm) = fm.foot(t, x, p);
        let w = 1.0 + t.abs();
        let df = (fn_.initial().eval(xn, pn) - fm.initial().eval(xm, pm)).abs();
        out.density = out.density.max(df / w.powf(0.25));
        out.position = out.position.max((xn - xm).norm() / w);
        out.momentum = out.momentum.max((pn - pm).norm());
    }
    out
}

/// Evaluates the density on `samples` and returns the largest value found
/// beyond |x| = reach(t).
pub fn support_leak(f: &dyn PhaseDensity, samples: &[(f64, Vec3, Vec3)], reach: impl Fn(f64) -> f64) -> f64 {
    samples
        .iter()
        .filter(|(t, x, _)| x.norm() >= reach(*t))
        .map(|&(t, x, p)| f.eval(t, x, p))
        .fold(0.0, f64::max)
}

/// Field value helper for synthetic tables.
pub fn synthetic_table(grid: &GridSpec, f: impl Fn(f64, Vec3) -> FieldValue + Sync) -> FieldTable {
    FieldTable::from_fn(grid, |t, x| Ok(f(t, x))).expect("synthetic field is finite")
}
