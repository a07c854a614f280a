//! Post-run checks over a finished approximation sequence.

use crate::characteristics::{flow_jacobian, max_momentum_estimate};
use crate::config::RunConfig;
use crate::diagnostics::{
    decay_fit, energies, field_energy_tail, field_l2, fsc_check, fsc_samples, incoming_radiation, loglog_slope,
    lp_conservation, outgoing_radiation, support_volume, uniqueness_class_check, DecayFit, EnergyReport, FluxRule,
    FscReport, LpRow, PhaseRule, RadiationReport, UniquenessReport,
};
use crate::error::Result;
use crate::initial::InitialData;
use crate::iterates::IterateDensity;
use crate::kinematics::{a_of_beta, Vec3};
use crate::picard::{
    char_difference_diagnostics, gradient_norm, iterate_density, phase_samples, weighted_norm, CharDifference,
    RunOutput,
};
use crate::density::FieldFn;
use crate::kinematics::FieldValue;
use crate::retarded::{field_gradient, field_repr};
use crate::settings::QuadratureSpec;
use crate::table::FieldTable;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Everything a finished run leaves behind.
#[derive(Clone)]
pub struct RunArtifacts {
    pub config: RunConfig,
    pub initial: Arc<InitialData>,
    /// F₁, …, F_N.
    pub fields: Vec<Arc<FieldTable>>,
}

impl RunArtifacts {
    pub fn new(config: RunConfig, fields: Vec<Arc<FieldTable>>) -> Result<Self> {
        let initial = Arc::new(config.initial_data()?);
        Ok(RunArtifacts { config, initial, fields })
    }

    pub fn from_output(config: RunConfig, out: &RunOutput) -> Self {
        RunArtifacts {
            config,
            initial: out.initial.clone(),
            fields: out.records.iter().map(|r| r.field.clone()).collect(),
        }
    }

    pub fn iterations(&self) -> usize {
        self.fields.len()
    }

    /// f_n for 1 ≤ n ≤ N.
    pub fn density(&self, n: usize) -> IterateDensity {
        let prev = if n >= 2 { Some(&self.fields[n - 2]) } else { None };
        iterate_density(n, &self.initial, prev, &self.config.quadrature)
    }

    pub fn final_field(&self) -> &Arc<FieldTable> {
        self.fields.last().expect("a run has at least one field")
    }
}

/// The field represented by a density and its transport field, evaluated
/// pointwise rather than interpolated from a table. Failures evaluate to NaN.
pub struct RepresentedField<'a> {
    pub density: &'a IterateDensity,
    pub quad: &'a QuadratureSpec,
}

impl FieldFn for RepresentedField<'_> {
    fn eval(&self, t: f64, x: Vec3) -> FieldValue {
        field_repr(t, x, self.density, self.density.force(), self.quad).unwrap_or_else(|_| {
            let nan = Vec3::new(f64::NAN, f64::NAN, f64::NAN);
            FieldValue::new(nan, nan)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    #[serde(deserialize_with = "null_as_nan")]
    pub value: f64,
    #[serde(deserialize_with = "null_as_nan")]
    pub limit: f64,
    pub detail: String,
}

// JSON has no NaN; serde_json writes it as null.
fn null_as_nan<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

impl Check {
    fn new(name: &str, pass: bool, value: f64, limit: f64, detail: String) -> Self {
        Check { name: name.into(), pass, value, limit, detail }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayProbe {
    pub t: f64,
    pub x_norm: f64,
    pub field: f64,
    pub gradient: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSummary {
    pub checks: Vec<Check>,
    pub delta_norms: Vec<f64>,
    pub gradient_delta_norms: Vec<f64>,
    pub max_momentum: Vec<(usize, f64, f64)>,
    pub jacobian_max_deviation: f64,
    pub support_leak: f64,
    pub lp: Vec<LpRow>,
    pub energies: Vec<EnergyReport>,
    pub free_energy: (f64, f64),
    pub decay_probes: Vec<DecayProbe>,
    pub field_fit: Option<DecayFit>,
    pub gradient_fit: Option<DecayFit>,
    pub fsc: FscReport,
    pub incoming: Option<RadiationReport>,
    pub outgoing: Option<RadiationReport>,
    pub volumes: Vec<(f64, f64)>,
    pub volume_slope: Option<f64>,
    pub uniqueness: UniquenessReport,
    pub char_differences: Vec<CharDifference>,
}

impl DiagnosticsSummary {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn grid_times(table: &FieldTable) -> Vec<f64> {
    (0..table.t.count).map(|i| table.t.node(i)).collect()
}

/// Runs every post-run check; `progress` receives the name of each stage.
pub fn diagnose(art: &RunArtifacts, mut progress: impl FnMut(&str)) -> Result<DiagnosticsSummary> {
    let cfg = &art.config;
    let d = &cfg.diagnostics;
    let quad = &cfg.quadrature;
    let radius = art.initial.radius;
    let n_iter = art.iterations();
    let last = art.final_field();
    let times = grid_times(last);
    let cube = last.x.max;
    let f_last = art.density(n_iter);
    let mut checks = Vec::new();
    let zero_run = art.initial.amplitude == 0.0;

    progress("contraction");
    let mut delta_norms = Vec::new();
    let mut gradient_delta_norms = Vec::new();
    for (k, f) in art.fields.iter().enumerate() {
        if k == 0 {
            delta_norms.push(weighted_norm(f, 0.75));
            gradient_delta_norms.push(gradient_norm(f));
        } else {
            let diff = f.difference(&art.fields[k - 1])?;
            delta_norms.push(weighted_norm(&diff, 0.75));
            gradient_delta_norms.push(gradient_norm(&diff));
        }
    }
    let ratios = |v: &[f64]| -> Vec<f64> { v.windows(2).filter(|w| w[0] > 0.0).map(|w| w[1] / w[0]).collect() };
    let (r34, r1) = (ratios(&delta_norms), ratios(&gradient_delta_norms));
    let worst = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
    checks.push(Check::new(
        "contraction",
        zero_run || (!r34.is_empty() && worst(&r34) < 0.5),
        worst(&r34),
        0.5,
        format!("ratios {}", sci(&r34)),
    ));
    checks.push(Check::new(
        "gradient_contraction",
        zero_run || (!r1.is_empty() && worst(&r1) < 1.0),
        worst(&r1),
        1.0,
        format!("ratios {}", sci(&r1)),
    ));

    progress("momentum and support bounds");
    let mut max_momentum = Vec::new();
    for n in 1..=n_iter {
        let f = art.density(n);
        for &t in &times {
            max_momentum.push((n, t, max_momentum_estimate(t, &f, quad)));
        }
    }
    let p_worst = max_momentum.iter().map(|m| m.2).fold(0.0, f64::max);
    checks.push(Check::new("momentum_bound", p_worst <= 2.0 * radius, p_worst, 2.0 * radius, String::new()));

    let a2 = a_of_beta(2.0 * radius);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0001);
    let mut leak: f64 = 0.0;
    for n in 1..=n_iter {
        let f = art.density(n);
        for k in 0..d.support_samples {
            let t = times[k % times.len()];
            let reach = radius + a2 * t.abs();
            let dir = random_unit(&mut rng);
            let x = dir * (reach * (1.0 + 1e-9) + rng.gen_range(0.0..0.5 * reach));
            let p = random_unit(&mut rng) * (2.0 * radius * rng.gen_range(0.0f64..1.0).cbrt());
            leak = leak.max(crate::density::PhaseDensity::eval(&f, t, x, p));
        }
    }
    checks.push(Check::new("support_bound", leak == 0.0, leak, 0.0, "largest density beyond the support radius".into()));

    progress("flow jacobian");
    let mut jac_dev: f64 = 0.0;
    if n_iter >= 2 {
        let samples = phase_samples(&art.initial, &times, d.jacobian_samples, cfg.seed ^ 0x5eed_0002);
        for (k, &(t, x, p)) in samples.iter().enumerate() {
            let field = &art.fields[k % (n_iter - 1)];
            let det = flow_jacobian(t, x, p, field.as_ref(), quad)?;
            jac_dev = jac_dev.max((det - 1.0).abs());
        }
    }
    checks.push(Check::new(
        "flow_jacobian",
        jac_dev <= d.jacobian_tolerance,
        jac_dev,
        d.jacobian_tolerance,
        format!("{} samples", d.jacobian_samples),
    ));

    progress("Lp norms");
    let rule = PhaseRule::new(d.phase_x_nodes, d.phase_p_nodes);
    let lp = if zero_run { Vec::new() } else { lp_conservation(&f_last, &times, &rule) };
    let linf = lp.iter().map(|r| r.linf_drift).fold(0.0, f64::max);
    let l1 = lp.iter().map(|r| r.l1_drift).fold(0.0, f64::max);
    checks.push(Check::new("linf_conservation", linf <= d.linf_tolerance, linf, d.linf_tolerance, String::new()));
    checks.push(Check::new("l1_conservation", l1 <= d.l1_tolerance, l1, d.l1_tolerance, String::new()));

    progress("energies");
    let c_decay = weighted_norm(last, 1.0);
    let mut energy_rows = Vec::new();
    for &t in &times {
        let mut e = energies(t, &f_last, last.as_ref(), cube, &rule, d.field_panels);
        e.field_tail = field_energy_tail(c_decay, t, cube);
        energy_rows.push(e);
    }
    let e0 = energy_rows
        .iter()
        .min_by(|a, b| a.t.abs().total_cmp(&b.t.abs()))
        .map(|e| e.total)
        .unwrap_or(0.0);
    let e_drift = if e0 > 0.0 { energy_rows.iter().map(|e| (e.total - e0).abs() / e0).fold(0.0, f64::max) } else { 0.0 };
    checks.push(Check::new("energy_conservation", e_drift <= d.energy_tolerance, e_drift, d.energy_tolerance, String::new()));
    let f1 = art.density(1);
    let k0 = energies(0.0, &f1, &crate::density::ZeroField, cube, &rule, 1).kinetic;
    let k3 = energies(3.0, &f1, &crate::density::ZeroField, cube, &rule, 1).kinetic;
    let free_drift = if k0 > 0.0 { (k3 - k0).abs() / k0 } else { 0.0 };
    checks.push(Check::new(
        "free_streaming_energy",
        free_drift <= d.quadrature_tolerance,
        free_drift,
        d.quadrature_tolerance,
        format!("kinetic {k0:.6e} at t = 0, {k3:.6e} at t = 3"),
    ));

    progress("decay fits");
    let (decay_probes, field_fit, gradient_fit) = if zero_run {
        (Vec::new(), None, None)
    } else {
        let probes = decay_probes(art, &f_last)?;
        let ff = decay_fit(&probes.iter().map(|p| (p.t, p.x_norm, p.field)).collect::<Vec<_>>());
        let ff = ff.ok();
        let gf = decay_fit(
            &probes.iter().filter(|p| p.gradient > 0.0).map(|p| (p.t, p.x_norm, p.gradient)).collect::<Vec<_>>(),
        )
        .ok();
        (probes, ff, gf)
    };
    match &field_fit {
        Some(fit) => checks.push(Check::new(
            "decay_field",
            fit.alpha1 >= 0.95 && fit.alpha2 >= 0.95 && fit.residual <= 0.15,
            fit.alpha1.min(fit.alpha2),
            0.95,
            format!("alpha1 {:.3}, alpha2 {:.3}, residual {:.3}, {} probes", fit.alpha1, fit.alpha2, fit.residual, fit.probes),
        )),
        None => checks.push(Check::new("decay_field", zero_run, f64::NAN, 0.95, "no fit".into())),
    }
    match (&field_fit, &gradient_fit) {
        (Some(ff), Some(gf)) => checks.push(Check::new(
            "decay_gradient",
            gf.alpha2 >= ff.alpha2 - 0.05,
            gf.alpha2,
            ff.alpha2 - 0.05,
            format!("gradient alpha1 {:.3}, alpha2 {:.3}, residual {:.3}", gf.alpha1, gf.alpha2, gf.residual),
        )),
        _ => checks.push(Check::new("decay_gradient", zero_run, f64::NAN, f64::NAN, "no fit".into())),
    }

    progress("free streaming condition");
    let sample = fsc_samples(radius, last.t.min, last.t.max, 64, cfg.seed ^ 0x5eed_0003);
    let fsc = fsc_check(last.as_ref(), quad.fd_field, d.fsc_eta, d.fsc_alpha, radius, &sample)?;
    checks.push(Check::new("free_streaming_condition", fsc.pass, fsc.eta, d.fsc_eta, format!("alpha {}", d.fsc_alpha)));

    progress("radiation");
    let flux_rule = FluxRule { theta: d.sphere_theta, phi: d.sphere_phi, time_nodes: d.flux_time_nodes };
    let [v1, v2] = d.v_window;
    let represented = RepresentedField { density: &f_last, quad };
    let (incoming, outgoing) = if zero_run {
        (None, None)
    } else {
        (
            incoming_radiation(v1, v2, &d.radii, &represented, last.coverage(), &flux_rule).ok(),
            outgoing_radiation(-v2, -v1, &d.radii, &represented, last.coverage(), &flux_rule).ok(),
        )
    };
    match (&incoming, &outgoing) {
        _ if zero_run => checks.push(Check::new("incoming_radiation", true, 0.0, d.radiation_fraction, "no field".into())),
        (Some(inc), Some(out)) => {
            let scale = out.fluxes.iter().map(|f| f.abs()).fold(0.0, f64::max);
            let ratio = if scale > 0.0 { inc.extrapolated.abs() / scale } else { 0.0 };
            let flat_zero = inc.fluxes.iter().all(|f| *f == 0.0);
            checks.push(Check::new(
                "incoming_radiation",
                (inc.decreasing || flat_zero) && ratio <= d.radiation_fraction,
                ratio,
                d.radiation_fraction,
                format!(
                    "incoming {} -> {:.3e}; outgoing {} -> {:.3e}",
                    sci(&inc.fluxes),
                    inc.extrapolated,
                    sci(&out.fluxes),
                    out.extrapolated
                ),
            ));
        }
        _ => checks.push(Check::new("incoming_radiation", false, f64::NAN, d.radiation_fraction, "radii or window outside the table".into())),
    }

    progress("support volume");
    let volumes: Vec<(f64, f64)> =
        d.volume_times.iter().map(|&t| (t, support_volume(t, Vec3::ZERO, &f_last, d.volume_cells))).collect();
    let volume_slope = loglog_slope(&volumes.iter().map(|&(t, v)| (1.0 + t.abs(), v)).collect::<Vec<_>>()).ok();
    checks.push(Check::new(
        "support_volume",
        zero_run || volume_slope.is_some_and(|s| s <= -2.5),
        volume_slope.unwrap_or(f64::NAN),
        -2.5,
        format!("volumes {}", sci(&volumes.iter().map(|v| v.1).collect::<Vec<_>>())),
    ));

    progress("uniqueness class");
    let slices: Vec<(f64, f64)> = times.iter().map(|&t| (t, field_l2(last.as_ref(), t, cube, d.field_panels))).collect();
    let uniqueness = uniqueness_class_check(&slices);
    checks.push(Check::new(
        "uniqueness_class",
        uniqueness.pass,
        uniqueness.rows.first().map(|r| r.1).unwrap_or(0.0),
        f64::NAN,
        format!("L2 {}", sci(&uniqueness.rows.iter().map(|r| r.1).collect::<Vec<_>>())),
    ));

    progress("characteristic differences");
    let samples = phase_samples(&art.initial, &times, d.char_samples, cfg.seed ^ 0x5eed_0004);
    let mut char_differences = Vec::new();
    for n in 2..=n_iter {
        char_differences.push(char_difference_diagnostics(n, &art.density(n), n - 1, &art.density(n - 1), &samples));
    }
    let shrinking = char_differences.windows(2).all(|w| {
        let (a, b) = (&w[0], &w[1]);
        b.density < a.density && b.position < a.position && b.momentum < a.momentum
    });
    checks.push(Check::new(
        "characteristic_differences",
        zero_run || shrinking,
        char_differences.last().map(|c| c.momentum).unwrap_or(0.0),
        f64::NAN,
        String::new(),
    ));

    Ok(DiagnosticsSummary {
        checks,
        delta_norms,
        gradient_delta_norms,
        max_momentum,
        jacobian_max_deviation: jac_dev,
        support_leak: leak,
        lp,
        energies: energy_rows,
        free_energy: (k0, k3),
        decay_probes,
        field_fit,
        gradient_fit,
        fsc,
        incoming,
        outgoing,
        volumes,
        volume_slope,
        uniqueness,
        char_differences,
    })
}

/// Draws `count` items round-robin over the cells given by `cell`, so every
/// occupied cell contributes before any contributes twice.
fn stratified(
    items: &[usize],
    count: usize,
    rng: &mut ChaCha8Rng,
    cell: impl Fn(usize) -> (i64, i64),
) -> Vec<usize> {
    let mut cells: std::collections::BTreeMap<(i64, i64), Vec<usize>> = Default::default();
    for &i in items {
        cells.entry(cell(i)).or_default().push(i);
    }
    let mut groups: Vec<Vec<usize>> = cells.into_values().collect();
    for g in &mut groups {
        g.shuffle(rng);
        g.reverse();
    }
    let mut out = Vec::with_capacity(count);
    while out.len() < count && groups.iter().any(|g| !g.is_empty()) {
        for g in &mut groups {
            if out.len() == count {
                break;
            }
            if let Some(i) = g.pop() {
                out.push(i);
            }
        }
    }
    out.sort_unstable();
    out
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Seeded table nodes with nonzero field, the field magnitude there and the
/// magnitude of the spatial gradient of the represented field.
fn decay_probes(art: &RunArtifacts, f_last: &IterateDensity) -> Result<Vec<DecayProbe>> {
    use rayon::prelude::*;
    let last = art.final_field();
    let peak = last.values.iter().map(|v| crate::FieldValue::from_components(*v).norm()).fold(0.0, f64::max);
    let nodes: Vec<usize> = (0..last.len()).filter(|&i| last.value(i).norm() > 1e-12 * peak).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(art.config.seed ^ 0x5eed_0005);
    let nodes = stratified(&nodes, art.config.diagnostics.decay_probes, &mut rng, |i| {
        let (t, x) = last.coords(i);
        let r = x.norm();
        ((2.0 * (1.0 + t.abs() + r).ln()) as i64, (2.0 * (1.0 + (t - r).abs()).ln()) as i64)
    });
    let force = f_last.force();
    nodes
        .par_iter()
        .map(|&i| {
            let (t, x) = last.coords(i);
            let g = field_gradient(t, x, f_last, force, &art.config.quadrature)?;
            let gradient = g[1..].iter().map(|d| d.norm().powi(2)).sum::<f64>().sqrt();
            Ok(DecayProbe { t, x_norm: x.norm(), field: last.value(i).norm(), gradient })
        })
        .collect()
}
