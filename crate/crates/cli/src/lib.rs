//! Command implementations behind the `rvmret` binary.

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use rvmret_core::checks::{diagnose, DiagnosticsSummary};
use rvmret_core::config::RunConfig;
use rvmret_core::lightcone::{check_bounds, cone_samples, shell_comparisons, Family, ESTIMATE_PAIRS};
use rvmret_core::picard::{self, RunStatus};
use rvmret_core::rundir::{self, field_path};
use rvmret_core::table::FieldTable;
use rvmret_core::{FieldValue, Vec3};
use serde::Serialize;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Exit status for a run whose checks failed or whose iteration diverged.
pub const EXIT_CHECK_FAILED: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "rvmret", version, about = "Retarded relativistic Vlasov-Maxwell solver and estimate verifier")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory or file, depending on the command.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; overrides the configured count.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Suppress progress output.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the approximation sequence and write a run directory.
    Simulate,
    /// Check the light-cone integral bounds on seeded samples.
    VerifyLemma4 {
        /// Families to check (I1, I2, II); defaults to the pairs the estimates use.
        #[arg(long = "family", value_delimiter = ',')]
        families: Vec<String>,
        /// Exponents, decimals or fractions like 23/4.
        #[arg(long = "q", value_delimiter = ',')]
        qs: Vec<String>,
        #[arg(long, default_value_t = 200)]
        samples: usize,
        /// Sample window |t| ≤ t_max, |x| ≤ x_max.
        #[arg(long, default_value_t = 20.0)]
        t_max: f64,
        #[arg(long, default_value_t = 20.0)]
        x_max: f64,
    },
    /// Compare the reduced shell integral with direct spherical quadrature.
    VerifyLemmaA {
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
    },
    /// Evaluate the final field and its gradient at points from a CSV file.
    Probe { run_dir: PathBuf, points: PathBuf },
    /// Run the post-run checks on a run directory.
    Diagnose { run_dir: PathBuf },
    /// Print a summary of a run directory.
    Report { run_dir: PathBuf },
}

/// Runs a parsed command line; returns the process exit status.
pub fn execute(cli: Cli, stdout: &mut (dyn Write + Send)) -> anyhow::Result<u8> {
    let threads = cli.common.threads;
    match cli.command {
        Command::Simulate => {
            let path = cli.common.config.clone().ok_or_else(|| anyhow!("simulate needs --config"))?;
            let mut cfg = RunConfig::load(&path)?;
            apply_overrides(&mut cfg, &cli.common);
            let dir = cli
                .common
                .out
                .clone()
                .or_else(|| cfg.output_dir.clone())
                .ok_or_else(|| anyhow!("no output directory: pass --out or set output_dir"))?;
            in_pool(cfg.threads, || simulate(&cfg, &dir, cli.common.quiet, stdout))
        }
        Command::VerifyLemma4 { families, qs, samples, t_max, x_max } => {
            let pairs = lemma4_pairs(&families, &qs)?;
            let seed = cli.common.seed.unwrap_or(0);
            in_pool(threads.unwrap_or(1), || {
                verify_lemma4(&pairs, samples, t_max, x_max, seed, cli.common.out.as_deref(), stdout)
            })
        }
        Command::VerifyLemmaA { count, tolerance } => {
            let seed = cli.common.seed.unwrap_or(0);
            verify_lemma_a(count, tolerance, seed, cli.common.out.as_deref(), stdout)
        }
        Command::Probe { run_dir, points } => probe(&run_dir, &points, cli.common.out.as_deref(), stdout),
        Command::Diagnose { run_dir } => {
            let mut art = rundir::load_run(&run_dir)?;
            apply_overrides(&mut art.config, &cli.common);
            let out = cli.common.out.clone().unwrap_or_else(|| run_dir.clone());
            let quiet = cli.common.quiet;
            in_pool(art.config.threads, || {
                let summary = diagnose(&art, |stage| {
                    if !quiet {
                        eprintln!("diagnose: {stage}");
                    }
                })?;
                write_diagnostics(&out, &summary)?;
                print_checks(stdout, &summary)?;
                Ok(if summary.all_pass() { 0 } else { EXIT_CHECK_FAILED })
            })
        }
        Command::Report { run_dir } => report(&run_dir, stdout),
    }
}

fn apply_overrides(cfg: &mut RunConfig, common: &Common) {
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = common.threads {
        cfg.threads = threads;
    }
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> anyhow::Result<T> + Send) -> anyhow::Result<T> {
    if threads == 0 {
        bail!("threads must be at least 1");
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    pool.install(f)
}

pub fn simulate(cfg: &RunConfig, dir: &Path, quiet: bool, stdout: &mut (dyn Write + Send)) -> anyhow::Result<u8> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for stale in (1..).map(|n| field_path(dir, n)).take_while(|p| p.exists()) {
        std::fs::remove_file(stale)?;
    }
    let mut snapshot = cfg.clone();
    snapshot.output_dir = None;
    rundir::write_config(dir, &snapshot)?;
    let initial = Arc::new(cfg.initial_data()?);
    if !quiet {
        eprintln!("simulate: Delta = {:.4e}, grid {} x {}^3", initial.delta, cfg.grid.n_t, cfg.grid.n_x);
    }
    let mut save_error = None;
    let out = picard::run(initial, &cfg.grid, &cfg.quadrature, &cfg.iteration, |rec| {
        if let Err(e) = rec.field.save(&field_path(dir, rec.n)) {
            save_error.get_or_insert(e);
        }
        if !quiet {
            let ratio = rec.contraction_ratio.map(|r| format!("{r:.3e}")).unwrap_or_else(|| "-".into());
            eprintln!(
                "iterate {}: |F|_3/4 = {:.4e}, |dF|_3/4 = {:.4e}, ratio {ratio}, {:.1} s",
                rec.n, rec.norm_w34, rec.delta_norm, rec.diagnostics.seconds
            );
        }
    })?;
    if let Some(e) = save_error {
        return Err(e.into());
    }
    let summary = rundir::write_run(dir, &snapshot, &out)?;
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    let status = serde_json::to_value(summary.status)?;
    writeln!(stdout, "status {} after {} iterates", status.as_str().unwrap_or("?"), summary.iterations)?;
    Ok(match summary.status {
        RunStatus::NonContraction => EXIT_CHECK_FAILED,
        RunStatus::Converged => 0,
        RunStatus::MaxIterations => {
            eprintln!("warning: stopping tolerance not reached within max_iter");
            0
        }
    })
}

/// Parses `23/4`, `5.75` or `5`.
pub fn parse_exponent(s: &str) -> anyhow::Result<f64> {
    let v = match s.split_once('/') {
        Some((a, b)) => a.trim().parse::<f64>()? / b.trim().parse::<f64>()?,
        None => s.trim().parse::<f64>()?,
    };
    if !v.is_finite() {
        bail!("exponent {s} is not finite");
    }
    Ok(v)
}

fn lemma4_pairs(families: &[String], qs: &[String]) -> anyhow::Result<Vec<(Family, f64)>> {
    if families.is_empty() && qs.is_empty() {
        return Ok(ESTIMATE_PAIRS.to_vec());
    }
    if families.is_empty() || qs.is_empty() {
        bail!("--family and --q must be given together");
    }
    let qs = qs.iter().map(|q| parse_exponent(q)).collect::<anyhow::Result<Vec<_>>>()?;
    let mut pairs = Vec::new();
    for f in families {
        let family = Family::parse(f)?;
        pairs.extend(qs.iter().map(|&q| (family, q)));
    }
    Ok(pairs)
}

#[derive(Serialize)]
struct BoundCsvRow {
    family: String,
    q: f64,
    t: f64,
    x_norm: f64,
    value: f64,
    shape: f64,
    ratio: f64,
}

pub fn verify_lemma4(
    pairs: &[(Family, f64)],
    samples: usize,
    t_max: f64,
    x_max: f64,
    seed: u64,
    out: Option<&Path>,
    stdout: &mut (dyn Write + Send),
) -> anyhow::Result<u8> {
    let sample = cone_samples(samples, t_max, x_max, seed);
    let mut reports = Vec::new();
    for &(family, q) in pairs {
        reports.push(check_bounds(family, q, &sample)?);
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("lemma4.csv"))?;
        for r in &reports {
            for row in &r.rows {
                w.serialize(BoundCsvRow {
                    family: r.family.to_string(),
                    q: r.q,
                    t: row.t,
                    x_norm: row.x_norm,
                    value: row.value,
                    shape: row.shape,
                    ratio: row.ratio,
                })?;
            }
        }
        w.flush()?;
        rundir::write_json(&dir.join("lemma4.json"), &reports.iter().map(|r| BoundSummary::from(r)).collect::<Vec<_>>())?;
    }
    let mut all = true;
    for r in &reports {
        let verdict = if r.inconclusive {
            "INCONCLUSIVE"
        } else if r.pass {
            "PASS"
        } else {
            "FAIL"
        };
        all &= r.pass;
        writeln!(
            stdout,
            "{verdict} {}^{}: sup ratio {:.4e}, first-half sup {:.4e}, worst at t = {:.3}, |x| = {:.3}",
            r.family, r.q, r.fitted_constant, r.half_constant, r.worst.0, r.worst.1
        )?;
    }
    Ok(if all { 0 } else { EXIT_CHECK_FAILED })
}

#[derive(Serialize)]
struct BoundSummary {
    family: String,
    q: f64,
    samples: usize,
    fitted_constant: f64,
    half_constant: f64,
    worst: (f64, f64),
    inconclusive: bool,
    pass: bool,
}

impl From<&rvmret_core::lightcone::BoundCheckReport> for BoundSummary {
    fn from(r: &rvmret_core::lightcone::BoundCheckReport) -> Self {
        BoundSummary {
            family: r.family.to_string(),
            q: r.q,
            samples: r.rows.len(),
            fitted_constant: r.fitted_constant,
            half_constant: r.half_constant,
            worst: r.worst,
            inconclusive: r.inconclusive,
            pass: r.pass,
        }
    }
}

pub fn verify_lemma_a(count: usize, tolerance: f64, seed: u64, out: Option<&Path>, stdout: &mut (dyn Write + Send)) -> anyhow::Result<u8> {
    let rows = shell_comparisons(count, seed)?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("lemma_a.csv"))?;
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    let mut all = true;
    for r in &rows {
        let pass = r.rel_error <= tolerance;
        all &= pass;
        writeln!(
            stdout,
            "{} {}: reduced {:.12e}, reference {:.12e}, relative error {:.2e}",
            if pass { "PASS" } else { "FAIL" },
            r.label,
            r.reduced,
            r.reference,
            r.rel_error
        )?;
    }
    Ok(if all { 0 } else { EXIT_CHECK_FAILED })
}

const COORDS: [&str; 4] = ["t", "x1", "x2", "x3"];
const COMPONENTS: [&str; 6] = ["E1", "E2", "E3", "B1", "B2", "B3"];

/// Finite-difference gradient of the interpolated table, one-sided at the
/// table edges.
pub fn table_gradient(table: &FieldTable, t: f64, x: Vec3, h: f64) -> [FieldValue; 4] {
    let point = |k: usize, s: f64| -> (f64, Vec3) {
        if k == 0 {
            (t + s, x)
        } else {
            (t, x.with(k - 1, x[k - 1] + s))
        }
    };
    std::array::from_fn(|k| {
        let (tp, xp) = point(k, h);
        let (tm, xm) = point(k, -h);
        let (fwd, bwd) = (table.contains(tp, xp), table.contains(tm, xm));
        let here = table.interpolate(t, x);
        match (fwd, bwd) {
            (true, true) => (table.interpolate(tp, xp) - table.interpolate(tm, xm)).scale(0.5 / h),
            (true, false) => (table.interpolate(tp, xp) - here).scale(1.0 / h),
            (false, true) => (here - table.interpolate(tm, xm)).scale(1.0 / h),
            (false, false) => FieldValue::ZERO,
        }
    })
}

pub fn probe(run_dir: &Path, points: &Path, out: Option<&Path>, stdout: &mut (dyn Write + Send)) -> anyhow::Result<u8> {
    let art = rundir::load_run(run_dir)?;
    let table = art.final_field();
    let h = art.config.quadrature.fd_field;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(points)
        .with_context(|| format!("reading {}", points.display()))?;
    let mut header: Vec<String> = COORDS.iter().map(|s| s.to_string()).collect();
    header.extend(COMPONENTS.iter().map(|s| s.to_string()));
    for c in COORDS {
        header.extend(COMPONENTS.iter().map(|f| format!("d{c}_{f}")));
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let vals = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| anyhow!("points row {i}: {e}"))?;
        let [t, x1, x2, x3] = vals[..] else {
            bail!("points row {i}: expected 4 columns t,x1,x2,x3, found {}", vals.len());
        };
        let x = Vec3::new(x1, x2, x3);
        if !table.contains(t, x) {
            bail!("points row {i}: ({t}, {x1}, {x2}, {x3}) lies outside the table domain");
        }
        let mut row = vals.clone();
        row.extend(table.interpolate(t, x).components());
        for g in table_gradient(table, t, x, h) {
            row.extend(g.components());
        }
        rows.push(row);
    }
    let sink: Box<dyn Write + '_> = match out {
        Some(p) => Box::new(std::fs::File::create(p)?),
        None => Box::new(&mut *stdout),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(&header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(0)
}

pub fn write_diagnostics(dir: &Path, s: &DiagnosticsSummary) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    rundir::write_json(&dir.join("diagnostics.json"), s)?;
    let mut w = csv::Writer::from_path(dir.join("checks.csv"))?;
    for c in &s.checks {
        w.serialize(c)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("energies.csv"))?;
    for e in &s.energies {
        w.serialize(e)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("decay_probes.csv"))?;
    for p in &s.decay_probes {
        w.serialize(p)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("lp.csv"))?;
    for r in &s.lp {
        w.serialize(r)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("radiation.csv"))?;
    w.write_record(["direction", "window_start", "window_end", "radius", "flux"])?;
    for (name, rep) in [("incoming", &s.incoming), ("outgoing", &s.outgoing)] {
        if let Some(rep) = rep {
            for (r, f) in rep.radii.iter().zip(&rep.fluxes) {
                w.write_record([
                    name.to_string(),
                    rep.window.0.to_string(),
                    rep.window.1.to_string(),
                    r.to_string(),
                    f.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn print_checks(stdout: &mut (dyn Write + Send), s: &DiagnosticsSummary) -> anyhow::Result<()> {
    for c in &s.checks {
        writeln!(
            stdout,
            "{} {:<28} value {:>11.4e}  limit {:>11.4e}  {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.limit,
            c.detail
        )?;
    }
    Ok(())
}

pub fn report(run_dir: &Path, stdout: &mut (dyn Write + Send)) -> anyhow::Result<u8> {
    let summary = rundir::read_summary(run_dir)?;
    let cfg = RunConfig::load(&run_dir.join("config.toml"))?;
    writeln!(stdout, "run {}", run_dir.display())?;
    writeln!(
        stdout,
        "  R = {}, amplitude = {:e}, grid {} x {}^3 over t in [{}, {}], |x_i| <= {}",
        cfg.initial.radius, cfg.initial.amplitude, cfg.grid.n_t, cfg.grid.n_x, cfg.grid.t_min, cfg.grid.t_max, cfg.grid.half_width
    )?;
    let status = serde_json::to_value(summary.status)?;
    writeln!(stdout, "  status {} after {} iterates", status.as_str().unwrap_or("?"), summary.iterations)?;
    for w in &summary.warnings {
        writeln!(stdout, "  warning: {w}")?;
    }
    writeln!(stdout, "  {:>3} {:>12} {:>12} {:>12} {:>12} {:>12} {:>9}", "n", "|F|_3/4", "|F|_1", "|dF|_3/4", "ratio", "grad ratio", "seconds")?;
    let opt = |v: Option<f64>| v.map(|r| format!("{r:.4e}")).unwrap_or_else(|| "-".into());
    for it in &summary.iterates {
        writeln!(
            stdout,
            "  {:>3} {:>12.4e} {:>12.4e} {:>12.4e} {:>12} {:>12} {:>9.1}",
            it.n,
            it.norm_w34,
            it.norm_w1,
            it.delta_norm,
            opt(it.contraction_ratio),
            opt(it.gradient_ratio),
            it.diagnostics.seconds
        )?;
    }
    let diag = run_dir.join("diagnostics.json");
    if diag.exists() {
        let s: DiagnosticsSummary = serde_json::from_str(&std::fs::read_to_string(&diag)?)?;
        writeln!(stdout, "checks ({} of {} pass)", s.checks.iter().filter(|c| c.pass).count(), s.checks.len())?;
        print_checks(stdout, &s)?;
    } else {
        writeln!(stdout, "no diagnostics yet; run `rvmret diagnose {}`", run_dir.display())?;
    }
    Ok(0)
}
