//! Weighted integrals over the backward light cone and their decay bounds.
//!
//! The integrands depend on y only through |x − y| and |y|, which reduces
//! the 3-D integral to a 2-D one over (τ, λ) = (t − |x−y|, |y|).

use crate::error::{Error, Result};
use crate::kinematics::Vec3;
use crate::quadrature::{integrate, integrate_to_neg_inf, integrate_to_pos_inf, integrate_with_breaks, AdaptiveOptions, Integral};
use crate::retarded::cone_domain;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

const OUTER: AdaptiveOptions = AdaptiveOptions { abs_tol: 1e-300, rel_tol: 1e-10, max_panels: 4000 };
const INNER: AdaptiveOptions = AdaptiveOptions { abs_tol: 1e-300, rel_tol: 1e-12, max_panels: 4000 };

fn finish(i: Integral, what: &str) -> Result<f64> {
    if !i.converged || !i.value.is_finite() {
        return Err(Error::NonConvergent(format!("{what}: estimate {:.3e} ± {:.1e}", i.value, i.error)));
    }
    Ok(i.value)
}

/// ∫_{a ≤ |x−y| ≤ b} |x−y|^{−n} g(t − |x−y|, |y|) dy through the (τ, λ)
/// reduction; `b_hi` may be infinite and `a_lo` may be 0 when n ≤ 2.
pub fn lemma_a_reduce(
    g: &dyn Fn(f64, f64) -> f64,
    t: f64,
    x_norm: f64,
    a_lo: f64,
    b_hi: f64,
    n: u32,
) -> Result<f64> {
    if x_norm == 0.0 {
        return Err(Error::SingularAtOrigin);
    }
    if !(x_norm > 0.0) || !(a_lo >= 0.0) || b_hi < a_lo || (a_lo == 0.0 && n > 2) {
        return Err(Error::Invalid(format!("shell [{a_lo}, {b_hi}] with n = {n} at |x| = {x_norm}")));
    }
    if a_lo == b_hi {
        return Ok(0.0);
    }
    let outer = |tau: f64| {
        let s = t - tau;
        if s <= 0.0 {
            return 0.0;
        }
        let inner = integrate(|lam| g(tau, lam) * lam, (x_norm - s).abs(), x_norm + s, INNER);
        inner.value * s.powi(1 - n as i32)
    };
    let hi = t - a_lo;
    let breaks = [0.0, t - x_norm];
    let total = if b_hi.is_finite() {
        integrate_with_breaks(outer, t - b_hi, hi, &breaks, OUTER)
    } else {
        // finite part down to the lowest kink, then the tail
        let cut = breaks.iter().copied().fold(hi, f64::min) - 1.0;
        let head = integrate_with_breaks(&outer, cut, hi, &breaks, OUTER);
        let tail = integrate_to_neg_inf(&outer, cut, OUTER);
        Integral { value: head.value + tail.value, error: head.error + tail.error, converged: head.converged && tail.converged }
    };
    finish(total, "reduced cone integral").map(|v| 2.0 * PI / x_norm * v)
}

/// 4π ∫_a^b r^{2−n} g(t − r, r) dr: the same integral at x = 0.
pub fn radial_at_origin(g: &dyn Fn(f64, f64) -> f64, t: f64, a_lo: f64, b_hi: f64, n: u32) -> Result<f64> {
    let h = |r: f64| r.powi(2 - n as i32) * g(t - r, r);
    let total = if b_hi.is_finite() {
        integrate_with_breaks(h, a_lo, b_hi, &[t], OUTER)
    } else {
        let cut = a_lo.max(t) + 1.0;
        let head = integrate_with_breaks(&h, a_lo, cut, &[t], OUTER);
        let tail = integrate_to_pos_inf(&h, cut, OUTER);
        Integral { value: head.value + tail.value, error: head.error + tail.error, converged: head.converged && tail.converged }
    };
    finish(total, "radial cone integral").map(|v| 4.0 * PI * v)
}

/// The same shell integral by a spherical product rule around x: adaptive
/// in r and cos θ, uniform in φ.
pub fn direct_shell_integral(g: &dyn Fn(f64, f64) -> f64, t: f64, x_norm: f64, a_lo: f64, b_hi: f64, n: u32) -> Result<f64> {
    let x = Vec3::new(0.0, 0.0, x_norm);
    let n_phi = 4;
    let radial = |r: f64| {
        let angular = |mu: f64| {
            let s = (1.0 - mu * mu).max(0.0).sqrt();
            (0..n_phi)
                .map(|k| {
                    let phi = 2.0 * PI * (k as f64 + 0.5) / n_phi as f64;
                    let y = x + Vec3::new(s * phi.cos(), s * phi.sin(), mu) * r;
                    g(t - r, y.norm())
                })
                .sum::<f64>()
                * (2.0 * PI / n_phi as f64)
        };
        let i = integrate(angular, -1.0, 1.0, INNER);
        i.value * r.powi(2 - n as i32)
    };
    finish(integrate_with_breaks(radial, a_lo, b_hi, &[x_norm, t], OUTER), "direct shell integral")
}

/// One comparison of the reduced shell integral against a reference value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellComparison {
    pub label: String,
    pub t: f64,
    pub x_norm: f64,
    pub a_lo: f64,
    pub b_hi: f64,
    pub n: u32,
    pub reduced: f64,
    pub reference: f64,
    pub rel_error: f64,
}

/// Smooth radial integrand exp(−(τ−τ₀)²/2σ²) (1 + λ²/ℓ²)^{−k}.
#[derive(Debug, Clone, Copy, PartialEq)]
struct SmoothRadial {
    tau0: f64,
    sigma: f64,
    ell: f64,
    k: i32,
}

impl SmoothRadial {
    fn eval(&self, tau: f64, lam: f64) -> f64 {
        (-(tau - self.tau0).powi(2) / (2.0 * self.sigma * self.sigma)).exp() * (1.0 + (lam / self.ell).powi(2)).powi(-self.k)
    }
}

/// The two closed-form shells (g ≡ 1 gives 6π for n = 1 on 1 ≤ r ≤ 2 and
/// 4π for n = 2) followed by `count` seeded smooth integrands on finite
/// shells, each compared with the direct spherical quadrature.
pub fn shell_comparisons(count: usize, seed: u64) -> Result<Vec<ShellComparison>> {
    let one = |_: f64, _: f64| 1.0;
    let row = |label: String, t, x_norm, a_lo, b_hi, n, reduced: f64, reference: f64| ShellComparison {
        label,
        t,
        x_norm,
        a_lo,
        b_hi,
        n,
        reduced,
        reference,
        rel_error: (reduced - reference).abs() / reference.abs(),
    };
    let mut rows = vec![
        row("constant, n = 1".into(), 0.0, 1.5, 1.0, 2.0, 1, lemma_a_reduce(&one, 0.0, 1.5, 1.0, 2.0, 1)?, 6.0 * PI),
        row("constant, n = 2".into(), 0.7, 0.3, 1.0, 2.0, 2, lemma_a_reduce(&one, 0.7, 0.3, 1.0, 2.0, 2)?, 4.0 * PI),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..count {
        let g = SmoothRadial {
            tau0: rng.gen_range(-1.0..2.0),
            sigma: rng.gen_range(0.3..1.5),
            ell: rng.gen_range(0.5..2.0),
            k: rng.gen_range(1..=2),
        };
        let t = rng.gen_range(-2.0..3.0);
        let x_norm = rng.gen_range(0.2..3.0);
        let a_lo = rng.gen_range(0.1..1.0);
        let b_hi = a_lo + rng.gen_range(0.5..3.0);
        let n = rng.gen_range(1..=3);
        let f = |tau: f64, lam: f64| g.eval(tau, lam);
        let reduced = lemma_a_reduce(&f, t, x_norm, a_lo, b_hi, n)?;
        let reference = direct_shell_integral(&f, t, x_norm, a_lo, b_hi, n)?;
        rows.push(row(format!("smooth #{k}"), t, x_norm, a_lo, b_hi, n, reduced, reference));
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    /// I₁^q = ∫ |x−y|^{−1} (1+|t−|x−y||+|y|)^{−q} dy.
    I1,
    /// I₂^q, the same with |x−y|^{−2}.
    I2,
    /// II^q = ∫_{|x−y|>1} |x−y|^{−3} (1+|t−|x−y||+|y|)^{−q} dy.
    II,
}

impl Family {
    pub fn threshold(self) -> f64 {
        match self {
            Family::I1 => 3.0,
            Family::I2 | Family::II => 2.0,
        }
    }

    /// Exponent of (1 + |t − |x||) in the decay bound.
    pub fn shape_exponent(self, q: f64) -> f64 {
        match self {
            Family::I1 => 3.0 - q,
            Family::I2 => 2.0 - q,
            Family::II => 1.25 - q,
        }
    }

    /// (1+|t|+|x|)^{−1}(1+|t−|x||)^{e(q)}.
    pub fn shape(self, q: f64, t: f64, x_norm: f64) -> f64 {
        (1.0 + (t - x_norm).abs()).powf(self.shape_exponent(q)) / (1.0 + t.abs() + x_norm)
    }

    pub fn parse(s: &str) -> Result<Family> {
        match s.to_ascii_uppercase().as_str() {
            "I1" => Ok(Family::I1),
            "I2" => Ok(Family::I2),
            "II" => Ok(Family::II),
            _ => Err(Error::Invalid(format!("unknown integral family {s:?} (expected I1, I2 or II)"))),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::I1 => "I1",
            Family::I2 => "I2",
            Family::II => "II",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeIntegralQuery {
    pub family: Family,
    pub q: f64,
    pub t: f64,
    pub x_norm: f64,
}

impl ConeIntegralQuery {
    pub fn validate(&self) -> Result<()> {
        if !(self.q > self.family.threshold()) {
            return Err(Error::NonConvergent(format!(
                "{} needs q > {}, got {}",
                self.family,
                self.family.threshold(),
                self.q
            )));
        }
        if !(self.x_norm >= 0.0) || !self.t.is_finite() || !self.x_norm.is_finite() {
            return Err(Error::Invalid(format!("query point t = {}, |x| = {}", self.t, self.x_norm)));
        }
        Ok(())
    }
}

fn weight(q: f64) -> impl Fn(f64, f64) -> f64 {
    move |tau: f64, lam: f64| (1.0 + tau.abs() + lam).powf(-q)
}

/// I₁^q or I₂^q at (t, |x|).
pub fn eval_i(query: &ConeIntegralQuery) -> Result<f64> {
    query.validate()?;
    let n = match query.family {
        Family::I1 => 1,
        Family::I2 => 2,
        Family::II => return eval_ii(query.q, query.t, query.x_norm),
    };
    let g = weight(query.q);
    if query.x_norm == 0.0 {
        radial_at_origin(&g, query.t, 0.0, f64::INFINITY, n)
    } else {
        lemma_a_reduce(&g, query.t, query.x_norm, 0.0, f64::INFINITY, n)
    }
}

/// II^q at (t, |x|).
pub fn eval_ii(q: f64, t: f64, x_norm: f64) -> Result<f64> {
    ConeIntegralQuery { family: Family::II, q, t, x_norm }.validate()?;
    let g = weight(q);
    if x_norm == 0.0 {
        radial_at_origin(&g, t, 1.0, f64::INFINITY, 3)
    } else {
        lemma_a_reduce(&g, t, x_norm, 1.0, f64::INFINITY, 3)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub t: f64,
    pub x_norm: f64,
    pub value: f64,
    pub shape: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheckReport {
    pub family: Family,
    pub q: f64,
    pub rows: Vec<BoundRow>,
    /// Sup of value/shape over the sample.
    pub fitted_constant: f64,
    /// The same sup over the first half of the sample.
    pub half_constant: f64,
    /// Sample point where the sup is attained.
    pub worst: (f64, f64),
    /// The sample lacks a half-sample or does not reach both sides of
    /// t = 0 and t = |x|.
    pub inconclusive: bool,
    pub pass: bool,
}

/// Seeded (t, |x|) pairs uniform in [−t_max, t_max] × [0, x_max].
pub fn cone_samples(count: usize, t_max: f64, x_max: f64, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (rng.gen_range(-t_max..=t_max), rng.gen_range(0.0..=x_max))).collect()
}

/// Measures sup I/shape over the sample; passes when every ratio is finite
/// and the sup is at most twice the sup over the first half of the sample.
pub fn check_bounds(family: Family, q: f64, sample: &[(f64, f64)]) -> Result<BoundCheckReport> {
    use rayon::prelude::*;
    if sample.is_empty() {
        return Err(Error::Invalid("bound check needs at least one sample".into()));
    }
    ConeIntegralQuery { family, q, t: 0.0, x_norm: 0.0 }.validate()?;
    let rows = sample
        .par_iter()
        .map(|&(t, x_norm)| {
            let value = eval_i(&ConeIntegralQuery { family, q, t, x_norm })?;
            let shape = family.shape(q, t, x_norm);
            Ok(BoundRow { t, x_norm, value, shape, ratio: value / shape })
        })
        .collect::<Result<Vec<_>>>()?;
    let sup = |rows: &[BoundRow]| rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let fitted_constant = sup(&rows);
    let half = rows.len() / 2;
    let half_constant = sup(&rows[..half]);
    let worst = rows
        .iter()
        .max_by(|a, b| a.ratio.total_cmp(&b.ratio))
        .map(|r| (r.t, r.x_norm))
        .expect("nonempty sample");
    let both_t = rows.iter().any(|r| r.t < 0.0) && rows.iter().any(|r| r.t > 0.0);
    let both_cone = rows.iter().any(|r| r.t < r.x_norm) && rows.iter().any(|r| r.t > r.x_norm);
    let inconclusive = half == 0 || !both_t || !both_cone;
    let finite = rows.iter().all(|r| r.ratio.is_finite());
    let stable = fitted_constant <= 2.0 * half_constant;
    Ok(BoundCheckReport {
        family,
        q,
        rows,
        fitted_constant,
        half_constant,
        worst,
        inconclusive,
        pass: finite && stable && !inconclusive,
    })
}

/// The (family, q) pairs that the decay and contraction estimates rely on.
pub const ESTIMATE_PAIRS: [(Family, f64); 7] = [
    (Family::I1, 4.0),
    (Family::I1, 5.0),
    (Family::I1, 5.75),
    (Family::I2, 3.0),
    (Family::I2, 4.75),
    (Family::I2, 5.0),
    (Family::II, 3.0),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrickReport {
    pub max_ratio: f64,
    /// 2(1+2R)/(1−a).
    pub bound: f64,
    pub samples: usize,
}

/// Radius of the smallest origin-centred ball containing Ω_a(t, x).
fn omega_radius(t: f64, x: Vec3, radius: f64, a: f64) -> f64 {
    let xn = x.norm();
    // |y| = ρ is admissible for some direction iff h(ρ) ≥ 0
    let h = |rho: f64| radius + a * (t - rho + xn).abs().max((t - rho - xn).abs()) - rho;
    let mut hi = cone_domain(t, x, radius, a).r_max + xn;
    let step = hi / 4096.0;
    while hi > 0.0 && h(hi) < 0.0 {
        hi -= step;
    }
    let (mut lo, mut up) = (hi.max(0.0), hi + step);
    for _ in 0..80 {
        let mid = 0.5 * (lo + up);
        if h(mid) >= 0.0 {
            lo = mid;
        } else {
            up = mid;
        }
    }
    up
}

/// Sup over y ∈ Ω_a(t, x) of (1+|t−|x−y||+|y|)/(1+|t−|x−y|−|y||), from
/// uniform samples of Ω_a.
pub fn check_trick_inequality(t: f64, x: Vec3, radius: f64, a: f64, count: usize, seed: u64) -> TrickReport {
    let dom = cone_domain(t, x, radius, a);
    let rho = omega_radius(t, x, radius, a);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_ratio: f64 = 0.0;
    let mut used = 0;
    let mut tries = 0usize;
    while used < count && tries < 10_000 * count.max(1) {
        tries += 1;
        let y = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * rho;
        if y.norm() > rho || !dom.contains(y, radius) {
            continue;
        }
        used += 1;
        max_ratio = max_ratio.max(trick_ratio(t, x, y));
    }
    TrickReport { max_ratio, bound: 2.0 * (1.0 + 2.0 * radius) / (1.0 - a), samples: used }
}

pub fn trick_ratio(t: f64, x: Vec3, y: Vec3) -> f64 {
    let s = t - (x - y).norm();
    (1.0 + s.abs() + y.norm()) / (1.0 + (s - y.norm()).abs())
}
