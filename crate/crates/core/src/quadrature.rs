//! Gauss–Legendre rules and adaptive Gauss–Kronrod integration.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-15 {
                    break;
                }
            }
            let (_, d) = legendre(n, z);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to [a, b].
    pub fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let h = 0.5 * (b - a);
        let c = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(move |(&x, &w)| (c + h * x, h * w))
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.on(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Composite rule over `panels` equal panels.
    pub fn composite(&self, a: f64, b: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|k| self.integrate(a + k as f64 * h, a + (k + 1) as f64 * h, &f))
            .sum()
    }
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod panel: (estimate, error estimate).
pub fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = resk * 0.5;
    let mut resasc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let hh = h.abs();
    let result = resk * h;
    resasc *= hh;
    resabs *= hh;
    let mut err = ((resk - resg) * h).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (1.0f64).min((200.0 * err / resasc).powf(1.5));
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    (result, err)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        AdaptiveOptions { abs_tol: 1e-12, rel_tol: 1e-10, max_panels: 2000 }
    }
}

/// Globally adaptive bisection with 15-point Kronrod error estimates.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, opts: AdaptiveOptions) -> Integral {
    if a == b {
        return Integral { value: 0.0, error: 0.0, converged: true };
    }
    let (v, e) = gk15(&f, a, b);
    let mut panels = vec![(a, b, v, e)];
    let mut total = v;
    let mut err = e;
    loop {
        let tol = opts.abs_tol.max(opts.rel_tol * total.abs());
        if err <= tol {
            return Integral { value: total, error: err, converged: true };
        }
        if panels.len() >= opts.max_panels {
            return Integral { value: total, error: err, converged: false };
        }
        let (k, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("nonempty panel list");
        let (pa, pb, pv, pe) = panels.swap_remove(k);
        let m = 0.5 * (pa + pb);
        if m <= pa || m >= pb {
            return Integral { value: total, error: err, converged: false };
        }
        let (v1, e1) = gk15(&f, pa, m);
        let (v2, e2) = gk15(&f, m, pb);
        total += v1 + v2 - pv;
        err += e1 + e2 - pe;
        panels.push((pa, m, v1, e1));
        panels.push((m, pb, v2, e2));
        // re-sum to keep round-off from drifting
        if panels.len() % 64 == 0 {
            total = panels.iter().map(|p| p.2).sum();
            err = panels.iter().map(|p| p.3).sum();
        }
    }
}

/// Integral over [a, b] split at interior breakpoints.
pub fn integrate_with_breaks(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    breaks: &[f64],
    opts: AdaptiveOptions,
) -> Integral {
    let mut pts: Vec<f64> = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    inner.sort_by(f64::total_cmp);
    pts.extend(inner);
    pts.push(b);
    let mut out = Integral { value: 0.0, error: 0.0, converged: true };
    for w in pts.windows(2) {
        let r = integrate(&f, w[0], w[1], opts);
        out.value += r.value;
        out.error += r.error;
        out.converged &= r.converged;
    }
    out
}

/// Integral over (-∞, b] through the map τ = b − u/(1−u).
pub fn integrate_to_neg_inf(f: impl Fn(f64) -> f64, b: f64, opts: AdaptiveOptions) -> Integral {
    let g = |u: f64| {
        if u >= 1.0 {
            return 0.0;
        }
        let s = 1.0 - u;
        let v = f(b - u / s) / (s * s);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate(g, 0.0, 1.0, opts)
}

/// Integral over [a, ∞) through the map r = a + u/(1−u).
pub fn integrate_to_pos_inf(f: impl Fn(f64) -> f64, a: f64, opts: AdaptiveOptions) -> Integral {
    integrate_to_neg_inf(|s| f(-s), -a, opts)
}

/// Product rule on a spherical cap {ω : ω·axis ≥ mu_min}: Gauss–Legendre in
/// cos θ, uniform in φ. Yields (direction, weight) with weights summing to the
/// cap's solid angle.
#[derive(Debug, Clone)]
pub struct CapRule {
    pub dirs: Vec<(crate::Vec3, f64)>,
}

impl CapRule {
    pub fn new(gl: &GaussLegendre, n_phi: usize, axis: crate::Vec3, mu_min: f64) -> Self {
        let (e1, e2) = orthonormal_frame(axis);
        let mu_min = mu_min.clamp(-1.0, 1.0);
        let dphi = 2.0 * PI / n_phi as f64;
        let mut dirs = Vec::with_capacity(gl.len() * n_phi);
        for (mu, wmu) in gl.on(mu_min, 1.0) {
            let s = (1.0 - mu * mu).max(0.0).sqrt();
            for k in 0..n_phi {
                let phi = (k as f64 + 0.5) * dphi;
                let d = axis * mu + e1 * (s * phi.cos()) + e2 * (s * phi.sin());
                dirs.push((d, wmu * dphi));
            }
        }
        CapRule { dirs }
    }
}

/// Two unit vectors completing `n` (assumed unit) to a right-handed frame.
pub fn orthonormal_frame(n: crate::Vec3) -> (crate::Vec3, crate::Vec3) {
    let helper = if n.x.abs() < 0.9 { crate::Vec3::new(1.0, 0.0, 0.0) } else { crate::Vec3::new(0.0, 1.0, 0.0) };
    let e1 = n.cross(helper);
    let e1 = e1 / e1.norm();
    let e2 = n.cross(e1);
    (e1, e2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gl_is_exact_for_polynomials() {
        for n in 1..12 {
            let gl = GaussLegendre::new(n);
            for deg in 0..(2 * n) {
                let got = gl.integrate(0.0, 2.0, |x| x.powi(deg as i32));
                let want = 2f64.powi(deg as i32 + 1) / (deg as f64 + 1.0);
                assert!((got - want).abs() < 1e-12 * want.max(1.0), "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn adaptive_handles_kinks_and_tails() {
        let r = integrate(|x: f64| x.abs(), -1.0, 2.0, AdaptiveOptions::default());
        assert!((r.value - 2.5).abs() < 1e-10);
        let r = integrate_to_pos_inf(|x: f64| (-x).exp(), 0.0, AdaptiveOptions::default());
        assert!((r.value - 1.0).abs() < 1e-10);
        let r = integrate_to_neg_inf(|x: f64| 1.0 / (1.0 + x * x), 0.0, AdaptiveOptions::default());
        assert!((r.value - PI / 2.0).abs() < 1e-9);
    }

    #[test]
    fn cap_rule_measures_solid_angle() {
        let gl = GaussLegendre::new(6);
        let axis = crate::Vec3::new(0.0, 0.6, 0.8);
        let full = CapRule::new(&gl, 8, axis, -1.0);
        let area: f64 = full.dirs.iter().map(|d| d.1).sum();
        assert!((area - 4.0 * PI).abs() < 1e-12);
        let cap = CapRule::new(&gl, 8, axis, 0.5);
        let area: f64 = cap.dirs.iter().map(|d| d.1).sum();
        assert!((area - PI).abs() < 1e-12);
        for (d, _) in &cap.dirs {
            assert!((d.norm() - 1.0).abs() < 1e-12 && d.dot(axis) >= 0.5 - 1e-12);
        }
    }
}
