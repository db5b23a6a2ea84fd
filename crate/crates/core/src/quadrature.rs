//! Gauss–Kronrod quadrature: a globally adaptive 21-point rule and a fixed
//! composite rule built from the same nodes.

use std::cell::Cell;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_980_298_551,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss 10-point weights, paired with XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Tolerances for the adaptive rule. Converged when the error estimate is
/// below `max(abs, rel * |I|)`.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
    /// Measure `rel` against ∫|f| instead of |∫f|, for sign-changing
    /// integrands whose integral may be near zero.
    pub signed: bool,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs,
            rel,
            max_intervals: 4000,
            signed: false,
        }
    }

    pub const fn rel(rel: f64) -> Self {
        Self::new(0.0, rel)
    }

    pub fn with_max_intervals(mut self, n: usize) -> Self {
        self.max_intervals = n;
        self
    }

    pub const fn signed(mut self) -> Self {
        self.signed = true;
        self
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
    pub evaluations: usize,
}

impl QuadResult {
    pub fn into_result(self, context: &str, tol: Tolerance) -> Result<f64> {
        if self.converged && self.value.is_finite() {
            Ok(self.value)
        } else {
            Err(Error::Quadrature {
                context: context.to_string(),
                achieved: self.error,
                requested: tol.abs.max(tol.rel * self.value.abs()),
            })
        }
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut e = err.abs();
    if res_asc != 0.0 && e != 0.0 {
        let scale = (200.0 * e / res_asc).powf(1.5);
        e = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        e = e.max(50.0 * f64::EPSILON * res_abs);
    }
    e
}

/// One 21-point Kronrod panel with its embedded 10-point Gauss estimate.
fn qk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_g = 0.0;
    let mut res_k = fc * WGK[10];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let result = res_k * half;
    let err = rescale_error((res_k - res_g) * half, res_abs * half.abs(), res_asc * half.abs());
    (result, err, res_abs * half.abs())
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    magnitude: f64,
}

/// Globally adaptive integration of `f` over the partition given by
/// `points` (at least two increasing points).
pub fn integrate_points<F: FnMut(f64) -> f64>(
    mut f: F,
    points: &[f64],
    tol: Tolerance,
) -> QuadResult {
    assert!(points.len() >= 2, "need at least one interval");
    let mut panels: Vec<Panel> = Vec::with_capacity(64);
    let mut evals = 0;
    for w in points.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let (value, error, magnitude) = qk21(&mut f, w[0], w[1]);
        evals += 21;
        panels.push(Panel {
            a: w[0],
            b: w[1],
            value,
            error,
            magnitude,
        });
    }
    if panels.is_empty() {
        return QuadResult {
            value: 0.0,
            error: 0.0,
            converged: true,
            evaluations: 0,
        };
    }
    loop {
        let total: f64 = panels.iter().map(|p| p.value).sum();
        let err: f64 = panels.iter().map(|p| p.error).sum();
        let scale = if tol.signed {
            panels.iter().map(|p| p.magnitude).sum::<f64>()
        } else {
            total.abs()
        };
        let target = tol.abs.max(tol.rel * scale);
        if err <= target || !total.is_finite() {
            return QuadResult {
                value: total,
                error: err,
                converged: total.is_finite(),
                evaluations: evals,
            };
        }
        if panels.len() >= tol.max_intervals {
            return QuadResult {
                value: total,
                error: err,
                converged: false,
                evaluations: evals,
            };
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, p)| {
                if p.error > acc.1 {
                    (i, p.error)
                } else {
                    acc
                }
            });
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if mid <= p.a || mid >= p.b {
            // Interval collapsed to machine resolution; accept what we have.
            return QuadResult {
                value: total,
                error: err,
                converged: err <= 10.0 * target,
                evaluations: evals,
            };
        }
        let (v1, e1, m1) = qk21(&mut f, p.a, mid);
        let (v2, e2, m2) = qk21(&mut f, mid, p.b);
        evals += 42;
        panels.push(Panel {
            a: p.a,
            b: mid,
            value: v1,
            error: e1,
            magnitude: m1,
        });
        panels.push(Panel {
            a: mid,
            b: p.b,
            value: v2,
            error: e2,
            magnitude: m2,
        });
    }
}

pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> QuadResult {
    integrate_points(f, &[a, b], tol)
}

/// Breakpoints `0, lo, lo*r, lo*r^2, ..., hi`: geometric refinement toward
/// the origin for integrands with structure on many scales.
pub fn geometric_points(lo: f64, hi: f64, ratio: f64) -> Vec<f64> {
    let mut pts = vec![0.0];
    if lo < hi && lo > 0.0 {
        let mut x = lo;
        while x < hi {
            pts.push(x);
            x *= ratio;
        }
    }
    pts.push(hi);
    pts
}

/// Records the worst failure among nested inner integrals so the outer
/// integral can report it.
#[derive(Debug, Default)]
pub struct InnerStatus {
    failed: Cell<bool>,
    worst: Cell<f64>,
}

impl InnerStatus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn track(&self, r: QuadResult) -> f64 {
        if !r.converged || !r.value.is_finite() {
            self.failed.set(true);
            self.worst.set(self.worst.get().max(r.error));
        }
        r.value
    }

    pub fn check(&self, context: &str, tol: Tolerance) -> Result<()> {
        if self.failed.get() {
            Err(Error::Quadrature {
                context: format!("{context} (inner integral)"),
                achieved: self.worst.get(),
                requested: tol.abs.max(tol.rel),
            })
        } else {
            Ok(())
        }
    }
}

/// A fixed composite 21-point Kronrod rule on a given partition.
#[derive(Debug, Clone)]
pub struct CompositeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl CompositeRule {
    pub fn new(points: &[f64]) -> Self {
        let mut nodes = Vec::with_capacity(21 * points.len());
        let mut weights = Vec::with_capacity(21 * points.len());
        for w in points.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            let c = 0.5 * (a + b);
            let h = 0.5 * (b - a);
            for j in 0..10 {
                nodes.push(c - h * XGK[j]);
                weights.push(h * WGK[j]);
            }
            nodes.push(c);
            weights.push(h * WGK[10]);
            for j in (0..10).rev() {
                nodes.push(c + h * XGK[j]);
                weights.push(h * WGK[j]);
            }
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn apply<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let r = integrate(|x| x.powi(5) - 3.0 * x * x, 0.0, 2.0, Tolerance::rel(1e-14));
        assert!((r.value - (64.0 / 6.0 - 8.0)).abs() < 1e-13);
    }

    #[test]
    fn endpoint_singularity() {
        let r = integrate(|x| 1.0 / x.sqrt(), 0.0, 1.0, Tolerance::rel(1e-10));
        assert!(r.converged);
        assert!((r.value - 2.0).abs() < 1e-8);
    }

    #[test]
    fn gaussian_with_breakpoints() {
        let pts = geometric_points(1e-3, 40.0, 2.0);
        let r = integrate_points(|x| (-x * x / 2.0).exp(), &pts, Tolerance::rel(1e-13));
        let exact = (std::f64::consts::PI / 2.0).sqrt();
        assert!((r.value - exact).abs() < 1e-12);
    }

    #[test]
    fn composite_rule_matches_adaptive() {
        let rule = CompositeRule::new(&[0.0, 1.0, 2.0, 4.0, 8.0]);
        let v = rule.apply(|x| (-x).exp() * x.cos());
        let exact = 0.5 * (1.0 - (-8.0f64).exp() * (8.0f64.cos() - 8.0f64.sin()));
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn reports_non_convergence() {
        let tol = Tolerance::rel(1e-14).with_max_intervals(3);
        let r = integrate(|x| (1.0 / x).sin(), 1e-6, 1.0, tol);
        assert!(!r.converged);
        assert!(r.into_result("oscillatory", tol).is_err());
    }
}
