//! Integrals against the law of the summed inner time Λ⁽¹⁾(u) + Λ⁽²⁾(v).
//!
//! Every L² quantity of the kernels reduces to
//!
//! ```text
//! P_{u,v}[f] = ∫₀^∞∫₀^∞ f(r₁ + r₂) K^Λ(u, r₁) K^Λ(v, r₂) dr₁ dr₂ = ∫₀^∞ f(ρ) H_{u,v}(ρ) dρ
//! ```
//!
//! with H the density of the sum. For β = 1 the inner times are
//! deterministic and P_{u,v}[f] = f(u + v).

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::quadrature::{integrate_points, InnerStatus, QuadResult, Tolerance};
use crate::subordinator::SubordinatorDensity;

pub(crate) const INNER_TOL: Tolerance = Tolerance::new(1e-300, 1e-11).signed();
pub(crate) const OUTER_TOL: Tolerance = Tolerance::new(1e-300, 1e-9).signed();

/// A signed combination Σ cᵢ K^Λ(tᵢ, ·) of inner-time densities.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerWeight {
    atoms: Vec<(f64, f64)>,
}

impl InnerWeight {
    /// K^Λ(t, ·).
    pub fn at(t: f64) -> Self {
        Self {
            atoms: vec![(1.0, t)],
        }
    }

    /// K^Λ(a, ·) − K^Λ(b, ·).
    pub fn diff(a: f64, b: f64) -> Self {
        Self {
            atoms: vec![(1.0, a), (-1.0, b)],
        }
    }

    fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().map(|a| a.1)
    }

    #[inline]
    fn eval(&self, density: &SubordinatorDensity, r: f64) -> f64 {
        self.atoms
            .iter()
            .map(|&(c, t)| c * density.eval(t, r))
            .sum()
    }

    fn support(&self, density: &SubordinatorDensity) -> f64 {
        self.times().map(|t| density.support(t)).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct PairIntegrator {
    params: ModelParams,
    density: Option<SubordinatorDensity>,
}

fn sorted_points(mut pts: Vec<f64>, lo: f64, hi: f64) -> Vec<f64> {
    pts.retain(|p| *p > lo && *p < hi && p.is_finite());
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs().max(1e-300));
    pts
}

impl PairIntegrator {
    pub fn new(params: ModelParams) -> Result<Self> {
        let density = if params.is_brownian() {
            None
        } else {
            Some(SubordinatorDensity::new(params)?)
        };
        Ok(Self { params, density })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// H_{u,v}(ρ), the density of Λ⁽¹⁾(u) + Λ⁽²⁾(v) at ρ (β < 1 only).
    pub fn sum_density(&self, u: f64, v: f64, rho: f64) -> Result<f64> {
        let density = self
            .density
            .as_ref()
            .ok_or_else(|| Error::Domain("beta = 1 has no inner-time density".into()))?;
        sum_density_raw(density, &InnerWeight::at(u), &InnerWeight::at(v), rho)
            .into_result("summed inner-time density", INNER_TOL)
    }

    /// P_{u,v}[f] restricted to ρ ≥ `floor`. `hints` are ρ-values where f
    /// changes character (e.g. |z|²) and become quadrature breakpoints.
    pub fn integrate<F: Fn(f64) -> f64>(
        &self,
        u: f64,
        v: f64,
        f: F,
        hints: &[f64],
        floor: f64,
        context: &str,
    ) -> Result<f64> {
        self.integrate_weights(
            &InnerWeight::at(u),
            &InnerWeight::at(v),
            f,
            hints,
            floor,
            context,
        )
    }

    /// ∫∫ f(r₁ + r₂) W₁(r₁) W₂(r₂) dr₁ dr₂ over r₁ + r₂ ≥ `floor`.
    pub fn integrate_weights<F: Fn(f64) -> f64>(
        &self,
        w1: &InnerWeight,
        w2: &InnerWeight,
        f: F,
        hints: &[f64],
        floor: f64,
        context: &str,
    ) -> Result<f64> {
        if w1.times().chain(w2.times()).any(|t| !(t > 0.0)) {
            return Err(Error::Domain(format!(
                "two-time arguments must be positive ({context})"
            )));
        }
        let Some(density) = &self.density else {
            let mut total = 0.0;
            for &(c1, t1) in &w1.atoms {
                for &(c2, t2) in &w2.atoms {
                    let rho = t1 + t2;
                    if rho >= floor {
                        total += c1 * c2 * f(rho);
                    }
                }
            }
            return Ok(total);
        };
        let rho_max = w1.support(density) + w2.support(density);
        let w_min = floor.max(0.0).sqrt();
        let w_max = rho_max.sqrt();
        if w_min >= w_max {
            return Ok(0.0);
        }
        let mut pts = Vec::new();
        for t in w1.times().chain(w2.times()) {
            let s = density.scale(t);
            let mut c = 1.0 / 4096.0;
            while c <= 8.0 {
                pts.push((c * s).sqrt());
                c *= 4.0;
            }
        }
        for &h in hints {
            for c in [0.25, 1.0, 4.0] {
                pts.push((c * h).sqrt());
            }
        }
        if w_min > 0.0 {
            let mut w = w_min;
            while w < w_max {
                pts.push(w);
                w *= 2.0;
            }
        }
        let pts = sorted_points(pts, w_min, w_max);
        let status = InnerStatus::new();
        let outer = integrate_points(
            |w| {
                if w <= 0.0 {
                    return 0.0;
                }
                let rho = w * w;
                let fv = f(rho);
                if fv == 0.0 {
                    return 0.0;
                }
                2.0 * w * fv * status.track(sum_density_raw(density, w1, w2, rho))
            },
            &pts,
            OUTER_TOL,
        );
        status.check(context, INNER_TOL)?;
        outer.into_result(context, OUTER_TOL)
    }
}

fn sum_density_raw(
    density: &SubordinatorDensity,
    w1: &InnerWeight,
    w2: &InnerWeight,
    rho: f64,
) -> QuadResult {
    let lo = (rho - w2.support(density)).max(0.0);
    let hi = rho.min(w1.support(density));
    if !(hi > lo) {
        return QuadResult {
            value: 0.0,
            error: 0.0,
            converged: true,
            evaluations: 0,
        };
    }
    let mut pts = Vec::new();
    for c in [0.25, 1.0, 4.0] {
        for t in w1.times() {
            pts.push(c * density.scale(t));
        }
        for t in w2.times() {
            pts.push(rho - c * density.scale(t));
        }
    }
    let pts = sorted_points(pts, lo, hi);
    integrate_points(
        |r| w1.eval(density, r) * w2.eval(density, rho - r),
        &pts,
        INNER_TOL,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;

    #[test]
    fn sum_density_of_half_stable_pair_normalized() {
        let p = PairIntegrator::new(ModelParams::new(1, 1).unwrap()).unwrap();
        let total = integrate(
            |rho| p.sum_density(0.7, 1.3, rho).unwrap(),
            0.0,
            40.0,
            Tolerance::rel(1e-10),
        )
        .value;
        assert!((total - 1.0).abs() < 1e-8, "{total}");
    }

    #[test]
    fn mean_of_sum_is_sum_of_means() {
        let p = PairIntegrator::new(ModelParams::new(2, 1).unwrap()).unwrap();
        let m = p.integrate(1.0, 2.0, |r| r, &[], 0.0, "mean").unwrap();
        let e1 = crate::subordinator::moments(&ModelParams::new(2, 1).unwrap())
            .unwrap()
            .get(1);
        // E Λ(t) = t^β E Λ(1)
        let expected = e1 * (1.0 + 2f64.powf(0.25));
        assert!((m / expected - 1.0).abs() < 1e-8, "{m} vs {expected}");
    }

    #[test]
    fn brownian_case_is_point_evaluation() {
        let p = PairIntegrator::new(ModelParams::new(0, 2).unwrap()).unwrap();
        let v = p.integrate(0.5, 0.25, |r| r * r, &[], 0.0, "bm").unwrap();
        assert_eq!(v, 0.5625);
        assert_eq!(p.integrate(0.5, 0.25, |r| r, &[], 1.0, "bm").unwrap(), 0.0);
    }
}
