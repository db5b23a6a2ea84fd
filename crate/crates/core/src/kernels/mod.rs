//! Continuum β-ISLTBM and lattice β-ISLTRW kernels.
//!
//! Both kernels subordinate a Markov kernel to the inner time Λ_β:
//!
//! ```text
//! K^{BM,Λ}_{t;x}  = ∫₀^∞ K^{BM}_{s;x}  K^{Λ}_{t;0,s} ds
//! K^{RW,Λ}_{t;x}  = ∫₀^∞ K^{RW}_{s;x}  K^{Λ}_{t;0,s} ds
//! ```
//!
//! The lattice kernel carries no extra prefactor: with the density of Λ_β
//! already living on [0, ∞) the integral is a probability and sums to one.

pub mod lattice;
pub mod table;
pub mod walk;

use std::f64::consts::PI;

pub use lattice::Lattice;
pub use table::{Displacements, Flavor, KernelTable};

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::quadrature::{integrate_points, CompositeRule, Tolerance};
use crate::subordinator::SubordinatorDensity;
use walk::fill_scaled_bessel;

pub(crate) const CONTINUUM_TOL: Tolerance = Tolerance::new(1e-300, 1e-11);

/// Standard d-dimensional heat kernel e^{-|x|²/2s} / (2πs)^{d/2}.
pub fn bm_density(d: usize, s: f64, x: &[f64]) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("time must be positive, got {s}")));
    }
    if x.len() != d {
        return Err(Error::Domain(format!("point has dimension {}, expected {d}", x.len())));
    }
    let r2: f64 = x.iter().map(|v| v * v).sum();
    Ok(gaussian(d, s, r2))
}

#[inline]
pub(crate) fn gaussian(d: usize, s: f64, r2: f64) -> f64 {
    (-r2 / (2.0 * s)).exp() / (2.0 * PI * s).powf(0.5 * d as f64)
}

/// K^{RW_δ^d}_{t;x}: product of one-dimensional walk probabilities.
pub fn rw_density(lat: &Lattice, t: f64, x: &[f64]) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time must be >= 0, got {t}")));
    }
    let steps = lat.to_steps(x)?;
    Ok(rw_density_steps(lat, t, &steps))
}

pub fn rw_density_steps(lat: &Lattice, t: f64, steps: &[i64]) -> f64 {
    let sorted = sorted_abs(steps);
    let mut buf = vec![0.0; sorted[0] as usize + 1];
    fill_scaled_bessel(t * lat.jump_rate(), &mut buf);
    ordered_product(&buf, &sorted)
}

/// |steps| sorted in decreasing order: the canonical order for products, so
/// permuted displacements give bit-identical values.
pub(crate) fn sorted_abs(steps: &[i64]) -> Vec<u64> {
    let mut v: Vec<u64> = steps.iter().map(|s| s.unsigned_abs()).collect();
    v.sort_unstable_by(|a, b| b.cmp(a));
    v
}

#[inline]
pub(crate) fn ordered_product(probs: &[f64], sorted: &[u64]) -> f64 {
    let mut p = probs[sorted[0] as usize];
    for &n in &sorted[1..] {
        p *= probs[n as usize];
    }
    p
}

/// Quadrature over inner time for the lattice kernel at a fixed outer time.
///
/// The partition depends only on (β, δ, t): geometric panels from δ²/8 (the
/// walk's own time scale) up to the subordinator cutoff, capped at a sixth of
/// the subordinator scale t^β. Weights include K^{Λ}_{t;0,s}.
#[derive(Debug, Clone)]
pub struct InnerTimeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub rate: f64,
}

impl InnerTimeRule {
    pub fn new(density: &SubordinatorDensity, lat: &Lattice, t: f64) -> Self {
        let end = density.support(t);
        let scale = density.scale(t);
        let first = lat.delta * lat.delta / 8.0;
        let mut pts = vec![0.0];
        let mut p = first;
        while p < end {
            pts.push(p);
            p *= 1.6;
        }
        pts.push(end);
        let cap = scale / 6.0;
        let mut refined = vec![0.0];
        for w in pts.windows(2) {
            let pieces = ((w[1] - w[0]) / cap).ceil().max(1.0) as usize;
            for i in 1..=pieces {
                refined.push(w[0] + (w[1] - w[0]) * i as f64 / pieces as f64);
            }
        }
        let rule = CompositeRule::new(&refined);
        let mut nodes = Vec::with_capacity(rule.len());
        let mut weights = Vec::with_capacity(rule.len());
        for (&s, &w) in rule.nodes.iter().zip(&rule.weights) {
            let k = density.eval(t, s);
            if k > 0.0 {
                nodes.push(s);
                weights.push(w * k);
            }
        }
        Self {
            nodes,
            weights,
            rate: lat.jump_rate(),
        }
    }

    /// Σ_j w_j Π_i P(s_j, n_i) for canonically sorted |steps|.
    pub fn value(&self, sorted: &[u64]) -> f64 {
        let mut buf = vec![0.0; sorted[0] as usize + 1];
        let mut acc = 0.0;
        for (&s, &w) in self.nodes.iter().zip(&self.weights) {
            fill_scaled_bessel(s * self.rate, &mut buf);
            acc += w * ordered_product(&buf, sorted);
        }
        acc
    }

    /// One-dimensional marginal kernel for orders 0..=n_max.
    pub fn marginal(&self, n_max: usize) -> Vec<f64> {
        let mut buf = vec![0.0; n_max + 1];
        let mut out = vec![0.0; n_max + 1];
        for (&s, &w) in self.nodes.iter().zip(&self.weights) {
            fill_scaled_bessel(s * self.rate, &mut buf);
            for (o, b) in out.iter_mut().zip(&buf) {
                *o += w * b;
            }
        }
        out
    }
}

/// Kernel evaluator for fixed β: holds the tabulated subordinator density.
#[derive(Debug, Clone)]
pub struct Kernels {
    params: ModelParams,
    density: Option<SubordinatorDensity>,
}

impl Kernels {
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

    pub fn density(&self) -> Option<&SubordinatorDensity> {
        self.density.as_ref()
    }

    /// Continuum kernel at squared radius r2.
    pub fn continuum_r2(&self, t: f64, r2: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("time must be positive, got {t}")));
        }
        let d = self.params.d;
        let Some(density) = &self.density else {
            return Ok(gaussian(d, t, r2));
        };
        if r2 == 0.0 && d >= 2 {
            return Err(Error::Domain(format!(
                "continuum kernel is infinite at the origin for d = {d}"
            )));
        }
        // s = w²: the s^{-1/2} factor at the origin (d = 1) becomes bounded.
        let r = r2.sqrt();
        let w_max = density.support(t).sqrt();
        let mut pts = vec![0.0];
        for c in [0.25 * r, 0.5 * r, r, 2.0 * r, density.scale(t).sqrt()] {
            if c > 0.0 && c < w_max {
                pts.push(c);
            }
        }
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        pts.push(w_max);
        integrate_points(
            |w| {
                if w == 0.0 {
                    return if d == 1 && r2 == 0.0 {
                        2.0 / (2.0 * PI).sqrt() * density.eval(t, 0.0)
                    } else {
                        0.0
                    };
                }
                let s = w * w;
                2.0 * w * gaussian(d, s, r2) * density.eval(t, s)
            },
            &pts,
            CONTINUUM_TOL,
        )
        .into_result("continuum kernel", CONTINUUM_TOL)
    }

    pub fn continuum(&self, t: f64, x: &[f64]) -> Result<f64> {
        if x.len() != self.params.d {
            return Err(Error::Domain(format!(
                "point has dimension {}, expected {}",
                x.len(),
                self.params.d
            )));
        }
        self.continuum_r2(t, x.iter().map(|v| v * v).sum())
    }

    pub fn inner_rule(&self, lat: &Lattice, t: f64) -> Option<InnerTimeRule> {
        self.density
            .as_ref()
            .map(|density| InnerTimeRule::new(density, lat, t))
    }

    /// Lattice kernel at integer displacement `steps`.
    pub fn lattice_steps(&self, lat: &Lattice, t: f64, steps: &[i64]) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("time must be >= 0, got {t}")));
        }
        if steps.len() != lat.d || lat.d != self.params.d {
            return Err(Error::Domain("displacement dimension mismatch".into()));
        }
        let sorted = sorted_abs(steps);
        if t == 0.0 {
            return Ok(if sorted[0] == 0 { 1.0 } else { 0.0 });
        }
        Ok(match self.inner_rule(lat, t) {
            None => rw_density_steps(lat, t, steps),
            Some(rule) => rule.value(&sorted),
        })
    }

    pub fn lattice(&self, lat: &Lattice, t: f64, x: &[f64]) -> Result<f64> {
        let steps = lat.to_steps(x)?;
        self.lattice_steps(lat, t, &steps)
    }

    /// Probability mass of the lattice kernel at time t outside
    /// [-n δ, n δ]^d (union bound over coordinates).
    pub fn lattice_tail_mass(&self, lat: &Lattice, t: f64, n: usize) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        let probe = n + 200;
        let marginal = match self.inner_rule(lat, t) {
            Some(rule) => rule.marginal(probe),
            None => {
                let mut buf = vec![0.0; probe + 1];
                fill_scaled_bessel(t * lat.jump_rate(), &mut buf);
                buf
            }
        };
        let tail: f64 = marginal[n + 1..].iter().sum::<f64>() * 2.0;
        lat.d as f64 * tail
    }

    /// Smallest per-axis step count whose truncation loses at most `tail`
    /// of the kernel mass at every time up to `t_max`.
    pub fn radius_for_tail(&self, lat: &Lattice, t_max: f64, tail: f64) -> usize {
        let mut n = 4usize;
        while self.lattice_tail_mass(lat, t_max, n) > tail {
            n = (n as f64 * 1.25).ceil() as usize;
        }
        // Refine downward by bisection between n/1.25 and n.
        let mut lo = ((n as f64) / 1.25).floor() as usize;
        let mut hi = n;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.lattice_tail_mass(lat, t_max, mid) > tail {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

/// Continuum β-ISLTBM kernel K^{BM^d,Λ_β}_{t;x}.
pub fn isltbm_kernel(params: &ModelParams, t: f64, x: &[f64]) -> Result<f64> {
    Kernels::new(*params)?.continuum(t, x)
}

/// Lattice β-ISLTRW kernel K^{RW_δ^d,Λ_β}_{t;x}.
pub fn isltrw_kernel(params: &ModelParams, lat: &Lattice, t: f64, x: &[f64]) -> Result<f64> {
    Kernels::new(*params)?.lattice(lat, t, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bm_density_values() {
        let v = bm_density(1, 1.0, &[0.0]).unwrap();
        assert!((v - 0.398_942_280_401_432_7).abs() < 1e-15);
        let v2 = bm_density(2, 1.0, &[0.0, 0.0]).unwrap();
        assert!((v2 - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!(bm_density(1, 0.0, &[0.0]).is_err());
    }

    #[test]
    fn rw_density_initial_condition() {
        let lat = Lattice::new(0.1, 2, 1.0).unwrap();
        assert_eq!(rw_density(&lat, 0.0, &[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(rw_density(&lat, 0.0, &[0.1, 0.0]).unwrap(), 0.0);
        assert!(rw_density(&lat, 0.5, &[0.05, 0.0]).is_err());
    }

    #[test]
    fn rw_local_clt_at_origin() {
        let lat = Lattice::new(0.1, 1, 1.0).unwrap();
        let rw = rw_density(&lat, 0.5, &[0.0]).unwrap();
        let bm = bm_density(1, 0.5, &[0.0]).unwrap();
        assert!((rw / (bm * 0.1) - 1.0).abs() < 0.01);
    }

    #[test]
    fn brownian_case_reduces_to_heat_kernel() {
        let p = ModelParams::new(0, 2).unwrap();
        let k = isltbm_kernel(&p, 0.7, &[0.3, -0.2]).unwrap();
        assert_eq!(k, bm_density(2, 0.7, &[0.3, -0.2]).unwrap());
        let lat = Lattice::new(0.1, 2, 1.0).unwrap();
        let kr = isltrw_kernel(&p, &lat, 0.7, &[0.3, -0.2]).unwrap();
        assert_eq!(kr, rw_density(&lat, 0.7, &[0.3, -0.2]).unwrap());
    }

    #[test]
    fn continuum_origin_singular_in_higher_dimensions() {
        let p = ModelParams::new(1, 2).unwrap();
        assert!(isltbm_kernel(&p, 1.0, &[0.0, 0.0]).is_err());
        let p1 = ModelParams::new(1, 1).unwrap();
        assert!(isltbm_kernel(&p1, 1.0, &[0.0]).unwrap() > 0.0);
    }

    #[test]
    fn lattice_kernel_initial_condition() {
        let p = ModelParams::new(1, 1).unwrap();
        let lat = Lattice::new(0.1, 1, 1.0).unwrap();
        assert_eq!(isltrw_kernel(&p, &lat, 0.0, &[0.0]).unwrap(), 1.0);
        assert_eq!(isltrw_kernel(&p, &lat, 0.0, &[0.2]).unwrap(), 0.0);
    }

    #[test]
    fn permutation_symmetry_is_exact() {
        let p = ModelParams::new(1, 3).unwrap();
        let lat = Lattice::new(0.2, 3, 1.0).unwrap();
        let k = Kernels::new(p).unwrap();
        let a = k.lattice_steps(&lat, 0.4, &[1, -3, 2]).unwrap();
        let b = k.lattice_steps(&lat, 0.4, &[2, 1, 3]).unwrap();
        assert_eq!(a, b);
    }
}
