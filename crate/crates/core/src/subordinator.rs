//! Densities and moments of the inverse stable subordinator Λ_β, β = 1/2^k.
//!
//! For k ≥ 1 the density is built by composing half-line Gaussian densities:
//! Λ_{1/2^k}(t) has the law of |B_k(|B_{k-1}(⋯|B_1(t)|⋯)|)| where the B_i are
//! independent Brownian motions with variance 2t. Hence
//!
//! ```text
//! K_k(t, s) = ∫₀^∞ K_{k-1}(t, u) · K_1(u, s) du,   K_1(t, s) = exp(-s²/4t) / √(πt).
//! ```
//!
//! k = 0 (β = 1) is the degenerate case Λ_1(t) = t. It never has a numeric
//! density; callers branch on [`ModelParams::is_brownian`].

use std::f64::consts::PI;
use std::io::Write;
use std::sync::{Arc, OnceLock};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::interp::ChebyshevTable;
use crate::params::{ModelParams, MAX_K};
use crate::quadrature::{integrate_points, InnerStatus, Tolerance};

/// Unit-time support cutoffs: g_k(s) = K_k(1, s) is below 1e-20 past these.
pub(crate) const UNIT_CUTOFF: [f64; (MAX_K + 1) as usize] = [1.0, 13.6, 31.0, 44.0];

const TABLE_PANEL_WIDTH: f64 = 0.125;
const TABLE_DEGREE: usize = 18;
const DIRECT_TOL: Tolerance = Tolerance::new(1e-300, 1e-12);

/// K^{Λ_{1/2}}_{t;0,s} = 2/√(4πt) · exp(-s²/4t).
pub fn half_stable_density(t: f64, s: f64) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("time must be positive, got {t}")));
    }
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("inner time must be >= 0, got {s}")));
    }
    Ok(half_stable_unchecked(t, s))
}

#[inline]
pub(crate) fn half_stable_unchecked(t: f64, s: f64) -> f64 {
    (-s * s / (4.0 * t)).exp() / (PI * t).sqrt()
}

fn check_args(params: &ModelParams, t: f64, s: f64) -> Result<()> {
    if params.is_brownian() {
        return Err(Error::Domain(
            "beta = 1 has the degenerate inner time Λ(t) = t; use the Brownian path".into(),
        ));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("time must be positive, got {t}")));
    }
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("inner time must be >= 0, got {s}")));
    }
    Ok(())
}

/// Breakpoints for ∫₀^{w_max} h(w) exp(-s²/4w²) dw, where the exponential
/// switches on near w ≈ s/2.
fn compose_points(s: f64, w_max: f64) -> Vec<f64> {
    let mut pts = vec![0.0];
    for c in [0.25 * s, 0.5 * s, s, 2.0 * s] {
        if c > pts[pts.len() - 1] && c < w_max {
            pts.push(c);
        }
    }
    pts.push(w_max);
    pts
}

/// One composition step: given the level-(k-1) density `inner` at time t
/// with support cutoff `u_max`, returns ∫ inner(u) K_1(u, s) du.
/// Substituting u = w² removes the u^{-1/2} singularity of K_1 at u = 0.
fn compose_step<F: Fn(f64) -> f64>(inner: F, u_max: f64, s: f64) -> crate::quadrature::QuadResult {
    let w_max = u_max.sqrt();
    let c = 2.0 / PI.sqrt();
    let pts = compose_points(s, w_max);
    integrate_points(
        |w| {
            if w == 0.0 {
                return 0.0;
            }
            inner(w * w) * c * (-s * s / (4.0 * w * w)).exp()
        },
        &pts,
        DIRECT_TOL,
    )
}

fn direct_level(k: u32, t: f64, s: f64, status: &InnerStatus) -> f64 {
    if k == 1 {
        return half_stable_unchecked(t, s);
    }
    let prev_beta = 1.0 / (1u32 << (k - 1)) as f64;
    let u_max = t.powf(prev_beta) * UNIT_CUTOFF[(k - 1) as usize];
    let r = compose_step(|u| direct_level(k - 1, t, u, status), u_max, s);
    status.track(r)
}

/// K^{Λ_β}_{t;0,s} by direct (k-1)-fold composition of half-stable densities.
///
/// Every level is integrated adaptively, so the cost grows geometrically in
/// k. For repeated evaluation use [`SubordinatorDensity`].
pub fn isl_density(params: &ModelParams, t: f64, s: f64) -> Result<f64> {
    check_args(params, t, s)?;
    let status = InnerStatus::new();
    let v = direct_level(params.k, t, s, &status);
    status.check("isl_density composition", DIRECT_TOL)?;
    Ok(v)
}

fn level_tables() -> &'static [OnceLock<Arc<ChebyshevTable>>; (MAX_K + 1) as usize] {
    static TABLES: OnceLock<[OnceLock<Arc<ChebyshevTable>>; (MAX_K + 1) as usize]> =
        OnceLock::new();
    TABLES.get_or_init(Default::default)
}

/// Unit-time density g_k(σ) = K_k(1, σ) tabulated on [0, UNIT_CUTOFF[k]],
/// each level composed from the tabulated level below. Built once per
/// process and shared read-only.
fn unit_table(k: u32) -> Arc<ChebyshevTable> {
    debug_assert!(k >= 2);
    level_tables()[k as usize]
        .get_or_init(|| {
            let end = UNIT_CUTOFF[k as usize];
            let u_max = UNIT_CUTOFF[(k - 1) as usize];
            let panels = (end / TABLE_PANEL_WIDTH).ceil() as usize;
            let table = if k == 2 {
                ChebyshevTable::build(
                    |s| compose_step(|u| half_stable_unchecked(1.0, u), u_max, s).value,
                    0.0,
                    end,
                    panels,
                    TABLE_DEGREE,
                )
            } else {
                let below = unit_table(k - 1);
                ChebyshevTable::build(
                    |s| compose_step(|u| below.eval(u), u_max, s).value,
                    0.0,
                    end,
                    panels,
                    TABLE_DEGREE,
                )
            };
            Arc::new(table)
        })
        .clone()
}

/// Evaluable density s ↦ K^{Λ_β}_{t;0,s} using self-similarity
/// K(t, s) = t^{-β} g(s t^{-β}) with g tabulated once per β.
#[derive(Debug, Clone)]
pub struct SubordinatorDensity {
    params: ModelParams,
    table: Option<Arc<ChebyshevTable>>,
}

impl SubordinatorDensity {
    pub fn new(params: ModelParams) -> Result<Self> {
        if params.is_brownian() {
            return Err(Error::Domain(
                "beta = 1 has no subordinator density (degenerate inner time)".into(),
            ));
        }
        let table = if params.k >= 2 {
            Some(unit_table(params.k))
        } else {
            None
        };
        Ok(Self { params, table })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// g(σ) = K(1, σ).
    #[inline]
    pub fn unit(&self, sigma: f64) -> f64 {
        match &self.table {
            None => {
                if sigma > UNIT_CUTOFF[1] {
                    0.0
                } else {
                    half_stable_unchecked(1.0, sigma)
                }
            }
            Some(t) => t.eval(sigma).max(0.0),
        }
    }

    /// Time scale t^β of Λ_β(t).
    #[inline]
    pub fn scale(&self, t: f64) -> f64 {
        t.powf(self.params.beta())
    }

    /// Inner-time cutoff past which the density at time t is negligible.
    pub fn support(&self, t: f64) -> f64 {
        self.scale(t) * UNIT_CUTOFF[self.params.k as usize]
    }

    pub fn unit_support(&self) -> f64 {
        UNIT_CUTOFF[self.params.k as usize]
    }

    #[inline]
    pub fn eval(&self, t: f64, s: f64) -> f64 {
        let c = self.scale(t);
        self.unit(s / c) / c
    }

    pub fn eval_checked(&self, t: f64, s: f64) -> Result<f64> {
        check_args(&self.params, t, s)?;
        Ok(self.eval(t, s))
    }

    /// Writes `t,s,density` rows for every pair of the given grids.
    pub fn write_csv<W: Write>(&self, mut out: W, times: &[f64], inner: &[f64]) -> Result<()> {
        writeln!(out, "t,s,density")?;
        for &t in times {
            for &s in inner {
                let v = self.eval_checked(t, s)?;
                writeln!(out, "{t},{s},{v:.17e}")?;
            }
        }
        Ok(())
    }
}

/// E_{β,κ} = 𝔼(Λ_β(1))^κ / κ! for κ = 0..ν-1.
#[derive(Debug, Clone, Serialize)]
pub struct MomentSet {
    pub params: ModelParams,
    pub values: Vec<f64>,
}

impl MomentSet {
    pub fn get(&self, kappa: usize) -> f64 {
        self.values[kappa]
    }
}

pub fn moments(params: &ModelParams) -> Result<MomentSet> {
    let nu = params.nu() as usize;
    if params.is_brownian() {
        return Ok(MomentSet {
            params: *params,
            values: vec![1.0],
        });
    }
    let density = SubordinatorDensity::new(*params)?;
    let end = density.unit_support();
    let pts: Vec<f64> = (0..=16).map(|i| end * i as f64 / 16.0).collect();
    let tol = Tolerance::new(1e-300, 1e-12);
    let mut values = Vec::with_capacity(nu);
    let mut factorial = 1.0;
    for kappa in 0..nu {
        if kappa > 0 {
            factorial *= kappa as f64;
        }
        let m = integrate_points(|s| s.powi(kappa as i32) * density.unit(s), &pts, tol)
            .into_result("subordinator moment", tol)?;
        values.push(m / factorial);
    }
    Ok(MomentSet {
        params: *params,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;

    fn p(k: u32) -> ModelParams {
        ModelParams::new(k, 1).unwrap()
    }

    #[test]
    fn half_stable_closed_form_values() {
        let v = half_stable_density(1.0, 0.0).unwrap();
        assert!((v - 1.0 / PI.sqrt()).abs() < 1e-15);
        assert!((v - 0.564_189_583_547_756_3).abs() < 1e-15);
        let a = half_stable_density(4.0, 2.0).unwrap();
        let b = half_stable_density(1.0, 1.0).unwrap();
        assert!((a - 0.5 * b).abs() < 1e-16);
        assert!(half_stable_density(0.0, 1.0).is_err());
        assert!(half_stable_density(-1.0, 1.0).is_err());
    }

    #[test]
    fn half_stable_normalized() {
        let r = integrate(|s| half_stable_unchecked(1.0, s), 0.0, 40.0, Tolerance::rel(1e-14));
        assert!((r.value - 1.0).abs() < 1e-13);
    }

    #[test]
    fn recursion_base_is_half_stable() {
        for &(t, s) in &[(0.3, 0.1), (1.0, 0.0), (2.5, 3.0)] {
            assert_eq!(
                isl_density(&p(1), t, s).unwrap(),
                half_stable_density(t, s).unwrap()
            );
        }
    }

    #[test]
    fn brownian_case_has_no_density() {
        assert!(isl_density(&p(0), 1.0, 1.0).is_err());
        assert!(SubordinatorDensity::new(p(0)).is_err());
    }

    #[test]
    fn unit_cutoffs_leave_negligible_tail() {
        for k in 1..=MAX_K {
            let dens = SubordinatorDensity::new(p(k)).unwrap();
            let end = dens.unit_support();
            let peak = dens.unit(0.0);
            assert!(dens.unit(0.98 * end) < 1e-18 * peak, "k={k}");
        }
    }

    #[test]
    fn tables_resolved() {
        for k in 2..=MAX_K {
            let t = unit_table(k);
            assert!(t.tail_indicator() < 1e-13, "k={k}: {}", t.tail_indicator());
        }
    }

    #[test]
    fn first_moment_half_stable() {
        let m = moments(&p(1)).unwrap();
        assert_eq!(m.values.len(), 2);
        assert!((m.get(0) - 1.0).abs() < 1e-12);
        assert!((m.get(1) - 2.0 / PI.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn brownian_moments_trivial() {
        let m = moments(&p(0)).unwrap();
        assert_eq!(m.values, vec![1.0]);
    }

    #[test]
    fn moments_positive() {
        for k in 1..=MAX_K {
            let m = moments(&p(k)).unwrap();
            assert_eq!(m.values.len(), 1 << k);
            assert!(m.values.iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn csv_export_header_and_rows() {
        let dens = SubordinatorDensity::new(p(2)).unwrap();
        let mut buf = Vec::new();
        dens.write_csv(&mut buf, &[1.0, 2.0], &[0.0, 0.5, 1.0]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "t,s,density");
        assert_eq!(lines.len(), 7);
    }
}
