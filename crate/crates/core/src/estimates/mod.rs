//! Kernel estimates: L² norms, two-time kernels, temporal and spatial
//! difference integrals, the lattice DDE and the lattice-to-continuum limit.
//!
//! All L² quantities are evaluated through [`pair::PairIntegrator`], which
//! integrates against the law of the summed inner time. Spatial integrals
//! never appear explicitly.

pub mod dde;
pub mod fit;
pub mod limit;
pub mod pair;
pub mod verify;

use std::cell::RefCell;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{gaussian, walk::fill_scaled_bessel, KernelTable, Kernels, Lattice};
use crate::params::ModelParams;
use crate::quadrature::{integrate_points, Tolerance};
pub use fit::ScalingFit;
pub use pair::{InnerWeight, PairIntegrator};

const TIME_TOL: Tolerance = Tolerance::new(1e-300, 1e-7).signed();

/// Where the kernel lives: ℝ^d or δℤ^d.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    Continuum,
    Lattice(Lattice),
}

/// Probability (lattice) or density (continuum) of the underlying Markov
/// process at inner time ρ and squared radius / displacement.
fn transition(space: &Space, d: usize, disp: &Displacement) -> impl Fn(f64) -> f64 {
    let space = *space;
    let disp = disp.clone();
    move |rho: f64| match (&space, &disp) {
        (Space::Continuum, Displacement::Continuum(r2)) => gaussian(d, rho, *r2),
        (Space::Lattice(lat), Displacement::Steps(steps)) => walk_product(lat, rho, steps),
        _ => f64::NAN,
    }
}

#[derive(Debug, Clone)]
enum Displacement {
    Continuum(f64),
    Steps(Vec<u64>),
}

fn walk_product(lat: &Lattice, rho: f64, sorted: &[u64]) -> f64 {
    let mut buf = vec![0.0; sorted[0] as usize + 1];
    fill_scaled_bessel(rho * lat.jump_rate(), &mut buf);
    sorted.iter().map(|&n| buf[n as usize]).product()
}

fn origin(space: &Space, d: usize) -> Displacement {
    match space {
        Space::Continuum => Displacement::Continuum(0.0),
        Space::Lattice(_) => Displacement::Steps(vec![0; d]),
    }
}

fn check_space(params: &ModelParams, space: &Space) -> Result<()> {
    if let Space::Lattice(lat) = space {
        if lat.d != params.d {
            return Err(Error::Domain("lattice and model dimensions differ".into()));
        }
    }
    Ok(())
}

fn require_l2_dimension(params: &ModelParams, space: &Space) -> Result<()> {
    if matches!(space, Space::Continuum) && params.d > 3 {
        return Err(Error::Domain(format!(
            "the continuum kernel is not square integrable in d = {}; use divergence_check",
            params.d
        )));
    }
    Ok(())
}

/// Two-time kernel K̃(u, v) = ∫∫ p(r₁ + r₂, 0) K^Λ(u, r₁) K^Λ(v, r₂) dr₁ dr₂,
/// with p the Gaussian density (continuum) or walk probability (lattice).
pub fn two_time_kernel(params: &ModelParams, space: &Space, u: f64, v: f64) -> Result<f64> {
    check_space(params, space)?;
    require_l2_dimension(params, space)?;
    let pair = PairIntegrator::new(*params)?;
    pair.integrate(
        u,
        v,
        transition(space, params.d, &origin(space, params.d)),
        &[],
        0.0,
        "two-time kernel",
    )
}

/// ∫ K(t, x)² dx via the summed-inner-time reduction.
pub fn l2_norm_continuum(params: &ModelParams, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("time must be positive, got {t}")));
    }
    two_time_kernel(params, &Space::Continuum, t, t)
}

#[derive(Debug, Clone, Serialize)]
pub struct LatticeL2 {
    pub t: f64,
    pub delta: f64,
    /// Σ_x K² from the identity route.
    pub value: f64,
    /// Σ_x K² summed directly over a kernel table, when it fits the budget.
    pub table_value: Option<f64>,
    pub radius_steps: Option<usize>,
    pub tail_mass: Option<f64>,
    pub continuum: f64,
    /// value / (δ^d · continuum)
    pub ratio: f64,
}

/// Σ_x K^{RW,Λ}(t, x)², with its ratio to δ^d times the continuum value.
///
/// The identity route Σ_x K² = P_{t,t}[p^{RW}(·, 0)] is always computed. The
/// direct table sum is added when the table radius needed for tail mass
/// below 1e-8 fits in `budget` entries.
pub fn l2_norm_lattice(
    params: &ModelParams,
    lat: &Lattice,
    t: f64,
    budget: usize,
) -> Result<LatticeL2> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("time must be positive, got {t}")));
    }
    params.require_field_dimension()?;
    let space = Space::Lattice(*lat);
    let value = two_time_kernel(params, &space, t, t)?;
    let kernels = Kernels::new(*params)?;
    let radius = kernels.radius_for_tail(lat, t, 1e-8);
    let (table_value, radius_steps, tail_mass) =
        match KernelTable::build_lattice(params, lat, &[t], radius, budget) {
            Ok(table) => (
                table.lattice_sum(0, true),
                Some(radius),
                Some(kernels.lattice_tail_mass(lat, t, radius)),
            ),
            Err(Error::Size { .. }) => (None, None, None),
            Err(e) => return Err(e),
        };
    let continuum = l2_norm_continuum(params, t)?;
    Ok(LatticeL2 {
        t,
        delta: lat.delta,
        value,
        table_value,
        radius_steps,
        tail_mass,
        continuum,
        ratio: value / (lat.delta.powi(lat.d as i32) * continuum),
    })
}

/// Truncated L² integral I(ε) = ∫∫_{r₁+r₂ ≥ ε} [2π(r₁+r₂)]^{-d/2} K^Λ K^Λ.
pub fn divergence_check(params: &ModelParams, t: f64, floors: &[f64]) -> Result<Vec<f64>> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("time must be positive, got {t}")));
    }
    let d = params.d;
    let pair = PairIntegrator::new(*params)?;
    floors
        .iter()
        .map(|&eps| {
            if !(eps > 0.0) {
                return Err(Error::Domain(format!("floor must be positive, got {eps}")));
            }
            pair.integrate(t, t, |rho| gaussian(d, rho, 0.0), &[], eps, "truncated L2")
        })
        .collect()
}

/// Holds the first error raised inside a quadrature callback. The callback
/// returns NaN, which stops the enclosing quadrature early.
#[derive(Default)]
struct FirstError(RefCell<Option<Error>>);

impl FirstError {
    fn keep(&self, r: Result<f64>) -> f64 {
        match r {
            Ok(v) => v,
            Err(e) => {
                self.0.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    }

    fn finish(&self, r: Result<f64>) -> Result<f64> {
        match self.0.borrow_mut().take() {
            Some(e) => Err(e),
            None => r,
        }
    }
}

/// Integrates `f` over (0, end] with geometric breakpoints toward 0 and at
/// the given interior points.
fn time_integral<F: FnMut(f64) -> f64>(
    f: F,
    end: f64,
    fine: f64,
    extra: &[f64],
    context: &str,
) -> Result<f64> {
    let mut pts = vec![0.0];
    let mut p = fine.min(end) * 1e-6;
    while p < end {
        pts.push(p);
        p *= 4.0;
    }
    pts.extend(extra.iter().copied().filter(|&x| x > 0.0 && x < end));
    pts.push(end);
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup();
    integrate_points(f, &pts, TIME_TOL).into_result(context, TIME_TOL)
}

/// ∫₀^t ∫ [K(t−s, x) − K(r−s, x)]² dx ds (sums over x on the lattice), with
/// K = 0 at negative times. With h = t − r the two-time identity gives
///
/// ```text
/// ∫₀^r [K̃(σ+h,σ+h) + K̃(σ,σ) − 2K̃(σ+h,σ)] dσ + ∫₀^h K̃(σ,σ) dσ
/// ```
///
/// and the bracket equals P[p] against the signed weight K^Λ(σ+h,·) − K^Λ(σ,·)
/// on both inner times, which avoids cancellation when σ ≫ h. Continuum
/// values go through [`temporal_difference_scan`].
pub fn temporal_difference_integral(
    params: &ModelParams,
    space: &Space,
    r: f64,
    t: f64,
) -> Result<f64> {
    if !(0.0 < r && r < t) {
        return Err(Error::Domain(format!("need 0 < r < t, got r = {r}, t = {t}")));
    }
    check_space(params, space)?;
    if matches!(space, Space::Continuum) {
        return Ok(temporal_difference_scan(params, t, &[t - r])?[0]);
    }
    let h = t - r;
    let pair = PairIntegrator::new(*params)?;
    let p0 = transition(space, params.d, &origin(space, params.d));
    let slot = FirstError::default();
    let first = slot.finish(time_integral(
        |sigma| {
            if sigma <= 0.0 {
                return 0.0;
            }
            let w = InnerWeight::diff(sigma + h, sigma);
            slot.keep(pair.integrate_weights(&w, &w, &p0, &[], 0.0, "temporal bracket"))
        },
        r,
        h,
        &[h, 2.0 * h, 4.0 * h],
        "temporal difference",
    ))?;
    let second = slot.finish(time_integral(
        |sigma| {
            if sigma <= 0.0 {
                return 0.0;
            }
            slot.keep(pair.integrate(sigma, sigma, &p0, &[], 0.0, "diagonal two-time kernel"))
        },
        h,
        h,
        &[],
        "temporal difference tail",
    ))?;
    Ok(first + second)
}

/// Continuum temporal difference integrals at t for several lags h = t − r.
///
/// Self-similarity gives K̃(λu, λv) = λ^{−a} K̃(u, v) with a = dβ/2, so the
/// bracket at σ is σ^{−a} G(h/σ) with G(q) the bracket at (1 + q, 1), and
///
/// ```text
/// I(h) = h^{1−a} [ ∫_{h/r}^∞ q^{a−2} G(q) dq + K̃(1,1) / (1 − a) ]
/// ```
///
/// One scan shares the q-integral across all lags.
pub fn temporal_difference_scan(params: &ModelParams, t: f64, lags: &[f64]) -> Result<Vec<f64>> {
    require_l2_dimension(params, &Space::Continuum)?;
    if lags.iter().any(|&h| !(h > 0.0 && h < t)) {
        return Err(Error::Domain(format!("lags must lie in (0, {t})")));
    }
    let d = params.d;
    let a = d as f64 * params.beta() / 2.0;
    if a >= 1.0 {
        return Err(Error::Domain(format!(
            "temporal difference integral diverges for d = {d} and nu = {}",
            params.nu()
        )));
    }
    let pair = PairIntegrator::new(*params)?;
    let p0 = move |rho: f64| gaussian(d, rho, 0.0);
    let diag = pair.integrate(1.0, 1.0, p0, &[], 0.0, "diagonal two-time kernel")?;
    // y = ln q; the integrand is q^{a−1} G(q).
    let y_top = 1e6f64.ln();
    let mut lows: Vec<(usize, f64)> = lags
        .iter()
        .enumerate()
        .map(|(i, &h)| (i, (h / (t - h)).ln()))
        .collect();
    lows.sort_by(|x, y| x.1.partial_cmp(&y.1).unwrap());
    let slot = FirstError::default();
    let integrand = |y: f64| {
        let q = y.exp();
        let w = InnerWeight::diff(1.0 + q, 1.0);
        q.powf(a - 1.0) * slot.keep(pair.integrate_weights(&w, &w, p0, &[], 0.0, "temporal bracket"))
    };
    // Cumulative integrals from the top down.
    let mut out = vec![0.0; lags.len()];
    let mut above = diag * (y_top * (a - 1.0)).exp() / (1.0 - a);
    let mut upper = y_top;
    for &(i, y) in lows.iter().rev() {
        if y < upper {
            let n = ((upper - y).ceil() as usize).max(1);
            let pts: Vec<f64> = (0..=n).map(|j| y + (upper - y) * j as f64 / n as f64).collect();
            let seg = integrate_points(&integrand, &pts, TIME_TOL);
            above += slot.finish(seg.into_result("temporal difference", TIME_TOL))?;
            upper = y;
        }
        out[i] = lags[i].powf(1.0 - a) * (above + diag / (1.0 - a));
    }
    Ok(out)
}

/// ∫₀^t ∫ [K(s, x) − K(s, x + z)]² dx ds (sums on the lattice), as
/// 2∫₀^t P_{s,s}[p(·, 0) − p(·, z)] ds. In the continuum the bracket is
/// (1 − e^{−|z|²/2ρ}) [2πρ]^{−d/2}, evaluated without cancellation.
pub fn spatial_difference_integral(
    params: &ModelParams,
    space: &Space,
    t: f64,
    z: &[f64],
) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("time must be positive, got {t}")));
    }
    check_space(params, space)?;
    params.require_field_dimension()?;
    if z.len() != params.d {
        return Err(Error::Domain("displacement dimension mismatch".into()));
    }
    let d = params.d;
    let z2: f64 = z.iter().map(|v| v * v).sum();
    if z2 == 0.0 {
        return Ok(0.0);
    }
    let pair = PairIntegrator::new(*params)?;
    let bracket: Box<dyn Fn(f64) -> f64> = match space {
        Space::Continuum => Box::new(move |rho: f64| {
            -(-z2 / (2.0 * rho)).exp_m1() * gaussian(d, rho, 0.0)
        }),
        Space::Lattice(lat) => {
            let steps = lat.to_steps(z)?;
            let sorted = crate::kernels::sorted_abs(&steps);
            let lat = *lat;
            Box::new(move |rho: f64| {
                let mut buf = vec![0.0; sorted[0] as usize + 1];
                fill_scaled_bessel(rho * lat.jump_rate(), &mut buf);
                let at0 = buf[0].powi(d as i32);
                let atz: f64 = sorted.iter().map(|&n| buf[n as usize]).product();
                at0 - atz
            })
        }
    };
    let slot = FirstError::default();
    let hint = [z2];
    let v = slot.finish(time_integral(
        |s| {
            if s <= 0.0 {
                return 0.0;
            }
            slot.keep(pair.integrate(s, s, &bracket, &hint, 0.0, "spatial bracket"))
        },
        t,
        z2.min(t),
        &[],
        "spatial difference",
    ))?;
    Ok(2.0 * v)
}

/// The temporal difference integral by direct quadrature over x (d = 1,
/// continuum). Far slower than [`temporal_difference_scan`]; used as an
/// independent cross-check of the two-time identity.
pub fn temporal_difference_direct(params: &ModelParams, r: f64, t: f64) -> Result<f64> {
    if params.d != 1 {
        return Err(Error::Domain("direct temporal quadrature is implemented for d = 1".into()));
    }
    if !(0.0 < r && r < t) {
        return Err(Error::Domain(format!("need 0 < r < t, got r = {r}, t = {t}")));
    }
    let h = t - r;
    let kernels = Kernels::new(*params)?;
    let tol = Tolerance::new(1e-300, 1e-6).signed();
    let beta = params.beta();
    let spread = |tau: f64| tau.powf(beta / 2.0);
    let x_integral = |f: &dyn Fn(f64) -> Result<f64>, scale: f64, slot: &FirstError| {
        let pts: Vec<f64> = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0]
            .iter()
            .map(|c| c * scale)
            .collect();
        // Kernels are even in x.
        let v = integrate_points(|x| slot.keep(f(x)), &pts, tol);
        v.into_result("direct spatial quadrature", tol).map(|v| 2.0 * v)
    };
    let slot = FirstError::default();
    let inner = FirstError::default();
    let first = slot.finish(time_integral(
        |sigma| {
            if sigma <= 0.0 {
                return 0.0;
            }
            let f = |x: f64| -> Result<f64> {
                let a = kernels.continuum(sigma + h, &[x])?;
                let b = kernels.continuum(sigma, &[x])?;
                Ok((a - b) * (a - b))
            };
            let v = x_integral(&f, spread(sigma + h), &inner);
            slot.keep(inner.finish(v))
        },
        r,
        h,
        &[h, 2.0 * h, 4.0 * h],
        "direct temporal difference",
    ))?;
    let second = slot.finish(time_integral(
        |sigma| {
            if sigma <= 0.0 {
                return 0.0;
            }
            let f = |x: f64| -> Result<f64> { Ok(kernels.continuum(sigma, &[x])?.powi(2)) };
            let v = x_integral(&f, spread(sigma), &inner);
            slot.keep(inner.finish(v))
        },
        h,
        h,
        &[],
        "direct temporal difference tail",
    ))?;
    Ok(first + second)
}
