//! Verification suites: each computes a family of estimates, fits or
//! compares them against their predicted values and reports verdicts with
//! the underlying (lag, value) series.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::*;
use crate::kernels::table::{KernelTable, DEFAULT_BUDGET};
use crate::quadrature::integrate_points;

#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exponent_expected: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exponent_fitted: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observed: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    /// Two-sided exponent check |fitted − expected| ≤ tol.
    fn exponent(name: String, fit: &ScalingFit, expected: f64, tol: f64) -> Self {
        Self {
            pass: (fit.slope - expected).abs() <= tol,
            detail: format!(
                "slope {:.4} ± {:.4} vs {:.4} (tolerance {tol})",
                fit.slope, fit.half_width, expected
            ),
            name,
            exponent_expected: Some(expected),
            exponent_fitted: Some(fit.slope),
            half_width: Some(fit.half_width),
            observed: None,
            tolerance: tol,
        }
    }

    /// One-sided exponent check fitted ≥ expected − tol.
    fn exponent_at_least(name: String, fit: &ScalingFit, expected: f64, tol: f64) -> Self {
        let mut v = Self::exponent(name, fit, expected, tol);
        v.pass = fit.slope >= expected - tol;
        v.detail = format!(
            "slope {:.4} ± {:.4}, required ≥ {:.4}; local slopes {:?}",
            fit.slope,
            fit.half_width,
            expected - tol,
            fit.local_slopes()
                .iter()
                .map(|s| (s * 1e4).round() / 1e4)
                .collect::<Vec<_>>()
        );
        v
    }

    fn check(name: String, observed: f64, tol: f64, pass: bool, detail: String) -> Self {
        Self {
            name,
            exponent_expected: None,
            exponent_fitted: None,
            half_width: None,
            observed: Some(observed),
            tolerance: tol,
            pass,
            detail,
        }
    }
}

/// A (lag, value) series written as CSV.
#[derive(Debug, Clone, Serialize)]
pub struct Series {
    pub name: String,
    pub lag_label: String,
    pub value_label: String,
    pub rows: Vec<(f64, f64)>,
}

impl Series {
    fn new(name: String, lag_label: &str, value_label: &str, lags: &[f64], values: &[f64]) -> Self {
        Self {
            name,
            lag_label: lag_label.into(),
            value_label: value_label.into(),
            rows: lags.iter().copied().zip(values.iter().copied()).collect(),
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{},{}", self.lag_label, self.value_label)?;
        for (l, v) in &self.rows {
            writeln!(out, "{l:.17e},{v:.17e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub verdicts: Vec<Verdict>,
    #[serde(skip)]
    pub series: Vec<Series>,
}

impl SuiteReport {
    fn new(suite: &str) -> Self {
        Self {
            suite: suite.into(),
            verdicts: Vec::new(),
            series: Vec::new(),
        }
    }

    pub fn pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn merge(&mut self, other: SuiteReport) {
        self.verdicts.extend(other.verdicts);
        self.series.extend(other.series);
    }

    /// Writes `<suite>.json` and one CSV per series into `dir`; returns the
    /// written paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        let json = dir.join(format!("{}.json", self.suite));
        fs::write(&json, serde_json::to_vec_pretty(self)?)?;
        paths.push(json);
        for s in &self.series {
            let path = dir.join(format!("{}.csv", s.name));
            s.write_csv(fs::File::create(&path)?)?;
            paths.push(path);
        }
        Ok(paths)
    }
}

fn label(params: &ModelParams) -> String {
    format!("beta={} d={}", params.beta_label(), params.d)
}

fn slug(params: &ModelParams) -> String {
    format!("k{}_d{}", params.k, params.d)
}

/// Total mass of the continuum kernel at time t, integrated radially.
pub fn continuum_mass(params: &ModelParams, t: f64) -> Result<f64> {
    let kernels = Kernels::new(*params)?;
    let d = params.d;
    // Surface area of the unit sphere in ℝ^d.
    let area = 2.0 * std::f64::consts::PI.powf(d as f64 / 2.0)
        / statrs::function::gamma::gamma(d as f64 / 2.0);
    let spread = match kernels.density() {
        Some(density) => density.support(t).sqrt(),
        None => t.sqrt(),
    };
    let mut pts = vec![0.0];
    let mut p = spread * 1e-6;
    while p < 12.0 * spread {
        pts.push(p);
        p *= 2.0;
    }
    pts.push(12.0 * spread);
    let tol = Tolerance::new(1e-300, 1e-9);
    let slot = FirstError::default();
    let v = integrate_points(
        |r| {
            if r <= 0.0 {
                return 0.0;
            }
            area * r.powi(d as i32 - 1) * slot.keep(kernels.continuum_r2(t, r * r))
        },
        &pts,
        tol,
    );
    slot.finish(v.into_result("continuum kernel mass", tol))
}

/// Row sums of a lattice table, each within 1e-6 of 1.
pub fn row_sum_report(table: &KernelTable) -> SuiteReport {
    let params = table.params();
    let mut report = SuiteReport::new(&format!("row_sums_{}", slug(params)));
    let delta = table.lattice().map_or(f64::NAN, |l| l.delta);
    let radius = table.radius_steps().unwrap_or(0);
    for (i, &t) in table.times().iter().enumerate() {
        let sum = table.row_sum(i).unwrap_or(f64::NAN);
        report.verdicts.push(Verdict::check(
            format!("lattice row sum {} delta={delta} t={t}", label(params)),
            sum,
            1e-6,
            (sum - 1.0).abs() <= 1e-6,
            format!("sum {sum:.12} over radius {radius} steps"),
        ));
    }
    report
}

/// Lattice row sums (from a tail-controlled table) and continuum mass at
/// each time.
pub fn verify_normalization(params: &ModelParams, lat: &Lattice, times: &[f64]) -> Result<SuiteReport> {
    let mut report = SuiteReport::new(&format!("normalization_{}", slug(params)));
    let kernels = Kernels::new(*params)?;
    let t_max = times.iter().copied().fold(0.0, f64::max);
    let radius = kernels.radius_for_tail(lat, t_max, 1e-9);
    let table = KernelTable::build_lattice(params, lat, times, radius, DEFAULT_BUDGET)?;
    let sums = row_sum_report(&table);
    for (i, &t) in times.iter().enumerate() {
        report.verdicts.push(sums.verdicts[i].clone());
        if t > 0.0 {
            let mass = continuum_mass(params, t)?;
            report.verdicts.push(Verdict::check(
                format!("continuum mass {} t={t}", label(params)),
                mass,
                1e-5,
                (mass - 1.0).abs() <= 1e-5,
                format!("mass {mass:.12}"),
            ));
        }
    }
    Ok(report)
}

/// L² time scaling of the continuum kernel over t ∈ 2^-4..2^4, plus the
/// lattice ratio to δ^d times the continuum value at t = 1 for each δ and
/// the lattice time slope at the finest δ.
pub fn verify_l2(params: &ModelParams, deltas: &[f64]) -> Result<SuiteReport> {
    let mut report = SuiteReport::new(&format!("l2_{}", slug(params)));
    let nu = params.nu() as f64;
    let d = params.d as f64;
    let expected = -d / (2.0 * nu);
    let times = fit::dyadic(-4, 4);
    let values = times
        .iter()
        .map(|&t| l2_norm_continuum(params, t))
        .collect::<Result<Vec<_>>>()?;
    let f = ScalingFit::fit(&times, &values)?;
    report.verdicts.push(Verdict::exponent(
        format!("L2 time slope {}", label(params)),
        &f,
        expected,
        0.02,
    ));
    report.series.push(Series::new(
        format!("l2_continuum_{}", slug(params)),
        "t",
        "l2",
        &times,
        &values,
    ));
    for (i, &delta) in deltas.iter().enumerate() {
        let lat = Lattice::new(delta, params.d, 0.0)?;
        let l = l2_norm_lattice(params, &lat, 1.0, DEFAULT_BUDGET / 4)?;
        report.verdicts.push(Verdict::check(
            format!("lattice L2 ratio {} delta={delta}", label(params)),
            l.ratio,
            0.05,
            (l.ratio - 1.0).abs() <= 0.05,
            format!(
                "identity {:.6e}, table {}, ratio {:.5}",
                l.value,
                l.table_value.map_or("not built".into(), |v| format!("{v:.6e}")),
                l.ratio
            ),
        ));
        if i + 1 == deltas.len() {
            let space = Space::Lattice(lat);
            let lv = times
                .iter()
                .map(|&t| two_time_kernel(params, &space, t, t))
                .collect::<Result<Vec<_>>>()?;
            let lf = ScalingFit::fit(&times, &lv)?;
            report.verdicts.push(Verdict::exponent(
                format!("lattice L2 time slope {} delta={delta}", label(params)),
                &lf,
                expected,
                0.03,
            ));
            report.series.push(Series::new(
                format!("l2_lattice_{}", slug(params)),
                "t",
                "l2",
                &times,
                &lv,
            ));
        }
    }
    Ok(report)
}

/// Truncated L² integrals I(ε), ε = 1e-1..1e-6: growth without plateau in
/// d = 4 and convergence in d = 3.
pub fn verify_divergence(k: u32, t: f64) -> Result<SuiteReport> {
    let mut report = SuiteReport::new(&format!("divergence_k{k}"));
    let floors: Vec<f64> = (1..=6).map(|e| 10f64.powi(-e)).collect();
    let p4 = ModelParams::new(k, 4)?;
    let i4 = divergence_check(&p4, t, &floors)?;
    let increasing = i4.windows(2).all(|w| w[1] > w[0]);
    let growth = i4[5] / i4[0];
    report.verdicts.push(Verdict::check(
        format!("d=4 truncated L2 grows, {}", label(&p4)),
        growth,
        3.0,
        increasing && growth > 3.0,
        format!(
            "I(eps) = {:?}; strictly increasing: {increasing}; I(1e-6)/I(1e-1) = {growth:.4}",
            i4
        ),
    ));
    let p3 = ModelParams::new(k, 3)?;
    let i3 = divergence_check(&p3, t, &floors)?;
    let change = (i3[5] - i3[3]) / i3[3];
    report.verdicts.push(Verdict::check(
        format!("d=3 truncated L2 converges, {}", label(&p3)),
        change,
        0.01,
        change < 0.01,
        format!("I(eps) = {:?}; (I(1e-6) - I(1e-4)) / I(1e-4) = {change:.4e}", i3),
    ));
    let eps_inv: Vec<f64> = floors.iter().rev().map(|e| 1.0 / e).collect();
    let rev4: Vec<f64> = i4.iter().rev().copied().collect();
    let rev3: Vec<f64> = i3.iter().rev().copied().collect();
    report.series.push(Series::new(format!("divergence_k{k}_d4"), "inv_eps", "truncated_l2", &eps_inv, &rev4));
    report.series.push(Series::new(format!("divergence_k{k}_d3"), "inv_eps", "truncated_l2", &eps_inv, &rev3));
    Ok(report)
}

/// Temporal difference exponent over t − r ∈ 2^-8..2^-2 at t = 1, with the
/// direct spatial quadrature cross-check in d = 1 when `cross_check` is set.
pub fn verify_temporal(params: &ModelParams, cross_check: bool) -> Result<SuiteReport> {
    let mut report = SuiteReport::new(&format!("temporal_{}", slug(params)));
    let nu = params.nu() as f64;
    let expected = (2.0 * nu - params.d as f64) / (2.0 * nu);
    let lags = fit::dyadic(-8, -2);
    let values = temporal_difference_scan(params, 1.0, &lags)?;
    let f = ScalingFit::fit(&lags, &values)?;
    report.verdicts.push(Verdict::exponent(
        format!("temporal difference slope {}", label(params)),
        &f,
        expected,
        0.03,
    ));
    report.series.push(Series::new(
        format!("temporal_{}", slug(params)),
        "lag",
        "integral",
        &lags,
        &values,
    ));
    if cross_check && params.d == 1 {
        let h = 0.125;
        let identity = values[lags.iter().position(|&l| l == h).unwrap()];
        let direct = temporal_difference_direct(params, 1.0 - h, 1.0)?;
        let rel = (identity / direct - 1.0).abs();
        report.verdicts.push(Verdict::check(
            format!("temporal identity vs direct quadrature {}", label(params)),
            rel,
            0.01,
            rel <= 0.01,
            format!("identity {identity:.10e}, direct {direct:.10e}, relative gap {rel:.3e}"),
        ));
    }
    Ok(report)
}

/// Interior spatial Hölder index α_d used by the spatial checks.
pub fn alpha_d(d: usize) -> f64 {
    match d {
        1 => 1.0,
        2 => 0.9,
        _ => 0.45,
    }
}

/// Displacement at which the t-scaling of the spatial difference is fitted.
const SPATIAL_T_PROBE: f64 = 0.0625;

/// Spatial difference slopes over |z| ∈ 2^-7..2^-2 at t = 1 for each k,
/// the t-exponent over t ∈ 2^-2..2 at a fixed |z|, and agreement of the
/// |z| slopes across k.
pub fn verify_spatial(ks: &[u32], d: usize) -> Result<SuiteReport> {
    let mut report = SuiteReport::new(&format!("spatial_d{d}"));
    let target = 2.0 * alpha_d(d);
    let lags = fit::dyadic(-7, -2);
    let mut slopes = Vec::new();
    for &k in ks {
        let params = ModelParams::new(k, d)?;
        let values = lags
            .iter()
            .map(|&z| {
                let mut v = vec![0.0; d];
                v[0] = z;
                spatial_difference_integral(&params, &Space::Continuum, 1.0, &v)
            })
            .collect::<Result<Vec<_>>>()?;
        let f = ScalingFit::fit(&lags, &values)?;
        report.verdicts.push(Verdict::exponent_at_least(
            format!("spatial difference slope {}", label(&params)),
            &f,
            target,
            0.05,
        ));
        report.series.push(Series::new(
            format!("spatial_{}", slug(&params)),
            "z",
            "integral",
            &lags,
            &values,
        ));
        slopes.push((k, f.slope));
        let mut z = vec![0.0; d];
        z[0] = SPATIAL_T_PROBE;
        let ts = fit::dyadic(-2, 1);
        let tv = ts
            .iter()
            .map(|&t| spatial_difference_integral(&params, &Space::Continuum, t, &z))
            .collect::<Result<Vec<_>>>()?;
        let tf = ScalingFit::fit(&ts, &tv)?;
        report.verdicts.push(Verdict::check(
            format!("spatial difference t-exponent {} z={SPATIAL_T_PROBE}", label(&params)),
            tf.slope,
            0.0,
            (0.0..1.0).contains(&tf.slope),
            format!("t-exponent {:.4} ± {:.4}, required in [0, 1)", tf.slope, tf.half_width),
        ));
    }
    for w in slopes.windows(2) {
        let gap = (w[0].1 - w[1].1).abs();
        report.verdicts.push(Verdict::check(
            format!("spatial slope beta-invariance d={d} k={} vs k={}", w[0].0, w[1].0),
            gap,
            0.05,
            gap <= 0.05,
            format!("slopes {:.4} and {:.4}", w[0].1, w[1].1),
        ));
    }
    Ok(report)
}

/// DDE residual at (t, x) on a lattice of step δ, and the O(h²) decay of
/// the second-order residual under halving h.
pub fn verify_dde(params: &ModelParams, delta: f64, t: f64, x: &[f64]) -> Result<SuiteReport> {
    let mut report = SuiteReport::new(&format!("dde_{}", slug(params)));
    let lat = Lattice::new(delta, params.d, 0.0)?;
    let tol = if params.is_brownian() { 1e-6 } else { 1e-3 };
    let r = dde::dde_residual(params, &lat, t, x, None)?;
    report.verdicts.push(Verdict::check(
        format!("DDE residual {} x={x:?}", label(params)),
        r.relative,
        tol,
        r.relative <= tol,
        format!(
            "dK/dt {:.6e}, memory {:.6e}, leading {:.6e}, residual {:.3e}",
            r.derivative, r.memory, r.leading, r.residual
        ),
    ));
    let hs = [t / 50.0, t / 100.0, t / 200.0];
    let res = hs
        .iter()
        .map(|&h| dde::dde_residual(params, &lat, t, x, Some(h)).map(|r| r.residual_second_order))
        .collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> = res.windows(2).map(|w| w[0] / w[1]).collect();
    let ok = ratios.iter().all(|q| (q - 4.0).abs() <= 0.4);
    report.verdicts.push(Verdict::check(
        format!("DDE residual order {} x={x:?}", label(params)),
        ratios[ratios.len() - 1],
        0.4,
        ok,
        format!("second-order residuals {res:?}, halving ratios {ratios:?} (expected 4)"),
    ));
    report.series.push(Series::new(
        format!("dde_order_{}", slug(params)),
        "h",
        "residual",
        &hs.iter().rev().copied().collect::<Vec<_>>(),
        &res.iter().rev().map(|v| v.abs()).collect::<Vec<_>>(),
    ));
    Ok(report)
}

/// Lattice-to-continuum ratios at (t, x) for the given steps, each within its
/// tolerance of 1.
pub fn verify_limit(
    params: &ModelParams,
    t: f64,
    x: &[f64],
    deltas: &[f64],
    tolerances: &[f64],
) -> Result<SuiteReport> {
    let mut report = SuiteReport::new(&format!("limit_{}", slug(params)));
    let rows = limit::continuum_limit_report(params, t, x, deltas)?;
    for (row, &tol) in rows.iter().zip(tolerances) {
        let gap = (row.ratio - 1.0).abs();
        report.verdicts.push(Verdict::check(
            format!("lattice/continuum ratio {} delta={}", label(params), row.delta),
            row.ratio,
            tol,
            gap <= tol,
            format!("ratio {:.6}, |ratio - 1| = {gap:.3e}", row.ratio),
        ));
    }
    let ds: Vec<f64> = rows.iter().rev().map(|r| r.delta).collect();
    let rs: Vec<f64> = rows.iter().rev().map(|r| r.ratio).collect();
    report.series.push(Series::new(format!("limit_{}", slug(params)), "delta", "ratio", &ds, &rs));
    Ok(report)
}
