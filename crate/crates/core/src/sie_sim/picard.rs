//! Picard iteration U⁽ⁿ⁺¹⁾ = U⁽⁰⁾ + Σ_{i<j} K a(U⁽ⁿ⁾(t_i)) ΔW_i / δ^{d/2}
//! on fixed noise, with U⁽⁰⁾ the deterministic part.
//!
//! The lag-0 term is excluded, so iterate n is exact on steps j ≤ n and the
//! sequence reaches the left-point scheme after at most M iterations.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

use super::config::SIEConfig;
use super::noise::NoiseField;
use super::solver::{Integrand, SieIntegrand, Simulator};

#[derive(Debug, Clone, Serialize)]
pub struct PicardReport {
    pub config: SIEConfig,
    pub iterations: usize,
    /// D*_{n,2}(T) = sup_x mean |U⁽ⁿ⁺¹⁾(T, x) − U⁽ⁿ⁾(T, x)|², n = 0..iterations−1
    pub d_star: Vec<f64>,
    /// D*_{n+1} / D*_n
    pub ratios: Vec<f64>,
    /// D* increased for 3 consecutive n.
    pub diverged: bool,
    /// D*_{n+1}/D*_n < `contraction_limit` for every n ≥ 3.
    pub contracts: bool,
    pub contraction_limit: f64,
    /// sup_x mean |U⁽ᴺ⁾(T, x) − U_scheme(T, x)|² against the left-point
    /// scheme on the same noise, with its standard error.
    pub scheme_gap: f64,
    pub scheme_gap_std_error: f64,
}

struct PicardIntegrand<'a> {
    sim: &'a Simulator,
    noises: &'a [NoiseField],
    previous: &'a [Vec<f64>],
}

impl Integrand for PicardIntegrand<'_> {
    fn fill(&self, lane: usize, step: usize, _random: &[f64], out: &mut [f64]) {
        let l = out.len();
        let det = &self.sim.deterministic()[step * l..(step + 1) * l];
        let prev = &self.previous[lane][step * l..(step + 1) * l];
        let dw = self.noises[lane].step(step);
        let a = self.sim.config().a;
        let scale = self.sim.config().noise_scale();
        for y in 0..l {
            out[y] = a.eval(det[y] + prev[y]) * dw[y] * scale;
        }
    }
}

/// Per-replica results: squared increments at T per iteration and site,
/// and the squared gap to the scheme at T per site.
struct ReplicaTrace {
    increments: Vec<Vec<f64>>,
    gap: Vec<f64>,
}

fn trace_group(sim: &Simulator, replicas: &[u64], iterations: usize) -> Result<Vec<ReplicaTrace>> {
    let l = sim.config().site_count();
    let m = sim.config().steps;
    let lanes = replicas.len();
    let noises: Vec<NoiseField> = replicas.iter().map(|&r| sim.noise(r)).collect();
    let non_finite = |(lane, step): (usize, usize)| Error::NonFinite {
        replica: replicas[lane] as usize,
        step,
    };
    let mut current = vec![vec![0.0; (m + 1) * l]; lanes];
    let mut traces: Vec<ReplicaTrace> = (0..lanes)
        .map(|_| ReplicaTrace {
            increments: Vec::with_capacity(iterations),
            gap: Vec::new(),
        })
        .collect();
    for _ in 0..iterations {
        let next = sim
            .volterra(
                lanes,
                &PicardIntegrand {
                    sim,
                    noises: &noises,
                    previous: &current,
                },
            )
            .map_err(non_finite)?;
        for lane in 0..lanes {
            let at_t = m * l..(m + 1) * l;
            let inc = next[lane][at_t.clone()]
                .iter()
                .zip(&current[lane][at_t])
                .map(|(a, b)| (a - b) * (a - b))
                .collect();
            traces[lane].increments.push(inc);
        }
        current = next;
    }
    let scheme = sim
        .volterra(lanes, &SieIntegrand { sim, noises: &noises })
        .map_err(non_finite)?;
    for lane in 0..lanes {
        let at_t = m * l..(m + 1) * l;
        traces[lane].gap = current[lane][at_t.clone()]
            .iter()
            .zip(&scheme[lane][at_t])
            .map(|(a, b)| (a - b) * (a - b))
            .collect();
    }
    Ok(traces)
}

/// Runs `iterations` Picard steps for every replica of `config`.
pub fn picard_solve(config: &SIEConfig, iterations: usize) -> Result<PicardReport> {
    if config.params.d != 1 {
        return Err(Error::Domain("Picard diagnostics are run in d = 1".into()));
    }
    if iterations < 2 {
        return Err(Error::Domain("need at least two Picard iterations".into()));
    }
    let sim = Simulator::new(*config)?;
    let r = config.replicas as u64;
    let starts: Vec<u64> = (0..r).step_by(2).collect();
    let groups: Vec<Vec<ReplicaTrace>> = starts
        .par_iter()
        .map(|&r0| {
            let replicas: Vec<u64> = (r0..(r0 + 2).min(r)).collect();
            trace_group(&sim, &replicas, iterations)
        })
        .collect::<Result<_>>()?;
    let traces: Vec<ReplicaTrace> = groups.into_iter().flatten().collect();
    let n = traces.len() as f64;
    let l = config.site_count();
    let d_star: Vec<f64> = (0..iterations)
        .map(|it| {
            (0..l)
                .map(|y| traces.iter().map(|t| t.increments[it][y]).sum::<f64>() / n)
                .fold(0.0, f64::max)
        })
        .collect();
    let ratios: Vec<f64> = d_star.windows(2).map(|w| w[1] / w[0]).collect();
    let diverged = d_star
        .windows(4)
        .any(|w| w[1] > w[0] && w[2] > w[1] && w[3] > w[2]);
    let contraction_limit = 0.9;
    let tail: Vec<f64> = ratios.iter().skip(3).copied().filter(|r| r.is_finite()).collect();
    let contracts = !tail.is_empty() && tail.iter().all(|&r| r < contraction_limit);
    let (mut scheme_gap, mut scheme_gap_std_error) = (0.0, 0.0);
    for y in 0..l {
        let mean = traces.iter().map(|t| t.gap[y]).sum::<f64>() / n;
        if mean >= scheme_gap {
            let var = traces.iter().map(|t| (t.gap[y] - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            scheme_gap = mean;
            scheme_gap_std_error = (var / n).sqrt();
        }
    }
    Ok(PicardReport {
        config: *config,
        iterations,
        d_star,
        ratios,
        diverged,
        contracts,
        contraction_limit,
        scheme_gap,
        scheme_gap_std_error,
    })
}
