//! Streaming moment statistics over replicas. Replicas are added in a fixed
//! order, so results do not depend on how the solves were scheduled.

use serde::Serialize;

use super::solver::{FieldSample, Simulator};

/// Per (step, site) sums of U^{2q}, q = 1, 2, 3.
#[derive(Debug, Clone)]
pub struct MomentTracker {
    steps: usize,
    sites: usize,
    count: usize,
    sums: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentSummary {
    pub q: u32,
    pub times: Vec<f64>,
    /// M̃_q(t) = sup_x mean |U^x(t)|^{2q}
    pub sup_moment: Vec<f64>,
    /// Smallest C with M̃_q(t) ≤ C e^{Ct} on the grid.
    pub envelope: f64,
    pub bounded: bool,
}

/// Envelope constants above this are reported as unbounded growth.
pub const ENVELOPE_LIMIT: f64 = 100.0;

impl MomentTracker {
    pub fn new(steps: usize, sites: usize) -> Self {
        Self {
            steps,
            sites,
            count: 0,
            sums: vec![[0.0; 3]; (steps + 1) * sites],
        }
    }

    pub fn add(&mut self, sample: &FieldSample) {
        for (i, s) in self.sums.iter_mut().enumerate() {
            let u2 = {
                let u = sample.deterministic[i] + sample.random[i];
                u * u
            };
            s[0] += u2;
            s[1] += u2 * u2;
            s[2] += u2 * u2 * u2;
        }
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// sup_x mean |U^x(t_j)|^{2q} for every step.
    pub fn sup_moment(&self, q: u32) -> Vec<f64> {
        let n = self.count.max(1) as f64;
        (0..=self.steps)
            .map(|j| {
                self.sums[j * self.sites..(j + 1) * self.sites]
                    .iter()
                    .map(|s| s[q as usize - 1] / n)
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    pub fn summary(&self, q: u32, times: &[f64]) -> MomentSummary {
        let sup_moment = self.sup_moment(q);
        let envelope = envelope_constant(times, &sup_moment);
        MomentSummary {
            q,
            times: times.to_vec(),
            bounded: sup_moment.iter().all(|v| v.is_finite()) && envelope <= ENVELOPE_LIMIT,
            sup_moment,
            envelope,
        }
    }
}

/// Smallest C ≥ 0 with m_j ≤ C e^{C t_j} for all j.
pub fn envelope_constant(times: &[f64], moments: &[f64]) -> f64 {
    let mut c_max: f64 = 0.0;
    for (&t, &m) in times.iter().zip(moments) {
        if !m.is_finite() {
            return f64::INFINITY;
        }
        if m <= c_max * (c_max * t).exp() {
            continue;
        }
        let (mut lo, mut hi) = (c_max, m.max(1.0));
        while hi * (hi * t).exp() < m {
            hi *= 2.0;
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if mid * (mid * t).exp() < m {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        c_max = hi;
    }
    c_max
}

/// Raw power sums of one scalar over replicas.
#[derive(Debug, Clone, Default)]
pub struct PointStats {
    pub n: usize,
    s1: f64,
    s2: f64,
    s3: f64,
    s4: f64,
}

impl PointStats {
    pub fn add(&mut self, v: f64) {
        self.n += 1;
        self.s1 += v;
        self.s2 += v * v;
        self.s3 += v * v * v;
        self.s4 += v * v * v * v;
    }

    pub fn mean(&self) -> f64 {
        self.s1 / self.n as f64
    }

    fn central(&self) -> (f64, f64, f64) {
        let n = self.n as f64;
        let m = self.mean();
        let (e2, e3, e4) = (self.s2 / n, self.s3 / n, self.s4 / n);
        let c2 = e2 - m * m;
        let c3 = e3 - 3.0 * m * e2 + 2.0 * m.powi(3);
        let c4 = e4 - 4.0 * m * e3 + 6.0 * m * m * e2 - 3.0 * m.powi(4);
        (c2, c3, c4)
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        let n = self.n as f64;
        self.central().0 * n / (n - 1.0)
    }

    /// Standard error of the sample variance, √((μ₄ − μ₂²)/n).
    pub fn variance_std_error(&self) -> f64 {
        let (c2, _, c4) = self.central();
        ((c4 - c2 * c2) / self.n as f64).sqrt()
    }

    pub fn skewness(&self) -> f64 {
        let (c2, c3, _) = self.central();
        c3 / c2.powf(1.5)
    }

    pub fn excess_kurtosis(&self) -> f64 {
        let (c2, _, c4) = self.central();
        c4 / (c2 * c2) - 3.0
    }
}

/// Empirical variance against the exact Gaussian variance at one point.
#[derive(Debug, Clone, Serialize)]
pub struct VarianceCheck {
    pub step: usize,
    pub t: f64,
    pub x: Vec<f64>,
    pub empirical: f64,
    pub oracle: f64,
    pub std_error: f64,
    pub z_score: f64,
    pub skewness: f64,
    pub skewness_std_error: f64,
    pub excess_kurtosis: f64,
    pub kurtosis_std_error: f64,
    pub pass: bool,
}

/// Accumulates the random part at the given (step, site) points.
#[derive(Debug, Clone)]
pub struct VarianceProbe {
    points: Vec<(usize, usize)>,
    stats: Vec<PointStats>,
}

impl VarianceProbe {
    pub fn new(points: Vec<(usize, usize)>) -> Self {
        let stats = vec![PointStats::default(); points.len()];
        Self { points, stats }
    }

    pub fn add(&mut self, sample: &FieldSample) {
        for (&(j, y), s) in self.points.iter().zip(&mut self.stats) {
            s.add(sample.random_part(j, y));
        }
    }

    /// Each point passes when the variance is within `sigmas` standard
    /// errors of the oracle and skewness and excess kurtosis are within
    /// `sigmas` of their Gaussian standard errors √(6/n), √(24/n).
    pub fn finish(&self, sim: &Simulator, c: f64, sigmas: f64) -> Vec<VarianceCheck> {
        let times = sim.config().times();
        let sites = sim.config().lat.sites();
        self.points
            .iter()
            .zip(&self.stats)
            .map(|(&(j, y), s)| {
                let oracle = sim.gaussian_variance(c, j, y);
                let empirical = s.variance();
                let se = s.variance_std_error();
                let z = (empirical - oracle) / se;
                let n = s.n as f64;
                let (skew_se, kurt_se) = ((6.0 / n).sqrt(), (24.0 / n).sqrt());
                let (skew, kurt) = (s.skewness(), s.excess_kurtosis());
                VarianceCheck {
                    step: j,
                    t: times[j],
                    x: sim.config().lat.to_point(&sites[y]),
                    empirical,
                    oracle,
                    std_error: se,
                    z_score: z,
                    skewness: skew,
                    skewness_std_error: skew_se,
                    excess_kurtosis: kurt,
                    kurtosis_std_error: kurt_se,
                    pass: z.abs() <= sigmas
                        && skew.abs() <= sigmas * skew_se
                        && kurt.abs() <= sigmas * kurt_se,
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_covers_moments() {
        let times: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        let m: Vec<f64> = times.iter().map(|t| 2.0 * (1.5 * t).exp()).collect();
        let c = envelope_constant(&times, &m);
        assert!(c >= 2.0 && c < 2.2, "{c}");
        for (t, v) in times.iter().zip(&m) {
            assert!(*v <= c * (c * t).exp() * (1.0 + 1e-12));
        }
        assert!(envelope_constant(&[0.0, 1.0], &[1.0, f64::NAN]).is_infinite());
    }

    #[test]
    fn point_stats_moments() {
        let mut s = PointStats::default();
        for v in [1.0, 2.0, 3.0, 4.0] {
            s.add(v);
        }
        assert_eq!(s.mean(), 2.5);
        assert!((s.variance() - 5.0 / 3.0).abs() < 1e-12);
        assert!(s.skewness().abs() < 1e-12);
    }
}
