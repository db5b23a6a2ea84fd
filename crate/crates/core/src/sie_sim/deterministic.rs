//! Σ_y K^{RW,Λ}_{t;x,y} u₀(y) over the untruncated lattice.
//!
//! u₀ is a product of one-dimensional factors and, conditionally on the
//! inner time, so is the walk kernel. Each inner-time node therefore
//! needs one 1-d sum per axis: closed form for constant and cosine data,
//! a window over the bump for Gaussian data.

use crate::error::{Error, Result};
use crate::kernels::{walk::fill_scaled_bessel, Kernels, Lattice};

use super::config::{InitialCondition, SIEConfig};

/// Tail mass allowed outside the summation window.
pub const DETERMINISTIC_TAIL: f64 = 1e-8;
const MAX_RADIUS: usize = 1 << 20;
/// Half-width of the Gaussian bump's support in units of its width
/// (e^{−50} cutoff).
const GAUSSIAN_WINDOW: f64 = 10.0;

pub(crate) struct DeterministicEvaluator {
    kernels: Kernels,
    lat: Lattice,
    u0: InitialCondition,
    radius: usize,
}

impl DeterministicEvaluator {
    pub fn new(config: &SIEConfig, t_max: f64) -> Result<Self> {
        let kernels = Kernels::new(config.params)?;
        let radius = if t_max > 0.0 {
            kernels.radius_for_tail(&config.lat, t_max, DETERMINISTIC_TAIL)
        } else {
            0
        };
        if radius > MAX_RADIUS {
            return Err(Error::TailMass {
                tail: kernels.lattice_tail_mass(&config.lat, t_max, MAX_RADIUS),
                limit: DETERMINISTIC_TAIL,
            });
        }
        Ok(Self {
            kernels,
            lat: config.lat,
            u0: config.u0,
            radius,
        })
    }

    /// Values at time t on the product grid Π_c `axes[c]` (coordinates in
    /// lattice steps), row-major with the last axis fastest.
    pub fn on_grid(&self, t: f64, axes: &[Vec<i64>]) -> Vec<f64> {
        let count = axes.iter().map(Vec::len).product();
        let amp = self.u0.amplitude();
        if amp == 0.0 {
            return vec![0.0; count];
        }
        let delta = self.lat.delta;
        if t == 0.0 {
            let f = axes
                .iter()
                .map(|a| a.iter().map(|&n| self.u0.factor(n as f64 * delta)).collect())
                .collect();
            return product_grid(&[(1.0, f)], amp);
        }
        let (nodes, weights) = match self.kernels.inner_rule(&self.lat, t) {
            Some(rule) => (rule.nodes, rule.weights),
            None => (vec![t], vec![1.0]),
        };
        let rate = self.lat.jump_rate();
        match self.u0 {
            // Full-lattice sums in closed form: Σ_k P_s(k) = 1 and
            // Σ_k P_s(k) cos(ω(x + kδ)) = cos(ωx) e^{−s(1 − cos ωδ)/δ²}.
            InitialCondition::Zero | InitialCondition::Constant { .. } => {
                let factors: Vec<_> = nodes
                    .iter()
                    .zip(&weights)
                    .map(|(_, &w)| (w, axes.iter().map(|a| vec![1.0; a.len()]).collect()))
                    .collect();
                product_grid(&factors, amp)
            }
            InitialCondition::Cosine { frequency } => {
                let damp = 1.0 - (frequency * delta).cos();
                let factors: Vec<_> = nodes
                    .iter()
                    .zip(&weights)
                    .map(|(&s, &w)| {
                        let g = (-s * rate * damp).exp();
                        let f = axes
                            .iter()
                            .map(|a| a.iter().map(|&n| g * (frequency * n as f64 * delta).cos()).collect())
                            .collect();
                        (w, f)
                    })
                    .collect();
                product_grid(&factors, amp)
            }
            InitialCondition::Gaussian { center, width } => {
                let ylo = ((center - GAUSSIAN_WINDOW * width) / delta).floor() as i64;
                let yhi = ((center + GAUSSIAN_WINDOW * width) / delta).ceil() as i64;
                let values: Vec<f64> = (ylo..=yhi).map(|y| self.u0.factor(y as f64 * delta)).collect();
                let reach = axes
                    .iter()
                    .flatten()
                    .map(|&x| (x - ylo).abs().max((x - yhi).abs()))
                    .max()
                    .unwrap_or(0) as usize;
                let kmax = reach.min(self.radius);
                let window = |probs: &[f64], x: i64| -> f64 {
                    values
                        .iter()
                        .enumerate()
                        .filter_map(|(i, &f)| {
                            let k = (x - (ylo + i as i64)).unsigned_abs() as usize;
                            (k <= kmax).then(|| probs[k] * f)
                        })
                        .sum()
                };
                let mut probs = vec![0.0; kmax + 1];
                if axes.len() == 1 {
                    // One axis: mix the inner-time nodes before convolving.
                    let mut marginal = vec![0.0; kmax + 1];
                    for (&s, &w) in nodes.iter().zip(&weights) {
                        fill_scaled_bessel(s * rate, &mut probs);
                        for (m, p) in marginal.iter_mut().zip(&probs) {
                            *m += w * p;
                        }
                    }
                    let f = vec![axes[0].iter().map(|&x| window(&marginal, x)).collect()];
                    return product_grid(&[(1.0, f)], amp);
                }
                let mut factors = Vec::with_capacity(nodes.len());
                for (&s, &w) in nodes.iter().zip(&weights) {
                    fill_scaled_bessel(s * rate, &mut probs);
                    let f = axes
                        .iter()
                        .map(|a| a.iter().map(|&x| window(&probs, x)).collect())
                        .collect();
                    factors.push((w, f));
                }
                product_grid(&factors, amp)
            }
        }
    }
}

/// amp · Σ_node w Π_c f_c(x_c) over the product grid.
fn product_grid(factors: &[(f64, Vec<Vec<f64>>)], amp: f64) -> Vec<f64> {
    let Some((_, first)) = factors.first() else {
        return Vec::new();
    };
    let lens: Vec<usize> = first.iter().map(Vec::len).collect();
    let count: usize = lens.iter().product();
    let mut out = vec![0.0; count];
    for (w, f) in factors {
        for (idx, o) in out.iter_mut().enumerate() {
            let mut rest = idx;
            let mut prod = *w;
            for c in (0..lens.len()).rev() {
                prod *= f[c][rest % lens[c]];
                rest /= lens[c];
            }
            *o += prod;
        }
    }
    out.iter_mut().for_each(|v| *v *= amp);
    out
}

/// Deterministic part at a single lattice point x and time t ≥ 0.
pub fn deterministic_part(config: &SIEConfig, t: f64, x: &[f64]) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time must be >= 0, got {t}")));
    }
    let axes: Vec<Vec<i64>> = config.lat.to_steps(x)?.into_iter().map(|n| vec![n]).collect();
    let eval = DeterministicEvaluator::new(config, t)?;
    Ok(eval.on_grid(t, &axes)[0])
}

/// Deterministic part on the truncation box at every grid time, step-major.
pub fn deterministic_grid(config: &SIEConfig) -> Result<Vec<f64>> {
    let eval = DeterministicEvaluator::new(config, config.horizon)?;
    let m = config.lat.steps_per_side() as i64;
    let axes = vec![(-m..=m).collect::<Vec<i64>>(); config.params.d];
    let mut out = Vec::with_capacity((config.steps + 1) * config.site_count());
    for t in config.times() {
        out.extend(eval.on_grid(t, &axes));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ModelParams;
    use crate::sie_sim::config::Diffusion;
    use crate::kernels::Lattice;

    fn config(k: u32, d: usize, u0: InitialCondition) -> SIEConfig {
        let mut c = SIEConfig::desk(ModelParams::new(k, d).unwrap()).unwrap();
        c.u0 = u0;
        c.a = Diffusion::Zero;
        c
    }

    #[test]
    fn constant_is_preserved() {
        for (k, d) in [(0, 1), (1, 1), (2, 2)] {
            let c = config(k, d, InitialCondition::Constant { c: 2.5 });
            let x = vec![0.1 * 3.0; d];
            let v = deterministic_part(&c, 0.7, &x).unwrap();
            assert!((v - 2.5).abs() < 2.5e-8, "k={k} d={d}: {v}");
        }
    }

    #[test]
    fn time_zero_is_initial_condition() {
        let c = config(1, 1, InitialCondition::Gaussian { center: 0.1, width: 0.3 });
        let x = [0.35];
        assert!((deterministic_part(&c, 0.0, &x).unwrap() - c.u0.eval(&x)).abs() < 1e-15);
    }

    #[test]
    fn grid_matches_pointwise() {
        let mut c = config(1, 2, InitialCondition::Cosine { frequency: 2.0 });
        c.steps = 4;
        let grid = deterministic_grid(&c).unwrap();
        let sites = c.lat.sites();
        let l = sites.len();
        for (j, t) in c.times().into_iter().enumerate() {
            for y in [0, 17, l / 2, l - 1] {
                let p = deterministic_part(&c, t, &c.lat.to_point(&sites[y])).unwrap();
                assert!((grid[j * l + y] - p).abs() < 2e-8, "{} vs {p}", grid[j * l + y]);
            }
        }
    }

    #[test]
    fn discrete_heat_eigenfunction() {
        let c = config(0, 1, InitialCondition::Cosine { frequency: 1.0 });
        let delta = c.lat.delta;
        let lambda = (1.0 - delta.cos()) / (delta * delta);
        for (t, x) in [(0.3, 0.4), (1.0, -1.25), (2.5, 0.0)] {
            let v = deterministic_part(&c, t, &[x]).unwrap();
            let exact = (-lambda * t).exp() * x.cos();
            assert!((v - exact).abs() < 1e-14, "{v} vs {exact}");
        }
    }

    #[test]
    fn gaussian_matches_direct_kernel_sum() {
        use crate::kernels::Kernels;
        for (k, d) in [(1, 1), (2, 1), (1, 2)] {
            let mut c = config(k, d, InitialCondition::Gaussian { center: 0.2, width: 0.3 });
            c.lat = Lattice::new(0.2, d, 1.0).unwrap();
            let kernels = Kernels::new(c.params).unwrap();
            let t = 0.6;
            let x: Vec<i64> = (0..d as i64).map(|i| 1 - i).collect();
            let reach = 40i64;
            let mut direct = 0.0;
            let count = (2 * reach + 1).pow(d as u32);
            for idx in 0..count {
                let mut rest = idx;
                let mut y = vec![0i64; d];
                for c_ in 0..d {
                    y[c_] = rest % (2 * reach + 1) - reach;
                    rest /= 2 * reach + 1;
                }
                let disp: Vec<i64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
                let kv = kernels.lattice_steps(&c.lat, t, &disp).unwrap();
                direct += kv * c.u0.eval(&c.lat.to_point(&y));
            }
            let v = deterministic_part(&c, t, &c.lat.to_point(&x)).unwrap();
            assert!((v - direct).abs() < 1e-10, "k={k} d={d}: {v} vs {direct}");
        }
    }
}
