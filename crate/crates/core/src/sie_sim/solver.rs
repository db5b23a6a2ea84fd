use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::table::{content_hash, Displacements, Flavor, KernelTable, DEFAULT_BUDGET};

use super::config::SIEConfig;
use super::conv::BoxConvolver;
use super::deterministic::deterministic_grid;
use super::noise::{gen_noise, NoiseField};

const FIELD_MAGIC: &[u8; 8] = b"ISLTFLD1";

/// One replica of the truncated SIE on the time × site grid.
///
/// The random part is stored separately from the (shared, seed-independent)
/// deterministic part; U = deterministic + random.
#[derive(Debug, Clone)]
pub struct FieldSample {
    pub config: SIEConfig,
    pub replica: u64,
    pub deterministic: Arc<Vec<f64>>,
    pub random: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct FieldHeader {
    config: SIEConfig,
    replica: u64,
}

impl FieldSample {
    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    pub fn sites(&self) -> usize {
        self.config.site_count()
    }

    #[inline]
    pub fn value(&self, step: usize, site: usize) -> f64 {
        let i = step * self.sites() + site;
        self.deterministic[i] + self.random[i]
    }

    #[inline]
    pub fn random_part(&self, step: usize, site: usize) -> f64 {
        self.random[step * self.sites() + site]
    }

    /// U on the grid, step-major.
    pub fn values(&self) -> Vec<f64> {
        self.deterministic
            .iter()
            .zip(&self.random)
            .map(|(d, r)| d + r)
            .collect()
    }

    /// Columns `t,x1..xd,u,deterministic`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let d = self.config.params.d;
        let header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
        writeln!(out, "t,{},u,deterministic", header.join(","))?;
        let sites = self.config.lat.sites();
        for (j, t) in self.config.times().into_iter().enumerate() {
            for (y, s) in sites.iter().enumerate() {
                let x = self.config.lat.to_point(s);
                let xs: Vec<String> = x.iter().map(|v| format!("{v}")).collect();
                let i = j * sites.len() + y;
                writeln!(
                    out,
                    "{t:.17e},{},{:.17e},{:.17e}",
                    xs.join(","),
                    self.value(j, y),
                    self.deterministic[i]
                )?;
            }
        }
        Ok(())
    }

    /// Magic, header length (u64 LE), JSON header, then U as f64 LE.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        let header = serde_json::to_vec(&FieldHeader {
            config: self.config,
            replica: self.replica,
        })?;
        out.write_all(FIELD_MAGIC)?;
        out.write_all(&(header.len() as u64).to_le_bytes())?;
        out.write_all(&header)?;
        for v in self.values() {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads U back; returns the config, replica and values.
    pub fn read_binary<R: Read>(mut input: R) -> Result<(SIEConfig, u64, Vec<f64>)> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != FIELD_MAGIC {
            return Err(Error::Cache("not a field sample file".into()));
        }
        let mut len = [0u8; 8];
        input.read_exact(&mut len)?;
        let mut header = vec![0u8; u64::from_le_bytes(len) as usize];
        input.read_exact(&mut header)?;
        let header: FieldHeader = serde_json::from_slice(&header)?;
        let n = (header.config.steps + 1) * header.config.site_count();
        let mut values = Vec::with_capacity(n);
        let mut buf = [0u8; 8];
        for _ in 0..n {
            input.read_exact(&mut buf)?;
            values.push(f64::from_le_bytes(buf));
        }
        Ok((header.config, header.replica, values))
    }
}

/// Lags Δt, 2Δt, ..., MΔt.
pub fn lag_times(config: &SIEConfig) -> Vec<f64> {
    (1..=config.steps).map(|m| m as f64 * config.dt()).collect()
}

/// Kernel table over all lags covering every displacement in the box.
pub fn lag_table(config: &SIEConfig) -> Result<KernelTable> {
    KernelTable::build_lattice(
        &config.params,
        &config.lat,
        &lag_times(config),
        2 * config.lat.steps_per_side(),
        DEFAULT_BUDGET,
    )
}

/// As [`lag_table`], through the on-disk cache in `dir`; also reports
/// whether it was a cache hit.
pub fn cached_lag_table(config: &SIEConfig, dir: &Path) -> Result<(KernelTable, bool)> {
    KernelTable::load_or_build_lattice(
        dir,
        &config.params,
        &config.lat,
        &lag_times(config),
        2 * config.lat.steps_per_side(),
        DEFAULT_BUDGET,
    )
}

/// Input of the discrete stochastic convolution at step i for one lane:
/// given the random part at t_i, write G_i(y) = a(U^y(t_i)) ΔW^y_i / δ^{d/2}.
pub(crate) trait Integrand: Sync {
    fn fill(&self, lane: usize, step: usize, random: &[f64], out: &mut [f64]);
}

/// Shared state for a configuration: lag table, Fourier kernels and the
/// deterministic part.
pub struct Simulator {
    config: SIEConfig,
    table: KernelTable,
    conv: BoxConvolver,
    deterministic: Arc<Vec<f64>>,
}

impl Simulator {
    pub fn new(config: SIEConfig) -> Result<Self> {
        config.validate()?;
        let table = lag_table(&config)?;
        Self::with_table(config, table)
    }

    /// Uses a prebuilt lag table (e.g. from the cache).
    pub fn with_table(config: SIEConfig, table: KernelTable) -> Result<Self> {
        config.validate()?;
        let expected = lag_table_hash(&config);
        if table.hash() != expected {
            return Err(Error::Cache(format!(
                "lag table {} does not match the configuration ({expected})",
                table.hash()
            )));
        }
        let conv = BoxConvolver::new(&table, config.params.d, config.lat.sites_per_axis())?;
        let deterministic = Arc::new(deterministic_grid(&config)?);
        Ok(Self {
            config,
            table,
            conv,
            deterministic,
        })
    }

    pub fn config(&self) -> &SIEConfig {
        &self.config
    }

    pub fn table(&self) -> &KernelTable {
        &self.table
    }

    pub fn deterministic(&self) -> &Arc<Vec<f64>> {
        &self.deterministic
    }

    pub fn noise(&self, replica: u64) -> NoiseField {
        gen_noise(
            self.config.seed,
            replica,
            &self.config.lat,
            self.config.steps,
            self.config.dt(),
        )
    }

    /// Random parts for one or two lanes, step-major. Errors carry the lane
    /// and step of the first non-finite value.
    pub(crate) fn volterra<I: Integrand>(
        &self,
        lanes: usize,
        integrand: &I,
    ) -> std::result::Result<Vec<Vec<f64>>, (usize, usize)> {
        let l = self.config.site_count();
        let m = self.config.steps;
        let mut out = vec![vec![0.0; (m + 1) * l]; lanes];
        let mut hist: Vec<Vec<_>> = Vec::with_capacity(m);
        let mut acc = self.conv.zero_spectrum();
        let mut g = vec![vec![0.0; l]; 2];
        for j in 0..=m {
            if j > 0 {
                self.conv.accumulate(&hist, j, &mut acc);
                let (first, rest) = out.split_at_mut(1);
                let re = &mut first[0][j * l..(j + 1) * l];
                let im = rest.first_mut().map(|v| &mut v[j * l..(j + 1) * l]);
                self.conv.inverse(&mut acc, re, im);
                for (lane, o) in out.iter().enumerate() {
                    if o[j * l..(j + 1) * l].iter().any(|v| !v.is_finite()) {
                        return Err((lane, j));
                    }
                }
            }
            if j < m {
                for (lane, o) in out.iter().enumerate() {
                    integrand.fill(lane, j, &o[j * l..(j + 1) * l], &mut g[lane]);
                }
                let mut spec = self.conv.zero_spectrum();
                let im = (lanes == 2).then(|| g[1].as_slice());
                self.conv.forward(&g[0], im, &mut spec);
                hist.push(spec);
            }
        }
        Ok(out)
    }

    /// Solves replicas `range` with the left-point scheme, two per complex
    /// transform, in parallel over pairs.
    pub fn run(&self, range: Range<u64>) -> Result<Vec<FieldSample>> {
        let starts: Vec<u64> = range.clone().step_by(2).collect();
        let chunks: Vec<Vec<FieldSample>> = starts
            .par_iter()
            .map(|&r0| {
                let replicas: Vec<u64> = (r0..(r0 + 2).min(range.end)).collect();
                self.run_group(&replicas)
            })
            .collect::<Result<_>>()?;
        Ok(chunks.into_iter().flatten().collect())
    }

    fn run_group(&self, replicas: &[u64]) -> Result<Vec<FieldSample>> {
        let noises: Vec<NoiseField> = replicas.iter().map(|&r| self.noise(r)).collect();
        let integrand = SieIntegrand {
            sim: self,
            noises: &noises,
        };
        let randoms = self
            .volterra(replicas.len(), &integrand)
            .map_err(|(lane, step)| Error::NonFinite {
                replica: replicas[lane] as usize,
                step,
            })?;
        Ok(replicas
            .iter()
            .zip(randoms)
            .map(|(&replica, random)| FieldSample {
                config: self.config,
                replica,
                deterministic: Arc::clone(&self.deterministic),
                random,
            })
            .collect())
    }

    /// Exact variance of the discretized stochastic convolution for
    /// constant a ≡ c: c² Δt δ^{−d} Σ_{i<j} Σ_{y ∈ box} K²_{(j−i)Δt; x−y}.
    pub fn gaussian_variance(&self, c: f64, step: usize, site: usize) -> f64 {
        let sites = self.config.lat.sites();
        let x = &sites[site];
        let mut total = 0.0;
        for lag in 1..=step {
            for y in &sites {
                let disp: Vec<i64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
                let k = self.table.get_steps(lag - 1, &disp).unwrap_or(0.0);
                total += k * k;
            }
        }
        let d = self.config.params.d as i32;
        c * c * self.config.dt() * total / self.config.lat.delta.powi(d)
    }

    /// Exact 𝔼|U_R(t_{j2}, x2) − U_R(t_{j1}, x1)|² for constant a ≡ c,
    /// with points given as (step, site).
    pub fn increment_variance(&self, c: f64, (j1, y1): (usize, usize), (j2, y2): (usize, usize)) -> f64 {
        let sites = self.config.lat.sites();
        let (x1, x2) = (&sites[y1], &sites[y2]);
        let kernel = |j: usize, i: usize, x: &[i64], y: &[i64]| -> f64 {
            if i >= j {
                return 0.0;
            }
            let disp: Vec<i64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
            self.table.get_steps(j - i - 1, &disp).unwrap_or(0.0)
        };
        let mut total = 0.0;
        for i in 0..j1.max(j2) {
            for y in &sites {
                let diff = kernel(j2, i, x2, y) - kernel(j1, i, x1, y);
                total += diff * diff;
            }
        }
        let d = self.config.params.d as i32;
        c * c * self.config.dt() * total / self.config.lat.delta.powi(d)
    }
}

/// Content hash of the lag table a configuration needs.
pub fn lag_table_hash(config: &SIEConfig) -> String {
    content_hash(
        Flavor::Lattice,
        &config.params,
        Some(&config.lat),
        &lag_times(config),
        &Displacements::Orthant {
            radius_steps: 2 * config.lat.steps_per_side(),
        },
    )
}

pub(crate) struct SieIntegrand<'a> {
    pub sim: &'a Simulator,
    pub noises: &'a [NoiseField],
}

impl Integrand for SieIntegrand<'_> {
    fn fill(&self, lane: usize, step: usize, random: &[f64], out: &mut [f64]) {
        let l = random.len();
        let det = &self.sim.deterministic[step * l..(step + 1) * l];
        let dw = self.noises[lane].step(step);
        let a = self.sim.config.a;
        let scale = self.sim.config.noise_scale();
        for y in 0..l {
            out[y] = a.eval(det[y] + random[y]) * dw[y] * scale;
        }
    }
}

/// All `config.replicas` replicas of the truncated SIE.
pub fn solve_truncated_sie(config: &SIEConfig) -> Result<Vec<FieldSample>> {
    Simulator::new(*config)?.run(0..config.replicas as u64)
}
