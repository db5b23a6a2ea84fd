//! Precomputed kernel tables with a content-hashed binary cache.
//!
//! Binary layout (little endian):
//! `b"ISLTKTAB"`, u32 format version, u64 header length, JSON header,
//! then `times × entries` f64 values.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{sorted_abs, walk::fill_scaled_bessel, Kernels, Lattice};
use crate::error::{Error, Result};
use crate::params::ModelParams;

const MAGIC: &[u8; 8] = b"ISLTKTAB";
pub const FORMAT_VERSION: u32 = 1;
/// Environment variable naming the kernel cache directory.
pub const CACHE_ENV: &str = "ISLT_CACHE_DIR";
/// Default cap on stored values (8 bytes each).
pub const DEFAULT_BUDGET: usize = 1 << 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Flavor {
    Continuum,
    Lattice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Displacements {
    /// All |x_i| ≤ radius steps; the other orthants follow by symmetry.
    Orthant { radius_steps: usize },
    /// Explicit continuum points.
    Points(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableHeader {
    pub flavor: Flavor,
    pub params: ModelParams,
    pub lattice: Option<Lattice>,
    pub times: Vec<f64>,
    pub displacements: Displacements,
    pub method: String,
    pub hash: String,
}

#[derive(Debug, Clone)]
pub struct KernelTable {
    header: TableHeader,
    per_time: usize,
    values: Vec<f64>,
}

fn method_tag(flavor: Flavor) -> &'static str {
    match flavor {
        Flavor::Lattice => "lattice/kronrod21-geometric-1.6/bessel-miller",
        Flavor::Continuum => "continuum/adaptive-gk21/rel1e-11",
    }
}

/// Content hash of everything that determines the table values.
pub fn content_hash(
    flavor: Flavor,
    params: &ModelParams,
    lattice: Option<&Lattice>,
    times: &[f64],
    displacements: &Displacements,
) -> String {
    #[derive(Serialize)]
    struct Key<'a> {
        version: u32,
        flavor: Flavor,
        params: &'a ModelParams,
        lattice: Option<[u64; 3]>,
        times: Vec<u64>,
        displacements: &'a Displacements,
        method: &'static str,
    }
    let key = Key {
        version: FORMAT_VERSION,
        flavor,
        params,
        lattice: lattice.map(|l| [l.delta.to_bits(), l.d as u64, l.radius.to_bits()]),
        times: times.iter().map(|t| t.to_bits()).collect(),
        displacements,
        method: method_tag(flavor),
    };
    let bytes = serde_json::to_vec(&key).expect("key serializes");
    hex::encode(Sha256::digest(&bytes))
}

fn check_times(times: &[f64], allow_zero: bool) -> Result<()> {
    if times.is_empty() {
        return Err(Error::Domain("empty time grid".into()));
    }
    for w in times.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::Domain("time grid must be strictly increasing".into()));
        }
    }
    let first = times[0];
    if !(first > 0.0 || (allow_zero && first == 0.0)) {
        return Err(Error::Domain(format!("time grid starts at {first}")));
    }
    Ok(())
}

/// Canonical (decreasing) index tuples of the orthant and the flat index of
/// each.
fn canonical_tuples(d: usize, r: usize) -> Vec<(usize, Vec<u64>)> {
    fn rec(d: usize, bound: u64, prefix: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if prefix.len() == d {
            out.push(prefix.clone());
            return;
        }
        for n in 0..=bound {
            prefix.push(n);
            rec(d, n, prefix, out);
            prefix.pop();
        }
    }
    let mut tuples = Vec::new();
    rec(d, r as u64, &mut Vec::with_capacity(d), &mut tuples);
    tuples
        .into_iter()
        .map(|t| (flat_index(&t, r), t))
        .collect()
}

fn flat_index(steps: &[u64], r: usize) -> usize {
    steps
        .iter()
        .fold(0usize, |acc, &n| acc * (r + 1) + n as usize)
}

fn unflatten(mut idx: usize, d: usize, r: usize) -> Vec<u64> {
    let mut v = vec![0u64; d];
    for c in (0..d).rev() {
        v[c] = (idx % (r + 1)) as u64;
        idx /= r + 1;
    }
    v
}

impl KernelTable {
    /// Dense lattice table over `times` and the orthant of radius
    /// `radius_steps` (in lattice steps).
    pub fn build_lattice(
        params: &ModelParams,
        lat: &Lattice,
        times: &[f64],
        radius_steps: usize,
        budget: usize,
    ) -> Result<Self> {
        check_times(times, true)?;
        if lat.d != params.d {
            return Err(Error::Domain("lattice and model dimensions differ".into()));
        }
        let d = params.d;
        let per_time = (radius_steps + 1)
            .checked_pow(d as u32)
            .ok_or_else(|| size_error(times.len(), radius_steps, d, usize::MAX, budget))?;
        let entries = per_time.saturating_mul(times.len());
        if entries > budget {
            return Err(size_error(times.len(), radius_steps, d, entries, budget));
        }
        let kernels = Kernels::new(*params)?;
        let tuples = canonical_tuples(d, radius_steps);
        let rows: Vec<Vec<f64>> = times
            .par_iter()
            .map(|&t| lattice_row(&kernels, lat, t, radius_steps, &tuples, per_time))
            .collect();
        let mut values = Vec::with_capacity(entries);
        for row in rows {
            values.extend(row);
        }
        let displacements = Displacements::Orthant { radius_steps };
        let hash = content_hash(Flavor::Lattice, params, Some(lat), times, &displacements);
        Ok(Self {
            header: TableHeader {
                flavor: Flavor::Lattice,
                params: *params,
                lattice: Some(*lat),
                times: times.to_vec(),
                displacements,
                method: method_tag(Flavor::Lattice).into(),
                hash,
            },
            per_time,
            values,
        })
    }

    /// Continuum table at explicit points.
    pub fn build_continuum(
        params: &ModelParams,
        times: &[f64],
        points: Vec<Vec<f64>>,
        budget: usize,
    ) -> Result<Self> {
        check_times(times, false)?;
        if points.iter().any(|p| p.len() != params.d) {
            return Err(Error::Domain("point dimension mismatch".into()));
        }
        let entries = points.len().saturating_mul(times.len());
        if entries > budget {
            return Err(Error::Size {
                what: "continuum kernel table".into(),
                dims: vec![times.len(), points.len()],
                entries,
                budget,
            });
        }
        let kernels = Kernels::new(*params)?;
        let rows: Vec<Result<Vec<f64>>> = times
            .par_iter()
            .map(|&t| points.iter().map(|x| kernels.continuum(t, x)).collect())
            .collect();
        let mut values = Vec::with_capacity(entries);
        for row in rows {
            values.extend(row?);
        }
        let displacements = Displacements::Points(points);
        let hash = content_hash(Flavor::Continuum, params, None, times, &displacements);
        let per_time = match &displacements {
            Displacements::Points(p) => p.len(),
            Displacements::Orthant { .. } => unreachable!(),
        };
        Ok(Self {
            header: TableHeader {
                flavor: Flavor::Continuum,
                params: *params,
                lattice: None,
                times: times.to_vec(),
                displacements,
                method: method_tag(Flavor::Continuum).into(),
                hash,
            },
            per_time,
            values,
        })
    }

    pub fn header(&self) -> &TableHeader {
        &self.header
    }

    pub fn hash(&self) -> &str {
        &self.header.hash
    }

    pub fn times(&self) -> &[f64] {
        &self.header.times
    }

    pub fn params(&self) -> &ModelParams {
        &self.header.params
    }

    pub fn lattice(&self) -> Option<&Lattice> {
        self.header.lattice.as_ref()
    }

    pub fn radius_steps(&self) -> Option<usize> {
        match self.header.displacements {
            Displacements::Orthant { radius_steps } => Some(radius_steps),
            Displacements::Points(_) => None,
        }
    }

    pub fn row(&self, time_index: usize) -> &[f64] {
        &self.values[time_index * self.per_time..(time_index + 1) * self.per_time]
    }

    /// Lattice value at integer displacement; `None` when outside the table.
    pub fn get_steps(&self, time_index: usize, steps: &[i64]) -> Option<f64> {
        let r = self.radius_steps()?;
        if time_index >= self.times().len() || steps.len() != self.header.params.d {
            return None;
        }
        let mut idx = 0usize;
        for &s in steps {
            let a = s.unsigned_abs() as usize;
            if a > r {
                return None;
            }
            idx = idx * (r + 1) + a;
        }
        Some(self.row(time_index)[idx])
    }

    /// Continuum value at the j-th stored point.
    pub fn get_point(&self, time_index: usize, j: usize) -> Option<f64> {
        match self.header.displacements {
            Displacements::Points(ref p) if j < p.len() && time_index < self.times().len() => {
                Some(self.row(time_index)[j])
            }
            _ => None,
        }
    }

    /// Σ_x of the lattice row over the full symmetric cube, or the
    /// squared-value sum when `squared` is set.
    pub fn lattice_sum(&self, time_index: usize, squared: bool) -> Option<f64> {
        let r = self.radius_steps()?;
        let d = self.header.params.d;
        let row = self.row(time_index);
        let mut total = 0.0;
        for (idx, &v) in row.iter().enumerate() {
            let nonzero = unflatten(idx, d, r).iter().filter(|&&n| n != 0).count();
            let mult = (1u64 << nonzero) as f64;
            total += mult * if squared { v * v } else { v };
        }
        Some(total)
    }

    pub fn row_sum(&self, time_index: usize) -> Option<f64> {
        self.lattice_sum(time_index, false)
    }

    /// Writes `t,x1..xd,value`. Lattice tables list the stored orthant only
    /// (coordinates ≥ 0); other entries follow from x → -x symmetry.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let d = self.header.params.d;
        let cols: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
        writeln!(out, "t,{},value", cols.join(","))?;
        for (ti, &t) in self.times().iter().enumerate() {
            let row = self.row(ti);
            match &self.header.displacements {
                Displacements::Orthant { radius_steps } => {
                    let delta = self.header.lattice.map(|l| l.delta).unwrap_or(1.0);
                    for (idx, v) in row.iter().enumerate() {
                        let steps = unflatten(idx, d, *radius_steps);
                        let xs: Vec<String> = steps
                            .iter()
                            .map(|&n| format!("{}", n as f64 * delta))
                            .collect();
                        writeln!(out, "{t},{},{v:.17e}", xs.join(","))?;
                    }
                }
                Displacements::Points(points) => {
                    for (p, v) in points.iter().zip(row) {
                        let xs: Vec<String> = p.iter().map(|x| format!("{x}")).collect();
                        writeln!(out, "{t},{},{v:.17e}", xs.join(","))?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        let header = serde_json::to_vec(&self.header)?;
        out.write_all(MAGIC)?;
        out.write_all(&FORMAT_VERSION.to_le_bytes())?;
        out.write_all(&(header.len() as u64).to_le_bytes())?;
        out.write_all(&header)?;
        let mut buf = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        input.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Cache("bad magic".into()));
        }
        let mut word = [0u8; 4];
        input.read_exact(&mut word)?;
        let version = u32::from_le_bytes(word);
        if version != FORMAT_VERSION {
            return Err(Error::Cache(format!("unsupported version {version}")));
        }
        let mut len = [0u8; 8];
        input.read_exact(&mut len)?;
        let len = u64::from_le_bytes(len) as usize;
        let mut header = vec![0u8; len];
        input.read_exact(&mut header)?;
        let header: TableHeader = serde_json::from_slice(&header)?;
        let per_time = match &header.displacements {
            Displacements::Orthant { radius_steps } => (radius_steps + 1).pow(header.params.d as u32),
            Displacements::Points(p) => p.len(),
        };
        let expected = content_hash(
            header.flavor,
            &header.params,
            header.lattice.as_ref(),
            &header.times,
            &header.displacements,
        );
        if expected != header.hash {
            return Err(Error::Cache("header hash mismatch".into()));
        }
        let count = per_time * header.times.len();
        let mut raw = Vec::with_capacity(count * 8);
        input.read_to_end(&mut raw)?;
        if raw.len() != count * 8 {
            return Err(Error::Cache(format!(
                "expected {count} values, found {} bytes",
                raw.len()
            )));
        }
        let values = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Self {
            header,
            per_time,
            values,
        })
    }

    pub fn cache_path(dir: &Path, hash: &str) -> PathBuf {
        dir.join(format!("kernel-{hash}.bin"))
    }

    /// Loads the lattice table from `dir` when a file with the matching
    /// content hash exists; otherwise builds and stores it. Returns the table
    /// and whether it was a cache hit.
    pub fn load_or_build_lattice(
        dir: &Path,
        params: &ModelParams,
        lat: &Lattice,
        times: &[f64],
        radius_steps: usize,
        budget: usize,
    ) -> Result<(Self, bool)> {
        let displacements = Displacements::Orthant { radius_steps };
        let hash = content_hash(Flavor::Lattice, params, Some(lat), times, &displacements);
        let path = Self::cache_path(dir, &hash);
        if path.exists() {
            let table = Self::read_binary(std::io::BufReader::new(fs::File::open(&path)?))?;
            if table.hash() == hash {
                return Ok((table, true));
            }
        }
        let table = Self::build_lattice(params, lat, times, radius_steps, budget)?;
        fs::create_dir_all(dir)?;
        let tmp = path.with_extension("tmp");
        table.write_binary(std::io::BufWriter::new(fs::File::create(&tmp)?))?;
        fs::rename(&tmp, &path)?;
        Ok((table, false))
    }
}

/// Cache directory from the environment, defaulting to `.islt-cache`.
pub fn cache_dir() -> PathBuf {
    std::env::var_os(CACHE_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(".islt-cache"))
}

fn size_error(times: usize, radius: usize, d: usize, entries: usize, budget: usize) -> Error {
    let mut dims = vec![times];
    dims.extend(std::iter::repeat_n(2 * radius + 1, d));
    Error::Size {
        what: "lattice kernel table".into(),
        dims,
        entries,
        budget,
    }
}

fn lattice_row(
    kernels: &Kernels,
    lat: &Lattice,
    t: f64,
    r: usize,
    tuples: &[(usize, Vec<u64>)],
    per_time: usize,
) -> Vec<f64> {
    let d = lat.d;
    let mut row = vec![0.0; per_time];
    if t == 0.0 {
        row[0] = 1.0;
        return row;
    }
    let mut buf = vec![0.0; r + 1];
    match kernels.inner_rule(lat, t) {
        None => {
            fill_scaled_bessel(t * lat.jump_rate(), &mut buf);
            for (idx, tuple) in tuples {
                row[*idx] = super::ordered_product(&buf, tuple);
            }
        }
        Some(rule) => {
            for (&s, &w) in rule.nodes.iter().zip(&rule.weights) {
                fill_scaled_bessel(s * rule.rate, &mut buf);
                match d {
                    1 => {
                        for (idx, tuple) in tuples {
                            row[*idx] += w * buf[tuple[0] as usize];
                        }
                    }
                    _ => {
                        for (idx, tuple) in tuples {
                            row[*idx] += w * super::ordered_product(&buf, tuple);
                        }
                    }
                }
            }
        }
    }
    // Fill non-canonical entries from their sorted representative.
    for idx in 0..per_time {
        let steps = unflatten(idx, d, r);
        let canon = sorted_abs(&steps.iter().map(|&n| n as i64).collect::<Vec<_>>());
        let cidx = flat_index(&canon, r);
        if cidx != idx {
            row[idx] = row[cidx];
        }
    }
    row
}
