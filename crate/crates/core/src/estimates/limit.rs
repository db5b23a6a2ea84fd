use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{Kernels, Lattice};
use crate::params::ModelParams;

#[derive(Debug, Clone, Serialize)]
pub struct LimitRow {
    pub delta: f64,
    pub lattice: f64,
    pub continuum: f64,
    /// lattice / (continuum · δ^d)
    pub ratio: f64,
}

/// Ratios K^{RW,Λ}(t, x) / (K^{BM,Λ}(t, x) δ^d) for decreasing lattice steps.
/// `x` must lie on every lattice.
pub fn continuum_limit_report(
    params: &ModelParams,
    t: f64,
    x: &[f64],
    deltas: &[f64],
) -> Result<Vec<LimitRow>> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("time must be positive, got {t}")));
    }
    if deltas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Domain("lattice steps must be decreasing".into()));
    }
    let kernels = Kernels::new(*params)?;
    let continuum = kernels.continuum(t, x)?;
    deltas
        .iter()
        .map(|&delta| {
            let lat = Lattice::new(delta, params.d, 0.0)?;
            let lattice = kernels.lattice(&lat, t, x)?;
            Ok(LimitRow {
                delta,
                lattice,
                continuum,
                ratio: lattice / (continuum * delta.powi(params.d as i32)),
            })
        })
        .collect()
}
