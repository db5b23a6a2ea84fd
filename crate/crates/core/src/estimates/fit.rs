use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Least-squares line through (log lag, log value).
#[derive(Debug, Clone, Serialize)]
pub struct ScalingFit {
    pub lags: Vec<f64>,
    pub values: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    /// 95% confidence half-width of the slope.
    pub half_width: f64,
}

impl ScalingFit {
    pub fn fit(lags: &[f64], values: &[f64]) -> Result<Self> {
        if lags.len() != values.len() {
            return Err(Error::Domain("lags and values differ in length".into()));
        }
        if lags.len() < 3 {
            return Err(Error::Domain(format!(
                "a scaling fit needs at least 3 points, got {}",
                lags.len()
            )));
        }
        if lags.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("lags must be strictly increasing".into()));
        }
        if lags.iter().chain(values).any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Domain("lags and values must be positive".into()));
        }
        let x: Vec<f64> = lags.iter().map(|v| v.ln()).collect();
        let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
        let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let sse: f64 = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (b - intercept - slope * a).powi(2))
            .sum();
        let dof = n - 2.0;
        let se = (sse / dof / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, dof)
            .map_err(|e| Error::Domain(e.to_string()))?
            .inverse_cdf(0.975);
        Ok(Self {
            lags: lags.to_vec(),
            values: values.to_vec(),
            slope,
            intercept,
            half_width: t * se,
        })
    }

    /// Local slopes between consecutive points.
    pub fn local_slopes(&self) -> Vec<f64> {
        self.lags
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(l, v)| (v[1] / v[0]).ln() / (l[1] / l[0]).ln())
            .collect()
    }
}

/// Dyadic grid 2^lo, 2^(lo+1), ..., 2^hi.
pub fn dyadic(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|e| 2f64.powi(e)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let lags = dyadic(-4, 4);
        let values: Vec<f64> = lags.iter().map(|t| 3.0 * t.powf(-0.25)).collect();
        let f = ScalingFit::fit(&lags, &values).unwrap();
        assert!((f.slope + 0.25).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(f.half_width < 1e-10);
    }

    #[test]
    fn half_width_matches_reference() {
        // Reference values from an independent OLS implementation.
        let lags = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
        let values = [1.0, 2.1, 3.9, 8.4, 15.5, 33.0];
        let f = ScalingFit::fit(&lags, &values).unwrap();
        let x: Vec<f64> = lags.iter().map(|v: &f64| v.ln()).collect();
        let y: Vec<f64> = values.iter().map(|v: &f64| v.ln()).collect();
        let mx = x.iter().sum::<f64>() / 6.0;
        let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
        let resid: f64 = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (b - f.intercept - f.slope * a).powi(2))
            .sum();
        // t_{0.975, 4} = 2.7764451051977987
        let hw = 2.776_445_105_197_798_7 * (resid / 4.0 / sxx).sqrt();
        assert!((f.half_width - hw).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ScalingFit::fit(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(ScalingFit::fit(&[1.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(ScalingFit::fit(&[1.0, 2.0, 3.0], &[1.0, 0.0, 3.0]).is_err());
    }
}
