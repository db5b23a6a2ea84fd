use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The lattice δℤ^d, truncated to [-l, l]^d where a finite footprint is needed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub delta: f64,
    pub d: usize,
    pub radius: f64,
}

impl Lattice {
    pub fn new(delta: f64, d: usize, radius: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::Domain(format!("lattice step must be positive, got {delta}")));
        }
        if !(1..=5).contains(&d) {
            return Err(Error::Domain(format!("lattice dimension {d} out of range")));
        }
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::Domain(format!("lattice radius must be >= 0, got {radius}")));
        }
        Ok(Self { delta, d, radius })
    }

    /// ⌊l/δ⌋: sites per half-axis in the truncation.
    pub fn steps_per_side(&self) -> usize {
        (self.radius / self.delta + 1e-9).floor() as usize
    }

    pub fn sites_per_axis(&self) -> usize {
        2 * self.steps_per_side() + 1
    }

    pub fn site_count(&self) -> usize {
        self.sites_per_axis().pow(self.d as u32)
    }

    /// Jump rate per coordinate, chosen so the generator is Δ_δ/2.
    pub fn jump_rate(&self) -> f64 {
        1.0 / (self.delta * self.delta)
    }

    /// Converts a point to integer lattice coordinates, rejecting points off δℤ^d.
    pub fn to_steps(&self, x: &[f64]) -> Result<Vec<i64>> {
        if x.len() != self.d {
            return Err(Error::Domain(format!(
                "point has dimension {}, lattice has {}",
                x.len(),
                self.d
            )));
        }
        x.iter()
            .map(|&xi| {
                let n = (xi / self.delta).round();
                if (xi - n * self.delta).abs() > 1e-9 * self.delta.max(xi.abs()) {
                    Err(Error::Domain(format!(
                        "{xi} is not on the lattice with step {}",
                        self.delta
                    )))
                } else {
                    Ok(n as i64)
                }
            })
            .collect()
    }

    pub fn to_point(&self, steps: &[i64]) -> Vec<f64> {
        steps.iter().map(|&n| n as f64 * self.delta).collect()
    }

    /// Sites of the truncation in row-major order (last coordinate fastest).
    pub fn sites(&self) -> Vec<Vec<i64>> {
        let m = self.steps_per_side() as i64;
        let per = self.sites_per_axis();
        (0..self.site_count())
            .map(|mut idx| {
                let mut s = vec![0i64; self.d];
                for c in (0..self.d).rev() {
                    s[c] = (idx % per) as i64 - m;
                    idx /= per;
                }
                s
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_sites() {
        let lat = Lattice::new(0.05, 1, 2.0).unwrap();
        assert_eq!(lat.steps_per_side(), 40);
        assert_eq!(lat.site_count(), 81);
        let lat2 = Lattice::new(0.1, 2, 1.0).unwrap();
        let sites = lat2.sites();
        assert_eq!(sites.len(), 441);
        assert_eq!(sites[0], vec![-10, -10]);
        assert_eq!(sites[1], vec![-10, -9]);
        assert_eq!(sites[440], vec![10, 10]);
    }

    #[test]
    fn off_lattice_rejected() {
        let lat = Lattice::new(0.1, 1, 1.0).unwrap();
        assert_eq!(lat.to_steps(&[0.3]).unwrap(), vec![3]);
        assert!(lat.to_steps(&[0.35]).is_err());
        assert!(lat.to_steps(&[0.3, 0.1]).is_err());
        assert!(Lattice::new(0.0, 1, 1.0).is_err());
    }
}
