//! Model parameters: the stable index β = 1/2^k and the spatial dimension.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported k (β = 1/8).
pub const MAX_K: u32 = 3;

/// β = 1/2^k together with the spatial dimension d.
///
/// `k = 0` is the plain Brownian case β = 1, where the inner time is
/// deterministic. Dimensions 1..=3 are valid for every SIE operation;
/// d = 4 and 5 are accepted only so that divergence checks can be run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelParams {
    pub k: u32,
    pub d: usize,
}

impl ModelParams {
    pub fn new(k: u32, d: usize) -> Result<Self> {
        if k > MAX_K {
            return Err(Error::Domain(format!(
                "k = {k} unsupported (beta = 1/2^k needs k <= {MAX_K})"
            )));
        }
        if !(1..=5).contains(&d) {
            return Err(Error::Domain(format!("dimension d = {d} out of range 1..=5")));
        }
        Ok(Self { k, d })
    }

    /// Parameters restricted to dimensions where random-field solutions exist.
    pub fn for_sie(k: u32, d: usize) -> Result<Self> {
        let p = Self::new(k, d)?;
        p.require_field_dimension()?;
        Ok(p)
    }

    pub fn require_field_dimension(&self) -> Result<()> {
        if self.d > 3 {
            return Err(Error::Domain(format!(
                "d = {} has no random-field solution; only divergence checks accept d >= 4",
                self.d
            )));
        }
        Ok(())
    }

    pub fn with_dim(self, d: usize) -> Result<Self> {
        Self::new(self.k, d)
    }

    /// ν = 2^k.
    pub fn nu(&self) -> u32 {
        1 << self.k
    }

    pub fn beta(&self) -> f64 {
        1.0 / self.nu() as f64
    }

    pub fn is_brownian(&self) -> bool {
        self.k == 0
    }

    pub fn beta_label(&self) -> String {
        format_beta(self.k)
    }
}

impl fmt::Display for ModelParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "beta={} d={}", self.beta_label(), self.d)
    }
}

pub fn format_beta(k: u32) -> String {
    if k == 0 {
        "1".to_string()
    } else {
        format!("1/{}", 1u32 << k)
    }
}

/// β given in exact form. Accepts `1`, `1/2`, `1/4`, `1/8`, `1/2^k`; decimal
/// input is rejected since it cannot be distinguished from unsupported indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BetaSpec(pub u32);

impl FromStr for BetaSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.contains('.') || s.contains('e') {
            return Err(Error::Usage(format!(
                "floating-point beta '{s}' rejected; use 1/2^k or give k directly"
            )));
        }
        let k = if s == "1" {
            0
        } else if let Some(rest) = s.strip_prefix("1/2^") {
            rest.parse::<u32>()
                .map_err(|_| Error::Usage(format!("bad exponent in beta '{s}'")))?
        } else if let Some(den) = s.strip_prefix("1/") {
            let den: u32 = den
                .parse()
                .map_err(|_| Error::Usage(format!("bad beta '{s}'")))?;
            if den == 0 || !den.is_power_of_two() {
                return Err(Error::Usage(format!(
                    "beta '{s}' is not of the form 1/2^k"
                )));
            }
            den.trailing_zeros()
        } else {
            return Err(Error::Usage(format!("bad beta '{s}'; expected 1/2^k")));
        };
        if k > MAX_K {
            return Err(Error::Usage(format!("beta '{s}' needs k <= {MAX_K}")));
        }
        Ok(BetaSpec(k))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_nu_product_is_one() {
        for k in 0..=MAX_K {
            let p = ModelParams::new(k, 1).unwrap();
            assert_eq!(p.beta() * p.nu() as f64, 1.0);
            assert!(p.nu().is_power_of_two());
        }
    }

    #[test]
    fn parses_exact_beta_forms() {
        assert_eq!("1".parse::<BetaSpec>().unwrap().0, 0);
        assert_eq!("1/2".parse::<BetaSpec>().unwrap().0, 1);
        assert_eq!("1/4".parse::<BetaSpec>().unwrap().0, 2);
        assert_eq!("1/2^3".parse::<BetaSpec>().unwrap().0, 3);
        assert!("0.5".parse::<BetaSpec>().is_err());
        assert!("1/3".parse::<BetaSpec>().is_err());
        assert!("1/16".parse::<BetaSpec>().is_err());
    }

    #[test]
    fn dimension_rules() {
        assert!(ModelParams::for_sie(1, 3).is_ok());
        assert!(ModelParams::for_sie(1, 4).is_err());
        assert!(ModelParams::new(1, 4).is_ok());
        assert!(ModelParams::new(1, 0).is_err());
        assert!(ModelParams::new(4, 1).is_err());
    }
}
