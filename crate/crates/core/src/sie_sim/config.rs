use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::Lattice;
use crate::params::ModelParams;

/// Diffusion coefficient a(u). Every preset satisfies a²(u) ≤ C(1 + u²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Diffusion {
    Zero,
    Constant { c: f64 },
    /// c·u
    Linear { c: f64 },
    /// c·sin(u)
    Sin { c: f64 },
    /// c·√(1 + u²)
    Sqrt { c: f64 },
}

impl Diffusion {
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            Diffusion::Zero => 0.0,
            Diffusion::Constant { c } => c,
            Diffusion::Linear { c } => c * u,
            Diffusion::Sin { c } => c * u.sin(),
            Diffusion::Sqrt { c } => c * (1.0 + u * u).sqrt(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Diffusion::Zero)
            || matches!(*self, Diffusion::Constant { c } | Diffusion::Linear { c } | Diffusion::Sin { c } | Diffusion::Sqrt { c } if c == 0.0)
    }

    /// Lipschitz constant of a.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            Diffusion::Zero | Diffusion::Constant { .. } => 0.0,
            Diffusion::Linear { c } | Diffusion::Sin { c } | Diffusion::Sqrt { c } => c.abs(),
        }
    }

    /// Smallest C with a²(u) ≤ C(1 + u²).
    pub fn growth_constant(&self) -> f64 {
        match *self {
            Diffusion::Zero => 0.0,
            Diffusion::Constant { c }
            | Diffusion::Linear { c }
            | Diffusion::Sin { c }
            | Diffusion::Sqrt { c } => c * c,
        }
    }
}

impl fmt::Display for Diffusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diffusion::Zero => write!(f, "zero"),
            Diffusion::Constant { c } => write!(f, "const:{c}"),
            Diffusion::Linear { c } => write!(f, "linear:{c}"),
            Diffusion::Sin { c } => write!(f, "sin:{c}"),
            Diffusion::Sqrt { c } => write!(f, "sqrt:{c}"),
        }
    }
}

fn split_spec(s: &str) -> (&str, Vec<&str>) {
    match s.trim().split_once(':') {
        Some((name, rest)) => (name, rest.split(',').map(str::trim).collect()),
        None => (s.trim(), Vec::new()),
    }
}

fn parse_numbers(spec: &str, args: &[&str]) -> Result<Vec<f64>> {
    args.iter()
        .map(|a| {
            a.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Usage(format!("bad number '{a}' in '{spec}'")))
        })
        .collect()
}

impl FromStr for Diffusion {
    type Err = Error;

    /// `zero`, `const:c`, `linear:c`, `sin:c`, `sqrt:c` (c defaults to 1).
    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = split_spec(s);
        let nums = parse_numbers(s, &args)?;
        if nums.len() > 1 {
            return Err(Error::Usage(format!("'{s}' takes at most one coefficient")));
        }
        let c = nums.first().copied().unwrap_or(1.0);
        Ok(match name {
            "zero" if nums.is_empty() => Diffusion::Zero,
            "const" | "constant" => Diffusion::Constant { c },
            "linear" => Diffusion::Linear { c },
            "sin" => Diffusion::Sin { c },
            "sqrt" => Diffusion::Sqrt { c },
            _ => return Err(Error::Usage(format!("unknown diffusion preset '{s}'"))),
        })
    }
}

/// Initial condition u₀(x) = amplitude · Π_i f(x_i); every preset is a
/// product of one-dimensional factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    Zero,
    Constant { c: f64 },
    /// exp(−|x − center·1|² / (2 width²))
    Gaussian { center: f64, width: f64 },
    /// Π_i cos(frequency · x_i)
    Cosine { frequency: f64 },
}

impl InitialCondition {
    pub fn amplitude(&self) -> f64 {
        match *self {
            InitialCondition::Zero => 0.0,
            InitialCondition::Constant { c } => c,
            _ => 1.0,
        }
    }

    #[inline]
    pub fn factor(&self, x: f64) -> f64 {
        match *self {
            InitialCondition::Zero | InitialCondition::Constant { .. } => 1.0,
            InitialCondition::Gaussian { center, width } => {
                let z = (x - center) / width;
                (-0.5 * z * z).exp()
            }
            InitialCondition::Cosine { frequency } => (frequency * x).cos(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.amplitude() * x.iter().map(|&xi| self.factor(xi)).product::<f64>()
    }

    /// sup |u₀|.
    pub fn sup(&self) -> f64 {
        self.amplitude().abs()
    }
}

impl fmt::Display for InitialCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialCondition::Zero => write!(f, "zero"),
            InitialCondition::Constant { c } => write!(f, "const:{c}"),
            InitialCondition::Gaussian { center, width } => write!(f, "gaussian:{center},{width}"),
            InitialCondition::Cosine { frequency } => write!(f, "cosine:{frequency}"),
        }
    }
}

impl FromStr for InitialCondition {
    type Err = Error;

    /// `zero`, `const:c`, `gaussian[:center,width]`, `cosine[:frequency]`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = split_spec(s);
        let nums = parse_numbers(s, &args)?;
        let ic = match (name, nums.as_slice()) {
            ("zero", []) => InitialCondition::Zero,
            ("const" | "constant", [c]) => InitialCondition::Constant { c: *c },
            ("const" | "constant", []) => InitialCondition::Constant { c: 1.0 },
            ("gaussian", []) => InitialCondition::Gaussian {
                center: 0.0,
                width: 0.5,
            },
            ("gaussian", [center, width]) if *width > 0.0 => InitialCondition::Gaussian {
                center: *center,
                width: *width,
            },
            ("cosine", []) => InitialCondition::Cosine { frequency: 1.0 },
            ("cosine", [frequency]) => InitialCondition::Cosine {
                frequency: *frequency,
            },
            _ => return Err(Error::Usage(format!("bad initial condition '{s}'"))),
        };
        Ok(ic)
    }
}

/// A truncated lattice SIE run: lattice truncation `lat.radius` = l,
/// M = `steps` uniform steps on [0, T].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SIEConfig {
    pub params: ModelParams,
    pub lat: Lattice,
    pub horizon: f64,
    pub steps: usize,
    pub a: Diffusion,
    pub u0: InitialCondition,
    pub seed: u64,
    pub replicas: usize,
}

impl SIEConfig {
    /// Desk-scale defaults: d=1: δ=0.05, l=2, M=256; d=2: δ=0.1, l=1,
    /// M=128; d=3: δ=0.2, l=1, M=96; T = 1.
    pub fn desk(params: ModelParams) -> Result<Self> {
        params.require_field_dimension()?;
        let (delta, l, steps) = match params.d {
            1 => (0.05, 2.0, 256),
            2 => (0.1, 1.0, 128),
            _ => (0.2, 1.0, 96),
        };
        Ok(Self {
            params,
            lat: Lattice::new(delta, params.d, l)?,
            horizon: 1.0,
            steps,
            a: Diffusion::Constant { c: 1.0 },
            u0: InitialCondition::Gaussian {
                center: 0.0,
                width: 0.5,
            },
            seed: 0,
            replicas: 500,
        })
    }

    /// Finer grids used for Hölder fits: δ = 0.025, M = 1024 in d = 1 and
    /// M = 512 in d = 2; d = 3 keeps the desk grid.
    pub fn holder(params: ModelParams) -> Result<Self> {
        let mut c = Self::desk(params)?;
        match params.d {
            1 => {
                c.lat = Lattice::new(0.025, 1, 2.0)?;
                c.steps = 1024;
            }
            2 => c.steps = 512,
            _ => {}
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.require_field_dimension()?;
        if self.lat.d != self.params.d {
            return Err(Error::Domain("lattice and model dimensions differ".into()));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::Domain(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.steps == 0 {
            return Err(Error::Domain("need at least one time step".into()));
        }
        if self.replicas == 0 {
            return Err(Error::Domain("need at least one replica".into()));
        }
        if self.lat.steps_per_side() == 0 {
            return Err(Error::Domain("truncation contains only the origin".into()));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    /// t_j = j Δt for j = 0..=M.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|j| j as f64 * self.dt()).collect()
    }

    pub fn site_count(&self) -> usize {
        self.lat.site_count()
    }

    /// δ^{−d/2}
    pub fn noise_scale(&self) -> f64 {
        self.lat.delta.powf(-(self.params.d as f64) / 2.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_presets() {
        assert_eq!("zero".parse::<Diffusion>().unwrap(), Diffusion::Zero);
        assert_eq!("const:2".parse::<Diffusion>().unwrap(), Diffusion::Constant { c: 2.0 });
        assert_eq!("sin:0.5".parse::<Diffusion>().unwrap(), Diffusion::Sin { c: 0.5 });
        assert!("cubic:1".parse::<Diffusion>().is_err());
        assert_eq!(
            "gaussian:0.5,0.25".parse::<InitialCondition>().unwrap(),
            InitialCondition::Gaussian { center: 0.5, width: 0.25 }
        );
        assert!("gaussian:0,-1".parse::<InitialCondition>().is_err());
        for a in [Diffusion::Zero, Diffusion::Sqrt { c: 1.5 }] {
            assert_eq!(a.to_string().parse::<Diffusion>().unwrap(), a);
        }
    }

    #[test]
    fn growth_condition_holds() {
        for a in [
            Diffusion::Constant { c: 2.0 },
            Diffusion::Linear { c: 0.7 },
            Diffusion::Sin { c: 0.5 },
            Diffusion::Sqrt { c: 1.2 },
        ] {
            let c = a.growth_constant();
            for i in -50..=50 {
                let u = i as f64 * 0.37;
                assert!(a.eval(u).powi(2) <= c * (1.0 + u * u) * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn desk_defaults() {
        let c = SIEConfig::desk(ModelParams::new(1, 1).unwrap()).unwrap();
        assert_eq!(c.site_count(), 81);
        assert_eq!(c.steps, 256);
        assert!(SIEConfig::desk(ModelParams::new(1, 4).unwrap()).is_err());
    }
}
