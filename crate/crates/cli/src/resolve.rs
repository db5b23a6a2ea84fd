//! Flag > config file > default resolution.

use std::path::PathBuf;

use islt::kernels::Lattice;
use islt::params::{BetaSpec, ModelParams, MAX_K};
use islt::sie_sim::{Diffusion, InitialCondition, SIEConfig};

use crate::error::CliError;
use crate::run::Run;
use crate::settings::Settings;
use crate::{ModelArgs, SimArgs};

pub struct Resolver<'a> {
    pub settings: &'a Settings,
    pub out: PathBuf,
    pub run_id: Option<String>,
}

pub fn pick<T: Clone>(flag: Option<T>, file: Option<&T>, default: T) -> T {
    flag.or_else(|| file.cloned()).unwrap_or(default)
}

pub fn parse_beta(s: &str) -> Result<u32, CliError> {
    Ok(s.parse::<BetaSpec>()?.0)
}

impl Resolver<'_> {
    pub fn k(&self, model: &ModelArgs, default: u32) -> Result<u32, CliError> {
        let file = &self.settings.model;
        let k = match (&model.beta, model.k) {
            (Some(b), _) => parse_beta(b)?,
            (None, Some(k)) => k,
            (None, None) => match (&file.beta, file.k) {
                (Some(_), Some(_)) => {
                    return Err(CliError::Usage("config sets both model.beta and model.k".into()))
                }
                (Some(b), None) => parse_beta(b)?,
                (None, Some(k)) => k,
                (None, None) => default,
            },
        };
        if k > MAX_K {
            return Err(CliError::Usage(format!("k = {k} unsupported (k <= {MAX_K})")));
        }
        Ok(k)
    }

    pub fn params(&self, model: &ModelArgs, default_k: u32, default_d: usize) -> Result<ModelParams, CliError> {
        let k = self.k(model, default_k)?;
        let d = pick(model.d, self.settings.model.d.as_ref(), default_d);
        ModelParams::new(k, d).map_err(|e| CliError::Usage(e.to_string()))
    }

    /// Preset for `params`, then file values, then flags.
    pub fn sie_config(
        &self,
        params: ModelParams,
        sim: &SimArgs,
        preset: fn(ModelParams) -> islt::error::Result<SIEConfig>,
    ) -> Result<SIEConfig, CliError> {
        let file = &self.settings.sie;
        let mut c = preset(params).map_err(|e| CliError::Usage(e.to_string()))?;
        let delta = pick(sim.delta, file.delta.as_ref(), c.lat.delta);
        let radius = pick(sim.radius, file.radius.as_ref(), c.lat.radius);
        c.lat = Lattice::new(delta, params.d, radius).map_err(|e| CliError::Usage(e.to_string()))?;
        c.horizon = pick(sim.horizon, file.horizon.as_ref(), c.horizon);
        c.steps = pick(sim.steps, file.steps.as_ref(), c.steps);
        c.seed = pick(sim.seed, file.seed.as_ref(), c.seed);
        c.replicas = pick(sim.replicas, file.replicas.as_ref(), c.replicas);
        if let Some(a) = sim.a.as_ref().or(file.a.as_ref()) {
            c.a = a.parse::<Diffusion>()?;
        }
        if let Some(u0) = sim.u0.as_ref().or(file.u0.as_ref()) {
            c.u0 = u0.parse::<InitialCondition>()?;
        }
        c.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(c)
    }

    pub fn run(&self, command: &str, config: serde_json::Value, seed: Option<u64>) -> Result<Run, CliError> {
        Run::create(&self.out, self.run_id.as_deref(), command, config, seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolver(settings: &Settings) -> Resolver<'_> {
        Resolver {
            settings,
            out: PathBuf::from("results"),
            run_id: None,
        }
    }

    #[test]
    fn flags_override_file() {
        let settings: Settings = toml::from_str("[model]\nbeta = \"1/4\"\nd = 2\n").unwrap();
        let r = resolver(&settings);
        let none = ModelArgs::default();
        assert_eq!(r.params(&none, 1, 1).unwrap(), ModelParams::new(2, 2).unwrap());
        let flags = ModelArgs {
            beta: Some("1".into()),
            k: None,
            d: Some(3),
        };
        assert_eq!(r.params(&flags, 1, 1).unwrap(), ModelParams::new(0, 3).unwrap());
    }

    #[test]
    fn decimal_beta_is_usage_error() {
        let settings = Settings::default();
        let r = resolver(&settings);
        let flags = ModelArgs {
            beta: Some("0.5".into()),
            ..Default::default()
        };
        assert!(r.params(&flags, 1, 1).is_err());
    }

    #[test]
    fn sie_overrides_apply() {
        let settings: Settings = toml::from_str("[sie]\nreplicas = 40\na = \"sin:0.5\"\n").unwrap();
        let r = resolver(&settings);
        let sim = SimArgs {
            steps: Some(64),
            ..Default::default()
        };
        let c = r
            .sie_config(ModelParams::new(1, 1).unwrap(), &sim, SIEConfig::desk)
            .unwrap();
        assert_eq!(c.replicas, 40);
        assert_eq!(c.steps, 64);
        assert_eq!(c.a, Diffusion::Sin { c: 0.5 });
    }
}
