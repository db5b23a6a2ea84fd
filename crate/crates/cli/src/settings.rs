//! Optional TOML configuration file. Every key is optional; command-line
//! flags override file values and built-in defaults fill the rest.
//!
//! ```toml
//! [model]
//! beta = "1/2"
//! d = 1
//!
//! [kernel]
//! delta = 0.05
//! times = [0.25, 0.5, 1.0]
//!
//! [sie]
//! a = "const:1"
//! u0 = "gaussian:0,0.5"
//! replicas = 500
//! seed = 7
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub kernel: KernelSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub sie: SieSection,
    #[serde(default)]
    pub holder: HolderSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// "1", "1/2", "1/4", "1/8" or "1/2^k".
    pub beta: Option<String>,
    /// The exponent in β = 1/2^k, as an alternative to `beta`.
    pub k: Option<u32>,
    pub d: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub delta: Option<f64>,
    pub times: Option<Vec<f64>>,
    pub radius_steps: Option<usize>,
    pub budget: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    pub deltas: Option<Vec<f64>>,
    pub tolerances: Option<Vec<f64>>,
    pub t: Option<f64>,
    pub x: Option<Vec<f64>>,
    pub delta: Option<f64>,
    pub compare: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SieSection {
    pub delta: Option<f64>,
    pub radius: Option<f64>,
    pub horizon: Option<f64>,
    pub steps: Option<usize>,
    pub a: Option<String>,
    pub u0: Option<String>,
    pub seed: Option<u64>,
    pub replicas: Option<usize>,
    pub picard: Option<usize>,
    pub save_fields: Option<usize>,
    pub binary: Option<bool>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HolderSection {
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<String>,
}

impl Settings {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections() {
        let s: Settings = toml::from_str(
            "[model]\nbeta = \"1/4\"\nd = 2\n[sie]\nreplicas = 20\na = \"sin:0.5\"\n",
        )
        .unwrap();
        assert_eq!(s.model.beta.as_deref(), Some("1/4"));
        assert_eq!(s.model.d, Some(2));
        assert_eq!(s.sie.replicas, Some(20));
    }

    #[test]
    fn numeric_beta_rejected() {
        assert!(toml::from_str::<Settings>("[model]\nbeta = 0.5\n").is_err());
        let s: Settings = toml::from_str("[model]\nk = 2\n").unwrap();
        assert_eq!(s.model.k, Some(2));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<Settings>("[sie]\nreplica = 3\n").is_err());
    }
}
