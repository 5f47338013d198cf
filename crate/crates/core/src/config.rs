//! Experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::Potential;
use crate::torusdyn::{ModelSystem, DEFAULT_SERIES_ORDER};
use crate::trig::TrigPoly;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Cat,
    Skew,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSpec {
    pub kind: SystemKind,
    /// Base matrix of a `custom` system.
    pub matrix: Option<[[i64; 2]; 2]>,
    /// Center cocycle `k1 k2 cos sin; ...`; skew systems default to `1 0 0.3 0`.
    pub cocycle: Option<String>,
    pub series_order: usize,
}

impl Default for SystemSpec {
    fn default() -> Self {
        Self {
            kind: SystemKind::Cat,
            matrix: None,
            cocycle: None,
            series_order: DEFAULT_SERIES_ORDER,
        }
    }
}

impl SystemSpec {
    pub fn parse_kind(s: &str) -> Result<SystemKind> {
        match s {
            "cat" => Ok(SystemKind::Cat),
            "skew" => Ok(SystemKind::Skew),
            "custom" => Ok(SystemKind::Custom),
            _ => Err(Error::Config(format!(
                "unknown system `{s}` (cat, skew, custom)"
            ))),
        }
    }

    pub fn build(&self) -> Result<ModelSystem> {
        let cocycle = self.cocycle.as_deref().map(TrigPoly::parse).transpose()?;
        let sys = match self.kind {
            SystemKind::Cat => ModelSystem::from_matrix([[2, 1], [1, 1]])?,
            SystemKind::Skew => ModelSystem::build(
                [[2, 1], [1, 1]],
                Some(cocycle.unwrap_or_else(|| TrigPoly::cos_x1(0.3))),
                DEFAULT_SERIES_ORDER,
            )?,
            SystemKind::Custom => {
                let m = self
                    .matrix
                    .ok_or_else(|| Error::Config("a custom system needs `matrix`".into()))?;
                ModelSystem::build(m, cocycle, DEFAULT_SERIES_ORDER)?
            }
        };
        if self.series_order == 0 {
            return Err(Error::Config("series_order must be ≥ 1".into()));
        }
        Ok(sys.with_series_order(self.series_order))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Resolutions {
    /// Leaf resolution: `2^k` cells per unit window.
    pub k: u32,
    pub n_trunc: usize,
    pub grid: usize,
    /// Largest `n` of pressure and Gibbs fits.
    pub n_max: usize,
    pub horizon: f64,
}

impl Default for Resolutions {
    fn default() -> Self {
        Self {
            k: 16,
            n_trunc: 60,
            grid: 64,
            n_max: 14,
            horizon: 1e4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub leaf: f64,
    pub invariance: f64,
    pub conformality: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            leaf: 1e-7,
            invariance: 1e-3,
            conformality: 5e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemSpec,
    pub potential: String,
    pub epsilon: f64,
    pub sigma: f64,
    pub resolution: Resolutions,
    pub tolerance: Tolerances,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            system: SystemSpec::default(),
            potential: "zero".into(),
            epsilon: 0.1,
            sigma: 0.5,
            resolution: Resolutions::default(),
            tolerance: Tolerances::default(),
            seed: 7,
            out: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn system(&self) -> Result<ModelSystem> {
        self.system.build()
    }

    pub fn potential(&self, sys: &ModelSystem) -> Result<Potential> {
        Potential::parse(&self.potential, sys)
    }

    /// Checks ranges that every subcommand relies on.
    pub fn validate(&self) -> Result<()> {
        let sys = self.system()?;
        self.potential(&sys)?;
        if !(self.epsilon > 0.0 && self.epsilon <= 0.2) {
            return Err(Error::Config(format!(
                "epsilon {} outside (0, 0.2]",
                self.epsilon
            )));
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(Error::Config(format!(
                "sigma {} outside (0, 1)",
                self.sigma
            )));
        }
        let r = &self.resolution;
        if !(8..=24).contains(&r.k) {
            return Err(Error::Config(format!("k = {} outside [8, 24]", r.k)));
        }
        if r.grid == 0 || r.n_trunc == 0 || r.n_max < 2 || !(r.horizon > 0.0) {
            return Err(Error::Config(
                "grid, n_trunc, horizon must be positive and n_max ≥ 2".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_defaults() {
        let c = ExperimentConfig::from_toml("potential = \"srb\"\n[resolution]\nk = 12\n").unwrap();
        assert_eq!(c.resolution.k, 12);
        assert_eq!(c.resolution.grid, 64);
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
        c.validate().unwrap();
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ExperimentConfig::from_toml("bogus = 1").is_err());
        let mut c = ExperimentConfig::default();
        c.epsilon = 0.5;
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.system.kind = SystemKind::Custom;
        assert!(c.validate().is_err());
        c.system.matrix = Some([[1, 1], [0, 1]]);
        assert!(c.validate().is_err());
        c.system.matrix = Some([[3, 1], [2, 1]]);
        c.validate().unwrap();
    }

    #[test]
    fn skew_system_from_config() {
        let c = ExperimentConfig::from_toml("[system]\nkind = \"skew\"\ncocycle = \"1 0 0.1 0\"\n")
            .unwrap();
        let sys = c.system().unwrap();
        assert_eq!(sys.dim(), 3);
    }
}
