//! Scenario files: the input estimates plus solver configuration.

use covfuse_core::mee::{CrossCheckConfig, MeeConfig};
use covfuse_core::{CiConfig, Estimate, Tolerance, UnionConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const DEFAULT_GATE: f64 = 9.0;

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "COVFUSE_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub estimates: Vec<Estimate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default)]
    pub config: ScenarioConfig,
}

/// Settings of the consistency checks run by `union --cross-check`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckConfig {
    pub logdet_tol: f64,
    pub samples: usize,
    pub level_tol: f64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        let c = CrossCheckConfig::default();
        Self { logdet_tol: c.logdet_tol, samples: c.samples, level_tol: c.level_tol }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Applies to every solver; the `tol` fields of the nested sections are ignored.
    pub tolerance: Tolerance,
    /// Squared Mahalanobis distance above which `deconflict` takes the union branch.
    pub gate: f64,
    pub seed: u64,
    pub ci: CiConfig,
    pub union: UnionConfig,
    pub mee: MeeConfig,
    pub check: CheckConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            tolerance: Tolerance::default(),
            gate: DEFAULT_GATE,
            seed: 0,
            ci: CiConfig::default(),
            union: UnionConfig::default(),
            mee: MeeConfig::default(),
            check: CheckConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn union_config(&self) -> UnionConfig {
        UnionConfig { tol: self.tolerance, ..self.union }
    }

    pub fn mee_config(&self) -> MeeConfig {
        MeeConfig { tol: self.tolerance, ..self.mee }
    }

    pub fn cross_check_config(&self) -> CrossCheckConfig {
        CrossCheckConfig {
            union: self.union_config(),
            mee: self.mee_config(),
            logdet_tol: self.check.logdet_tol,
            samples: self.check.samples,
            level_tol: self.check.level_tol,
        }
    }
}

impl Scenario {
    pub fn new(estimates: Vec<Estimate>) -> Self {
        Self { estimates, labels: None, config: ScenarioConfig::default() }
    }

    pub fn from_json(bytes: &[u8]) -> CliResult<Self> {
        let s: Scenario = serde_json::from_slice(bytes)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> CliResult<()> {
        let first = self
            .estimates
            .first()
            .ok_or_else(|| CliError::Input("scenario has no estimates".into()))?;
        for (i, e) in self.estimates.iter().enumerate() {
            if e.dim() != first.dim() {
                return Err(CliError::Input(format!(
                    "estimate {i} has dimension {}, expected {}",
                    e.dim(),
                    first.dim()
                )));
            }
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.estimates.len() {
                return Err(CliError::Input(format!(
                    "{} labels for {} estimates",
                    labels.len(),
                    self.estimates.len()
                )));
            }
        }
        if !(self.config.gate.is_finite() && self.config.gate >= 0.0) {
            return Err(CliError::Input(format!("gate must be a nonnegative number, got {}", self.config.gate)));
        }
        self.config.tolerance.validate()?;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.estimates[0].dim()
    }
}

/// A scenario of `count` random `dim`-dimensional estimates with means in a
/// ball of radius `radius` and covariance condition numbers at most 100.
pub fn random_scenario(dim: usize, count: usize, radius: f64, seed: u64) -> CliResult<Scenario> {
    use covfuse_core::sampling::{random_instance, InstanceSpec};
    use rand::SeedableRng;
    if dim == 0 || count == 0 {
        return Err(CliError::Input("dimension and count must be positive".into()));
    }
    if !(radius.is_finite() && radius >= 0.0) {
        return Err(CliError::Input(format!("radius must be a nonnegative number, got {radius}")));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let spec = InstanceSpec { mean_radius: radius, ..InstanceSpec::default() };
    let mut s = Scenario::new(random_instance(&mut rng, dim, count, &spec));
    s.config.seed = seed;
    Ok(s)
}

/// Hex SHA-256 of the raw input bytes.
pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Seed precedence: flag, then `COVFUSE_SEED`, then the configured value.
pub fn resolve_seed(configured: u64, env: Option<&str>, flag: Option<u64>) -> CliResult<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match env {
        Some(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Input(format!("{SEED_ENV} must be an unsigned integer, got {v:?}"))),
        None => Ok(configured),
    }
}
