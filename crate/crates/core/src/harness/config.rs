//! Run configuration, read from a TOML file.
//!
//! Relative paths inside the file are resolved against the file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::basis::DEFAULT_VARIANCE_THRESHOLD;
use crate::binomial::SamplerConfig;
use crate::error::{Error, Result};
use crate::evaluation::{SizeVariable, StudyConfig};
use crate::synthetic::SyntheticConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Binomial,
    Multinomial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub curves: Option<PathBuf>,
    pub scalars: Option<PathBuf>,
    pub id_column: String,
    /// Success counts (0/1 for binary data). Ignored in multinomial mode.
    pub response: Option<String>,
    /// Trial counts; every unit has one trial when absent.
    pub trials: Option<String>,
    pub weight: String,
    pub covariates: Vec<String>,
    /// Category label column for multinomial runs.
    pub category: Option<String>,
    /// Stick-breaking order of the category labels.
    pub category_order: Vec<String>,
    pub log1p: bool,
    pub standardize: bool,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            curves: None,
            scalars: None,
            id_column: "id".into(),
            response: None,
            trials: None,
            weight: "weight".into(),
            covariates: Vec::new(),
            category: None,
            category_order: Vec::new(),
            log1p: false,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BasisSection {
    pub threshold: f64,
}

impl Default for BasisSection {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_VARIANCE_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSection {
    pub iterations: usize,
    pub burn_in: usize,
    pub sigma2_beta: f64,
    pub thin: usize,
    /// Chain j runs with seed `seed + j`.
    pub chains: usize,
}

impl Default for SamplerSection {
    fn default() -> Self {
        let d = SamplerConfig::default();
        Self {
            iterations: d.iterations,
            burn_in: d.burn_in,
            sigma2_beta: d.sigma2_beta,
            thin: d.thin,
            chains: 1,
        }
    }
}

impl SamplerSection {
    pub fn sampler(&self, seed: u64) -> SamplerConfig {
        SamplerConfig {
            iterations: self.iterations,
            burn_in: self.burn_in,
            sigma2_beta: self.sigma2_beta,
            seed,
            thin: self.thin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub replicates: usize,
    pub expected_n: f64,
    pub size_variable: SizeVariable,
    pub max_failure_rate: f64,
    /// Draw the population from the `[synthetic]` generator instead of `[data]`.
    pub synthetic: bool,
}

impl Default for SimulationSection {
    fn default() -> Self {
        let d = StudyConfig::default();
        Self {
            replicates: d.replicates,
            expected_n: d.expected_n,
            size_variable: d.size_variable,
            max_failure_rate: d.max_failure_rate,
            synthetic: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictSection {
    pub artifact: Option<PathBuf>,
    pub curves: Option<PathBuf>,
    pub scalars: Option<PathBuf>,
    pub level: f64,
}

impl Default for PredictSection {
    fn default() -> Self {
        Self {
            artifact: None,
            curves: None,
            scalars: None,
            level: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SummarizeSection {
    pub artifact: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: u64,
    /// Level of the reported pointwise and per-unit intervals.
    pub level: f64,
    pub data: DataSection,
    pub basis: BasisSection,
    pub sampler: SamplerSection,
    pub simulation: SimulationSection,
    pub predict: PredictSection,
    pub summarize: SummarizeSection,
    pub synthetic: SyntheticConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: Mode::default(),
            seed: 0,
            level: 0.9,
            data: DataSection::default(),
            basis: BasisSection::default(),
            sampler: SamplerSection::default(),
            simulation: SimulationSection::default(),
            predict: PredictSection::default(),
            summarize: SummarizeSection::default(),
            synthetic: SyntheticConfig::default(),
        }
    }
}

/// A parsed configuration together with its source text.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub text: String,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config = RunConfig::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::parse(path, msg),
            other => other,
        })?;
        let base_dir = path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        Ok(Self {
            config,
            text,
            base_dir,
        })
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.basis.threshold > 0.0 && self.basis.threshold <= 1.0) {
            return Err(Error::Config(format!(
                "basis.threshold must lie in (0, 1], got {}",
                self.basis.threshold
            )));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("level must lie in (0, 1), got {}", self.level)));
        }
        if !(self.predict.level > 0.0 && self.predict.level < 1.0) {
            return Err(Error::Config("predict.level must lie in (0, 1)".into()));
        }
        if self.sampler.chains == 0 {
            return Err(Error::Config("sampler.chains must be positive".into()));
        }
        self.sampler.sampler(self.seed).validate()?;
        if self.mode == Mode::Multinomial {
            if self.data.category_order.len() < 2 {
                return Err(Error::Config(
                    "multinomial mode needs data.category_order with at least 2 labels".into(),
                ));
            }
            let mut seen = self.data.category_order.clone();
            seen.sort();
            seen.dedup();
            if seen.len() != self.data.category_order.len() {
                return Err(Error::Config("data.category_order has duplicate labels".into()));
            }
        }
        Ok(())
    }

    pub fn study(&self) -> StudyConfig {
        StudyConfig {
            replicates: self.simulation.replicates,
            expected_n: self.simulation.expected_n,
            size_variable: self.simulation.size_variable,
            threshold: self.basis.threshold,
            seed: self.seed,
            sampler: self.sampler.sampler(self.seed),
            max_failure_rate: self.simulation.max_failure_rate,
        }
    }
}
