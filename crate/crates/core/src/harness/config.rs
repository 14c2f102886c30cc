use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::bootstrap::{ProcessKind, StatPlan};
use crate::error::{Error, Result};
use crate::model::{Link, ModelSpec, OrderedChoiceSpec, PoissonLink, PoissonSpec};
use crate::process::GridSettings;
use crate::stat::Norm;

/// A complete run description, read from TOML.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    #[serde(default, rename = "model")]
    pub models: Vec<ModelConfig>,
    pub data: Option<DataConfig>,
    #[serde(default)]
    pub plan: PlanConfig,
    #[serde(default)]
    pub bootstrap: BootstrapConfig,
    pub mc: Option<McConfig>,
    pub simulate: Option<SimulateConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Ordered,
    Poisson,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    pub family: Family,
    /// `probit` / `logit` for ordered models; `exp-static` / `identity-ar` / `log-ar` for Poisson.
    pub link: String,
    pub categories: Option<u32>,
    #[serde(default)]
    pub dynamic: bool,
    #[serde(default)]
    pub covariates: Vec<String>,
    pub lambda0: Option<f64>,
}

impl ModelConfig {
    pub fn spec(&self) -> Result<ModelSpec> {
        let p = self.covariates.len();
        match self.family {
            Family::Ordered => {
                let link = match self.link.as_str() {
                    "probit" => Link::Probit,
                    "logit" => Link::Logit,
                    other => return Err(Error::Config(format!("model `{}`: unknown ordered link `{other}`", self.name))),
                };
                let k = self
                    .categories
                    .ok_or_else(|| Error::Config(format!("model `{}`: `categories` is required", self.name)))?;
                Ok(ModelSpec::Ordered(OrderedChoiceSpec::new(link, k, self.dynamic, p)?))
            }
            Family::Poisson => {
                let link = match self.link.as_str() {
                    "exp-static" => PoissonLink::ExpStatic,
                    "identity-ar" => PoissonLink::IdentityAr,
                    "log-ar" => PoissonLink::LogAr,
                    other => return Err(Error::Config(format!("model `{}`: unknown Poisson link `{other}`", self.name))),
                };
                Ok(ModelSpec::Poisson(PoissonSpec::new(link, p, self.lambda0.unwrap_or(1.0))?))
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: PathBuf,
    /// Integer-coded outcome column.
    pub y: Option<String>,
    /// Continuous column to discretize instead of `y`.
    pub rate: Option<String>,
    /// Cut points for `rate`; defaults to `[-0.25, 0, 0.25]`.
    pub thresholds: Option<Vec<f64>>,
    /// Where the category recoding is written; defaults to `<out>/mapping.csv`.
    pub mapping: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanConfig {
    #[serde(default = "default_processes")]
    pub processes: Vec<String>,
    #[serde(default = "default_norms")]
    pub norms: Vec<Norm>,
    #[serde(default = "default_exact_limit")]
    pub exact_limit: usize,
    #[serde(default = "default_grid")]
    pub grid: usize,
}

fn default_processes() -> Vec<String> {
    ["S2", "R2M(50)", "R2M(25)", "R2", "S1", "R1M(50)", "R1M(25)", "R1", "Z"].map(String::from).to_vec()
}

fn default_norms() -> Vec<Norm> {
    vec![Norm::Cvm, Norm::Ks]
}

fn default_exact_limit() -> usize {
    GridSettings::default().exact_limit
}

fn default_grid() -> usize {
    GridSettings::default().grid
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig {
            processes: default_processes(),
            norms: default_norms(),
            exact_limit: default_exact_limit(),
            grid: default_grid(),
        }
    }
}

impl PlanConfig {
    pub fn kinds(&self) -> Result<Vec<ProcessKind>> {
        self.processes.iter().map(|s| ProcessKind::parse(s)).collect()
    }

    /// Norms outermost, so each norm forms one contiguous table block.
    pub fn plan(&self) -> Result<StatPlan> {
        if self.grid < 2 {
            return Err(Error::Config("plan.grid must be at least 2".into()));
        }
        let kinds = self.kinds()?;
        let keys = self
            .norms
            .iter()
            .flat_map(|&norm| kinds.iter().map(move |&kind| crate::bootstrap::StatKey { kind, norm }))
            .collect();
        Ok(StatPlan { keys, grid: GridSettings { exact_limit: self.exact_limit, grid: self.grid } })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapConfig {
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub burn_in: usize,
}

fn default_replicates() -> usize {
    199
}

fn default_alpha() -> f64 {
    0.05
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig { replicates: default_replicates(), alpha: default_alpha(), burn_in: 0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub scenarios: Vec<String>,
    pub replications: usize,
    #[serde(default = "default_mc_t")]
    pub t: usize,
}

fn default_mc_t() -> usize {
    100
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum CovariateConfig {
    Iid,
    Ar1 { coef: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    /// Name of a `[[model]]` entry.
    pub model: String,
    pub theta: Vec<f64>,
    pub t: usize,
    #[serde(default = "default_covariates")]
    pub covariates: CovariateConfig,
    pub presample: Option<u32>,
}

fn default_covariates() -> CovariateConfig {
    CovariateConfig::Iid
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: default_out() }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn require_seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| Error::Config("a seed is required (config `seed` or --seed)".into()))
    }

    pub fn model(&self, name: &str) -> Result<&ModelConfig> {
        self.models
            .iter()
            .find(|m| m.name == name)
            .ok_or_else(|| Error::Config(format!("no [[model]] named `{name}`")))
    }
}
