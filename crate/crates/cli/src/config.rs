//! Experiment grid configuration (TOML).

use std::path::Path;

use activetest::classifier::{ClassifierConfig, ClassifierKind, KnnParams, LogisticParams};
use activetest::data::{GaussianScenario, MixtureScenario, Scenario};
use activetest::engine::{RunConfig, DEFAULT_N0};
use activetest::query::{PartitionConfig, StrategyConfig};
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub base_seed: u64,
    pub replications: usize,
    #[serde(default = "default_n0")]
    pub n0: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub budgets: Vec<usize>,
    pub priors: Vec<f64>,
    pub strategies: Vec<StrategyName>,
    pub classifiers: Vec<ClassifierKind>,
    /// Strategy whose label counts the others are t-tested against.
    #[serde(default)]
    pub baseline: Option<StrategyName>,
    pub scenario: ScenarioGrid,
    #[serde(default)]
    pub classifier: ClassifierSettings,
    #[serde(default)]
    pub partition: Option<PartitionConfig>,
}

fn default_n0() -> usize {
    DEFAULT_N0
}

fn default_alpha() -> f64 {
    0.05
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyName {
    Bimodal,
    Random,
    Partition,
}

impl StrategyName {
    pub fn as_str(self) -> &'static str {
        match self {
            StrategyName::Bimodal => "bimodal",
            StrategyName::Random => "random",
            StrategyName::Partition => "partition",
        }
    }
}

/// Scenario family and the parameter values swept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ScenarioGrid {
    Gaussian {
        deltas: Vec<f64>,
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default = "default_pool")]
        pool_size: usize,
    },
    Mixture {
        mixture_ratios: Vec<f64>,
        #[serde(default)]
        means: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        sd: Option<f64>,
        #[serde(default = "default_pool")]
        pool_size: usize,
    },
}

fn default_dim() -> usize {
    2
}

fn default_pool() -> usize {
    2000
}

impl ScenarioGrid {
    pub fn kind(&self) -> &'static str {
        match self {
            ScenarioGrid::Gaussian { .. } => "gaussian",
            ScenarioGrid::Mixture { .. } => "mixture",
        }
    }

    pub fn param_name(&self) -> &'static str {
        match self {
            ScenarioGrid::Gaussian { .. } => "delta",
            ScenarioGrid::Mixture { .. } => "mixture_ratio",
        }
    }

    pub fn params(&self) -> &[f64] {
        match self {
            ScenarioGrid::Gaussian { deltas, .. } => deltas,
            ScenarioGrid::Mixture { mixture_ratios, .. } => mixture_ratios,
        }
    }

    pub fn pool_size(&self) -> usize {
        match self {
            ScenarioGrid::Gaussian { pool_size, .. } | ScenarioGrid::Mixture { pool_size, .. } => {
                *pool_size
            }
        }
    }

    pub fn build(&self, param: f64, prior0: f64) -> Scenario {
        match self {
            ScenarioGrid::Gaussian { dim, pool_size, .. } => Scenario::Gaussian(GaussianScenario {
                delta: param,
                prior0,
                dim: *dim,
                pool_size: *pool_size,
            }),
            ScenarioGrid::Mixture {
                means,
                sd,
                pool_size,
                ..
            } => {
                let base = MixtureScenario::default();
                Scenario::Mixture(MixtureScenario {
                    means: means.clone().unwrap_or(base.means),
                    sd: sd.unwrap_or(base.sd),
                    mixture_ratio: param,
                    prior0,
                    pool_size: *pool_size,
                })
            }
        }
    }
}

/// Whether a scenario parameter makes labels independent of features.
pub fn is_null(kind: &str, param: f64) -> bool {
    match kind {
        "gaussian" => param == 0.0,
        "mixture" => param == 1.0,
        _ => false,
    }
}

/// Classifier hyperparameters shared by every classifier kind in the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSettings {
    pub logistic: LogisticParams,
    pub knn: KnnParams,
    pub clip_epsilon: f64,
    pub standardize: bool,
}

impl Default for ClassifierSettings {
    fn default() -> Self {
        let c = ClassifierConfig::default();
        Self {
            logistic: c.logistic,
            knn: c.knn,
            clip_epsilon: c.clip_epsilon,
            standardize: c.standardize,
        }
    }
}

impl ClassifierSettings {
    pub fn config(&self, kind: ClassifierKind) -> ClassifierConfig {
        ClassifierConfig {
            kind,
            logistic: self.logistic.clone(),
            knn: self.knn.clone(),
            clip_epsilon: self.clip_epsilon,
            standardize: self.standardize,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn max_budget(&self) -> usize {
        self.budgets.iter().copied().max().unwrap_or(0)
    }

    /// The baseline strategy, if any: the configured one, else `random`
    /// when it is part of the grid.
    pub fn baseline(&self) -> Option<StrategyName> {
        self.baseline.or_else(|| {
            self.strategies
                .contains(&StrategyName::Random)
                .then_some(StrategyName::Random)
        })
    }

    pub fn strategy(&self, name: StrategyName) -> StrategyConfig {
        match name {
            StrategyName::Bimodal => StrategyConfig::Bimodal,
            StrategyName::Random => StrategyConfig::Random,
            StrategyName::Partition => StrategyConfig::Partition(
                self.partition
                    .clone()
                    .expect("validated: partition section present"),
            ),
        }
    }

    pub fn run_config(&self, classifier: ClassifierKind, strategy: StrategyName) -> RunConfig {
        RunConfig {
            n0: self.n0,
            nq: self.max_budget(),
            alpha: self.alpha,
            classifier: self.classifier.config(classifier),
            strategy: self.strategy(strategy),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            bail!("replications must be at least 1");
        }
        for (name, empty) in [
            ("budgets", self.budgets.is_empty()),
            ("priors", self.priors.is_empty()),
            ("strategies", self.strategies.is_empty()),
            ("classifiers", self.classifiers.is_empty()),
            ("scenario parameters", self.scenario.params().is_empty()),
        ] {
            if empty {
                bail!("{name} must not be empty");
            }
        }
        if let Some(b) = self.budgets.iter().find(|&&b| b <= self.n0) {
            bail!("budget {b} does not exceed n0 = {}", self.n0);
        }
        if self.max_budget() > self.scenario.pool_size() {
            bail!(
                "budget {} exceeds the pool size {}",
                self.max_budget(),
                self.scenario.pool_size()
            );
        }
        if self.strategies.contains(&StrategyName::Partition) && self.partition.is_none() {
            bail!("strategy `partition` needs a [partition] section");
        }
        if let Some(b) = self.baseline {
            if !self.strategies.contains(&b) {
                bail!("baseline `{}` is not among the strategies", b.as_str());
            }
        }
        for &prior in &self.priors {
            for &param in self.scenario.params() {
                let scenario = self.scenario.build(param, prior);
                for &c in &self.classifiers {
                    for &s in &self.strategies {
                        let run = self.run_config(c, s);
                        run.validate()?;
                        run.classifier.validate()?;
                        run.strategy.resolve(&scenario)?;
                    }
                }
                match &scenario {
                    Scenario::Gaussian(g) => g.validate()?,
                    Scenario::Mixture(m) => m.validate()?,
                    Scenario::Discrete(d) => d.validate()?,
                }
            }
        }
        Ok(())
    }
}
