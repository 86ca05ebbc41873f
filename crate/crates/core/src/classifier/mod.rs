//! Class-probability predictors `Q(z | s)`.
//!
//! Every model follows the prequential contract: the prediction used for the
//! `i`-th queried label comes from a model trained on the initialization set
//! and the first `i - 1` queried pairs only. The engine checks this through
//! [`Classifier::training_size`].
//!
//! Outputs are clipped into `[ε, 1 - ε]` and the class-zero probability is
//! derived as `1 - p1`, so the two probabilities always sum to one.

mod knn;
mod logistic;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{Label, LabeledExample};

pub use knn::{KnnModel, KnnParams};
pub use logistic::{LogisticModel, LogisticParams};

/// Default probability floor.
pub const DEFAULT_CLIP_EPSILON: f64 = 1e-3;

/// Predicted class probabilities for one feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassProbs {
    pub zero: f64,
    pub one: f64,
}

impl ClassProbs {
    /// Builds the pair from a clipped class-one probability.
    pub fn from_one(one: f64) -> Self {
        Self {
            zero: 1.0 - one,
            one,
        }
    }

    pub fn of(&self, label: Label) -> f64 {
        match label {
            Label::Zero => self.zero,
            Label::One => self.one,
        }
    }
}

/// A trained class-probability predictor.
pub trait Classifier {
    /// Feature dimension the model expects.
    fn dim(&self) -> usize;

    /// Clipped `Q(Z = 1 | s)`.
    fn predict_proba(&self, feature: &[f64]) -> Result<f64>;

    fn predict(&self, feature: &[f64]) -> Result<ClassProbs> {
        self.predict_proba(feature).map(ClassProbs::from_one)
    }

    /// Adds one labeled example and refits.
    fn update(&mut self, example: &LabeledExample) -> Result<()>;

    /// Initialization examples plus number of updates so far.
    fn training_size(&self) -> usize;
}

/// Something that turns an initialization set into a [`Classifier`].
pub trait ClassifierFactory {
    type Model: Classifier;

    fn fit(&self, examples: &[LabeledExample]) -> Result<Self::Model>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Logistic,
    Knn,
}

impl std::fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ClassifierKind::Logistic => "logistic",
            ClassifierKind::Knn => "knn",
        })
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(ClassifierKind::Logistic),
            "knn" => Ok(ClassifierKind::Knn),
            other => Err(Error::Config(format!("unknown classifier kind `{other}`"))),
        }
    }
}

/// Classifier configuration block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub kind: ClassifierKind,
    pub logistic: LogisticParams,
    pub knn: KnnParams,
    pub clip_epsilon: f64,
    /// z-score features with statistics of the initialization set.
    pub standardize: bool,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            kind: ClassifierKind::Logistic,
            logistic: LogisticParams::default(),
            knn: KnnParams::default(),
            clip_epsilon: DEFAULT_CLIP_EPSILON,
            standardize: false,
        }
    }
}

impl ClassifierConfig {
    pub fn logistic() -> Self {
        Self::default()
    }

    pub fn knn() -> Self {
        Self {
            kind: ClassifierKind::Knn,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 0.5) {
            return Err(Error::Config(format!(
                "clip_epsilon must lie in (0, 0.5), got {}",
                self.clip_epsilon
            )));
        }
        self.logistic.validate()?;
        self.knn.validate()
    }
}

impl ClassifierFactory for ClassifierConfig {
    type Model = ClassifierModel;

    fn fit(&self, examples: &[LabeledExample]) -> Result<ClassifierModel> {
        ClassifierModel::fit(examples, self)
    }
}

/// Per-coordinate z-scoring fitted once on the initialization set.
#[derive(Debug, Clone, PartialEq)]
struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    fn fit(examples: &[LabeledExample]) -> Self {
        let d = examples[0].dim();
        let n = examples.len() as f64;
        let mut mean = vec![0.0; d];
        for ex in examples {
            for (m, x) in mean.iter_mut().zip(&ex.feature) {
                *m += x / n;
            }
        }
        let mut var = vec![0.0; d];
        for ex in examples {
            for ((v, x), m) in var.iter_mut().zip(&ex.feature).zip(&mean) {
                *v += (x - m) * (x - m) / n;
            }
        }
        let scale = var
            .into_iter()
            .map(|v| if v > 0.0 { v.sqrt() } else { 1.0 })
            .collect();
        Self { mean, scale }
    }

    fn apply(&self, feature: &[f64]) -> Vec<f64> {
        feature
            .iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Inner {
    Logistic(LogisticModel),
    Knn(KnnModel),
}

/// A fitted logistic or KNN model with clipping and optional standardization.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    inner: Inner,
    scaler: Option<Standardizer>,
    clip_epsilon: f64,
    dim: usize,
}

pub(crate) fn check_examples(examples: &[LabeledExample]) -> Result<usize> {
    let first = examples.first().ok_or_else(|| {
        Error::Initialization("cannot fit a classifier on an empty example set".into())
    })?;
    let d = first.dim();
    if d == 0 {
        return Err(Error::data("features must have at least one coordinate"));
    }
    for (i, ex) in examples.iter().enumerate() {
        if ex.dim() != d {
            return Err(Error::data(format!(
                "example {i} has dimension {} but the first has {d}",
                ex.dim()
            )));
        }
    }
    Ok(d)
}

impl ClassifierModel {
    pub fn fit(examples: &[LabeledExample], config: &ClassifierConfig) -> Result<Self> {
        config.validate()?;
        let dim = check_examples(examples)?;
        let scaler = config.standardize.then(|| Standardizer::fit(examples));
        let scaled: Vec<LabeledExample> = match &scaler {
            Some(s) => examples
                .iter()
                .map(|ex| LabeledExample::new(s.apply(&ex.feature), ex.label))
                .collect(),
            None => examples.to_vec(),
        };
        let inner = match config.kind {
            ClassifierKind::Logistic => {
                Inner::Logistic(LogisticModel::fit(scaled, &config.logistic))
            }
            ClassifierKind::Knn => Inner::Knn(KnnModel::fit(scaled, &config.knn)),
        };
        Ok(Self {
            inner,
            scaler,
            clip_epsilon: config.clip_epsilon,
            dim,
        })
    }

    pub fn kind(&self) -> ClassifierKind {
        match self.inner {
            Inner::Logistic(_) => ClassifierKind::Logistic,
            Inner::Knn(_) => ClassifierKind::Knn,
        }
    }

    pub fn as_logistic(&self) -> Option<&LogisticModel> {
        match &self.inner {
            Inner::Logistic(m) => Some(m),
            Inner::Knn(_) => None,
        }
    }

    pub fn as_knn(&self) -> Option<&KnnModel> {
        match &self.inner {
            Inner::Knn(m) => Some(m),
            Inner::Logistic(_) => None,
        }
    }

    pub fn clip_epsilon(&self) -> f64 {
        self.clip_epsilon
    }

    fn check_dim(&self, feature: &[f64]) -> Result<()> {
        if feature.len() != self.dim {
            return Err(Error::data(format!(
                "feature has dimension {} but the model expects {}",
                feature.len(),
                self.dim
            )));
        }
        Ok(())
    }

    fn clip(&self, p: f64) -> f64 {
        p.clamp(self.clip_epsilon, 1.0 - self.clip_epsilon)
    }

    fn raw(&self, feature: &[f64]) -> f64 {
        match &self.inner {
            Inner::Logistic(m) => m.raw_proba(feature),
            Inner::Knn(m) => m.raw_proba(feature),
        }
    }
}

impl Classifier for ClassifierModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn predict_proba(&self, feature: &[f64]) -> Result<f64> {
        self.check_dim(feature)?;
        let p = match &self.scaler {
            Some(s) => self.raw(&s.apply(feature)),
            None => self.raw(feature),
        };
        Ok(self.clip(p))
    }

    fn update(&mut self, example: &LabeledExample) -> Result<()> {
        self.check_dim(&example.feature)?;
        let example = match &self.scaler {
            Some(s) => LabeledExample::new(s.apply(&example.feature), example.label),
            None => example.clone(),
        };
        match &mut self.inner {
            Inner::Logistic(m) => m.update(example),
            Inner::Knn(m) => m.update(example),
        }
        Ok(())
    }

    fn training_size(&self) -> usize {
        match &self.inner {
            Inner::Logistic(m) => m.training_size(),
            Inner::Knn(m) => m.training_size(),
        }
    }
}
