use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::LabeledExample;

/// Full-batch gradient descent settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticParams {
    /// Epochs run from the zero model at initialization.
    pub fit_epochs: usize,
    /// Epochs run, warm-started, after every appended example.
    pub update_epochs: usize,
    pub step_size: f64,
    /// L2 penalty on the weights (not the bias).
    pub l2: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            fit_epochs: 20,
            update_epochs: 20,
            step_size: 0.1,
            l2: 0.0,
        }
    }
}

impl LogisticParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size.is_finite() && self.step_size >= 0.0) {
            return Err(Error::Config(format!(
                "logistic step_size must be finite and non-negative, got {}",
                self.step_size
            )));
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return Err(Error::Config(format!(
                "logistic l2 must be finite and non-negative, got {}",
                self.l2
            )));
        }
        Ok(())
    }
}

pub(crate) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// Logistic regression `σ(w·s + b)`, refit by warm-started gradient descent
/// over every example seen so far.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    weights: Vec<f64>,
    bias: f64,
    // row-major n × d
    features: Vec<f64>,
    targets: Vec<f64>,
    params: LogisticParams,
    // scratch buffer for the weight gradient
    grad: Vec<f64>,
}

impl LogisticModel {
    pub(crate) fn fit(examples: Vec<LabeledExample>, params: &LogisticParams) -> Self {
        let d = examples[0].dim();
        let mut features = Vec::with_capacity(examples.len() * d);
        let mut targets = Vec::with_capacity(examples.len());
        for ex in examples {
            features.extend_from_slice(&ex.feature);
            targets.push(f64::from(ex.label.as_u8()));
        }
        let mut model = Self {
            weights: vec![0.0; d],
            bias: 0.0,
            features,
            targets,
            params: params.clone(),
            grad: vec![0.0; d],
        };
        model.descend(params.fit_epochs);
        model
    }

    pub(crate) fn update(&mut self, example: LabeledExample) {
        self.features.extend_from_slice(&example.feature);
        self.targets.push(f64::from(example.label.as_u8()));
        self.descend(self.params.update_epochs);
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn training_size(&self) -> usize {
        self.targets.len()
    }

    /// `w·s + b`.
    pub fn decision(&self, feature: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(feature)
            .fold(self.bias, |acc, (w, x)| acc + w * x)
    }

    pub(crate) fn raw_proba(&self, feature: &[f64]) -> f64 {
        sigmoid(self.decision(feature))
    }

    fn descend(&mut self, epochs: usize) {
        let d = self.weights.len();
        let n = self.targets.len() as f64;
        let step = self.params.step_size;
        for _ in 0..epochs {
            self.grad.iter_mut().for_each(|g| *g = 0.0);
            let mut grad_bias = 0.0;
            for (row, &y) in self.features.chunks_exact(d).zip(&self.targets) {
                let t = self
                    .weights
                    .iter()
                    .zip(row)
                    .fold(self.bias, |acc, (w, x)| acc + w * x);
                let r = sigmoid(t) - y;
                grad_bias += r;
                for (g, x) in self.grad.iter_mut().zip(row) {
                    *g += r * x;
                }
            }
            for (w, g) in self.weights.iter_mut().zip(&self.grad) {
                *w -= step * (g / n + self.params.l2 * *w);
            }
            self.bias -= step * grad_bias / n;
        }
    }
}
