use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::LabeledExample;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnParams {
    /// Fixed neighbor count. When unset, `max(1, round(√n))` for `n` stored
    /// examples.
    pub neighbors: Option<usize>,
}

impl KnnParams {
    pub fn validate(&self) -> Result<()> {
        if self.neighbors == Some(0) {
            return Err(Error::Config("knn neighbors must be at least 1".into()));
        }
        Ok(())
    }
}

/// k-nearest-neighbor class-frequency estimate under Euclidean distance.
///
/// Equal distances are resolved in favor of the earlier stored example.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    // row-major n × d
    features: Vec<f64>,
    ones: Vec<bool>,
    dim: usize,
    params: KnnParams,
}

impl KnnModel {
    pub(crate) fn fit(examples: Vec<LabeledExample>, params: &KnnParams) -> Self {
        let dim = examples[0].dim();
        let mut features = Vec::with_capacity(examples.len() * dim);
        let mut ones = Vec::with_capacity(examples.len());
        for ex in examples {
            features.extend_from_slice(&ex.feature);
            ones.push(ex.label.is_one());
        }
        Self {
            features,
            ones,
            dim,
            params: params.clone(),
        }
    }

    pub(crate) fn update(&mut self, example: LabeledExample) {
        self.features.extend_from_slice(&example.feature);
        self.ones.push(example.label.is_one());
    }

    pub fn training_size(&self) -> usize {
        self.ones.len()
    }

    /// Neighbor count used for the current training size.
    pub fn neighbors(&self) -> usize {
        let n = self.training_size();
        let k = self
            .params
            .neighbors
            .unwrap_or_else(|| ((n as f64).sqrt().round() as usize).max(1));
        k.min(n)
    }

    pub(crate) fn raw_proba(&self, feature: &[f64]) -> f64 {
        let k = self.neighbors();
        let mut dist: Vec<(f64, usize)> = self
            .features
            .chunks_exact(self.dim)
            .enumerate()
            .map(|(i, row)| {
                let d2 = row
                    .iter()
                    .zip(feature)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>();
                (d2, i)
            })
            .collect();
        let by_key = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < dist.len() {
            dist.select_nth_unstable_by(k - 1, by_key);
        }
        let hits = dist[..k].iter().filter(|&&(_, i)| self.ones[i]).count();
        hits as f64 / k as f64
    }
}
