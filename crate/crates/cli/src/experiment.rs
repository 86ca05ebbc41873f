//! Grid execution and aggregation.
//!
//! Every (parameter, prior) cell gets its own seed, and all classifier and
//! strategy combinations in the cell replay the same pools. Each replication
//! runs once at the largest budget; smaller budgets are read off its prefix.

use activetest::classifier::ClassifierKind;
use activetest::engine::{run_batch_outcomes, split_seed, RunRecord};
use activetest::theory::ttest::welch_t_test;
use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

use crate::config::{is_null, ExperimentConfig};

/// One replication as written to `raw.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRun {
    pub scenario: String,
    pub param: f64,
    pub prior: f64,
    pub classifier: ClassifierKind,
    pub strategy: String,
    pub replication: usize,
    /// Present when the run completed.
    pub record: Option<RunRecord>,
    /// Present when the run aborted.
    pub error: Option<String>,
}

/// The grid layout needed to aggregate raw runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub scenario: String,
    pub param_name: String,
    pub params: Vec<f64>,
    pub priors: Vec<f64>,
    pub classifiers: Vec<ClassifierKind>,
    pub strategies: Vec<String>,
    pub baseline: Option<String>,
    pub budgets: Vec<usize>,
    pub replications: usize,
    pub base_seed: u64,
    pub n0: usize,
    pub alpha: f64,
}

impl Manifest {
    pub fn from_config(config: &ExperimentConfig) -> Self {
        Self {
            scenario: config.scenario.kind().into(),
            param_name: config.scenario.param_name().into(),
            params: config.scenario.params().to_vec(),
            priors: config.priors.clone(),
            classifiers: config.classifiers.clone(),
            strategies: config
                .strategies
                .iter()
                .map(|s| s.as_str().into())
                .collect(),
            baseline: config.baseline().map(|s| s.as_str().into()),
            budgets: config.budgets.clone(),
            replications: config.replications,
            base_seed: config.base_seed,
            n0: config.n0,
            alpha: config.alpha,
        }
    }
}

/// Runs the whole grid, reporting one line per finished cell.
pub fn run_experiment(
    config: &ExperimentConfig,
    mut progress: impl FnMut(&str),
) -> Result<(Manifest, Vec<RawRun>)> {
    let manifest = Manifest::from_config(config);
    let mut raw = Vec::new();
    let mut cell = 0u64;
    for &param in config.scenario.params() {
        for &prior in &config.priors {
            let seed = split_seed(config.base_seed, cell);
            cell += 1;
            let scenario = config.scenario.build(param, prior);
            for &classifier in &config.classifiers {
                for &strategy in &config.strategies {
                    let template = config.run_config(classifier, strategy);
                    let outcomes =
                        run_batch_outcomes(&template, &scenario, config.replications, seed);
                    let mut failures = 0;
                    for (replication, outcome) in outcomes.into_iter().enumerate() {
                        let (record, error) = match outcome {
                            Ok(r) => (Some(r), None),
                            Err(e) => {
                                failures += 1;
                                (None, Some(e.to_string()))
                            }
                        };
                        raw.push(RawRun {
                            scenario: manifest.scenario.clone(),
                            param,
                            prior,
                            classifier,
                            strategy: strategy.as_str().into(),
                            replication,
                            record,
                            error,
                        });
                    }
                    let mut line = format!(
                        "{}={param} prior={prior} {classifier} {}: {} runs",
                        manifest.param_name,
                        strategy.as_str(),
                        config.replications
                    );
                    if failures > 0 {
                        line += &format!(", {failures} failed and excluded");
                    }
                    progress(&line);
                }
            }
        }
    }
    Ok((manifest, raw))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub scenario: String,
    pub param: f64,
    pub prior: f64,
    pub classifier: ClassifierKind,
    pub strategy: String,
    pub budget: usize,
    /// Completed runs.
    pub runs: usize,
    pub failures: usize,
    pub rejections: usize,
    /// `type_i` under a null scenario, `type_ii` otherwise.
    pub error_kind: &'static str,
    pub error_rate: f64,
    /// Labels spent over all completed runs, initialization included.
    pub labels_mean: f64,
    pub labels_sd: Option<f64>,
    /// Labels spent over rejecting runs only.
    pub reject_labels_mean: Option<f64>,
    pub reject_labels_sd: Option<f64>,
    /// Welch p-value of the label counts against the baseline strategy.
    pub t_test_p: Option<f64>,
}

pub const SUMMARY_HEADER: [&str; 16] = [
    "scenario",
    "param",
    "prior",
    "classifier",
    "strategy",
    "budget",
    "runs",
    "failures",
    "rejections",
    "error_kind",
    "error_rate",
    "labels_mean",
    "labels_sd",
    "reject_labels_mean",
    "reject_labels_sd",
    "t_test_p",
];

fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map(|x| format!("{x:.digits$}")).unwrap_or_default()
}

impl SummaryRow {
    pub fn fields(&self) -> Vec<String> {
        vec![
            self.scenario.clone(),
            self.param.to_string(),
            self.prior.to_string(),
            self.classifier.to_string(),
            self.strategy.clone(),
            self.budget.to_string(),
            self.runs.to_string(),
            self.failures.to_string(),
            self.rejections.to_string(),
            self.error_kind.to_string(),
            format!("{:.4}", self.error_rate),
            format!("{:.3}", self.labels_mean),
            fmt_opt(self.labels_sd, 3),
            fmt_opt(self.reject_labels_mean, 3),
            fmt_opt(self.reject_labels_sd, 3),
            self.t_test_p
                .map(|p| format!("{p:.6e}"))
                .unwrap_or_default(),
        ]
    }
}

fn mean_sd(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let sd = (xs.len() > 1)
        .then(|| (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt());
    (Some(mean), sd)
}

/// Truncated records of one (cell, classifier, strategy) at `budget`.
fn records_at<'a>(
    raw: &'a [RawRun],
    param: f64,
    prior: f64,
    classifier: ClassifierKind,
    strategy: &'a str,
) -> impl Iterator<Item = &'a RawRun> {
    raw.iter().filter(move |r| {
        r.param == param && r.prior == prior && r.classifier == classifier && r.strategy == strategy
    })
}

fn labels_at(runs: &[&RawRun], budget: usize) -> Result<Vec<RunRecord>> {
    runs.iter()
        .filter_map(|r| r.record.as_ref())
        .map(|r| Ok(r.truncate_to_budget(budget)?))
        .collect()
}

/// Aggregates raw runs in grid order. A pure function of its inputs.
pub fn summarize(manifest: &Manifest, raw: &[RawRun]) -> Result<Vec<SummaryRow>> {
    let mut rows = Vec::new();
    for &param in &manifest.params {
        let null = is_null(&manifest.scenario, param);
        for &prior in &manifest.priors {
            for &classifier in &manifest.classifiers {
                let baseline: Option<Vec<&RawRun>> = manifest
                    .baseline
                    .as_ref()
                    .map(|b| records_at(raw, param, prior, classifier, b).collect());
                for strategy in &manifest.strategies {
                    let runs: Vec<&RawRun> =
                        records_at(raw, param, prior, classifier, strategy).collect();
                    if runs.is_empty() {
                        continue;
                    }
                    let failures = runs.iter().filter(|r| r.record.is_none()).count();
                    for &budget in &manifest.budgets {
                        let recs = labels_at(&runs, budget)?;
                        if recs.is_empty() {
                            bail!(
                                "every run failed for {}={param} prior={prior} {classifier} {strategy}",
                                manifest.param_name
                            );
                        }
                        let labels: Vec<f64> =
                            recs.iter().map(|r| r.labels_spent_total as f64).collect();
                        let rejecting: Vec<f64> = recs
                            .iter()
                            .filter(|r| r.rejected())
                            .map(|r| r.labels_spent_total as f64)
                            .collect();
                        let rejections = rejecting.len();
                        let rate = rejections as f64 / recs.len() as f64;
                        let (labels_mean, labels_sd) = mean_sd(&labels);
                        let (reject_labels_mean, reject_labels_sd) = mean_sd(&rejecting);
                        let t_test_p = match (&baseline, &manifest.baseline) {
                            (Some(base), Some(name)) if name != strategy => {
                                let other: Vec<f64> = labels_at(base, budget)?
                                    .iter()
                                    .map(|r| r.labels_spent_total as f64)
                                    .collect();
                                welch_t_test(&labels, &other).ok().map(|t| t.p_value)
                            }
                            _ => None,
                        };
                        rows.push(SummaryRow {
                            scenario: manifest.scenario.clone(),
                            param,
                            prior,
                            classifier,
                            strategy: strategy.clone(),
                            budget,
                            runs: recs.len(),
                            failures,
                            rejections,
                            error_kind: if null { "type_i" } else { "type_ii" },
                            error_rate: if null { rate } else { 1.0 - rate },
                            labels_mean: labels_mean.expect("non-empty"),
                            labels_sd,
                            reject_labels_mean,
                            reject_labels_sd,
                            t_test_p,
                        });
                    }
                }
            }
        }
    }
    Ok(rows)
}
