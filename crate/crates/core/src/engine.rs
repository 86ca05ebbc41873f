//! The query–predict–decide loop and its replication harness.
//!
//! A run fits the classifier on `n0` uniformly drawn labels, then spends at
//! most `nq - n0` further labels. Each queried label is scored by the model
//! as it stood *before* that label was seen; the model is updated only when
//! the test continues.

use std::io::{BufRead, Write};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{Classifier, ClassifierConfig, ClassifierFactory};
use crate::data::{Oracle, Pool, Scenario};
use crate::error::{Error, Result};
use crate::label::{Label, LabeledExample};
use crate::query::{QueryMask, Strategy, StrategyConfig};
use crate::stat::{EProcessState, SignificanceLevel, Verdict};

/// Default number of initialization labels.
pub const DEFAULT_N0: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub n0: usize,
    /// Total label budget, initialization included.
    pub nq: usize,
    pub alpha: f64,
    pub classifier: ClassifierConfig,
    pub strategy: StrategyConfig,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n0: DEFAULT_N0,
            nq: 1000,
            alpha: 0.05,
            classifier: ClassifierConfig::default(),
            strategy: StrategyConfig::Bimodal,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<SignificanceLevel> {
        if self.n0 == 0 {
            return Err(Error::Config("n0 must be at least 1".into()));
        }
        if self.n0 >= self.nq {
            return Err(Error::Config(format!(
                "n0 = {} must be below the budget nq = {}",
                self.n0, self.nq
            )));
        }
        SignificanceLevel::new(self.alpha)
    }

    /// Number of post-initialization queries.
    pub fn query_budget(&self) -> usize {
        self.nq - self.n0
    }
}

/// Outcome of one test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub verdict: Verdict,
    /// Labels spent after initialization.
    pub stopping_step: usize,
    pub labels_spent_total: usize,
    /// `log w_n` for `n = 1..=stopping_step`.
    pub trajectory: Vec<f64>,
    pub seed: u64,
    pub n0: usize,
    pub budget: usize,
}

impl RunRecord {
    pub fn rejected(&self) -> bool {
        self.verdict == Verdict::Reject
    }

    pub fn final_log_w(&self) -> Option<f64> {
        self.trajectory.last().copied()
    }

    /// The record the same run would have produced under a smaller budget.
    ///
    /// Selections, predictions and statistic values up to a step do not
    /// depend on the budget, and the budget only enters the decision through
    /// the Retain branch, so a prefix of a long run is a short run.
    pub fn truncate_to_budget(&self, budget: usize) -> Result<RunRecord> {
        if budget <= self.n0 || budget > self.budget {
            return Err(Error::Config(format!(
                "cannot truncate a run with n0 = {} and budget {} to {budget}",
                self.n0, self.budget
            )));
        }
        let limit = budget - self.n0;
        if self.rejected() && self.stopping_step <= limit {
            return Ok(RunRecord {
                budget,
                ..self.clone()
            });
        }
        if self.trajectory.len() < limit {
            return Err(Error::Contract(format!(
                "a retained run of {} steps cannot be truncated to {limit}",
                self.trajectory.len()
            )));
        }
        Ok(RunRecord {
            verdict: Verdict::Retain,
            stopping_step: limit,
            labels_spent_total: budget,
            trajectory: self.trajectory[..limit].to_vec(),
            seed: self.seed,
            n0: self.n0,
            budget,
        })
    }

    pub fn to_json_line(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::data(e.to_string()))
    }
}

/// Writes one JSON object per line.
pub fn write_jsonl<W: Write, T: Serialize>(mut writer: W, items: &[T]) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut writer, item).map_err(|e| Error::data(e.to_string()))?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads one JSON object per non-empty line.
pub fn read_jsonl<R: BufRead, T: for<'de> Deserialize<'de>>(reader: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::data_at(i + 1, e.to_string()))?);
    }
    Ok(out)
}

/// Everything observable at one step, reported before the model update.
#[derive(Debug, Clone, PartialEq)]
pub struct StepEvent {
    /// 1-based post-initialization step.
    pub step: usize,
    pub index: usize,
    pub label: Label,
    /// Class mode the bimodal coin targeted.
    pub mode: Option<Label>,
    /// Partition cell in use.
    pub cell: Option<usize>,
    pub q_zero: f64,
    pub q_one: f64,
    /// Probability assigned to the observed label.
    pub q_observed: f64,
    /// Training size of the model that produced the prediction.
    pub training_size: usize,
    pub log_w: f64,
    pub verdict: Verdict,
}

/// Seed of the `index`-th child of `base`: the splitmix64 output function
/// applied to `base + (index + 1)·γ`.
pub fn split_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Run stream for `seed`; stream 0 drives selections.
pub fn run_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Pool stream for `seed`, independent of the run stream.
pub fn pool_rng(seed: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(1);
    r
}

/// Runs one test with the configured classifier.
pub fn run_test<O: Oracle + ?Sized>(
    config: &RunConfig,
    pool: &Pool,
    oracle: &mut O,
) -> Result<RunRecord> {
    run_test_with(config, &config.classifier, pool, oracle, |_| {})
}

/// Runs one test with an arbitrary classifier factory, reporting every step.
pub fn run_test_with<F, O, V>(
    config: &RunConfig,
    factory: &F,
    pool: &Pool,
    oracle: &mut O,
    mut observer: V,
) -> Result<RunRecord>
where
    F: ClassifierFactory + ?Sized,
    O: Oracle + ?Sized,
    V: FnMut(&StepEvent),
{
    let alpha = config.validate()?;
    if pool.len() < config.nq {
        return Err(Error::PoolExhausted(format!(
            "pool of {} items cannot fund a budget of {}",
            pool.len(),
            config.nq
        )));
    }
    let mut rng = run_rng(config.seed);
    let mut mask = QueryMask::new(pool.len());

    let mut init = Vec::with_capacity(config.n0);
    let mut examples = Vec::with_capacity(config.n0);
    for i in sample(&mut rng, pool.len(), config.n0).into_iter() {
        let z = oracle.label(i)?;
        mask.mark(i)?;
        init.push((i, z));
        examples.push(LabeledExample::new(pool.feature(i).to_vec(), z));
    }
    let mut model = factory.fit(&examples)?;
    let mut strategy = Strategy::build(&config.strategy, pool, &init)?;

    let limit = config.query_budget();
    let mut state = EProcessState::new();
    let mut trajectory = Vec::with_capacity(limit);
    for n in 1..=limit {
        let selection = strategy.select(pool, &mask, &model, &mut rng)?;
        let index = selection.index;
        let z = oracle.label(index)?;
        mask.mark(index)?;

        let training_size = model.training_size();
        if training_size != config.n0 + n - 1 {
            return Err(Error::Contract(format!(
                "step {n} scored by a model trained on {training_size} labels"
            )));
        }
        let probs = model.predict(pool.feature(index))?;
        let q = probs.of(z);
        state = state.push(z, q)?;
        trajectory.push(state.log_w());
        let verdict = state.decide(alpha, (limit - n) as u64);
        observer(&StepEvent {
            step: n,
            index,
            label: z,
            mode: selection.mode,
            cell: strategy.chosen_cell(),
            q_zero: probs.zero,
            q_one: probs.one,
            q_observed: q,
            training_size,
            log_w: state.log_w(),
            verdict,
        });
        if verdict.is_terminal() {
            return Ok(RunRecord {
                verdict,
                stopping_step: n,
                labels_spent_total: config.n0 + n,
                trajectory,
                seed: config.seed,
                n0: config.n0,
                budget: config.nq,
            });
        }
        model.update(&LabeledExample::new(pool.feature(index).to_vec(), z))?;
    }
    unreachable!("the last step always yields a terminal verdict")
}

/// Replication `index` of a batch: a fresh pool and a run, both seeded from
/// `split_seed(base_seed, index)`.
pub fn run_replication(
    template: &RunConfig,
    scenario: &Scenario,
    base_seed: u64,
    index: u64,
) -> Result<RunRecord> {
    let seed = split_seed(base_seed, index);
    let pool = scenario.generate(&mut pool_rng(seed))?;
    let config = RunConfig {
        seed,
        strategy: template.strategy.resolve(scenario)?,
        ..template.clone()
    };
    run_test(&config, &pool, &mut pool.oracle())
}

/// Every replication's outcome, in replication order.
pub fn run_batch_outcomes(
    template: &RunConfig,
    scenario: &Scenario,
    replications: usize,
    base_seed: u64,
) -> Vec<Result<RunRecord>> {
    (0..replications as u64)
        .into_par_iter()
        .map(|r| run_replication(template, scenario, base_seed, r))
        .collect()
}

/// Runs `replications` independent tests; fails on the first failed run.
pub fn run_batch(
    template: &RunConfig,
    scenario: &Scenario,
    replications: usize,
    base_seed: u64,
) -> Result<Vec<RunRecord>> {
    if replications == 0 {
        return Err(Error::Config("replications must be at least 1".into()));
    }
    template.validate()?;
    run_batch_outcomes(template, scenario, replications, base_seed)
        .into_iter()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::ClassProbs;
    use crate::data::GaussianScenario;
    use crate::stat::log_prior_numerator;

    /// Predicts `q` for whatever label the pool item carries; the oracle
    /// labels are encoded in the single feature coordinate.
    struct Frozen {
        q: f64,
        size: usize,
    }

    impl Classifier for Frozen {
        fn dim(&self) -> usize {
            1
        }
        fn predict_proba(&self, feature: &[f64]) -> Result<f64> {
            Ok(if feature[0] > 0.5 {
                self.q
            } else {
                1.0 - self.q
            })
        }
        fn update(&mut self, _: &LabeledExample) -> Result<()> {
            self.size += 1;
            Ok(())
        }
        fn training_size(&self) -> usize {
            self.size
        }
    }

    struct FrozenFactory(f64);

    impl ClassifierFactory for FrozenFactory {
        type Model = Frozen;
        fn fit(&self, examples: &[LabeledExample]) -> Result<Frozen> {
            Ok(Frozen {
                q: self.0,
                size: examples.len(),
            })
        }
    }

    fn alternating_pool(n: usize) -> Pool {
        let labels: Vec<Label> = (0..n).map(|i| Label::from(i % 2 == 1)).collect();
        let features = labels.iter().map(|z| vec![f64::from(z.as_u8())]).collect();
        Pool::new(features, labels).unwrap()
    }

    fn config(nq: usize, strategy: StrategyConfig) -> RunConfig {
        RunConfig {
            nq,
            strategy,
            seed: 7,
            ..RunConfig::default()
        }
    }

    #[test]
    fn split_seed_is_a_fixed_function() {
        // splitmix64 outputs for state 0 advanced once and twice
        assert_eq!(split_seed(0, 0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(split_seed(0, 1), 0x6E78_9E6A_A1B9_65F4);
        assert_ne!(split_seed(1, 0), split_seed(0, 0));
    }

    #[test]
    fn confident_classifier_rejects_on_the_predicted_step() {
        let pool = alternating_pool(200);
        let mut events = Vec::new();
        let rec = run_test_with(
            &config(100, StrategyConfig::Random),
            &FrozenFactory(0.9),
            &pool,
            &mut pool.oracle(),
            |e| events.push(e.clone()),
        )
        .unwrap();
        // log w_n = log_prior_numerator(k, n) - n ln 0.9 first drops below ln 0.05
        let mut expected = 0;
        for n in 1..=90u64 {
            let k = events[..n as usize]
                .iter()
                .filter(|e| e.label.is_one())
                .count() as u64;
            let lw = log_prior_numerator(k, n).unwrap() - n as f64 * 0.9f64.ln();
            assert!((lw - events[n as usize - 1].log_w).abs() < 1e-12);
            if lw <= 0.05f64.ln() {
                expected = n as usize;
                break;
            }
        }
        assert_eq!(rec.verdict, Verdict::Reject);
        assert_eq!(rec.stopping_step, expected);
        assert_eq!(rec.labels_spent_total, 10 + expected);
        assert!(rec.final_log_w().unwrap() <= 0.05f64.ln());
    }

    #[test]
    fn balanced_labels_at_point_nine_reject_at_step_six() {
        // Three ones and three zeros in six steps: ln w = 6 ln 0.5 - 6 ln 0.9.
        let lw = log_prior_numerator(3, 6).unwrap() - 6.0 * 0.9f64.ln();
        assert!((lw - (6.0 * 0.5f64.ln() - 6.0 * 0.9f64.ln())).abs() < 1e-12);
        assert!((lw - -3.526_719_989).abs() < 1e-6);
        assert!(lw <= 0.05f64.ln());
        let lw5 = log_prior_numerator(3, 5).unwrap() - 5.0 * 0.9f64.ln();
        assert!(lw5 > 0.05f64.ln());
    }

    #[test]
    fn uninformative_classifier_never_rejects() {
        let pool = alternating_pool(100);
        let mut events = Vec::new();
        let rec = run_test_with(
            &config(60, StrategyConfig::Random),
            &FrozenFactory(0.5),
            &pool,
            &mut pool.oracle(),
            |e| events.push(e.clone()),
        )
        .unwrap();
        assert_eq!(rec.verdict, Verdict::Retain);
        assert_eq!(rec.stopping_step, 50);
        assert_eq!(rec.labels_spent_total, 60);
        assert!(rec.trajectory.iter().all(|&w| w >= -1e-12));
        assert_eq!(events.len(), 50);
    }

    #[test]
    fn steps_are_prequential_and_queries_unique() {
        let scenario = GaussianScenario::new(0.3, 0.5);
        let pool = scenario.generate(&mut pool_rng(3)).unwrap();
        for strategy in [StrategyConfig::Bimodal, StrategyConfig::Random] {
            for classifier in [ClassifierConfig::logistic(), ClassifierConfig::knn()] {
                let cfg = RunConfig {
                    nq: 150,
                    classifier: classifier.clone(),
                    strategy: strategy.clone(),
                    seed: 11,
                    ..RunConfig::default()
                };
                let mut seen = std::collections::HashSet::new();
                let mut steps = 0;
                let rec = run_test_with(&cfg, &classifier, &pool, &mut pool.oracle(), |e| {
                    steps += 1;
                    assert_eq!(e.step, steps);
                    assert_eq!(e.training_size, cfg.n0 + e.step - 1);
                    assert!(seen.insert(e.index));
                    assert!((e.q_zero + e.q_one - 1.0).abs() <= f64::EPSILON);
                    assert_eq!(e.mode.is_some(), strategy == StrategyConfig::Bimodal);
                })
                .unwrap();
                assert_eq!(steps, rec.stopping_step);
                assert_eq!(rec.labels_spent_total, cfg.n0 + rec.stopping_step);
                assert!(rec.labels_spent_total <= cfg.nq);
            }
        }
    }

    #[test]
    fn pool_smaller_than_budget_is_refused() {
        let pool = alternating_pool(20);
        assert!(matches!(
            run_test(
                &config(30, StrategyConfig::Random),
                &pool,
                &mut pool.oracle()
            ),
            Err(Error::PoolExhausted(_))
        ));
    }

    #[test]
    fn invalid_configs_are_refused() {
        let pool = alternating_pool(20);
        let mut c = config(10, StrategyConfig::Random);
        assert!(matches!(
            run_test(&c, &pool, &mut pool.oracle()),
            Err(Error::Config(_))
        ));
        c.nq = 15;
        c.alpha = 1.0;
        assert!(run_test(&c, &pool, &mut pool.oracle()).is_err());
    }

    #[test]
    fn oracle_failures_abort_the_run() {
        struct Broken;
        impl Oracle for Broken {
            fn label(&mut self, _: usize) -> Result<Label> {
                Err(Error::Oracle("offline".into()))
            }
        }
        let pool = alternating_pool(50);
        assert!(matches!(
            run_test(&config(30, StrategyConfig::Random), &pool, &mut Broken),
            Err(Error::Oracle(_))
        ));
    }

    #[test]
    fn batch_is_deterministic_and_matches_single_runs() {
        let scenario = Scenario::Gaussian(GaussianScenario {
            pool_size: 300,
            ..GaussianScenario::new(0.5, 0.5)
        });
        let template = RunConfig {
            nq: 120,
            ..RunConfig::default()
        };
        let a = run_batch(&template, &scenario, 4, 99).unwrap();
        let b = run_batch(&template, &scenario, 4, 99).unwrap();
        assert_eq!(a, b);
        let one = run_batch(&template, &scenario, 1, 99).unwrap();
        assert_eq!(one[0], a[0]);
        let seed = split_seed(99, 0);
        let pool = scenario.generate(&mut pool_rng(seed)).unwrap();
        let direct = run_test(
            &RunConfig {
                seed,
                ..template.clone()
            },
            &pool,
            &mut pool.oracle(),
        )
        .unwrap();
        assert_eq!(direct, a[0]);
        assert!(matches!(
            run_batch(&template, &scenario, 0, 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn truncation_matches_a_run_at_the_smaller_budget() {
        let scenario = Scenario::Gaussian(GaussianScenario {
            pool_size: 500,
            ..GaussianScenario::new(0.25, 0.5)
        });
        for strategy in [StrategyConfig::Bimodal, StrategyConfig::Random] {
            let long = RunConfig {
                nq: 400,
                strategy,
                ..RunConfig::default()
            };
            let mut saw = [false; 2];
            for r in 0..12 {
                let full = run_replication(&long, &scenario, 5, r).unwrap();
                for budget in [20, 60, 150, 250, 400] {
                    let short = run_replication(
                        &RunConfig {
                            nq: budget,
                            ..long.clone()
                        },
                        &scenario,
                        5,
                        r,
                    )
                    .unwrap();
                    assert_eq!(full.truncate_to_budget(budget).unwrap(), short);
                    saw[short.rejected() as usize] = true;
                }
            }
            assert_eq!(saw, [true, true], "both outcomes should be exercised");
        }
    }

    #[test]
    fn truncation_rejects_bad_budgets() {
        let rec = RunRecord {
            verdict: Verdict::Retain,
            stopping_step: 20,
            labels_spent_total: 30,
            trajectory: vec![0.0; 20],
            seed: 0,
            n0: 10,
            budget: 30,
        };
        assert!(rec.truncate_to_budget(10).is_err());
        assert!(rec.truncate_to_budget(31).is_err());
        assert_eq!(rec.truncate_to_budget(30).unwrap(), rec);
    }

    #[test]
    fn records_round_trip_through_json_lines() {
        let rec = RunRecord {
            verdict: Verdict::Reject,
            stopping_step: 3,
            labels_spent_total: 13,
            trajectory: vec![-0.1, -1.234_567_890_123_456_7, -3.1],
            seed: u64::MAX,
            n0: 10,
            budget: 200,
        };
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &[rec.clone(), rec.clone()]).unwrap();
        assert_eq!(buf.iter().filter(|&&b| b == b'\n').count(), 2);
        let back: Vec<RunRecord> = read_jsonl(&buf[..]).unwrap();
        assert_eq!(back, vec![rec.clone(), rec]);
        let err = read_jsonl::<_, RunRecord>(&b"{}\n"[..]).unwrap_err();
        assert!(err.to_string().contains("row 1"));
    }

    #[test]
    fn class_probs_are_normalized() {
        for i in 1..1000 {
            let p = ClassProbs::from_one(i as f64 / 1000.0);
            assert!((p.zero + p.one - 1.0).abs() <= f64::EPSILON);
        }
    }
}
