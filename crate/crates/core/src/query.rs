//! Label-query strategies over a pool.
//!
//! A strategy only proposes an index; the engine marks it queried once the
//! oracle has answered. Ties are always broken toward the lowest index.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::Classifier;
use crate::data::{Pool, Scenario};
use crate::error::{Error, Result};
use crate::label::Label;
use crate::theory::info::estimate_conditional_mi;

/// Per-run record of which pool items have been labeled.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryMask {
    queried: Vec<bool>,
    remaining: usize,
}

impl QueryMask {
    pub fn new(len: usize) -> Self {
        Self {
            queried: vec![false; len],
            remaining: len,
        }
    }

    pub fn len(&self) -> usize {
        self.queried.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queried.is_empty()
    }

    pub fn remaining(&self) -> usize {
        self.remaining
    }

    pub fn is_queried(&self, index: usize) -> bool {
        self.queried[index]
    }

    pub fn mark(&mut self, index: usize) -> Result<()> {
        match self.queried.get_mut(index) {
            None => Err(Error::Contract(format!(
                "index {index} outside a pool of {}",
                self.len()
            ))),
            Some(true) => Err(Error::Contract(format!("index {index} queried twice"))),
            Some(q) => {
                *q = true;
                self.remaining -= 1;
                Ok(())
            }
        }
    }

    pub fn unqueried(&self) -> impl Iterator<Item = usize> + '_ {
        self.queried
            .iter()
            .enumerate()
            .filter(|(_, &q)| !q)
            .map(|(i, _)| i)
    }
}

/// Which class mode the bimodal coin picked.
pub type Mode = Label;

/// A proposed query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub index: usize,
    /// Class mode targeted by a bimodal selection.
    pub mode: Option<Mode>,
}

fn exhausted() -> Error {
    Error::PoolExhausted("no unqueried item is left".into())
}

/// Index maximizing `Q(Z = mode | s)` over unqueried items.
pub fn select_mode<C: Classifier + ?Sized>(
    pool: &Pool,
    mask: &QueryMask,
    model: &C,
    mode: Mode,
) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for i in mask.unqueried() {
        let q = model.predict(pool.feature(i))?.of(mode);
        if best.map_or(true, |(_, b)| q > b) {
            best = Some((i, q));
        }
    }
    best.map(|(i, _)| i).ok_or_else(exhausted)
}

/// Fair coin between the class-0 and class-1 modes, then the most confident
/// unqueried item for that class.
pub fn select_bimodal<C: Classifier + ?Sized, R: Rng + ?Sized>(
    pool: &Pool,
    mask: &QueryMask,
    model: &C,
    rng: &mut R,
) -> Result<Selection> {
    if mask.remaining() == 0 {
        return Err(exhausted());
    }
    let mode = if rng.gen::<bool>() {
        Label::Zero
    } else {
        Label::One
    };
    Ok(Selection {
        index: select_mode(pool, mask, model, mode)?,
        mode: Some(mode),
    })
}

/// Uniform over the unqueried items.
pub fn select_random<R: Rng + ?Sized>(mask: &QueryMask, rng: &mut R) -> Result<usize> {
    if mask.remaining() == 0 {
        return Err(exhausted());
    }
    let k = rng.gen_range(0..mask.remaining());
    mask.unqueried().nth(k).ok_or_else(exhausted)
}

/// How a partition divides the pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum PartitionSpec {
    /// Cells `(-∞, b₁), [b₁, b₂), …, [b_{m-1}, ∞)` along one coordinate.
    Thresholds {
        coordinate: usize,
        boundaries: Vec<f64>,
    },
    /// Explicit disjoint index lists covering the pool.
    Explicit { cells: Vec<Vec<usize>> },
}

impl PartitionSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            PartitionSpec::Thresholds { boundaries, .. } => {
                if boundaries.windows(2).any(|w| !(w[0] < w[1]))
                    || boundaries.iter().any(|b| !b.is_finite())
                {
                    return Err(Error::Config(
                        "partition boundaries must be finite and strictly increasing".into(),
                    ));
                }
                Ok(())
            }
            PartitionSpec::Explicit { cells } => {
                if cells.is_empty() {
                    return Err(Error::Config("partition has no cells".into()));
                }
                Ok(())
            }
        }
    }

    /// Cell index sets over `pool`.
    pub fn cells(&self, pool: &Pool) -> Result<Vec<Vec<usize>>> {
        self.validate()?;
        match self {
            PartitionSpec::Thresholds {
                coordinate,
                boundaries,
            } => {
                if *coordinate >= pool.dim() {
                    return Err(Error::Config(format!(
                        "partition coordinate {coordinate} exceeds dimension {}",
                        pool.dim()
                    )));
                }
                let mut cells = vec![Vec::new(); boundaries.len() + 1];
                for (i, f) in pool.features().enumerate() {
                    let x = f[*coordinate];
                    let c = boundaries.partition_point(|&b| b <= x);
                    cells[c].push(i);
                }
                Ok(cells)
            }
            PartitionSpec::Explicit { cells } => {
                let mut seen = vec![false; pool.len()];
                for &i in cells.iter().flatten() {
                    if i >= pool.len() || seen[i] {
                        return Err(Error::Config(format!(
                            "partition index {i} is out of range or repeated"
                        )));
                    }
                    seen[i] = true;
                }
                if seen.iter().any(|s| !s) {
                    return Err(Error::Config(
                        "partition cells do not cover the pool".into(),
                    ));
                }
                Ok(cells.clone())
            }
        }
    }

    /// Exact cell priors from a generator; `None` when it cannot supply them.
    pub fn known_priors(&self, scenario: &Scenario) -> Option<Vec<f64>> {
        match self {
            PartitionSpec::Thresholds {
                coordinate,
                boundaries,
            } => {
                let mut edges = vec![f64::NEG_INFINITY];
                edges.extend_from_slice(boundaries);
                edges.push(f64::INFINITY);
                edges
                    .windows(2)
                    .map(|w| scenario.interval_prior0(*coordinate, w[0], w[1]))
                    .collect()
            }
            PartitionSpec::Explicit { .. } => None,
        }
    }
}

/// Where the cell priors `P(Z = 0 | A)` come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum CellPriors {
    /// Fixed values, one per cell.
    Known(Vec<f64>),
    /// Filled in from the scenario generator before a batch runs.
    Scenario,
    /// `(zeros + 1) / (labels + 2)` from the initialization labels in each cell.
    Estimated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    pub spec: PartitionSpec,
    pub priors: CellPriors,
    /// Re-estimate the best cell before every query instead of once.
    #[serde(default)]
    pub reestimate: bool,
}

impl PartitionConfig {
    /// Replaces [`CellPriors::Scenario`] by the generator's exact priors.
    pub fn resolve(&self, scenario: &Scenario) -> Result<Self> {
        if self.priors != CellPriors::Scenario {
            return Ok(self.clone());
        }
        let priors = self.spec.known_priors(scenario).ok_or_else(|| {
            Error::Config("this scenario cannot supply exact cell priors; use estimated".into())
        })?;
        Ok(Self {
            priors: CellPriors::Known(priors),
            ..self.clone()
        })
    }
}

/// A partition resolved against one pool.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub cells: Vec<Vec<usize>>,
    /// `P(Z = 0 | A_i)`.
    pub cell_priors: Vec<f64>,
}

impl Partition {
    pub fn new(cells: Vec<Vec<usize>>, cell_priors: Vec<f64>) -> Result<Self> {
        if cells.len() != cell_priors.len() {
            return Err(Error::Config(format!(
                "{} cells but {} cell priors",
                cells.len(),
                cell_priors.len()
            )));
        }
        if let Some(p) = cell_priors.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Config(format!("cell prior {p} outside [0, 1]")));
        }
        Ok(Self { cells, cell_priors })
    }

    /// Builds the partition for a run from its configuration and the labeled
    /// initialization items.
    pub fn build(config: &PartitionConfig, pool: &Pool, init: &[(usize, Label)]) -> Result<Self> {
        let cells = config.spec.cells(pool)?;
        let priors = match &config.priors {
            CellPriors::Known(p) => p.clone(),
            CellPriors::Scenario => {
                return Err(Error::Config(
                    "scenario cell priors must be resolved before the run".into(),
                ))
            }
            CellPriors::Estimated => {
                let mut cell_of = vec![0usize; pool.len()];
                for (c, cell) in cells.iter().enumerate() {
                    for &i in cell {
                        cell_of[i] = c;
                    }
                }
                let mut zeros = vec![0usize; cells.len()];
                let mut totals = vec![0usize; cells.len()];
                for &(i, z) in init {
                    totals[cell_of[i]] += 1;
                    zeros[cell_of[i]] += usize::from(!z.is_one());
                }
                zeros
                    .iter()
                    .zip(&totals)
                    .map(|(&z, &t)| (z as f64 + 1.0) / (t as f64 + 2.0))
                    .collect()
            }
        };
        Self::new(cells, priors)
    }

    /// Estimated `I(S; Z | A_i)` for every cell over its unqueried items;
    /// `None` for cells with nothing left to query.
    pub fn estimate_cells<C: Classifier + ?Sized>(
        &self,
        pool: &Pool,
        mask: &QueryMask,
        model: &C,
    ) -> Result<Vec<Option<f64>>> {
        self.cells
            .iter()
            .zip(&self.cell_priors)
            .map(|(cell, &prior)| {
                let q: Vec<f64> = cell
                    .iter()
                    .filter(|&&i| !mask.is_queried(i))
                    .map(|&i| model.predict(pool.feature(i)).map(|p| p.zero))
                    .collect::<Result<_>>()?;
                if q.is_empty() {
                    Ok(None)
                } else {
                    estimate_conditional_mi(prior, &q).map(Some)
                }
            })
            .collect()
    }

    /// Cell with the largest estimate, lowest index on ties.
    pub fn best_cell<C: Classifier + ?Sized>(
        &self,
        pool: &Pool,
        mask: &QueryMask,
        model: &C,
    ) -> Result<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (c, est) in self
            .estimate_cells(pool, mask, model)?
            .into_iter()
            .enumerate()
        {
            if let Some(v) = est {
                if best.map_or(true, |(_, b)| v > b) {
                    best = Some((c, v));
                }
            }
        }
        best.map(|(c, _)| c).ok_or_else(exhausted)
    }
}

/// Query rule configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StrategyConfig {
    Bimodal,
    Random,
    Partition(PartitionConfig),
}

impl StrategyConfig {
    pub fn name(&self) -> &'static str {
        match self {
            StrategyConfig::Bimodal => "bimodal",
            StrategyConfig::Random => "random",
            StrategyConfig::Partition(_) => "partition",
        }
    }

    pub fn resolve(&self, scenario: &Scenario) -> Result<Self> {
        match self {
            StrategyConfig::Partition(p) => Ok(StrategyConfig::Partition(p.resolve(scenario)?)),
            other => Ok(other.clone()),
        }
    }
}

/// Running strategy for one test.
#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    Bimodal,
    Random,
    Partition {
        partition: Partition,
        reestimate: bool,
        chosen: Option<usize>,
    },
}

impl Strategy {
    pub fn build(config: &StrategyConfig, pool: &Pool, init: &[(usize, Label)]) -> Result<Self> {
        Ok(match config {
            StrategyConfig::Bimodal => Strategy::Bimodal,
            StrategyConfig::Random => Strategy::Random,
            StrategyConfig::Partition(p) => Strategy::Partition {
                partition: Partition::build(p, pool, init)?,
                reestimate: p.reestimate,
                chosen: None,
            },
        })
    }

    /// Cell currently targeted by a partition strategy.
    pub fn chosen_cell(&self) -> Option<usize> {
        match self {
            Strategy::Partition { chosen, .. } => *chosen,
            _ => None,
        }
    }

    pub fn select<C: Classifier + ?Sized, R: Rng + ?Sized>(
        &mut self,
        pool: &Pool,
        mask: &QueryMask,
        model: &C,
        rng: &mut R,
    ) -> Result<Selection> {
        match self {
            Strategy::Bimodal => select_bimodal(pool, mask, model, rng),
            Strategy::Random => Ok(Selection {
                index: select_random(mask, rng)?,
                mode: None,
            }),
            Strategy::Partition {
                partition,
                reestimate,
                chosen,
            } => {
                let cell = match *chosen {
                    Some(c) if !*reestimate => c,
                    _ => {
                        let c = partition.best_cell(pool, mask, model)?;
                        *chosen = Some(c);
                        c
                    }
                };
                let open: Vec<usize> = partition.cells[cell]
                    .iter()
                    .copied()
                    .filter(|&i| !mask.is_queried(i))
                    .collect();
                if open.is_empty() {
                    return Err(Error::PoolExhausted(format!(
                        "selected partition cell {cell} has no unqueried item"
                    )));
                }
                Ok(Selection {
                    index: open[rng.gen_range(0..open.len())],
                    mode: None,
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::LabeledExample;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Frozen predictor returning `Q(Z = 0 | s) = s[0]`.
    struct Table;

    impl Classifier for Table {
        fn dim(&self) -> usize {
            1
        }
        fn predict_proba(&self, feature: &[f64]) -> Result<f64> {
            Ok(1.0 - feature[0])
        }
        fn update(&mut self, _: &LabeledExample) -> Result<()> {
            Ok(())
        }
        fn training_size(&self) -> usize {
            0
        }
    }

    fn pool_of(q0: &[f64]) -> Pool {
        Pool::new(
            q0.iter().map(|&q| vec![q]).collect(),
            vec![Label::Zero; q0.len()],
        )
        .unwrap()
    }

    #[test]
    fn bimodal_mode_examples() {
        let pool = pool_of(&[0.9, 0.2, 0.5]);
        let mask = QueryMask::new(3);
        assert_eq!(select_mode(&pool, &mask, &Table, Label::Zero).unwrap(), 0);
        assert_eq!(select_mode(&pool, &mask, &Table, Label::One).unwrap(), 1);
        let pool = pool_of(&[0.7, 0.7, 0.1]);
        assert_eq!(
            select_mode(&pool, &QueryMask::new(3), &Table, Label::Zero).unwrap(),
            0
        );
    }

    #[test]
    fn bimodal_skips_queried_items() {
        let pool = pool_of(&[0.9, 0.2, 0.5]);
        let mut mask = QueryMask::new(3);
        mask.mark(0).unwrap();
        assert_eq!(select_mode(&pool, &mask, &Table, Label::Zero).unwrap(), 2);
    }

    #[test]
    fn random_examples() {
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let mut mask = QueryMask::new(5);
        for i in [0, 1, 2, 3] {
            mask.mark(i).unwrap();
        }
        assert_eq!(select_random(&mask, &mut r).unwrap(), 4);
        mask.mark(4).unwrap();
        assert!(matches!(
            select_random(&mask, &mut r),
            Err(Error::PoolExhausted(_))
        ));
    }

    #[test]
    fn random_is_uniform() {
        let mut r = ChaCha8Rng::seed_from_u64(2);
        let mut mask = QueryMask::new(6);
        for i in [0, 2, 4] {
            mask.mark(i).unwrap();
        }
        let mut counts = [0usize; 6];
        let n = 60_000;
        for _ in 0..n {
            counts[select_random(&mask, &mut r).unwrap()] += 1;
        }
        let expected = n as f64 / 3.0;
        let chi2: f64 = [1, 3, 5]
            .iter()
            .map(|&i| (counts[i] as f64 - expected).powi(2) / expected)
            .sum();
        for i in [1, 3, 5] {
            assert!((counts[i] as f64 / n as f64 - 1.0 / 3.0).abs() < 0.02);
        }
        // 2 degrees of freedom, 0.999 quantile
        assert!(chi2 < 13.8, "chi2 = {chi2}");
    }

    #[test]
    fn coin_is_fair() {
        let pool = pool_of(&[0.9, 0.2, 0.5]);
        let mask = QueryMask::new(3);
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let n = 20_000;
        let zeros = (0..n)
            .filter(|_| {
                select_bimodal(&pool, &mask, &Table, &mut r).unwrap().mode == Some(Label::Zero)
            })
            .count();
        assert!((zeros as f64 / n as f64 - 0.5).abs() < 0.015);
    }

    #[test]
    fn mask_refuses_double_marking() {
        let mut m = QueryMask::new(2);
        m.mark(1).unwrap();
        assert!(matches!(m.mark(1), Err(Error::Contract(_))));
        assert!(matches!(m.mark(7), Err(Error::Contract(_))));
        assert_eq!(m.remaining(), 1);
    }

    #[test]
    fn threshold_cells() {
        let pool = pool_of(&[-1.0, 0.0, 0.5, 2.0, 3.0]);
        let spec = PartitionSpec::Thresholds {
            coordinate: 0,
            boundaries: vec![0.0, 2.0],
        };
        assert_eq!(
            spec.cells(&pool).unwrap(),
            vec![vec![0], vec![1, 2], vec![3, 4]]
        );
    }

    #[test]
    fn partition_selects_unique_argmax() {
        // Cell 0: uninformative q, cell 1: confident q; equal cell priors.
        let pool = pool_of(&[0.5, 0.5, 0.95, 0.05, 0.95, 0.05]);
        let part = Partition::new(vec![vec![0, 1], vec![2, 3, 4, 5]], vec![0.5, 0.5]).unwrap();
        let mask = QueryMask::new(6);
        let est = part.estimate_cells(&pool, &mask, &Table).unwrap();
        assert_eq!(est[0], Some(0.0));
        assert!(est[1].unwrap() > 0.3);
        let mut s = Strategy::Partition {
            partition: part,
            reestimate: false,
            chosen: None,
        };
        let mut r = ChaCha8Rng::seed_from_u64(4);
        let mut mask = mask;
        for _ in 0..4 {
            let sel = s.select(&pool, &mask, &Table, &mut r).unwrap();
            assert!(sel.index >= 2);
            mask.mark(sel.index).unwrap();
        }
        assert_eq!(s.chosen_cell(), Some(1));
        assert!(matches!(
            s.select(&pool, &mask, &Table, &mut r),
            Err(Error::PoolExhausted(_))
        ));
    }

    #[test]
    fn partition_ties_pick_lowest_cell() {
        let pool = pool_of(&[0.8, 0.8, 0.8, 0.8]);
        let part = Partition::new(vec![vec![0, 1], vec![2, 3]], vec![0.5, 0.5]).unwrap();
        assert_eq!(
            part.best_cell(&pool, &QueryMask::new(4), &Table).unwrap(),
            0
        );
    }

    #[test]
    fn partition_ranking_matches_exact_mi_with_true_posteriors() {
        // Pool items sit on support points; the model reports the true
        // posterior, so the estimate of each cell is its exact conditional MI
        // whenever the items are in proportion to the weights.
        let points = [0.5, 0.5, 0.7, 0.3, 0.9, 0.1];
        let mut feats = Vec::new();
        for &p in &points {
            for _ in 0..10 {
                feats.push(p);
            }
        }
        let pool = pool_of(&feats);
        let cells: Vec<Vec<usize>> = (0..3).map(|c| (c * 20..(c + 1) * 20).collect()).collect();
        let part = Partition::new(cells, vec![0.5, 0.5, 0.5]).unwrap();
        let exact: Vec<f64> = (0..3)
            .map(|c| {
                crate::theory::info::mutual_information(&points[2 * c..2 * c + 2], &[0.5, 0.5])
                    .unwrap()
            })
            .collect();
        let est = part
            .estimate_cells(&pool, &QueryMask::new(60), &Table)
            .unwrap();
        for c in 0..3 {
            assert!((est[c].unwrap() - exact[c]).abs() < 1e-12);
        }
        let brute = (0..3)
            .max_by(|&a, &b| exact[a].partial_cmp(&exact[b]).unwrap())
            .unwrap();
        assert_eq!(
            part.best_cell(&pool, &QueryMask::new(60), &Table).unwrap(),
            brute
        );
    }

    #[test]
    fn estimated_priors_use_laplace_smoothing() {
        let pool = pool_of(&[0.1, 0.2, 0.8, 0.9]);
        let cfg = PartitionConfig {
            spec: PartitionSpec::Thresholds {
                coordinate: 0,
                boundaries: vec![0.5],
            },
            priors: CellPriors::Estimated,
            reestimate: false,
        };
        let part = Partition::build(&cfg, &pool, &[(0, Label::Zero), (1, Label::Zero)]).unwrap();
        assert_eq!(part.cell_priors, vec![0.75, 0.5]);
    }

    proptest! {
        #[test]
        fn frozen_bimodal_is_deterministic_given_the_coin(
            q in proptest::collection::vec(0.01f64..0.99, 1..30),
            mask_bits in proptest::collection::vec(any::<bool>(), 30),
            zero in any::<bool>(),
        ) {
            let pool = pool_of(&q);
            let mut mask = QueryMask::new(q.len());
            for (i, &b) in mask_bits.iter().take(q.len() - 1).enumerate() {
                if b { mask.mark(i).unwrap(); }
            }
            let mode = Label::from(!zero);
            let a = select_mode(&pool, &mask, &Table, mode).unwrap();
            let b = select_mode(&pool, &mask, &Table, mode).unwrap();
            prop_assert_eq!(a, b);
            prop_assert!(!mask.is_queried(a));
            // the pick is a maximizer and no lower index ties it
            let target = |i: usize| if zero { q[i] } else { 1.0 - q[i] };
            for i in mask.unqueried() {
                prop_assert!(target(i) <= target(a));
                if i < a { prop_assert!(target(i) < target(a)); }
            }
        }
    }
}
