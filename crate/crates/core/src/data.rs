//! Unlabeled pools with hidden labels, synthetic scenario generators and CSV
//! ingestion.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::Label;
use crate::theory::special::normal_cdf;

/// Answers label queries by pool index.
pub trait Oracle {
    fn label(&mut self, index: usize) -> Result<Label>;
}

/// Ordered unlabeled features. The ground-truth labels are reachable through
/// [`Pool::oracle`]; [`Pool::reveal_labels`] exists for dumps and diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Pool {
    // row-major len × dim
    features: Vec<f64>,
    labels: Vec<Label>,
    dim: usize,
}

impl Pool {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<Label>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::data(format!(
                "{} features but {} labels",
                features.len(),
                labels.len()
            )));
        }
        let dim = features.first().map_or(0, Vec::len);
        let mut flat = Vec::with_capacity(features.len() * dim);
        for (i, f) in features.iter().enumerate() {
            if f.len() != dim {
                return Err(Error::data(format!(
                    "item {i} has dimension {} but the first has {dim}",
                    f.len()
                )));
            }
            flat.extend_from_slice(f);
        }
        Self::from_flat(flat, labels, dim)
    }

    fn from_flat(features: Vec<f64>, labels: Vec<Label>, dim: usize) -> Result<Self> {
        if !labels.is_empty() && dim == 0 {
            return Err(Error::data("features must have at least one coordinate"));
        }
        if let Some(i) = features.iter().position(|x| !x.is_finite()) {
            return Err(Error::data(format!(
                "item {} has a non-finite coordinate",
                i / dim.max(1)
            )));
        }
        Ok(Self {
            features,
            labels,
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn feature(&self, index: usize) -> &[f64] {
        &self.features[index * self.dim..(index + 1) * self.dim]
    }

    pub fn features(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.dim.max(1))
    }

    pub fn oracle(&self) -> PoolOracle<'_> {
        PoolOracle {
            pool: self,
            queries: 0,
        }
    }

    pub fn reveal_labels(&self) -> &[Label] {
        &self.labels
    }

    /// Writes `f0,…,f{d-1},z` with shortest round-trip float formatting.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.dim).map(|j| format!("f{j}")).collect();
        header.push("z".into());
        w.write_record(&header).map_err(csv_error)?;
        for (f, z) in self.features().zip(&self.labels) {
            let mut row: Vec<String> = f.iter().map(|x| x.to_string()).collect();
            row.push(z.to_string());
            w.write_record(&row).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Reads a headed CSV. Every column except `label_column` is a feature, in
    /// header order. Errors carry the 1-based file row (the header is row 1).
    pub fn read_csv<R: Read>(reader: R, label_column: &str) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let header = r.headers().map_err(csv_error)?.clone();
        let label_at = header
            .iter()
            .position(|h| h.trim() == label_column)
            .ok_or_else(|| {
                Error::data_at(1, format!("label column `{label_column}` not in header"))
            })?;
        let dim = header.len() - 1;
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (i, record) in r.records().enumerate() {
            let row = i + 2;
            let record = record.map_err(|e| Error::data_at(row, e.to_string()))?;
            if record.len() != header.len() {
                return Err(Error::data_at(
                    row,
                    format!("expected {} fields, found {}", header.len(), record.len()),
                ));
            }
            for (j, cell) in record.iter().enumerate() {
                let cell = cell.trim();
                if j == label_at {
                    let z = match cell {
                        "0" => Label::Zero,
                        "1" => Label::One,
                        other => {
                            return Err(Error::data_at(
                                row,
                                format!("label must be 0 or 1, got `{other}`"),
                            ))
                        }
                    };
                    labels.push(z);
                } else {
                    let x: f64 = cell.parse().map_err(|_| {
                        Error::data_at(
                            row,
                            format!("non-numeric value `{cell}` in column `{}`", &header[j]),
                        )
                    })?;
                    if !x.is_finite() {
                        return Err(Error::data_at(row, format!("non-finite value `{cell}`")));
                    }
                    features.push(x);
                }
            }
        }
        Self::from_flat(features, labels, dim)
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Reads a pool from a CSV file.
pub fn load_csv_pool(path: impl AsRef<Path>, label_column: &str) -> Result<Pool> {
    let file = std::fs::File::open(path.as_ref())?;
    Pool::read_csv(file, label_column)
}

/// Oracle backed by a pool's hidden labels.
#[derive(Debug)]
pub struct PoolOracle<'a> {
    pool: &'a Pool,
    queries: usize,
}

impl PoolOracle<'_> {
    /// Labels handed out so far.
    pub fn queries(&self) -> usize {
        self.queries
    }
}

impl Oracle for PoolOracle<'_> {
    fn label(&mut self, index: usize) -> Result<Label> {
        let z = self.pool.labels.get(index).copied().ok_or_else(|| {
            Error::Oracle(format!(
                "index {index} outside a pool of {}",
                self.pool.len()
            ))
        })?;
        self.queries += 1;
        Ok(z)
    }
}

/// Two independent standard normals by the Box–Muller transform.
pub fn standard_normal_pair<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    // 1 - U keeps the radius argument in (0, 1].
    let u1 = 1.0 - rng.gen::<f64>();
    let u2 = rng.gen::<f64>();
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = 2.0 * std::f64::consts::PI * u2;
    (r * theta.cos(), r * theta.sin())
}

/// Fills `out` with independent standard normals.
fn fill_normals<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    let mut chunks = out.chunks_exact_mut(2);
    for pair in &mut chunks {
        let (a, b) = standard_normal_pair(rng);
        pair[0] = a;
        pair[1] = b;
    }
    if let [last] = chunks.into_remainder() {
        *last = standard_normal_pair(rng).0;
    }
}

/// Draws the label first, so the class prior is exact by construction.
fn draw_label<R: Rng + ?Sized>(rng: &mut R, prior0: f64) -> Label {
    Label::from(rng.gen::<f64>() >= prior0)
}

fn check_prior(prior0: f64) -> Result<()> {
    if !(prior0 > 0.0 && prior0 < 1.0) {
        return Err(Error::Config(format!(
            "class prior P(Z=0) must lie in (0, 1), got {prior0}"
        )));
    }
    Ok(())
}

/// Class-conditional Gaussians `N((∓δ, 0, …), I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaussianScenario {
    pub delta: f64,
    /// `P(Z = 0)`.
    pub prior0: f64,
    pub dim: usize,
    pub pool_size: usize,
}

impl Default for GaussianScenario {
    fn default() -> Self {
        Self {
            delta: 0.0,
            prior0: 0.5,
            dim: 2,
            pool_size: 2000,
        }
    }
}

impl GaussianScenario {
    pub fn new(delta: f64, prior0: f64) -> Self {
        Self {
            delta,
            prior0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::Config(format!(
                "delta must be finite and non-negative, got {}",
                self.delta
            )));
        }
        check_prior(self.prior0)?;
        if self.dim == 0 {
            return Err(Error::Config("dimension must be at least 1".into()));
        }
        Ok(())
    }

    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Pool> {
        self.validate()?;
        let d = self.dim;
        let mut features = vec![0.0; self.pool_size * d];
        let mut labels = Vec::with_capacity(self.pool_size);
        for row in features.chunks_exact_mut(d) {
            let z = draw_label(rng, self.prior0);
            fill_normals(rng, row);
            row[0] += if z.is_one() { self.delta } else { -self.delta };
            labels.push(z);
        }
        Pool::from_flat(features, labels, d)
    }

    /// Exact `P(Z = 0 | lo ≤ s_coordinate < hi)`.
    pub fn interval_prior0(&self, coordinate: usize, lo: f64, hi: f64) -> Option<f64> {
        if coordinate >= self.dim || !(lo < hi) {
            return None;
        }
        if coordinate != 0 {
            return Some(self.prior0);
        }
        let mass = |mean: f64| normal_cdf(hi - mean) - normal_cdf(lo - mean);
        let m0 = self.prior0 * mass(-self.delta);
        let m1 = (1.0 - self.prior0) * mass(self.delta);
        (m0 + m1 > 0.0).then(|| m0 / (m0 + m1))
    }
}

/// Three-cluster contamination: class 0 comes from a cluster `A`, class 1
/// from `A` with probability `mixture_ratio` and from a different cluster
/// `B` otherwise. `A` and `B` are drawn afresh for every pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixtureScenario {
    pub means: Vec<Vec<f64>>,
    /// Isotropic component standard deviation.
    pub sd: f64,
    pub mixture_ratio: f64,
    pub prior0: f64,
    pub pool_size: usize,
}

impl Default for MixtureScenario {
    fn default() -> Self {
        Self {
            means: vec![vec![0.0, 0.0], vec![3.0, 0.0], vec![0.0, 3.0]],
            sd: 1.0,
            mixture_ratio: 0.7,
            prior0: 0.5,
            pool_size: 2000,
        }
    }
}

/// A generated mixture pool with the component of every item.
#[derive(Debug, Clone, PartialEq)]
pub struct MixturePool {
    pub pool: Pool,
    pub components: Vec<usize>,
    /// `(A, B)`.
    pub chosen: (usize, usize),
}

impl MixtureScenario {
    pub fn new(mixture_ratio: f64, prior0: f64) -> Self {
        Self {
            mixture_ratio,
            prior0,
            ..Self::default()
        }
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        if self.means.len() < 2 {
            return Err(Error::Config(
                "mixture scenario needs at least 2 components".into(),
            ));
        }
        let d = self.dim();
        if d == 0 || self.means.iter().any(|m| m.len() != d) {
            return Err(Error::Config(
                "component means must share a positive dimension".into(),
            ));
        }
        if !(self.sd > 0.0 && self.sd.is_finite()) {
            return Err(Error::Config(format!(
                "sd must be positive, got {}",
                self.sd
            )));
        }
        if !(0.0..=1.0).contains(&self.mixture_ratio) {
            return Err(Error::Config(format!(
                "mixture_ratio must lie in [0, 1], got {}",
                self.mixture_ratio
            )));
        }
        check_prior(self.prior0)
    }

    pub fn generate_detailed<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<MixturePool> {
        self.validate()?;
        let k = self.means.len();
        let a = rng.gen_range(0..k);
        let b = (a + rng.gen_range(1..k)) % k;
        let d = self.dim();
        let mut features = vec![0.0; self.pool_size * d];
        let mut labels = Vec::with_capacity(self.pool_size);
        let mut components = Vec::with_capacity(self.pool_size);
        for row in features.chunks_exact_mut(d) {
            let z = draw_label(rng, self.prior0);
            let c = if z.is_one() && rng.gen::<f64>() >= self.mixture_ratio {
                b
            } else {
                a
            };
            fill_normals(rng, row);
            for (x, m) in row.iter_mut().zip(&self.means[c]) {
                *x = m + self.sd * *x;
            }
            labels.push(z);
            components.push(c);
        }
        Ok(MixturePool {
            pool: Pool::from_flat(features, labels, d)?,
            components,
            chosen: (a, b),
        })
    }

    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Pool> {
        self.generate_detailed(rng).map(|m| m.pool)
    }
}

/// Features on a finite set of points on the line: a point is drawn with
/// probability `weights[i]`, then its label with `P(Z = 0) = posteriors[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretePoolScenario {
    pub positions: Vec<f64>,
    pub weights: Vec<f64>,
    /// `P(Z = 0 | s_i)`.
    pub posteriors: Vec<f64>,
    pub pool_size: usize,
}

impl DiscretePoolScenario {
    pub fn validate(&self) -> Result<()> {
        let l = self.positions.len();
        if l == 0 || self.weights.len() != l || self.posteriors.len() != l {
            return Err(Error::Config(
                "positions, weights and posteriors must be non-empty and equally long".into(),
            ));
        }
        if self.weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::Config("weights must be non-negative".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("weights sum to {total}, not 1")));
        }
        if self.posteriors.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Config("posteriors must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Pool> {
        self.validate()?;
        let mut features = Vec::with_capacity(self.pool_size);
        let mut labels = Vec::with_capacity(self.pool_size);
        for _ in 0..self.pool_size {
            let u = rng.gen::<f64>();
            let mut acc = 0.0;
            let mut i = self.positions.len() - 1;
            for (j, &w) in self.weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    i = j;
                    break;
                }
            }
            features.push(self.positions[i]);
            labels.push(Label::from(rng.gen::<f64>() >= self.posteriors[i]));
        }
        Pool::from_flat(features, labels, 1)
    }

    pub fn interval_prior0(&self, coordinate: usize, lo: f64, hi: f64) -> Option<f64> {
        if coordinate != 0 {
            return None;
        }
        let (mut mass, mut zero) = (0.0, 0.0);
        for ((&x, &w), &p) in self
            .positions
            .iter()
            .zip(&self.weights)
            .zip(&self.posteriors)
        {
            if lo <= x && x < hi {
                mass += w;
                zero += w * p;
            }
        }
        (mass > 0.0).then(|| zero / mass)
    }
}

/// Any of the synthetic generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Scenario {
    Gaussian(GaussianScenario),
    Mixture(MixtureScenario),
    Discrete(DiscretePoolScenario),
}

impl Scenario {
    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Pool> {
        match self {
            Scenario::Gaussian(s) => s.generate(rng),
            Scenario::Mixture(s) => s.generate(rng),
            Scenario::Discrete(s) => s.generate(rng),
        }
    }

    pub fn pool_size(&self) -> usize {
        match self {
            Scenario::Gaussian(s) => s.pool_size,
            Scenario::Mixture(s) => s.pool_size,
            Scenario::Discrete(s) => s.pool_size,
        }
    }

    /// Exact `P(Z = 0 | lo ≤ s_coordinate < hi)` when the generator admits one.
    pub fn interval_prior0(&self, coordinate: usize, lo: f64, hi: f64) -> Option<f64> {
        match self {
            Scenario::Gaussian(s) => s.interval_prior0(coordinate, lo, hi),
            Scenario::Mixture(_) => None,
            Scenario::Discrete(s) => s.interval_prior0(coordinate, lo, hi),
        }
    }
}
