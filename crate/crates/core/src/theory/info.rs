//! Exact information quantities on discrete scenarios.
//!
//! A scenario is a finite support `s_1..s_L` with mass `G(s_i)` and class
//! posterior `P(Z = 0 | s_i)`. Every expectation is a finite sum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const WEIGHT_TOLERANCE: f64 = 1e-9;

/// `-p ln p - (1-p) ln(1-p)` in nats.
pub fn binary_entropy(p: f64) -> f64 {
    -(xlnx(p) + xlnx(1.0 - p))
}

fn xlnx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("{name} must lie in [0, 1], got {p}")));
    }
    Ok(())
}

fn check_support(posteriors: &[f64], weights: &[f64]) -> Result<()> {
    if posteriors.is_empty() {
        return Err(Error::Domain("support is empty".into()));
    }
    if posteriors.len() != weights.len() {
        return Err(Error::Domain(format!(
            "{} posteriors but {} weights",
            posteriors.len(),
            weights.len()
        )));
    }
    for &p in posteriors {
        check_probability("posterior", p)?;
    }
    let mut total = 0.0;
    for &w in weights {
        if !(w >= 0.0 && w.is_finite()) {
            return Err(Error::Domain(format!(
                "weight {w} is negative or not finite"
            )));
        }
        total += w;
    }
    if (total - 1.0).abs() > WEIGHT_TOLERANCE {
        return Err(Error::Domain(format!("weights sum to {total}, not 1")));
    }
    Ok(())
}

/// A finite feature support with its class posteriors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteScenario {
    cells: Vec<f64>,
    weights: Vec<f64>,
}

impl DiscreteScenario {
    /// `cells[i] = P(Z = 0 | s_i)`, `weights[i] = G(s_i)`.
    pub fn new(cells: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if cells.len() < 2 {
            return Err(Error::Domain(format!(
                "a scenario needs at least 2 support points, got {}",
                cells.len()
            )));
        }
        check_support(&cells, &weights)?;
        Ok(Self { cells, weights })
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Marginal `P(Z = 0)`.
    pub fn prior0(&self) -> f64 {
        marginal_prior0(&self.cells, &self.weights)
    }

    /// `I(S; Z)`.
    pub fn mutual_information(&self) -> f64 {
        mi_unchecked(&self.cells, &self.weights)
    }

    /// Posterior values carrying positive mass.
    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.weights[i] > 0.0).collect()
    }
}

fn marginal_prior0(posteriors: &[f64], weights: &[f64]) -> f64 {
    posteriors.iter().zip(weights).map(|(p, w)| p * w).sum()
}

fn mi_unchecked(posteriors: &[f64], weights: &[f64]) -> f64 {
    let conditional: f64 = posteriors
        .iter()
        .zip(weights)
        .map(|(&p, &w)| w * binary_entropy(p))
        .sum();
    binary_entropy(marginal_prior0(posteriors, weights)) - conditional
}

/// `I(S; Z) = H(Z) - H(Z | S)` for a support given as slices.
pub fn mutual_information(posteriors: &[f64], weights: &[f64]) -> Result<f64> {
    check_support(posteriors, weights)?;
    Ok(mi_unchecked(posteriors, weights))
}

/// Plug-in estimate of `I(S; Z | A)` from a cell prior and predicted
/// posteriors of the unlabeled points in the cell:
/// `H(P(Z | A)) + mean_s Σ_z Q(z|s) ln Q(z|s)`.
///
/// The value is not clamped and is negative when `Q` is less certain than the
/// cell prior.
pub fn estimate_conditional_mi(cell_prior: f64, q_values: &[f64]) -> Result<f64> {
    check_probability("cell prior", cell_prior)?;
    if q_values.is_empty() {
        return Err(Error::Estimation(
            "cannot estimate conditional information of an empty cell".into(),
        ));
    }
    let mut acc = 0.0;
    for &q in q_values {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::Estimation(format!(
                "predicted probability {q} outside (0, 1)"
            )));
        }
        acc += xlnx(q) + xlnx(1.0 - q);
    }
    Ok(binary_entropy(cell_prior) + acc / q_values.len() as f64)
}

/// Direction of the squared log-ratio divergence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KlDirection {
    /// `E_p[ln²(Q/P)]`, expectation under the true joint.
    QFromP,
    /// `E_q[ln²(P/Q)]`, expectation under `q(s, z) = p(s) Q(z|s)`.
    PFromQ,
}

fn check_pair(true_posteriors: &[f64], model_posteriors: &[f64], weights: &[f64]) -> Result<()> {
    check_support(true_posteriors, weights)?;
    if model_posteriors.len() != true_posteriors.len() {
        return Err(Error::Domain(format!(
            "{} true posteriors but {} model posteriors",
            true_posteriors.len(),
            model_posteriors.len()
        )));
    }
    for &q in model_posteriors {
        check_probability("model posterior", q)?;
    }
    Ok(())
}

/// Each `(s, z)` outcome with positive mass under the sampling measure, as
/// `(mass, ln(P(z|s)/Q(z|s)))`. The sampling measure uses the true posteriors
/// when `under_true` is set, the model posteriors otherwise.
fn log_ratio_outcomes(
    true_posteriors: &[f64],
    model_posteriors: &[f64],
    weights: &[f64],
    under_true: bool,
) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(2 * weights.len());
    for ((&p0, &q0), &w) in true_posteriors.iter().zip(model_posteriors).zip(weights) {
        for (p, q) in [(p0, q0), (1.0 - p0, 1.0 - q0)] {
            let mass = w * if under_true { p } else { q };
            if mass == 0.0 {
                continue;
            }
            if p == 0.0 || q == 0.0 {
                return Err(Error::InfiniteDivergence(format!(
                    "posterior {p} against model {q} gives an infinite log ratio"
                )));
            }
            out.push((mass, p.ln() - q.ln()));
        }
    }
    Ok(out)
}

/// `KL(P(z|s) ‖ Q(z|s))` averaged over `G`: `E_p[ln(P/Q)]`.
pub fn kl_divergence(
    true_posteriors: &[f64],
    model_posteriors: &[f64],
    weights: &[f64],
) -> Result<f64> {
    check_pair(true_posteriors, model_posteriors, weights)?;
    Ok(
        log_ratio_outcomes(true_posteriors, model_posteriors, weights, true)?
            .iter()
            .map(|(m, r)| m * r)
            .sum(),
    )
}

/// Second moment of the log-likelihood ratio between the true and model joints.
pub fn kl_squared(
    direction: KlDirection,
    true_posteriors: &[f64],
    model_posteriors: &[f64],
    weights: &[f64],
) -> Result<f64> {
    check_pair(true_posteriors, model_posteriors, weights)?;
    let under_true = direction == KlDirection::QFromP;
    Ok(
        log_ratio_outcomes(true_posteriors, model_posteriors, weights, under_true)?
            .iter()
            .map(|(m, r)| m * r * r)
            .sum(),
    )
}

/// `Var_p[ln(P(Z|S)/Q(Z|S))]`, computed around its mean.
pub fn log_ratio_variance(
    true_posteriors: &[f64],
    model_posteriors: &[f64],
    weights: &[f64],
) -> Result<f64> {
    check_pair(true_posteriors, model_posteriors, weights)?;
    let outcomes = log_ratio_outcomes(true_posteriors, model_posteriors, weights, true)?;
    Ok(centered_variance(&outcomes))
}

fn centered_variance(outcomes: &[(f64, f64)]) -> f64 {
    let mean: f64 = outcomes.iter().map(|(m, x)| m * x).sum();
    outcomes
        .iter()
        .map(|(m, x)| m * (x - mean) * (x - mean))
        .sum()
}

/// Information density `ln(P(z|s)/P(z))` at every outcome with positive mass.
fn information_density(
    prior0: f64,
    posteriors: &[f64],
    weights: &[f64],
) -> Result<Vec<(f64, f64)>> {
    check_probability("prior", prior0)?;
    check_support(posteriors, weights)?;
    let mut out = Vec::with_capacity(2 * posteriors.len());
    for (&p0, &w) in posteriors.iter().zip(weights) {
        for (p, prior) in [(p0, prior0), (1.0 - p0, 1.0 - prior0)] {
            let mass = w * p;
            if mass == 0.0 {
                continue;
            }
            if prior == 0.0 {
                return Err(Error::Domain(format!(
                    "class with prior 0 has posterior {p} at a supported point"
                )));
            }
            out.push((mass, p.ln() - prior.ln()));
        }
    }
    Ok(out)
}

/// Mean of the information density; equals `I(S; Z)` when `prior0` is the
/// marginal of the scenario.
pub fn information_density_mean(prior0: f64, posteriors: &[f64], weights: &[f64]) -> Result<f64> {
    Ok(information_density(prior0, posteriors, weights)?
        .iter()
        .map(|(m, x)| m * x)
        .sum())
}

/// Relative entropy variance `Var_p[-ln(P(Z)/P(Z|S))]`.
pub fn relative_entropy_variance(prior0: f64, posteriors: &[f64], weights: &[f64]) -> Result<f64> {
    Ok(centered_variance(&information_density(
        prior0, posteriors, weights,
    )?))
}
