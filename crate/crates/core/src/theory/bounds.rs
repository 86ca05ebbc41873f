//! Approximate power lower bounds for partition-restricted and random queries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::theory::info::{kl_squared, mutual_information, relative_entropy_variance, KlDirection};
use crate::theory::special::normal_cdf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PowerBoundKind {
    /// Queries restricted to the most informative partition cell.
    Proposed,
    /// Uniformly random queries.
    Baseline,
}

/// Quantities entering the bound. Information terms are in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBoundInputs {
    pub alpha: f64,
    pub nq: u64,
    /// `I(S; Z)`.
    pub mutual_information: f64,
    /// `max_A I(S; Z | A) - I(S; Z)`.
    pub delta: f64,
    /// Largest per-cell `KL²(q ‖ p)`.
    pub eps1: f64,
    /// Largest per-cell `KL²(p ‖ q)`.
    pub eps2: f64,
    /// Square root of the largest relative entropy variance.
    pub sigma: f64,
}

impl PowerBoundInputs {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.nq == 0 {
            return Err(Error::Config("label budget must be positive".into()));
        }
        for (name, v) in [
            ("mutual information", self.mutual_information),
            ("delta", self.delta),
            ("eps1", self.eps1),
            ("eps2", self.eps2),
            ("sigma", self.sigma),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Domain(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// `ε₁ + σ² + 2σ√ε₁`.
    pub fn variance_term(&self) -> f64 {
        self.eps1 + self.sigma * self.sigma + 2.0 * self.sigma * self.eps1.sqrt()
    }

    /// Per-label drift of the log statistic assumed by the bound.
    pub fn drift(&self, kind: PowerBoundKind) -> f64 {
        match kind {
            PowerBoundKind::Proposed => {
                self.mutual_information + self.delta - 2.0 * self.eps1.sqrt() - self.eps2.sqrt()
            }
            PowerBoundKind::Baseline => self.mutual_information - self.eps1.sqrt(),
        }
    }
}

/// `Φ((ln α / √Nq + √Nq · drift) / √(ε₁ + σ² + 2σ√ε₁))`.
pub fn power_lower_bound(kind: PowerBoundKind, inputs: &PowerBoundInputs) -> Result<f64> {
    inputs.validate()?;
    let denom = inputs.variance_term();
    if denom <= 0.0 {
        return Err(Error::Degenerate(
            "ε₁ + σ² + 2σ√ε₁ is zero; the normal approximation is undefined".into(),
        ));
    }
    let root_n = (inputs.nq as f64).sqrt();
    let z = (inputs.alpha.ln() / root_n + root_n * inputs.drift(kind)) / denom.sqrt();
    Ok(normal_cdf(z))
}

/// A discrete scenario, a fixed model posterior per support point, and a
/// partition of the support into cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionedScenario {
    /// `P(Z = 0 | s_i)`.
    pub posteriors: Vec<f64>,
    /// `Q(Z = 0 | s_i)`.
    pub model_posteriors: Vec<f64>,
    /// `G(s_i)`.
    pub weights: Vec<f64>,
    /// Disjoint index sets covering the support.
    pub cells: Vec<Vec<usize>>,
}

/// Exact per-cell quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellQuantities {
    pub mass: f64,
    /// `P(Z = 0 | A)`.
    pub prior0: f64,
    /// `I(S; Z | A)`.
    pub mutual_information: f64,
    pub kl2_q_from_p: f64,
    pub kl2_p_from_q: f64,
    pub relative_entropy_variance: f64,
}

impl PartitionedScenario {
    fn validate(&self) -> Result<()> {
        let l = self.posteriors.len();
        if self.model_posteriors.len() != l || self.weights.len() != l {
            return Err(Error::Domain(
                "posteriors, model posteriors and weights differ in length".into(),
            ));
        }
        let mut seen = vec![false; l];
        for cell in &self.cells {
            if cell.is_empty() {
                return Err(Error::Domain("partition has an empty cell".into()));
            }
            for &i in cell {
                if i >= l || seen[i] {
                    return Err(Error::Domain(format!(
                        "partition index {i} is out of range or repeated"
                    )));
                }
                seen[i] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Domain("partition does not cover the support".into()));
        }
        Ok(())
    }

    fn restrict(&self, cell: &[usize]) -> Result<(f64, Vec<f64>, Vec<f64>, Vec<f64>)> {
        let mass: f64 = cell.iter().map(|&i| self.weights[i]).sum();
        if mass <= 0.0 {
            return Err(Error::Domain("partition cell carries no mass".into()));
        }
        let p = cell.iter().map(|&i| self.posteriors[i]).collect();
        let q = cell.iter().map(|&i| self.model_posteriors[i]).collect();
        let w = cell.iter().map(|&i| self.weights[i] / mass).collect();
        Ok((mass, p, q, w))
    }

    /// Conditional quantities of every cell, in partition order.
    pub fn cell_quantities(&self) -> Result<Vec<CellQuantities>> {
        self.validate()?;
        self.cells
            .iter()
            .map(|cell| {
                let (mass, p, q, w) = self.restrict(cell)?;
                let prior0: f64 = p.iter().zip(&w).map(|(a, b)| a * b).sum();
                Ok(CellQuantities {
                    mass,
                    prior0,
                    mutual_information: mutual_information(&p, &w)?,
                    kl2_q_from_p: kl_squared(KlDirection::QFromP, &p, &q, &w)?,
                    kl2_p_from_q: kl_squared(KlDirection::PFromQ, &p, &q, &w)?,
                    relative_entropy_variance: relative_entropy_variance(prior0, &p, &w)?,
                })
            })
            .collect()
    }

    /// `I`, `Δ`, `ε₁`, `ε₂`, `σ` for the bound.
    pub fn power_inputs(&self, alpha: f64, nq: u64) -> Result<PowerBoundInputs> {
        let cells = self.cell_quantities()?;
        let global = mutual_information(&self.posteriors, &self.weights)?;
        let prior0: f64 = self
            .posteriors
            .iter()
            .zip(&self.weights)
            .map(|(a, b)| a * b)
            .sum();
        let global_var = relative_entropy_variance(prior0, &self.posteriors, &self.weights)?;
        let best = cells
            .iter()
            .map(|c| c.mutual_information)
            .fold(f64::NEG_INFINITY, f64::max);
        let delta = best - global;
        if delta < -1e-12 {
            return Err(Error::Domain(format!(
                "every cell is less informative than the whole support (gain {delta})"
            )));
        }
        let eps1 = cells.iter().map(|c| c.kl2_q_from_p).fold(0.0, f64::max);
        let eps2 = cells.iter().map(|c| c.kl2_p_from_q).fold(0.0, f64::max);
        let var = cells
            .iter()
            .map(|c| c.relative_entropy_variance)
            .fold(global_var, f64::max);
        let inputs = PowerBoundInputs {
            alpha,
            nq,
            mutual_information: global.max(0.0),
            delta: delta.max(0.0),
            eps1,
            eps2,
            sigma: var.max(0.0).sqrt(),
        };
        inputs.validate()?;
        Ok(inputs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs() -> PowerBoundInputs {
        PowerBoundInputs {
            alpha: 0.05,
            nq: 100,
            mutual_information: 0.1,
            delta: 0.0,
            eps1: 0.0,
            eps2: 0.0,
            sigma: 0.5,
        }
    }

    #[test]
    fn reference_value() {
        // Φ((ln 0.05 / 10 + 10 · 0.1) / 0.5) = Φ(1.400853545289202)
        let p = power_lower_bound(PowerBoundKind::Proposed, &inputs()).unwrap();
        assert!((p - 0.919_371_063_596_421).abs() < 1e-9);
    }

    #[test]
    fn proposed_equals_baseline_without_gain_or_error() {
        let i = inputs();
        assert_eq!(
            power_lower_bound(PowerBoundKind::Proposed, &i).unwrap(),
            power_lower_bound(PowerBoundKind::Baseline, &i).unwrap()
        );
    }

    #[test]
    fn zero_denominator_is_degenerate() {
        let i = PowerBoundInputs {
            sigma: 0.0,
            ..inputs()
        };
        assert!(matches!(
            power_lower_bound(PowerBoundKind::Baseline, &i),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn monotone_on_a_grid() {
        for &eps2 in &[0.0, 0.01, 0.05] {
            let mut last = 0.0;
            for k in 0..20 {
                let i = PowerBoundInputs {
                    delta: k as f64 * 0.01,
                    eps1: 0.01,
                    eps2,
                    ..inputs()
                };
                let p = power_lower_bound(PowerBoundKind::Proposed, &i).unwrap();
                assert!(p >= last);
                last = p;
            }
        }
        for &delta in &[0.0, 0.1] {
            let mut last = 1.0;
            for k in 0..20 {
                let i = PowerBoundInputs {
                    delta,
                    eps2: k as f64 * 0.005,
                    ..inputs()
                };
                let p = power_lower_bound(PowerBoundKind::Proposed, &i).unwrap();
                assert!(p <= last);
                last = p;
            }
        }
    }

    #[test]
    fn bound_approaches_one_with_budget_under_positive_drift() {
        let mut last = 0.0;
        for nq in [10, 50, 100, 500, 1000, 5000, 20_000] {
            let i = PowerBoundInputs {
                nq,
                eps1: 0.001,
                delta: 0.05,
                ..inputs()
            };
            assert!(i.drift(PowerBoundKind::Proposed) > 0.0);
            let p = power_lower_bound(PowerBoundKind::Proposed, &i).unwrap();
            assert!(p >= last);
            last = p;
        }
        assert!(last > 1.0 - 1e-9);
    }

    #[test]
    fn partition_quantities_for_an_informative_cell() {
        let s = PartitionedScenario {
            posteriors: vec![0.5, 0.5, 0.95, 0.05],
            model_posteriors: vec![0.5, 0.5, 0.95, 0.05],
            weights: vec![0.25; 4],
            cells: vec![vec![0, 1], vec![2, 3]],
        };
        let q = s.cell_quantities().unwrap();
        assert!(q[0].mutual_information.abs() < 1e-15);
        let h = crate::theory::info::binary_entropy(0.95);
        assert!((q[1].mutual_information - (std::f64::consts::LN_2 - h)).abs() < 1e-14);
        let inp = s.power_inputs(0.05, 100).unwrap();
        assert_eq!(inp.eps1, 0.0);
        assert_eq!(inp.eps2, 0.0);
        // global I is half the informative cell's
        assert!((inp.delta - inp.mutual_information).abs() < 1e-14);
    }

    #[test]
    fn partition_must_cover_support() {
        let s = PartitionedScenario {
            posteriors: vec![0.5, 0.9],
            model_posteriors: vec![0.5, 0.9],
            weights: vec![0.5, 0.5],
            cells: vec![vec![0]],
        };
        assert!(s.cell_quantities().is_err());
    }
}
