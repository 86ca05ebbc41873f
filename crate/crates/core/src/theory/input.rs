//! Plain-text scenario files and the checks run on them.
//!
//! ```text
//! # posterior weight [model_posterior [cell]]
//! u = 0.5
//! alpha = 0.05
//! nq = 200
//! 0.50 0.25 0.50 0
//! 0.95 0.25 0.90 1
//! ```
//!
//! `posterior` is `P(Z=0|s)`. Without a `u` line the LP targets the scenario's
//! own class prior. Power bounds are evaluated only when every row carries a
//! model posterior and a cell label.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::theory::bounds::{
    power_lower_bound, CellQuantities, PartitionedScenario, PowerBoundInputs, PowerBoundKind,
};
use crate::theory::info::{relative_entropy_variance, DiscreteScenario};
use crate::theory::lp::{bimodal_closed_form, mi_max_lp, BimodalSolution, LpSolution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryInput {
    pub posteriors: Vec<f64>,
    pub weights: Vec<f64>,
    pub model_posteriors: Option<Vec<f64>>,
    pub cell_labels: Option<Vec<usize>>,
    pub u: Option<f64>,
    pub alpha: f64,
    pub nq: u64,
}

fn parse_number<T: std::str::FromStr>(line: usize, field: &str, text: &str) -> Result<T> {
    text.parse()
        .map_err(|_| Error::data_at(line, format!("cannot parse {field} `{text}`")))
}

impl TheoryInput {
    pub fn parse(text: &str) -> Result<Self> {
        let mut input = TheoryInput {
            posteriors: Vec::new(),
            weights: Vec::new(),
            model_posteriors: None,
            cell_labels: None,
            u: None,
            alpha: 0.05,
            nq: 1000,
        };
        let mut models = Vec::new();
        let mut cells = Vec::new();
        let mut widths = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some((key, value)) = content.split_once('=') {
                let value = value.trim();
                match key.trim() {
                    "u" => input.u = Some(parse_number(line, "u", value)?),
                    "alpha" => input.alpha = parse_number(line, "alpha", value)?,
                    "nq" => input.nq = parse_number(line, "nq", value)?,
                    other => return Err(Error::data_at(line, format!("unknown key `{other}`"))),
                }
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            if !(2..=4).contains(&fields.len()) {
                return Err(Error::data_at(
                    line,
                    format!("expected 2 to 4 columns, found {}", fields.len()),
                ));
            }
            input
                .posteriors
                .push(parse_number(line, "posterior", fields[0])?);
            input.weights.push(parse_number(line, "weight", fields[1])?);
            if let Some(f) = fields.get(2) {
                models.push(parse_number(line, "model posterior", f)?);
            }
            if let Some(f) = fields.get(3) {
                cells.push(parse_number(line, "cell", f)?);
            }
            widths.push((line, fields.len()));
        }
        let full = widths.first().map_or(2, |w| w.1);
        if let Some(&(line, _)) = widths.iter().find(|w| w.1 != full) {
            return Err(Error::data_at(line, "rows have differing column counts"));
        }
        if full >= 3 {
            input.model_posteriors = Some(models);
        }
        if full == 4 {
            input.cell_labels = Some(cells);
        }
        Ok(input)
    }

    pub fn scenario(&self) -> Result<DiscreteScenario> {
        DiscreteScenario::new(self.posteriors.clone(), self.weights.clone())
    }

    /// Support indices grouped by cell label, in order of first appearance.
    pub fn partition(&self) -> Option<PartitionedScenario> {
        let labels = self.cell_labels.as_ref()?;
        let model = self.model_posteriors.as_ref()?;
        let mut order: Vec<usize> = Vec::new();
        let mut cells: Vec<Vec<usize>> = Vec::new();
        for (i, &label) in labels.iter().enumerate() {
            match order.iter().position(|&l| l == label) {
                Some(k) => cells[k].push(i),
                None => {
                    order.push(label);
                    cells.push(vec![i]);
                }
            }
        }
        Some(PartitionedScenario {
            posteriors: self.posteriors.clone(),
            model_posteriors: model.clone(),
            weights: self.weights.clone(),
            cells,
        })
    }

    pub fn evaluate(&self) -> Result<TheoryReport> {
        let scenario = self.scenario()?;
        let prior0 = scenario.prior0();
        let u = self.u.unwrap_or(prior0);
        let bounds = match self.partition() {
            Some(p) => {
                let cells = p.cell_quantities()?;
                let inputs = p.power_inputs(self.alpha, self.nq)?;
                Some(BoundReport {
                    proposed: power_lower_bound(PowerBoundKind::Proposed, &inputs)?,
                    baseline: power_lower_bound(PowerBoundKind::Baseline, &inputs)?,
                    inputs,
                    cells,
                })
            }
            None => None,
        };
        Ok(TheoryReport {
            prior0,
            mutual_information: scenario.mutual_information(),
            relative_entropy_variance: relative_entropy_variance(
                prior0,
                scenario.cells(),
                scenario.weights(),
            )?,
            u,
            lp: mi_max_lp(scenario.cells(), u)?,
            closed_form: bimodal_closed_form(scenario.cells(), u)?,
            bounds,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub inputs: PowerBoundInputs,
    pub cells: Vec<CellQuantities>,
    pub proposed: f64,
    pub baseline: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub prior0: f64,
    pub mutual_information: f64,
    pub relative_entropy_variance: f64,
    pub u: f64,
    pub lp: LpSolution,
    pub closed_form: BimodalSolution,
    pub bounds: Option<BoundReport>,
}

#[cfg(test)]
mod tests {
    use super::*;

    const FILE: &str = "\
# example
u = 0.5
alpha = 0.05
nq = 200
0.5 0.25 0.5 0
0.5 0.25 0.5 0
0.95 0.25 0.94 1   # informative
0.05 0.25 0.06 1
";

    #[test]
    fn parses_keys_and_rows() {
        let t = TheoryInput::parse(FILE).unwrap();
        assert_eq!(t.posteriors, vec![0.5, 0.5, 0.95, 0.05]);
        assert_eq!(t.u, Some(0.5));
        assert_eq!(t.nq, 200);
        assert_eq!(t.cell_labels, Some(vec![0, 0, 1, 1]));
        let p = t.partition().unwrap();
        assert_eq!(p.cells, vec![vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn evaluates_lp_and_bounds() {
        let r = TheoryInput::parse(FILE).unwrap().evaluate().unwrap();
        assert_eq!(r.lp.support, vec![2, 3]);
        assert!((r.lp.mutual_information - r.closed_form.mutual_information).abs() < 1e-12);
        let b = r.bounds.unwrap();
        assert!(b.proposed > b.baseline);
    }

    #[test]
    fn two_column_files_skip_bounds() {
        let r = TheoryInput::parse("0.9 0.5\n0.1 0.5\n")
            .unwrap()
            .evaluate()
            .unwrap();
        assert!(r.bounds.is_none());
        assert!((r.u - 0.5).abs() < 1e-15);
    }

    #[test]
    fn errors_name_the_line() {
        let e = TheoryInput::parse("0.9 0.5\n0.1 x\n").unwrap_err();
        assert!(e.to_string().contains("row 2"), "{e}");
        let e = TheoryInput::parse("0.9 0.5\nfoo = 1\n").unwrap_err();
        assert!(e.to_string().contains("row 2"), "{e}");
        let e = TheoryInput::parse("0.9 0.5 0.4\n0.1 0.5\n").unwrap_err();
        assert!(e.to_string().contains("row 2"), "{e}");
    }
}
