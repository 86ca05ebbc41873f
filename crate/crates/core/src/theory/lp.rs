//! The information-maximizing reweighting of a discrete support.
//!
//! Given posteriors `P(Z=0|s_i)` and a target class prior `u`, find the mass
//! function `G` maximizing `I(S; Z)` subject to `Σ P(Z=0|s_i) G(s_i) = u`.
//! Because `H(Z) = H(u)` is fixed by the constraint this is the linear program
//!
//! ```text
//!     min Σ H(P(Z|s_i)) G(s_i)   s.t.  Σ P(Z=0|s_i) G(s_i) = u,  Σ G = 1,  G ≥ 0
//! ```
//!
//! whose basic feasible solutions have at most two non-zero entries.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::theory::info::{binary_entropy, DiscreteScenario};

/// Tolerance for treating a posterior as equal to the target prior.
const FEASIBILITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    /// Optimal weights over the input cells.
    pub scenario: DiscreteScenario,
    pub mutual_information: f64,
    /// Indices with non-zero weight.
    pub support: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BimodalSolution {
    pub scenario: DiscreteScenario,
    pub mutual_information: f64,
    /// `(class-0 mode, class-1 mode)`.
    pub support: (usize, usize),
    /// All posteriors are equal, so every feasible mass function has zero
    /// information and the weights are a conventional choice.
    pub degenerate: bool,
}

fn check_inputs(cells: &[f64], u: f64) -> Result<()> {
    if cells.len() < 2 {
        return Err(Error::Domain(format!(
            "need at least 2 cells, got {}",
            cells.len()
        )));
    }
    for &c in cells {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::Domain(format!("posterior {c} outside [0, 1]")));
        }
    }
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::Domain(format!("target prior {u} outside [0, 1]")));
    }
    let lo = cells.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = cells.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if u < lo - FEASIBILITY_TOLERANCE || u > hi + FEASIBILITY_TOLERANCE {
        return Err(Error::Infeasible(format!(
            "target prior {u} outside the posterior range [{lo}, {hi}]"
        )));
    }
    Ok(())
}

/// Solves the program by enumerating every basic feasible solution: single
/// cells whose posterior equals `u`, and pairs of cells bracketing `u`.
///
/// Among optimal vertices the first one in enumeration order wins (single
/// cells in index order, then pairs `(i, j)` with `i < j` lexicographically).
pub fn mi_max_lp(cells: &[f64], u: f64) -> Result<LpSolution> {
    check_inputs(cells, u)?;
    let entropies: Vec<f64> = cells.iter().map(|&c| binary_entropy(c)).collect();
    let mut best: Option<(f64, Vec<(usize, f64)>)> = None;
    let mut consider = |objective: f64, vertex: Vec<(usize, f64)>| {
        if best.as_ref().map_or(true, |(b, _)| objective < *b) {
            best = Some((objective, vertex));
        }
    };
    for (i, &c) in cells.iter().enumerate() {
        if (c - u).abs() <= FEASIBILITY_TOLERANCE {
            consider(entropies[i], vec![(i, 1.0)]);
        }
    }
    for i in 0..cells.len() {
        for j in (i + 1)..cells.len() {
            let (ci, cj) = (cells[i], cells[j]);
            if ci == cj {
                continue;
            }
            let gi = (u - cj) / (ci - cj);
            if !(0.0..=1.0).contains(&gi) {
                continue;
            }
            let gj = 1.0 - gi;
            consider(
                gi * entropies[i] + gj * entropies[j],
                vec![(i, gi), (j, gj)],
            );
        }
    }
    let (objective, vertex) = best.ok_or_else(|| {
        Error::Infeasible(format!("no basic feasible solution for target prior {u}"))
    })?;
    let mut weights = vec![0.0; cells.len()];
    for &(i, g) in &vertex {
        weights[i] = g;
    }
    let support = (0..cells.len()).filter(|&i| weights[i] > 0.0).collect();
    Ok(LpSolution {
        scenario: DiscreteScenario::new(cells.to_vec(), weights)?,
        mutual_information: binary_entropy(u) - objective,
        support,
    })
}

fn argmax_first(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Closed-form optimum: all mass on the two most extreme posteriors, split so
/// that the class prior is `u`.
pub fn bimodal_closed_form(cells: &[f64], u: f64) -> Result<BimodalSolution> {
    check_inputs(cells, u)?;
    let i0 = argmax_first(cells.iter().copied());
    let i1 = argmax_first(cells.iter().map(|c| 1.0 - c));
    let (p0, p1) = (cells[i0], cells[i1]);
    let mut weights = vec![0.0; cells.len()];
    if p0 == p1 {
        weights[0] = 0.5;
        weights[1] = 0.5;
        let scenario = DiscreteScenario::new(cells.to_vec(), weights)?;
        return Ok(BimodalSolution {
            scenario,
            mutual_information: 0.0,
            support: (0, 1),
            degenerate: true,
        });
    }
    let g0 = ((u - p1) / (p0 - p1)).clamp(0.0, 1.0);
    weights[i0] = g0;
    weights[i1] = 1.0 - g0;
    let objective = g0 * binary_entropy(p0) + (1.0 - g0) * binary_entropy(p1);
    Ok(BimodalSolution {
        scenario: DiscreteScenario::new(cells.to_vec(), weights)?,
        mutual_information: binary_entropy(u) - objective,
        support: (i0, i1),
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn three_cell_example() {
        let s = mi_max_lp(&[0.9, 0.5, 0.1], 0.5).unwrap();
        assert_eq!(s.support, vec![0, 2]);
        assert!((s.scenario.weights()[0] - 0.5).abs() < 1e-15);
        assert!((s.scenario.weights()[2] - 0.5).abs() < 1e-15);
        assert!((s.mutual_information - 0.368_064_207_168_497_07).abs() < 1e-12);

        let c = bimodal_closed_form(&[0.9, 0.5, 0.1], 0.5).unwrap();
        assert_eq!(c.scenario.weights(), &[0.5, 0.0, 0.5]);
        assert!(!c.degenerate);
    }

    #[test]
    fn prior_at_an_extreme_forces_a_point_mass() {
        let s = mi_max_lp(&[0.8, 0.2], 0.8).unwrap();
        assert_eq!(s.scenario.weights(), &[1.0, 0.0]);
        let c = bimodal_closed_form(&[0.8, 0.2], 0.8).unwrap();
        assert_eq!(c.scenario.weights(), &[1.0, 0.0]);
    }

    #[test]
    fn brute_force_grid_confirms_three_cell_optimum() {
        // Grid over the simplex; the prior constraint is one linear equation, so
        // parametrize by g0 and solve for g1, g2.
        let cells = [0.9, 0.5, 0.1];
        let mut best = f64::NEG_INFINITY;
        for i in 0..=1000 {
            let g0 = i as f64 / 1000.0;
            // 0.9 g0 + 0.5 g1 + 0.1 g2 = 0.5, g0 + g1 + g2 = 1
            let g2 = g0;
            let g1 = 1.0 - 2.0 * g0;
            if g1 < 0.0 {
                continue;
            }
            let w = [g0, g1, g2];
            let mi = crate::theory::info::mutual_information(&cells, &w).unwrap();
            best = best.max(mi);
        }
        let lp = mi_max_lp(&cells, 0.5).unwrap();
        assert!((lp.mutual_information - best).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_degenerate_inputs() {
        assert!(matches!(
            mi_max_lp(&[0.6, 0.4], 0.8),
            Err(Error::Infeasible(_))
        ));
        assert!(matches!(
            bimodal_closed_form(&[0.6, 0.4], 0.1),
            Err(Error::Infeasible(_))
        ));
        let d = bimodal_closed_form(&[0.3, 0.3, 0.3], 0.3).unwrap();
        assert!(d.degenerate);
        assert_eq!(d.scenario.weights(), &[0.5, 0.5, 0.0]);
        assert_eq!(d.mutual_information, 0.0);
    }

    /// Generic enumeration of basic solutions of `A g = b, g ≥ 0` for the
    /// two-row system, by solving every 2×2 (and 1×1-consistent) basis with
    /// Cramer's rule.
    fn dense_basic_solutions(cells: &[f64], u: f64) -> f64 {
        let l = cells.len();
        let h: Vec<f64> = cells.iter().map(|&c| binary_entropy(c)).collect();
        let mut best = f64::INFINITY;
        for i in 0..l {
            for j in 0..l {
                if i == j {
                    // degenerate basis: one column must satisfy both rows
                    if (cells[i] - u).abs() < 1e-12 {
                        best = best.min(h[i]);
                    }
                    continue;
                }
                // [c_i c_j; 1 1] [g_i; g_j] = [u; 1]
                let det = cells[i] - cells[j];
                if det.abs() < 1e-15 {
                    continue;
                }
                let gi = (u - cells[j]) / det;
                let gj = (cells[i] - u) / det;
                if gi >= -1e-15 && gj >= -1e-15 {
                    best = best.min(gi * h[i] + gj * h[j]);
                }
            }
        }
        binary_entropy(u) - best
    }

    #[test]
    fn vertex_enumeration_matches_dense_basis_enumeration() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let cells: Vec<f64> = (0..10).map(|_| rng.gen_range(0.0..1.0)).collect();
            let lo = cells.iter().cloned().fold(1.0, f64::min);
            let hi = cells.iter().cloned().fold(0.0, f64::max);
            let u = rng.gen_range(lo..hi);
            let lp = mi_max_lp(&cells, u).unwrap();
            assert!((lp.mutual_information - dense_basic_solutions(&cells, u)).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn closed_form_matches_lp(cells in proptest::collection::vec(0.0f64..=1.0, 2..20), t in 0.0f64..=1.0) {
            let lo = cells.iter().cloned().fold(1.0, f64::min);
            let hi = cells.iter().cloned().fold(0.0, f64::max);
            prop_assume!(hi > lo);
            let u = lo + t * (hi - lo);
            let lp = mi_max_lp(&cells, u).unwrap();
            let cf = bimodal_closed_form(&cells, u).unwrap();
            prop_assert!((lp.mutual_information - cf.mutual_information).abs() < 1e-9);
            let distinct: std::collections::BTreeSet<u64> =
                lp.support.iter().map(|&i| cells[i].to_bits()).collect();
            prop_assert!(distinct.len() <= 2);
            let prior: f64 = lp.scenario.prior0();
            prop_assert!((prior - u).abs() < 1e-9);
        }
    }
}
