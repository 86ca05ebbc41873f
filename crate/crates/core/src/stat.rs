//! The sequential likelihood-ratio statistic.
//!
//! After `n` queried labels `z_1..z_n` with predicted probabilities
//! `Q_i(z_i | s_i)` the statistic is
//!
//! ```text
//!     w_n = Π P̂(z_i) / Q_i(z_i | s_i),     P̂(Z = 1) = k / n
//! ```
//!
//! where `k` counts the ones. The numerator is the Bernoulli likelihood of the
//! label sequence maximized over the class prior, so it has to be re-evaluated
//! from `(k, n)` at every step rather than accumulated. Everything is kept in
//! natural-log space; `H0` is rejected the first time `log w_n ≤ log α`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::Label;

/// Log of the maximized Bernoulli likelihood `max_p p^k (1-p)^(n-k)`.
///
/// Uses `0 · log 0 = 0`, so one-class sequences give exactly `0`.
pub fn log_prior_numerator(k: u64, n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Domain(
            "statistic is undefined before the first observation (n = 0)".into(),
        ));
    }
    if k > n {
        return Err(Error::Domain(format!("count of ones {k} exceeds n = {n}")));
    }
    Ok(xlogx_ratio(k, n) + xlogx_ratio(n - k, n))
}

fn xlogx_ratio(count: u64, n: u64) -> f64 {
    if count == 0 {
        0.0
    } else {
        let c = count as f64;
        c * (c / n as f64).ln()
    }
}

/// Validated significance level with its logarithm precomputed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SignificanceLevel {
    alpha: f64,
    log_alpha: f64,
}

impl SignificanceLevel {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Config(format!(
                "significance level must lie in (0, 1), got {alpha}"
            )));
        }
        Ok(Self {
            alpha,
            log_alpha: alpha.ln(),
        })
    }

    pub fn value(&self) -> f64 {
        self.alpha
    }

    pub fn ln(&self) -> f64 {
        self.log_alpha
    }
}

impl TryFrom<f64> for SignificanceLevel {
    type Error = Error;
    fn try_from(alpha: f64) -> Result<Self> {
        Self::new(alpha)
    }
}

impl From<SignificanceLevel> for f64 {
    fn from(a: SignificanceLevel) -> f64 {
        a.alpha
    }
}

/// Outcome of the anytime decision rule at one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    /// `w_n ≤ α`: reject the null.
    Reject,
    /// Budget exhausted without rejection.
    Retain,
    /// Keep querying.
    Continue,
}

impl Verdict {
    pub fn is_terminal(self) -> bool {
        !matches!(self, Verdict::Continue)
    }
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Verdict::Reject => "reject",
            Verdict::Retain => "retain",
            Verdict::Continue => "continue",
        };
        f.write_str(s)
    }
}

/// Decision rule on a raw `log w_n` value.
pub fn decide_log_w(log_w: f64, alpha: SignificanceLevel, labels_remaining: u64) -> Verdict {
    if log_w <= alpha.ln() {
        Verdict::Reject
    } else if labels_remaining == 0 {
        Verdict::Retain
    } else {
        Verdict::Continue
    }
}

/// Running state of the test statistic.
///
/// Invariants: `k ≤ n`, `log_denominator ≤ 0`, and `log_w` always equals
/// `log_prior_numerator(k, n) - log_denominator` (zero before any observation).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EProcessState {
    n: u64,
    k: u64,
    log_denominator: f64,
    // Neumaier running compensation for `log_denominator`.
    compensation: f64,
    log_w: f64,
}

impl EProcessState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Steps observed so far.
    pub fn n(&self) -> u64 {
        self.n
    }

    /// Number of observed ones.
    pub fn k(&self) -> u64 {
        self.k
    }

    /// `Σ log Q_i(z_i | s_i)`.
    pub fn log_denominator(&self) -> f64 {
        self.log_denominator + self.compensation
    }

    pub fn log_w(&self) -> f64 {
        self.log_w
    }

    /// Adds one observation. `q_z` is the predicted probability of the label
    /// that was actually observed and must already be clipped into `(0, 1)`.
    pub fn push(&self, z: Label, q_z: f64) -> Result<Self> {
        if !(q_z > 0.0 && q_z < 1.0) {
            return Err(Error::Contract(format!(
                "predicted probability {q_z} outside (0, 1); classifier output was not clipped"
            )));
        }
        let n = self.n + 1;
        let k = self.k + u64::from(z.is_one());
        let term = q_z.ln();
        let log_denominator = self.log_denominator + term;
        let compensation = self.compensation
            + if self.log_denominator.abs() >= term.abs() {
                (self.log_denominator - log_denominator) + term
            } else {
                (term - log_denominator) + self.log_denominator
            };
        let log_w = log_prior_numerator(k, n)? - (log_denominator + compensation);
        Ok(Self {
            n,
            k,
            log_denominator,
            compensation,
            log_w,
        })
    }

    pub fn decide(&self, alpha: SignificanceLevel, labels_remaining: u64) -> Verdict {
        decide_log_w(self.log_w, alpha, labels_remaining)
    }
}
