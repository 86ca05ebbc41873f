//! Exact information-theoretic quantities on discrete scenarios, the
//! information-maximizing linear program, power bounds and the Welch t-test.
//!
//! Natural logarithms throughout; information is in nats.

pub mod bounds;
pub mod info;
pub mod input;
pub mod lp;
pub mod special;
pub mod ttest;

pub use bounds::{
    power_lower_bound, CellQuantities, PartitionedScenario, PowerBoundInputs, PowerBoundKind,
};
pub use info::{
    binary_entropy, estimate_conditional_mi, information_density_mean, kl_divergence, kl_squared,
    log_ratio_variance, mutual_information, relative_entropy_variance, DiscreteScenario,
    KlDirection,
};
pub use input::{BoundReport, TheoryInput, TheoryReport};
pub use lp::{bimodal_closed_form, mi_max_lp, BimodalSolution, LpSolution};
pub use special::normal_cdf;
pub use ttest::{welch_t_test, WelchTest};
