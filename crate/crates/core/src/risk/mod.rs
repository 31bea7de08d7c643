//! Closed-form and Monte-Carlo ICL risks, optimal parameters, the
//! approximation-gap bound and the optimality checkers.

pub mod closed_form;
pub mod lsa_search;
pub mod monte_carlo;
pub mod optimality;

pub use closed_form::{
    excess_risk_gd_beta, fourth_moment_closed, gap_lower_bound, h_gamma, lambda_h, min_risk_gd_beta, omega,
    optimal_gamma, risk_gd_beta_closed, risk_lsa_closed, risk_ltb_closed, OmegaMatrix,
};
pub use lsa_search::{central_gradient, minimize_lsa_risk, minimize_lsa_risk_with, LsaSearchOptions, LsaSearchResult};
pub use monte_carlo::{
    monte_carlo_fourth_moment, monte_carlo_paired, monte_carlo_risk, monte_carlo_risks, PairedReport, RiskReport,
    RunningStats, MC_SHARDS,
};
pub use optimality::{canonical_ltb_optimum, check_gd_beta_optimality, check_ltb_optimality, default_tolerance};
