//! Hardy, Sobolev and Trudinger-type inequalities weighted by the boundary
//! distance: constants, grid quadratures and an audit of the localization argument.

mod chain;
mod constants;
mod family;
mod norms;
mod report;

pub use chain::{chain_audit, power_sum_sides, split_sides, ChainReport, ChainStep, StepKind};
pub use constants::{
    c2_constant, c2_threshold, conjugate_exponent, constant_a, default_c1, omega, phi_n, sigma_q, sigma_q_with,
    sobolev_bound, C2Value, TheoreticalConstants,
};
pub use family::{hardy_scan, hardy_search_family, standard_family, HardyCase, HardyScan, TestFunction};
pub use norms::{exponential_integral, hardy_quotient, m_norm, trudinger_integral, weighted_lhs, weighted_rhs};
pub use report::{
    growth_check, sigma_scan, trudinger_suite, weighted_sobolev_suite, write_sigma_csv, GrowthCheck, InequalityRecord,
    SigmaRow, QUADRATURE_BAND,
};
