//! Analytical side of the toolkit: special functions, effective SNR
//! densities, the flow-balance solver and the i.i.d. Rayleigh closed forms.
//!
//! Everything here is a pure function of its inputs.

mod closed_form;
mod dd;
mod density;
pub mod quadrature;
mod solver;
mod special;

pub use closed_form::{
    asymptotic_rate, closed_form_rate_ba_iid_rayleigh, closed_form_rate_conv_iid_rayleigh,
    high_snr_gap, low_snr_ratio, RateKind, SnrRegime, MAX_CLOSED_FORM_RELAYS,
};
pub use density::{expected_log_rate, EffectiveDensityContext, Side, TAIL_MULTIPLE};
pub use quadrature::{integrate, QuadOptions, QuadResult};
pub use solver::{
    conventional_rate_analytical, flow_imbalance, max_rate_analytical, solve_mu_star,
    MuSolverResult, SolverOptions,
};
pub use special::{exp_integral_e1, scaled_exp_integral_e1, EULER_MASCHERONI};
