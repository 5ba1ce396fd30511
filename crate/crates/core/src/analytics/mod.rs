//! Closed-form results for the complete graph.
//!
//! * [`scaling`]: the `N -> infinity` halting-time density, its CDF and Laplace
//!   transform, and the joint law with the last-step duration.
//! * [`moments`]: exact rational normalized moments.
//! * [`finite`]: exact finite-`N` halting laws.
//! * [`cumulants`]: cumulant trajectories of the number of empty vertices.

pub mod cumulants;
pub mod finite;
pub mod moments;
pub mod scaling;

use thiserror::Error;

pub use cumulants::{cumulant_solution, empty_vertex_cumulants, gaussian_scaling_pdf, CumulantSolution};
pub use finite::{
    hypoexp_halting_pdf, hypoexp_weights, laplace_q_finite, laplace_qm_localized, mean_halting_finite,
    HYPOEXP_MAX_M0,
};
pub use moments::{normalized_moment, scaled_moment, RationalMoment, MAX_MOMENT_ORDER};
pub use scaling::{
    joint_density_r, joint_laplace_r, joint_moment, laplace_q, last_step_moment_ratio, last_step_pdf,
    scaled_halting_cdf, scaled_halting_pdf, scaled_joint_pdf, BRANCH_POINT,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("{name} = {value} is outside the domain ({requirement})")]
    Domain {
        name: &'static str,
        value: f64,
        requirement: &'static str,
    },
    #[error("moment order p = {p} is outside the supported range 1..={max}")]
    MomentOrder { p: u32, max: u32 },
    #[error("unsupported: {what}")]
    Unsupported { what: String },
}
