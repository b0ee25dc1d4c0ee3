//! Algebraic backbone of the model: grids and fields, the nutrient potential
//! and its branches, and the initial data with its validator.

mod grid;
mod initial;
mod potential;

pub use grid::{Field, Grid1D, ModelParams};
pub use initial::{
    phi_floor, validate_initial_data, InitialData, ValidationEntry, ValidationReport, ValidationThresholds,
};
pub(crate) use potential::qtilde;
pub use potential::{
    branch_roots, phi_potential, q_of_v, qtilde_of_w, qtilde_prime, BranchPair, DEGENERATE_LEVEL_TOL,
    PHI_QUADRATURE_TOL, ROOT_RESIDUAL_TOL,
};
