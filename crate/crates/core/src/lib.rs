//! Numerical laboratory for a consumption-driven cell/nutrient system in one
//! space dimension.
//!
//! Cells with density `u` move by diffusion of strength `eps` and grow or die
//! at rate `(v - mu) / eps` depending on the local nutrient level `v`, which
//! they consume. As `eps -> 0` the cells concentrate into a moving Dirac mass
//! and the nutrient jumps between two branches of the level sets of
//! `Q(v) = v - mu ln v`.
//!
//! The crate is organized by role:
//!
//! - [`model`]: potentials, branch roots, grids, initial data and validation.
//! - [`ode`]: the diffusion-free point dynamics and their explicit limit.
//! - [`pde`]: the full system on a truncated domain.
//! - [`estimates`]: a-priori bounds measured on simulation records.
//! - [`limit`]: convergence measurements as `eps -> 0`.
//! - [`wave`]: traveling-wave profiles, minimal speed and front tracking.
//!
//! Interchangeable algorithms (point integrators, PDE schemes, initial-data
//! presets, estimates) implement a common trait and are looked up by name in
//! a [`registry::Registry`].

pub mod error;
pub mod estimates;
pub mod io;
pub mod limit;
pub mod model;
pub mod numerics;
pub mod ode;
pub mod pde;
pub mod presets;
pub mod registry;
pub mod scenario;
pub mod wave;

pub use error::{Error, Result};
