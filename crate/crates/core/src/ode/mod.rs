//! Diffusion-free dynamics at a fixed point `x` and their explicit limit.

mod integrators;
mod limit;

pub(crate) use integrators::crossing_from_above;
pub use integrators::{
    integrate_point, integrate_point_with, point_integrators, DirectSystem, HopfColeMidpoint, PointInit,
    PointIntegrator, PointParams, PointTrajectory, ReducedScalar, DEFAULT_POINT_METHOD, MAX_REL_TOL,
};
pub use limit::{limit_jump_time, limit_profile, phi_limit, JumpTime, LimitProfile};
