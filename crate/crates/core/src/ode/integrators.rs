//! Adaptive implicit-midpoint integration of the diffusion-free dynamics at a
//! single point `x`.
//!
//! Three formulations are registered:
//!
//! - `hopf_cole` (default): the pair `(phi, w) = (eps ln u, ln v)`, which obeys
//!   `phi' = e^w - mu`, `w' = -e^{phi/eps}`. This is a canonical Hamiltonian
//!   system for `H = eps e^{phi/eps} + e^w - mu w = eps u + Q(v)`, so the
//!   symmetric midpoint rule keeps the first integral without secular drift,
//!   and exponentially small densities stay representable through `phi`.
//! - `reduced`: the scalar equation `v' = -v (K - Q(v)) / eps` obtained by
//!   eliminating `u` with the first integral; conservation is exact by
//!   construction but densities below `~1e-16 K / eps` are lost to
//!   cancellation in `K - Q(v)`.
//! - `direct`: the raw `(u, v)` system, kept for cross-validation.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::phi_floor;
use crate::numerics::{cumulative_trapezoid, trapezoid};
use crate::registry::{Named, Registry};

pub const DEFAULT_POINT_METHOD: &str = "hopf_cole";
/// Largest accepted relative tolerance.
pub const MAX_REL_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointParams {
    pub eps: f64,
    pub mu: f64,
}

impl From<&crate::model::ModelParams> for PointParams {
    fn from(p: &crate::model::ModelParams) -> Self {
        Self { eps: p.eps, mu: p.mu }
    }
}

/// Initial state at one point, stored through the log-density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointInit {
    pub phi0: f64,
    pub v0: f64,
}

impl PointInit {
    pub fn from_density(eps: f64, u0: f64, v0: f64) -> Result<Self> {
        if !(u0 > 0.0) {
            return Err(Error::Domain(format!("u0 must be positive, got {u0}")));
        }
        Ok(Self {
            phi0: eps * u0.ln(),
            v0,
        })
    }

    pub fn from_log_density(phi0: f64, v0: f64) -> Self {
        Self { phi0, v0 }
    }

    pub fn u0(&self, eps: f64) -> f64 {
        (self.phi0 / eps).exp()
    }
}

/// Samples of one point trajectory on the adaptive mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointTrajectory {
    pub method: String,
    pub eps: f64,
    pub mu: f64,
    pub times: Vec<f64>,
    pub u_values: Vec<f64>,
    pub v_values: Vec<f64>,
    pub phi_values: Vec<f64>,
    /// First-integral level `eps u0 + Q(v0)`.
    pub k_constant: f64,
}

impl PointTrajectory {
    /// `|eps u + Q(v) - K|` at every sample.
    pub fn invariant_drift(&self) -> Vec<f64> {
        self.u_values
            .iter()
            .zip(&self.v_values)
            .map(|(u, v)| (self.eps * u + v - self.mu * v.ln() - self.k_constant).abs())
            .collect()
    }

    pub fn max_invariant_drift(&self) -> f64 {
        self.invariant_drift().into_iter().fold(0.0, f64::max)
    }

    /// First time `v` falls through `mu`, by linear interpolation between the
    /// bracketing samples.
    pub fn crossing_time(&self, mu: f64) -> Option<f64> {
        crossing_from_above(&self.times, &self.v_values, mu)
    }

    /// `int_0^T u dt` by the trapezoid rule on the adaptive mesh.
    pub fn time_integral_u(&self) -> f64 {
        trapezoid(&self.times, &self.u_values)
    }

    /// Running `int_0^t u ds`.
    pub fn cumulative_u(&self) -> Vec<f64> {
        cumulative_trapezoid(&self.times, &self.u_values)
    }

    pub fn final_v(&self) -> f64 {
        *self.v_values.last().expect("trajectory has at least one sample")
    }
}

/// First crossing of `level` from above in a sampled signal.
pub(crate) fn crossing_from_above(times: &[f64], values: &[f64], level: f64) -> Option<f64> {
    if values.first().map_or(true, |v| *v <= level) {
        return None;
    }
    for i in 0..values.len().saturating_sub(1) {
        let (a, b) = (values[i], values[i + 1]);
        if a > level && b <= level {
            let s = (a - level) / (a - b);
            return Some(times[i] + s * (times[i + 1] - times[i]));
        }
    }
    None
}

/// A formulation of the point dynamics that can be integrated.
pub trait PointIntegrator: Named + Send + Sync {
    fn description(&self) -> &'static str;

    fn integrate(&self, params: PointParams, init: PointInit, t_end: f64, rel_tol: f64) -> Result<PointTrajectory>;
}

/// Registered point integrators.
pub fn point_integrators() -> &'static Registry<dyn PointIntegrator> {
    static REG: OnceLock<Registry<dyn PointIntegrator>> = OnceLock::new();
    REG.get_or_init(|| {
        Registry::<dyn PointIntegrator>::new("point integrator")
            .with(Box::new(HopfColeMidpoint))
            .with(Box::new(ReducedScalar))
            .with(Box::new(DirectSystem))
    })
}

/// Integrate with the default (`hopf_cole`) formulation.
pub fn integrate_point(params: PointParams, init: PointInit, t_end: f64, rel_tol: f64) -> Result<PointTrajectory> {
    integrate_point_with(DEFAULT_POINT_METHOD, params, init, t_end, rel_tol)
}

pub fn integrate_point_with(
    method: &str,
    params: PointParams,
    init: PointInit,
    t_end: f64,
    rel_tol: f64,
) -> Result<PointTrajectory> {
    check_inputs(params, init, t_end, rel_tol)?;
    point_integrators().get(method)?.integrate(params, init, t_end, rel_tol)
}

fn check_inputs(params: PointParams, init: PointInit, t_end: f64, rel_tol: f64) -> Result<()> {
    if !(params.eps > 0.0) || !(params.mu > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "eps and mu must be positive, got eps = {}, mu = {}",
            params.eps, params.mu
        )));
    }
    if !(init.v0 > 0.0) || !init.v0.is_finite() {
        return Err(Error::Domain(format!("v0 must be positive, got {}", init.v0)));
    }
    if !init.phi0.is_finite() {
        return Err(Error::Domain(format!("log-density {} is not finite", init.phi0)));
    }
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidParameter(format!("t_end must be >= 0, got {t_end}")));
    }
    if !(rel_tol > 0.0 && rel_tol <= MAX_REL_TOL) {
        return Err(Error::InvalidParameter(format!(
            "rel_tol must lie in (0, {MAX_REL_TOL}], got {rel_tol}"
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// generic adaptive implicit midpoint for systems of dimension <= 2

type State = [f64; 2];

trait MidpointSystem {
    fn rhs(&self, y: State) -> State;
    fn jacobian(&self, y: State) -> [[f64; 2]; 2];
    /// Step cap resolving the fastest physical rate at `y`.
    fn max_step(&self, y: State) -> f64;
    /// Hard failure check on an accepted state.
    fn check(&self, _t: f64, _y: State) -> Result<()> {
        Ok(())
    }
    /// First integral and its gradient, when the system has one to restore.
    fn invariant(&self, _y: State) -> Option<(f64, State)> {
        None
    }
}

/// Pull `y` back onto the level set `H = level` along `grad H`.
fn project<S: MidpointSystem>(sys: &S, mut y: State, level: f64) -> State {
    for _ in 0..2 {
        let Some((h, g)) = sys.invariant(y) else {
            return y;
        };
        let norm = g[0] * g[0] + g[1] * g[1];
        if !(norm > 0.0) || h == level {
            break;
        }
        let lambda = (h - level) / norm;
        let next = [y[0] - lambda * g[0], y[1] - lambda * g[1]];
        if !(next[0].is_finite() && next[1].is_finite()) {
            break;
        }
        y = next;
    }
    y
}

fn midpoint_step<S: MidpointSystem>(sys: &S, y: State, h: f64) -> Option<State> {
    // z = (y_n + y_{n+1}) / 2 solves z = y + h/2 f(z)
    let f0 = sys.rhs(y);
    let mut z = [y[0] + 0.5 * h * f0[0], y[1] + 0.5 * h * f0[1]];
    for _ in 0..40 {
        let f = sys.rhs(z);
        let g = [z[0] - y[0] - 0.5 * h * f[0], z[1] - y[1] - 0.5 * h * f[1]];
        let j = sys.jacobian(z);
        let a = 1.0 - 0.5 * h * j[0][0];
        let b = -0.5 * h * j[0][1];
        let c = -0.5 * h * j[1][0];
        let d = 1.0 - 0.5 * h * j[1][1];
        let det = a * d - b * c;
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let dz = [(d * g[0] - b * g[1]) / det, (a * g[1] - c * g[0]) / det];
        z = [z[0] - dz[0], z[1] - dz[1]];
        if !(z[0].is_finite() && z[1].is_finite()) {
            return None;
        }
        let small = |k: usize| dz[k].abs() <= 1e-15 * (1.0 + z[k].abs());
        if small(0) && small(1) {
            let out = [2.0 * z[0] - y[0], 2.0 * z[1] - y[1]];
            return if out[0].is_finite() && out[1].is_finite() {
                Some(out)
            } else {
                None
            };
        }
    }
    None
}

fn integrate_adaptive<S: MidpointSystem>(
    sys: &S,
    y0: State,
    t_end: f64,
    rel_tol: f64,
    h0: f64,
) -> Result<(Vec<f64>, Vec<State>)> {
    let mut times = vec![0.0];
    let mut states = vec![y0];
    let mut t = 0.0;
    let mut y = y0;
    let mut h = h0;
    let level = sys.invariant(y0).map(|(h, _)| h);
    while t < t_end {
        h = h.min(t_end - t).min(sys.max_step(y));
        let last = t_end - t <= h;
        if h < 1e-14 * t.max(1.0) {
            return Err(Error::Integrator {
                t,
                reason: format!("step size underflow ({h:e})"),
            });
        }
        let full = midpoint_step(sys, y, h);
        let half = midpoint_step(sys, y, 0.5 * h).and_then(|m| midpoint_step(sys, m, 0.5 * h));
        let (Some(full), Some(half)) = (full, half) else {
            h *= 0.25;
            continue;
        };
        let err = (0..2)
            .map(|k| (half[k] - full[k]).abs() / (3.0 * (1.0 + half[k].abs())))
            .fold(0.0, f64::max);
        if err <= rel_tol {
            t = if last { t_end } else { t + h };
            y = match level {
                Some(k) => project(sys, half, k),
                None => half,
            };
            sys.check(t, y)?;
            times.push(t);
            states.push(y);
            let grow = if err == 0.0 {
                2.0
            } else {
                (0.9 * (rel_tol / err).cbrt()).clamp(0.2, 2.0)
            };
            h *= grow;
        } else {
            h *= (0.9 * (rel_tol / err).cbrt()).clamp(0.1, 0.5);
        }
    }
    Ok((times, states))
}

fn first_integral(params: PointParams, init: PointInit) -> f64 {
    params.eps * init.u0(params.eps) + init.v0 - params.mu * init.v0.ln()
}

// ---------------------------------------------------------------------------

/// Midpoint rule on `(phi, w)`.
pub struct HopfColeMidpoint;

struct HopfColeSystem {
    eps: f64,
    mu: f64,
}

impl MidpointSystem for HopfColeSystem {
    fn rhs(&self, y: State) -> State {
        [y[1].exp() - self.mu, -(y[0] / self.eps).exp()]
    }

    fn jacobian(&self, y: State) -> [[f64; 2]; 2] {
        let u = (y[0] / self.eps).exp();
        [[0.0, y[1].exp()], [-u / self.eps, 0.0]]
    }

    fn max_step(&self, y: State) -> f64 {
        let u = (y[0] / self.eps).exp();
        let v = y[1].exp();
        let rate = ((v - self.mu).abs() / self.eps).max(u).max((u * v / self.eps).sqrt());
        if rate > 0.0 {
            1.0 / rate
        } else {
            f64::INFINITY
        }
    }

    fn invariant(&self, y: State) -> Option<(f64, State)> {
        let u = (y[0] / self.eps).exp();
        let v = y[1].exp();
        Some((self.eps * u + v - self.mu * y[1], [u, v - self.mu]))
    }
}

impl Named for HopfColeMidpoint {
    fn name(&self) -> &'static str {
        "hopf_cole"
    }
}

impl PointIntegrator for HopfColeMidpoint {
    fn description(&self) -> &'static str {
        "implicit midpoint on (phi, w) = (eps ln u, ln v)"
    }

    fn integrate(&self, params: PointParams, init: PointInit, t_end: f64, rel_tol: f64) -> Result<PointTrajectory> {
        let sys = HopfColeSystem {
            eps: params.eps,
            mu: params.mu,
        };
        let phi0 = init.phi0.max(phi_floor(params.eps));
        let (times, states) = integrate_adaptive(&sys, [phi0, init.v0.ln()], t_end, rel_tol, params.eps / 10.0)?;
        let phi_values: Vec<f64> = states.iter().map(|s| s[0]).collect();
        let u_values = phi_values.iter().map(|p| (p / params.eps).exp()).collect();
        let v_values = states.iter().map(|s| s[1].exp()).collect();
        Ok(PointTrajectory {
            method: self.name().into(),
            eps: params.eps,
            mu: params.mu,
            times,
            u_values,
            v_values,
            phi_values,
            k_constant: first_integral(params, PointInit { phi0, v0: init.v0 }),
        })
    }
}

/// Scalar equation for `v` with `u` eliminated through the first integral.
pub struct ReducedScalar;

struct ReducedSystem {
    eps: f64,
    mu: f64,
    k: f64,
    u_tol: f64,
}

impl ReducedSystem {
    fn density(&self, v: f64) -> f64 {
        (self.k - (v - self.mu * v.ln())) / self.eps
    }
}

impl MidpointSystem for ReducedSystem {
    fn rhs(&self, y: State) -> State {
        let v = y[0];
        [-v * self.density(v), 0.0]
    }

    fn jacobian(&self, y: State) -> [[f64; 2]; 2] {
        let v = y[0];
        [[-self.density(v) + (v - self.mu) / self.eps, 0.0], [0.0, 0.0]]
    }

    fn max_step(&self, y: State) -> f64 {
        let v = y[0];
        let rate = ((v - self.mu).abs() / self.eps).max(self.density(v).abs());
        if rate > 0.0 {
            1.0 / rate
        } else {
            f64::INFINITY
        }
    }

    fn check(&self, t: f64, y: State) -> Result<()> {
        if !(y[0] > 0.0) {
            return Err(Error::Integrator {
                t,
                reason: format!("nutrient left the positive half-line ({})", y[0]),
            });
        }
        let u = self.density(y[0]);
        if u < -self.u_tol {
            return Err(Error::Integrator {
                t,
                reason: format!("negative reconstructed density {u:e}"),
            });
        }
        Ok(())
    }
}

impl Named for ReducedScalar {
    fn name(&self) -> &'static str {
        "reduced"
    }
}

impl PointIntegrator for ReducedScalar {
    fn description(&self) -> &'static str {
        "implicit midpoint on v' = -v (K - Q(v)) / eps"
    }

    fn integrate(&self, params: PointParams, init: PointInit, t_end: f64, rel_tol: f64) -> Result<PointTrajectory> {
        let k = first_integral(params, init);
        let sys = ReducedSystem {
            eps: params.eps,
            mu: params.mu,
            k,
            u_tol: 10.0 * rel_tol * (1.0 + k.abs()) / params.eps,
        };
        let (times, states) = integrate_adaptive(&sys, [init.v0, 0.0], t_end, rel_tol, params.eps / 10.0)?;
        let v_values: Vec<f64> = states.iter().map(|s| s[0]).collect();
        let u_values: Vec<f64> = v_values.iter().map(|v| sys.density(*v).max(0.0)).collect();
        let phi_values = u_values
            .iter()
            .map(|u| {
                if *u > 0.0 {
                    params.eps * u.ln()
                } else {
                    phi_floor(params.eps)
                }
            })
            .collect();
        Ok(PointTrajectory {
            method: self.name().into(),
            eps: params.eps,
            mu: params.mu,
            times,
            u_values,
            v_values,
            phi_values,
            k_constant: k,
        })
    }
}

/// Midpoint rule on the raw `(u, v)` pair.
pub struct DirectSystem;

struct DirectRhs {
    eps: f64,
    mu: f64,
}

impl MidpointSystem for DirectRhs {
    fn rhs(&self, y: State) -> State {
        let (u, v) = (y[0], y[1]);
        [u * (v - self.mu) / self.eps, -u * v]
    }

    fn jacobian(&self, y: State) -> [[f64; 2]; 2] {
        let (u, v) = (y[0], y[1]);
        [[(v - self.mu) / self.eps, u / self.eps], [-v, -u]]
    }

    fn max_step(&self, y: State) -> f64 {
        let (u, v) = (y[0], y[1]);
        let rate = ((v - self.mu).abs() / self.eps)
            .max(u.abs())
            .max((u.abs() * v / self.eps).sqrt());
        if rate > 0.0 {
            1.0 / rate
        } else {
            f64::INFINITY
        }
    }

    fn invariant(&self, y: State) -> Option<(f64, State)> {
        let (u, v) = (y[0], y[1]);
        if !(v > 0.0) {
            return None;
        }
        Some((self.eps * u + v - self.mu * v.ln(), [self.eps, 1.0 - self.mu / v]))
    }

    fn check(&self, t: f64, y: State) -> Result<()> {
        if y[0] < 0.0 || !(y[1] > 0.0) {
            return Err(Error::Integrator {
                t,
                reason: format!("state left the positive quadrant: u = {:e}, v = {}", y[0], y[1]),
            });
        }
        Ok(())
    }
}

impl Named for DirectSystem {
    fn name(&self) -> &'static str {
        "direct"
    }
}

impl PointIntegrator for DirectSystem {
    fn description(&self) -> &'static str {
        "implicit midpoint on the (u, v) system"
    }

    fn integrate(&self, params: PointParams, init: PointInit, t_end: f64, rel_tol: f64) -> Result<PointTrajectory> {
        let sys = DirectRhs {
            eps: params.eps,
            mu: params.mu,
        };
        let u0 = init.u0(params.eps);
        let (times, states) = integrate_adaptive(&sys, [u0, init.v0], t_end, rel_tol, params.eps / 10.0)?;
        let u_values: Vec<f64> = states.iter().map(|s| s[0]).collect();
        let v_values = states.iter().map(|s| s[1]).collect();
        let phi_values = u_values
            .iter()
            .map(|u| {
                if *u > 0.0 {
                    params.eps * u.ln()
                } else {
                    phi_floor(params.eps)
                }
            })
            .collect();
        Ok(PointTrajectory {
            method: self.name().into(),
            eps: params.eps,
            mu: params.mu,
            times,
            u_values,
            v_values,
            phi_values,
            k_constant: first_integral(params, init),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{branch_roots, q_of_v};

    const P: PointParams = PointParams { eps: 0.01, mu: 1.0 };

    #[test]
    fn rejects_bad_tolerance() {
        let init = PointInit::from_density(0.01, 1.0, 2.0).unwrap();
        assert!(integrate_point(P, init, 1.0, 1e-3).is_err());
        assert!(integrate_point(P, init, 1.0, 0.0).is_err());
        assert!(integrate_point_with("rk45", P, init, 1.0, 1e-6).is_err());
    }

    #[test]
    fn vanishing_density_keeps_nutrient() {
        let init = PointInit::from_density(P.eps, 1e-200, 2.0).unwrap();
        for method in ["hopf_cole", "reduced", "direct"] {
            let traj = integrate_point_with(method, P, init, 1.0, 1e-8).unwrap();
            for v in &traj.v_values {
                assert!((v - 2.0).abs() < 1e-12, "{method}: {v}");
            }
        }
    }

    #[test]
    fn relaxes_to_lower_branch() {
        let init = PointInit::from_density(P.eps, 1.0, 2.0).unwrap();
        let traj = integrate_point(P, init, 10.0, 1e-9).unwrap();
        let k = P.eps + q_of_v(2.0, 1.0).unwrap();
        let expected = branch_roots(k, 1.0).unwrap().v_minus();
        assert!(
            (traj.final_v() - expected).abs() < 1e-6,
            "{} vs {expected}",
            traj.final_v()
        );
    }

    #[test]
    fn nutrient_is_non_increasing() {
        let init = PointInit::from_density(0.1, 0.1, 2.0).unwrap();
        for method in ["hopf_cole", "reduced", "direct"] {
            let traj = integrate_point_with(method, PointParams { eps: 0.1, mu: 1.0 }, init, 5.0, 1e-8).unwrap();
            for w in traj.v_values.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "{method}: {} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn crossing_interpolates_linearly() {
        let t = [0.0, 1.0, 2.0];
        let v = [2.0, 1.5, 0.5];
        assert_eq!(crossing_from_above(&t, &v, 1.0), Some(1.5));
        assert_eq!(crossing_from_above(&t, &[0.5, 0.4, 0.3], 1.0), None);
    }
}
