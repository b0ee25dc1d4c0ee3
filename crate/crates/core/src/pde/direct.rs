//! Strang splitting in the raw variables `(u, v)`: node-wise RK4 reaction and
//! Crank-Nicolson diffusion of `u` with zero-flux boundaries. Falls back to
//! backward Euler for a step whose Crank-Nicolson update loses positivity.

use rayon::prelude::*;

use super::{rk4, PdeScheme, SchemeConfig, Snapshot, Stepper};
use crate::error::{Error, Result};
use crate::model::{phi_floor, Field, Grid1D, InitialData, ModelParams};
use crate::numerics::solve_tridiagonal;
use crate::registry::Named;

pub struct DirectScheme;

impl Named for DirectScheme {
    fn name(&self) -> &'static str {
        "direct"
    }
}

impl PdeScheme for DirectScheme {
    fn description(&self) -> &'static str {
        "Strang splitting in (u, v) with Crank-Nicolson diffusion of u"
    }

    fn stepper(&self, params: &ModelParams, init: &InitialData, scheme: &SchemeConfig) -> Result<Box<dyn Stepper>> {
        if let Some(i) = init.u0.values().iter().position(|u| !(*u > 0.0)) {
            return Err(Error::Domain(format!(
                "direct variables need u0 > 0, node {i} underflows; use hopf_cole"
            )));
        }
        Ok(Box::new(DirectState {
            eps: params.eps,
            mu: params.mu,
            dx: params.grid().dx(),
            resolution: scheme.reaction_resolution,
            u: init.u0.values().to_vec(),
            v: init.v0.values().to_vec(),
        }))
    }
}

struct DirectState {
    eps: f64,
    mu: f64,
    dx: f64,
    resolution: f64,
    u: Vec<f64>,
    v: Vec<f64>,
}

fn react_node(u: &mut f64, v: &mut f64, h: f64, eps: f64, mu: f64, resolution: f64) {
    let f = |y: [f64; 2]| [y[0] * (y[1] - mu) / eps, -y[0] * y[1]];
    let mut y = [*u, *v];
    let mut left = h;
    while left > 0.0 {
        let rate = ((y[1] - mu).abs() / eps).max(y[0]).max((y[0] * y[1] / eps).sqrt());
        let hs = if rate * left > resolution {
            resolution / rate
        } else {
            left
        };
        y = rk4(&f, y, hs);
        left = if hs == left { 0.0 } else { left - hs };
    }
    *u = y[0];
    *v = y[1];
}

impl DirectState {
    fn react(&mut self, h: f64) {
        let (eps, mu, res) = (self.eps, self.mu, self.resolution);
        self.u
            .par_iter_mut()
            .zip(self.v.par_iter_mut())
            .with_min_len(256)
            .for_each(|(u, v)| react_node(u, v, h, eps, mu, res));
    }

    /// `(I - a D2) x = rhs` with ghost-node Neumann rows.
    fn solve(a: f64, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let mut lower = vec![-a; n];
        let mut upper = vec![-a; n];
        let diag = vec![1.0 + 2.0 * a; n];
        upper[0] = -2.0 * a;
        lower[n - 1] = -2.0 * a;
        solve_tridiagonal(&lower, &diag, &upper, rhs)
    }

    fn diffuse(&mut self, dt: f64) {
        let n = self.u.len();
        let u = &self.u;
        let a = 0.5 * self.eps * dt / (self.dx * self.dx);
        let mut rhs = vec![0.0; n];
        rhs[0] = u[0] + 2.0 * a * (u[1] - u[0]);
        rhs[n - 1] = u[n - 1] + 2.0 * a * (u[n - 2] - u[n - 1]);
        for i in 1..n - 1 {
            rhs[i] = u[i] + a * (u[i - 1] - 2.0 * u[i] + u[i + 1]);
        }
        let cn = Self::solve(a, &rhs);
        self.u = if cn.iter().all(|x| *x > 0.0) {
            cn
        } else {
            Self::solve(2.0 * a, u)
        };
    }
}

impl Stepper for DirectState {
    fn max_dt(&self, cfl: f64) -> f64 {
        let u_max = self.u.iter().copied().fold(0.0, f64::max);
        let dev = self.v.iter().map(|v| (v - self.mu).abs()).fold(0.0, f64::max);
        let rate = (self.eps * u_max).max(dev);
        if rate > 0.0 {
            cfl * self.eps / rate
        } else {
            f64::INFINITY
        }
    }

    fn step(&mut self, dt: f64) -> Result<()> {
        self.react(0.5 * dt);
        self.diffuse(dt);
        self.react(0.5 * dt);
        Ok(())
    }

    fn snapshot(&self, grid: Grid1D, t: f64) -> Result<Snapshot> {
        let floor = phi_floor(self.eps);
        let eps = self.eps;
        let phi = self
            .u
            .iter()
            .map(|u| if *u > 0.0 { (eps * u.ln()).max(floor) } else { floor })
            .collect();
        Ok(Snapshot {
            t,
            u: Field::new(grid, self.u.clone())?,
            v: Field::new(grid, self.v.clone())?,
            w: Field::new(grid, self.v.iter().map(|v| v.ln()).collect())?,
            phi: Field::new(grid, phi)?,
        })
    }

    fn non_finite(&self) -> Option<&'static str> {
        if self.u.iter().any(|u| !u.is_finite()) {
            Some("u")
        } else if self.v.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            Some("v")
        } else {
            None
        }
    }
}
