//! Conservation checks on simulation records.
//!
//! The full system conserves `eps u + Q(v) + eps^2 (ln v)_xx` pointwise in
//! time, and with `u = -w_t` this becomes a Fisher/KPP-type equation for `w`
//! whose residual is measured here.

use serde::{Deserialize, Serialize};

use super::SolutionRecord;
use crate::error::{Error, Result};
use crate::model::{Field, InitialData, ModelParams};
use crate::numerics::{second_derivative, trapezoid_uniform};

/// Fraction of the domain at each end excluded from interior norms.
pub const INTERIOR_MARGIN: f64 = 0.1;

/// `Q~(w) - Q~(w0)` without cancellation when `w` is close to `w0`.
fn qtilde_increment(w: f64, w0: f64, mu: f64) -> f64 {
    let d = w - w0;
    w0.exp() * d.exp_m1() - mu * d
}

fn interior_range(params: &ModelParams) -> std::ops::Range<usize> {
    let g = params.grid();
    let span = params.x_max - params.x_min;
    let lo_x = params.x_min + INTERIOR_MARGIN * span;
    let hi_x = params.x_max - INTERIOR_MARGIN * span;
    let tol = 1e-9 * g.dx();
    let lo = (0..g.len()).find(|&i| g.node(i) >= lo_x - tol).unwrap_or(0);
    let hi = (0..g.len())
        .rev()
        .find(|&i| g.node(i) <= hi_x + tol)
        .unwrap_or(g.len() - 1);
    lo..(hi + 1).max(lo)
}

pub(crate) struct DriftProbe {
    eps: f64,
    mu: f64,
    dx: f64,
    u0: Vec<f64>,
    w0: Vec<f64>,
    interior: std::ops::Range<usize>,
}

impl DriftProbe {
    pub(crate) fn new(params: &ModelParams, init: &InitialData) -> Self {
        Self {
            eps: params.eps,
            mu: params.mu,
            dx: params.grid().dx(),
            u0: init.u0.values().to_vec(),
            w0: init.w0.values().to_vec(),
            interior: interior_range(params),
        }
    }

    /// Pointwise change of the conserved quantity since `t = 0`.
    pub(crate) fn pointwise(&self, u: &[f64], w: &[f64]) -> Vec<f64> {
        let dw: Vec<f64> = w.iter().zip(&self.w0).map(|(a, b)| a - b).collect();
        let d2 = second_derivative(&dw, self.dx);
        let e2 = self.eps * self.eps;
        (0..u.len())
            .map(|i| self.eps * (u[i] - self.u0[i]) + qtilde_increment(w[i], self.w0[i], self.mu) + e2 * d2[i])
            .collect()
    }

    pub(crate) fn interior_max(&self, u: &[f64], w: &[f64]) -> f64 {
        let d = self.pointwise(u, w);
        d[self.interior.clone()].iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    fn boundary_max(&self, u: &[f64], w: &[f64]) -> f64 {
        let d = self.pointwise(u, w);
        d.iter()
            .enumerate()
            .filter(|(i, _)| !self.interior.contains(i))
            .fold(0.0, |m, (_, x)| m.max(x.abs()))
    }
}

/// Invariant drift per snapshot, split into the interior and the boundary
/// margins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub times: Vec<f64>,
    pub interior: Vec<f64>,
    pub boundary: Vec<f64>,
}

impl DriftReport {
    pub fn max_interior(&self) -> f64 {
        self.interior.iter().fold(0.0, |m, x| m.max(*x))
    }
}

pub fn invariant_drift_report(record: &SolutionRecord, init: &InitialData, params: &ModelParams) -> DriftReport {
    let probe = DriftProbe::new(params, init);
    let mut report = DriftReport {
        times: Vec::new(),
        interior: Vec::new(),
        boundary: Vec::new(),
    };
    for s in &record.snapshots {
        report.times.push(s.t);
        report.interior.push(probe.interior_max(s.u.values(), s.w.values()));
        report.boundary.push(probe.boundary_max(s.u.values(), s.w.values()));
    }
    report
}

/// Largest interior drift of the conserved quantity at every snapshot.
pub fn invariant_drift(record: &SolutionRecord, init: &InitialData, params: &ModelParams) -> Vec<f64> {
    invariant_drift_report(record, init, params).interior
}

/// Residual of the `w` equation between consecutive snapshots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// Midpoints of the snapshot intervals.
    pub times: Vec<f64>,
    pub fields: Vec<Field>,
    /// Interior maximum norm per interval.
    pub max_norm: Vec<f64>,
    /// Interior L1 norm per interval.
    pub l1_norm: Vec<f64>,
}

impl ResidualReport {
    pub fn max(&self) -> f64 {
        self.max_norm.iter().fold(0.0, |m, x| m.max(*x))
    }

    pub fn max_l1(&self) -> f64 {
        self.l1_norm.iter().fold(0.0, |m, x| m.max(*x))
    }
}

/// Residual of `eps w_t - eps^2 w_xx - Q~(w) + Q~(w0) + eps u0 + eps^2 w0_xx`,
/// with the time derivative taken between consecutive snapshots and the
/// other terms averaged over the two.
pub fn w_reformulation_residual(
    record: &SolutionRecord,
    init: &InitialData,
    params: &ModelParams,
) -> Result<ResidualReport> {
    if record.snapshots.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "the residual needs two snapshots, record has {}",
            record.snapshots.len()
        )));
    }
    let grid = *record.grid();
    let dx = grid.dx();
    let (eps, mu) = (params.eps, params.mu);
    let w0 = init.w0.values();
    let u0 = init.u0.values();
    let interior = interior_range(params);

    let mut report = ResidualReport {
        times: Vec::new(),
        fields: Vec::new(),
        max_norm: Vec::new(),
        l1_norm: Vec::new(),
    };
    for pair in record.snapshots.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let dt = b.t - a.t;
        let (wa, wb) = (a.w.values(), b.w.values());
        let mean_dw: Vec<f64> = (0..wa.len()).map(|i| 0.5 * (wa[i] + wb[i]) - w0[i]).collect();
        let d2 = second_derivative(&mean_dw, dx);
        let r: Vec<f64> = (0..wa.len())
            .map(|i| {
                let q = 0.5 * (qtilde_increment(wa[i], w0[i], mu) + qtilde_increment(wb[i], w0[i], mu));
                eps * (wb[i] - wa[i]) / dt - eps * eps * d2[i] - q + eps * u0[i]
            })
            .collect();
        let abs: Vec<f64> = r[interior.clone()].iter().map(|x| x.abs()).collect();
        report.times.push(0.5 * (a.t + b.t));
        report.max_norm.push(abs.iter().fold(0.0, |m, x| m.max(*x)));
        report.l1_norm.push(trapezoid_uniform(&abs, dx));
        report.fields.push(Field::new(grid, r)?);
    }
    Ok(report)
}
