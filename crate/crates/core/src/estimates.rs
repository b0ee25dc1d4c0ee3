//! A-priori bounds measured on simulation records.
//!
//! Each estimate turns one of the uniform-in-`eps` bounds of the theory into
//! a number and an empirical constant. A bound of the form `value <= C eps^p`
//! reports `value / eps^p` as its fitted constant; over an `eps`-sweep the
//! constants are combined by [`fit_sweep`], and their spread is the
//! falsifiable part of the claim.
//!
//! Suprema over time are maxima over snapshots, so the snapshot density
//! matters. Time integrals of `u` use the logarithmic mean between snapshots,
//! which is exact when `ln u` is linear in time.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{phi_potential, qtilde, InitialData, ModelParams};
use crate::numerics::{first_derivative, fit_line, log_mean, trapezoid, trapezoid_uniform, uniformity_ratio};
use crate::pde::{SolutionRecord, INTERIOR_MARGIN};
use crate::registry::{Named, Registry};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub name: String,
    pub eps: f64,
    pub value: f64,
    /// Human-readable form of the bound, e.g. `"C_R eps"`.
    pub bound_form: String,
    /// Power `p` of `eps` in the bound `value <= C eps^p`.
    pub eps_power: f64,
    /// `value / eps^p`.
    pub fitted_constant: f64,
    pub pass: bool,
}

impl EstimateReport {
    fn new(name: &str, eps: f64, value: f64, bound_form: &str, eps_power: f64, pass: bool) -> Self {
        Self {
            name: name.into(),
            eps,
            value,
            bound_form: bound_form.into(),
            eps_power,
            fitted_constant: value / eps.powf(eps_power),
            pass,
        }
    }
}

/// Tolerances and ceilings of the estimate suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateConfig {
    /// Half-width `R` of the window `|x| <= R` of the local estimates.
    pub radius: f64,
    /// Generic ceiling for fitted constants.
    pub ceiling: f64,
    /// Allowed excess of `w` over the upper branch.
    pub w_upper_tol: f64,
    /// Relative tolerance of the identity `int u dt = w0 - w(T)`.
    pub identity_rel_tol: f64,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            radius: 5.0,
            ceiling: 1e3,
            w_upper_tol: 1e-8,
            identity_rel_tol: 0.02,
        }
    }
}

/// Everything an estimate may look at.
pub struct EstimateContext<'a> {
    pub record: &'a SolutionRecord,
    pub init: &'a InitialData,
    pub params: &'a ModelParams,
    pub config: EstimateConfig,
}

pub trait Estimate: Named + Send + Sync {
    fn description(&self) -> &'static str;
    fn evaluate(&self, ctx: &EstimateContext) -> Result<Vec<EstimateReport>>;
}

pub fn estimates() -> &'static Registry<dyn Estimate> {
    static REG: OnceLock<Registry<dyn Estimate>> = OnceLock::new();
    REG.get_or_init(|| {
        Registry::<dyn Estimate>::new("estimate")
            .with(Box::new(WBounds))
            .with(Box::new(NegativeBranchL1))
            .with(Box::new(TimeIntegralU))
            .with(Box::new(MassBound))
            .with(Box::new(PhiBounds))
            .with(Box::new(CompactnessBounds))
    })
}

/// Evaluate the named estimates, or all of them when `names` is empty.
pub fn run_estimates(ctx: &EstimateContext, names: &[&str]) -> Result<Vec<EstimateReport>> {
    let selected: Vec<&dyn Estimate> = if names.is_empty() {
        estimates().iter().collect()
    } else {
        names.iter().map(|n| estimates().get(n)).collect::<Result<_>>()?
    };
    let mut out = Vec::new();
    for e in selected {
        out.extend(e.evaluate(ctx)?);
    }
    Ok(out)
}

fn check_record(record: &SolutionRecord, init: &InitialData) -> Result<()> {
    if record.snapshots.is_empty() {
        return Err(Error::InsufficientData("record has no snapshots".into()));
    }
    if record.grid() != init.v0.grid() {
        return Err(Error::InvalidParameter(
            "record and initial data live on different grids".into(),
        ));
    }
    Ok(())
}

fn interior(params: &ModelParams) -> std::ops::Range<usize> {
    let span = params.x_max - params.x_min;
    let g = params.grid();
    let lo = g.nearest(params.x_min + INTERIOR_MARGIN * span);
    let hi = g.nearest(params.x_max - INTERIOR_MARGIN * span);
    lo..hi + 1
}

/// Margins of `w` against the two initial branches.
///
/// Items: `w_bounds.upper` (`max (w - w0_plus)`, must not exceed the
/// tolerance), `w_bounds.lower` (`min (w - w0_minus)`, informational) and
/// `w_bounds.lower_sqrt_eps` (`min (w - w0_minus) / sqrt(eps)`, reported
/// as the constant `C` of `w >= w0_minus - C sqrt(eps)`).
pub fn check_w_bounds(
    record: &SolutionRecord,
    init: &InitialData,
    config: &EstimateConfig,
) -> Result<Vec<EstimateReport>> {
    check_record(record, init)?;
    let eps = record.params.eps;
    let (wm, wp) = (init.w_minus(), init.w_plus());
    let mut upper = f64::NEG_INFINITY;
    let mut lower = f64::INFINITY;
    for s in &record.snapshots {
        for (i, w) in s.w.values().iter().enumerate() {
            upper = upper.max(w - wp[i]);
            lower = lower.min(w - wm[i]);
        }
    }
    let c = (-lower).max(0.0);
    Ok(vec![
        EstimateReport::new(
            "w_bounds.upper",
            eps,
            upper.max(0.0),
            "w <= w0_plus",
            0.0,
            upper <= config.w_upper_tol,
        ),
        EstimateReport::new("w_bounds.lower", eps, lower, "w - w0_minus (min)", 0.0, true),
        EstimateReport::new(
            "w_bounds.lower_sqrt_eps",
            eps,
            c,
            "w >= w0_minus - C sqrt(eps)",
            0.5,
            c / eps.sqrt() <= config.ceiling,
        ),
    ])
}

/// `sup_t int_{|x|<=R} |Q~(w) - Q~(w0)| 1{w <= w0_minus} dx`, a bound of order `eps`.
pub fn negative_branch_l1(
    record: &SolutionRecord,
    init: &InitialData,
    radius: f64,
    config: &EstimateConfig,
) -> Result<EstimateReport> {
    check_record(record, init)?;
    let (eps, mu) = (record.params.eps, record.params.mu);
    let g = record.grid();
    let range = g.indices_within(radius);
    let wm = init.w_minus();
    let w0 = init.w0.values();
    let mut sup: f64 = 0.0;
    for s in &record.snapshots {
        let w = s.w.values();
        let integrand: Vec<f64> = range
            .clone()
            .map(|i| {
                if w[i] <= wm[i] {
                    (qtilde(w[i], mu) - qtilde(w0[i], mu)).abs()
                } else {
                    0.0
                }
            })
            .collect();
        sup = sup.max(trapezoid_uniform(&integrand, g.dx()));
    }
    Ok(EstimateReport::new(
        "negative_branch_l1",
        eps,
        sup,
        "C_R eps",
        1.0,
        sup / eps <= config.ceiling,
    ))
}

/// Per-node `int_0^T u dt` over the snapshots.
pub fn cumulative_u(record: &SolutionRecord) -> Vec<Vec<f64>> {
    let n = record.grid().len();
    let mut acc = vec![0.0; n];
    let mut out = vec![acc.clone()];
    for pair in record.snapshots.windows(2) {
        let dt = pair[1].t - pair[0].t;
        let (a, b) = (pair[0].u.values(), pair[1].u.values());
        for i in 0..n {
            acc[i] += dt * log_mean(a[i], b[i]);
        }
        out.push(acc.clone());
    }
    out
}

/// `sup_x int_0^T u dt`, cross-checked against `sup_x (w0 - w(T))`.
///
/// The value is the quadrature; `pass` records agreement with the identity
/// within the configured relative tolerance. Items `time_integral_u` and
/// `time_integral_u.identity`.
pub fn time_integral_u(record: &SolutionRecord, config: &EstimateConfig) -> Result<Vec<EstimateReport>> {
    if record.snapshots.is_empty() {
        return Err(Error::InsufficientData("record has no snapshots".into()));
    }
    let eps = record.params.eps;
    let cum = cumulative_u(record);
    let quad = cum.last().unwrap().iter().fold(0.0f64, |m, x| m.max(*x));
    let (first, last) = (&record.snapshots[0], record.last());
    let identity = first
        .w
        .values()
        .iter()
        .zip(last.w.values())
        .map(|(a, b)| a - b)
        .fold(0.0f64, f64::max);
    let scale = quad.abs().max(identity.abs());
    let agree = scale == 0.0 || (quad - identity).abs() <= config.identity_rel_tol * scale;
    Ok(vec![
        EstimateReport::new("time_integral_u", eps, quad, "sup_x int u dt <= C(T)", 0.0, agree),
        EstimateReport::new(
            "time_integral_u.identity",
            eps,
            identity,
            "sup_x (w0 - w(T))",
            0.0,
            true,
        ),
    ])
}

/// `eps int u dx` at every snapshot.
pub fn mass_series(record: &SolutionRecord) -> Vec<f64> {
    let eps = record.params.eps;
    let dx = record.grid().dx();
    record
        .snapshots
        .iter()
        .map(|s| eps * trapezoid_uniform(s.u.values(), dx))
        .collect()
}

/// `sup_t eps int u dx`, bounded by `C(t)`. The item `mass_bound.growth`
/// is the least-squares slope of the mass against time.
pub fn mass_bound(record: &SolutionRecord, config: &EstimateConfig) -> Result<Vec<EstimateReport>> {
    if record.snapshots.is_empty() {
        return Err(Error::InsufficientData("record has no snapshots".into()));
    }
    let eps = record.params.eps;
    let series = mass_series(record);
    let sup = series.iter().fold(0.0f64, |m, x| m.max(*x));
    let growth = fit_line(&record.times(), &series).map_or(0.0, |f| f.slope);
    let finite = series.iter().all(|m| m.is_finite() && *m >= 0.0);
    Ok(vec![
        EstimateReport::new(
            "mass_bound",
            eps,
            sup,
            "eps int u dx <= C(t)",
            0.0,
            finite && sup <= config.ceiling,
        ),
        EstimateReport::new("mass_bound.growth", eps, growth, "d/dt eps int u dx", 0.0, true),
    ])
}

/// Bounds on the log-density.
///
/// Items:
/// - `phi.dt_max`: largest snapshot difference quotient of `phi` in time;
/// - `phi.dx_max`: largest centered `|phi_x|`;
/// - `phi.ceiling`: `max_t (max_x phi - 2 eps ln(1/eps))`, of order `eps`;
/// - `phi.lower_envelope`: constant `C(T)` of the affine-in-time envelope
///   `phi >= -C(t)(1 + |x|)`, with value `min (phi + C(t)(1 + |x|))`
///   reported through `pass`;
/// - `phi.dt_l{1,2,4}`: space-time `L^p` norms of `phi_t` on the interior.
pub fn phi_bounds(
    record: &SolutionRecord,
    params: &ModelParams,
    config: &EstimateConfig,
) -> Result<Vec<EstimateReport>> {
    if record.snapshots.len() < 2 {
        return Err(Error::InsufficientData("phi bounds need two snapshots".into()));
    }
    let eps = params.eps;
    let g = record.grid();
    let dx = g.dx();
    let xs: Vec<f64> = g.nodes().collect();
    let times = record.times();
    let inner = interior(params);

    let mut dt_max = f64::NEG_INFINITY;
    let mut lp_slices = [Vec::new(), Vec::new(), Vec::new()];
    let mut lp_times = Vec::new();
    for pair in record.snapshots.windows(2) {
        let h = pair[1].t - pair[0].t;
        let (a, b) = (pair[0].phi.values(), pair[1].phi.values());
        let q: Vec<f64> = (0..a.len()).map(|i| (b[i] - a[i]) / h).collect();
        dt_max = q.iter().fold(dt_max, |m, x| m.max(*x));
        let slice = &q[inner.clone()];
        for (k, p) in [1.0, 2.0, 4.0].into_iter().enumerate() {
            let pw: Vec<f64> = slice.iter().map(|x| x.abs().powf(p)).collect();
            lp_slices[k].push(trapezoid_uniform(&pw, dx));
        }
        lp_times.push(0.5 * (pair[0].t + pair[1].t));
    }

    let mut dx_max: f64 = 0.0;
    let mut ceiling = f64::NEG_INFINITY;
    let mut needed = Vec::with_capacity(times.len());
    let shift = 2.0 * eps * (1.0 / eps).ln();
    for s in &record.snapshots {
        let phi = s.phi.values();
        let d = first_derivative(phi, dx);
        dx_max = d[inner.clone()].iter().fold(dx_max, |m, x| m.max(x.abs()));
        ceiling = ceiling.max(s.phi.max() - shift);
        needed.push(
            xs.iter()
                .zip(phi)
                .map(|(x, p)| -p / (1.0 + x.abs()))
                .fold(f64::NEG_INFINITY, f64::max),
        );
    }
    // affine envelope: least-squares line lifted until it dominates every
    // per-snapshot constant
    let (c0, c1) = match fit_line(&times, &needed) {
        Some(f) => {
            let lift = times
                .iter()
                .zip(&needed)
                .map(|(t, c)| c - (f.intercept + f.slope * t))
                .fold(0.0f64, f64::max);
            (f.intercept + lift, f.slope)
        }
        None => (needed.iter().fold(f64::NEG_INFINITY, |m, c| m.max(*c)), 0.0),
    };
    let envelope = |t: f64| c0 + c1 * t;
    let mut margin = f64::INFINITY;
    for s in &record.snapshots {
        let c = envelope(s.t);
        for (x, p) in xs.iter().zip(s.phi.values()) {
            margin = margin.min(p + c * (1.0 + x.abs()));
        }
    }
    let t_end = *times.last().unwrap();
    let c_end = envelope(t_end);

    let mut out = vec![
        EstimateReport::new("phi.dt_max", eps, dt_max, "phi_t <= C", 0.0, dt_max <= config.ceiling),
        EstimateReport::new("phi.dx_max", eps, dx_max, "|phi_x| <= C", 0.0, dx_max <= config.ceiling),
        EstimateReport::new(
            "phi.ceiling",
            eps,
            ceiling,
            "max phi <= 2 eps ln(1/eps) + C eps",
            1.0,
            ceiling / eps <= config.ceiling,
        ),
        EstimateReport::new(
            "phi.lower_envelope",
            eps,
            c_end,
            "phi >= -C(t)(1 + |x|)",
            0.0,
            margin >= -1e-12 && c_end <= config.ceiling,
        ),
    ];
    for (k, p) in [1.0, 2.0, 4.0].into_iter().enumerate() {
        let norm = trapezoid(&lp_times, &lp_slices[k]).powf(1.0 / p);
        out.push(EstimateReport::new(
            &format!("phi.dt_l{}", p as u32),
            eps,
            norm,
            "||phi_t||_Lp <= C(p)",
            0.0,
            norm <= config.ceiling,
        ));
    }
    Ok(out)
}

/// `Phi(x_i, w_i)` at every node.
pub fn phi_potential_field(w: &[f64], w0: &[f64], mu: f64) -> Vec<f64> {
    w.par_iter()
        .zip(w0.par_iter())
        .with_min_len(64)
        .map(|(w, w0)| phi_potential(*w, *w0, mu))
        .collect()
}

/// Compactness of `w`.
///
/// Items: `compactness.dx_w` (`eps sup |w_x|`, bounded by `C_T`) and
/// `compactness.phi_tv` (`int_0^T int_{|x|<=R} |d/dx Phi(x, w)| dx dt`,
/// bounded by `C_{T,R}`), the inner integral being the sum of absolute
/// one-sided differences.
pub fn compactness_bounds(
    record: &SolutionRecord,
    init: &InitialData,
    params: &ModelParams,
    radius: f64,
    config: &EstimateConfig,
) -> Result<Vec<EstimateReport>> {
    check_record(record, init)?;
    let (eps, mu) = (params.eps, params.mu);
    let g = record.grid();
    let dx = g.dx();
    let range = g.indices_within(radius);
    let w0 = &init.w0.values()[range.clone()];

    let mut dx_w: f64 = 0.0;
    let mut tv = Vec::with_capacity(record.snapshots.len());
    for s in &record.snapshots {
        let d = first_derivative(s.w.values(), dx);
        dx_w = d.iter().fold(dx_w, |m, x| m.max(x.abs()));
        let phi = phi_potential_field(&s.w.values()[range.clone()], w0, mu);
        tv.push(phi.windows(2).map(|p| (p[1] - p[0]).abs()).sum::<f64>());
    }
    let integral = trapezoid(&record.times(), &tv);
    let scaled = eps * dx_w;
    Ok(vec![
        EstimateReport::new(
            "compactness.dx_w",
            eps,
            scaled,
            "eps |w_x| <= C_T",
            0.0,
            scaled <= config.ceiling,
        ),
        EstimateReport::new(
            "compactness.phi_tv",
            eps,
            integral,
            "int int |d/dx Phi(x, w)| <= C_{T,R}",
            0.0,
            integral <= config.ceiling,
        ),
    ])
}

macro_rules! estimate {
    ($ty:ident, $name:literal, $desc:literal, |$ctx:ident| $body:expr) => {
        pub struct $ty;

        impl Named for $ty {
            fn name(&self) -> &'static str {
                $name
            }
        }

        impl Estimate for $ty {
            fn description(&self) -> &'static str {
                $desc
            }

            fn evaluate(&self, $ctx: &EstimateContext) -> Result<Vec<EstimateReport>> {
                $body
            }
        }
    };
}

estimate!(
    WBounds,
    "w_bounds",
    "w between the lower branch (up to C sqrt(eps)) and the upper branch",
    |c| check_w_bounds(c.record, c.init, &c.config)
);
estimate!(
    NegativeBranchL1,
    "negative_branch_l1",
    "L1 excursion of Q~(w) below the lower branch, of order eps",
    |c| negative_branch_l1(c.record, c.init, c.config.radius, &c.config).map(|r| vec![r])
);
estimate!(
    TimeIntegralU,
    "time_integral_u",
    "sup_x int u dt against sup_x (w0 - w(T))",
    |c| time_integral_u(c.record, &c.config)
);
estimate!(MassBound, "mass_bound", "eps int u dx over time", |c| mass_bound(
    c.record, &c.config
));
estimate!(
    PhiBounds,
    "phi_bounds",
    "time derivative, Lipschitz constant, ceiling and floor of phi",
    |c| phi_bounds(c.record, c.params, &c.config)
);
estimate!(
    CompactnessBounds,
    "compactness_bounds",
    "eps |w_x| and the space-time variation of Phi(x, w)",
    |c| compactness_bounds(c.record, c.init, c.params, c.config.radius, &c.config)
);

/// Least-squares constant of one estimate over an `eps`-sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFit {
    pub name: String,
    pub eps_power: f64,
    /// `C` minimizing `sum (value - C eps^p)^2`.
    pub constant: f64,
    /// `(eps, value / eps^p)` per run.
    pub per_eps: Vec<(f64, f64)>,
    /// `max |c| / min |c|` of the per-run constants.
    pub spread: f64,
}

/// Combine the reports of several runs, grouping by estimate name in order
/// of first appearance.
pub fn fit_sweep(runs: &[Vec<EstimateReport>]) -> Vec<SweepFit> {
    let mut names: Vec<&str> = Vec::new();
    for r in runs.iter().flatten() {
        if !names.contains(&r.name.as_str()) {
            names.push(&r.name);
        }
    }
    names
        .into_iter()
        .map(|name| {
            let items: Vec<&EstimateReport> = runs.iter().flatten().filter(|r| r.name == name).collect();
            let p = items[0].eps_power;
            let num: f64 = items.iter().map(|r| r.value * r.eps.powf(p)).sum();
            let den: f64 = items.iter().map(|r| r.eps.powf(2.0 * p)).sum();
            let per_eps: Vec<(f64, f64)> = items.iter().map(|r| (r.eps, r.fitted_constant)).collect();
            let constants: Vec<f64> = per_eps.iter().map(|c| c.1).collect();
            SweepFit {
                name: name.into(),
                eps_power: p,
                constant: num / den,
                per_eps,
                spread: uniformity_ratio(&constants),
            }
        })
        .collect()
}
