//! Convergence measurements as `eps -> 0`.
//!
//! The limit nutrient keeps its initial value `v0(x)` until the jump time
//! `tau(x)` and sits on the lower branch `v0_-(x)` afterwards, while the
//! cells pass through `x` as a Dirac mass in time of weight
//! `ln v0 - ln v0_-`. Jump times come either from the explicit
//! diffusion-free formula or from a fine-`eps` simulation.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimates::{cumulative_u, run_estimates, EstimateConfig, EstimateContext, EstimateReport};
use crate::io::{fmt_f64, CsvTable};
use crate::model::{Field, Grid1D, InitialData};
use crate::numerics::{fit_line, trapezoid, trapezoid_uniform};
use crate::ode::{limit_profile, JumpTime, LimitProfile};
use crate::pde::SolutionRecord;
use crate::scenario::Scenario;

fn crossing(times: &[f64], values: &[f64], level: f64) -> Option<f64> {
    crate::ode::crossing_from_above(times, values, level)
}

/// First time `v` falls to `mu` at every node, interpolated linearly between
/// snapshots. Nodes starting at or below `mu`, and nodes that have not
/// crossed by the last snapshot, never jump.
pub fn extract_jump_times(record: &SolutionRecord, mu: f64) -> Vec<JumpTime> {
    let times = record.times();
    let n = record.grid().len();
    (0..n)
        .into_par_iter()
        .with_min_len(256)
        .map(|i| {
            let series: Vec<f64> = record.snapshots.iter().map(|s| s.v.values()[i]).collect();
            crossing(&times, &series, mu).map_or(JumpTime::Infinite, JumpTime::Finite)
        })
        .collect()
}

/// Where the jump times of a limit profile come from.
#[derive(Debug, Clone, PartialEq)]
pub enum TauReference {
    /// `tau = -phi0 / (v0 - mu)`, exact without diffusion.
    NoDiffusion,
    /// Jump times on the grid of the initial data, typically extracted from
    /// a fine-`eps` run and resampled with [`resample_jump_times`].
    Given(Vec<JumpTime>),
}

/// Limit profile of `init` with jump times taken from `reference`.
pub fn reference_profile(init: &InitialData, mu: f64, reference: &TauReference) -> Result<LimitProfile> {
    let mut profile = limit_profile(init, mu)?;
    if let TauReference::Given(tau) = reference {
        if tau.len() != init.len() {
            return Err(Error::InvalidParameter(format!(
                "{} jump times for {} nodes",
                tau.len(),
                init.len()
            )));
        }
        profile.tau = tau.clone();
    }
    Ok(profile)
}

/// Jump times of another grid, read at the nearest node.
pub fn resample_jump_times(tau: &[JumpTime], from: &Grid1D, to: &Grid1D) -> Vec<JumpTime> {
    to.nodes().map(|x| tau[from.nearest(x)]).collect()
}

/// Limit nutrient at time `t`: `v0` before the jump, `v0_-` from the jump on.
pub fn limit_v_profile(init: &InitialData, mu: f64, t: f64, reference: &TauReference) -> Result<Field> {
    let profile = reference_profile(init, mu, reference)?;
    let v0 = init.v0.values();
    let lower = profile.v_lower.values();
    let values = (0..init.len())
        .map(|i| if profile.tau[i].reached_by(t) { lower[i] } else { v0[i] })
        .collect();
    Field::new(*init.v0.grid(), values)
}

/// `(int_{|x|<=R} |a - b|^p dx)^{1/p}` by the trapezoid rule; an infinite
/// radius means the whole grid.
pub fn lp_distance(a: &Field, b: &Field, p: f64, radius: f64) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(Error::InvalidParameter("fields live on different grids".into()));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "p must be a finite number >= 1, got {p}"
        )));
    }
    let g = a.grid();
    let range = g.indices_within(radius);
    let diff: Vec<f64> = range.map(|i| (a.values()[i] - b.values()[i]).abs().powf(p)).collect();
    Ok(trapezoid_uniform(&diff, g.dx()).powf(1.0 / p))
}

/// `sup_t int_{|x|<=R} |int_0^t u ds - weight(x) 1{t >= tau(x)}| dx` over
/// the snapshots.
pub fn weak_mass_error(record: &SolutionRecord, profile: &LimitProfile, radius: f64) -> Result<f64> {
    let g = record.grid();
    if *g != profile.grid {
        return Err(Error::InvalidParameter(
            "record and profile live on different grids".into(),
        ));
    }
    let range = g.indices_within(radius);
    let cum = cumulative_u(record);
    let weight = profile.weight.values();
    let mut sup: f64 = 0.0;
    for (s, c) in record.snapshots.iter().zip(&cum) {
        let mismatch: Vec<f64> = range
            .clone()
            .map(|i| {
                let target = if profile.tau[i].reached_by(s.t) { weight[i] } else { 0.0 };
                (c[i] - target).abs()
            })
            .collect();
        sup = sup.max(trapezoid_uniform(&mismatch, g.dx()));
    }
    Ok(sup)
}

/// Shifts `2 dx, 4 dx, 8 dx, ...` up to 1.
pub fn default_shifts(dx: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut h = 2.0 * dx;
    while h <= 1.0 + 1e-12 {
        out.push(h);
        h *= 2.0;
    }
    out
}

/// `max_h int_0^T int_{|x|<=R} |v(x + h) - v(x)| / h^theta dx dt`, with each
/// shift rounded to a whole number of cells.
pub fn sobolev_quotient_norm(record: &SolutionRecord, theta: f64, h_values: &[f64], radius: f64) -> Result<f64> {
    if !(0.0..=1.0 / 3.0 + 1e-12).contains(&theta) {
        return Err(Error::InvalidParameter(format!(
            "theta must lie in [0, 1/3], got {theta}"
        )));
    }
    if h_values.is_empty() {
        return Err(Error::InvalidParameter("no shifts given".into()));
    }
    let g = record.grid();
    let dx = g.dx();
    let n = g.len();
    let range = g.indices_within(radius);
    let times = record.times();
    let mut best: f64 = 0.0;
    for &h in h_values {
        if !(h <= 1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!("shift {h} exceeds 1")));
        }
        if h < dx * (1.0 - 1e-9) {
            return Err(Error::Resolution { h, dx });
        }
        let k = (h / dx).round() as usize;
        let hk = k as f64 * dx;
        let per_time: Vec<f64> = record
            .snapshots
            .iter()
            .map(|s| {
                let v = s.v.values();
                let diff: Vec<f64> = range
                    .clone()
                    .filter(|i| i + k < n)
                    .map(|i| (v[i + k] - v[i]).abs())
                    .collect();
                trapezoid_uniform(&diff, dx)
            })
            .collect();
        best = best.max(trapezoid(&times, &per_time) / hk.powf(theta));
    }
    Ok(best)
}

/// Length of `{x : |v0(x) - mu| <= delta}` for the piecewise-linear
/// interpolant of `v0`.
pub fn level_band_measure(v0: &Field, mu: f64, delta: f64) -> f64 {
    let dx = v0.grid().dx();
    v0.values()
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0] - mu, w[1] - mu);
            if a == b {
                return if a.abs() <= delta { dx } else { 0.0 };
            }
            let s1 = (-delta - a) / (b - a);
            let s2 = (delta - a) / (b - a);
            let (lo, hi) = (s1.min(s2).max(0.0), s1.max(s2).min(1.0));
            (hi - lo).max(0.0) * dx
        })
        .sum()
}

/// Exponent `kappa` of `|{|v0 - mu| <= delta}| <= C delta^kappa`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Kappa {
    /// Least-squares log-log slope over the usable `delta`s.
    Fitted(f64),
    /// Every band is empty: `v0` stays away from `mu`.
    Infinite,
    /// Fewer than three non-empty bands.
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaFit {
    pub kappa: Kappa,
    /// `(delta, measure)` for every requested `delta`.
    pub points: Vec<(f64, f64)>,
}

pub fn crossing_measure_kappa(v0: &Field, mu: f64, delta_values: &[f64]) -> KappaFit {
    let points: Vec<(f64, f64)> = delta_values
        .iter()
        .map(|&d| (d, level_band_measure(v0, mu, d)))
        .collect();
    let usable: Vec<&(f64, f64)> = points.iter().filter(|p| p.0 > 0.0 && p.1 > 0.0).collect();
    let kappa = if usable.is_empty() {
        Kappa::Infinite
    } else if usable.len() < 3 {
        Kappa::Undetermined
    } else {
        let xs: Vec<f64> = usable.iter().map(|p| p.0.ln()).collect();
        let ys: Vec<f64> = usable.iter().map(|p| p.1.ln()).collect();
        fit_line(&xs, &ys).map_or(Kappa::Undetermined, |f| Kappa::Fitted(f.slope))
    };
    KappaFit { kappa, points }
}

/// Length of the set where the initial nutrient already sits on its lower
/// branch, `|v0 - v0_-| <= tol`.
pub fn lower_branch_contact(init: &InitialData, tol: f64) -> f64 {
    let dx = init.v0.grid().dx();
    let mask: Vec<f64> = init
        .v0
        .values()
        .iter()
        .zip(&init.branch0)
        .map(|(v, b)| if (v - b.v_minus()).abs() <= tol { 1.0 } else { 0.0 })
        .collect();
    trapezoid_uniform(&mask, dx)
}

/// Mean over `|x| <= R` of `|min(tau_a, T) - min(tau_b, T)|`.
pub fn jump_time_error(a: &[JumpTime], b: &[JumpTime], grid: &Grid1D, radius: f64, t_end: f64) -> f64 {
    let clamp = |t: &JumpTime| t.finite().map_or(t_end, |t| t.min(t_end));
    let range = grid.indices_within(radius);
    let count = range.len();
    if count == 0 {
        return 0.0;
    }
    range.map(|i| (clamp(&a[i]) - clamp(&b[i])).abs()).sum::<f64>() / count as f64
}

/// Analyses an `eps`-sweep may apply to each run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    JumpTimes,
    Lp,
    WeakMass,
    Sobolev,
    Estimates,
}

impl Analysis {
    pub const ALL: [Analysis; 5] = [
        Analysis::JumpTimes,
        Analysis::Lp,
        Analysis::WeakMass,
        Analysis::Sobolev,
        Analysis::Estimates,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Analysis::JumpTimes => "jump_times",
            Analysis::Lp => "lp",
            Analysis::WeakMass => "weak_mass",
            Analysis::Sobolev => "sobolev",
            Analysis::Estimates => "estimates",
        }
    }
}

impl std::str::FromStr for Analysis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Analysis::ALL
            .iter()
            .find(|a| a.name() == s)
            .copied()
            .ok_or_else(|| Error::Unknown {
                kind: "analysis",
                name: s.into(),
                available: Analysis::ALL.iter().map(|a| a.name()).collect::<Vec<_>>().join(", "),
            })
    }
}

/// Source of the reference jump times of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceChoice {
    NoDiffusion,
    /// A run of the same scenario at this `eps`.
    FineRun(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub eps_list: Vec<f64>,
    pub analyses: Vec<Analysis>,
    /// `None` picks a fine run at half the smallest `eps`.
    pub reference: Option<ReferenceChoice>,
    pub radius: f64,
    /// Comparison time of the `L^p` errors; `None` means `t_end`.
    pub lp_time: Option<f64>,
    pub theta: f64,
    pub estimate_config: EstimateConfig,
    /// Run the rows concurrently.
    pub parallel: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            eps_list: vec![0.1, 0.05, 0.025],
            analyses: Analysis::ALL.to_vec(),
            reference: None,
            radius: 5.0,
            lp_time: None,
            theta: 0.25,
            estimate_config: EstimateConfig::default(),
            parallel: false,
        }
    }
}

impl SweepConfig {
    fn reference_choice(&self) -> ReferenceChoice {
        self.reference.unwrap_or_else(|| {
            let min = self.eps_list.iter().copied().fold(f64::INFINITY, f64::min);
            ReferenceChoice::FineRun(0.5 * min)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub eps: f64,
    pub jump_time_error: Option<f64>,
    pub l1_error: Option<f64>,
    pub l2_error: Option<f64>,
    pub weak_mass_error: Option<f64>,
    pub sobolev_theta: f64,
    pub sobolev_value: Option<f64>,
    /// Limit mass released inside the window, for scale.
    pub limit_mass: f64,
    pub estimates: Vec<EstimateReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub scenario_hash: String,
    pub scheme: String,
    pub reference: ReferenceChoice,
    /// Rows by strictly decreasing `eps`.
    pub rows: Vec<ConvergenceRow>,
}

struct Reference {
    grid: Grid1D,
    tau: Option<Vec<JumpTime>>,
}

fn row_for(scenario: &Scenario, eps: f64, cfg: &SweepConfig, reference: &Reference) -> Result<ConvergenceRow> {
    let run = scenario.run(eps)?;
    let (p, init, record) = (&run.params, &run.init, &run.record);
    let mu = p.mu;
    let grid = p.grid();
    let tau_ref = match &reference.tau {
        Some(tau) => TauReference::Given(resample_jump_times(tau, &reference.grid, &grid)),
        None => TauReference::NoDiffusion,
    };
    let profile = reference_profile(init, mu, &tau_ref)?;
    let has = |a: Analysis| cfg.analyses.contains(&a);

    let jump_time_error = if has(Analysis::JumpTimes) {
        let tau = extract_jump_times(record, mu);
        Some(jump_time_error(&tau, &profile.tau, &grid, cfg.radius, p.t_end))
    } else {
        None
    };
    let (l1_error, l2_error) = if has(Analysis::Lp) {
        let t = cfg.lp_time.unwrap_or(p.t_end);
        let limit = limit_v_profile(init, mu, t, &tau_ref)?;
        let v = &record.at(t).v;
        (
            Some(lp_distance(v, &limit, 1.0, cfg.radius)?),
            Some(lp_distance(v, &limit, 2.0, cfg.radius)?),
        )
    } else {
        (None, None)
    };
    let weak = if has(Analysis::WeakMass) {
        Some(weak_mass_error(record, &profile, cfg.radius)?)
    } else {
        None
    };
    let sobolev_value = if has(Analysis::Sobolev) {
        Some(sobolev_quotient_norm(
            record,
            cfg.theta,
            &default_shifts(grid.dx()),
            cfg.radius,
        )?)
    } else {
        None
    };
    let estimates = if has(Analysis::Estimates) {
        let ctx = EstimateContext {
            record,
            init,
            params: p,
            config: cfg.estimate_config,
        };
        run_estimates(&ctx, &[])?
    } else {
        Vec::new()
    };
    let range = grid.indices_within(cfg.radius);
    let reached: Vec<f64> = range
        .map(|i| {
            if profile.tau[i].reached_by(p.t_end) {
                profile.weight.values()[i]
            } else {
                0.0
            }
        })
        .collect();
    Ok(ConvergenceRow {
        eps,
        jump_time_error,
        l1_error,
        l2_error,
        weak_mass_error: weak,
        sobolev_theta: cfg.theta,
        sobolev_value,
        limit_mass: trapezoid_uniform(&reached, grid.dx()),
        estimates,
    })
}

/// Run `scenario` at every `eps` of the sweep and measure its distance to
/// the limit. Rows come out ordered by decreasing `eps`.
pub fn epsilon_sweep(scenario: &Scenario, cfg: &SweepConfig) -> Result<ConvergenceTable> {
    let mut eps_list = cfg.eps_list.clone();
    if let Some(e) = eps_list.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidParameter(format!("eps must be > 0, got {e}")));
    }
    eps_list.sort_by(|a, b| b.total_cmp(a));
    eps_list.dedup();
    let choice = cfg.reference_choice();
    let needs_reference = cfg
        .analyses
        .iter()
        .any(|a| matches!(a, Analysis::JumpTimes | Analysis::Lp | Analysis::WeakMass));
    let reference = match choice {
        ReferenceChoice::FineRun(eps) if needs_reference && !eps_list.is_empty() => {
            let run = scenario.run(eps)?;
            Reference {
                grid: run.params.grid(),
                tau: Some(extract_jump_times(&run.record, run.params.mu)),
            }
        }
        _ => Reference {
            grid: scenario.params(eps_list.first().copied().unwrap_or(1.0))?.grid(),
            tau: None,
        },
    };
    let rows = if cfg.parallel {
        eps_list
            .par_iter()
            .map(|&e| row_for(scenario, e, cfg, &reference))
            .collect::<Result<Vec<_>>>()?
    } else {
        eps_list
            .iter()
            .map(|&e| row_for(scenario, e, cfg, &reference))
            .collect::<Result<Vec<_>>>()?
    };
    Ok(ConvergenceTable {
        scenario_hash: scenario.hash(),
        scheme: scenario.scheme.variable_set.name().into(),
        reference: choice,
        rows,
    })
}

impl ConvergenceTable {
    pub const COLUMNS: [&'static str; 7] = [
        "eps",
        "jump_time_error",
        "l1_error",
        "l2_error",
        "weak_mass_error",
        "sobolev_theta",
        "sobolev_value",
    ];

    fn comments(&self) -> Vec<String> {
        let reference = match self.reference {
            ReferenceChoice::NoDiffusion => "no_diffusion".to_string(),
            ReferenceChoice::FineRun(e) => format!("fine_run eps={}", fmt_f64(e)),
        };
        vec![
            format!("scenario_hash={}", self.scenario_hash),
            format!("scheme={}", self.scheme),
            format!("reference={reference}"),
        ]
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let opt = |x: Option<f64>| x.map_or(String::new(), fmt_f64);
        let mut t = CsvTable::create(path, &self.comments(), &Self::COLUMNS)?;
        for r in &self.rows {
            t.row(&[
                fmt_f64(r.eps),
                opt(r.jump_time_error),
                opt(r.l1_error),
                opt(r.l2_error),
                opt(r.weak_mass_error),
                fmt_f64(r.sobolev_theta),
                opt(r.sobolev_value),
            ])?;
        }
        t.finish()
    }

    /// Estimate reports of every row as `(estimate_name, eps, value,
    /// fitted_constant, pass)`.
    pub fn write_estimates_csv(&self, path: &Path) -> Result<()> {
        let mut t = CsvTable::create(
            path,
            &self.comments(),
            &["estimate_name", "eps", "value", "fitted_constant", "pass"],
        )?;
        for r in self.rows.iter().flat_map(|r| &r.estimates) {
            t.row(&[
                r.name.clone(),
                fmt_f64(r.eps),
                fmt_f64(r.value),
                fmt_f64(r.fitted_constant),
                r.pass.to_string(),
            ])?;
        }
        t.finish()
    }
}
