//! The full system on a truncated interval.
//!
//! Two variable sets are registered:
//!
//! - `hopf_cole` (default) evolves `phi = eps ln u` and `w = ln v`, which stay
//!   O(1) while `u` itself spans hundreds of orders of magnitude;
//! - `direct` evolves `(u, v)` and is kept for cross-validation.
//!
//! `hopf_cole` is an implicit midpoint rule, `direct` a Strang splitting of the
//! point reaction and diffusion; both are second order in time.

mod diagnostics;
mod direct;
mod hopf_cole;

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Field, Grid1D, InitialData, ModelParams};
use crate::registry::{Named, Registry};

pub use diagnostics::{
    invariant_drift, invariant_drift_report, w_reformulation_residual, DriftReport, ResidualReport, INTERIOR_MARGIN,
};
pub use direct::DirectScheme;
pub use hopf_cole::HopfColeScheme;

/// Smallest accepted time step.
pub const MIN_DT: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariableSet {
    HopfCole,
    Direct,
}

impl VariableSet {
    pub fn name(&self) -> &'static str {
        match self {
            VariableSet::HopfCole => "hopf_cole",
            VariableSet::Direct => "direct",
        }
    }
}

impl std::str::FromStr for VariableSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hopf_cole" => Ok(VariableSet::HopfCole),
            "direct" => Ok(VariableSet::Direct),
            _ => Err(Error::Unknown {
                kind: "variable set",
                name: s.into(),
                available: "direct, hopf_cole".into(),
            }),
        }
    }
}

/// Boundary condition for the log-density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiBoundary {
    /// Zero slope.
    Neumann,
    /// Boundary value extrapolated linearly from the two nearest interior
    /// nodes, which keeps the linear wings of `phi` intact.
    LinearExtrapolation,
}

impl PhiBoundary {
    pub fn name(&self) -> &'static str {
        match self {
            PhiBoundary::Neumann => "neumann",
            PhiBoundary::LinearExtrapolation => "linear_extrapolation",
        }
    }
}

impl std::str::FromStr for PhiBoundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "neumann" => Ok(PhiBoundary::Neumann),
            "linear_extrapolation" => Ok(PhiBoundary::LinearExtrapolation),
            _ => Err(Error::Unknown {
                kind: "phi boundary condition",
                name: s.into(),
                available: "linear_extrapolation, neumann".into(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    /// Upper bound on the time step; the step itself when `adaptive_dt` is off.
    pub dt_initial: f64,
    pub cfl_safety: f64,
    pub variable_set: VariableSet,
    pub bc_phi: PhiBoundary,
    /// Output instants besides `0` and `t_end`, which are always recorded.
    pub snapshot_times: Vec<f64>,
    /// When false, every step uses `dt_initial` (shortened only to land on
    /// snapshot times). Used by refinement studies.
    pub adaptive_dt: bool,
    /// Largest product of reaction substep and local rate.
    pub reaction_resolution: f64,
}

impl SchemeConfig {
    /// Defaults with `count` equally spaced snapshots on `(0, t_end]`.
    pub fn with_uniform_snapshots(t_end: f64, count: usize) -> Self {
        Self {
            snapshot_times: uniform_times(t_end, count),
            ..Self::default()
        }
    }

    pub fn validate(&self, t_end: f64) -> Result<()> {
        if !(self.dt_initial > 0.0 && self.dt_initial.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "dt_initial must be > 0, got {}",
                self.dt_initial
            )));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "cfl_safety must lie in (0, 1], got {}",
                self.cfl_safety
            )));
        }
        if !(self.reaction_resolution > 0.0 && self.reaction_resolution <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "reaction_resolution must lie in (0, 1], got {}",
                self.reaction_resolution
            )));
        }
        if self.snapshot_times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("snapshot times must be increasing".into()));
        }
        if let Some(t) = self.snapshot_times.iter().find(|t| !(**t >= 0.0 && **t <= t_end)) {
            return Err(Error::InvalidParameter(format!(
                "snapshot time {t} lies outside [0, {t_end}]"
            )));
        }
        Ok(())
    }
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            dt_initial: 1e-2,
            cfl_safety: 0.4,
            variable_set: VariableSet::HopfCole,
            bc_phi: PhiBoundary::LinearExtrapolation,
            snapshot_times: Vec::new(),
            adaptive_dt: true,
            reaction_resolution: 0.1,
        }
    }
}

/// `count` equally spaced instants ending at `t_end`.
pub fn uniform_times(t_end: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|k| t_end * k as f64 / count as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub u: Field,
    pub v: Field,
    pub w: Field,
    pub phi: Field,
}

/// Diagnostics of one accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub dt: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub min_v: f64,
    pub max_v: f64,
    pub min_phi: f64,
    pub max_phi: f64,
    /// Interior invariant drift after the step.
    pub drift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub params: ModelParams,
    pub scheme: SchemeConfig,
    pub snapshots: Vec<Snapshot>,
    pub step_log: Vec<StepRecord>,
}

impl SolutionRecord {
    pub fn grid(&self) -> &Grid1D {
        self.snapshots[0].v.grid()
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("record has at least one snapshot")
    }

    /// Snapshot closest to `t`.
    pub fn at(&self, t: f64) -> &Snapshot {
        self.snapshots
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .expect("record has at least one snapshot")
    }
}

/// Mutable state of a scheme between steps.
#[doc(hidden)]
pub trait Stepper: Send {
    /// Largest stable step for the current state.
    fn max_dt(&self, cfl: f64) -> f64;
    fn step(&mut self, dt: f64) -> Result<()>;
    fn snapshot(&self, grid: Grid1D, t: f64) -> Result<Snapshot>;
    /// Name of the first field holding a non-finite value.
    fn non_finite(&self) -> Option<&'static str>;
}

/// A discretization of the full system.
pub trait PdeScheme: Named + Send + Sync {
    fn description(&self) -> &'static str;

    #[doc(hidden)]
    fn stepper(&self, params: &ModelParams, init: &InitialData, scheme: &SchemeConfig) -> Result<Box<dyn Stepper>>;
}

pub fn pde_schemes() -> &'static Registry<dyn PdeScheme> {
    static REG: OnceLock<Registry<dyn PdeScheme>> = OnceLock::new();
    REG.get_or_init(|| {
        Registry::<dyn PdeScheme>::new("pde scheme")
            .with(Box::new(HopfColeScheme))
            .with(Box::new(DirectScheme))
    })
}

/// Evolve `init` up to `params.t_end`.
pub fn simulate(params: &ModelParams, init: &InitialData, scheme: &SchemeConfig) -> Result<SolutionRecord> {
    params.validate()?;
    scheme.validate(params.t_end)?;
    let grid = params.grid();
    if *init.v0.grid() != grid {
        return Err(Error::InvalidParameter(
            "initial data and parameters describe different grids".into(),
        ));
    }
    if grid.dx() > params.eps {
        log::warn!(
            "grid spacing {} exceeds eps = {}; the front is under-resolved",
            grid.dx(),
            params.eps
        );
    }
    let mut stepper = pde_schemes()
        .get(scheme.variable_set.name())?
        .stepper(params, init, scheme)?;
    let drift_probe = diagnostics::DriftProbe::new(params, init);

    let mut targets: Vec<f64> = scheme
        .snapshot_times
        .iter()
        .copied()
        .filter(|t| *t > 0.0 && *t < params.t_end)
        .collect();
    targets.push(params.t_end);

    let mut snapshots = vec![stepper.snapshot(grid, 0.0)?];
    let mut step_log = Vec::new();
    let mut t = 0.0;
    let mut step = 0usize;
    for target in targets {
        while t < target {
            let remaining = target - t;
            let mut dt = if scheme.adaptive_dt {
                scheme.dt_initial.min(stepper.max_dt(scheme.cfl_safety))
            } else {
                scheme.dt_initial
            };
            if dt < MIN_DT {
                return Err(Error::Stiffness { t, dt });
            }
            // land exactly on the target instead of leaving a sliver
            let landing = dt >= remaining * (1.0 - 1e-10);
            if landing {
                dt = remaining;
            } else if remaining - dt < 0.1 * dt {
                dt = 0.5 * remaining;
            }
            stepper.step(dt)?;
            step += 1;
            if let Some(field) = stepper.non_finite() {
                return Err(Error::Divergence { step, t: t + dt, field });
            }
            t = if landing { target } else { t + dt };
            let snap = stepper.snapshot(grid, t).map_err(|_| Error::Divergence {
                step,
                t,
                field: "snapshot",
            })?;
            let (u, w) = (snap.u.values(), snap.w.values());
            step_log.push(StepRecord {
                t,
                dt,
                min_u: snap.u.min(),
                max_u: snap.u.max(),
                min_v: snap.v.min(),
                max_v: snap.v.max(),
                min_phi: snap.phi.min(),
                max_phi: snap.phi.max(),
                drift: drift_probe.interior_max(u, w),
            });
            if landing {
                snapshots.push(snap);
            }
        }
    }
    Ok(SolutionRecord {
        params: *params,
        scheme: scheme.clone(),
        snapshots,
        step_log,
    })
}

/// Per-node classical RK4 substeps for a 2-dimensional autonomous system.
pub(crate) fn rk4<F: Fn([f64; 2]) -> [f64; 2]>(f: &F, y: [f64; 2], h: f64) -> [f64; 2] {
    let k1 = f(y);
    let k2 = f([y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
    let k3 = f([y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
    let k4 = f([y[0] + h * k3[0], y[1] + h * k3[1]]);
    [
        y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}
