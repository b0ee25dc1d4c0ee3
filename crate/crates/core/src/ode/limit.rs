//! Explicit `eps -> 0` limit of the diffusion-free dynamics.
//!
//! Where `v0 > mu` the log-density grows linearly until it reaches zero at
//! `tau(x) = -phi0(x) / (v0(x) - mu)`; at that instant the nutrient drops from
//! `v0` to the lower root `v0_-` of `Q(v) = Q(v0)` and the cells release a
//! Dirac mass of weight `ln v0 - ln v0_-` in time.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::model::{Field, Grid1D, InitialData};

/// A jump time, with "never" kept distinct from any float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JumpTime {
    Finite(f64),
    Infinite,
}

impl JumpTime {
    pub fn is_finite(&self) -> bool {
        matches!(self, JumpTime::Finite(_))
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            JumpTime::Finite(t) => Some(*t),
            JumpTime::Infinite => None,
        }
    }

    /// `t >= tau`, false for an infinite jump time.
    pub fn reached_by(&self, t: f64) -> bool {
        match self {
            JumpTime::Finite(tau) => t >= *tau,
            JumpTime::Infinite => false,
        }
    }
}

impl fmt::Display for JumpTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JumpTime::Finite(t) => write!(f, "{t:.16e}"),
            JumpTime::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for JumpTime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") {
            return Ok(JumpTime::Infinite);
        }
        s.parse::<f64>()
            .ok()
            .filter(|t| t.is_finite())
            .map(JumpTime::Finite)
            .ok_or_else(|| Error::InvalidParameter(format!("not a jump time: '{s}'")))
    }
}

impl Serialize for JumpTime {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            JumpTime::Finite(t) => serializer.serialize_f64(*t),
            JumpTime::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for JumpTime {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Num(t) => Ok(JumpTime::Finite(t)),
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Jump time of a node with log-density `phi0 <= 0` and nutrient `v0`.
pub fn limit_jump_time(phi0: f64, v0: f64, mu: f64) -> Result<JumpTime> {
    if phi0 > 0.0 {
        return Err(Error::Domain(format!("log-density must be <= 0, got {phi0}")));
    }
    if !(v0 > 0.0) || !(mu > 0.0) {
        return Err(Error::Domain(format!("v0 and mu must be positive, got {v0}, {mu}")));
    }
    if phi0 == 0.0 {
        return Ok(JumpTime::Finite(0.0));
    }
    if v0 == mu {
        return Err(Error::Degenerate(format!(
            "v0 = mu = {mu}: the log-density never moves"
        )));
    }
    if v0 < mu {
        return Ok(JumpTime::Infinite);
    }
    Ok(JumpTime::Finite(-phi0 / (v0 - mu)))
}

/// Per-node limit objects of the diffusion-free dynamics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitProfile {
    pub grid: Grid1D,
    pub mu: f64,
    pub tau: Vec<JumpTime>,
    pub v_lower: Field,
    pub v_upper: Field,
    /// Dirac weight `ln v_upper - ln v_lower`.
    pub weight: Field,
}

impl LimitProfile {
    /// Total mass released by the nodes that jump, by the trapezoid rule.
    pub fn total_mass(&self) -> f64 {
        let dx = self.grid.dx();
        let masked: Vec<f64> = self
            .tau
            .iter()
            .zip(self.weight.values())
            .map(|(t, w)| if t.is_finite() { *w } else { 0.0 })
            .collect();
        crate::numerics::trapezoid_uniform(&masked, dx)
    }
}

/// Limit profile of `init`.
///
/// A node with `v0` exactly at `mu` has coinciding branches and zero weight;
/// it is reported as never jumping instead of failing the whole profile.
pub fn limit_profile(init: &InitialData, mu: f64) -> Result<LimitProfile> {
    let grid = *init.v0.grid();
    let tau = (0..init.len())
        .into_par_iter()
        .map(|i| {
            let v0 = init.v0.values()[i];
            match limit_jump_time(init.phi0.values()[i], v0, mu) {
                Err(Error::Degenerate(_)) => Ok(JumpTime::Infinite),
                other => other,
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let v_lower = Field::new(grid, init.branch0.iter().map(|b| b.v_minus()).collect())?;
    let v_upper = Field::new(grid, init.branch0.iter().map(|b| b.v_plus()).collect())?;
    let weight = Field::new(grid, init.branch0.iter().map(|b| b.log_gap()).collect())?;
    Ok(LimitProfile {
        grid,
        mu,
        tau,
        v_lower,
        v_upper,
        weight,
    })
}

/// Limit log-density at node `i` and time `t`.
pub fn phi_limit(t: f64, i: usize, profile: &LimitProfile, init: &InitialData) -> f64 {
    let mu = profile.mu;
    let phi0 = init.phi0.values()[i];
    let v0 = init.v0.values()[i];
    match profile.tau[i] {
        JumpTime::Infinite => phi0 + t * (v0 - mu),
        JumpTime::Finite(tau) => {
            if t <= tau {
                phi0 + t * (v0 - mu)
            } else {
                let v_lower = profile.v_lower.values()[i];
                phi0 + tau * (v0 - mu) + (t - tau) * (v_lower - mu)
            }
        }
    }
}
