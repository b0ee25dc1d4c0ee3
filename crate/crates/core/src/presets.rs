//! Named analytic initial data.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{branch_roots, q_of_v, Field, InitialData, ModelParams};
use crate::registry::{Named, Registry};

/// Shape parameters shared by the presets. Each preset documents which of
/// them it reads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PresetOptions {
    /// Nutrient level on the left (`x < 0`).
    pub v_left: f64,
    /// Nutrient level on the right (`x >= 0`).
    pub v_right: f64,
    /// Transition width of the smooth preset.
    pub width: f64,
    /// Slope `s` of the log-density wings `phi0 = -s |x|`.
    pub phi_slope: f64,
    /// Uniform density of the constant preset.
    pub u_const: f64,
}

impl Default for PresetOptions {
    fn default() -> Self {
        Self {
            v_left: 0.5,
            v_right: 2.0,
            width: 0.5,
            phi_slope: 1.0,
            u_const: 1.0,
        }
    }
}

impl PresetOptions {
    fn check(&self) -> Result<()> {
        for (name, v) in [
            ("v_left", self.v_left),
            ("v_right", self.v_right),
            ("width", self.width),
            ("phi_slope", self.phi_slope),
            ("u_const", self.u_const),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "preset option {name} must be > 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

pub trait Preset: Named + Send + Sync {
    fn description(&self) -> &'static str;
    fn build(&self, params: &ModelParams, opts: &PresetOptions) -> Result<InitialData>;
}

pub fn presets() -> &'static Registry<dyn Preset> {
    static REG: OnceLock<Registry<dyn Preset>> = OnceLock::new();
    REG.get_or_init(|| {
        Registry::<dyn Preset>::new("preset")
            .with(Box::new(Step))
            .with(Box::new(Smooth))
            .with(Box::new(Wave))
            .with(Box::new(Constant))
    })
}

pub fn build_preset(name: &str, params: &ModelParams, opts: &PresetOptions) -> Result<InitialData> {
    opts.check()?;
    params.validate()?;
    presets().get(name)?.build(params, opts)
}

/// `v0 = v_left | v_right` with the jump at `x = 0`, `u0 = exp(-s |x| / eps)`.
pub struct Step;

impl Named for Step {
    fn name(&self) -> &'static str {
        "step"
    }
}

impl Preset for Step {
    fn description(&self) -> &'static str {
        "piecewise-constant nutrient with a jump at x = 0, u0 = exp(-s|x|/eps)"
    }

    fn build(&self, params: &ModelParams, opts: &PresetOptions) -> Result<InitialData> {
        let g = params.grid();
        let v0 = Field::from_fn(g, |x| if x < 0.0 { opts.v_left } else { opts.v_right })?;
        let phi0 = Field::from_fn(g, |x| -opts.phi_slope * x.abs())?;
        InitialData::from_log_density(params, phi0, v0)
    }
}

/// `tanh` transition of width `l` between the two nutrient levels, with a
/// log-density `-s (sqrt(x^2 + l^2) - l)` rounded off at the origin.
pub struct Smooth;

impl Named for Smooth {
    fn name(&self) -> &'static str {
        "smooth"
    }
}

impl Preset for Smooth {
    fn description(&self) -> &'static str {
        "tanh nutrient transition of width l, log-density rounded at the origin"
    }

    fn build(&self, params: &ModelParams, opts: &PresetOptions) -> Result<InitialData> {
        let g = params.grid();
        let l = opts.width;
        let (a, b) = (opts.v_left, opts.v_right);
        let v0 = Field::from_fn(g, |x| a + (b - a) * 0.5 * (1.0 + (x / l).tanh()))?;
        let phi0 = Field::from_fn(g, |x| -opts.phi_slope * ((x * x + l * l).sqrt() - l))?;
        InitialData::from_log_density(params, phi0, v0)
    }
}

/// Far fields of a traveling wave: `v_right` on the right and the lower root
/// of `Q(v) = Q(v_right)` on the left, so that both sides share one level.
pub struct Wave;

impl Named for Wave {
    fn name(&self) -> &'static str {
        "wave"
    }
}

impl Preset for Wave {
    fn description(&self) -> &'static str {
        "v_right for x >= 0 and the lower root of Q(v) = Q(v_right) for x < 0"
    }

    fn build(&self, params: &ModelParams, opts: &PresetOptions) -> Result<InitialData> {
        if opts.v_right <= params.mu {
            return Err(Error::InvalidParameter(format!(
                "wave preset needs v_right > mu, got {} <= {}",
                opts.v_right, params.mu
            )));
        }
        let pair = branch_roots(q_of_v(opts.v_right, params.mu)?, params.mu)?;
        let left = pair.v_minus();
        let g = params.grid();
        let v0 = Field::from_fn(g, |x| if x < 0.0 { left } else { opts.v_right })?;
        let phi0 = Field::from_fn(g, |x| -opts.phi_slope * x.abs())?;
        InitialData::from_log_density(params, phi0, v0)
    }
}

/// Spatially uniform `u0 = u_const`, `v0 = v_right`.
pub struct Constant;

impl Named for Constant {
    fn name(&self) -> &'static str {
        "constant"
    }
}

impl Preset for Constant {
    fn description(&self) -> &'static str {
        "uniform u0 = u_const and v0 = v_right"
    }

    fn build(&self, params: &ModelParams, opts: &PresetOptions) -> Result<InitialData> {
        let g = params.grid();
        let u0 = Field::constant(g, opts.u_const)?;
        let v0 = Field::constant(g, opts.v_right)?;
        InitialData::from_density(params, u0, v0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams::new(0.05, 1.0, -2.0, 2.0, 161, 1.0).unwrap()
    }

    #[test]
    fn step_matches_its_definition() {
        let init = build_preset("step", &params(), &PresetOptions::default()).unwrap();
        let g = *init.v0.grid();
        for (i, x) in g.nodes().enumerate() {
            let v = init.v0.values()[i];
            assert_eq!(v, if x < 0.0 { 0.5 } else { 2.0 });
            assert!((init.phi0.values()[i] + x.abs()).abs() < 1e-15);
        }
    }

    #[test]
    fn wave_far_fields_share_a_level() {
        let init = build_preset("wave", &params(), &PresetOptions::default()).unwrap();
        let left = q_of_v(init.v0.values()[0], 1.0).unwrap();
        let right = q_of_v(*init.v0.values().last().unwrap(), 1.0).unwrap();
        assert!((left - right).abs() < 1e-12);
    }

    #[test]
    fn smooth_is_monotone_and_unknown_names_fail() {
        let init = build_preset("smooth", &params(), &PresetOptions::default()).unwrap();
        assert!(init.v0.values().windows(2).all(|w| w[1] >= w[0]));
        assert!(init.phi0.max() <= 0.0);
        assert!(build_preset("gaussian", &params(), &PresetOptions::default()).is_err());
    }
}
