//! A reproducible experiment: domain, initial data and scheme, with `eps`
//! left free so that the same scenario can be swept.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::io::{fmt_f64, read_xy, sample_onto};
use crate::model::{InitialData, ModelParams};
use crate::pde::{simulate, uniform_times, SchemeConfig, SolutionRecord};
use crate::presets::{build_preset, PresetOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub mu: f64,
    pub x_min: f64,
    pub x_max: f64,
    /// Grid nodes per unit `eps`, i.e. `dx = eps / cells_per_eps`.
    pub cells_per_eps: f64,
    pub t_end: f64,
    /// Equally spaced snapshots on `(0, t_end]`.
    pub snapshots: usize,
    pub preset: String,
    pub preset_options: PresetOptions,
    /// Optional `(x, v0)` table replacing the preset nutrient.
    pub v0_csv: Option<PathBuf>,
    /// Optional `(x, u0)` table replacing the preset density.
    pub u0_csv: Option<PathBuf>,
    /// Scheme template; its snapshot times are overwritten.
    pub scheme: SchemeConfig,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "front".into(),
            mu: 1.0,
            x_min: -10.0,
            x_max: 10.0,
            cells_per_eps: 4.0,
            t_end: 3.0,
            snapshots: 150,
            preset: "smooth".into(),
            preset_options: PresetOptions::default(),
            v0_csv: None,
            u0_csv: None,
            scheme: SchemeConfig::default(),
        }
    }
}

/// Everything produced by one run of a scenario.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub params: ModelParams,
    pub init: InitialData,
    pub record: SolutionRecord,
}

impl Scenario {
    pub fn params(&self, eps: f64) -> Result<ModelParams> {
        let n = ModelParams::nodes_for_resolution(self.x_min, self.x_max, eps, self.cells_per_eps);
        ModelParams::new(eps, self.mu, self.x_min, self.x_max, n, self.t_end)
    }

    pub fn initial_data(&self, params: &ModelParams) -> Result<InitialData> {
        let base = build_preset(&self.preset, params, &self.preset_options)?;
        if self.v0_csv.is_none() && self.u0_csv.is_none() {
            return Ok(base);
        }
        let grid = params.grid();
        let v0 = match &self.v0_csv {
            Some(path) => {
                let (xs, ys) = read_xy(path)?;
                sample_onto(grid, &xs, &ys)?
            }
            None => base.v0.clone(),
        };
        match &self.u0_csv {
            Some(path) => {
                let (xs, ys) = read_xy(path)?;
                InitialData::from_density(params, sample_onto(grid, &xs, &ys)?, v0)
            }
            None => InitialData::from_log_density(params, base.phi0.clone(), v0),
        }
    }

    pub fn scheme(&self) -> SchemeConfig {
        SchemeConfig {
            snapshot_times: uniform_times(self.t_end, self.snapshots),
            ..self.scheme.clone()
        }
    }

    pub fn run(&self, eps: f64) -> Result<ScenarioRun> {
        let params = self.params(eps)?;
        let init = self.initial_data(&params)?;
        let record = simulate(&params, &init, &self.scheme())?;
        Ok(ScenarioRun { params, init, record })
    }

    /// Canonical `key = value` description, in a fixed order.
    pub fn describe(&self) -> Vec<(String, String)> {
        let o = &self.preset_options;
        let s = &self.scheme;
        let path = |p: &Option<PathBuf>| p.as_ref().map_or(String::new(), |p| p.display().to_string());
        [
            ("name", self.name.clone()),
            ("mu", fmt_f64(self.mu)),
            ("x_min", fmt_f64(self.x_min)),
            ("x_max", fmt_f64(self.x_max)),
            ("cells_per_eps", fmt_f64(self.cells_per_eps)),
            ("t_end", fmt_f64(self.t_end)),
            ("snapshots", self.snapshots.to_string()),
            ("preset", self.preset.clone()),
            ("v_left", fmt_f64(o.v_left)),
            ("v_right", fmt_f64(o.v_right)),
            ("width", fmt_f64(o.width)),
            ("phi_slope", fmt_f64(o.phi_slope)),
            ("u_const", fmt_f64(o.u_const)),
            ("v0_csv", path(&self.v0_csv)),
            ("u0_csv", path(&self.u0_csv)),
            ("dt_initial", fmt_f64(s.dt_initial)),
            ("cfl_safety", fmt_f64(s.cfl_safety)),
            ("variable_set", s.variable_set.name().into()),
            ("bc_phi", s.bc_phi.name().into()),
            ("adaptive_dt", s.adaptive_dt.to_string()),
            ("reaction_resolution", fmt_f64(s.reaction_resolution)),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    /// SHA-256 of [`Scenario::describe`], hex encoded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.describe() {
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
