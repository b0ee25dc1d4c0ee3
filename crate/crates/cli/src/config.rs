//! Flat `key = value` configuration with `[section]` headers.
//!
//! Every key lives in exactly one section and can be overridden on the
//! command line as `--key value` (underscores become dashes).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{Context, Result};
use dirac_front::estimates::EstimateConfig;
use dirac_front::pde::SchemeConfig;
use dirac_front::presets::PresetOptions;
use dirac_front::scenario::Scenario;
use ini::Ini;
use sha2::{Digest, Sha256};

/// Bad configuration values, as opposed to numerical failures.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

macro_rules! usage {
    ($($t:tt)*) => {
        anyhow::Error::new(UsageError(format!($($t)*)))
    };
}

pub struct KeySpec {
    pub section: &'static str,
    pub key: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

const fn k(section: &'static str, key: &'static str, default: &'static str, help: &'static str) -> KeySpec {
    KeySpec {
        section,
        key,
        default,
        help,
    }
}

pub const KEYS: &[KeySpec] = &[
    k("model", "eps", "0.05", "Diffusion and reaction scale eps"),
    k("model", "mu", "1", "Nutrient threshold mu"),
    k("domain", "x_min", "-10", "Left end of the domain"),
    k("domain", "x_max", "10", "Right end of the domain"),
    k("domain", "cells_per_eps", "4", "Grid cells per unit eps"),
    k("domain", "t_end", "3", "Final time"),
    k("domain", "snapshots", "150", "Equally spaced snapshots on (0, t_end]"),
    k(
        "initial",
        "preset",
        "smooth",
        "Initial data: step, smooth, wave or constant",
    ),
    k("initial", "v_left", "0.5", "Nutrient level left of x = 0"),
    k("initial", "v_right", "2", "Nutrient level right of x = 0"),
    k("initial", "width", "0.5", "Transition width of the smooth preset"),
    k(
        "initial",
        "phi_slope",
        "1",
        "Slope s of the log-density wings phi0 = -s|x|",
    ),
    k("initial", "u_const", "1", "Density of the constant preset"),
    k(
        "initial",
        "v0_csv",
        "",
        "Optional (x, v0) table replacing the preset nutrient",
    ),
    k(
        "initial",
        "u0_csv",
        "",
        "Optional (x, u0) table replacing the preset density",
    ),
    k("scheme", "variable_set", "hopf_cole", "PDE scheme: hopf_cole or direct"),
    k(
        "scheme",
        "dt_initial",
        "0.01",
        "Largest time step (the step itself without adaptivity)",
    ),
    k("scheme", "cfl_safety", "0.4", "Safety factor of the adaptive step"),
    k(
        "scheme",
        "bc_phi",
        "linear_extrapolation",
        "Log-density boundary: linear_extrapolation or neumann",
    ),
    k("scheme", "adaptive_dt", "true", "Adapt the time step"),
    k(
        "scheme",
        "reaction_resolution",
        "0.1",
        "Largest reaction substep times local rate (direct scheme)",
    ),
    k(
        "ode",
        "x_points",
        "0.5,1,2",
        "Points x at which the diffusion-free dynamics are integrated",
    ),
    k(
        "ode",
        "ode_method",
        "hopf_cole",
        "Point integrator: hopf_cole, reduced or direct",
    ),
    k("ode", "rel_tol", "1e-10", "Relative tolerance of the point integrator"),
    k(
        "estimates",
        "record",
        "",
        "Saved record directory to analyse (empty: run the scenario)",
    ),
    k(
        "estimates",
        "estimate_names",
        "",
        "Comma-separated estimates (empty: all)",
    ),
    k("estimates", "radius", "5", "Half-width R of the window |x| <= R"),
    k("estimates", "ceiling", "1000", "Ceiling for fitted constants"),
    k(
        "estimates",
        "w_upper_tol",
        "1e-8",
        "Allowed excess of w over the upper branch",
    ),
    k(
        "estimates",
        "identity_rel_tol",
        "0.02",
        "Tolerance of the time-integral identity",
    ),
    k("sweep", "eps_list", "0.1,0.05,0.025", "Values of eps in the sweep"),
    k(
        "sweep",
        "analyses",
        "jump_times,lp,weak_mass,sobolev,estimates",
        "Analyses applied to every row",
    ),
    k(
        "sweep",
        "reference",
        "fine_run",
        "Reference jump times: fine_run or no_diffusion",
    ),
    k(
        "sweep",
        "reference_eps",
        "",
        "eps of the reference run (empty: half the smallest eps)",
    ),
    k(
        "sweep",
        "theta",
        "0.25",
        "Exponent of the difference-quotient norm, in [0, 1/3]",
    ),
    k(
        "sweep",
        "lp_time",
        "",
        "Comparison time of the Lp errors (empty: t_end)",
    ),
    k("sweep", "parallel", "false", "Run the rows concurrently"),
    k("wave", "v_plus", "2", "Nutrient ahead of the front"),
    k(
        "wave",
        "sigma",
        "",
        "Speed of the profile problem (empty: minimal speed)",
    ),
    k("wave", "sigma_list", "1.5,2,2.5,3,4", "Speeds of the profile scan"),
    k(
        "wave",
        "eikonal_convention",
        "comoving",
        "Slope convention: comoving or literal",
    ),
    k(
        "wave",
        "bvp_cells_per_eps",
        "20",
        "Grid cells per unit eps of the profile problem",
    ),
    k("wave", "wave_x_min", "-20", "Left end of the front-speed run"),
    k("wave", "wave_x_max", "20", "Right end of the front-speed run"),
    k("wave", "wave_t_end", "8", "Final time of the front-speed run"),
    k(
        "wave",
        "wave_cells_per_eps",
        "8",
        "Grid cells per unit eps of the front-speed run",
    ),
    k("wave", "wave_window", "4,8", "Time window of the speed fit"),
    k(
        "wave",
        "front_run",
        "true",
        "Measure the front speed of a step-datum simulation",
    ),
    k("figure1", "figure_x_min", "-2", "Left end of the figure domain"),
    k("figure1", "figure_x_max", "8", "Right end of the figure domain"),
    k("figure1", "figure_t_end", "2", "Final time of the figure run"),
    k("figure1", "figure_snapshots", "4", "Profiles written by the figure run"),
];

/// Sections read by each subcommand.
pub fn sections(command: &str) -> &'static [&'static str] {
    match command {
        "validate" => &["model", "domain", "initial"],
        "ode" => &["model", "domain", "initial", "ode"],
        "pde" => &["model", "domain", "initial", "scheme"],
        "estimates" => &["model", "domain", "initial", "scheme", "estimates"],
        "sweep" => &["model", "domain", "initial", "scheme", "estimates", "sweep"],
        "wave" => &["model", "initial", "scheme", "wave"],
        "figure1" => &["model", "initial", "scheme", "figure1"],
        _ => &[],
    }
}

pub fn keys_for(command: &str) -> impl Iterator<Item = &'static KeySpec> {
    let secs = sections(command);
    KEYS.iter().filter(move |s| secs.contains(&s.section))
}

pub fn flag(key: &str) -> String {
    key.replace('_', "-")
}

/// Resolved values of one subcommand, in table order.
#[derive(Debug, Clone)]
pub struct Config {
    pub command: String,
    values: BTreeMap<&'static str, String>,
    pub file: Option<PathBuf>,
}

impl Config {
    /// Defaults, then the file, then the overrides.
    pub fn resolve(command: &str, file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut values: BTreeMap<&'static str, String> =
            keys_for(command).map(|s| (s.key, s.default.to_string())).collect();
        if let Some(path) = file {
            let ini = Ini::load_from_file(path).with_context(|| format!("reading config {}", path.display()))?;
            for (section, props) in ini.iter() {
                for (key, value) in props.iter() {
                    let spec = KEYS
                        .iter()
                        .find(|s| s.key == key)
                        .ok_or_else(|| usage!("unknown config key '{key}'"))?;
                    if let Some(sec) = section {
                        if sec != spec.section {
                            return Err(usage!(
                                "key '{key}' belongs to section [{}], found in [{sec}]",
                                spec.section
                            ));
                        }
                    }
                    // keys of other subcommands are allowed and ignored
                    if let Some(slot) = values.get_mut(spec.key) {
                        *slot = value.trim().to_string();
                    }
                }
            }
        }
        for (key, value) in overrides {
            let slot = values
                .get_mut(key.as_str())
                .ok_or_else(|| usage!("'{}' is not a key of '{command}'", flag(key)))?;
            *slot = value.clone();
        }
        Ok(Self {
            command: command.to_string(),
            values,
            file: file.map(Path::to_path_buf),
        })
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("key '{key}' is not read by '{}'", self.command))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(key);
        raw.parse()
            .map_err(|e| usage!("invalid value '{raw}' for {}: {e}", flag(key)))
    }

    pub fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if self.raw(key).is_empty() {
            Ok(None)
        } else {
            self.get(key).map(Some)
        }
    }

    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|e| usage!("invalid entry '{s}' in {}: {e}", flag(key)))
            })
            .collect()
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        let raw = self.raw(key);
        (!raw.is_empty()).then(|| PathBuf::from(raw))
    }

    /// `key=value` lines of every resolved key, in table order.
    pub fn entries(&self) -> Vec<(&'static str, &str)> {
        keys_for(&self.command)
            .map(|s| (s.key, self.values[s.key].as_str()))
            .collect()
    }

    /// SHA-256 over the subcommand and its resolved keys.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.command.as_bytes());
        h.update(b"\n");
        for (key, value) in self.entries() {
            h.update(format!("{key}={value}\n").as_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn scheme(&self) -> Result<SchemeConfig> {
        Ok(SchemeConfig {
            dt_initial: self.get("dt_initial")?,
            cfl_safety: self.get("cfl_safety")?,
            variable_set: self.get("variable_set")?,
            bc_phi: self.get("bc_phi")?,
            adaptive_dt: self.get("adaptive_dt")?,
            reaction_resolution: self.get("reaction_resolution")?,
            snapshot_times: Vec::new(),
        })
    }

    pub fn preset_options(&self) -> Result<PresetOptions> {
        Ok(PresetOptions {
            v_left: self.get("v_left")?,
            v_right: self.get("v_right")?,
            width: self.get("width")?,
            phi_slope: self.get("phi_slope")?,
            u_const: self.get("u_const")?,
        })
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let scheme = if sections(&self.command).contains(&"scheme") {
            self.scheme()?
        } else {
            SchemeConfig::default()
        };
        Ok(Scenario {
            name: self.command.clone(),
            mu: self.get("mu")?,
            x_min: self.get("x_min")?,
            x_max: self.get("x_max")?,
            cells_per_eps: self.get("cells_per_eps")?,
            t_end: self.get("t_end")?,
            snapshots: self.get("snapshots")?,
            preset: self.raw("preset").to_string(),
            preset_options: self.preset_options()?,
            v0_csv: self.path("v0_csv"),
            u0_csv: self.path("u0_csv"),
            scheme,
        })
    }

    pub fn estimate_config(&self) -> Result<EstimateConfig> {
        Ok(EstimateConfig {
            radius: self.get("radius")?,
            ceiling: self.get("ceiling")?,
            w_upper_tol: self.get("w_upper_tol")?,
            identity_rel_tol: self.get("identity_rel_tol")?,
        })
    }
}
