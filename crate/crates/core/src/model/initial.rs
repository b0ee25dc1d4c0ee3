use serde::{Deserialize, Serialize};

use super::grid::{Field, ModelParams};
use super::potential::{branch_roots, q_of_v, BranchPair};
use crate::error::{Error, Result};
use crate::numerics::{first_derivative, second_derivative, trapezoid_uniform};

/// Lower clamp for the log-density `phi = eps ln u`.
///
/// Densities below `exp(phi_floor / eps)` are indistinguishable from zero.
pub fn phi_floor(eps: f64) -> f64 {
    -500.0 * eps.max(1.0)
}

/// Initial cell density and nutrient, together with the derived log-variables
/// and the branch pair of every node.
///
/// `phi0` is the authoritative cell variable: `u0 = exp(phi0 / eps)` may
/// underflow to zero for strongly concentrated data while `phi0` stays O(1).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InitialData {
    pub u0: Field,
    pub v0: Field,
    pub phi0: Field,
    pub w0: Field,
    pub branch0: Vec<BranchPair>,
}

impl InitialData {
    /// Build from the log-density `phi0` and the nutrient `v0`.
    pub fn from_log_density(params: &ModelParams, phi0: Field, v0: Field) -> Result<Self> {
        params.validate()?;
        if phi0.grid() != v0.grid() {
            return Err(Error::InvalidParameter("phi0 and v0 live on different grids".into()));
        }
        if let Some(i) = v0.values().iter().position(|v| *v <= 0.0) {
            return Err(Error::Domain(format!(
                "initial nutrient must be positive, node {i} has {}",
                v0.values()[i]
            )));
        }
        let eps = params.eps;
        let floor = phi_floor(eps);
        let phi0 = phi0.map(|p| p.max(floor))?;
        let u0 = phi0.map(|p| (p / eps).exp())?;
        let w0 = v0.map(f64::ln)?;
        let branch0 = v0
            .values()
            .iter()
            .map(|&v| branch_roots(q_of_v(v, params.mu)?, params.mu))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            u0,
            v0,
            phi0,
            w0,
            branch0,
        })
    }

    /// Build from a strictly positive density `u0` and the nutrient `v0`.
    pub fn from_density(params: &ModelParams, u0: Field, v0: Field) -> Result<Self> {
        if let Some(i) = u0.values().iter().position(|u| *u <= 0.0) {
            return Err(Error::Domain(format!(
                "initial density must be positive, node {i} has {}",
                u0.values()[i]
            )));
        }
        let eps = params.eps;
        let phi0 = u0.map(|u| eps * u.ln())?;
        Self::from_log_density(params, phi0, v0)
    }

    pub fn w_minus(&self) -> Vec<f64> {
        self.branch0.iter().map(|b| b.w_minus).collect()
    }

    pub fn w_plus(&self) -> Vec<f64> {
        self.branch0.iter().map(|b| b.w_plus).collect()
    }

    pub fn len(&self) -> usize {
        self.v0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v0.is_empty()
    }
}

/// Thresholds the validator compares its measured constants against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationThresholds {
    /// Generic constant `C` of the "<= C" assumptions.
    pub bound: f64,
}

impl Default for ValidationThresholds {
    fn default() -> Self {
        Self { bound: 1e3 }
    }
}

/// One line of a [`ValidationReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationEntry {
    pub name: String,
    pub value: f64,
    /// `None` for purely informational entries.
    pub threshold: Option<f64>,
    pub pass: bool,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub entries: Vec<ValidationEntry>,
}

impl ValidationReport {
    pub fn get(&self, name: &str) -> Option<&ValidationEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ValidationEntry> {
        self.entries.iter().filter(|e| !e.pass)
    }
}

fn sup(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// Measure the constants of the initial-data assumptions.
///
/// Failures are reported, never raised.
pub fn validate_initial_data(
    init: &InitialData,
    params: &ModelParams,
    thresholds: &ValidationThresholds,
) -> ValidationReport {
    let eps = params.eps;
    let mu = params.mu;
    let c = thresholds.bound;
    let grid = *init.v0.grid();
    let dx = grid.dx();
    let xs: Vec<f64> = grid.nodes().collect();
    let u0 = init.u0.values();
    let v0 = init.v0.values();
    let phi0 = init.phi0.values();
    let w0 = init.w0.values();

    let mut entries = Vec::new();
    let mut bounded = |name: &str, value: f64, description: &str| {
        entries.push(ValidationEntry {
            name: name.to_string(),
            value,
            threshold: Some(c),
            pass: value <= c,
            description: description.to_string(),
        });
    };

    // Cell density
    let eps_u_sup = sup(u0.iter().map(|u| eps * u));
    bounded("eps_u0_sup", eps_u_sup, "sup eps*u0 <= C");
    let mass = trapezoid_uniform(u0, dx);
    bounded("u0_mass", mass, "int u0 dx <= C (initial Dirac mass rho0)");

    // Log-density
    let phi_xx = second_derivative(phi0, dx);
    let phi_x = first_derivative(phi0, dx);
    bounded(
        "eps_phi0_xx_sup",
        sup(phi_xx.iter().map(|d| eps * d)),
        "sup eps*d2phi0/dx2 <= C",
    );
    bounded(
        "phi0_lipschitz",
        sup(phi_x.iter().map(|d| d.abs())),
        "sup |dphi0/dx| <= C",
    );
    bounded(
        "phi0_linear_lower",
        sup(xs.iter().zip(phi0).map(|(x, p)| -p / (1.0 + x.abs()))),
        "phi0 >= -C(1+|x|)",
    );

    // Nutrient
    let w_xx = second_derivative(w0, dx);
    let w_x = first_derivative(w0, dx);
    bounded(
        "eps_lnv0_xx_sup",
        sup(w_xx.iter().map(|d| eps * d.abs())),
        "sup eps*|d2 ln v0/dx2| <= C",
    );
    bounded(
        "lnv0_c1_sup",
        sup(w_x.iter().zip(w0).map(|(d, w)| d.abs() + w.abs())),
        "sup |d ln v0/dx| + |ln v0| <= C",
    );
    let gap: Vec<f64> = w0.iter().zip(&init.branch0).map(|(w, b)| w - b.w_minus).collect();
    let gap_xx = second_derivative(&gap, dx);
    bounded(
        "lower_branch_gap",
        sup(gap_xx.iter().zip(u0).map(|(d, u)| eps * d + u)),
        "sup eps*d2(w0 - w0_minus)/dx2 + u0 <= C",
    );

    let info = |name: &str, value: f64, pass: bool, description: &str| ValidationEntry {
        name: name.to_string(),
        value,
        threshold: None,
        pass,
        description: description.to_string(),
    };

    entries.push(info(
        "u0_positive",
        init.u0.min(),
        phi0.iter().all(|p| p.is_finite()),
        "u0 > 0 (held through phi0 = eps ln u0; value is min u0, may underflow)",
    ));

    let v_m = init.v0.min();
    let v_big = init.v0.max();
    entries.push(info("v_min", v_m, v_m > 0.0, "v_m = min v0"));
    entries.push(info("v_max", v_big, v_big.is_finite(), "v_M = max v0"));
    entries.push(info("mu_bracketed", mu, v_m < mu && mu < v_big, "v_m < mu < v_M"));

    let violations = xs
        .iter()
        .zip(v0)
        .filter(|(x, v)| (**x < 0.0 && **v >= mu) || (**x > 0.0 && **v <= mu))
        .count();
    entries.push(info(
        "sign_change_at_origin",
        violations as f64,
        violations == 0,
        "v0 < mu for x < 0 and v0 > mu for x > 0 (value counts violating nodes)",
    ));

    let q_mu = mu - mu * mu.ln();
    let q_m = v0.iter().map(|v| v - mu * v.ln()).fold(f64::INFINITY, f64::min);
    entries.push(info(
        "q_lower_margin",
        q_m - q_mu,
        q_m > q_mu,
        "Q_m - Q(mu) with Q_m = min Q(v0); must be positive",
    ));
    let q_big = sup(v0.iter().zip(u0).map(|(v, u)| v - mu * v.ln() + eps * u));
    entries.push(info("q_upper", q_big, q_big.is_finite(), "Q_M = sup Q(v0) + eps*u0"));
    entries.push(info(
        "w0_min",
        init.w0.min(),
        true,
        "min ln v0 (reported only; no positivity is asserted)",
    ));
    ValidationReport { entries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::grid::Field;

    fn step_data(eps: f64) -> (ModelParams, InitialData) {
        let params = ModelParams::new(eps, 1.0, -2.0, 2.0, 321, 1.0).unwrap();
        let grid = params.grid();
        let v0 = Field::from_fn(grid, |x| if x < 0.0 { 0.5 } else { 2.0 }).unwrap();
        let phi0 = Field::from_fn(grid, |x| -x.abs()).unwrap();
        (params, InitialData::from_log_density(&params, phi0, v0).unwrap())
    }

    #[test]
    fn step_datum_passes() {
        let (params, init) = step_data(0.05);
        let report = validate_initial_data(&init, &params, &ValidationThresholds::default());
        for e in &report.entries {
            assert!(e.pass, "{} failed with {}", e.name, e.value);
        }
        assert_eq!(report.get("v_min").unwrap().value, 0.5);
        assert_eq!(report.get("v_max").unwrap().value, 2.0);
        // phi0 = -|x| is 1-Lipschitz and its kink has negative curvature
        assert!((report.get("phi0_lipschitz").unwrap().value - 1.0).abs() < 1e-12);
        assert!(report.get("eps_phi0_xx_sup").unwrap().value <= 1e-9);
    }

    #[test]
    fn constant_nutrient_fails_sign_change() {
        let params = ModelParams::new(0.1, 1.0, -1.0, 1.0, 21, 1.0).unwrap();
        let grid = params.grid();
        let v0 = Field::constant(grid, 2.0).unwrap();
        let phi0 = Field::from_fn(grid, |x| -x.abs()).unwrap();
        let init = InitialData::from_log_density(&params, phi0, v0).unwrap();
        let report = validate_initial_data(&init, &params, &ValidationThresholds::default());
        assert!(!report.get("sign_change_at_origin").unwrap().pass);
        assert!(!report.get("mu_bracketed").unwrap().pass);
    }

    #[test]
    fn unit_mass_is_reported() {
        let params = ModelParams::new(0.1, 1.0, -10.0, 10.0, 2001, 1.0).unwrap();
        let grid = params.grid();
        // normalized Gaussian
        let u0 = Field::from_fn(grid, |x| (-x * x / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt()).unwrap();
        let v0 = Field::from_fn(grid, |x| if x < 0.0 { 0.5 } else { 2.0 }).unwrap();
        let init = InitialData::from_density(&params, u0, v0).unwrap();
        let report = validate_initial_data(&init, &params, &ValidationThresholds { bound: 1.0 + 1e-6 });
        let mass = report.get("u0_mass").unwrap();
        assert!((mass.value - 1.0).abs() < 1e-8);
        assert!(mass.pass);
    }

    #[test]
    fn phi0_matches_log_density() {
        let (params, init) = step_data(0.1);
        for (u, p) in init.u0.values().iter().zip(init.phi0.values()) {
            if *u > 1e-300 {
                assert!((params.eps * u.ln() - p).abs() < 1e-12);
            }
        }
    }
}
