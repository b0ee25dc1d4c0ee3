//! Traveling waves `w(x - sigma t)` of the nutrient equation.
//!
//! The profile solves the monostable problem
//!
//! ```text
//! -sigma eps w' - eps^2 w'' = Q~(w) - A,   w(-inf) = w_-,  w(+inf) = w_+,
//! ```
//!
//! with `Q~(w_-) = Q~(w_+) = A`. Linearizing at a far field with the ansatz
//! `exp(lambda y / eps)` gives `lambda^2 + sigma lambda + Q~'(w) = 0`, whose
//! double root at `w_+` selects the minimal speed `2 sqrt(v_+ - mu)`.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_f64, CsvTable};
use crate::model::{branch_roots, qtilde_of_w, qtilde_prime, BranchPair};
use crate::numerics::{fit_line, BandedMatrix};
use crate::pde::SolutionRecord;

/// Discriminants this close to zero count as a double root.
pub const DOUBLE_ROOT_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 100;
const NEWTON_TOL: f64 = 1e-14;
/// Required decay of the far-field deviation over the domain.
const FAR_FIELD_DECAY: f64 = 20.0;

/// `sigma_* = 2 sqrt(Q~'(w_+)) = 2 sqrt(v_+ - mu)`.
pub fn minimal_speed(w_plus: f64, mu: f64) -> Result<f64> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::Domain(format!("mu must be positive, got {mu}")));
    }
    let gap = qtilde_prime(w_plus, mu);
    if !gap.is_finite() || gap < -f64::EPSILON * mu {
        return Err(Error::Domain(format!(
            "w_plus = {w_plus} lies below ln mu = {}",
            mu.ln()
        )));
    }
    Ok(2.0 * gap.max(0.0).sqrt())
}

/// Roots of `lambda^2 + sigma lambda + Q~'(w)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DispersionRoots {
    /// Distinct real roots, smaller first.
    Real(f64, f64),
    Double(f64),
    /// Oscillatory pair `re +- i im`, not admissible for a monotone front.
    Complex {
        re: f64,
        im: f64,
    },
}

impl DispersionRoots {
    pub fn sum(&self) -> f64 {
        match *self {
            DispersionRoots::Real(a, b) => a + b,
            DispersionRoots::Double(l) => 2.0 * l,
            DispersionRoots::Complex { re, .. } => 2.0 * re,
        }
    }

    pub fn product(&self) -> f64 {
        match *self {
            DispersionRoots::Real(a, b) => a * b,
            DispersionRoots::Double(l) => l * l,
            DispersionRoots::Complex { re, im } => re * re + im * im,
        }
    }

    /// Negative real root closest to zero: the decay of a generic front
    /// ahead of it.
    pub fn slow_decay(&self) -> Option<f64> {
        match *self {
            DispersionRoots::Real(_, b) if b < 0.0 => Some(b),
            DispersionRoots::Real(a, _) if a < 0.0 => Some(a),
            DispersionRoots::Double(l) if l < 0.0 => Some(l),
            _ => None,
        }
    }

    /// Positive real root, if any.
    pub fn growth(&self) -> Option<f64> {
        match *self {
            DispersionRoots::Real(_, b) if b > 0.0 => Some(b),
            DispersionRoots::Double(l) if l > 0.0 => Some(l),
            _ => None,
        }
    }

    pub fn is_double(&self) -> bool {
        matches!(self, DispersionRoots::Double(_))
    }
}

pub fn dispersion_roots(sigma: f64, w_state: f64, mu: f64) -> DispersionRoots {
    let c = qtilde_prime(w_state, mu);
    let disc = sigma * sigma - 4.0 * c;
    if disc.abs() <= DOUBLE_ROOT_TOL {
        return DispersionRoots::Double(-0.5 * sigma);
    }
    if disc < 0.0 {
        return DispersionRoots::Complex {
            re: -0.5 * sigma,
            im: 0.5 * (-disc).sqrt(),
        };
    }
    // cancellation-free pair
    let sign = if sigma >= 0.0 { 1.0 } else { -1.0 };
    let q = -0.5 * (sigma + sign * disc.sqrt());
    let (a, b) = if q != 0.0 { (q, c / q) } else { (0.0, -sigma) };
    DispersionRoots::Real(a.min(b), a.max(b))
}

/// How the limit Eikonal profile of a wave is written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EikonalConvention {
    /// `phi(t, x) = Phi(x - sigma t)` substituted into
    /// `phi_t = phi_x^2 + v - mu`: `-sigma p = p^2 + v - mu`. Slopes of a
    /// right-moving front, `phi <= 0` on both sides.
    #[default]
    Comoving,
    /// `sigma p = p^2 + v - mu` as often written for the profile; the right
    /// slope at the minimal speed is `+sigma_* / 2`.
    Literal,
}

impl EikonalConvention {
    pub fn name(&self) -> &'static str {
        match self {
            EikonalConvention::Comoving => "comoving",
            EikonalConvention::Literal => "literal",
        }
    }
}

impl std::str::FromStr for EikonalConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "comoving" => Ok(EikonalConvention::Comoving),
            "literal" => Ok(EikonalConvention::Literal),
            _ => Err(Error::Unknown {
                kind: "eikonal convention",
                name: s.into(),
                available: "comoving, literal".into(),
            }),
        }
    }
}

/// Piecewise-linear limit phase `phi(y) = p_minus y` for `y < 0` and
/// `p_plus y` for `y > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EikonalSlopes {
    pub p_minus: f64,
    pub p_plus: f64,
    pub convention: EikonalConvention,
}

impl EikonalSlopes {
    pub fn phi(&self, y: f64) -> f64 {
        if y < 0.0 {
            self.p_minus * y
        } else {
            self.p_plus * y
        }
    }
}

pub fn eikonal_wave_phi(
    sigma: f64,
    v_minus: f64,
    v_plus: f64,
    mu: f64,
    convention: EikonalConvention,
) -> Result<EikonalSlopes> {
    if !(v_minus > 0.0 && v_minus < mu) {
        return Err(Error::Domain(format!("need 0 < v_minus < mu, got v_minus = {v_minus}")));
    }
    if !(v_plus > 0.0) {
        return Err(Error::Domain(format!("need v_plus > 0, got {v_plus}")));
    }
    let s_min = minimal_speed(v_plus.ln(), mu)?;
    let plus_disc = 0.25 * sigma * sigma - (v_plus - mu);
    if sigma < s_min && plus_disc < -DOUBLE_ROOT_TOL {
        return Err(Error::NoRoot {
            level: sigma,
            minimum: s_min,
        });
    }
    let plus_root = plus_disc.max(0.0).sqrt();
    let minus_root = (0.25 * sigma * sigma + mu - v_minus).sqrt();
    let (p_minus, p_plus) = match convention {
        // p^2 + sigma p + v - mu = 0
        EikonalConvention::Comoving => (-0.5 * sigma + minus_root, -0.5 * sigma + plus_root),
        // p^2 - sigma p + v - mu = 0
        EikonalConvention::Literal => (0.5 * sigma + minus_root, 0.5 * sigma - plus_root),
    };
    Ok(EikonalSlopes {
        p_minus,
        p_plus,
        convention,
    })
}

/// A wave problem on `[-half_length, half_length]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveSetup {
    pub w_minus: f64,
    pub w_plus: f64,
    pub mu: f64,
    pub sigma: f64,
    pub eps: f64,
    pub half_length: f64,
    /// Common level `A = Q~(w_-) = Q~(w_+)`.
    pub a_level: f64,
    /// Grid cells per unit `eps`.
    pub cells_per_eps: f64,
}

impl WaveSetup {
    /// Far fields from `v_plus`, the lower branch on the same level of `Q~`,
    /// and the default domain.
    pub fn new(mu: f64, v_plus: f64, sigma: f64, eps: f64) -> Result<Self> {
        let pair = far_fields(mu, v_plus)?;
        let mut s = Self {
            w_minus: pair.w_minus,
            w_plus: pair.w_plus,
            mu,
            sigma,
            eps,
            half_length: 0.0,
            a_level: pair.q_level,
            cells_per_eps: 20.0,
        };
        s.half_length = s.default_half_length()?;
        s.validate()?;
        Ok(s)
    }

    /// `L = 20 eps / min |lambda|` over the admissible far-field exponents.
    pub fn default_half_length(&self) -> Result<f64> {
        let (behind, ahead) = self.far_field_exponents()?;
        Ok(FAR_FIELD_DECAY * self.eps / behind.abs().min(ahead.abs()))
    }

    /// Growth exponent at `w_-` and decay exponent at `w_+` (the real part
    /// when the latter is oscillatory).
    pub fn far_field_exponents(&self) -> Result<(f64, f64)> {
        let behind = dispersion_roots(self.sigma, self.w_minus, self.mu)
            .growth()
            .ok_or_else(|| Error::Domain("no growing mode behind the front".into()))?;
        let ahead = match dispersion_roots(self.sigma, self.w_plus, self.mu) {
            DispersionRoots::Complex { re, .. } => re,
            r => r
                .slow_decay()
                .ok_or_else(|| Error::Domain("no decaying mode ahead of the front".into()))?,
        };
        Ok((behind, ahead))
    }

    pub fn validate(&self) -> Result<()> {
        let lnmu = self.mu.ln();
        if !(self.w_minus < lnmu && lnmu < self.w_plus) {
            return Err(Error::InvalidParameter(format!(
                "need w_minus < ln mu < w_plus, got {} / {} / {}",
                self.w_minus, lnmu, self.w_plus
            )));
        }
        let gap = (qtilde_of_w(self.w_minus, self.mu)? - qtilde_of_w(self.w_plus, self.mu)?).abs();
        if gap > 1e-12 * self.a_level.abs().max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "far fields lie on different levels ({gap:e})"
            )));
        }
        if !(self.sigma > 0.0 && self.eps > 0.0 && self.half_length > 0.0 && self.cells_per_eps >= 1.0) {
            return Err(Error::InvalidParameter(
                "sigma, eps, half_length and cells_per_eps must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Cells and spacing `eps / cells_per_eps`; the domain is widened to a
    /// whole number of cells on each side so that nested domains share nodes.
    fn grid(&self) -> (usize, f64) {
        let h = self.eps / self.cells_per_eps;
        let half = (self.half_length / h - 1e-9).ceil() as usize;
        (2 * half, h)
    }
}

/// The two roots of `Q~(w) = Q~(ln v_plus)`.
pub fn far_fields(mu: f64, v_plus: f64) -> Result<BranchPair> {
    if !(v_plus > mu) {
        return Err(Error::Domain(format!("need v_plus > mu, got {v_plus}")));
    }
    let w_plus = v_plus.ln();
    let mut pair = branch_roots(qtilde_of_w(w_plus, mu)?, mu)?;
    pair.w_plus = w_plus;
    Ok(pair)
}

/// Converged profile on `y_nodes`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveProfile {
    pub setup: WaveSetup,
    pub y_nodes: Vec<f64>,
    pub w_values: Vec<f64>,
    /// `w - w_-` left of the pin and `w - w_+` right of it, kept separately
    /// because the tails lie far below the resolution of `w`.
    pub deviation: Vec<f64>,
    /// Max norm of the discrete equations.
    pub residual_norm: f64,
    /// Pointwise residual of the differential equation under fourth-order
    /// differences; zero at the two nodes next to each end.
    pub truncation_residual: Vec<f64>,
    /// `(y, w)` of the phase condition.
    pub pinned_at: (f64, f64),
    pub monotone: bool,
    /// Mismatch of `eps w' = lambda (w - w_+)` at the right end.
    pub robin_mismatch: f64,
    pub iterations: usize,
}

impl WaveProfile {
    pub fn truncation_norm(&self) -> f64 {
        self.truncation_residual.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    /// Least-squares slope of `ln(w_+ - w)` against `y / eps` over the given
    /// trailing fraction of the domain.
    pub fn decay_rate(&self, fraction: f64) -> Option<f64> {
        let l = self.y_nodes.last().copied().unwrap_or(0.0);
        let from = l - 2.0 * l * fraction;
        let (xs, ys): (Vec<f64>, Vec<f64>) = self
            .y_nodes
            .iter()
            .zip(&self.deviation)
            .filter(|(y, d)| **y > 0.0 && **y >= from && **d < 0.0)
            .map(|(y, d)| (y / self.setup.eps, (-d).ln()))
            .unzip();
        if xs.len() < 3 {
            return None;
        }
        fit_line(&xs, &ys).map(|f| f.slope)
    }
}

struct Discretization {
    n: usize,
    mid: usize,
    h: f64,
    base: Vec<f64>,
    kappa_left: f64,
}

impl Discretization {
    fn w(&self, d: &[f64], i: usize) -> f64 {
        self.base[i] + d[i]
    }

    /// `w_j - w_i` without cancellation on either side of the pin.
    fn diff(&self, d: &[f64], j: usize, i: usize) -> f64 {
        (self.base[j] - self.base[i]) + (d[j] - d[i])
    }

    /// Equations at the nodes `0..n-1`, the last node being free.
    fn residual(&self, s: &WaveSetup, d: &[f64]) -> Vec<f64> {
        let (eps, sigma, mu, h) = (s.eps, s.sigma, s.mu, self.h);
        (0..self.n - 1)
            .map(|i| {
                let (d1, d2) = if i == 0 {
                    // ghost node from eps w' = lambda (w - w_-)
                    let slope = self.kappa_left * d[0];
                    (slope, (2.0 * self.diff(d, 1, 0) - 2.0 * h * slope) / (h * h))
                } else {
                    (
                        self.diff(d, i + 1, i - 1) / (2.0 * h),
                        (self.diff(d, i + 1, i) - self.diff(d, i, i - 1)) / (h * h),
                    )
                };
                let react = if i == self.mid {
                    qtilde_of_w(self.base[i], mu).unwrap_or(f64::NAN) - s.a_level
                } else {
                    self.base[i].exp() * d[i].exp_m1() - mu * d[i]
                };
                -sigma * eps * d1 - eps * eps * d2 - react
            })
            .collect()
    }

    fn col(&self, j: usize) -> usize {
        if j < self.mid {
            j
        } else {
            j - 1
        }
    }

    fn jacobian(&self, s: &WaveSetup, d: &[f64]) -> BandedMatrix {
        let (eps, sigma, h) = (s.eps, s.sigma, self.h);
        let m = self.n - 1;
        let mut a = BandedMatrix::zeros(m, 2, 1);
        let e2 = eps * eps / (h * h);
        let adv = sigma * eps / (2.0 * h);
        let mut put = |r: usize, j: usize, v: f64| {
            if j != self.mid {
                a.add(r, self.col(j), v);
            }
        };
        for i in 0..m {
            let dq = qtilde_prime(self.w(d, i), s.mu);
            if i == 0 {
                let k = self.kappa_left;
                put(0, 0, -sigma * eps * k + 2.0 * e2 + 2.0 * e2 * h * k - dq);
                put(0, 1, -2.0 * e2);
            } else {
                put(i, i - 1, adv - e2);
                put(i, i, 2.0 * e2 - if i == self.mid { 0.0 } else { dq });
                put(i, i + 1, -adv - e2);
            }
        }
        a
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Profile by Newton's method on centered differences.
///
/// The left end carries the Robin condition of the growing mode at `w_-`
/// and the phase is fixed by `w(0) = ln mu`. Ahead of the front both modes
/// decay, so these two conditions already determine the profile; the Robin
/// condition at the right end is reported as a check rather than imposed.
pub fn solve_profile_bvp(setup: &WaveSetup) -> Result<WaveProfile> {
    setup.validate()?;
    let (behind, ahead) = setup.far_field_exponents()?;
    let (cells, h) = setup.grid();
    let n = cells + 1;
    let mid = cells / 2;
    let lnmu = setup.mu.ln();
    let y: Vec<f64> = (0..n).map(|i| (i as f64 - mid as f64) * h).collect();
    let base: Vec<f64> = (0..n)
        .map(|i| match i.cmp(&mid) {
            std::cmp::Ordering::Less => setup.w_minus,
            std::cmp::Ordering::Equal => lnmu,
            std::cmp::Ordering::Greater => setup.w_plus,
        })
        .collect();
    let disc = Discretization {
        n,
        mid,
        h,
        base,
        kappa_left: behind / setup.eps,
    };

    // tanh guess through ln mu at y = 0
    let (wm, wp) = (setup.w_minus, setup.w_plus);
    let k = setup.sigma / (4.0 * setup.eps);
    let s = (lnmu - wm) / (wp - wm);
    let y0 = -(2.0 * s - 1.0).atanh() / k;
    let mut d: Vec<f64> = (0..n)
        .map(|i| {
            let g = wm + (wp - wm) * 0.5 * (1.0 + ((y[i] - y0) * k).tanh());
            g - disc.base[i]
        })
        .collect();
    d[mid] = 0.0;

    let mut res = disc.residual(setup, &d);
    let mut norm = max_abs(&res);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < NEWTON_MAX_ITER {
        iterations += 1;
        let jac = disc.jacobian(setup, &d);
        let step = jac.solve(&res).ok_or(Error::NoConvergence {
            iterations,
            residual: norm,
        })?;
        let size = (0..n)
            .filter(|&j| j != mid)
            .map(|j| step[disc.col(j)].abs() / (1.0 + disc.w(&d, j).abs()))
            .fold(0.0, f64::max);
        let mut alpha = 1.0;
        let mut trial = d.clone();
        loop {
            for j in 0..n {
                if j != mid {
                    trial[j] = d[j] - alpha * step[disc.col(j)];
                }
            }
            let r = disc.residual(setup, &trial);
            let nr = max_abs(&r);
            // a step at round-off level is taken whatever the residual does
            if nr.is_finite() && (nr < norm || size <= NEWTON_TOL) {
                res = r;
                norm = nr;
                break;
            }
            alpha *= 0.5;
            if alpha < 1e-9 {
                return Err(Error::NoConvergence {
                    iterations,
                    residual: norm,
                });
            }
        }
        std::mem::swap(&mut d, &mut trial);
        if size <= NEWTON_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            iterations,
            residual: norm,
        });
    }

    let w: Vec<f64> = (0..n).map(|i| disc.w(&d, i)).collect();
    let monotone = (0..n - 1).all(|i| disc.diff(&d, i + 1, i) >= -1e-12);
    let truncation = truncation_residual(setup, &disc, &d);
    let slope_end = (3.0 * d[n - 1] - 4.0 * d[n - 2] + d[n - 3]) / (2.0 * h);
    let robin_mismatch = (setup.eps * slope_end - ahead * d[n - 1]).abs();
    Ok(WaveProfile {
        setup: *setup,
        y_nodes: y,
        w_values: w,
        deviation: d,
        residual_norm: norm,
        truncation_residual: truncation,
        pinned_at: (0.0, lnmu),
        monotone,
        robin_mismatch,
        iterations,
    })
}

fn truncation_residual(s: &WaveSetup, disc: &Discretization, d: &[f64]) -> Vec<f64> {
    let n = disc.n;
    let h = disc.h;
    let mut out = vec![0.0; n];
    for i in 2..n - 2 {
        // differences relative to node i
        let f = |j: usize| disc.diff(d, j, i);
        let (m2, m1, p1, p2) = (f(i - 2), f(i - 1), f(i + 1), f(i + 2));
        let d1 = (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h);
        let d2 = (-p2 + 16.0 * p1 + 16.0 * m1 - m2) / (12.0 * h * h);
        let react = if i == disc.mid {
            qtilde_of_w(disc.base[i], s.mu).unwrap_or(f64::NAN) - s.a_level
        } else {
            disc.base[i].exp() * d[i].exp_m1() - s.mu * d[i]
        };
        out[i] = -s.sigma * s.eps * d1 - s.eps * s.eps * d2 - react;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanEntry {
    pub sigma: f64,
    pub converged: bool,
    pub residual_norm: f64,
    pub monotone: bool,
}

/// Solve the profile problem of `base` at every speed, concurrently.
pub fn speed_scan(base: &WaveSetup, sigmas: &[f64]) -> Vec<ScanEntry> {
    sigmas
        .par_iter()
        .map(|&sigma| {
            let setup = WaveSetup { sigma, ..*base };
            match solve_profile_bvp(&setup) {
                Ok(p) => ScanEntry {
                    sigma,
                    converged: true,
                    residual_norm: p.residual_norm,
                    monotone: p.monotone,
                },
                Err(Error::NoConvergence { residual, .. }) => ScanEntry {
                    sigma,
                    converged: false,
                    residual_norm: residual,
                    monotone: false,
                },
                Err(_) => ScanEntry {
                    sigma,
                    converged: false,
                    residual_norm: f64::NAN,
                    monotone: false,
                },
            }
        })
        .collect()
}

/// Least-squares front speed with the positions it was fitted to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontSpeed {
    pub speed: f64,
    pub intercept: f64,
    /// Largest deviation of a position from the fitted line.
    pub residual: f64,
    pub positions: Vec<(f64, f64)>,
}

/// Rightmost upward crossing of `mu` by `v`, linearly interpolated.
pub fn front_position(xs: &[f64], v: &[f64], mu: f64) -> Option<f64> {
    (0..v.len().saturating_sub(1)).rev().find_map(|i| {
        let (a, b) = (v[i] - mu, v[i + 1] - mu);
        (a <= 0.0 && b > 0.0).then(|| xs[i] + (xs[i + 1] - xs[i]) * (-a) / (b - a))
    })
}

/// Slope of the `mu`-level set of `v` over the snapshots in `window`.
pub fn empirical_front_speed(record: &SolutionRecord, mu: f64, window: (f64, f64)) -> Result<FrontSpeed> {
    let (t0, t1) = window;
    if !(t0 < t1) {
        return Err(Error::Window(format!("empty window [{t0}, {t1}]")));
    }
    let xs: Vec<f64> = record.grid().nodes().collect();
    let mut positions = Vec::new();
    for s in record
        .snapshots
        .iter()
        .filter(|s| s.t >= t0 - 1e-12 && s.t <= t1 + 1e-12)
    {
        let x = front_position(&xs, s.v.values(), mu)
            .ok_or_else(|| Error::Window(format!("v does not cross mu at t = {}", s.t)))?;
        positions.push((s.t, x));
    }
    if positions.len() < 2 {
        return Err(Error::Window(format!(
            "{} snapshot(s) in [{t0}, {t1}], need two",
            positions.len()
        )));
    }
    let (ts, xf): (Vec<f64>, Vec<f64>) = positions.iter().copied().unzip();
    let fit = fit_line(&ts, &xf).ok_or_else(|| Error::Window("degenerate window".into()))?;
    Ok(FrontSpeed {
        speed: fit.slope,
        intercept: fit.intercept,
        residual: fit.max_residual,
        positions,
    })
}

/// `y, w, v, residual` with the truncation residual in the last column.
pub fn write_wave_profile(path: &Path, profile: &WaveProfile) -> Result<()> {
    let s = &profile.setup;
    let comments = [
        format!("mu={} sigma={} eps={}", fmt_f64(s.mu), fmt_f64(s.sigma), fmt_f64(s.eps)),
        format!("w_minus={} w_plus={}", fmt_f64(s.w_minus), fmt_f64(s.w_plus)),
        format!("newton_residual={}", fmt_f64(profile.residual_norm)),
    ];
    let mut t = CsvTable::create(path, &comments, &["y", "w", "v", "residual"])?;
    for i in 0..profile.y_nodes.len() {
        let w = profile.w_values[i];
        t.floats(&[profile.y_nodes[i], w, w.exp(), profile.truncation_residual[i]])?;
    }
    t.finish()
}

pub fn write_speed_scan(path: &Path, entries: &[ScanEntry]) -> Result<()> {
    let mut t = CsvTable::create(path, &[], &["sigma", "residual_norm", "monotone_flag"])?;
    for e in entries {
        t.row(&[
            fmt_f64(e.sigma),
            fmt_f64(e.residual_norm),
            (e.converged && e.monotone).to_string(),
        ])?;
    }
    t.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_speed_examples() {
        assert_eq!(minimal_speed(2f64.ln(), 1.0).unwrap(), 2.0);
        assert_eq!(minimal_speed(0.0, 1.0).unwrap(), 0.0);
        assert!(minimal_speed(-0.1, 1.0).is_err());
        for &(vp, mu) in &[(2.0, 1.0), (3.7, 0.4), (1.01, 1.0)] {
            let s: f64 = minimal_speed(f64::ln(vp), mu).unwrap();
            assert!((s * s - 4.0 * qtilde_prime(f64::ln(vp), mu)).abs() < 1e-13);
        }
    }

    #[test]
    fn dispersion_examples() {
        let wp = 2f64.ln();
        assert_eq!(dispersion_roots(2.0, wp, 1.0), DispersionRoots::Double(-1.0));
        match dispersion_roots(3.0, wp, 1.0) {
            DispersionRoots::Real(a, b) => {
                assert!((a - (-3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-14);
                assert!((b - (-3.0 + 5f64.sqrt()) / 2.0).abs() < 1e-14);
            }
            r => panic!("{r:?}"),
        }
        assert!(matches!(
            dispersion_roots(1.0, wp, 1.0),
            DispersionRoots::Complex { .. }
        ));
        let wm = 0.4f64.ln();
        for sigma in [0.1, 1.0, 5.0] {
            let r = dispersion_roots(sigma, wm, 1.0);
            assert!(r.growth().is_some() && r.product() < 0.0);
            assert!((r.sum() + sigma).abs() < 1e-12);
        }
    }

    #[test]
    fn eikonal_slopes() {
        let c = eikonal_wave_phi(2.0, 0.5, 2.0, 1.0, EikonalConvention::Comoving).unwrap();
        assert!((c.p_plus + 1.0).abs() < 1e-12);
        assert!((c.p_minus - (1.5f64.sqrt() - 1.0)).abs() < 1e-12);
        for y in [-3.0, -0.1, 0.0, 0.2, 4.0] {
            assert!(c.phi(y) <= 0.0);
        }
        let l = eikonal_wave_phi(2.0, 0.5, 2.0, 1.0, EikonalConvention::Literal).unwrap();
        assert!((l.p_plus - 1.0).abs() < 1e-12);
        assert!((l.p_minus - (1.0 + 1.5f64.sqrt())).abs() < 1e-12);
        assert!(l.phi(-1.0) < 0.0);
        assert!(eikonal_wave_phi(1.9, 0.5, 2.0, 1.0, EikonalConvention::Comoving).is_err());
    }

    #[test]
    fn minimal_speed_profile() {
        let setup = WaveSetup::new(1.0, 2.0, 2.0, 0.05).unwrap();
        let p = solve_profile_bvp(&setup).unwrap();
        assert!(p.residual_norm <= 1e-9, "{}", p.residual_norm);
        assert!(p.monotone);
        assert!((p.w_values[0] - setup.w_minus).abs() < 1e-6);
        assert!((p.w_values.last().unwrap() - setup.w_plus).abs() < 1e-6);
        let rate = p.decay_rate(0.25).unwrap();
        assert!((rate + 1.0).abs() < 0.05, "{rate}");
    }
}
