//! The nutrient potential `Q(v) = v - mu ln v`, its logarithmic form
//! `Q~(w) = e^w - mu w`, the two branches of its level sets and the
//! compactness functional built on top of it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::adaptive_simpson;

/// Levels within this distance of the minimum are treated as the double root.
pub const DEGENERATE_LEVEL_TOL: f64 = 1e-13;
/// Relative residual guaranteed by [`branch_roots`].
pub const ROOT_RESIDUAL_TOL: f64 = 1e-12;
/// Width of the root brackets on either side of `ln mu`.
const BRACKET_SPAN: f64 = 60.0;
/// Absolute tolerance of the adaptive quadrature in [`phi_potential`].
pub const PHI_QUADRATURE_TOL: f64 = 1e-10;

fn check_mu(mu: f64) -> Result<()> {
    if mu > 0.0 && mu.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("mu must be positive, got {mu}")))
    }
}

pub fn q_of_v(v: f64, mu: f64) -> Result<f64> {
    check_mu(mu)?;
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::Domain(format!("Q(v) needs v > 0, got {v}")));
    }
    Ok(v - mu * v.ln())
}

pub fn qtilde_of_w(w: f64, mu: f64) -> Result<f64> {
    check_mu(mu)?;
    let q = w.exp() - mu * w;
    if q.is_finite() {
        Ok(q)
    } else {
        Err(Error::Range(format!("Q~({w}) overflows")))
    }
}

/// Unchecked `e^w - mu w` for inner loops where `mu > 0` is already known.
#[inline]
pub(crate) fn qtilde(w: f64, mu: f64) -> f64 {
    w.exp() - mu * w
}

pub fn qtilde_prime(w: f64, mu: f64) -> f64 {
    w.exp() - mu
}

/// The two roots `w_minus <= ln mu <= w_plus` of `Q~(w) = q_level`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchPair {
    pub w_minus: f64,
    pub w_plus: f64,
    pub q_level: f64,
}

impl BranchPair {
    pub fn v_minus(&self) -> f64 {
        self.w_minus.exp()
    }

    pub fn v_plus(&self) -> f64 {
        self.w_plus.exp()
    }

    /// Jump of `ln v` between the branches.
    pub fn log_gap(&self) -> f64 {
        self.w_plus - self.w_minus
    }
}

/// Safeguarded Newton iteration on a bracket `[lo, hi]` where `f(lo)` and
/// `f(hi)` have opposite signs. Falls back to bisection whenever the Newton
/// step leaves the bracket.
fn bracketed_newton(f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, start: f64) -> f64 {
    let f_lo = f(lo);
    let lo_positive = f_lo > 0.0;
    let mut x = start.clamp(lo, hi);
    for _ in 0..200 {
        let fx = f(x);
        if fx == 0.0 {
            return x;
        }
        if (fx > 0.0) == lo_positive {
            lo = x;
        } else {
            hi = x;
        }
        let d = df(x);
        let mut next = if d != 0.0 { x - fx / d } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - x).abs();
        x = next;
        if step <= 2.0 * f64::EPSILON * x.abs().max(1.0) || hi - lo <= 2.0 * f64::EPSILON * x.abs().max(1.0) {
            break;
        }
    }
    x
}

/// Both roots of `Q~(w) = q_level`.
///
/// At the minimum level `Q~(ln mu)` the double root `(ln mu, ln mu)` is
/// returned; levels further than [`DEGENERATE_LEVEL_TOL`] below it have no
/// real root.
pub fn branch_roots(q_level: f64, mu: f64) -> Result<BranchPair> {
    check_mu(mu)?;
    if !q_level.is_finite() {
        return Err(Error::Range(format!("level {q_level} is not finite")));
    }
    let w_mu = mu.ln();
    let q_min = qtilde(w_mu, mu);
    let gap = q_level - q_min;
    let tol = DEGENERATE_LEVEL_TOL * q_min.abs().max(1.0);
    if gap < -tol {
        return Err(Error::NoRoot {
            level: q_level,
            minimum: q_min,
        });
    }
    if gap <= tol {
        return Ok(BranchPair {
            w_minus: w_mu,
            w_plus: w_mu,
            q_level,
        });
    }

    let f = |w: f64| qtilde(w, mu) - q_level;
    let df = |w: f64| qtilde_prime(w, mu);

    // Q~ is convex, so Newton started on the side where f >= 0 converges
    // monotonically; the starting points below are chosen to sit there.
    let lo_bracket = w_mu - BRACKET_SPAN / mu;
    if f(lo_bracket) < 0.0 {
        return Err(Error::Range(format!(
            "level {q_level} exceeds the lower bracket of the decreasing branch"
        )));
    }
    let d_lower = {
        let d = (3.0 * gap / mu).sqrt();
        if d <= 1.0 {
            d
        } else {
            1.0 + gap / mu
        }
    };
    let start_lower = (w_mu - d_lower).max(lo_bracket);
    let w_minus = bracketed_newton(f, df, lo_bracket, w_mu, start_lower);

    let hi_bracket = w_mu + BRACKET_SPAN;
    if f(hi_bracket) < 0.0 {
        return Err(Error::Range(format!(
            "level {q_level} exceeds the upper bracket of the increasing branch"
        )));
    }
    let mut start_upper = (w_mu + (2.0 * gap / mu).sqrt()).min(hi_bracket);
    let alt = (q_level + mu * hi_bracket).ln();
    if alt > w_mu && alt < start_upper {
        start_upper = alt;
    }
    let w_plus = bracketed_newton(f, df, w_mu, hi_bracket, start_upper);

    let scale = ROOT_RESIDUAL_TOL * q_level.abs().max(1.0);
    for w in [w_minus, w_plus] {
        let r = f(w).abs();
        if r > scale {
            return Err(Error::Range(format!(
                "root refinement stalled at w = {w} with residual {r:e}"
            )));
        }
    }
    Ok(BranchPair {
        w_minus,
        w_plus,
        q_level,
    })
}

/// Compactness functional `Phi(x, w) = int_{ln mu}^{w} |Q~(w0(x)) - Q~(s)| ds`,
/// normalized by `Phi(x, ln mu) = 0`.
///
/// The integrand has kinks where `Q~(s) = Q~(w0)`; the interval is split there
/// and each smooth piece is integrated by adaptive Simpson.
pub fn phi_potential(w: f64, w0_node: f64, mu: f64) -> f64 {
    let w_mu = mu.ln();
    if w == w_mu {
        return 0.0;
    }
    let level = qtilde(w0_node, mu);
    let integrand = |s: f64| (level - qtilde(s, mu)).abs();
    let (a, b, sign) = if w > w_mu { (w_mu, w, 1.0) } else { (w, w_mu, -1.0) };

    let mut cuts = vec![a];
    if let Ok(pair) = branch_roots(level, mu) {
        for k in [pair.w_minus, pair.w_plus] {
            if k > a && k < b {
                cuts.push(k);
            }
        }
    }
    cuts.push(b);
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let pieces = (cuts.len() - 1) as f64;
    let total: f64 = cuts
        .windows(2)
        .map(|ab| adaptive_simpson(integrand, ab[0], ab[1], PHI_QUADRATURE_TOL / pieces))
        .sum();
    sign * total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_examples() {
        assert_eq!(q_of_v(1.0, 1.0).unwrap(), 1.0);
        let q2 = q_of_v(2.0, 1.0).unwrap();
        assert!((q2 - (2.0 - 2f64.ln())).abs() < 1e-15);
        assert!((q2 - qtilde_of_w(2f64.ln(), 1.0).unwrap()).abs() < 1e-15);
        assert!((q2 - 1.306853).abs() < 1e-6);
        assert!(q_of_v(0.0, 1.0).is_err());
        assert!(q_of_v(-1.0, 1.0).is_err());
    }

    #[test]
    fn q_minimum_at_mu() {
        for mu in [0.3, 1.0, 2.5] {
            let qmin = q_of_v(mu, mu).unwrap();
            assert!((qmin - (mu - mu * mu.ln())).abs() < 1e-14);
            for v in [0.01, 0.5 * mu, 0.99 * mu, 1.01 * mu, 3.0 * mu, 50.0] {
                assert!(q_of_v(v, mu).unwrap() >= qmin);
            }
        }
    }

    #[test]
    fn qtilde_examples() {
        assert_eq!(qtilde_of_w(0.0, 1.0).unwrap(), 1.0);
        assert!((qtilde_of_w(1.0, 1.0).unwrap() - 1.718282).abs() < 1e-6);
        let mu = 2.0f64;
        assert!((qtilde_of_w(mu.ln(), mu).unwrap() - (mu - mu * mu.ln())).abs() < 1e-14);
        assert!(qtilde_of_w(800.0, 1.0).is_err());
    }

    #[test]
    fn qtilde_prime_examples() {
        assert_eq!(qtilde_prime(0.0, 1.0), 0.0);
        assert!((qtilde_prime(2f64.ln(), 1.0) - 1.0).abs() < 1e-15);
        assert!((qtilde_prime(1.0, 1.0) - (1f64.exp() - 1.0)).abs() < 1e-15);
        let mu = 3.0f64;
        assert!(qtilde_prime(mu.ln(), mu).abs() < 1e-15);
    }

    #[test]
    fn degenerate_level_gives_double_root() {
        let pair = branch_roots(1.0, 1.0).unwrap();
        assert_eq!(pair.w_minus, 0.0);
        assert_eq!(pair.w_plus, 0.0);
        assert!(branch_roots(1.0 - 1e-9, 1.0).is_err());
        assert!(matches!(branch_roots(0.5, 1.0), Err(Error::NoRoot { .. })));
    }

    #[test]
    fn phi_potential_vanishes_at_ln_mu() {
        assert_eq!(phi_potential(0.0, 0.7, 1.0), 0.0);
        assert_eq!(phi_potential(2f64.ln(), -3.0, 2.0), 0.0);
    }
}
