//! Small numerical kernels shared by the solvers and the analysis passes.

/// Solve a tridiagonal system with the Thomas algorithm.
///
/// `lower[0]` and `upper[n-1]` are ignored. The matrices built in this crate
/// are diagonally dominant, so no pivoting is done.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    debug_assert!(lower.len() == n && diag.len() == n && upper.len() == n);
    if n == 0 {
        return Vec::new();
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let den = diag[i] - lower[i] * c[i - 1];
        if i + 1 < n {
            c[i] = upper[i] / den;
        }
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / den;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

/// Banded matrix with `kl` sub-diagonals and `ku` super-diagonals, solved by
/// Gaussian elimination with partial pivoting.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    // row-major band storage, width kl + ku + 1 + kl (room for pivot fill-in)
    data: Vec<f64>,
    width: usize,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            data: vec![0.0; n * width],
            width,
        }
    }

    fn offset(&self, row: usize, col: usize) -> Option<usize> {
        // column index relative to row - kl
        let shift = col as isize - row as isize + self.kl as isize;
        if shift < 0 || shift as usize >= self.width {
            None
        } else {
            Some(row * self.width + shift as usize)
        }
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        let off = self
            .offset(row, col)
            .unwrap_or_else(|| panic!("entry ({row}, {col}) outside band"));
        self.data[off] = value;
    }

    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        let off = self
            .offset(row, col)
            .unwrap_or_else(|| panic!("entry ({row}, {col}) outside band"));
        self.data[off] += value;
    }

    fn get(&self, row: usize, col: usize) -> f64 {
        self.offset(row, col).map_or(0.0, |o| self.data[o])
    }

    /// Solve `A x = b`, consuming the matrix. Returns `None` for a singular pivot.
    pub fn solve(mut self, rhs: &[f64]) -> Option<Vec<f64>> {
        let n = self.n;
        let mut b = rhs.to_vec();
        // upper bandwidth grows to kl + ku with row interchanges
        let ku_eff = self.kl + self.ku;
        for k in 0..n {
            let last_row = (k + self.kl).min(n - 1);
            let mut piv = k;
            let mut best = self.get(k, k).abs();
            for r in k + 1..=last_row {
                let v = self.get(r, k).abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return None;
            }
            let last_col = (k + ku_eff).min(n - 1);
            if piv != k {
                for c in k..=last_col {
                    let a = self.get(k, c);
                    let p = self.get(piv, c);
                    if let Some(o) = self.offset(k, c) {
                        self.data[o] = p;
                    }
                    if let Some(o) = self.offset(piv, c) {
                        self.data[o] = a;
                    }
                }
                b.swap(k, piv);
            }
            let pivot = self.get(k, k);
            for r in k + 1..=last_row {
                let factor = self.get(r, k) / pivot;
                if factor == 0.0 {
                    continue;
                }
                for c in k..=last_col {
                    let v = self.get(k, c);
                    if v != 0.0 {
                        if let Some(o) = self.offset(r, c) {
                            self.data[o] -= factor * v;
                        }
                    }
                }
                b[r] -= factor * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let last_col = (k + ku_eff).min(n - 1);
            let mut s = b[k];
            for c in k + 1..=last_col {
                s -= self.get(k, c) * x[c];
            }
            x[k] = s / self.get(k, k);
        }
        Some(x)
    }
}

/// Composite trapezoid rule on a uniform grid.
pub fn trapezoid_uniform(values: &[f64], dx: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let inner: f64 = values[1..n - 1].iter().sum();
            dx * (inner + 0.5 * (values[0] + values[n - 1]))
        }
    }
}

/// Composite trapezoid rule on arbitrary abscissae.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// Running trapezoid integral, starting at zero.
pub fn cumulative_trapezoid(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(xs.len());
    let mut acc = 0.0;
    if !xs.is_empty() {
        out.push(0.0);
    }
    for (x, y) in xs.windows(2).zip(ys.windows(2)) {
        acc += 0.5 * (x[1] - x[0]) * (y[0] + y[1]);
        out.push(acc);
    }
    out
}

fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Least-squares line `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute deviation of the data from the fitted line.
    pub max_residual: f64,
    /// Root-mean-square deviation.
    pub rms_residual: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let mut max_residual = 0.0f64;
    let mut ss = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let r = y - (intercept + slope * x);
        max_residual = max_residual.max(r.abs());
        ss += r * r;
    }
    Some(LineFit {
        slope,
        intercept,
        max_residual,
        rms_residual: (ss / nf).sqrt(),
    })
}

/// Centered first derivative; second-order one-sided stencils at the ends.
pub fn first_derivative(values: &[f64], dx: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    if n == 2 {
        let d = (values[1] - values[0]) / dx;
        return vec![d, d];
    }
    for i in 1..n - 1 {
        out[i] = (values[i + 1] - values[i - 1]) / (2.0 * dx);
    }
    out[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * dx);
    out[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * dx);
    out
}

/// Centered second derivative; second-order one-sided stencils at the ends
/// (first-order when only three nodes exist).
pub fn second_derivative(values: &[f64], dx: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    if n < 3 {
        return out;
    }
    let h2 = dx * dx;
    for i in 1..n - 1 {
        out[i] = (values[i - 1] - 2.0 * values[i] + values[i + 1]) / h2;
    }
    if n >= 4 {
        out[0] = (2.0 * values[0] - 5.0 * values[1] + 4.0 * values[2] - values[3]) / h2;
        out[n - 1] = (2.0 * values[n - 1] - 5.0 * values[n - 2] + 4.0 * values[n - 3] - values[n - 4]) / h2;
    } else {
        out[0] = out[1];
        out[2] = out[1];
    }
    out
}

/// Logarithmic mean `(a - b) / (ln a - ln b)`, i.e. the exact time average
/// of a positive quantity whose logarithm is linear in time.
pub fn log_mean(a: f64, b: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        return 0.5 * (a + b);
    }
    let r = b / a;
    if (r - 1.0).abs() < 1e-6 {
        // series around r = 1
        let d = r - 1.0;
        a * (1.0 + d / 2.0 - d * d / 12.0)
    } else {
        (b - a) / r.ln()
    }
}

/// Spread of a family of fitted constants: `max|c| / min|c|`.
///
/// Returns 1 when every constant vanishes and infinity when the family
/// changes sign or mixes zero with non-zero entries.
pub fn uniformity_ratio(constants: &[f64]) -> f64 {
    if constants.is_empty() {
        return 1.0;
    }
    let all_zero = constants.iter().all(|c| *c == 0.0);
    if all_zero {
        return 1.0;
    }
    let pos = constants.iter().all(|c| *c > 0.0);
    let neg = constants.iter().all(|c| *c < 0.0);
    if !(pos || neg) {
        return f64::INFINITY;
    }
    let max = constants.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let min = constants.iter().fold(f64::INFINITY, |m, c| m.min(c.abs()));
    max / min
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thomas_solves_laplacian() {
        let lower = vec![0.0, -1.0, -1.0, -1.0];
        let diag = vec![2.0; 4];
        let upper = vec![-1.0, -1.0, -1.0, 0.0];
        let rhs = vec![1.0, 0.0, 0.0, 1.0];
        let x = solve_tridiagonal(&lower, &diag, &upper, &rhs);
        for v in x {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn banded_matches_dense_elimination() {
        // pentadiagonal with a zero leading diagonal entry forces a pivot
        let n = 6;
        let mut m = BandedMatrix::zeros(n, 2, 2);
        let mut dense = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i.saturating_sub(2)..(i + 3).min(n) {
                let v = if i == 0 && j == 0 {
                    0.0
                } else {
                    1.0 + (i * 7 + j * 3) as f64 % 5.0
                };
                m.set(i, j, v);
                dense[i][j] = v;
            }
        }
        let rhs: Vec<f64> = (0..n).map(|i| i as f64 - 2.0).collect();
        let x = m.solve(&rhs).expect("non-singular");
        for i in 0..n {
            let ax: f64 = (0..n).map(|j| dense[i][j] * x[j]).sum();
            assert!((ax - rhs[i]).abs() < 1e-10, "row {i}: {ax} vs {}", rhs[i]);
        }
    }

    #[test]
    fn simpson_integrates_exponential() {
        let v = adaptive_simpson(f64::exp, 0.0, 1.0, 1e-12);
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-11);
    }

    #[test]
    fn line_fit_recovers_slope() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 1.0).collect();
        let fit = fit_line(&xs, &ys).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-14);
        assert!(fit.max_residual < 1e-14);
    }

    #[test]
    fn log_mean_is_symmetric_and_bounded() {
        let m = log_mean(1.0, 4.0);
        assert!((m - 3.0 / 4f64.ln()).abs() < 1e-14);
        assert!((log_mean(4.0, 1.0) - m).abs() < 1e-14);
        assert!((log_mean(2.0, 2.0) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn uniformity_handles_signs() {
        assert_eq!(uniformity_ratio(&[0.0, 0.0]), 1.0);
        assert!(uniformity_ratio(&[1.0, -1.0]).is_infinite());
        assert!((uniformity_ratio(&[-2.0, -1.0]) - 2.0).abs() < 1e-15);
    }
}
