//! Independent reference computations for the integration tests. Nothing
//! here calls into the numerical kernels it is used to check.

#![allow(dead_code)]

use combodose::Matrix;

/// Every 0/1 matrix of the given shape that is non-decreasing down rows and
/// across columns, found by filtering all `2^(rows*cols)` candidates.
pub fn monotone_masks(rows: usize, cols: usize) -> Vec<Vec<bool>> {
    let cells = rows * cols;
    let mut out = Vec::new();
    for bits in 0u32..(1 << cells) {
        let m: Vec<bool> = (0..cells).map(|k| bits >> k & 1 == 1).collect();
        let ok = (0..rows).all(|r| {
            (0..cols).all(|c| {
                let v = m[r * cols + c];
                let down = r + 1 >= rows || !v || m[(r + 1) * cols + c];
                let right = c + 1 >= cols || !v || m[r * cols + c + 1];
                down && right
            })
        });
        if ok {
            out.push(m);
        }
    }
    out
}

/// Weighted isotonic regression by the max-min formula: the fit at `x` is
/// the max over upper sets `U` containing `x` of the min over lower sets `L`
/// containing `x` of the weighted mean on `U` and `L`. Cells with zero weight
/// are returned as NaN.
pub fn isotonic_max_min(values: &[f64], weights: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let uppers = monotone_masks(rows, cols);
    let lowers: Vec<Vec<bool>> = uppers.iter().map(|m| m.iter().map(|b| !b).collect()).collect();
    let avg = |u: &[bool], l: &[bool]| -> Option<f64> {
        let (mut sw, mut swv) = (0.0, 0.0);
        for k in 0..values.len() {
            if u[k] && l[k] {
                sw += weights[k];
                swv += weights[k] * values[k];
            }
        }
        (sw > 0.0).then(|| swv / sw)
    };
    (0..values.len())
        .map(|x| {
            if weights[x] == 0.0 {
                return f64::NAN;
            }
            uppers
                .iter()
                .filter(|u| u[x])
                .map(|u| {
                    lowers
                        .iter()
                        .filter(|l| l[x])
                        .filter_map(|l| avg(u, l))
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

pub fn weighted_sse(fit: &[f64], values: &[f64], weights: &[f64]) -> f64 {
    fit.iter()
        .zip(values)
        .zip(weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|((f, v), w)| w * (f - v).powi(2))
        .sum()
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
        return left + right + (left + right - whole) / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature on `[a, b]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Beta cdf by direct quadrature of the density; both shapes must be >= 1
/// so the integrand is bounded.
pub fn beta_cdf_quadrature(x: f64, a: f64, b: f64) -> f64 {
    assert!(a >= 1.0 && b >= 1.0);
    let mode = if a + b > 2.0 { (a - 1.0) / (a + b - 2.0) } else { 0.5 };
    let peak = mode.powf(a - 1.0) * (1.0 - mode).powf(b - 1.0);
    let dens = |t: f64| t.powf(a - 1.0) * (1.0 - t).powf(b - 1.0) / peak;
    let total = integrate(&dens, 0.0, 1.0, 1e-14);
    integrate(&dens, 0.0, x, 1e-14) / total
}

/// Gauss-Legendre nodes and weights on `[0, 1]` by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (x + 1.0), 0.5 * w));
    }
    out
}

/// Toxicity of `(i, j)` (1-based) from the base probability and ratios.
pub fn ratio_surface(theta: f64, rows: &[f64], cols: &[f64], i: usize, j: usize) -> f64 {
    let mut q = theta;
    for r in &rows[..i - 1] {
        q *= r;
    }
    for c in &cols[..j - 1] {
        q *= c;
    }
    1.0 - q
}

/// Posterior means and P(pi > target) on a 2x2 grid under the ratio model,
/// by tensor Gauss-Legendre quadrature over `(theta, theta_2, tau_2)`.
/// Each ratio is integrated after `r = 1 - u^2`, which removes the
/// `(1-r)^(b-1)` singularity of Beta priors with `b < 1`. The innermost
/// integral over `theta` is split where each cell crosses the target so the
/// exceedance indicator is integrated exactly.
pub fn ratio_posterior_2x2(
    n: [[u32; 2]; 2],
    y: [[u32; 2]; 2],
    a: f64,
    b: f64,
    target: f64,
    nodes: usize,
) -> ([[f64; 2]; 2], [[f64; 2]; 2]) {
    let gl = gauss_legendre(nodes);
    let prior = |u: f64| (1.0 - u * u).powf(a - 1.0) * u.powf(2.0 * (b - 1.0)) * 2.0 * u;
    let mut z = 0.0;
    let mut mean = [[0.0; 2]; 2];
    let mut exceed = [[0.0; 2]; 2];
    for &(u1, w1) in &gl {
        let t1 = 1.0 - u1 * u1;
        for &(u2, w2) in &gl {
            let t2 = 1.0 - u2 * u2;
            let outer = w1 * w2 * prior(u1) * prior(u2);
            // integrand in u0 and the toxicity surface at that point
            let point = |u0: f64| {
                let t0 = 1.0 - u0 * u0;
                let mut w = outer * prior(u0);
                let mut pis = [[0.0; 2]; 2];
                for i in 0..2 {
                    for j in 0..2 {
                        let pi = ratio_surface(t0, &[t1], &[t2], i + 1, j + 1);
                        pis[i][j] = pi;
                        let (nn, yy) = (n[i][j] as i32, y[i][j] as i32);
                        w *= pi.powi(yy) * (1.0 - pi).powi(nn - yy);
                    }
                }
                (w, pis)
            };
            let on = |lo: f64, hi: f64| gl.iter().map(move |&(x, w)| (lo + (hi - lo) * x, (hi - lo) * w));
            for (u0, w0) in on(0.0, 1.0) {
                let (w, pis) = point(u0);
                z += w0 * w;
                for i in 0..2 {
                    for j in 0..2 {
                        mean[i][j] += w0 * w * pis[i][j];
                    }
                }
            }
            for i in 0..2 {
                for j in 0..2 {
                    let rest = ratio_surface(1.0, &[t1], &[t2], i + 1, j + 1);
                    let bound = (1.0 - target) / (1.0 - rest);
                    let lo = (1.0 - bound).max(0.0).sqrt();
                    for (u0, w0) in on(lo, 1.0) {
                        exceed[i][j] += w0 * point(u0).0;
                    }
                }
            }
        }
    }
    for i in 0..2 {
        for j in 0..2 {
            mean[i][j] /= z;
            exceed[i][j] /= z;
        }
    }
    (mean, exceed)
}

/// Two-agent logistic toxicity written out from the single-agent curves:
/// combine the no-toxicity probabilities, then shift the log-odds by the
/// interaction term.
pub fn logistic_pair(log_alpha: [f64; 2], log_beta: [f64; 2], eta: f64, da: f64, db: f64) -> f64 {
    let single = |la: f64, lb: f64, d: f64| {
        let odds = la.exp() * d.powf(lb.exp());
        odds / (1.0 + odds)
    };
    let pa = single(log_alpha[0], log_beta[0], da);
    let pb = single(log_alpha[1], log_beta[1], db);
    let p0 = pa + pb - pa * pb;
    let odds = p0 / (1.0 - p0) * (eta * da * db).exp();
    odds / (1.0 + odds)
}

/// Posterior mean toxicity at every dose pair when only `log_alpha_a` and
/// `log_beta_a` are uncertain (independent normal priors), by a tensor
/// trapezoid rule over +-8 prior sds.
pub fn logistic_posterior_2param(
    prior_mean: [f64; 5],
    prior_sd: [f64; 2],
    doses: &[(f64, f64, u32, u32)],
    eval: &[(f64, f64)],
    nodes: usize,
) -> Vec<f64> {
    let mut z = 0.0;
    let mut acc = vec![0.0; eval.len()];
    let span = 8.0;
    let h0 = 2.0 * span * prior_sd[0] / (nodes - 1) as f64;
    let h1 = 2.0 * span * prior_sd[1] / (nodes - 1) as f64;
    for i in 0..nodes {
        let la = prior_mean[0] - span * prior_sd[0] + i as f64 * h0;
        for j in 0..nodes {
            let lb = prior_mean[2] - span * prior_sd[1] + j as f64 * h1;
            let mut logw = -0.5 * ((la - prior_mean[0]) / prior_sd[0]).powi(2)
                - 0.5 * ((lb - prior_mean[2]) / prior_sd[1]).powi(2);
            for &(da, db, n, y) in doses {
                let p = logistic_pair([la, prior_mean[1]], [lb, prior_mean[3]], prior_mean[4], da, db);
                logw += y as f64 * p.ln() + (n - y) as f64 * (1.0 - p).ln();
            }
            let edge = |k: usize| if k == 0 || k == nodes - 1 { 0.5 } else { 1.0 };
            let w = logw.exp() * edge(i) * edge(j);
            z += w;
            for (k, &(da, db)) in eval.iter().enumerate() {
                acc[k] += w
                    * logistic_pair([la, prior_mean[1]], [lb, prior_mean[3]], prior_mean[4], da, db);
            }
        }
    }
    acc.iter().map(|a| a / z).collect()
}

pub fn matrix(rows: Vec<Vec<f64>>) -> Matrix<f64> {
    Matrix::from_rows(rows).unwrap()
}
