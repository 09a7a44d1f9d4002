//! Weighted least-squares isotonic regression on the combination lattice.
//!
//! The fit is non-decreasing along every row and every column. With positive
//! weights it is the projection onto the intersection of the row-monotone and
//! column-monotone cones, computed by Dykstra's cyclic projection with a
//! weighted pool-adjacent-violators step for each cone. Cells with zero
//! weight are dropped and the remaining cells are fitted by repeatedly
//! pooling the lower set with the smallest weighted mean.

use crate::error::{invalid, Result};
use crate::grid::Matrix;

const MAX_SWEEPS: usize = 100_000;
const TOL: f64 = 1e-13;

/// Weighted pool-adjacent-violators on a sequence; weights must be positive.
pub fn pava(values: &[f64], weights: &[f64]) -> Vec<f64> {
    debug_assert_eq!(values.len(), weights.len());
    // (mean, weight, length) blocks
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((v, w, 1));
        while blocks.len() > 1 {
            let (m2, w2, l2) = blocks[blocks.len() - 1];
            let (m1, w1, l1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.pop();
            let w = w1 + w2;
            *blocks.last_mut().unwrap() = ((m1 * w1 + m2 * w2) / w, w, l1 + l2);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(m, _, len)| std::iter::repeat_n(m, len))
        .collect()
}

fn project_rows(x: &[f64], w: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    for r in 0..rows {
        let s = r * cols..(r + 1) * cols;
        out[s.clone()].copy_from_slice(&pava(&x[s.clone()], &w[s]));
    }
}

fn project_cols(x: &[f64], w: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    let mut v = vec![0.0; rows];
    let mut wc = vec![0.0; rows];
    for c in 0..cols {
        for r in 0..rows {
            v[r] = x[r * cols + c];
            wc[r] = w[r * cols + c];
        }
        for (r, m) in pava(&v, &wc).into_iter().enumerate() {
            out[r * cols + c] = m;
        }
    }
}

/// Every lower set of the `rows x cols` lattice, as the number of cells it
/// takes from each row (a non-increasing sequence).
pub fn lower_sets(rows: usize, cols: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, rows: usize, cap: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == rows {
            out.push(prefix.clone());
            return;
        }
        for t in (0..=cap).rev() {
            prefix.push(t);
            rec(prefix, rows, t, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(rows), rows, cols, &mut out);
    out
}

/// Isotonic fit over the cells with positive weight. Cells without weight
/// take the largest fitted value below them, floored at the smallest fitted
/// value overall.
fn fit_with_gaps(values: &[f64], w: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let sets = lower_sets(rows, cols);
    let mut fitted = vec![f64::NAN; rows * cols];
    let mut open: Vec<bool> = w.iter().map(|&x| x > 0.0).collect();
    while open.iter().any(|&o| o) {
        let mut best: Option<(f64, f64, Vec<usize>)> = None;
        for counts in &sets {
            let cells: Vec<usize> = counts
                .iter()
                .enumerate()
                .flat_map(|(r, &t)| (0..t).map(move |c| r * cols + c))
                .filter(|&k| open[k])
                .collect();
            if cells.is_empty() {
                continue;
            }
            let wt: f64 = cells.iter().map(|&k| w[k]).sum();
            let mean = cells.iter().map(|&k| w[k] * values[k]).sum::<f64>() / wt;
            let better = match &best {
                None => true,
                Some((m, _, b)) => {
                    mean < m - 1e-14 || (mean <= m + 1e-14 && cells.len() > b.len())
                }
            };
            if better {
                best = Some((mean, wt, cells));
            }
        }
        let (mean, _, cells) = best.expect("an open cell lies in some lower set");
        for k in cells {
            fitted[k] = mean;
            open[k] = false;
        }
    }
    let floor = fitted.iter().filter(|v| !v.is_nan()).fold(f64::INFINITY, |a, &b| a.min(b));
    let mut out = fitted.clone();
    for r in 0..rows {
        for c in 0..cols {
            let k = r * cols + c;
            if fitted[k].is_nan() {
                out[k] = (0..=r)
                    .flat_map(|i| (0..=c).map(move |j| i * cols + j))
                    .map(|q| fitted[q])
                    .filter(|v| !v.is_nan())
                    .fold(floor, f64::max);
            }
        }
    }
    out
}

/// Weighted isotonic fit of `values`, non-decreasing down rows and across columns.
pub fn isotonic_2d(values: &Matrix<f64>, weights: &Matrix<f64>) -> Result<Matrix<f64>> {
    let (rows, cols) = (values.rows(), values.cols());
    if weights.rows() != rows || weights.cols() != cols {
        return Err(invalid("isotonic weights must match the value matrix"));
    }
    let wmax = weights.as_slice().iter().cloned().fold(0.0, f64::max);
    if weights.as_slice().iter().any(|w| !(*w >= 0.0) || !w.is_finite()) || wmax <= 0.0 {
        return Err(invalid("isotonic weights must be non-negative with one positive"));
    }
    if values.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(invalid("isotonic values must be finite"));
    }
    let w = weights.as_slice();
    if w.contains(&0.0) {
        let mut out = Matrix::filled(rows, cols, 0.0);
        out.as_mut_slice()
            .copy_from_slice(&fit_with_gaps(values.as_slice(), w, rows, cols));
        return Ok(out);
    }

    let n = rows * cols;
    let mut x = values.as_slice().to_vec();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut u = vec![0.0; n];
    let mut buf = vec![0.0; n];

    for _ in 0..MAX_SWEEPS {
        for k in 0..n {
            buf[k] = x[k] + p[k];
        }
        project_rows(&buf, w, rows, cols, &mut u);
        for k in 0..n {
            p[k] = buf[k] - u[k];
            buf[k] = u[k] + q[k];
        }
        let prev = x.clone();
        project_cols(&buf, w, rows, cols, &mut x);
        for k in 0..n {
            q[k] = buf[k] - x[k];
        }
        let moved = x.iter().zip(&prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let gap = x.iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if moved < TOL && gap < TOL {
            break;
        }
    }
    // The column projection is exact; rows are monotone to within TOL.
    let mut out = Matrix::filled(rows, cols, 0.0);
    out.as_mut_slice().copy_from_slice(&x);
    Ok(out)
}

pub fn is_monotone(m: &Matrix<f64>, tol: f64) -> bool {
    let (rows, cols) = (m.rows(), m.cols());
    (0..rows).all(|r| {
        (0..cols).all(|c| {
            (r + 1 >= rows || *m.at(r, c) <= *m.at(r + 1, c) + tol)
                && (c + 1 >= cols || *m.at(r, c) <= *m.at(r, c + 1) + tol)
        })
    })
}
