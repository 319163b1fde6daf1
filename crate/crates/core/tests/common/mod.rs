//! Independent reference implementations shared by the integration tests.
//! None of these call into the library's linear algebra or special functions.

#![allow(dead_code, clippy::needless_range_loop)]

use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for c in col..n {
                a[row][c] -= f * a[col][c];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| a[row][c] * x[c]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Ordinary least squares through the normal equations.
pub fn ols(rows: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = rows[0].len();
    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for (r, &yi) in rows.iter().zip(y) {
        for a in 0..p {
            xty[a] += r[a] * yi;
            for b in 0..p {
                xtx[a][b] += r[a] * r[b];
            }
        }
    }
    gauss_solve(xtx, xty)
}

/// Slopes of the within-group (demeaned) regression without intercept.
pub fn within_slopes(x: &[Vec<f64>], y: &[f64], groups: &[usize]) -> Vec<f64> {
    let g = groups.iter().max().unwrap() + 1;
    let k = x[0].len();
    let mut count = vec![0.0; g];
    let mut ym = vec![0.0; g];
    let mut xm = vec![vec![0.0; k]; g];
    for ((xi, &yi), &gi) in x.iter().zip(y).zip(groups) {
        count[gi] += 1.0;
        ym[gi] += yi;
        for j in 0..k {
            xm[gi][j] += xi[j];
        }
    }
    for gi in 0..g {
        ym[gi] /= count[gi];
        for j in 0..k {
            xm[gi][j] /= count[gi];
        }
    }
    let xd: Vec<Vec<f64>> = x
        .iter()
        .zip(groups)
        .map(|(xi, &gi)| (0..k).map(|j| xi[j] - xm[gi][j]).collect())
        .collect();
    let yd: Vec<f64> = y.iter().zip(groups).map(|(v, &gi)| v - ym[gi]).collect();
    ols(&xd, &yd)
}

/// Covariance of two columns by the textbook double loop over pairs:
/// `Σ_i Σ_j (a_i − a_j)(b_i − b_j) / (2 n (n − 1))`.
pub fn pairwise_covariance(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += (a[i] - a[j]) * (b[i] - b[j]);
        }
    }
    s / (2.0 * n as f64 * (n - 1) as f64)
}

fn phi(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// `P(T' ≤ x)` for the non-central t by integrating
/// `Φ(x s − δ)` against the density of `s = sqrt(V/ν)`, `V ~ χ²_ν`,
/// with composite Simpson.
pub fn noncentral_t_cdf_quadrature(x: f64, df: f64, ncp: f64) -> f64 {
    let ln_norm = 0.5 * df * df.ln() - (0.5 * df - 1.0) * std::f64::consts::LN_2 - ln_gamma(0.5 * df);
    let density = |s: f64| {
        if s <= 0.0 {
            return 0.0;
        }
        (ln_norm + (df - 1.0) * s.ln() - 0.5 * df * s * s).exp()
    };
    let sd = (1.0 / (2.0 * df)).sqrt();
    let lo = (1.0 - 40.0 * sd).max(0.0);
    let hi = 1.0 + 40.0 * sd.max(0.25);
    let m = 40_000;
    let h = (hi - lo) / m as f64;
    let f = |s: f64| density(s) * phi(x * s - ncp);
    let mut acc = f(lo) + f(hi);
    for i in 1..m {
        let s = lo + h * i as f64;
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(s);
    }
    acc * h / 3.0
}

/// Between/within mean-square ratio computed from scratch in two passes.
pub fn two_pass_f(values: &[f64], groups: &[usize]) -> f64 {
    let g = groups.iter().max().unwrap() + 1;
    let mut sums = vec![0.0; g];
    let mut counts = vec![0usize; g];
    for (&v, &gi) in values.iter().zip(groups) {
        sums[gi] += v;
        counts[gi] += 1;
    }
    let used = counts.iter().filter(|&&c| c > 0).count();
    let grand = values.iter().sum::<f64>() / values.len() as f64;
    let mut ssw = 0.0;
    for (&v, &gi) in values.iter().zip(groups) {
        ssw += (v - sums[gi] / counts[gi] as f64).powi(2);
    }
    let mut ssb = 0.0;
    for gi in 0..g {
        if counts[gi] > 0 {
            ssb += counts[gi] as f64 * (sums[gi] / counts[gi] as f64 - grand).powi(2);
        }
    }
    (ssb / (used - 1) as f64) / (ssw / (values.len() - used) as f64)
}

/// Two-sided Kolmogorov–Smirnov test of `sample` against U(0, 1).
pub fn ks_uniform_p(sample: &[f64]) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let d = s
        .iter()
        .enumerate()
        .map(|(i, &u)| ((i + 1) as f64 / n - u).max(u - i as f64 / n))
        .fold(0.0, f64::max);
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
        p += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}
