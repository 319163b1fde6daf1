//! Special functions behind the t and F distributions.

use std::f64::consts::{PI, SQRT_2};

pub use statrs::function::gamma::ln_gamma;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

const LN_GAMMA_HALF: f64 = 0.572_364_942_924_700_1;

/// Regularized lower incomplete gamma `P(a, x)` by its power series (x < a + 1).
fn gamma_p_series(a: f64, x: f64, ln_gamma_a: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..10_000 {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * 1e-17 {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma_a).exp()
}

/// Regularized upper incomplete gamma `Q(a, x)` by continued fraction (x >= a + 1).
fn gamma_q_fraction(a: f64, x: f64, ln_gamma_a: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let i = i as f64;
        let an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma_a).exp() * h
}

/// Complementary error function for `x >= 0`, via `erfc(x) = Q(½, x²)`.
fn erfc_nonneg(x: f64) -> f64 {
    let x2 = x * x;
    if x2 < 1.5 {
        1.0 - gamma_p_series(0.5, x2, LN_GAMMA_HALF)
    } else {
        gamma_q_fraction(0.5, x2, LN_GAMMA_HALF)
    }
}

/// Standard normal CDF, relatively accurate in the lower tail.
pub fn normal_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        0.5 * erfc_nonneg(-x / SQRT_2)
    } else {
        1.0 - 0.5 * erfc_nonneg(x / SQRT_2)
    }
}

/// Standard normal quantile: rational start refined by Newton steps.
pub fn normal_quantile(p: f64) -> f64 {
    let mut z = -SQRT_2 * statrs::function::erf::erfc_inv(2.0 * p);
    for _ in 0..3 {
        let f = if p < 0.5 {
            normal_cdf(z) - p
        } else {
            (1.0 - p) - normal_cdf(-z)
        };
        let dens = normal_pdf(z);
        if dens <= 0.0 || !f.is_finite() {
            break;
        }
        z -= f / dens;
    }
    z
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Stirling remainder `lnΓ(z) - [(z-½)ln z - z + ½ln 2π]`, valid for z >= 10.
fn stirling_correction(z: f64) -> f64 {
    let z2 = z * z;
    (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - (1.0 / 1680.0 - 1.0 / (1188.0 * z2)) / z2) / z2) / z2)
        / z
}

/// `a ln x + b ln y - ln B(a, b)` with `y = 1 - x`, stable for large a and b.
fn ln_beta_prefactor(a: f64, b: f64, x: f64, y: f64) -> f64 {
    if a >= 10.0 && b >= 10.0 {
        let s = a + b;
        let u = x - a / s;
        let t1 = a * (u * s / a).ln_1p();
        let t2 = b * (-u * s / b).ln_1p();
        t1 + t2 + 0.5 * (a * b / s).ln() - LN_SQRT_2PI + stirling_correction(s)
            - stirling_correction(a)
            - stirling_correction(b)
    } else {
        a * x.ln() + b * y.ln() + ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b)
    }
}

/// Modified Lentz evaluation of the incomplete beta continued fraction.
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    let max_iter = 200 + 20 * (a.max(b).sqrt() as usize);
    for m in 1..=max_iter {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() <= EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`; `y` must equal `1 - x` and is
/// passed separately so callers can avoid cancellation near `x = 1`.
pub fn incomplete_beta(a: f64, b: f64, x: f64, y: f64) -> f64 {
    debug_assert!(a > 0.0 && b > 0.0);
    if x <= 0.0 {
        return 0.0;
    }
    if y <= 0.0 {
        return 1.0;
    }
    if x < (a + 1.0) / (a + b + 2.0) {
        let front = ln_beta_prefactor(a, b, x, y).exp();
        front * beta_continued_fraction(a, b, x) / a
    } else {
        let front = ln_beta_prefactor(b, a, y, x).exp();
        1.0 - front * beta_continued_fraction(b, a, y) / b
    }
}

/// Upper tail `1 - I_x(a, b)` computed without cancellation.
pub fn incomplete_beta_complement(a: f64, b: f64, x: f64, y: f64) -> f64 {
    incomplete_beta(b, a, y, x)
}
