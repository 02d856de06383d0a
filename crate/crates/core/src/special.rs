//! Scalar special functions: Gaussian pdf/cdf and the regularized
//! incomplete Beta function.
//!
//! Only what the estimators need, implemented on top of `libm` so the
//! crate stays `no_std`-friendly.

/// Standard normal density at `x`.
pub fn norm_pdf(x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * libm::exp(-0.5 * x * x)
}

/// Gaussian density with mean zero and variance `var`, evaluated at `x`.
///
/// Returns 0 for `var <= 0` unless `x == 0`, where the density is singular.
pub fn gauss_pdf(x: f64, var: f64) -> f64 {
    if var <= 0.0 {
        return if x == 0.0 { f64::INFINITY } else { 0.0 };
    }
    let s = libm::sqrt(var);
    norm_pdf(x / s) / s
}

/// Standard normal cumulative distribution function.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * core::f64::consts::FRAC_1_SQRT_2)
}

/// Natural log of the Gamma function.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Regularized incomplete Beta function `I_x(a, b)`.
///
/// Continued-fraction evaluation (Lentz's method) with the usual symmetry
/// switch at `x > (a + 1) / (a + b + 2)` for fast convergence.
pub fn betainc_reg(x: f64, a: f64, b: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0, "beta shape parameters must be positive");
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    // ln of x^a (1-x)^b / (a B(a,b))
    let ln_front =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * libm::log(x) + b * libm::log1p(-x);
    if x < (a + 1.0) / (a + b + 2.0) {
        libm::exp(ln_front) * beta_cf(x, a, b) / a
    } else {
        1.0 - libm::exp(ln_front) * beta_cf(1.0 - x, b, a) / b
    }
}

/// Continued fraction for the incomplete Beta function.
fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-15;
    const TINY: f64 = 1e-300;

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
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        // even step
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
        // odd step
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
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}
