//! Elementary functions with removable singularities, evaluated by switching
//! to truncated Taylor series near the origin.

use std::f64::consts::PI;

use twofloat::TwoFloat;

/// Below this |x| the `sin x / x` family is evaluated by series.
pub const SINC_SERIES_THRESHOLD: f64 = 1e-4;

/// Below this |x| the `cosec^2 x - 1/x^2` family is evaluated by series.
pub const POTENTIAL_SERIES_THRESHOLD: f64 = 1e-3;

/// `sin x / x`.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < SINC_SERIES_THRESHOLD {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// `sinh x / x`.
pub fn sinhc(x: f64) -> f64 {
    if x.abs() < SINC_SERIES_THRESHOLD {
        let x2 = x * x;
        1.0 + x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sinh() / x
    }
}

/// `cosec^2 x - 1/x^2`, finite at 0 with limit 1/3.
pub fn cosec2_minus_inv_sq(x: f64) -> f64 {
    if x.abs() < POTENTIAL_SERIES_THRESHOLD {
        cosec2_series(x)
    } else {
        cosec2_generic(x)
    }
}

/// `csch^2 x - 1/x^2`, finite at 0 with limit -1/3.
pub fn csch2_minus_inv_sq(x: f64) -> f64 {
    if x.abs() < POTENTIAL_SERIES_THRESHOLD {
        csch2_series(x)
    } else {
        csch2_generic(x)
    }
}

/// `x - sin x` (sign = -1) or `sinh x - x` (sign = +1) without cancellation.
fn odd_remainder(x: f64, sign: f64) -> f64 {
    if x.abs() >= 1.0 {
        return if sign > 0.0 { x.sinh() - x } else { x - x.sin() };
    }
    let x2 = x * x;
    let mut term = x * x2 / 6.0;
    let mut sum = term;
    let mut k = 3.0;
    while term.abs() > 1e-18 * sum.abs() {
        term *= sign * x2 / ((k + 1.0) * (k + 2.0));
        sum += term;
        k += 2.0;
    }
    sum
}

/// `(x - sin x)(x + sin x) / (x sin x)^2`.
pub(crate) fn cosec2_generic(x: f64) -> f64 {
    let s = x.sin();
    odd_remainder(x, -1.0) * (x + s) / (x * s).powi(2)
}

/// `(x - sinh x)(x + sinh x) / (x sinh x)^2`.
pub(crate) fn csch2_generic(x: f64) -> f64 {
    let s = x.sinh();
    -odd_remainder(x, 1.0) * (x + s) / (x * s).powi(2)
}

pub(crate) fn cosec2_series(x: f64) -> f64 {
    let x2 = x * x;
    1.0 / 3.0 + x2 / 15.0 + 2.0 * x2 * x2 / 189.0 + x2 * x2 * x2 / 675.0
}

pub(crate) fn csch2_series(x: f64) -> f64 {
    let x2 = x * x;
    -1.0 / 3.0 + x2 / 15.0 - 2.0 * x2 * x2 / 189.0 + x2 * x2 * x2 / 675.0
}

/// `sin((m+1) x) / sin x`, the character of the (m+1)-dimensional SU(2)
/// representation, continuous through x = 0 and x = pi.
pub fn chebyshev_u(m: usize, x: f64) -> f64 {
    let s = x.sin();
    if s.abs() > 1e-6 {
        return ((m as f64 + 1.0) * x).sin() / s;
    }
    // U_m(cos x) by recurrence is exact at the endpoints.
    let c = x.cos();
    let (mut u0, mut u1) = (1.0, 2.0 * c);
    if m == 0 {
        return u0;
    }
    for _ in 1..m {
        let u2 = 2.0 * c * u1 - u0;
        u0 = u1;
        u1 = u2;
    }
    u1
}

/// Legendre polynomials `P_0(x) .. P_lmax(x)` by the three-term recurrence.
pub fn legendre_table(lmax: usize, x: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(lmax + 1);
    p.push(1.0);
    if lmax == 0 {
        return p;
    }
    p.push(x);
    for l in 1..lmax {
        let lf = l as f64;
        let next = ((2.0 * lf + 1.0) * x * p[l] - lf * p[l - 1]) / (lf + 1.0);
        p.push(next);
    }
    p
}

/// Flat heat kernel on R^n under the generator 1/2 Laplacian.
pub fn flat_heat_kernel(n: usize, r: f64, t: f64) -> f64 {
    (2.0 * PI * t).powf(-(n as f64) / 2.0) * (-r * r / (2.0 * t)).exp()
}

/// Surface area of the unit sphere S^{n-1} in R^n.
pub fn unit_sphere_area(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => 2.0 * PI,
        _ => 2.0 * PI / (n as f64 - 2.0) * unit_sphere_area(n - 2),
    }
}

/// `cos x` in double-double precision for |x| <= 4, by Taylor series.
pub fn dd_cos(x: f64) -> TwoFloat {
    debug_assert!(x.abs() <= 4.0);
    let x2 = TwoFloat::from(x) * TwoFloat::from(x);
    let mut term = TwoFloat::from(1.0);
    let mut sum = term;
    let mut k = 0.0;
    while term.hi().abs() > 1e-34 {
        term = -term * x2 / ((k + 1.0) * (k + 2.0));
        sum += term;
        k += 2.0;
    }
    sum
}

/// `exp x` in double-double precision, by Taylor series after halving.
pub fn dd_exp(x: f64) -> TwoFloat {
    let mut halvings = 0;
    let mut y = TwoFloat::from(x);
    while y.hi().abs() > 0.125 {
        y /= 2.0;
        halvings += 1;
    }
    let mut term = TwoFloat::from(1.0);
    let mut sum = term;
    let mut k = 1.0;
    while term.hi().abs() > 1e-34 * sum.hi().abs() {
        term = term * y / k;
        sum += term;
        k += 1.0;
    }
    for _ in 0..halvings {
        sum = sum * sum;
    }
    sum
}
