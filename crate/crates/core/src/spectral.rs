//! Reference heat kernels from eigenfunction expansions (S^1, S^2, S^3) and
//! the closed form on complex-type spaces (H^3), plus the spherical
//! functions and spherical transform of the latter.
//!
//! Kernels are densities against the Riemannian volume and follow the
//! generator 1/2 Laplacian, so eigenvalue `-lambda` contributes
//! `exp(-lambda t / 2)`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::quad::GaussLegendre;
use crate::radial::{MeasureWeight, RadialFunction};
use crate::roots::{Curvature, SpaceKind, SpaceSpec};
use crate::special::{chebyshev_u, dd_cos, dd_exp, flat_heat_kernel, sinc, sinhc, unit_sphere_area};

/// Hard cap on the number of spectral terms.
pub const MAX_SPECTRAL_TERMS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralTruncation {
    /// Index of the last term included.
    pub max_index: usize,
    /// Bound on the omitted tail.
    pub tail_bound: f64,
}

/// Normalization of the S^3 expansion, fixed by unit mass of the m = 0 term.
fn s3_constant() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| {
        let gl = GaussLegendre::new(32);
        let volume = gl.integrate(0.0, PI, |th| 4.0 * PI * th.sin().powi(2));
        1.0 / volume
    })
}

/// Sums `term(k)` for k = 0, 1, ... with `bound(k) >= |term(k)|`, stopping
/// once the bound drops below `tol / 100` and the geometric tail estimate
/// is below `tol`.
fn truncated_sum<T, B>(tol: f64, mut term: T, bound: B) -> Result<(f64, SpectralTruncation)>
where
    T: FnMut(usize) -> f64,
    B: Fn(usize) -> f64,
{
    let mut sum = 0.0;
    let mut comp = 0.0;
    for k in 0..MAX_SPECTRAL_TERMS {
        // Neumaier summation
        let x = term(k);
        let s = sum + x;
        comp += if sum.abs() >= x.abs() { (sum - s) + x } else { (x - s) + sum };
        sum = s;

        let next = bound(k + 1);
        if next < tol * 1e-2 {
            let ratio = bound(k + 2) / next;
            if ratio < 1.0 {
                let tail_bound = next / (1.0 - ratio);
                if tail_bound < tol {
                    return Ok((sum + comp, SpectralTruncation { max_index: k, tail_bound }));
                }
            }
        }
    }
    Err(Error::Resolution(format!(
        "spectral sum did not reach tolerance {tol:e} within {MAX_SPECTRAL_TERMS} terms"
    )))
}

fn check_args(theta: f64, t: f64, tol: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    if !(0.0..=PI).contains(&theta) {
        return Err(Error::Domain(format!("theta must lie in [0, pi], got {theta}")));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
    }
    Ok(())
}

/// Heat kernel on the unit sphere S^n, n in {1, 2, 3}, at geodesic distance
/// theta.
pub fn heat_kernel_sphere(n: usize, theta: f64, t: f64, tol: f64) -> Result<(f64, SpectralTruncation)> {
    check_args(theta, t, tol)?;
    match n {
        1 => circle_kernel(theta, t, tol),
        2 => {
            let x = theta.cos();
            // P_l by forward recurrence, evaluated lazily in order
            let (mut p_prev, mut p_cur) = (0.0, 1.0);
            truncated_sum(
                tol,
                |l| {
                    if l == 1 {
                        p_prev = 1.0;
                        p_cur = x;
                    } else if l > 1 {
                        let lf = (l - 1) as f64;
                        let next = ((2.0 * lf + 1.0) * x * p_cur - lf * p_prev) / (lf + 1.0);
                        p_prev = p_cur;
                        p_cur = next;
                    }
                    let lf = l as f64;
                    (2.0 * lf + 1.0) / (4.0 * PI) * (-lf * (lf + 1.0) * t / 2.0).exp() * p_cur
                },
                |l| {
                    let lf = l as f64;
                    (2.0 * lf + 1.0) / (4.0 * PI) * (-lf * (lf + 1.0) * t / 2.0).exp()
                },
            )
        }
        3 => {
            let c = s3_constant();
            truncated_sum(
                tol,
                |m| {
                    let d = m as f64 + 1.0;
                    d * c * (-(d * d - 1.0) * t / 2.0).exp() * chebyshev_u(m, theta)
                },
                |m| {
                    let d = m as f64 + 1.0;
                    d * d * c * (-(d * d - 1.0) * t / 2.0).exp()
                },
            )
        }
        _ => Err(Error::UnsupportedSpace(format!(
            "spectral sphere kernel is implemented for n in {{1, 2, 3}}, got {n}"
        ))),
    }
}

/// `(1/2 pi)(1 + 2 sum_k q^{k^2} cos k theta)` with `q = exp(-t/2)`, summed
/// in double-double arithmetic: near theta = pi the kernel is many orders
/// of magnitude below the individual terms.
fn circle_kernel(theta: f64, t: f64, tol: f64) -> Result<(f64, SpectralTruncation)> {
    let c = 1.0 / (2.0 * PI);
    let bound = |k: usize| {
        let kf = k as f64;
        2.0 * c * (-kf * kf * t / 2.0).exp()
    };
    let cos1 = dd_cos(theta);
    let q = dd_exp(-t / 2.0);
    let q2 = q * q;
    // weight = q^{k^2}, step = q^{2k+1}
    let mut weight = q;
    let mut step = q * q2;
    let (mut cos_prev, mut cos_k) = (TwoFloat::from(1.0), cos1);
    let mut sum = TwoFloat::from(0.5) + weight * cos_k;
    for k in 1..MAX_SPECTRAL_TERMS {
        let next = bound(k + 1);
        if next < tol * 1e-2 {
            let ratio = bound(k + 2) / next;
            let tail_bound = next / (1.0 - ratio);
            if ratio < 1.0 && tail_bound < tol {
                let value = sum * (2.0 * c);
                return Ok((value.hi() + value.lo(), SpectralTruncation { max_index: k, tail_bound }));
            }
        }
        let cos_next = cos1 * cos_k * 2.0 - cos_prev;
        cos_prev = cos_k;
        cos_k = cos_next;
        weight *= step;
        step *= q2;
        sum += weight * cos_k;
    }
    Err(Error::Resolution(format!(
        "spectral sum did not reach tolerance {tol:e} within {MAX_SPECTRAL_TERMS} terms"
    )))
}

/// Spectral kernel for any supported compact space (S^1, S^2, S^3, SU(2)).
pub fn heat_kernel_compact(space: &SpaceSpec, theta: f64, t: f64, tol: f64) -> Result<(f64, SpectralTruncation)> {
    match space.kind {
        SpaceKind::Sphere | SpaceKind::Circle | SpaceKind::CompactGroupSu2 => {
            heat_kernel_sphere(space.dim, theta, t, tol)
        }
        _ => Err(Error::UnsupportedSpace(format!(
            "no spectral expansion for {}",
            space.name
        ))),
    }
}

pub(crate) fn is_complex_type(space: &SpaceSpec) -> bool {
    space.curvature == Curvature::Negative
        && space.is_rank_one()
        && matches!(space.kind, SpaceKind::ComplexGroupRank1 | SpaceKind::Hyperbolic)
        && space.is_group_type()
}

/// `q_t(r) = (2 pi t)^{-n/2} exp(-|rho|^2 t / 2) exp(-r^2 / 2t) / j(r)` on
/// H^3 and the complex-group presets.
pub fn heat_kernel_complex_group(space: &SpaceSpec, r: f64, t: f64) -> Result<f64> {
    if !is_complex_type(space) {
        return Err(Error::UnsupportedSpace(format!(
            "{} is not a rank-one complex-type space",
            space.name
        )));
    }
    if !(t > 0.0) {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    if r < 0.0 {
        return Err(Error::Domain(format!("r must be non-negative, got {r}")));
    }
    let j = sinhc(r);
    Ok(flat_heat_kernel(space.dim, r, t) * (-space.rho_norm_sq() * t / 2.0).exp() / j)
}

/// `phi_lambda(r) = sin(lambda r) / (lambda sinh r)` on H^3, with
/// `phi_lambda(0) = 1`.
pub fn spherical_function_complex(space: &SpaceSpec, lambda: f64, r: f64) -> Result<f64> {
    if !is_complex_type(space) {
        return Err(Error::UnsupportedSpace(format!(
            "{} is not a rank-one complex-type space",
            space.name
        )));
    }
    Ok(sinc(lambda * r) / sinhc(r))
}

/// `f^(lambda) = int f(r) phi_lambda(r) delta(r) dr * |S^{n-1}|` by the
/// trapezoid rule on the given grid.
///
/// The grid must resolve `lambda`: `max spacing * max(lambda, 1) < pi / 4`,
/// and f must have decayed at the last grid point.
pub fn spherical_transform(space: &SpaceSpec, f: &RadialFunction, lambda: f64) -> Result<f64> {
    if !is_complex_type(space) {
        return Err(Error::UnsupportedSpace(format!(
            "{} is not a rank-one complex-type space",
            space.name
        )));
    }
    let grid = f.grid();
    let h_max = grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    if h_max * lambda.max(1.0) >= PI / 4.0 {
        return Err(Error::Resolution(format!(
            "grid spacing {h_max} cannot resolve lambda = {lambda}"
        )));
    }
    let area = unit_sphere_area(space.dim);
    let integrand: Vec<f64> = grid
        .iter()
        .zip(f.values())
        .map(|(&r, &v)| {
            let value = match f.measure_weight {
                MeasureWeight::Delta0 => v / sinhc(r).powi(2),
                MeasureWeight::None | MeasureWeight::Delta => v,
            };
            let delta = r.sinh().powi(2);
            value * delta * sinc(lambda * r) / sinhc(r) * area
        })
        .collect();
    let peak = integrand.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if let Some(last) = integrand.last() {
        if last.abs() > 1e-12 * peak {
            return Err(Error::Resolution(format!(
                "f has not decayed at r = {}; extend the grid",
                grid[grid.len() - 1]
            )));
        }
    }
    Ok(crate::quad::trapezoid(grid, &integrand))
}

/// The spectral kernel sampled on a grid.
pub fn sphere_kernel_on_grid(n: usize, t: f64, grid: &[f64], tol: f64) -> Result<(RadialFunction, Vec<SpectralTruncation>)> {
    let mut values = Vec::with_capacity(grid.len());
    let mut truncs = Vec::with_capacity(grid.len());
    for &th in grid {
        let (v, tr) = heat_kernel_sphere(n, th, t, tol)?;
        values.push(v);
        truncs.push(tr);
    }
    Ok((RadialFunction::new(grid.to_vec(), values, MeasureWeight::Delta)?, truncs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roots::build_space;

    fn sphere_mass(n: usize, t: f64) -> f64 {
        let gl = GaussLegendre::new(64);
        let area = unit_sphere_area(n);
        gl.integrate_composite(0.0, PI, 16, |th| {
            heat_kernel_sphere(n, th, t, 1e-14).unwrap().0 * area * th.sin().powi(n as i32 - 1)
        })
    }

    #[test]
    fn unit_mass() {
        for n in 1..=3 {
            for t in [0.05, 0.5, 2.0] {
                let m = sphere_mass(n, t);
                assert!((m - 1.0).abs() < 1e-10, "n={n} t={t} mass={m}");
            }
        }
    }

    #[test]
    fn circle_matches_wrapped_gaussian() {
        for t in [0.25, 1.0] {
            for th in [0.0, 0.7, 2.0] {
                let spec = heat_kernel_sphere(1, th, t, 1e-16).unwrap().0;
                let wrap: f64 = (-12..=12)
                    .map(|k| flat_heat_kernel(1, th + 2.0 * PI * k as f64, t))
                    .sum();
                assert!((spec - wrap).abs() < 1e-12 * wrap, "t={t} th={th}");
            }
        }
    }

    #[test]
    fn positivity_and_concentration() {
        for n in 1..=3 {
            for k in 0..=60 {
                let th = PI * k as f64 / 60.0;
                assert!(heat_kernel_sphere(n, th, 0.2, 1e-12).unwrap().0 > -1e-12);
            }
        }
        let gl = GaussLegendre::new(64);
        let mass_within = |t: f64| {
            gl.integrate(0.0, 0.2, |th| 2.0 * PI * th.sin() * heat_kernel_sphere(2, th, t, 1e-12).unwrap().0)
        };
        // planar Rayleigh law: P(R < 0.2) = 1 - exp(-0.02 / t)
        assert!((mass_within(0.01) - (1.0 - (-2.0f64).exp())).abs() < 2e-3);
        assert!(mass_within(0.001) > 0.99);
    }

    #[test]
    fn s2_eigenvalue_bookkeeping() {
        // |l alpha + rho|^2 - |rho|^2 with rho = 1/2, scaled by 4 to stay in integers
        for l in 0..=50i64 {
            assert_eq!((2 * l + 1).pow(2) - 1, 4 * l * (l + 1));
        }
    }

    #[test]
    fn truncation_reports_tail() {
        let (_, tr) = heat_kernel_sphere(2, 1.0, 0.01, 1e-10).unwrap();
        assert!(tr.tail_bound < 1e-10);
        assert!(tr.max_index > 40);
        assert!(heat_kernel_sphere(2, 1.0, 0.0, 1e-10).is_err());
        assert!(heat_kernel_sphere(4, 1.0, 0.5, 1e-10).is_err());
    }

    #[test]
    fn complex_group_closed_form() {
        let h3 = build_space(SpaceKind::Hyperbolic, 3).unwrap();
        let q0 = heat_kernel_complex_group(&h3, 0.0, 1.0).unwrap();
        assert!((q0 - (2.0 * PI).powf(-1.5) * (-0.5f64).exp()).abs() < 1e-16);
        // small-time leading coefficient 1/j
        let r = 0.8;
        let t = 1e-3;
        let scaled = (2.0 * PI * t).powf(1.5) * (r * r / (2.0 * t)).exp() * heat_kernel_complex_group(&h3, r, t).unwrap();
        assert!((scaled - r / r.sinh()).abs() < 1e-3);
        let s2 = build_space(SpaceKind::Sphere, 2).unwrap();
        assert!(heat_kernel_complex_group(&s2, 0.1, 1.0).is_err());
        assert!(heat_kernel_complex_group(&build_space(SpaceKind::Hyperbolic, 2).unwrap(), 0.1, 1.0).is_err());
    }

    #[test]
    fn spherical_function_values() {
        let h3 = build_space(SpaceKind::ComplexGroupRank1, 3).unwrap();
        assert_eq!(spherical_function_complex(&h3, 3.0, 0.0).unwrap(), 1.0);
        let v = spherical_function_complex(&h3, 0.0, 1.0).unwrap();
        assert!((v - 0.850_918_128_239_321_6).abs() < 1e-12);
    }

    #[test]
    fn transform_resolution_checks() {
        let h3 = build_space(SpaceKind::Hyperbolic, 3).unwrap();
        let grid = crate::radial::linspace(0.0, 12.0, 121);
        let f = RadialFunction::from_fn(&grid, MeasureWeight::None, |r| heat_kernel_complex_group(&h3, r, 0.5).unwrap()).unwrap();
        assert!(spherical_transform(&h3, &f, 2.0).is_ok());
        assert!(matches!(spherical_transform(&h3, &f, 20.0), Err(Error::Resolution(_))));
        let short = crate::radial::linspace(0.0, 1.0, 101);
        let g = RadialFunction::from_fn(&short, MeasureWeight::None, |r| heat_kernel_complex_group(&h3, r, 0.5).unwrap()).unwrap();
        assert!(matches!(spherical_transform(&h3, &g, 1.0), Err(Error::Resolution(_))));
    }

    #[test]
    fn heat_kernel_transforms_to_gaussian_in_lambda() {
        let h3 = build_space(SpaceKind::Hyperbolic, 3).unwrap();
        let t = 0.5;
        let grid = crate::radial::linspace(0.0, 14.0, 1401);
        let f = RadialFunction::from_fn(&grid, MeasureWeight::None, |r| heat_kernel_complex_group(&h3, r, t).unwrap()).unwrap();
        for lambda in [0.0, 1.0, 3.0] {
            let v = spherical_transform(&h3, &f, lambda).unwrap();
            let expected = (-(lambda * lambda + 1.0) * t / 2.0).exp();
            assert!((v - expected).abs() < 1e-10, "lambda={lambda} v={v}");
        }
    }
}
