//! Orbit-convolution densities, the e-function, twisted convolution on the
//! tangent plane and radial convolution on S^2.
//!
//! For |X| = r1, |Y| = r2 with independent uniform directions, the law of
//! |X + Y| has density f (plane), g (sphere, geodesic composition) or g_H
//! (hyperbolic plane). The e-function relates them through j:
//! `e(r1, r2, r) = j(r1) j(r2) / j(r) * g / f`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::GaussLegendre;
use crate::radial::{effective_radius, MeasureWeight, RadialFn, RadialFunction};
use crate::roots::{Curvature, SpaceKind, SpaceSpec};
use crate::special::{sinc, sinhc, unit_sphere_area};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitTriple {
    pub r1: f64,
    pub r2: f64,
    pub r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportStatus {
    Interior,
    /// At a support endpoint, where the density has an integrable singularity.
    Endpoint,
    OutOfSupport,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitDensity {
    pub value: f64,
    pub status: SupportStatus,
}

impl OrbitDensity {
    fn outside() -> Self {
        Self { value: 0.0, status: SupportStatus::OutOfSupport }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    Planar,
    Spherical,
    Hyperbolic,
}

impl OrbitTriple {
    pub fn new(r1: f64, r2: f64, r: f64) -> Self {
        Self { r1, r2, r }
    }

    /// Support of the law of |X + Y|.
    pub fn support(&self, geometry: Geometry) -> (f64, f64) {
        let lo = (self.r1 - self.r2).abs();
        let hi = self.r1 + self.r2;
        match geometry {
            Geometry::Spherical => (lo, hi.min(2.0 * PI - hi)),
            Geometry::Planar | Geometry::Hyperbolic => (lo, hi),
        }
    }

    pub fn status(&self, geometry: Geometry) -> SupportStatus {
        let (lo, hi) = self.support(geometry);
        let eps = 1e-14 * (1.0 + hi);
        if self.r < lo - eps || self.r > hi + eps || lo > hi {
            SupportStatus::OutOfSupport
        } else if (self.r - lo).abs() <= eps || (self.r - hi).abs() <= eps {
            SupportStatus::Endpoint
        } else {
            SupportStatus::Interior
        }
    }

    fn check(&self) -> Result<()> {
        if [self.r1, self.r2, self.r].iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Domain(format!("orbit triple {self:?} must be finite and non-negative")));
        }
        Ok(())
    }

    fn signed_sides(&self) -> [f64; 4] {
        let OrbitTriple { r1, r2, r } = *self;
        [r + r1 + r2, r + r1 - r2, r - r1 + r2, r - r1 - r2]
    }
}

/// `sqrt|prod (r +- r1 +- r2)|`, which equals `2 r1 r2 sin(angle)` (Heron).
pub fn heron_root(tri: &OrbitTriple) -> f64 {
    // Kahan's ordering keeps the near-degenerate factors accurate
    let mut s = [tri.r1.abs(), tri.r2.abs(), tri.r.abs()];
    s.sort_by(|x, y| y.total_cmp(x));
    let [a, b, c] = s;
    ((a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c))).abs().sqrt()
}

fn density_with(tri: &OrbitTriple, geometry: Geometry, value: impl FnOnce() -> f64) -> Result<OrbitDensity> {
    tri.check()?;
    if tri.r1 <= 0.0 || tri.r2 <= 0.0 {
        return Err(Error::Domain("orbit radii must be positive".into()));
    }
    if geometry == Geometry::Spherical && (tri.r1 >= PI || tri.r2 >= PI) {
        return Err(Error::Domain("spherical orbit radii must lie in (0, pi)".into()));
    }
    match tri.status(geometry) {
        SupportStatus::OutOfSupport => Ok(OrbitDensity::outside()),
        SupportStatus::Endpoint => Ok(OrbitDensity { value: f64::INFINITY, status: SupportStatus::Endpoint }),
        SupportStatus::Interior => Ok(OrbitDensity { value: value(), status: SupportStatus::Interior }),
    }
}

/// `f(r) = 2 r / (pi sqrt|prod (r +- r1 +- r2)|)`, a probability density in r.
pub fn planar_orbit_density(tri: &OrbitTriple) -> Result<OrbitDensity> {
    density_with(tri, Geometry::Planar, || 2.0 * tri.r / (PI * heron_root(tri)))
}

/// `g(r) = 2 sin r / (pi sqrt|prod 2 sin((r +- r1 +- r2)/2)|)`, supported on
/// `[|r1 - r2|, min(r1 + r2, 2 pi - r1 - r2)]`.
pub fn spherical_orbit_density(tri: &OrbitTriple) -> Result<OrbitDensity> {
    density_with(tri, Geometry::Spherical, || {
        let prod: f64 = tri.signed_sides().iter().map(|s| 2.0 * (s / 2.0).sin()).product();
        2.0 * tri.r.sin() / (PI * prod.abs().sqrt())
    })
}

/// `g_H(r) = sinh r / (pi sinh r1 sinh r2 sin phi)` where phi is the
/// exterior angle from the hyperbolic law of cosines.
pub fn hyperbolic_orbit_density(tri: &OrbitTriple) -> Result<OrbitDensity> {
    density_with(tri, Geometry::Hyperbolic, || {
        let OrbitTriple { r1, r2, r } = *tri;
        let (s1, s2) = (r1.sinh(), r2.sinh());
        let cos_phi = (r.cosh() - r1.cosh() * r2.cosh()) / (s1 * s2);
        let sin_phi = (1.0 - cos_phi * cos_phi).max(0.0).sqrt();
        r.sinh() / (PI * s1 * s2 * sin_phi)
    })
}

/// The literal reading of the S^2 display with the square roots in the
/// numerator: `sin r / (pi sin r1 sin r2) * prod [2 sin((r +- r1 +- r2)/2)]^{1/2}`.
/// It neither integrates to 1 nor tends to f for small radii.
pub fn spherical_orbit_density_numerator_reading(tri: &OrbitTriple) -> f64 {
    if tri.status(Geometry::Spherical) == SupportStatus::OutOfSupport {
        return 0.0;
    }
    let prod: f64 = tri.signed_sides().iter().map(|s| (2.0 * (s / 2.0).sin()).abs().sqrt()).product();
    tri.r.sin() / (PI * tri.r1.sin() * tri.r2.sin()) * prod
}

/// Integral of an orbit density over [a, b] within its support, with the
/// substitution that absorbs inverse-square-root endpoints.
pub fn integrate_orbit_density(
    density: fn(&OrbitTriple) -> Result<OrbitDensity>,
    r1: f64,
    r2: f64,
    a: f64,
    b: f64,
) -> Result<f64> {
    let gl = GaussLegendre::new(96);
    let mut err = None;
    let v = gl.integrate_sin2(a, b, |r| match density(&OrbitTriple::new(r1, r2, r)) {
        Ok(d) if d.value.is_finite() => d.value,
        Ok(_) => 0.0,
        Err(e) => {
            err = Some(e);
            0.0
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

fn geometry_of(space: &SpaceSpec) -> Result<(Geometry, usize)> {
    let supported = matches!(
        space.kind,
        SpaceKind::Sphere | SpaceKind::Hyperbolic | SpaceKind::CompactGroupSu2 | SpaceKind::ComplexGroupRank1 | SpaceKind::Euclidean
    );
    if !supported || space.dim < 2 {
        return Err(Error::UnsupportedSpace(format!(
            "e-functions are implemented for S^n, H^n and R^n with n >= 2, not {}",
            space.name
        )));
    }
    let geometry = match space.curvature {
        Curvature::Positive => Geometry::Spherical,
        Curvature::Negative => Geometry::Hyperbolic,
        Curvature::Flat => Geometry::Planar,
    };
    Ok((geometry, space.dim))
}

/// Closed-form e-function of S^n and H^n (u, v, w = r1, r2, r):
///
/// ```text
/// e = [ S((w+u+v)/2) S((w+u-v)/2) S((w-u+v)/2) S((w-u-v)/2) / (S(u) S(v) S(w)) ]^{(n-3)/2}
/// ```
///
/// with S = sinc on S^n and sinhc on H^n; identically 1 on R^n and for n = 3.
pub fn e_closed_form(space: &SpaceSpec, tri: &OrbitTriple) -> Result<OrbitDensity> {
    tri.check()?;
    let (geometry, n) = geometry_of(space)?;
    let status = if tri.r1 == 0.0 || tri.r2 == 0.0 {
        SupportStatus::Interior
    } else {
        tri.status(geometry)
    };
    if status == SupportStatus::OutOfSupport {
        return Ok(OrbitDensity::outside());
    }
    Ok(OrbitDensity { value: e_value(geometry, n, tri), status })
}

/// The closed form without support bookkeeping.
fn e_value(geometry: Geometry, n: usize, tri: &OrbitTriple) -> f64 {
    if geometry == Geometry::Planar || n == 3 {
        return 1.0;
    }
    let s: fn(f64) -> f64 = if geometry == Geometry::Spherical { sinc } else { sinhc };
    let (u, v) = (tri.r1.max(tri.r2), tri.r1.min(tri.r2));
    let w = tri.r;
    let num = s((w + u + v) / 2.0) * s((w + u - v) / 2.0) * s((w - u + v) / 2.0) * s((w - u - v) / 2.0);
    let den = s(u) * s(v) * s(w);
    (num / den).powf((n as f64 - 3.0) / 2.0)
}

/// `j(r1) j(r2) / j(r) * g / f` for S^2 and H^2, from the two orbit densities.
pub fn e_from_orbit_densities(space: &SpaceSpec, tri: &OrbitTriple) -> Result<f64> {
    let (geometry, n) = geometry_of(space)?;
    if n != 2 || geometry == Geometry::Planar {
        return Err(Error::UnsupportedSpace(format!(
            "orbit-density e-function is implemented on S^2 and H^2, not {}",
            space.name
        )));
    }
    let f = planar_orbit_density(tri)?;
    let g = match geometry {
        Geometry::Spherical => spherical_orbit_density(tri)?,
        _ => hyperbolic_orbit_density(tri)?,
    };
    if g.status == SupportStatus::OutOfSupport || f.status == SupportStatus::OutOfSupport {
        return Ok(0.0);
    }
    let j = |x: f64| space.rank_one().and_then(|p| p.j(x));
    Ok(j(tri.r1)? * j(tri.r2)? / j(tri.r)? * g.value / f.value)
}

fn check_resolution(f: &dyn RadialFn, scale: f64, what: &str) -> Result<()> {
    if let Some(h) = f.max_spacing() {
        if h > scale / 20.0 {
            return Err(Error::Resolution(format!(
                "{what} is sampled with spacing {h}, too coarse for its scale {scale}"
            )));
        }
    }
    Ok(())
}

/// Width of the central bump, from the radius where f falls to half of f(0).
fn bump_scale(f: &dyn RadialFn, r_max: f64) -> f64 {
    let f0 = f.eval(0.0).abs();
    let mut r = 0.0;
    while r < r_max && f.eval(r).abs() > 0.5 * f0 {
        r += r_max / 400.0;
    }
    r.max(r_max / 400.0)
}

/// Twisted convolution on the tangent plane of a 2-dimensional space:
/// `T(x) = int mu(|y|) nu(|x - y|) e(|y|, |x - y|, |x|) dy`.
///
/// mu and nu are radial densities against `2 pi r dr`. On S^2 they must be
/// supported in the closed ball of radius pi; e vanishes once
/// `r + r1 + r2 > 2 pi`. Passing R^2 gives the plain convolution.
pub fn twisted_convolution(space: &SpaceSpec, mu: &dyn RadialFn, nu: &dyn RadialFn, grid: &[f64]) -> Result<RadialFunction> {
    let (geometry, n) = geometry_of(space)?;
    if n != 2 {
        return Err(Error::UnsupportedSpace(format!(
            "twisted convolution is implemented on the tangent plane of a surface, not {}",
            space.name
        )));
    }
    let r1_max = match geometry {
        Geometry::Spherical => PI,
        _ => effective_radius(mu, 1e-16),
    };
    check_resolution(mu, bump_scale(mu, r1_max), "mu")?;
    check_resolution(nu, bump_scale(nu, r1_max.max(effective_radius(nu, 1e-16))), "nu")?;

    let gl = GaussLegendre::new(64);
    let values = grid
        .par_iter()
        .map(|&r| {
            let inner = |r1: f64| -> f64 {
                // r2(psi)^2 = r^2 + r1^2 - 2 r r1 cos psi, psi in [0, psi_max]
                let psi_max = if geometry == Geometry::Spherical && r + r1 > PI {
                    let cap = 2.0 * PI - r - r1;
                    if cap <= (r - r1).abs() {
                        return 0.0;
                    }
                    if r == 0.0 || r1 == 0.0 {
                        PI
                    } else {
                        ((r * r + r1 * r1 - cap * cap) / (2.0 * r * r1)).clamp(-1.0, 1.0).acos()
                    }
                } else {
                    PI
                };
                2.0 * gl.integrate_sin2(0.0, psi_max, |psi| {
                    let r2 = (r * r + r1 * r1 - 2.0 * r * r1 * psi.cos()).max(0.0).sqrt();
                    let e = e_value(geometry, 2, &OrbitTriple::new(r1, r2, r));
                    nu.eval(r2) * e
                })
            };
            let outer = |r1: f64| r1 * mu.eval(r1) * inner(r1);
            let split = if geometry == Geometry::Spherical { PI - r } else { r1_max };
            let mut total = gl.integrate_sin2(0.0, split.min(r1_max), outer);
            if split < r1_max {
                total += gl.integrate_sin2(split, r1_max, outer);
            }
            total
        })
        .collect();
    RadialFunction::new(grid.to_vec(), values, MeasureWeight::Delta0)
}

/// Radial convolution on S^2 of two densities against `2 pi sin(theta) d theta`:
/// `(mu * nu)(theta) = int sin(t1) mu(t1) int_0^{2 pi} nu(t2(phi)) d phi d t1`
/// with `cos t2 = cos theta cos t1 + sin theta sin t1 cos phi`.
pub fn sphere_convolution(mu: &dyn RadialFn, nu: &dyn RadialFn, grid: &[f64]) -> Result<RadialFunction> {
    sphere_convolution_dim(2, mu, nu, grid)
}

/// Radial convolution on S^n, n >= 2: the outer weight is `sin^{n-1}(t1)`
/// and the inner angle carries `|S^{n-2}| sin^{n-2}(phi)` on [0, pi].
pub fn sphere_convolution_dim(n: usize, mu: &dyn RadialFn, nu: &dyn RadialFn, grid: &[f64]) -> Result<RadialFunction> {
    if n < 2 {
        return Err(Error::UnsupportedSpace(format!("sphere convolution needs n >= 2, got {n}")));
    }
    if let Some(&bad) = grid.iter().find(|&&th| !(0.0..=PI).contains(&th)) {
        return Err(Error::Domain(format!("theta = {bad} is outside [0, pi]")));
    }
    check_resolution(mu, bump_scale(mu, PI), "mu")?;
    check_resolution(nu, bump_scale(nu, PI), "nu")?;
    let gl = GaussLegendre::new(64);
    let inner_area = unit_sphere_area(n - 1);
    let (p_out, p_in) = ((n - 1) as i32, (n - 2) as i32);
    let values = grid
        .par_iter()
        .map(|&th| {
            let (c, s) = (th.cos(), th.sin());
            let outer = |t1: f64| {
                let (c1, s1) = (t1.cos(), t1.sin());
                let inner = inner_area
                    * gl.integrate_sin2(0.0, PI, |phi| {
                        let t2 = (c * c1 + s * s1 * phi.cos()).clamp(-1.0, 1.0).acos();
                        nu.eval(t2) * phi.sin().powi(p_in)
                    });
                s1.powi(p_out) * mu.eval(t1) * inner
            };
            // antipodal singularities of wrapped densities sit at t1 = pi - theta
            let split = PI - th;
            let mut total = 0.0;
            if split > 0.0 {
                total += gl.integrate_sin2(0.0, split, outer);
            }
            if split < PI {
                total += gl.integrate_sin2(split, PI, outer);
            }
            total
        })
        .collect();
    RadialFunction::new(grid.to_vec(), values, MeasureWeight::Delta)
}

/// Monte Carlo samples of |X + Y| (plane) or of the geodesic distance from
/// the origin of `a(r1) k a(r2) o` with k a uniform rotation about o,
/// computed with explicit rotation matrices (sphere) or boosts on the
/// hyperboloid. Deterministic in `seed` regardless of thread count.
pub fn orbit_composition_samples(geometry: Geometry, r1: f64, r2: f64, count: usize, seed: u64) -> Vec<f64> {
    const CHUNK: usize = 4096;
    let chunks = count.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let len = CHUNK.min(count - c * CHUNK);
            (0..len)
                .map(|_| {
                    let phi: f64 = rng.random_range(0.0..2.0 * PI);
                    compose(geometry, r1, r2, phi)
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

fn compose(geometry: Geometry, r1: f64, r2: f64, phi: f64) -> f64 {
    match geometry {
        Geometry::Planar => {
            let (x, y) = (r1 + r2 * phi.cos(), r2 * phi.sin());
            x.hypot(y)
        }
        Geometry::Spherical => {
            // p = R_y(r1) R_z(phi) R_y(r2) e_z
            let p = [r2.sin(), 0.0, r2.cos()];
            let p = [phi.cos() * p[0] - phi.sin() * p[1], phi.sin() * p[0] + phi.cos() * p[1], p[2]];
            let z = -r1.sin() * p[0] + r1.cos() * p[2];
            z.clamp(-1.0, 1.0).acos()
        }
        Geometry::Hyperbolic => {
            // boosts along x1 on the hyperboloid x0^2 - x1^2 - x2^2 = 1
            let p = [r2.cosh(), r2.sinh(), 0.0];
            let p = [p[0], phi.cos() * p[1] - phi.sin() * p[2], phi.sin() * p[1] + phi.cos() * p[2]];
            let x0 = r1.cosh() * p[0] + r1.sinh() * p[1];
            x0.max(1.0).acosh()
        }
    }
}

/// Histogram of `samples` on `bins` equal bins of [lo, hi] against the bin
/// probabilities of `density`; returns the largest |deviation| / sigma.
pub fn histogram_deviation(
    samples: &[f64],
    density: fn(&OrbitTriple) -> Result<OrbitDensity>,
    r1: f64,
    r2: f64,
    lo: f64,
    hi: f64,
    bins: usize,
) -> Result<f64> {
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in samples {
        if x >= lo && x < hi {
            counts[(((x - lo) / width) as usize).min(bins - 1)] += 1;
        }
    }
    let n = samples.len() as f64;
    let mut worst = 0.0f64;
    for (i, &c) in counts.iter().enumerate() {
        let a = lo + i as f64 * width;
        let p = integrate_orbit_density(density, r1, r2, a, a + width)?;
        let sigma = (p * (1.0 - p) / n).sqrt();
        let freq = c as f64 / n;
        if sigma > 0.0 {
            worst = worst.max((freq - p).abs() / sigma);
        }
    }
    Ok(worst)
}
