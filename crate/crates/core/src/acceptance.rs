//! The reference suite: ten numerical checks tying the four kernel routes
//! and the e-function machinery together. Each returns a report of
//! sub-checks with the measured value and its threshold.

use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::efunction::{
    e_closed_form, e_from_orbit_densities, heron_root, histogram_deviation, hyperbolic_orbit_density,
    integrate_orbit_density, orbit_composition_samples, planar_orbit_density, sphere_convolution,
    spherical_orbit_density, twisted_convolution, Geometry, OrbitTriple,
};
use crate::error::{Error, Result};
use crate::pde::{check_intertwining, heat_equation_residual, omega_star_fd, solve_perturbed_heat, PdeConfig};
use crate::potentials::omega_star;
use crate::radial::{linspace, MeasureWeight, RadialFunction};
use crate::roots::{build_space, preset_by_name, SpaceKind, SpaceSpec};
use crate::special::flat_heat_kernel;
use crate::spectral::{heat_kernel_complex_group, heat_kernel_sphere, spherical_transform};
use crate::stochastics::{flat_walk_feynman_kac, max_sigma_deviation, reference_bin_averages, Scheme, WalkConfig};
use crate::wrapping::{apply_rho_shift, wrap_compact, wrapped_gaussian, Branch, ShiftDirection, WrapPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    Below,
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub label: String,
    pub measured: f64,
    pub threshold: f64,
    pub comparison: Comparison,
    pub note: Option<String>,
}

impl Check {
    pub fn below(label: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self { label: label.into(), measured, threshold, comparison: Comparison::Below, note: None }
    }

    pub fn above(label: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self { label: label.into(), measured, threshold, comparison: Comparison::Above, note: None }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn passed(&self) -> bool {
        match self.comparison {
            Comparison::Below => self.measured < self.threshold,
            Comparison::Above => self.measured > self.threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: u32,
    pub title: String,
    pub checks: Vec<Check>,
}

impl CriterionReport {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(Check::passed)
    }
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "{verdict} criterion {:>2}: {}", self.id, self.title)?;
        for c in &self.checks {
            let op = match c.comparison {
                Comparison::Below => "<",
                Comparison::Above => ">",
            };
            let mark = if c.passed() { "ok" } else { "FAILED" };
            write!(f, "\n    [{mark}] {}: {:.3e} {op} {:.1e}", c.label, c.measured, c.threshold)?;
            if let Some(n) = &c.note {
                write!(f, " ({n})")?;
            }
        }
        Ok(())
    }
}

fn sup_relative<I: IntoIterator<Item = (f64, f64)>>(pairs: I) -> f64 {
    pairs.into_iter().map(|(a, b)| ((a - b) / b).abs()).fold(0.0, f64::max)
}

fn sphere(n: usize) -> Result<SpaceSpec> {
    build_space(SpaceKind::Sphere, n)
}

fn hyperbolic(n: usize) -> Result<SpaceSpec> {
    build_space(SpaceKind::Hyperbolic, n)
}

/// Wrapped Gaussians against spectral kernels: exact on the circle and on
/// S^3 after the rho shift, not exact on S^2 under any branch policy.
pub fn exactness_trichotomy() -> Result<CriterionReport> {
    let mut checks = Vec::new();
    let circle = sphere(1)?;
    let policy = WrapPolicy::default();
    for t in [0.25, 1.0] {
        let grid = linspace(0.01, PI - 0.01, 315);
        let pairs = grid
            .par_iter()
            .map(|&th| Ok((wrapped_gaussian(&circle, th, t, &policy)?, heat_kernel_sphere(1, th, t, 1e-18)?.0)))
            .collect::<Result<Vec<_>>>()?;
        checks.push(Check::below(format!("S1 t={t}"), sup_relative(pairs), 1e-10));
    }
    let s3 = sphere(3)?;
    for t in [0.25, 0.5, 1.0] {
        let grid = linspace(0.1, 3.0, 291);
        let pairs = grid
            .par_iter()
            .map(|&th| {
                let w = apply_rho_shift(wrapped_gaussian(&s3, th, t, &policy)?, &s3, t, ShiftDirection::ToStandard)?;
                Ok((w, heat_kernel_sphere(3, th, t, 1e-18)?.0))
            })
            .collect::<Result<Vec<_>>>()?;
        checks.push(Check::below(format!("S3 t={t}"), sup_relative(pairs), 1e-8));
    }
    let s2 = sphere(2)?;
    for branch in Branch::ALL {
        let policy = WrapPolicy::with_branch(branch);
        let grid = linspace(0.1, 3.0, 291);
        let pairs: Result<Vec<(f64, f64)>> = grid
            .par_iter()
            .map(|&th| {
                let w = apply_rho_shift(wrapped_gaussian(&s2, th, 1.0, &policy)?, &s2, 1.0, ShiftDirection::ToStandard)?;
                Ok((w, heat_kernel_sphere(2, th, 1.0, 1e-18)?.0))
            })
            .collect();
        checks.push(match pairs {
            Ok(p) => Check::above(format!("S2 t=1 {}", branch.as_str()), sup_relative(p), 1e-3),
            Err(Error::BranchObstruction { .. }) => {
                Check::above(format!("S2 t=1 {}", branch.as_str()), f64::INFINITY, 1e-3).with_note("branch obstruction")
            }
            Err(e) => return Err(e),
        });
    }
    Ok(CriterionReport { id: 1, title: "exactness trichotomy".into(), checks })
}

/// Omega* against the finite-difference oracle `(L_p j)/j`, and the group constants.
pub fn omega_star_correctness() -> Result<CriterionReport> {
    let mut checks = Vec::new();
    for name in ["S2", "S3", "H2", "H3", "CP2"] {
        let space = preset_by_name(name)?;
        let top = if space.fundamental_radius.is_finite() { space.fundamental_radius - 0.1 } else { 4.0 };
        let grid = linspace(0.0, top, 8001);
        let fd = omega_star_fd(&space, &grid)?;
        let pairs = grid
            .iter()
            .zip(fd.values())
            .map(|(&r, &v)| Ok((v, omega_star(&space, &[r])?.value)))
            .collect::<Result<Vec<_>>>()?;
        checks.push(Check::below(format!("{name} finite differences"), sup_relative(pairs), 1e-6));
    }
    for (name, sign) in [("SU2", -1.0), ("SL2C", 1.0), ("SU3", -1.0), ("SL3C", 1.0)] {
        let space = preset_by_name(name)?;
        let target = sign * space.rho_norm_sq();
        let rank = space.roots.rank();
        let mut worst = 0.0f64;
        for k in 1..=20 {
            let h: Vec<f64> = (0..rank).map(|i| 0.05 * k as f64 / (i + 1) as f64 + 0.01 * i as f64).collect();
            worst = worst.max((omega_star(&space, &h)?.value - target).abs());
        }
        checks.push(Check::below(format!("{name} constant {target:+.6}"), worst, 1e-12));
    }
    Ok(CriterionReport { id: 2, title: "Omega* correctness".into(), checks })
}

/// Series values of Omega* at H = 1e-4 against the limits at the origin.
pub fn limit_values() -> Result<CriterionReport> {
    let mut checks = Vec::new();
    for n in [2usize, 4, 5] {
        let nf = n as f64;
        let v = omega_star(&sphere(n)?, &[1e-4])?.value;
        checks.push(Check::below(format!("S{n}"), (v - nf * (1.0 - nf) / 6.0).abs(), 1e-8));
    }
    for n in [2usize, 4, 5] {
        let nf = n as f64;
        let v = omega_star(&hyperbolic(n)?, &[1e-4])?.value;
        checks.push(Check::below(format!("H{n}"), (v - nf * (nf - 1.0) / 6.0).abs(), 1e-8));
    }
    Ok(CriterionReport { id: 3, title: "limit values at the origin".into(), checks })
}

fn random_triples(geometry: Geometry, count: usize, seed: u64) -> Vec<OrbitTriple> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let r1 = rng.random_range(0.05..2.5);
        let r2 = rng.random_range(0.05..2.5);
        let (lo, hi) = OrbitTriple::new(r1, r2, 0.0).support(geometry);
        if hi - lo < 1e-3 {
            continue;
        }
        let s: f64 = rng.random_range(0.01..0.99);
        out.push(OrbitTriple::new(r1, r2, lo + s * (hi - lo)));
    }
    out
}

/// The e-function: trivial in dimension three, equal to the ratio of orbit
/// densities on S^2, unit-mass densities, Monte Carlo orbit composition and
/// the Heron identity.
pub fn efunction_suite() -> Result<CriterionReport> {
    let mut checks = Vec::new();
    let s3 = sphere(3)?;
    let h3 = hyperbolic(3)?;
    let mut off = 0.0f64;
    for tri in random_triples(Geometry::Spherical, 1000, 1) {
        off = off.max((e_closed_form(&s3, &tri)?.value - 1.0).abs());
    }
    for tri in random_triples(Geometry::Hyperbolic, 1000, 2) {
        off = off.max((e_closed_form(&h3, &tri)?.value - 1.0).abs());
    }
    checks.push(Check::below("n=3 |e - 1|", off, f64::MIN_POSITIVE).with_note("exact"));

    let s2 = sphere(2)?;
    let pairs = random_triples(Geometry::Spherical, 1000, 3)
        .iter()
        .map(|tri| Ok((e_from_orbit_densities(&s2, tri)?, e_closed_form(&s2, tri)?.value)))
        .collect::<Result<Vec<_>>>()?;
    checks.push(Check::below("S2 e vs (j1 j2 / j) g / f", sup_relative(pairs), 1e-10));

    let mut mass = 0.0f64;
    for (r1, r2) in [(1.0, 1.0), (0.3, 1.2), (0.7, 1.1), (2.0, 2.5)] {
        for (geometry, density) in [
            (Geometry::Planar, planar_orbit_density as fn(&OrbitTriple) -> Result<_>),
            (Geometry::Spherical, spherical_orbit_density),
            (Geometry::Hyperbolic, hyperbolic_orbit_density),
        ] {
            let (lo, hi) = OrbitTriple::new(r1, r2, 0.0).support(geometry);
            mass = mass.max((integrate_orbit_density(density, r1, r2, lo, hi)? - 1.0).abs());
        }
    }
    checks.push(Check::below("|int f - 1|, |int g - 1|", mass, 1e-8));

    let (r1, r2) = (0.7, 1.1);
    let samples = orbit_composition_samples(Geometry::Spherical, r1, r2, 1_000_000, 2024);
    let (lo, hi) = OrbitTriple::new(r1, r2, 0.0).support(Geometry::Spherical);
    let dev = histogram_deviation(&samples, spherical_orbit_density, r1, r2, lo, hi, 10)?;
    checks.push(Check::below("orbit composition vs g, max |dev| / sigma", dev, 3.0));

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut heron = 0.0f64;
    for _ in 0..1000 {
        let r1: f64 = rng.random_range(0.01..3.0);
        let r2: f64 = rng.random_range(0.01..3.0);
        let ang: f64 = rng.random_range(0.0..PI);
        let r = ((r1 - r2).powi(2) + 4.0 * r1 * r2 * (0.5 * ang).cos().powi(2)).sqrt();
        // 2 r1 r2 sin(angle) of the triangle with these exact sides, law of cosines in double-double
        let (a, b, c) = (TwoFloat::from(r1), TwoFloat::from(r2), TwoFloat::from(r));
        let cross = c * c - a * a - b * b;
        let four = TwoFloat::from(4.0) * a * a * b * b;
        let exact = (four - cross * cross).sqrt();
        let err = (heron_root(&OrbitTriple::new(r1, r2, r)) - exact.hi()).abs();
        heron = heron.max(err / (2.0 * r1 * r2));
    }
    checks.push(Check::below("Heron identity vs law of cosines, error / (2 r1 r2)", heron, 1e-12));
    Ok(CriterionReport { id: 4, title: "e-function suite".into(), checks })
}

/// `j Phi(p_t)` on [0, pi], the pull-back of the wrapped Gaussian to the ball.
fn folded_wrapped_gaussian(space: &SpaceSpec, t: f64) -> Result<RadialFunction> {
    let profile = space.rank_one()?;
    let grid = linspace(0.0, PI, 4001);
    let policy = WrapPolicy::default();
    let n = space.dim;
    let values = grid
        .par_iter()
        .map(|&th| {
            let th = th.clamp(1e-9, PI - 1e-9);
            let p = move |r: f64| flat_heat_kernel(n, r, t);
            Ok(profile.j(th)? * wrap_compact(space, &p, th, &policy)?)
        })
        .collect::<Result<Vec<_>>>()?;
    RadialFunction::new(grid, values, MeasureWeight::Delta0)
}

/// On S^2 the twisted convolution of wrapped Gaussians wraps to the sphere
/// convolution, and differs from the wrapped Gaussian at the summed time.
pub fn twisted_convolution_check() -> Result<CriterionReport> {
    let s2 = sphere(2)?;
    let profile = s2.rank_one()?;
    let grid = linspace(0.05, 3.0, 60);
    let mut checks = Vec::new();
    for (t, s) in [(0.5, 0.5), (0.3, 0.7)] {
        let mt = folded_wrapped_gaussian(&s2, t)?;
        let ms = folded_wrapped_gaussian(&s2, s)?;
        let sum = folded_wrapped_gaussian(&s2, t + s)?;
        let twisted = twisted_convolution(&s2, &mt, &ms, &grid)?;
        let unfold = |f: &RadialFunction, th: f64| {
            let th = th.min(PI - 1e-12);
            f.interpolate(th) / profile.j(th).unwrap_or(f64::NAN)
        };
        let phi_t = |th: f64| unfold(&mt, th);
        let phi_s = |th: f64| unfold(&ms, th);
        let rhs = sphere_convolution(&phi_t, &phi_s, &grid)?;
        let mut worst = 0.0f64;
        let mut gap = 0.0f64;
        let mut peak = 0.0f64;
        for (i, &th) in grid.iter().enumerate() {
            let lhs = twisted.values()[i] / profile.j(th)?;
            worst = worst.max(((lhs - rhs.values()[i]) / rhs.values()[i]).abs());
            let target = unfold(&sum, th);
            gap = gap.max((lhs - target).abs());
            peak = peak.max(target.abs());
        }
        checks.push(Check::below(format!("(t,s)=({t},{s}) wrap of twisted convolution"), worst, 1e-3));
        checks.push(Check::above(format!("(t,s)=({t},{s}) gap to Phi(p_(t+s)) / peak"), gap / peak, 1e-3));
    }
    Ok(CriterionReport { id: 5, title: "global twisted convolution".into(), checks })
}

/// Semigroup of the true kernels: spectral S^2 self-convolution and the
/// H^3 closed form as a solution of the heat equation.
pub fn kernel_semigroup() -> Result<CriterionReport> {
    let mut checks = Vec::new();
    let fine = linspace(0.0, PI, 4001);
    let tab = |t: f64| -> Result<RadialFunction> {
        let values = fine
            .par_iter()
            .map(|&th| Ok(heat_kernel_sphere(2, th, t, 1e-18)?.0))
            .collect::<Result<Vec<_>>>()?;
        RadialFunction::new(fine.clone(), values, MeasureWeight::Delta)
    };
    let grid = linspace(0.05, 3.0, 60);
    for (t, s) in [(0.5, 0.5), (0.3, 0.7)] {
        let conv = sphere_convolution(&tab(t)?, &tab(s)?, &grid)?;
        let pairs = grid
            .iter()
            .zip(conv.values())
            .map(|(&th, &v)| Ok((v, heat_kernel_sphere(2, th, t + s, 1e-18)?.0)))
            .collect::<Result<Vec<_>>>()?;
        checks.push(Check::below(format!("S2 h_{t} * h_{s} vs h_{}", t + s), sup_relative(pairs), 1e-6));
    }
    let h3 = hyperbolic(3)?;
    let grid = linspace(0.1, 3.0, 59);
    let residual = heat_equation_residual(&h3, |r, t| heat_kernel_complex_group(&h3, r, t), &grid, 1.0, 3e-3)?;
    checks.push(Check::below("H3 closed form heat equation residual", residual, 1e-6));
    Ok(CriterionReport { id: 6, title: "semigroup of true kernels".into(), checks })
}

/// The spherical transform of `Phi(p_t)` on H^3 is multiplicative in t.
pub fn complex_group_wrapping() -> Result<CriterionReport> {
    let h3 = hyperbolic(3)?;
    let grid = linspace(0.0, 8.0, 4001);
    let phi = |t: f64| {
        RadialFunction::from_fn(&grid, MeasureWeight::Delta, |r| {
            flat_heat_kernel(3, r, t) / h3.rank_one().and_then(|p| p.j(r)).unwrap_or(f64::NAN)
        })
    };
    let (t, s) = (0.1, 0.15);
    let (ft, fs, fts) = (phi(t)?, phi(s)?, phi(t + s)?);
    let mut worst = 0.0f64;
    for lambda in linspace(0.0, 8.0, 161) {
        let a = spherical_transform(&h3, &ft, lambda)? * spherical_transform(&h3, &fs, lambda)?;
        let b = spherical_transform(&h3, &fts, lambda)?;
        worst = worst.max(((a - b) / b).abs());
    }
    Ok(CriterionReport {
        id: 7,
        title: "complex-group wrapping".into(),
        checks: vec![Check::below(format!("H3 transform defect (t,s)=({t},{s}), lambda in [0,8]"), worst, 1e-6)],
    })
}

/// The wrap of the perturbed tangent-space kernel is the heat kernel, by
/// the PDE route and by the Feynman-Kac route.
pub fn perturbed_kernel_program() -> Result<CriterionReport> {
    let s2 = sphere(2)?;
    let t = 0.5;
    let config = PdeConfig::new(&s2, t, 1e-3, 1e-4);
    let solution = solve_perturbed_heat(&s2, t, &config)?;
    let wrapped = solution.wrapped(&s2)?;
    let pairs = wrapped
        .grid()
        .iter()
        .zip(wrapped.values())
        .filter(|(&r, _)| (0.2..=2.4).contains(&r))
        .map(|(&r, &v)| Ok((v, heat_kernel_sphere(2, r, solution.t_total, 1e-18)?.0)))
        .collect::<Result<Vec<_>>>()?;
    let mut checks = vec![Check::below("PDE route, S2 t=0.5", sup_relative(pairs), 1e-3)
        .with_note(format!("boundary loss {:.1e}", solution.boundary_loss))];

    let edges = linspace(0.2, 2.0, 13);
    let reference = reference_bin_averages(&s2, 0.3, &edges)?;
    let walk = WalkConfig::new(Scheme::FlatWalkFk, 0.3, 300, 100_000, 1);
    let estimate = flat_walk_feynman_kac(&s2, &walk, &edges)?;
    checks.push(
        Check::below("Feynman-Kac route, S2 t=0.3, max |dev| / sigma", max_sigma_deviation(&estimate, &reference), 3.0)
            .with_note(format!("killed {:.1e}", estimate.killed_mass)),
    );
    Ok(CriterionReport { id: 8, title: "perturbed-kernel program".into(), checks })
}

/// `(2 pi t)^{n/2} e^{theta^2 / 2t} h_t(theta) -> 1 / j(theta)` as t -> 0.
pub fn small_time_leading_term() -> Result<CriterionReport> {
    let mut checks = Vec::new();
    for space in [sphere(2)?, hyperbolic(3)?] {
        let profile = space.rank_one()?;
        let n = space.dim as f64;
        for theta in [0.5, 1.0] {
            let mut gaps = Vec::new();
            for t in [0.1, 0.05, 0.025] {
                let h = if space.dim == 2 {
                    heat_kernel_sphere(2, theta, t, 1e-18)?.0
                } else {
                    heat_kernel_complex_group(&space, theta, t)?
                };
                let scaled = (2.0 * PI * t).powf(n / 2.0) * (theta * theta / (2.0 * t)).exp() * h;
                gaps.push((scaled * profile.j(theta)? - 1.0).abs());
            }
            let monotone = gaps.windows(2).all(|w| w[1] < w[0]);
            let label = format!("{} theta={theta} final gap", space.name);
            let check = if monotone {
                Check::below(label, gaps[2], 0.02)
            } else {
                Check::below(label, f64::INFINITY, 0.02).with_note("approach not monotone")
            };
            checks.push(check.with_note(format!("gaps {:.2e} {:.2e} {:.2e}", gaps[0], gaps[1], gaps[2])));
        }
    }
    Ok(CriterionReport { id: 9, title: "small-time leading term".into(), checks })
}

/// The intertwining identity for Gaussian bumps.
pub fn intertwining_identity() -> Result<CriterionReport> {
    let s2 = sphere(2)?;
    let h3 = hyperbolic(3)?;
    let bump = |centre: f64| move |r: f64| (-(r - centre).powi(2) / (2.0 * 0.04)).exp();
    let s2_grid = linspace(0.0, PI * 2047.0 / 2048.0, 2048);
    let h3_grid = linspace(0.0, 4.0, 2048);
    let a = check_intertwining(&s2, &bump(PI / 2.0), &s2_grid)?;
    let b = check_intertwining(&h3, &bump(1.5), &h3_grid)?;
    Ok(CriterionReport {
        id: 10,
        title: "intertwining identity".into(),
        checks: vec![Check::below("S2 bump at pi/2", a.relative, 1e-5), Check::below("H3 bump at 1.5", b.relative, 1e-6)],
    })
}

pub type CriterionFn = fn() -> Result<CriterionReport>;

/// All criteria in order.
pub const CRITERIA: [(u32, CriterionFn); 10] = [
    (1, exactness_trichotomy),
    (2, omega_star_correctness),
    (3, limit_values),
    (4, efunction_suite),
    (5, twisted_convolution_check),
    (6, kernel_semigroup),
    (7, complex_group_wrapping),
    (8, perturbed_kernel_program),
    (9, small_time_leading_term),
    (10, intertwining_identity),
];

/// Runs one criterion by number.
pub fn run_criterion(id: u32) -> Result<CriterionReport> {
    CRITERIA
        .iter()
        .find(|(k, _)| *k == id)
        .map(|(_, f)| f())
        .unwrap_or_else(|| Err(Error::Config(format!("no criterion {id}; expected 1 to 10"))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_formatting() {
        let r = CriterionReport {
            id: 3,
            title: "x".into(),
            checks: vec![Check::below("a", 1e-9, 1e-8), Check::above("b", 0.5, 1e-3).with_note("n")],
        };
        assert!(r.passed());
        let s = r.to_string();
        assert!(s.starts_with("PASS criterion  3: x"));
        assert!(s.contains("(n)"));
        let empty = CriterionReport { id: 1, title: "y".into(), checks: vec![] };
        assert!(!empty.passed());
    }

    #[test]
    fn unknown_criterion() {
        assert!(matches!(run_criterion(11), Err(Error::Config(_))));
    }

    #[test]
    fn limits_criterion() {
        assert!(limit_values().unwrap().passed());
    }
}
