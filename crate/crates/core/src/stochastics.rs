//! Brownian samplers: a geodesic random walk on spheres and hyperbolic
//! spaces, and flat Brownian motion on the tangent space weighted by the
//! Feynman-Kac factor `exp(-1/2 int Omega*)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde::{PotentialMode, WALL_BUFFER};
use crate::potentials::RadialPotential;
use crate::quad::GaussLegendre;
use crate::radial::{linspace, MeasureWeight, RadialFunction};
use crate::roots::{Curvature, SpaceKind, SpaceSpec};
use crate::spectral::{heat_kernel_complex_group, heat_kernel_sphere, is_complex_type};
use crate::special::unit_sphere_area;

/// Paths per random stream; streams are keyed by (seed, chunk index).
const CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    GeodesicWalk,
    FlatWalkFk,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub step_count: usize,
    pub sample_count: usize,
    pub t: f64,
    pub seed: u64,
    pub scheme: Scheme,
    pub potential: PotentialMode,
}

impl WalkConfig {
    pub fn new(scheme: Scheme, t: f64, step_count: usize, sample_count: usize, seed: u64) -> Self {
        Self { step_count, sample_count, t, seed, scheme, potential: PotentialMode::Space }
    }

    pub fn dt(&self) -> f64 {
        self.t / self.step_count as f64
    }

    /// Rejects empty runs and steps whose mean displacement is not small
    /// against the fundamental domain.
    pub fn validate(&self, space: &SpaceSpec) -> Result<()> {
        if self.step_count == 0 || self.sample_count == 0 || !(self.t > 0.0) {
            return Err(Error::Config("step_count, sample_count and t must be positive".into()));
        }
        let step = (space.dim as f64 * self.dt()).sqrt();
        let radius = if space.fundamental_radius.is_finite() { space.fundamental_radius } else { std::f64::consts::PI };
        if step >= radius / 20.0 {
            return Err(Error::Config(format!(
                "mean step {step:.4} is not below {:.4}; raise step_count",
                radius / 20.0
            )));
        }
        Ok(())
    }
}

fn stream(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

fn chunks(count: usize) -> impl IndexedParallelIterator<Item = (usize, usize)> {
    (0..count.div_ceil(CHUNK)).into_par_iter().map(move |c| (c, CHUNK.min(count - c * CHUNK)))
}

fn walk_geometry(space: &SpaceSpec) -> Result<Curvature> {
    match (space.kind, space.curvature) {
        (SpaceKind::Sphere | SpaceKind::Circle | SpaceKind::CompactGroupSu2, Curvature::Positive) => Ok(Curvature::Positive),
        (SpaceKind::Hyperbolic | SpaceKind::ComplexGroupRank1, Curvature::Negative) => Ok(Curvature::Negative),
        _ if space.kind == SpaceKind::Circle => Ok(Curvature::Positive),
        _ => Err(Error::UnsupportedSpace(format!(
            "the geodesic walk covers spheres and hyperbolic spaces, not {}",
            space.name
        ))),
    }
}

/// End-point distances from the start of independent geodesic random walks.
/// Each step draws a tangent Gaussian of variance `t / step_count` per
/// coordinate and follows the geodesic it spans, on the unit sphere in
/// `R^{n+1}` or on the hyperboloid.
pub fn geodesic_walk(space: &SpaceSpec, config: &WalkConfig) -> Result<Vec<f64>> {
    config.validate(space)?;
    let geometry = walk_geometry(space)?;
    let n = space.dim;
    let sd = config.dt().sqrt();
    let steps = config.step_count;
    let samples = chunks(config.sample_count)
        .flat_map_iter(|(c, len)| {
            let mut rng = stream(config.seed, c);
            let mut out = Vec::with_capacity(len);
            let mut x = vec![0.0; n + 1];
            let mut v = vec![0.0; n + 1];
            for _ in 0..len {
                x.iter_mut().for_each(|a| *a = 0.0);
                x[0] = 1.0;
                for _ in 0..steps {
                    for vi in v.iter_mut() {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        *vi = sd * z;
                    }
                    // project onto the tangent space at x and move along the geodesic
                    match geometry {
                        Curvature::Positive => {
                            let dot: f64 = x.iter().zip(&v).map(|(a, b)| a * b).sum();
                            v.iter_mut().zip(&x).for_each(|(b, a)| *b -= dot * a);
                            let len = v.iter().map(|b| b * b).sum::<f64>().sqrt();
                            if len > 0.0 {
                                let (s, co) = len.sin_cos();
                                x.iter_mut().zip(&v).for_each(|(a, b)| *a = co * *a + s * b / len);
                            }
                            let norm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
                            x.iter_mut().for_each(|a| *a /= norm);
                        }
                        _ => {
                            // Minkowski product <x, v> = -x0 v0 + sum xi vi
                            let dot = -x[0] * v[0] + x[1..].iter().zip(&v[1..]).map(|(a, b)| a * b).sum::<f64>();
                            v.iter_mut().zip(&x).for_each(|(b, a)| *b += dot * a);
                            let len2 = -v[0] * v[0] + v[1..].iter().map(|b| b * b).sum::<f64>();
                            let len = len2.max(0.0).sqrt();
                            if len > 0.0 {
                                let (s, co) = (len.sinh(), len.cosh());
                                x.iter_mut().zip(&v).for_each(|(a, b)| *a = co * *a + s * b / len);
                            }
                            x[0] = (1.0 + x[1..].iter().map(|a| a * a).sum::<f64>()).sqrt();
                        }
                    }
                }
                out.push(match geometry {
                    Curvature::Positive => x[0].clamp(-1.0, 1.0).acos(),
                    _ => x[0].max(1.0).acosh(),
                });
            }
            out
        })
        .collect();
    Ok(samples)
}

/// Reference heat kernel `h_t(r)` for the samplers: spectral on spheres,
/// closed form on complex-type spaces.
pub fn reference_kernel(space: &SpaceSpec, r: f64, t: f64) -> Result<f64> {
    if space.curvature == Curvature::Positive && matches!(space.kind, SpaceKind::Sphere | SpaceKind::Circle | SpaceKind::CompactGroupSu2) {
        return Ok(heat_kernel_sphere(space.dim, r, t, 1e-14)?.0);
    }
    if is_complex_type(space) {
        return heat_kernel_complex_group(space, r, t);
    }
    Err(Error::UnsupportedSpace(format!("no reference kernel for {}", space.name)))
}

/// `P(d(o, B_t) <= r)` tabulated on `[0, r_max]`.
pub fn reference_radial_cdf(space: &SpaceSpec, t: f64, r_max: f64, points: usize) -> Result<RadialFunction> {
    let profile = space.rank_one()?;
    let area = unit_sphere_area(space.dim);
    let gl = GaussLegendre::new(8);
    let grid = linspace(0.0, r_max, points);
    let mut acc = 0.0;
    let mut values = vec![0.0; points];
    for i in 1..points {
        let mut err = None;
        acc += gl.integrate(grid[i - 1], grid[i], |r| match reference_kernel(space, r, t) {
            Ok(h) => h * profile.delta(r) * area,
            Err(e) => {
                err = Some(e);
                0.0
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        values[i] = acc;
    }
    RadialFunction::new(grid, values, MeasureWeight::None)
}

/// Kolmogorov-Smirnov distance between samples and a tabulated CDF; the
/// CDF is taken as 1 past its last grid point.
pub fn ks_distance(samples: &[f64], cdf: &RadialFunction) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let last = *cdf.grid().last().unwrap_or(&0.0);
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = if x >= last { 1.0 } else { cdf.interpolate(x) };
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    /// Bin edges of the radial histogram.
    pub edges: Vec<f64>,
    /// Bin midpoints.
    pub grid: Vec<f64>,
    /// Bin average of the wrapped kernel `h_t` against Riemannian volume.
    pub density: Vec<f64>,
    pub stderr: Vec<f64>,
    /// `(sum w)^2 / sum w^2` over surviving paths.
    pub effective_samples: f64,
    /// Fraction of paths killed at the wall.
    pub killed_mass: f64,
    /// Total estimated mass in the histogram range.
    pub mass: f64,
    pub weight_range: (f64, f64),
    pub weight_bounds: (f64, f64),
    pub seed: u64,
    pub steps: usize,
    pub samples: usize,
}

#[derive(Default, Clone)]
struct Tally {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    w: f64,
    w_sq: f64,
    killed: usize,
    w_min: f64,
    w_max: f64,
    r_max: f64,
}

impl Tally {
    fn new(bins: usize) -> Self {
        Self {
            sum: vec![0.0; bins],
            sum_sq: vec![0.0; bins],
            w_min: f64::INFINITY,
            w_max: f64::NEG_INFINITY,
            ..Self::default()
        }
    }

    fn merge(mut self, other: Tally) -> Tally {
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            *a += b;
        }
        self.w += other.w;
        self.w_sq += other.w_sq;
        self.killed += other.killed;
        self.w_min = self.w_min.min(other.w_min);
        self.w_max = self.w_max.max(other.w_max);
        self.r_max = self.r_max.max(other.r_max);
        self
    }
}

/// Feynman-Kac estimate of the wrapped kernel from flat Brownian paths on
/// the tangent space. Each path carries `exp(-1/2 int_0^t Omega*(|zeta_s|) ds)`
/// (trapezoidal rule); a path reaching `fundamental_radius - WALL_BUFFER`
/// is killed. The endpoint law weighted by `w j(r)` is histogrammed on the
/// bins given by `edges` and divided by the volume of each shell.
pub fn flat_walk_feynman_kac(space: &SpaceSpec, config: &WalkConfig, edges: &[f64]) -> Result<MCEstimate> {
    config.validate(space)?;
    if space.curvature != Curvature::Positive {
        return Err(Error::UnsupportedSpace(format!("{} is not compact", space.name)));
    }
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) || edges[0] < 0.0 {
        return Err(Error::Domain("bin edges must be increasing and non-negative".into()));
    }
    let profile = space.rank_one()?;
    let potential = match config.potential {
        PotentialMode::Space => RadialPotential::new(space)?,
        PotentialMode::Zero => RadialPotential::zero(),
    };
    let kill = space.fundamental_radius - WALL_BUFFER;
    if edges[edges.len() - 1] > kill {
        return Err(Error::Domain(format!("bins reach past the killing radius {kill}")));
    }
    let n = space.dim;
    let dt = config.dt();
    let sd = dt.sqrt();
    let bins = edges.len() - 1;

    let tally = chunks(config.sample_count)
        .map(|(c, len)| -> Result<Tally> {
            let mut rng = stream(config.seed, c);
            let mut tally = Tally::new(bins);
            let mut x = vec![0.0; n];
            'paths: for _ in 0..len {
                x.iter_mut().for_each(|a| *a = 0.0);
                let mut prev = potential.eval(0.0);
                let mut integral = 0.0;
                let mut r = 0.0f64;
                let mut r_max = 0.0f64;
                for _ in 0..config.step_count {
                    for xi in x.iter_mut() {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        *xi += sd * z;
                    }
                    r = x.iter().map(|a| a * a).sum::<f64>().sqrt();
                    r_max = r_max.max(r);
                    if r >= kill {
                        tally.killed += 1;
                        continue 'paths;
                    }
                    let cur = potential.eval(r);
                    integral += 0.5 * dt * (prev + cur);
                    prev = cur;
                }
                let w = (-0.5 * integral).exp();
                tally.w += w;
                tally.w_sq += w * w;
                tally.w_min = tally.w_min.min(w);
                tally.w_max = tally.w_max.max(w);
                tally.r_max = tally.r_max.max(r_max);
                if r >= edges[0] && r < edges[bins] {
                    let k = edges.partition_point(|&e| e <= r) - 1;
                    let v = w * profile.j(r)?;
                    tally.sum[k] += v;
                    tally.sum_sq[k] += v * v;
                }
            }
            Ok(tally)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(Tally::new(bins), Tally::merge);

    let total = config.sample_count as f64;
    let killed_mass = tally.killed as f64 / total;
    if killed_mass > 0.01 {
        return Err(Error::Reliability(format!(
            "{:.2}% of paths were killed at r = {kill:.3}; reduce t",
            100.0 * killed_mass
        )));
    }
    // Omega* range over the visited ball gives the admissible weights
    let mut om_min = f64::INFINITY;
    let mut om_max = f64::NEG_INFINITY;
    for r in linspace(0.0, tally.r_max.min(kill), 2001) {
        let v = potential.eval(r);
        om_min = om_min.min(v);
        om_max = om_max.max(v);
    }
    let bounds = ((-0.5 * om_max * config.t).exp(), (-0.5 * om_min * config.t).exp());
    let slack = 1e-12;
    if tally.killed < config.sample_count
        && (tally.w_min < bounds.0 * (1.0 - slack) || tally.w_max > bounds.1 * (1.0 + slack))
    {
        return Err(Error::Reliability(format!(
            "weights [{}, {}] fall outside [{}, {}]",
            tally.w_min, tally.w_max, bounds.0, bounds.1
        )));
    }

    let gl = GaussLegendre::new(16);
    let area = unit_sphere_area(n);
    let mut density = Vec::with_capacity(bins);
    let mut stderr = Vec::with_capacity(bins);
    let mut mass = 0.0;
    for k in 0..bins {
        let volume = area * gl.integrate(edges[k], edges[k + 1], |r| profile.delta(r));
        let mean = tally.sum[k] / total;
        let var = (tally.sum_sq[k] / total - mean * mean).max(0.0);
        density.push(mean / volume);
        stderr.push((var / total).sqrt() / volume);
        mass += mean;
    }
    Ok(MCEstimate {
        grid: edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect(),
        edges: edges.to_vec(),
        density,
        stderr,
        effective_samples: if tally.w_sq > 0.0 { tally.w * tally.w / tally.w_sq } else { 0.0 },
        killed_mass,
        mass,
        weight_range: (tally.w_min, tally.w_max),
        weight_bounds: bounds,
        seed: config.seed,
        steps: config.step_count,
        samples: config.sample_count,
    })
}

/// Shell average of the reference kernel over each bin.
pub fn reference_bin_averages(space: &SpaceSpec, t: f64, edges: &[f64]) -> Result<Vec<f64>> {
    let profile = space.rank_one()?;
    let gl = GaussLegendre::new(24);
    edges
        .windows(2)
        .map(|w| {
            let mut err = None;
            let num = gl.integrate(w[0], w[1], |r| match reference_kernel(space, r, t) {
                Ok(h) => h * profile.delta(r),
                Err(e) => {
                    err = Some(e);
                    0.0
                }
            });
            match err {
                Some(e) => Err(e),
                None => Ok(num / gl.integrate(w[0], w[1], |r| profile.delta(r))),
            }
        })
        .collect()
}

/// Largest `|estimate - reference| / stderr` over the bins.
pub fn max_sigma_deviation(estimate: &MCEstimate, reference: &[f64]) -> f64 {
    estimate
        .density
        .iter()
        .zip(&estimate.stderr)
        .zip(reference)
        .map(|((d, s), r)| (d - r).abs() / s)
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roots::{build_space, preset_by_name};
    use crate::special::flat_heat_kernel;

    #[test]
    fn config_validation() {
        let s2 = build_space(SpaceKind::Sphere, 2).unwrap();
        let cfg = WalkConfig::new(Scheme::GeodesicWalk, 1.0, 10, 100, 1);
        assert!(matches!(geodesic_walk(&s2, &cfg), Err(Error::Config(_))));
        let cfg = WalkConfig::new(Scheme::GeodesicWalk, 1.0, 200, 0, 1);
        assert!(matches!(geodesic_walk(&s2, &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn geodesic_walk_is_deterministic() {
        let s2 = build_space(SpaceKind::Sphere, 2).unwrap();
        let cfg = WalkConfig::new(Scheme::GeodesicWalk, 0.5, 100, 3000, 11);
        let a = geodesic_walk(&s2, &cfg).unwrap();
        let b = geodesic_walk(&s2, &cfg).unwrap();
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool.install(|| geodesic_walk(&s2, &cfg).unwrap());
        assert_eq!(a, c);
    }

    #[test]
    fn small_time_mean_square_displacement() {
        for space in [build_space(SpaceKind::Sphere, 2).unwrap(), build_space(SpaceKind::Hyperbolic, 3).unwrap()] {
            let cfg = WalkConfig::new(Scheme::GeodesicWalk, 0.01, 20, 100_000, 5);
            let s = geodesic_walk(&space, &cfg).unwrap();
            let msd = s.iter().map(|r| r * r).sum::<f64>() / s.len() as f64;
            let expected = space.dim as f64 * 0.01;
            assert!((msd / expected - 1.0).abs() < 0.02, "{} {msd}", space.name);
        }
    }

    #[test]
    fn geodesic_walk_matches_spectral_law() {
        let s2 = build_space(SpaceKind::Sphere, 2).unwrap();
        let cdf = reference_radial_cdf(&s2, 1.0, std::f64::consts::PI, 2001).unwrap();
        assert!((cdf.values().last().unwrap() - 1.0).abs() < 1e-10);
        let cfg = WalkConfig::new(Scheme::GeodesicWalk, 1.0, 200, 100_000, 7);
        let ks = ks_distance(&geodesic_walk(&s2, &cfg).unwrap(), &cdf);
        assert!(ks < 0.02, "{ks}");
    }

    #[test]
    fn flat_walk_without_potential_recovers_flat_kernel() {
        let s2 = build_space(SpaceKind::Sphere, 2).unwrap();
        let mut cfg = WalkConfig::new(Scheme::FlatWalkFk, 0.3, 100, 50_000, 3);
        cfg.potential = PotentialMode::Zero;
        let edges = linspace(0.1, 1.9, 10);
        let est = flat_walk_feynman_kac(&s2, &cfg, &edges).unwrap();
        assert_eq!(est.weight_range, (1.0, 1.0));
        // the wrapped estimate times shell volume over j equals the flat mass
        let gl = GaussLegendre::new(24);
        for k in 0..9 {
            let (a, b) = (edges[k], edges[k + 1]);
            let exact = gl.integrate(a, b, |r| flat_heat_kernel(2, r, 0.3) * s2.rank_one().unwrap().j(r).unwrap() * r)
                / gl.integrate(a, b, f64::sin);
            assert!((est.density[k] - exact).abs() < 3.0 * est.stderr[k], "bin {k}");
        }
    }

    #[test]
    fn su2_weights_are_constant() {
        let su2 = preset_by_name("SU2").unwrap();
        let cfg = WalkConfig::new(Scheme::FlatWalkFk, 0.3, 60, 4096, 9);
        let est = flat_walk_feynman_kac(&su2, &cfg, &linspace(0.1, 2.0, 8)).unwrap();
        let w = (0.5 * su2.rho_norm_sq() * 0.3).exp();
        assert!((est.weight_range.0 / w - 1.0).abs() < 1e-12);
        assert!((est.weight_range.1 / w - 1.0).abs() < 1e-12);
    }

    #[test]
    fn killing_is_reported() {
        let s2 = build_space(SpaceKind::Sphere, 2).unwrap();
        let cfg = WalkConfig::new(Scheme::FlatWalkFk, 3.0, 2000, 2000, 1);
        assert!(matches!(flat_walk_feynman_kac(&s2, &cfg, &linspace(0.1, 2.0, 5)), Err(Error::Reliability(_))));
    }
}
