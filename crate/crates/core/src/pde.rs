//! Radial Laplacians on the tangent space and on the space, the
//! `delta^{1/2}` conjugated form, the intertwining check and a
//! Crank-Nicolson solver for the perturbed radial heat equation
//! `du/dt = 1/2 (L_p - Omega*) u` on the tangent space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::RadialPotential;
use crate::quad::GaussLegendre;
use crate::radial::{MeasureWeight, RadialFn, RadialFunction};
use crate::roots::{Curvature, RankOneProfile, SpaceSpec};
use crate::special::{flat_heat_kernel, unit_sphere_area};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `L_p` on the tangent space, drift (n - 1)/r.
    Tangent,
    /// The radial part of the Laplace-Beltrami operator, drift sum m a cot(a r).
    Manifold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    /// `f'' + drift f'`
    Direct,
    /// `delta^{-1/2} (delta^{1/2} f)'' - V f` with `V = delta^{-1/2} (delta^{1/2})''`
    Conjugated,
}

#[derive(Debug, Clone)]
pub struct RadialOperator<'a> {
    pub space: &'a SpaceSpec,
    pub side: Side,
    pub form: Form,
}

impl<'a> RadialOperator<'a> {
    pub fn new(space: &'a SpaceSpec, side: Side, form: Form) -> Self {
        Self { space, side, form }
    }

    fn profile(&self) -> Result<RankOneProfile> {
        let mut p = self.space.rank_one()?;
        if self.side == Side::Tangent {
            p.curvature = Curvature::Flat;
        }
        Ok(p)
    }
}

/// Finite-difference weights for the derivatives of order 0..=`order` at
/// `x0` from the nodes `xs` (Fornberg's recursion). Returns `w[k][j]`.
fn fd_weights(x0: f64, xs: &[f64], order: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; order + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// First and second derivatives of samples on a uniform grid, 4th order.
/// With `even` the data is extended evenly through r = 0, which must then be
/// a grid point or lie half a step before the first point.
fn derivatives(grid: &[f64], values: &[f64], even: bool) -> (Vec<f64>, Vec<f64>) {
    let n = grid.len();
    let h = grid[1] - grid[0];
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    let sample = |k: isize| -> Option<(f64, f64)> {
        if k >= 0 && (k as usize) < n {
            return Some((grid[k as usize], values[k as usize]));
        }
        if k < 0 && even {
            // mirror: -x_k = x_m  for m = -k (node at 0) or m = -k - 1 (cell centred)
            let m = if grid[0] == 0.0 { -k } else { -k - 1 };
            if (m as usize) < n {
                return Some((-grid[m as usize], values[m as usize]));
            }
        }
        None
    };
    for i in 0..n {
        let ii = i as isize;
        let central: Option<Vec<(f64, f64)>> = (-2..=2).map(|o| sample(ii + o)).collect();
        let nodes = match central {
            Some(nodes) => nodes,
            None => {
                // six one-sided nodes
                let start = if i < 3 { 0 } else { n - 6 };
                (start..start + 6).map(|k| (grid[k], values[k])).collect()
            }
        };
        let xs: Vec<f64> = nodes.iter().map(|p| p.0).collect();
        let w = fd_weights(grid[i], &xs, 2);
        d1[i] = nodes.iter().zip(&w[1]).map(|(p, c)| p.1 * c).sum();
        d2[i] = nodes.iter().zip(&w[2]).map(|(p, c)| p.1 * c).sum();
    }
    let _ = h;
    (d1, d2)
}

fn check_uniform(grid: &[f64]) -> Result<f64> {
    if grid.len() < 6 {
        return Err(Error::Resolution("finite differences need at least 6 grid points".into()));
    }
    let h = grid[1] - grid[0];
    if grid.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h) {
        return Err(Error::Domain("finite differences need a uniform grid".into()));
    }
    Ok(h)
}

fn check_walls(op: &RadialOperator<'_>, grid: &[f64]) -> Result<()> {
    if op.side == Side::Manifold && op.space.curvature == Curvature::Positive {
        let last = grid[grid.len() - 1];
        if last >= op.space.fundamental_radius {
            return Err(Error::Domain(format!(
                "grid reaches r = {last}, at or past the wall at {}",
                op.space.fundamental_radius
            )));
        }
    }
    Ok(())
}

/// `(log delta^{1/2})'` and `(log delta^{1/2})''` of a rank-one profile.
fn half_log_density_derivs(p: &RankOneProfile, r: f64) -> (f64, f64) {
    if p.terms.is_empty() || p.curvature == Curvature::Flat {
        let k = (p.dim as f64 - 1.0) / 2.0;
        return (k / r, -k / (r * r));
    }
    let mut d1 = 0.0;
    let mut d2 = 0.0;
    for &(a, m) in &p.terms {
        let x = a * r;
        let half = m as f64 / 2.0;
        match p.curvature {
            Curvature::Positive => {
                d1 += half * a / x.tan();
                d2 -= half * a * a / x.sin().powi(2);
            }
            _ => {
                d1 += half * a / x.tanh();
                d2 -= half * a * a / x.sinh().powi(2);
            }
        }
    }
    (d1, d2)
}

/// `V = delta^{-1/2} (delta^{1/2})''` in closed form; on S^2 this is
/// `-1/4 - 1/(4 sin^2 theta)` and on R^2 `-1/(4 r^2)`.
pub fn conjugation_potential(space: &SpaceSpec, side: Side, r: f64) -> Result<f64> {
    let op = RadialOperator::new(space, side, Form::Conjugated);
    let (d1, d2) = half_log_density_derivs(&op.profile()?, r);
    Ok(d2 + d1 * d1)
}

/// `V` by a sixth-order central difference of `delta^{1/2}` with step h.
pub fn conjugation_potential_fd(space: &SpaceSpec, side: Side, r: f64, h: f64) -> Result<f64> {
    let p = RadialOperator::new(space, side, Form::Conjugated).profile()?;
    let root = |x: f64| {
        if p.curvature == Curvature::Flat {
            x.powf((p.dim as f64 - 1.0) / 2.0)
        } else {
            p.delta(x).sqrt()
        }
    };
    if r - 3.0 * h <= 0.0 {
        return Err(Error::Domain(format!("stencil at r = {r} crosses the origin")));
    }
    let c = [1.0 / 90.0, -3.0 / 20.0, 3.0 / 2.0, -49.0 / 18.0, 3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0];
    let d2: f64 = (0..7).map(|k| c[k] * root(r + (k as f64 - 3.0) * h)).sum::<f64>() / (h * h);
    Ok(d2 / root(r))
}

/// Applies a radial Laplacian to samples on a uniform grid with 4th-order
/// differences. Grids starting at 0 (or half a step from it) are extended
/// evenly through the origin, where the value is `n f''(0)`.
pub fn apply_radial_laplacian(op: &RadialOperator<'_>, f: &RadialFunction) -> Result<RadialFunction> {
    let grid = f.grid();
    let h = check_uniform(grid)?;
    check_walls(op, grid)?;
    let profile = op.profile()?;
    let n = profile.dim as f64;
    let even = grid[0] == 0.0 || (grid[0] - h / 2.0).abs() < 1e-12 * h;

    let values = match op.form {
        Form::Direct => {
            let (d1, d2) = derivatives(grid, f.values(), even);
            grid.iter()
                .enumerate()
                .map(|(i, &r)| {
                    if r == 0.0 {
                        n * d2[i]
                    } else {
                        let drift = match op.side {
                            Side::Tangent => profile.tangent_drift(r),
                            Side::Manifold => profile.manifold_drift(r),
                        };
                        d2[i] + drift * d1[i]
                    }
                })
                .collect::<Vec<_>>()
        }
        Form::Conjugated => {
            if grid[0] <= 0.0 {
                return Err(Error::Domain("the conjugated form needs a grid away from r = 0".into()));
            }
            let half_density: Vec<f64> = grid
                .iter()
                .map(|&r| {
                    if profile.curvature == Curvature::Flat {
                        r.powf((n - 1.0) / 2.0)
                    } else {
                        profile.delta(r).sqrt()
                    }
                })
                .collect();
            let g: Vec<f64> = half_density.iter().zip(f.values()).map(|(d, v)| d * v).collect();
            let (_, g2) = derivatives(grid, &g, false);
            grid.iter()
                .enumerate()
                .map(|(i, &r)| {
                    let (d1, d2) = half_log_density_derivs(&profile, r);
                    g2[i] / half_density[i] - (d2 + d1 * d1) * f.values()[i]
                })
                .collect()
        }
    };
    RadialFunction::new(grid.to_vec(), values, f.measure_weight)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntertwiningResidual {
    /// `sup |L_M Phi(u) - Phi((L_p - Omega*) u)| / sup |Phi((L_p - Omega*) u)|`
    pub relative: f64,
    pub absolute: f64,
}

/// Compares `L_M Phi(u)` with `Phi((L_p - Omega*) u)` on a uniform grid.
/// u must vanish (below 1e-10 of its peak) at the wall of the fundamental
/// domain; `Phi(u) = u / j` there.
pub fn check_intertwining(space: &SpaceSpec, u: &dyn RadialFn, grid: &[f64]) -> Result<IntertwiningResidual> {
    let profile = space.rank_one()?;
    let potential = RadialPotential::new(space)?;
    check_uniform(grid)?;
    let peak = grid.iter().fold(0.0f64, |m, &r| m.max(u.eval(r).abs()));
    let wall = space.fundamental_radius;
    if wall.is_finite() && u.eval(wall).abs() > 1e-10 * peak {
        return Err(Error::Domain(format!(
            "test function does not vanish at the wall r = {wall}"
        )));
    }
    if peak == 0.0 {
        return Ok(IntertwiningResidual { relative: 0.0, absolute: 0.0 });
    }
    let uf = RadialFunction::from_fn(grid, MeasureWeight::Delta0, |r| u.eval(r))?;
    let bent = RadialFunction::try_from_fn(grid, MeasureWeight::Delta, |r| Ok(u.eval(r) / profile.j(r)?))?;
    let lhs = apply_radial_laplacian(&RadialOperator::new(space, Side::Manifold, Form::Direct), &bent)?;
    let lu = apply_radial_laplacian(&RadialOperator::new(space, Side::Tangent, Form::Direct), &uf)?;
    let mut abs = 0.0f64;
    let mut scale = 0.0f64;
    for (i, &r) in grid.iter().enumerate() {
        let rhs = (lu.values()[i] - potential.eval(r) * uf.values()[i]) / profile.j(r)?;
        abs = abs.max((lhs.values()[i] - rhs).abs());
        scale = scale.max(rhs.abs());
    }
    Ok(IntertwiningResidual { relative: abs / scale, absolute: abs })
}

/// `(L_p j) / j` by finite differences on the grid, the oracle for Omega*.
pub fn omega_star_fd(space: &SpaceSpec, grid: &[f64]) -> Result<RadialFunction> {
    let profile = space.rank_one()?;
    let j = RadialFunction::try_from_fn(grid, MeasureWeight::None, |r| profile.j(r))?;
    let lj = apply_radial_laplacian(&RadialOperator::new(space, Side::Tangent, Form::Direct), &j)?;
    let values = lj.values().iter().zip(j.values()).map(|(a, b)| a / b).collect();
    RadialFunction::new(grid.to_vec(), values, MeasureWeight::None)
}

/// Sup-norm of `dq/dt - 1/2 L_M q` over the grid at time t, relative to
/// `sup |dq/dt|`, with 4th-order differences in r and t (step `h`).
pub fn heat_equation_residual<F>(space: &SpaceSpec, q: F, grid: &[f64], t: f64, h: f64) -> Result<f64>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    let profile = space.rank_one()?;
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for &r in grid {
        if r - 2.0 * h < 0.0 {
            return Err(Error::Domain(format!("stencil at r = {r} crosses the origin")));
        }
        let c1 = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        let c2 = [-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];
        let mut dr = 0.0;
        let mut drr = 0.0;
        let mut dt = 0.0;
        for k in 0..5 {
            let o = k as f64 - 2.0;
            let v = q(r + o * h, t)?;
            dr += c1[k] * v / h;
            drr += c2[k] * v / (h * h);
            dt += c1[k] * q(r, t + o * h)? / h;
        }
        let lap = drr + profile.manifold_drift(r) * dr;
        worst = worst.max((dt - 0.5 * lap).abs());
        scale = scale.max(dt.abs());
    }
    Ok(worst / scale)
}

/// Cell-centred radial grid on [0, wall].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdeGrid {
    pub wall: f64,
    pub cells: usize,
}

/// Distance kept between the absorbing wall and the cut locus.
pub const WALL_BUFFER: f64 = 0.05;

impl PdeGrid {
    /// Wall at `fundamental_radius - WALL_BUFFER` on compact spaces and far
    /// in the Gaussian tail otherwise; spacing close to `dx`.
    pub fn for_space(space: &SpaceSpec, t_total: f64, dx: f64) -> Self {
        let wall = if space.fundamental_radius.is_finite() {
            space.fundamental_radius - WALL_BUFFER
        } else {
            (12.0 * t_total.sqrt()).max(2.0)
        };
        Self { wall, cells: (wall / dx).round().max(8.0) as usize }
    }

    pub fn spacing(&self) -> f64 {
        self.wall / self.cells as f64
    }

    pub fn centres(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.cells).map(|i| (i as f64 + 0.5) * h).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialMode {
    /// `-Omega*` of the space.
    Space,
    /// No potential: the flat heat equation.
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdeConfig {
    pub grid: PdeGrid,
    pub dt: f64,
    /// Width of the initial flat kernel; the solution approximates the
    /// kernel at `t0 + t_final`.
    pub t0: f64,
    /// Multiply the initial kernel by `exp(-t0/2 * mean of Omega* on the
    /// segment [0, r])`, the first-order small-time correction.
    pub parametrix: bool,
    pub potential: PotentialMode,
}

impl PdeConfig {
    pub fn new(space: &SpaceSpec, t_final: f64, dx: f64, dt: f64) -> Self {
        Self {
            grid: PdeGrid::for_space(space, t_final + 1e-3, dx),
            dt,
            t0: 1e-3,
            parametrix: true,
            potential: PotentialMode::Space,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeSolution {
    /// The tangent-space perturbed kernel at `t0 + t_final` on the cell
    /// centres, a density against Lebesgue measure on the tangent space.
    pub u: RadialFunction,
    pub t_total: f64,
    pub steps: usize,
    /// Fraction of the initial mass that left through the wall.
    pub boundary_loss: f64,
}

impl PdeSolution {
    /// `Phi(u) = u / j` at the cell centres.
    pub fn wrapped(&self, space: &SpaceSpec) -> Result<RadialFunction> {
        let profile = space.rank_one()?;
        let values = self
            .u
            .grid()
            .iter()
            .zip(self.u.values())
            .map(|(&r, &v)| Ok(v / profile.j(r)?))
            .collect::<Result<Vec<_>>>()?;
        RadialFunction::new(self.u.grid().to_vec(), values, MeasureWeight::Delta)
    }
}

/// Crank-Nicolson finite-volume solution of `du/dt = 1/2 (L_p - Omega*) u`
/// with reflection at 0 and an absorbing wall.
pub fn solve_perturbed_heat(space: &SpaceSpec, t_final: f64, config: &PdeConfig) -> Result<PdeSolution> {
    if !(t_final > 0.0) || !(config.dt > 0.0) || !(config.t0 > 0.0) {
        return Err(Error::Domain("t_final, dt and t0 must be positive".into()));
    }
    if config.grid.wall > space.fundamental_radius {
        return Err(Error::Domain(format!(
            "wall at {} lies past the fundamental domain radius {}",
            config.grid.wall, space.fundamental_radius
        )));
    }
    let n_dim = space.dim as i32;
    let potential = match config.potential {
        PotentialMode::Space => RadialPotential::new(space)?,
        PotentialMode::Zero => RadialPotential::zero(),
    };
    let steps = (t_final / config.dt).round().max(1.0) as usize;
    let dt = t_final / steps as f64;
    let h = config.grid.spacing();
    let m = config.grid.cells;
    let centres = config.grid.centres();

    // volume of cell i and conductance of face i + 1/2, per unit solid angle
    let face = |i: usize| ((i as f64 + 1.0) * h).powi(n_dim - 1) / h;
    let volume: Vec<f64> = (0..m)
        .map(|i| (((i as f64 + 1.0) * h).powi(n_dim) - (i as f64 * h).powi(n_dim)) / n_dim as f64)
        .collect();
    // A u = 1/2 (flux divergence - Omega* u)
    let mut lower = vec![0.0; m];
    let mut diag = vec![0.0; m];
    let mut upper = vec![0.0; m];
    for i in 0..m {
        let right = if i + 1 < m { face(i) } else { 2.0 * face(i) };
        let left = if i > 0 { face(i - 1) } else { 0.0 };
        diag[i] = -0.5 * (left + right) / volume[i] - 0.5 * potential.eval(centres[i]);
        if i > 0 {
            lower[i] = 0.5 * left / volume[i];
        }
        if i + 1 < m {
            upper[i] = 0.5 * right / volume[i];
        }
    }
    let wall_conductance = 0.5 * 2.0 * face(m - 1);

    let gl = GaussLegendre::new(16);
    let mut u: Vec<f64> = centres
        .iter()
        .map(|&r| {
            let base = flat_heat_kernel(space.dim, r, config.t0);
            if config.parametrix && config.potential == PotentialMode::Space {
                let mean = gl.integrate(0.0, 1.0, |s| potential.eval(s * r));
                base * (-0.5 * config.t0 * mean).exp()
            } else {
                base
            }
        })
        .collect();
    let mass = |u: &[f64]| u.iter().zip(&volume).map(|(a, b)| a * b).sum::<f64>();
    let initial_mass = mass(&u);

    // (I - dt/2 A) u_new = (I + dt/2 A) u
    let a_l: Vec<f64> = lower.iter().map(|x| -0.5 * dt * x).collect();
    let a_d: Vec<f64> = diag.iter().map(|x| 1.0 - 0.5 * dt * x).collect();
    let a_u: Vec<f64> = upper.iter().map(|x| -0.5 * dt * x).collect();
    let mut rhs = vec![0.0; m];
    let mut scratch = vec![0.0; m];
    let mut lost = 0.0;
    for _ in 0..steps {
        for i in 0..m {
            let mut v = (1.0 + 0.5 * dt * diag[i]) * u[i];
            if i > 0 {
                v += 0.5 * dt * lower[i] * u[i - 1];
            }
            if i + 1 < m {
                v += 0.5 * dt * upper[i] * u[i + 1];
            }
            rhs[i] = v;
        }
        let before = u[m - 1];
        thomas(&a_l, &a_d, &a_u, &rhs, &mut u, &mut scratch);
        lost += dt * wall_conductance * 0.5 * (before + u[m - 1]);
    }
    let boundary_loss = lost / initial_mass;
    if boundary_loss > 5e-3 {
        return Err(Error::Reliability(format!(
            "{:.3}% of the mass left through the wall at {}; reduce t",
            100.0 * boundary_loss,
            config.grid.wall
        )));
    }
    let area = unit_sphere_area(space.dim);
    let _ = area;
    Ok(PdeSolution {
        u: RadialFunction::new(centres, u, MeasureWeight::Delta0)?,
        t_total: config.t0 + t_final,
        steps,
        boundary_loss,
    })
}

/// Tridiagonal solve; `c_prime` is scratch space.
fn thomas(a: &[f64], b: &[f64], c: &[f64], d: &[f64], x: &mut [f64], c_prime: &mut [f64]) {
    let n = b.len();
    c_prime[0] = c[0] / b[0];
    x[0] = d[0] / b[0];
    for i in 1..n {
        let denom = b[i] - a[i] * c_prime[i - 1];
        c_prime[i] = c[i] / denom;
        x[i] = (d[i] - a[i] * x[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        x[i] -= c_prime[i] * x[i + 1];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::omega_star;
    use crate::radial::linspace;
    use crate::roots::{build_space, preset_by_name, SpaceKind};
    use std::f64::consts::PI;

    #[test]
    fn fornberg_reproduces_central_stencil() {
        let w = fd_weights(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 2);
        let expected = [-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];
        for (a, b) in w[2].iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn s2_eigenfunction() {
        let s2 = build_space(SpaceKind::Sphere, 2).unwrap();
        let grid = linspace(0.0, 3.0, 3001);
        let f = RadialFunction::from_fn(&grid, MeasureWeight::Delta, f64::cos).unwrap();
        let lf = apply_radial_laplacian(&RadialOperator::new(&s2, Side::Manifold, Form::Direct), &f).unwrap();
        for (&r, &v) in grid.iter().zip(lf.values()) {
            assert!((v + 2.0 * r.cos()).abs() < 1e-8, "r={r} {v}");
        }
    }

    #[test]
    fn tangent_quadratic() {
        let r2 = build_space(SpaceKind::Euclidean, 2).unwrap();
        let grid = linspace(0.0, 2.0, 201);
        let f = RadialFunction::from_fn(&grid, MeasureWeight::None, |r| r * r).unwrap();
        let lf = apply_radial_laplacian(&RadialOperator::new(&r2, Side::Tangent, Form::Direct), &f).unwrap();
        assert!(lf.values().iter().all(|v| (v - 4.0).abs() < 1e-8));
    }

    #[test]
    fn conjugated_form_agrees_with_direct_form() {
        for name in ["S2", "S3", "H2", "CP2"] {
            let s = preset_by_name(name).unwrap();
            let grid = linspace(0.3, 1.4, 1101);
            let f = RadialFunction::from_fn(&grid, MeasureWeight::None, |r| (r * 1.3).sin() + (-(r - 0.7).powi(2)).exp()).unwrap();
            for side in [Side::Tangent, Side::Manifold] {
                let a = apply_radial_laplacian(&RadialOperator::new(&s, side, Form::Direct), &f).unwrap();
                let b = apply_radial_laplacian(&RadialOperator::new(&s, side, Form::Conjugated), &f).unwrap();
                let diff = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                assert!(diff < 1e-6, "{name} {side:?} {diff}");
            }
        }
    }

    #[test]
    fn potential_identities() {
        let s2 = build_space(SpaceKind::Sphere, 2).unwrap();
        let r2 = build_space(SpaceKind::Euclidean, 2).unwrap();
        for th in [0.4, 1.0, 2.0, 2.7] {
            let closed = -0.25 - 0.25 / f64::sin(th).powi(2);
            assert!((conjugation_potential(&s2, Side::Manifold, th).unwrap() - closed).abs() < 1e-12);
            let fd = conjugation_potential_fd(&s2, Side::Manifold, th, 0.004).unwrap();
            assert!((fd - closed).abs() < 1e-10, "{th} {fd} {closed}");
            let flat = -0.25 / (th * th);
            assert!((conjugation_potential(&r2, Side::Tangent, th).unwrap() - flat).abs() < 1e-12);
            let fd = conjugation_potential_fd(&r2, Side::Tangent, th, 0.004).unwrap();
            assert!((fd - flat).abs() < 1e-10, "{th} {fd} {flat}");
        }
    }

    #[test]
    fn wall_and_grid_checks() {
        let s2 = build_space(SpaceKind::Sphere, 2).unwrap();
        let grid = linspace(0.0, PI, 101);
        let f = RadialFunction::from_fn(&grid, MeasureWeight::None, f64::cos).unwrap();
        let op = RadialOperator::new(&s2, Side::Manifold, Form::Direct);
        assert!(matches!(apply_radial_laplacian(&op, &f), Err(Error::Domain(_))));
        let uneven = RadialFunction::new(vec![0.0, 0.1, 0.3, 0.4, 0.5, 0.6, 0.7], vec![1.0; 7], MeasureWeight::None).unwrap();
        assert!(apply_radial_laplacian(&op, &uneven).is_err());
    }

    #[test]
    fn omega_star_oracle_on_s2() {
        let s2 = build_space(SpaceKind::Sphere, 2).unwrap();
        let grid = linspace(0.0, 3.0, 3001);
        let fd = omega_star_fd(&s2, &grid).unwrap();
        for (&r, &v) in grid.iter().zip(fd.values()).step_by(50) {
            let exact = omega_star(&s2, &[r]).unwrap().value;
            assert!((v - exact).abs() < 1e-6 * exact.abs(), "r={r} {v} {exact}");
        }
    }

    #[test]
    fn intertwining_residuals() {
        let s2 = build_space(SpaceKind::Sphere, 2).unwrap();
        let bump = |r: f64| (-(r - PI / 2.0).powi(2) / (2.0 * 0.04)).exp();
        let grid = linspace(0.0, PI * 2047.0 / 2048.0, 2048);
        let res = check_intertwining(&s2, &bump, &grid).unwrap();
        assert!(res.relative < 1e-5, "{res:?}");
        let zero = |_: f64| 0.0;
        assert_eq!(check_intertwining(&s2, &zero, &grid).unwrap().relative, 0.0);
        let wide = |r: f64| (-(r - 2.5).powi(2)).exp();
        assert!(matches!(check_intertwining(&s2, &wide, &grid), Err(Error::Domain(_))));
    }

    #[test]
    fn flat_solver_matches_closed_form() {
        let r2 = build_space(SpaceKind::Euclidean, 2).unwrap();
        let mut cfg = PdeConfig::new(&r2, 0.5, 1e-3, 1e-4);
        cfg.potential = PotentialMode::Zero;
        let sol = solve_perturbed_heat(&r2, 0.5, &cfg).unwrap();
        let peak = flat_heat_kernel(2, 0.0, sol.t_total);
        let err = sol
            .u
            .grid()
            .iter()
            .zip(sol.u.values())
            .map(|(&r, &v)| (v - flat_heat_kernel(2, r, sol.t_total)).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-4 * peak, "{}", err / peak);
        assert!(sol.boundary_loss < 1e-10);
    }

    #[test]
    fn absorbing_wall_reports_loss() {
        let s2 = build_space(SpaceKind::Sphere, 2).unwrap();
        let cfg = PdeConfig::new(&s2, 3.0, 5e-3, 1e-2);
        assert!(matches!(solve_perturbed_heat(&s2, 3.0, &cfg), Err(Error::Reliability(_))));
    }
}
