//! The wrapping map on radial functions: the lattice sum
//! `Phi(j mu)(theta) = sum_k mu(theta + 2 pi k)` on compact rank-one spaces
//! and the bend `Phi(j phi) = phi` on non-compact ones.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radial::{MeasureWeight, RadialFn, RadialFunction};
use crate::roots::{Curvature, SpaceKind, SpaceSpec};
use crate::special::{flat_heat_kernel, sinc, sinhc};
use crate::spectral::{heat_kernel_compact, heat_kernel_complex_group};

pub const DEFAULT_LATTICE_TERMS: usize = 12;

/// How `(sin x / x)^{m/2}` is continued past the fundamental domain when m
/// is odd. Even multiplicities always use the signed integer power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    #[default]
    AbsJ,
    SignedJ,
    Maslov,
}

impl Branch {
    pub const ALL: [Branch; 3] = [Branch::AbsJ, Branch::SignedJ, Branch::Maslov];

    pub fn as_str(self) -> &'static str {
        match self {
            Branch::AbsJ => "abs_j",
            Branch::SignedJ => "signed_j",
            Branch::Maslov => "maslov",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Branch {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Branch::ALL
            .into_iter()
            .find(|b| b.as_str() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown branch policy '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WrapPolicy {
    /// The lattice sum runs over k in [-K, K].
    pub lattice_terms: usize,
    pub branch: Branch,
    /// Whether `wrapped_gaussian` converts its result to the standard
    /// kernel's scale with `apply_rho_shift`.
    pub shift_applied: bool,
}

impl Default for WrapPolicy {
    fn default() -> Self {
        Self {
            lattice_terms: DEFAULT_LATTICE_TERMS,
            branch: Branch::AbsJ,
            shift_applied: false,
        }
    }
}

impl WrapPolicy {
    pub fn with_branch(branch: Branch) -> Self {
        Self { branch, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if self.lattice_terms == 0 {
            return Err(Error::Config("lattice_terms must be at least 1".into()));
        }
        Ok(())
    }
}

fn lattice_profile(space: &SpaceSpec) -> Result<Vec<u32>> {
    if space.kind == SpaceKind::Circle {
        return Ok(Vec::new());
    }
    if space.curvature != Curvature::Positive || !space.is_rank_one() || space.roots.roots().len() != 1 {
        return Err(Error::UnsupportedSpace(format!(
            "lattice wrap is implemented for S^n, SU(2) and the circle, not {}",
            space.name
        )));
    }
    let root = &space.roots.roots()[0];
    if (space.roots.root_inner(0, 0) - 1.0).abs() > 1e-12 {
        return Err(Error::UnsupportedSpace(format!("{} does not use |alpha| = 1", space.name)));
    }
    Ok(vec![root.multiplicity])
}

/// j at the lattice translate x = theta + 2 pi k, continued per `branch`.
fn j_translate(mults: &[u32], x: f64, k: i64, branch: Branch) -> Result<f64> {
    let mut v = 1.0;
    for &m in mults {
        let ratio = sinc(x);
        if m % 2 == 0 {
            v *= ratio.powi(m as i32 / 2);
            continue;
        }
        let half = m as f64 / 2.0;
        v *= match branch {
            Branch::AbsJ => ratio.abs().powf(half),
            Branch::SignedJ => {
                if ratio < 0.0 {
                    return Err(Error::BranchObstruction { lattice_index: k, x });
                }
                ratio.powf(half)
            }
            Branch::Maslov => {
                let sign = if (k * m as i64).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                sign * ratio.abs().powf(half)
            }
        };
    }
    Ok(v)
}

/// `sum_{k=-K..K} (mu / j)(theta + 2 pi k)` on a compact rank-one space.
pub fn wrap_compact(space: &SpaceSpec, mu: &dyn RadialFn, theta: f64, policy: &WrapPolicy) -> Result<f64> {
    policy.validate()?;
    if !(theta > 0.0 && theta < PI) {
        return Err(Error::Domain(format!("theta must lie in (0, pi), got {theta}")));
    }
    let mults = lattice_profile(space)?;
    let kk = policy.lattice_terms as i64;
    let reach = theta.abs() + 2.0 * PI * kk as f64;
    let edge = mu.support_radius();
    if edge < reach && mu.eval(edge).abs() > 1e-14 * mu.eval(0.0).abs() {
        return Err(Error::Domain(format!(
            "mu is sampled up to r = {edge} but has not decayed there; the lattice sum needs r = {reach}"
        )));
    }
    let mut sum = 0.0;
    for k in -kk..=kk {
        let x = theta + 2.0 * PI * k as f64;
        let value = mu.eval(x);
        if value == 0.0 {
            continue;
        }
        sum += value / j_translate(&mults, x, k, policy.branch)?;
    }
    Ok(sum)
}

/// `(phi / j)(r)` on a non-compact space.
pub fn wrap_noncompact(space: &SpaceSpec, phi: &dyn RadialFn, r: f64) -> Result<f64> {
    if space.curvature != Curvature::Negative {
        return Err(Error::UnsupportedSpace(format!(
            "the bend applies to non-compact spaces, not {}",
            space.name
        )));
    }
    if r < 0.0 {
        return Err(Error::Domain(format!("r must be non-negative, got {r}")));
    }
    let j = space.rank_one()?.j(r)?;
    Ok(phi.eval(r) / j)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftDirection {
    ToStandard,
    ToShifted,
}

impl FromStr for ShiftDirection {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "to_standard" => Ok(Self::ToStandard),
            "to_shifted" => Ok(Self::ToShifted),
            other => Err(Error::Config(format!("unknown shift direction '{other}'"))),
        }
    }
}

/// Factor between the shifted kernel `Phi(p_t)` and the standard heat
/// kernel: `h_t = exp(s |rho|^2 t / 2) Phi(p_t)` with s the curvature sign,
/// exact on SU(2) and H^3.
pub fn apply_rho_shift(value: f64, space: &SpaceSpec, t: f64, direction: ShiftDirection) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    let exponent = space.curvature.sign() * space.rho_norm_sq() * t / 2.0;
    Ok(match direction {
        ShiftDirection::ToStandard => value * exponent.exp(),
        ShiftDirection::ToShifted => value * (-exponent).exp(),
    })
}

/// Reduces an angle to the geodesic distance in [0, pi].
pub fn fold_to_fundamental_domain(theta: f64) -> f64 {
    let x = theta.rem_euclid(2.0 * PI);
    if x > PI {
        2.0 * PI - x
    } else {
        x
    }
}

/// `Phi(p_t)` at geodesic distance theta, optionally rescaled to the
/// standard kernel when `policy.shift_applied` is set.
pub fn wrapped_gaussian(space: &SpaceSpec, theta: f64, t: f64, policy: &WrapPolicy) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    let n = space.dim;
    let p = move |r: f64| flat_heat_kernel(n, r, t);
    let value = match space.curvature {
        Curvature::Negative => wrap_noncompact(space, &p, theta)?,
        _ => wrap_compact(space, &p, theta, policy)?,
    };
    if policy.shift_applied {
        apply_rho_shift(value, space, t, ShiftDirection::ToStandard)
    } else {
        Ok(value)
    }
}

/// The standard heat kernel moved to the shifted scale:
/// `exp(-s |rho|^2 t / 2) h_t`.
pub fn shifted_kernel(space: &SpaceSpec, theta: f64, t: f64, tol: f64) -> Result<f64> {
    let h = match space.curvature {
        Curvature::Negative => heat_kernel_complex_group(space, theta, t)?,
        _ => heat_kernel_compact(space, theta, t, tol)?.0,
    };
    apply_rho_shift(h, space, t, ShiftDirection::ToShifted)
}

/// `wrapped_gaussian` over a grid, in parallel.
pub fn wrapped_gaussian_on_grid(space: &SpaceSpec, grid: &[f64], t: f64, policy: &WrapPolicy) -> Result<RadialFunction> {
    let values = grid
        .par_iter()
        .map(|&th| wrapped_gaussian(space, th, t, policy))
        .collect::<Result<Vec<_>>>()?;
    RadialFunction::new(grid.to_vec(), values, MeasureWeight::Delta)
}

/// j of a non-compact rank-one space, exposed for callers bending tabulated data.
pub fn bend_factor(r: f64) -> f64 {
    sinhc(r)
}
