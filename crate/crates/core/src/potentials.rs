//! The potential `Omega* = j^{-1} L_p j` of the wrapped Laplacian.
//!
//! With `T_c(x) = cosec^2 x - 1/x^2` and `T_n(x) = csch^2 x - 1/x^2`,
//!
//! ```text
//! Omega*(H) = -/+ |rho|^2 + sum_a m_a (m_a - 2)/4 |a|^2 T(a(H))
//!                        + sum_{a multipliable} m_a m_2a / 2 |a|^2 T(a(H))
//! ```
//!
//! (upper sign and `T_c` compact, lower sign and `T_n` non-compact). The
//! first sum runs over all positive roots, 2a included. The multipliable term
//! is the expansion of `m_a m_2a <a,2a> (cot a cot 2a)` after the constant
//! parts are folded into `|rho|^2`: `cot x cot 2x = T_c(x)/2 - 1 + 1/(2x^2)`.
//! On a Lie group (every m = 2, no multipliable roots) only the constant
//! survives.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::roots::{Curvature, RestrictedRootSystem, SpaceSpec};
use crate::special::{cosec2_minus_inv_sq, cosec2_series, csch2_minus_inv_sq, POTENTIAL_SERIES_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Generic,
    SeriesNearZero,
    SeriesNearWall,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialValue {
    pub value: f64,
    pub regime: Regime,
}

/// `cosec^2 x - 1/x^2` with the pole at pi resolved by the reflected series.
fn compact_t(x: f64) -> (f64, Regime) {
    let ax = x.abs();
    if ax < POTENTIAL_SERIES_THRESHOLD {
        (cosec2_minus_inv_sq(ax), Regime::SeriesNearZero)
    } else if PI - ax < POTENTIAL_SERIES_THRESHOLD {
        let y = PI - ax;
        (1.0 / (y * y) + cosec2_series(y) - 1.0 / (ax * ax), Regime::SeriesNearWall)
    } else {
        (cosec2_minus_inv_sq(ax), Regime::Generic)
    }
}

fn noncompact_t(x: f64) -> (f64, Regime) {
    let regime = if x.abs() < POTENTIAL_SERIES_THRESHOLD {
        Regime::SeriesNearZero
    } else {
        Regime::Generic
    };
    (csch2_minus_inv_sq(x.abs()), regime)
}

/// Coefficient of `T(alpha_i(H))` for every root.
fn coefficients(roots: &RestrictedRootSystem) -> Vec<f64> {
    (0..roots.roots().len())
        .map(|i| {
            let m = roots.roots()[i].multiplicity as f64;
            let norm_sq = roots.root_inner(i, i);
            let mut c = m * (m - 2.0) / 4.0 * norm_sq;
            if let Some(d) = roots.double_of(i) {
                let m2 = roots.roots()[d].multiplicity as f64;
                c += m * m2 / 2.0 * norm_sq;
            }
            c
        })
        .collect()
}

pub fn omega_star(space: &SpaceSpec, h: &[f64]) -> Result<PotentialValue> {
    let roots = &space.roots;
    if h.len() != roots.rank() {
        return Err(Error::Domain(format!(
            "H has {} coordinates but {} has rank {}",
            h.len(),
            space.name,
            roots.rank()
        )));
    }
    let rho2 = roots.rho_norm_sq();
    let (mut value, compact) = match space.curvature {
        Curvature::Positive => (-rho2, true),
        Curvature::Negative => (rho2, false),
        Curvature::Flat => {
            return Ok(PotentialValue { value: 0.0, regime: Regime::Generic });
        }
    };
    let mut regime = Regime::Generic;
    for (i, c) in coefficients(roots).into_iter().enumerate() {
        if c == 0.0 {
            continue;
        }
        let x = roots.pairing(i, h);
        if compact && x.abs() >= PI {
            return Err(Error::Pole { root: i, alpha_h: x });
        }
        let (t, r) = if compact { compact_t(x) } else { noncompact_t(x) };
        if !t.is_finite() {
            return Err(Error::Pole { root: i, alpha_h: x });
        }
        if r != Regime::Generic {
            regime = r;
        }
        value += c * t;
    }
    Ok(PotentialValue { value, regime })
}

/// Limit of Omega* at H = 0 for spaces without multipliable roots.
pub fn omega_star_limit(space: &SpaceSpec) -> Result<f64> {
    let roots = &space.roots;
    if !roots.multipliable().is_empty() {
        return Err(Error::UnsupportedSpace(format!(
            "{} has multipliable roots; evaluate omega_star near 0 instead",
            space.name
        )));
    }
    let f_limit: f64 = roots
        .roots()
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let m = r.multiplicity as f64;
            m * (m - 2.0) / 12.0 * roots.root_inner(i, i)
        })
        .sum();
    Ok(match space.curvature {
        Curvature::Positive => -roots.rho_norm_sq() + f_limit,
        Curvature::Negative => roots.rho_norm_sq() - f_limit,
        Curvature::Flat => 0.0,
    })
}

/// Omega* along the radial coordinate of a rank-one space, precomputed for
/// inner loops. Out-of-domain radii give infinities rather than errors.
#[derive(Debug, Clone)]
pub struct RadialPotential {
    constant: f64,
    compact: bool,
    terms: Vec<(f64, f64)>,
}

impl RadialPotential {
    pub fn new(space: &SpaceSpec) -> Result<Self> {
        let profile = space.rank_one()?;
        let compact = space.curvature == Curvature::Positive;
        let rho2 = space.rho_norm_sq();
        let constant = match space.curvature {
            Curvature::Positive => -rho2,
            Curvature::Negative => rho2,
            Curvature::Flat => 0.0,
        };
        let coeffs = if space.curvature == Curvature::Flat {
            Vec::new()
        } else {
            coefficients(&space.roots)
        };
        let terms = coeffs
            .into_iter()
            .zip(&profile.terms)
            .filter(|(c, _)| *c != 0.0)
            .map(|(c, &(scale, _))| (c, scale))
            .collect();
        Ok(Self { constant, compact, terms })
    }

    /// A potential that is identically zero.
    pub fn zero() -> Self {
        Self { constant: 0.0, compact: false, terms: Vec::new() }
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, r: f64) -> f64 {
        let mut v = self.constant;
        for &(c, a) in &self.terms {
            let x = a * r;
            v += c * if self.compact {
                if x.abs() >= PI {
                    return f64::NEG_INFINITY * c.signum();
                }
                compact_t(x).0
            } else {
                noncompact_t(x).0
            };
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentityKind {
    /// `1/(a(H) b(H))`
    Rational,
    /// `cot a(H) cot b(H) + 1`
    Compact,
    /// `coth a(H) coth b(H) - 1`
    Noncompact,
}

/// Sum over ordered pairs of non-proportional positive roots of
/// `m_a m_b <a, b> K(a(H), b(H))`; vanishes identically.
pub fn op_identity_residual(roots: &RestrictedRootSystem, h: &[f64], which: IdentityKind) -> f64 {
    let n = roots.roots().len();
    let xs: Vec<f64> = (0..n).map(|i| roots.pairing(i, h)).collect();
    let mut sum = 0.0;
    for i in 0..n {
        for k in 0..n {
            if i == k || roots.proportional(i, k) {
                continue;
            }
            let (a, b) = (xs[i], xs[k]);
            let kernel = match which {
                IdentityKind::Rational => 1.0 / (a * b),
                IdentityKind::Compact => 1.0 / (a.tan() * b.tan()) + 1.0,
                IdentityKind::Noncompact => 1.0 / (a.tanh() * b.tanh()) - 1.0,
            };
            let m = roots.roots()[i].multiplicity as f64 * roots.roots()[k].multiplicity as f64;
            sum += m * roots.root_inner(i, k) * kernel;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roots::{build_space, preset_by_name, SpaceKind};

    #[test]
    fn lie_groups_have_constant_potential() {
        let su2 = build_space(SpaceKind::CompactGroupSu2, 3).unwrap();
        let sl2c = build_space(SpaceKind::ComplexGroupRank1, 3).unwrap();
        let su3 = preset_by_name("SU3").unwrap();
        let sl3c = preset_by_name("SL3C").unwrap();
        for r in [1e-5, 0.3, 1.7, 3.0] {
            assert_eq!(omega_star(&su2, &[r]).unwrap().value, -1.0);
            assert_eq!(omega_star(&sl2c, &[r]).unwrap().value, 1.0);
            assert_eq!(omega_star(&su3, &[r, 0.3 * r]).unwrap().value, -su3.rho_norm_sq());
            assert_eq!(omega_star(&sl3c, &[r, 0.3 * r]).unwrap().value, sl3c.rho_norm_sq());
        }
        assert!((su3.rho_norm_sq() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn s2_value_at_quarter_turn() {
        let s2 = build_space(SpaceKind::Sphere, 2).unwrap();
        let v = omega_star(&s2, &[PI / 2.0]).unwrap();
        assert!((v.value - (-0.5 + 1.0 / (PI * PI))).abs() < 1e-15);
        assert_eq!(v.regime, Regime::Generic);
        let near = omega_star(&s2, &[1e-6]).unwrap();
        assert_eq!(near.regime, Regime::SeriesNearZero);
        assert!((near.value + 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn poles_are_reported() {
        let s2 = build_space(SpaceKind::Sphere, 2).unwrap();
        assert!(matches!(omega_star(&s2, &[PI]), Err(Error::Pole { root: 0, .. })));
        let near_wall = omega_star(&s2, &[PI - 1e-4]).unwrap();
        assert_eq!(near_wall.regime, Regime::SeriesNearWall);
        // the divergence of the S2 potential at the cut locus is -1/(4 y^2)
        assert!((near_wall.value * 1e-8 + 0.25).abs() < 1e-6);
        let cp2 = preset_by_name("CP2").unwrap();
        assert!(matches!(omega_star(&cp2, &[PI / 2.0]), Err(Error::Pole { root: 1, .. })));
    }

    #[test]
    fn limits() {
        for n in 2..8 {
            let s = build_space(SpaceKind::Sphere, n).unwrap();
            let h = build_space(SpaceKind::Hyperbolic, n).unwrap();
            let nf = n as f64;
            assert!((omega_star_limit(&s).unwrap() - nf * (1.0 - nf) / 6.0).abs() < 1e-14);
            assert!((omega_star_limit(&h).unwrap() - nf * (nf - 1.0) / 6.0).abs() < 1e-14);
        }
        assert!(omega_star_limit(&preset_by_name("CP2").unwrap()).is_err());
    }

    #[test]
    fn radial_potential_matches_omega_star() {
        for name in ["S2", "S5", "H2", "H4", "CP3", "HH2", "OP2"] {
            let s = preset_by_name(name).unwrap();
            let p = RadialPotential::new(&s).unwrap();
            for r in [1e-4, 0.2, 0.9, 1.4] {
                let a = omega_star(&s, &[r]).unwrap().value;
                assert!((p.eval(r) - a).abs() < 1e-13 * (1.0 + a.abs()), "{name} {r}");
            }
        }
    }

    #[test]
    fn identity_residuals_vanish_on_a2() {
        let su3 = preset_by_name("SU3").unwrap();
        for h in [[0.37, 0.11], [1.1, 0.42], [-0.3, 0.9]] {
            for kind in [IdentityKind::Rational, IdentityKind::Compact, IdentityKind::Noncompact] {
                let res = op_identity_residual(&su3.roots, &h, kind);
                assert!(res.abs() < 1e-10, "{kind:?} {h:?} {res}");
            }
        }
        let s2 = build_space(SpaceKind::Sphere, 2).unwrap();
        assert_eq!(op_identity_residual(&s2.roots, &[0.4], IdentityKind::Compact), 0.0);
    }
}
