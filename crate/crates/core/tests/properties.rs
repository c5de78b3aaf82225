use std::f64::consts::PI;

use proptest::prelude::*;
use symheat::efunction::{e_closed_form, spherical_orbit_density, Geometry, OrbitTriple};
use symheat::potentials::{omega_star, omega_star_limit};
use symheat::spectral::heat_kernel_sphere;
use symheat::special::flat_heat_kernel;
use symheat::wrapping::{apply_rho_shift, fold_to_fundamental_domain, wrap_compact, ShiftDirection, WrapPolicy};
use symheat::*;

const RANK_ONE: [&str; 13] = ["S2", "S3", "S4", "H2", "H3", "H5", "CP2", "CH2", "HP2", "HH2", "OP2", "OH2", "SU2"];

fn radius_bound(space: &SpaceSpec) -> f64 {
    if space.fundamental_radius.is_finite() {
        space.fundamental_radius
    } else {
        5.0
    }
}

#[test]
fn dimension_identity_and_origin_values() {
    for name in RANK_ONE.iter().chain(&["SL2C", "SU3", "SL3C", "R3"]) {
        let space = preset_by_name(name).unwrap();
        let rank = space.roots.rank();
        assert_eq!(rank + space.roots.multiplicity_sum() as usize, space.dim, "{name}");
        let zero = vec![0.0; rank];
        assert_eq!(j_eval(&space, &zero).unwrap(), 1.0, "{name}");
        if !space.roots.roots().is_empty() {
            assert_eq!(density_eval(&space, &zero, DensityKind::Delta0).unwrap(), 0.0, "{name}");
        }
    }
}

proptest! {
    #[test]
    fn delta_is_delta0_times_j_squared(idx in 0usize..RANK_ONE.len(), s in 0.001f64..0.999) {
        let space = preset_by_name(RANK_ONE[idx]).unwrap();
        let h = [s * radius_bound(&space)];
        let d = density_eval(&space, &h, DensityKind::Delta).unwrap();
        let d0 = density_eval(&space, &h, DensityKind::Delta0).unwrap();
        let j = j_eval(&space, &h).unwrap();
        prop_assert!((d - d0 * j * j).abs() <= 1e-12 * d.abs());
    }

    #[test]
    fn j_is_even(idx in 0usize..RANK_ONE.len(), s in 0.0f64..0.999) {
        let space = preset_by_name(RANK_ONE[idx]).unwrap();
        let r = s * radius_bound(&space);
        prop_assert_eq!(j_eval(&space, &[r]).unwrap(), j_eval(&space, &[-r]).unwrap());
    }

    #[test]
    fn rank_two_group_potentials_are_constant(a in 0.0f64..1.5, b in 0.0f64..1.5) {
        for (name, sign) in [("SU3", -1.0), ("SL3C", 1.0)] {
            let space = preset_by_name(name).unwrap();
            let h = [a, b];
            prop_assume!((0..space.roots.roots().len()).all(|i| space.roots.pairing(i, &h).abs() < 3.0));
            let v = omega_star(&space, &h).unwrap().value;
            prop_assert!((v - sign * space.rho_norm_sq()).abs() < 1e-12, "{} {}", name, v);
        }
    }

    #[test]
    fn omega_star_is_even(idx in 0usize..RANK_ONE.len(), s in 0.0f64..0.95) {
        let space = preset_by_name(RANK_ONE[idx]).unwrap();
        let r = s * radius_bound(&space);
        prop_assert_eq!(omega_star(&space, &[r]).unwrap().value, omega_star(&space, &[-r]).unwrap().value);
    }

    #[test]
    fn spectral_kernels_are_positive(n in 1usize..=3, theta in 0.0f64..PI, t in 0.05f64..3.0) {
        let (h, _) = heat_kernel_sphere(n, theta, t, 1e-15).unwrap();
        prop_assert!(h > -1e-15);
    }

    #[test]
    fn folding_lands_in_the_fundamental_domain(theta in -50.0f64..50.0) {
        let f = fold_to_fundamental_domain(theta);
        prop_assert!((0.0..=PI).contains(&f));
        prop_assert!((fold_to_fundamental_domain(f) - f).abs() < 1e-15);
        prop_assert!((f.cos() - theta.cos()).abs() < 1e-12);
    }

    #[test]
    fn rho_shift_round_trip(t in 0.01f64..5.0, v in 1e-6f64..10.0) {
        for name in ["S3", "H3", "SU2"] {
            let space = preset_by_name(name).unwrap();
            let there = apply_rho_shift(v, &space, t, ShiftDirection::ToStandard).unwrap();
            let back = apply_rho_shift(there, &space, t, ShiftDirection::ToShifted).unwrap();
            prop_assert!((back - v).abs() <= 1e-14 * v);
        }
    }

    #[test]
    fn e_is_symmetric_and_positive(r1 in 0.05f64..2.5, r2 in 0.05f64..2.5, s in 0.01f64..0.99) {
        let (lo, hi) = OrbitTriple::new(r1, r2, 0.0).support(Geometry::Spherical);
        prop_assume!(hi - lo > 1e-6);
        let r = lo + s * (hi - lo);
        for name in ["S2", "S4", "H2", "H4"] {
            let space = preset_by_name(name).unwrap();
            let a = e_closed_form(&space, &OrbitTriple::new(r1, r2, r)).unwrap().value;
            let b = e_closed_form(&space, &OrbitTriple::new(r2, r1, r)).unwrap().value;
            prop_assert_eq!(a, b);
            prop_assert!(a > 0.0);
        }
        prop_assert!(spherical_orbit_density(&OrbitTriple::new(r1, r2, r)).unwrap().value > 0.0);
    }

    #[test]
    fn radial_interpolation_is_exact_at_nodes(k in 0usize..200, a in -2.0f64..2.0) {
        let grid = linspace(0.0, 3.0, 200);
        let f = RadialFunction::from_fn(&grid, MeasureWeight::None, |r| (a * r).sin() + r * r).unwrap();
        prop_assert!((f.interpolate(grid[k]) - f.values()[k]).abs() < 1e-13);
    }
}

#[test]
fn lattice_sums_converge() {
    let s2 = preset_by_name("S2").unwrap();
    for t in [0.5, 1.0, 2.0] {
        let p = move |r: f64| flat_heat_kernel(2, r, t);
        for theta in [0.3, 1.5, 2.9] {
            let p8 = WrapPolicy { lattice_terms: 8, ..WrapPolicy::default() };
            let p16 = WrapPolicy { lattice_terms: 16, ..WrapPolicy::default() };
            let a = wrap_compact(&s2, &p, theta, &p8).unwrap();
            let b = wrap_compact(&s2, &p, theta, &p16).unwrap();
            assert!((a - b).abs() < 1e-12 * a.abs(), "t={t} theta={theta}");
        }
    }
}

#[test]
fn compact_and_noncompact_limits_are_opposite() {
    for n in 2..=6 {
        let s = omega_star_limit(&preset_by_name(&format!("S{n}")).unwrap()).unwrap();
        let h = omega_star_limit(&preset_by_name(&format!("H{n}")).unwrap()).unwrap();
        assert!((s + h).abs() < 1e-14, "n={n}");
    }
}
