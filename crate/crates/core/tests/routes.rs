use std::f64::consts::PI;

use symheat::efunction::{sphere_convolution, sphere_convolution_dim};
use symheat::pde::{check_intertwining, solve_perturbed_heat, PdeConfig, PotentialMode};
use symheat::special::flat_heat_kernel;
use symheat::spectral::heat_kernel_sphere;
use symheat::stochastics::{flat_walk_feynman_kac, geodesic_walk, ks_distance, reference_radial_cdf, Scheme, WalkConfig};
use symheat::wrapping::{wrapped_gaussian, WrapPolicy};
use symheat::*;

fn tabulate<F: Fn(f64) -> f64 + Sync>(f: F) -> RadialFunction {
    let grid = linspace(0.0, PI, 4001);
    RadialFunction::from_fn(&grid, MeasureWeight::Delta, |th| f(th.clamp(1e-9, PI - 1e-9))).unwrap()
}

fn wrapped(space: &SpaceSpec, t: f64) -> RadialFunction {
    let policy = WrapPolicy::default();
    tabulate(|th| wrapped_gaussian(space, th, t, &policy).unwrap())
}

#[test]
fn wrapped_gaussians_form_a_semigroup_on_s3_only() {
    let grid = linspace(0.1, 3.0, 30);
    let (t, s) = (0.4, 0.6);
    let s3 = build_space(SpaceKind::Sphere, 3).unwrap();
    let conv = sphere_convolution_dim(3, &wrapped(&s3, t), &wrapped(&s3, s), &grid).unwrap();
    let target = wrapped(&s3, t + s);
    for (&th, &v) in grid.iter().zip(conv.values()) {
        let w = target.interpolate(th);
        assert!(((v - w) / w).abs() < 1e-8, "theta={th} {v} {w}");
    }
    let s2 = build_space(SpaceKind::Sphere, 2).unwrap();
    let conv = sphere_convolution(&wrapped(&s2, t), &wrapped(&s2, s), &grid).unwrap();
    let target = wrapped(&s2, t + s);
    let defect = grid.iter().zip(conv.values()).map(|(&th, &v)| (v - target.interpolate(th)).abs()).fold(0.0, f64::max);
    assert!(defect > 1e-4, "{defect}");
}

#[test]
fn spectral_kernels_form_a_semigroup() {
    let grid = linspace(0.1, 3.0, 30);
    let tab = |n: usize, t: f64| tabulate(move |th| heat_kernel_sphere(n, th, t, 1e-18).unwrap().0);
    let conv = sphere_convolution_dim(3, &tab(3, 0.3), &tab(3, 0.5), &grid).unwrap();
    for (&th, &v) in grid.iter().zip(conv.values()) {
        let h = heat_kernel_sphere(3, th, 0.8, 1e-18).unwrap().0;
        assert!(((v - h) / h).abs() < 1e-6, "S3 theta={th}");
    }
    // on the circle, a periodic trapezoid rule
    let m = 2048;
    let xs: Vec<f64> = (0..m).map(|k| 2.0 * PI * k as f64 / m as f64).collect();
    let circle = |x: f64, t: f64| heat_kernel_sphere(1, symheat::wrapping::fold_to_fundamental_domain(x), t, 1e-18).unwrap().0;
    for th in [0.2, 1.0, 2.5] {
        let v: f64 = xs.iter().map(|&y| circle(y, 0.3) * circle(th - y, 0.5)).sum::<f64>() * 2.0 * PI / m as f64;
        let h = circle(th, 0.8);
        assert!(((v - h) / h).abs() < 1e-6, "S1 theta={th}");
    }
}

#[test]
fn crank_nicolson_is_second_order() {
    let r2 = build_space(SpaceKind::Euclidean, 2).unwrap();
    let error = |dx: f64, dt: f64| {
        let mut cfg = PdeConfig::new(&r2, 0.5, dx, dt);
        cfg.potential = PotentialMode::Zero;
        let sol = solve_perturbed_heat(&r2, 0.5, &cfg).unwrap();
        sol.u
            .grid()
            .iter()
            .zip(sol.u.values())
            .map(|(&r, &v)| (v - flat_heat_kernel(2, r, sol.t_total)).abs())
            .fold(0.0, f64::max)
    };
    let coarse = error(8e-3, 8e-4);
    let fine = error(4e-3, 4e-4);
    let ratio = coarse / fine;
    assert!((ratio / 4.0 - 1.0).abs() < 0.2, "ratio {ratio}");
}

#[test]
fn s3_solution_is_the_flat_solution_rescaled() {
    let s3 = build_space(SpaceKind::Sphere, 3).unwrap();
    let r3 = build_space(SpaceKind::Euclidean, 3).unwrap();
    let t = 0.5;
    let mut cfg = PdeConfig::new(&s3, t, 2e-3, 2e-4);
    let curved = solve_perturbed_heat(&s3, t, &cfg).unwrap();
    cfg.potential = PotentialMode::Zero;
    let flat = solve_perturbed_heat(&r3, t, &cfg).unwrap();
    // constant Omega* = -1 scales the flat solution by e^{t/2}; the start also carries e^{t0/2}
    let factor = (0.5 * curved.t_total).exp();
    let peak = flat.u.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (a, b) in curved.u.values().iter().zip(flat.u.values()) {
        assert!((a - factor * b).abs() < 1e-6 * peak);
    }
}

#[test]
fn intertwining_residual_converges_at_fourth_order() {
    let s2 = build_space(SpaceKind::Sphere, 2).unwrap();
    let bump = |r: f64| (-(r - PI / 2.0).powi(2) / (2.0 * 0.04)).exp();
    let residual = |n: usize| {
        let grid = linspace(0.0, PI * (n as f64 - 1.0) / n as f64, n);
        check_intertwining(&s2, &bump, &grid).unwrap().relative
    };
    let (a, b, c) = (residual(128), residual(256), residual(512));
    assert!(a / b > 12.0 && b / c > 12.0, "{a} {b} {c}");
}

#[test]
fn geodesic_walk_has_no_visible_step_bias() {
    let s2 = build_space(SpaceKind::Sphere, 2).unwrap();
    let cdf = reference_radial_cdf(&s2, 1.0, PI, 2001).unwrap();
    let n = 100_000;
    let ks = |steps: usize| {
        let cfg = WalkConfig::new(Scheme::GeodesicWalk, 1.0, steps, n, 21);
        ks_distance(&geodesic_walk(&s2, &cfg).unwrap(), &cdf)
    };
    let noise = 1.36 / (n as f64).sqrt();
    let (a, b) = (ks(200), ks(400));
    assert!((a - b).abs() < noise, "{a} {b} {noise}");
}

#[test]
fn feynman_kac_estimates_are_reproducible() {
    let s2 = build_space(SpaceKind::Sphere, 2).unwrap();
    let cfg = WalkConfig::new(Scheme::FlatWalkFk, 0.2, 50, 5000, 77);
    let edges = linspace(0.1, 1.5, 8);
    let a = flat_walk_feynman_kac(&s2, &cfg, &edges).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let b = pool.install(|| flat_walk_feynman_kac(&s2, &cfg, &edges).unwrap());
    assert_eq!(a, b);
    assert!(a.weight_range.0 >= a.weight_bounds.0 && a.weight_range.1 <= a.weight_bounds.1);
    assert!(a.density.iter().all(|&d| d >= 0.0));
}
