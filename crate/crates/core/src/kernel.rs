//! Kernel values on a radial grid, tagged with the route that produced them.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde::{solve_perturbed_heat, PdeConfig, PdeGrid};
use crate::roots::SpaceSpec;
use crate::special::flat_heat_kernel;
use crate::spectral::{heat_kernel_complex_group, heat_kernel_compact};
use crate::stochastics::{flat_walk_feynman_kac, Scheme, WalkConfig};
use crate::wrapping::{shifted_kernel, wrapped_gaussian, WrapPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Spectral,
    GaussianWrap,
    ShiftedKernel,
    ClosedForm,
    Pde,
    MonteCarlo,
    Flat,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Spectral,
        Method::GaussianWrap,
        Method::ShiftedKernel,
        Method::ClosedForm,
        Method::Pde,
        Method::MonteCarlo,
        Method::Flat,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Spectral => "spectral",
            Method::GaussianWrap => "gaussian_wrap",
            Method::ShiftedKernel => "shifted_kernel",
            Method::ClosedForm => "closed_form",
            Method::Pde => "pde",
            Method::MonteCarlo => "mc",
            Method::Flat => "flat",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelEvaluation {
    pub space: String,
    pub n: usize,
    pub t: f64,
    pub method: Method,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Per-point error estimate (tail bound, Monte Carlo stderr, ...).
    pub err_est: Vec<f64>,
    /// Per-point free-form metadata: branch tag, killed mass, truncation index.
    pub extra: Vec<String>,
}

impl KernelEvaluation {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }
}

/// Tuning for `evaluate_kernel`; each route reads only its own fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelOptions {
    pub policy: WrapPolicy,
    /// Spectral truncation tolerance.
    pub tol: f64,
    pub pde_dx: f64,
    pub pde_dt: f64,
    pub mc_steps: usize,
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for KernelOptions {
    fn default() -> Self {
        Self {
            policy: WrapPolicy::default(),
            tol: 1e-14,
            pde_dx: 1e-3,
            pde_dt: 1e-4,
            mc_steps: 300,
            mc_samples: 100_000,
            seed: 1,
        }
    }
}

/// The heat kernel at time t on a radial grid by the chosen route. For
/// `mc` the grid holds histogram bin edges and the result sits at the bin
/// midpoints.
pub fn evaluate_kernel(space: &SpaceSpec, method: Method, t: f64, grid: &[f64], options: &KernelOptions) -> Result<KernelEvaluation> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    let n = space.dim;
    let tag = |s: String| vec![s; grid.len()];
    let pointwise = |f: &(dyn Fn(f64) -> Result<(f64, f64)> + Sync)| -> Result<(Vec<f64>, Vec<f64>)> {
        let pairs = grid.par_iter().map(|&r| f(r)).collect::<Result<Vec<_>>>()?;
        Ok(pairs.into_iter().unzip())
    };
    let (out_grid, values, err_est, extra) = match method {
        Method::Spectral => {
            let tol = options.tol;
            let trunc = grid
                .par_iter()
                .map(|&r| heat_kernel_compact(space, r, t, tol))
                .collect::<Result<Vec<_>>>()?;
            let extra = trunc.iter().map(|(_, tr)| format!("max_index={}", tr.max_index)).collect();
            (
                grid.to_vec(),
                trunc.iter().map(|(v, _)| *v).collect(),
                trunc.iter().map(|(_, tr)| tr.tail_bound).collect(),
                extra,
            )
        }
        Method::ClosedForm => {
            let (v, e) = pointwise(&|r| Ok((heat_kernel_complex_group(space, r, t)?, 0.0)))?;
            (grid.to_vec(), v, e, tag(String::new()))
        }
        Method::GaussianWrap => {
            let policy = options.policy;
            let (v, e) = pointwise(&|r| Ok((wrapped_gaussian(space, r, t, &policy)?, 0.0)))?;
            let shift = if policy.shift_applied { ";to_standard" } else { "" };
            (grid.to_vec(), v, e, tag(format!("branch={}{shift}", policy.branch)))
        }
        Method::ShiftedKernel => {
            let tol = options.tol;
            let (v, e) = pointwise(&|r| Ok((shifted_kernel(space, r, t, tol)?, 0.0)))?;
            (grid.to_vec(), v, e, tag(String::new()))
        }
        Method::Flat => {
            let (v, e) = pointwise(&|r| Ok((flat_heat_kernel(n, r, t), 0.0)))?;
            (grid.to_vec(), v, e, tag(String::new()))
        }
        Method::Pde => {
            // the solver reaches t0 + t; run it for t - t0 so the output sits at t
            let mut config = PdeConfig::new(space, t, options.pde_dx, options.pde_dt);
            if t <= 2.0 * config.t0 {
                return Err(Error::Domain(format!("the PDE route needs t > {}", 2.0 * config.t0)));
            }
            config.grid = PdeGrid::for_space(space, t, options.pde_dx);
            let solution = solve_perturbed_heat(space, t - config.t0, &config)?;
            let wrapped = solution.wrapped(space)?;
            let values = grid.iter().map(|&r| wrapped.interpolate(r)).collect();
            (
                grid.to_vec(),
                values,
                vec![0.0; grid.len()],
                tag(format!("boundary_loss={:.3e}", solution.boundary_loss)),
            )
        }
        Method::MonteCarlo => {
            let config = WalkConfig::new(Scheme::FlatWalkFk, t, options.mc_steps, options.mc_samples, options.seed);
            let est = flat_walk_feynman_kac(space, &config, grid)?;
            let extra = vec![format!("killed_mass={:.3e}", est.killed_mass); est.grid.len()];
            (est.grid, est.density, est.stderr, extra)
        }
    };
    Ok(KernelEvaluation { space: space.name.clone(), n, t, method, grid: out_grid, values, err_est, extra })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::linspace;
    use crate::roots::preset_by_name;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("wrapped".parse::<Method>().is_err());
    }

    #[test]
    fn routes_agree_on_s3_and_h3() {
        let opts = KernelOptions::default();
        let grid = linspace(0.2, 2.5, 12);
        let s3 = preset_by_name("S3").unwrap();
        let a = evaluate_kernel(&s3, Method::Spectral, 0.4, &grid, &opts).unwrap();
        let mut shifted = opts.clone();
        shifted.policy.shift_applied = true;
        let b = evaluate_kernel(&s3, Method::GaussianWrap, 0.4, &grid, &shifted).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-10 * x);
        }
        assert!(b.extra[0].contains("to_standard"));
        let h3 = preset_by_name("H3").unwrap();
        let c = evaluate_kernel(&h3, Method::ClosedForm, 0.4, &grid, &opts).unwrap();
        let d = evaluate_kernel(&h3, Method::GaussianWrap, 0.4, &grid, &shifted).unwrap();
        for (x, y) in c.values.iter().zip(&d.values) {
            assert!((x - y).abs() < 1e-12 * x);
        }
    }

    #[test]
    fn unsupported_routes_fail() {
        let h3 = preset_by_name("H3").unwrap();
        let grid = [0.5];
        let opts = KernelOptions::default();
        assert!(evaluate_kernel(&h3, Method::Spectral, 0.4, &grid, &opts).is_err());
        assert!(evaluate_kernel(&h3, Method::MonteCarlo, 0.4, &[0.1, 0.5], &opts).is_err());
        assert!(evaluate_kernel(&h3, Method::Flat, -1.0, &grid, &opts).is_err());
    }
}
