//! Heat kernels on rank-one Riemannian symmetric spaces.
//!
//! The same kernel is computed along independent routes: eigenfunction
//! expansions ([`spectral`]), wrapped Gaussians ([`wrapping`]), the perturbed
//! radial heat equation on the tangent space ([`pde`]) and Feynman-Kac Monte
//! Carlo ([`stochastics`]). [`efunction`] covers orbit densities and the
//! twisted convolution. All diffusions use the generator 1/2 Laplacian.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod acceptance;
pub mod efunction;
pub mod error;
pub mod kernel;
pub mod pde;
pub mod potentials;
pub mod quad;
pub mod radial;
pub mod roots;
pub mod special;
pub mod spectral;
pub mod stochastics;
pub mod wrapping;

pub use error::{Error, Result};
pub use kernel::{KernelEvaluation, Method};
pub use radial::{linspace, MeasureWeight, RadialFn, RadialFunction};
pub use roots::{
    build_space, density_eval, j_eval, parse_space_config, preset_by_name, rho_norm_sq, Curvature,
    DensityKind, RestrictedRootSystem, Root, SpaceKind, SpaceSpec,
};
