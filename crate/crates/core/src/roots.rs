//! Restricted root systems, symmetric-space presets and the geometric scalar
//! fields built from them: `j`, the radial densities `delta` and `delta0`,
//! and `rho`.
//!
//! Rank-one spaces use the normalization |alpha| = 1, so the fundamental
//! domain of S^n is the open ball of radius pi.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{sinc, sinhc};

/// A positive restricted root, stored by its coefficients in the basis of
/// the flat whose inner product is the system's gram matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Root {
    pub coeffs: Vec<f64>,
    pub multiplicity: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestrictedRootSystem {
    rank: usize,
    roots: Vec<Root>,
    /// Row-major rank x rank inner product on the flat.
    gram: Vec<f64>,
}

impl RestrictedRootSystem {
    pub fn new(rank: usize, roots: Vec<Root>, gram: Vec<f64>) -> Result<Self> {
        if rank == 0 {
            return Err(Error::Config("rank must be positive".into()));
        }
        if gram.len() != rank * rank {
            return Err(Error::Config(format!(
                "gram has {} entries, expected {}",
                gram.len(),
                rank * rank
            )));
        }
        for i in 0..rank {
            for k in 0..i {
                if (gram[i * rank + k] - gram[k * rank + i]).abs() > 1e-12 {
                    return Err(Error::Config("gram matrix is not symmetric".into()));
                }
            }
        }
        if !is_positive_definite(&gram, rank) {
            return Err(Error::Config("gram matrix is not positive definite".into()));
        }
        for (i, root) in roots.iter().enumerate() {
            if root.coeffs.len() != rank {
                return Err(Error::Config(format!(
                    "root {i} has {} coefficients, expected {rank}",
                    root.coeffs.len()
                )));
            }
            if root.multiplicity == 0 {
                return Err(Error::Config(format!("root {i} has zero multiplicity")));
            }
            if root.coeffs.iter().all(|c| *c == 0.0) {
                return Err(Error::Config(format!("root {i} is zero")));
            }
        }
        let system = Self { rank, roots, gram };
        // A root that is twice another must not be doubled again: 4 alpha is never a root.
        for (i, _) in system.roots.iter().enumerate() {
            if let Some(d) = system.double_of(i) {
                if system.double_of(d).is_some() {
                    return Err(Error::Config(format!(
                        "root {i} has both 2x and 4x multiples in the system"
                    )));
                }
            }
        }
        Ok(system)
    }

    /// The empty system of a flat of the given rank.
    pub fn flat(rank: usize) -> Self {
        let mut gram = vec![0.0; rank * rank];
        for i in 0..rank {
            gram[i * rank + i] = 1.0;
        }
        Self {
            rank,
            roots: Vec::new(),
            gram,
        }
    }

    /// One root alpha with |alpha| = 1 and, optionally, 2 alpha.
    pub fn rank_one(m_alpha: u32, m_2alpha: u32) -> Result<Self> {
        let mut roots = vec![Root {
            coeffs: vec![1.0],
            multiplicity: m_alpha,
        }];
        if m_2alpha > 0 {
            roots.push(Root {
                coeffs: vec![2.0],
                multiplicity: m_2alpha,
            });
        }
        Self::new(1, roots, vec![1.0])
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn roots(&self) -> &[Root] {
        &self.roots
    }

    pub fn gram(&self) -> &[f64] {
        &self.gram
    }

    /// `alpha_i(H)` for H given in flat coordinates.
    pub fn pairing(&self, i: usize, h: &[f64]) -> f64 {
        let c = &self.roots[i].coeffs;
        let mut s = 0.0;
        for a in 0..self.rank {
            for b in 0..self.rank {
                s += c[a] * self.gram[a * self.rank + b] * h[b];
            }
        }
        s
    }

    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        let mut s = 0.0;
        for a in 0..self.rank {
            for b in 0..self.rank {
                s += u[a] * self.gram[a * self.rank + b] * v[b];
            }
        }
        s
    }

    pub fn root_inner(&self, i: usize, k: usize) -> f64 {
        self.inner(&self.roots[i].coeffs, &self.roots[k].coeffs)
    }

    pub fn norm(&self, h: &[f64]) -> f64 {
        self.inner(h, h).sqrt()
    }

    /// Index of the root equal to twice root `i`, if present.
    pub fn double_of(&self, i: usize) -> Option<usize> {
        let c = &self.roots[i].coeffs;
        self.roots.iter().position(|r| {
            r.coeffs
                .iter()
                .zip(c)
                .all(|(a, b)| (a - 2.0 * b).abs() < 1e-12)
        })
    }

    /// Indices of multipliable roots.
    pub fn multipliable(&self) -> Vec<usize> {
        (0..self.roots.len())
            .filter(|&i| self.double_of(i).is_some())
            .collect()
    }

    /// Whether roots `i` and `k` are proportional.
    pub fn proportional(&self, i: usize, k: usize) -> bool {
        let a = &self.roots[i].coeffs;
        let b = &self.roots[k].coeffs;
        let ab = self.inner(a, b);
        (ab * ab - self.inner(a, a) * self.inner(b, b)).abs()
            < 1e-12 * (1.0 + self.inner(a, a) * self.inner(b, b))
    }

    pub fn multiplicity_sum(&self) -> u32 {
        self.roots.iter().map(|r| r.multiplicity).sum()
    }

    /// rho = 1/2 sum m_alpha alpha, in flat coordinates.
    pub fn rho(&self) -> Vec<f64> {
        let mut rho = vec![0.0; self.rank];
        for r in &self.roots {
            for (acc, c) in rho.iter_mut().zip(&r.coeffs) {
                *acc += 0.5 * r.multiplicity as f64 * c;
            }
        }
        rho
    }

    pub fn rho_norm_sq(&self) -> f64 {
        let rho = self.rho();
        self.inner(&rho, &rho)
    }

    /// sum over pairs of m_alpha m_beta / 4 <alpha, beta>; equals `rho_norm_sq`.
    pub fn rho_norm_sq_pairwise(&self) -> f64 {
        let mut s = 0.0;
        for (i, a) in self.roots.iter().enumerate() {
            for (k, b) in self.roots.iter().enumerate() {
                s += a.multiplicity as f64 * b.multiplicity as f64 / 4.0 * self.root_inner(i, k);
            }
        }
        s
    }

    pub fn max_root_norm(&self) -> f64 {
        (0..self.roots.len())
            .map(|i| self.root_inner(i, i).sqrt())
            .fold(0.0, f64::max)
    }
}

fn is_positive_definite(gram: &[f64], n: usize) -> bool {
    // Cholesky without storing the factor.
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..=i {
            let mut s = gram[i * n + k];
            for p in 0..k {
                s -= l[i * n + p] * l[k * n + p];
            }
            if i == k {
                if s <= 0.0 {
                    return false;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + k] = s / l[k * n + k];
            }
        }
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    Sphere,
    Hyperbolic,
    CompactGroupSu2,
    Circle,
    ComplexGroupRank1,
    Euclidean,
    PresetByName,
}

impl FromStr for SpaceKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "sphere" => Self::Sphere,
            "hyperbolic" => Self::Hyperbolic,
            "compact_group_su2" | "su2" => Self::CompactGroupSu2,
            "circle" => Self::Circle,
            "complex_group_rank1" | "complex" => Self::ComplexGroupRank1,
            "euclidean" | "flat" => Self::Euclidean,
            "preset" | "preset_by_name" => Self::PresetByName,
            other => return Err(Error::Config(format!("unknown space kind '{other}'"))),
        })
    }
}

impl fmt::Display for SpaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::Sphere => "sphere",
            Self::Hyperbolic => "hyperbolic",
            Self::CompactGroupSu2 => "compact_group_su2",
            Self::Circle => "circle",
            Self::ComplexGroupRank1 => "complex_group_rank1",
            Self::Euclidean => "euclidean",
            Self::PresetByName => "preset",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Curvature {
    Positive,
    Negative,
    Flat,
}

impl Curvature {
    pub fn sign(self) -> f64 {
        match self {
            Self::Positive => 1.0,
            Self::Negative => -1.0,
            Self::Flat => 0.0,
        }
    }

    fn from_sign(s: i64) -> Result<Self> {
        match s {
            1 => Ok(Self::Positive),
            -1 => Ok(Self::Negative),
            0 => Ok(Self::Flat),
            other => Err(Error::Config(format!("curvature sign must be -1, 0 or 1, got {other}"))),
        }
    }
}

/// Time scaling of the diffusion. Only the probabilist convention
/// (generator = 1/2 Laplacian, spectral factors e^{-lambda t / 2}) is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DiffusionConvention {
    #[default]
    HalfLaplacian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceSpec {
    pub name: String,
    pub kind: SpaceKind,
    pub dim: usize,
    pub curvature: Curvature,
    pub roots: RestrictedRootSystem,
    /// Radius of the largest ball on which Exp is injective; infinite for
    /// non-compact and Euclidean spaces.
    pub fundamental_radius: f64,
    pub convention: DiffusionConvention,
    /// Set for presets taken from the classification tables rather than
    /// derived here; only the potentials module consumes those.
    pub provenance: Option<String>,
}

const TABLE_PROVENANCE: &str =
    "rank-one classification tables (Helgason); used for potential evaluation only";

impl SpaceSpec {
    fn checked(self) -> Result<Self> {
        let total = self.roots.rank() as u32 + self.roots.multiplicity_sum();
        if total as usize != self.dim {
            return Err(Error::Config(format!(
                "{}: rank + sum of multiplicities = {total}, but dim = {}",
                self.name, self.dim
            )));
        }
        Ok(self)
    }

    pub fn is_compact(&self) -> bool {
        self.curvature == Curvature::Positive || self.kind == SpaceKind::Circle
    }

    pub fn is_rank_one(&self) -> bool {
        self.roots.rank() == 1
    }

    pub fn rho_norm_sq(&self) -> f64 {
        self.roots.rho_norm_sq()
    }

    /// All multiplicities 2 and no multipliable roots: a compact group or a
    /// complex group, for which the potential is constant.
    pub fn is_group_type(&self) -> bool {
        !self.roots.roots().is_empty()
            && self.roots.roots().iter().all(|r| r.multiplicity == 2)
            && self.roots.multipliable().is_empty()
    }

    /// Radial view of a rank-one space (or of Euclidean space, radially).
    pub fn rank_one(&self) -> Result<RankOneProfile> {
        if self.kind == SpaceKind::Euclidean {
            return Ok(RankOneProfile {
                dim: self.dim,
                curvature: Curvature::Flat,
                terms: Vec::new(),
            });
        }
        if !self.is_rank_one() {
            return Err(Error::UnsupportedSpace(format!(
                "{} has rank {}; a radial (rank-one) profile is required",
                self.name,
                self.roots.rank()
            )));
        }
        let unit = 1.0 / self.roots.gram()[0].sqrt();
        let terms = (0..self.roots.roots().len())
            .map(|i| {
                let scale = self.roots.pairing(i, &[unit]);
                (scale, self.roots.roots()[i].multiplicity)
            })
            .collect();
        Ok(RankOneProfile {
            dim: self.dim,
            curvature: self.curvature,
            terms,
        })
    }

    /// Flat coordinates of the point at geodesic radius r along the unit
    /// direction of a rank-one flat.
    pub fn radial_point(&self, r: f64) -> Vec<f64> {
        vec![r / self.roots.gram()[0].sqrt()]
    }
}

/// Radial data of a rank-one space: `alpha_i(e)` for the unit vector e of the
/// flat, with multiplicities.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOneProfile {
    pub dim: usize,
    pub curvature: Curvature,
    pub terms: Vec<(f64, u32)>,
}

impl RankOneProfile {
    /// Drift of the manifold radial Laplacian: sum m a cot(a r) (compact),
    /// coth (non-compact) or (n-1)/r (flat).
    pub fn manifold_drift(&self, r: f64) -> f64 {
        match self.curvature {
            Curvature::Flat => (self.dim as f64 - 1.0) / r,
            Curvature::Positive => self
                .terms
                .iter()
                .map(|&(a, m)| m as f64 * a / (a * r).tan())
                .sum(),
            Curvature::Negative => self
                .terms
                .iter()
                .map(|&(a, m)| m as f64 * a / (a * r).tanh())
                .sum(),
        }
    }

    /// Drift of the tangent-space radial Laplacian, (n-1)/r.
    pub fn tangent_drift(&self, r: f64) -> f64 {
        (self.dim as f64 - 1.0) / r
    }

    /// j at radius r; errors outside the positive branch.
    pub fn j(&self, r: f64) -> Result<f64> {
        let mut v = 1.0;
        for (i, &(a, m)) in self.terms.iter().enumerate() {
            let x = a * r;
            let ratio = match self.curvature {
                Curvature::Positive => sinc(x),
                Curvature::Negative => sinhc(x),
                Curvature::Flat => 1.0,
            };
            if ratio <= 0.0 {
                return Err(Error::BranchDomain {
                    root: i,
                    value: x,
                    point: vec![r],
                });
            }
            v *= ratio.powf(m as f64 / 2.0);
        }
        Ok(v)
    }

    /// `(sin(a r)/(a r))` factors raised to m/2 with sign information kept:
    /// returns (|j|, sign of the product of the radicands of odd-multiplicity
    /// roots, sign of the integer-power part).
    pub fn j_parts(&self, r: f64) -> (f64, f64, f64) {
        let mut abs = 1.0;
        let mut odd_sign = 1.0;
        let mut even_sign = 1.0;
        for &(a, m) in &self.terms {
            let x = a * r;
            let ratio = match self.curvature {
                Curvature::Positive => sinc(x),
                Curvature::Negative => sinhc(x),
                Curvature::Flat => 1.0,
            };
            abs *= ratio.abs().powf(m as f64 / 2.0);
            if ratio < 0.0 {
                if m % 2 == 1 {
                    odd_sign = -odd_sign;
                    // the integer part of m/2 still contributes
                    if (m / 2) % 2 == 1 {
                        even_sign = -even_sign;
                    }
                } else if (m / 2) % 2 == 1 {
                    even_sign = -even_sign;
                }
            }
        }
        (abs, odd_sign, even_sign)
    }

    pub fn has_odd_multiplicity(&self) -> bool {
        self.terms.iter().any(|&(_, m)| m % 2 == 1)
    }

    /// delta(r) = prod s(a r)^m.
    pub fn delta(&self, r: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(a, m)| {
                let x = a * r;
                match self.curvature {
                    Curvature::Positive => x.sin().powi(m as i32),
                    Curvature::Negative => x.sinh().powi(m as i32),
                    Curvature::Flat => x.powi(m as i32),
                }
            })
            .product::<f64>()
            * if self.terms.is_empty() { r.powi(self.dim as i32 - 1) } else { 1.0 }
    }

    /// delta0(r) = prod (a r)^m.
    pub fn delta0(&self, r: f64) -> f64 {
        if self.terms.is_empty() {
            return r.powi(self.dim as i32 - 1);
        }
        self.terms
            .iter()
            .map(|&(a, m)| (a * r).powi(m as i32))
            .product()
    }
}

/// Builds a space from a family and dimension.
pub fn build_space(kind: SpaceKind, n: usize) -> Result<SpaceSpec> {
    if n == 0 {
        return Err(Error::UnsupportedSpace("dimension must be at least 1".into()));
    }
    let unsupported = || Error::UnsupportedSpace(format!("({kind}, {n}) is not a supported combination"));
    let spec = match kind {
        SpaceKind::Sphere if n == 1 => return build_space(SpaceKind::Circle, 1),
        SpaceKind::Sphere => SpaceSpec {
            name: format!("S{n}"),
            kind,
            dim: n,
            curvature: Curvature::Positive,
            roots: RestrictedRootSystem::rank_one(n as u32 - 1, 0)?,
            fundamental_radius: PI,
            convention: DiffusionConvention::HalfLaplacian,
            provenance: None,
        },
        SpaceKind::Hyperbolic if n >= 2 => SpaceSpec {
            name: format!("H{n}"),
            kind,
            dim: n,
            curvature: Curvature::Negative,
            roots: RestrictedRootSystem::rank_one(n as u32 - 1, 0)?,
            fundamental_radius: f64::INFINITY,
            convention: DiffusionConvention::HalfLaplacian,
            provenance: None,
        },
        SpaceKind::CompactGroupSu2 if n == 3 => SpaceSpec {
            name: "SU2".into(),
            kind,
            dim: 3,
            curvature: Curvature::Positive,
            roots: RestrictedRootSystem::rank_one(2, 0)?,
            fundamental_radius: PI,
            convention: DiffusionConvention::HalfLaplacian,
            provenance: None,
        },
        SpaceKind::ComplexGroupRank1 if n == 3 => SpaceSpec {
            name: "SL2C".into(),
            kind,
            dim: 3,
            curvature: Curvature::Negative,
            roots: RestrictedRootSystem::rank_one(2, 0)?,
            fundamental_radius: f64::INFINITY,
            convention: DiffusionConvention::HalfLaplacian,
            provenance: None,
        },
        SpaceKind::Circle if n == 1 => SpaceSpec {
            name: "S1".into(),
            kind,
            dim: 1,
            curvature: Curvature::Flat,
            roots: RestrictedRootSystem::flat(1),
            // injectivity radius of the unit circle; the lattice is 2 pi Z
            fundamental_radius: PI,
            convention: DiffusionConvention::HalfLaplacian,
            provenance: None,
        },
        SpaceKind::Euclidean => SpaceSpec {
            name: format!("R{n}"),
            kind,
            dim: n,
            curvature: Curvature::Flat,
            roots: RestrictedRootSystem::flat(n),
            fundamental_radius: f64::INFINITY,
            convention: DiffusionConvention::HalfLaplacian,
            provenance: None,
        },
        SpaceKind::PresetByName => {
            return Err(Error::UnsupportedSpace(
                "preset spaces are built with preset_by_name".into(),
            ))
        }
        _ => return Err(unsupported()),
    };
    spec.checked()
}

/// Named presets: `S<n>`, `H<n>`, `R<n>`, `S1`, `SU2`, `SL2C`, `SU3`, `SL3C`,
/// `CP<n>`, `HP<n>`, `OP2` and their non-compact duals `CH<n>`, `HH<n>`,
/// `OH2`.
pub fn preset_by_name(name: &str) -> Result<SpaceSpec> {
    let name = name.trim();
    let upper = name.to_ascii_uppercase();
    let number = |prefix: &str| -> Option<usize> { upper.strip_prefix(prefix)?.parse().ok() };
    let unknown = || Error::UnsupportedSpace(format!("unknown preset '{name}'"));

    match upper.as_str() {
        "SU2" => return build_space(SpaceKind::CompactGroupSu2, 3),
        "SL2C" => return build_space(SpaceKind::ComplexGroupRank1, 3),
        "SU3" => return a2_group("SU3", Curvature::Positive),
        "SL3C" => return a2_group("SL3C", Curvature::Negative),
        "OP2" => return projective("OP2", 16, 8, 7, Curvature::Positive),
        "OH2" => return projective("OH2", 16, 8, 7, Curvature::Negative),
        _ => {}
    }
    if let Some(n) = number("CP") {
        if n < 2 {
            return Err(unknown());
        }
        return projective(&upper, 2 * n, 2 * n as u32 - 2, 1, Curvature::Positive);
    }
    if let Some(n) = number("CH") {
        if n < 2 {
            return Err(unknown());
        }
        return projective(&upper, 2 * n, 2 * n as u32 - 2, 1, Curvature::Negative);
    }
    if let Some(n) = number("HP") {
        if n < 2 {
            return Err(unknown());
        }
        return projective(&upper, 4 * n, 4 * n as u32 - 4, 3, Curvature::Positive);
    }
    if let Some(n) = number("HH") {
        if n < 2 {
            return Err(unknown());
        }
        return projective(&upper, 4 * n, 4 * n as u32 - 4, 3, Curvature::Negative);
    }
    if let Some(n) = number("S") {
        return build_space(SpaceKind::Sphere, n);
    }
    if let Some(n) = number("H") {
        return build_space(SpaceKind::Hyperbolic, n);
    }
    if let Some(n) = number("R") {
        return build_space(SpaceKind::Euclidean, n);
    }
    Err(unknown())
}

fn projective(name: &str, dim: usize, m1: u32, m2: u32, curvature: Curvature) -> Result<SpaceSpec> {
    SpaceSpec {
        name: name.into(),
        kind: SpaceKind::PresetByName,
        dim,
        curvature,
        roots: RestrictedRootSystem::rank_one(m1, m2)?,
        // the factor sin(2 alpha) first vanishes at alpha = pi/2
        fundamental_radius: if curvature == Curvature::Positive { PI / 2.0 } else { f64::INFINITY },
        convention: DiffusionConvention::HalfLaplacian,
        provenance: Some(TABLE_PROVENANCE.into()),
    }
    .checked()
}

/// Type A2 with all multiplicities 2: SU(3) as a compact group, or
/// SL(3,C)/SU(3). Orthonormal coordinates on the flat, unit roots.
fn a2_group(name: &str, curvature: Curvature) -> Result<SpaceSpec> {
    let h = 3f64.sqrt() / 2.0;
    let roots = vec![
        Root { coeffs: vec![1.0, 0.0], multiplicity: 2 },
        Root { coeffs: vec![-0.5, h], multiplicity: 2 },
        Root { coeffs: vec![0.5, h], multiplicity: 2 },
    ];
    SpaceSpec {
        name: name.into(),
        kind: SpaceKind::PresetByName,
        dim: 8,
        curvature,
        roots: RestrictedRootSystem::new(2, roots, vec![1.0, 0.0, 0.0, 1.0])?,
        fundamental_radius: if curvature == Curvature::Positive { PI } else { f64::INFINITY },
        convention: DiffusionConvention::HalfLaplacian,
        provenance: None,
    }
    .checked()
}

/// `j(H) = prod (s(alpha(H))/alpha(H))^{m/2}` with s = sin on compact and
/// sinh on non-compact spaces. Complex-group presets evaluate the equivalent
/// Lie-algebra form `prod sinh(beta(H)/2)/(beta(H)/2)` with beta = 2 alpha.
pub fn j_eval(space: &SpaceSpec, h: &[f64]) -> Result<f64> {
    check_len(space, h)?;
    let roots = &space.roots;
    if space.kind == SpaceKind::ComplexGroupRank1 {
        return Ok((0..roots.roots().len())
            .map(|i| sinhc(2.0 * roots.pairing(i, h) / 2.0))
            .product());
    }
    let mut v = 1.0;
    for (i, root) in roots.roots().iter().enumerate() {
        let x = roots.pairing(i, h);
        let ratio = match space.curvature {
            Curvature::Positive => sinc(x),
            Curvature::Negative => sinhc(x),
            Curvature::Flat => 1.0,
        };
        if ratio <= 0.0 {
            return Err(Error::BranchDomain {
                root: i,
                value: x,
                point: h.to_vec(),
            });
        }
        v *= ratio.powf(root.multiplicity as f64 / 2.0);
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityKind {
    /// Radial density of the Riemannian measure on the space.
    Delta,
    /// Radial density of Lebesgue measure on the tangent space.
    Delta0,
}

/// `delta(Exp H) = prod s(alpha(H))^m` or `delta0(H) = prod alpha(H)^m`.
pub fn density_eval(space: &SpaceSpec, h: &[f64], which: DensityKind) -> Result<f64> {
    check_len(space, h)?;
    let roots = &space.roots;
    let mut v = 1.0;
    for (i, root) in roots.roots().iter().enumerate() {
        let x = roots.pairing(i, h);
        if x < 0.0 {
            return Err(Error::Domain(format!(
                "H = {h:?} lies outside the closed positive chamber (root {i})"
            )));
        }
        let factor = match (which, space.curvature) {
            (DensityKind::Delta0, _) | (DensityKind::Delta, Curvature::Flat) => x,
            (DensityKind::Delta, Curvature::Positive) => x.sin(),
            (DensityKind::Delta, Curvature::Negative) => x.sinh(),
        };
        v *= factor.powi(root.multiplicity as i32);
    }
    Ok(v)
}

pub fn rho_norm_sq(space: &SpaceSpec) -> f64 {
    space.rho_norm_sq()
}

fn check_len(space: &SpaceSpec, h: &[f64]) -> Result<()> {
    if h.len() != space.roots.rank() {
        return Err(Error::Domain(format!(
            "H has {} coordinates but {} has rank {}",
            h.len(),
            space.name,
            space.roots.rank()
        )));
    }
    Ok(())
}

/// Parses space presets from a plain-text key-value file:
///
/// ```text
/// [CP2]
/// dim = 4
/// curvature = 1
/// roots = 1:2 2:1
/// gram = 1
/// ```
///
/// A section may instead name a built-in family with `kind` (and `dim`), or
/// a built-in preset with `preset = CP3`.
pub fn parse_space_config(text: &str) -> Result<BTreeMap<String, SpaceSpec>> {
    let mut sections: Vec<(String, BTreeMap<String, String>)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::Config(format!("line {}: unterminated section", lineno + 1)))?;
            sections.push((name.trim().to_string(), BTreeMap::new()));
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
        let (_, map) = sections
            .last_mut()
            .ok_or_else(|| Error::Config(format!("line {}: key outside a [section]", lineno + 1)))?;
        map.insert(key.trim().to_ascii_lowercase(), value.trim().to_string());
    }

    let mut out = BTreeMap::new();
    for (name, map) in sections {
        let spec = space_from_section(&name, &map)?;
        out.insert(name, spec);
    }
    Ok(out)
}

fn space_from_section(name: &str, map: &BTreeMap<String, String>) -> Result<SpaceSpec> {
    let field = |k: &str| map.get(k).map(String::as_str);
    let parse_usize = |k: &str| -> Result<Option<usize>> {
        field(k)
            .map(|v| v.parse().map_err(|_| Error::Config(format!("[{name}] {k}: not an integer: {v}"))))
            .transpose()
    };

    if let Some(preset) = field("preset") {
        let mut spec = preset_by_name(preset)?;
        spec.name = name.to_string();
        return Ok(spec);
    }
    if let Some(roots_text) = field("roots") {
        let dim = parse_usize("dim")?.ok_or_else(|| Error::Config(format!("[{name}] missing dim")))?;
        let curvature = match field("curvature") {
            Some(c) => Curvature::from_sign(
                c.parse()
                    .map_err(|_| Error::Config(format!("[{name}] curvature: not an integer: {c}")))?,
            )?,
            None => return Err(Error::Config(format!("[{name}] missing curvature"))),
        };
        let roots = parse_roots(roots_text)?;
        let rank = match parse_usize("rank")? {
            Some(r) => r,
            None => roots
                .first()
                .map(|r| r.coeffs.len())
                .ok_or_else(|| Error::Config(format!("[{name}] empty root list needs an explicit rank")))?,
        };
        let gram = match field("gram") {
            Some(g) => parse_floats(g)?,
            None => RestrictedRootSystem::flat(rank).gram().to_vec(),
        };
        let system = RestrictedRootSystem::new(rank, roots, gram)?;
        let fundamental_radius = match field("fundamental_radius") {
            Some(v) if v.eq_ignore_ascii_case("inf") => f64::INFINITY,
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("[{name}] fundamental_radius: bad number {v}")))?,
            None if curvature == Curvature::Positive => PI / system.max_root_norm(),
            None => f64::INFINITY,
        };
        return SpaceSpec {
            name: name.to_string(),
            kind: SpaceKind::PresetByName,
            dim,
            curvature,
            roots: system,
            fundamental_radius,
            convention: DiffusionConvention::HalfLaplacian,
            provenance: field("provenance").map(str::to_string),
        }
        .checked();
    }
    let kind: SpaceKind = field("kind")
        .ok_or_else(|| Error::Config(format!("[{name}] needs one of preset, roots or kind")))?
        .parse()?;
    let dim = parse_usize("dim")?.ok_or_else(|| Error::Config(format!("[{name}] missing dim")))?;
    let mut spec = build_space(kind, dim)?;
    spec.name = name.to_string();
    Ok(spec)
}

fn parse_floats(s: &str) -> Result<Vec<f64>> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| Error::Config(format!("bad number '{t}'"))))
        .collect()
}

/// Roots as `c1,c2,...:m` entries separated by whitespace or ';'.
pub fn parse_roots(s: &str) -> Result<Vec<Root>> {
    s.split(|c: char| c == ';' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|entry| {
            let (coeffs, mult) = entry
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("root '{entry}' must look like coeffs:multiplicity")))?;
            let coeffs = coeffs
                .split(',')
                .map(|c| c.trim().parse().map_err(|_| Error::Config(format!("bad coefficient in '{entry}'"))))
                .collect::<Result<Vec<f64>>>()?;
            let multiplicity = mult
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad multiplicity in '{entry}'")))?;
            Ok(Root { coeffs, multiplicity })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_presets() {
        let s2 = build_space(SpaceKind::Sphere, 2).unwrap();
        assert_eq!(s2.roots.roots()[0].multiplicity, 1);
        assert!((s2.rho_norm_sq() - 0.25).abs() < 1e-15);
        assert_eq!(s2.fundamental_radius, PI);

        let s3 = build_space(SpaceKind::Sphere, 3).unwrap();
        assert_eq!(s3.roots.roots()[0].multiplicity, 2);
        assert!((rho_norm_sq(&s3) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn circle_is_abelian() {
        let c = build_space(SpaceKind::Circle, 1).unwrap();
        assert!(c.roots.roots().is_empty());
        assert_eq!(rho_norm_sq(&c), 0.0);
        assert_eq!(j_eval(&c, &[2.0]).unwrap(), 1.0);
    }

    #[test]
    fn cp2_dimension_identity() {
        let cp2 = preset_by_name("CP2").unwrap();
        let ms: Vec<u32> = cp2.roots.roots().iter().map(|r| r.multiplicity).collect();
        assert_eq!(ms, vec![2, 1]);
        assert_eq!(cp2.roots.rank() + cp2.roots.multiplicity_sum() as usize, 4);
        assert_eq!(cp2.roots.multipliable(), vec![0]);
        assert!(cp2.provenance.is_some());
    }

    #[test]
    fn every_preset_satisfies_dimension_identity() {
        for name in ["S1", "S2", "S5", "H2", "H7", "R3", "SU2", "SL2C", "SU3", "SL3C", "CP2", "CP4", "HP2", "HP3", "OP2", "CH3", "HH2", "OH2"] {
            let s = preset_by_name(name).unwrap();
            assert_eq!(s.roots.rank() + s.roots.multiplicity_sum() as usize, s.dim, "{name}");
            assert!((s.roots.rho_norm_sq() - s.roots.rho_norm_sq_pairwise()).abs() < 1e-12, "{name}");
        }
    }

    #[test]
    fn unsupported_combinations() {
        assert!(matches!(build_space(SpaceKind::CompactGroupSu2, 4), Err(Error::UnsupportedSpace(_))));
        assert!(matches!(build_space(SpaceKind::Hyperbolic, 1), Err(Error::UnsupportedSpace(_))));
        assert!(matches!(build_space(SpaceKind::Sphere, 0), Err(Error::UnsupportedSpace(_))));
        assert!(preset_by_name("CP1").is_err());
        assert!(preset_by_name("G2").is_err());
    }

    #[test]
    fn j_values() {
        let s2 = build_space(SpaceKind::Sphere, 2).unwrap();
        let v = j_eval(&s2, &[PI / 2.0]).unwrap();
        assert!((v - 0.797_884_560_802_865_4).abs() < 1e-12);
        assert_eq!(j_eval(&s2, &[0.0]).unwrap(), 1.0);
        assert!(matches!(j_eval(&s2, &[3.5]), Err(Error::BranchDomain { .. })));
    }

    #[test]
    fn complex_form_matches_generic_form() {
        let sl2c = build_space(SpaceKind::ComplexGroupRank1, 3).unwrap();
        let h3 = build_space(SpaceKind::Hyperbolic, 3).unwrap();
        for r in [0.0, 0.3, 1.0, 4.0] {
            let a = j_eval(&sl2c, &[r]).unwrap();
            let b = j_eval(&h3, &[r]).unwrap();
            assert!((a - b).abs() < 1e-14 * b);
        }
        // sinh(beta/2)/(beta/2) at beta(H) = 1, i.e. r = 1/2
        let v = j_eval(&sl2c, &[0.5]).unwrap();
        assert!((v - 1.042_190_610_987_495).abs() < 1e-12);
        assert!((j_eval(&sl2c, &[1.0]).unwrap() - 1.0f64.sinh()).abs() < 1e-14);
    }

    #[test]
    fn densities() {
        let s2 = build_space(SpaceKind::Sphere, 2).unwrap();
        assert!((density_eval(&s2, &[PI / 2.0], DensityKind::Delta).unwrap() - 1.0).abs() < 1e-15);
        let h3 = build_space(SpaceKind::Hyperbolic, 3).unwrap();
        let d = density_eval(&h3, &[1.0], DensityKind::Delta).unwrap();
        assert!((d - 1.381_097_845_541_213).abs() < 1e-12);
        assert_eq!(density_eval(&h3, &[0.0], DensityKind::Delta0).unwrap(), 0.0);
        assert!(density_eval(&h3, &[-0.1], DensityKind::Delta).is_err());
    }

    #[test]
    fn config_round_trip() {
        let text = "\
# presets
[mycp]
dim = 4
curvature = 1
roots = 1:2 2:1
gram = 1

[round]
kind = sphere
dim = 3

[grp]
preset = SU3
";
        let map = parse_space_config(text).unwrap();
        let mycp = &map["mycp"];
        assert_eq!(mycp.roots, preset_by_name("CP2").unwrap().roots);
        assert!((mycp.fundamental_radius - PI / 2.0).abs() < 1e-15);
        assert_eq!(map["round"].dim, 3);
        assert_eq!(map["grp"].roots.rank(), 2);
    }

    #[test]
    fn config_errors() {
        assert!(parse_space_config("dim = 3").is_err());
        assert!(parse_space_config("[x]\ndim = 4\ncurvature = 1\nroots = 1:2\n").is_err());
        assert!(parse_space_config("[x]\ndim = 2\ncurvature = 2\nroots = 1:1\n").is_err());
        assert!(parse_space_config("[x]\ndim = 3\ncurvature = 1\nroots = 1,0:1\ngram = 1 2 2 1\n").is_err());
    }
}
