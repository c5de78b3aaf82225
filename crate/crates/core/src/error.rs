use thiserror::Error;

/// Errors raised by kernel, potential and sampling routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unsupported space: {0}")]
    UnsupportedSpace(String),

    #[error("argument outside the real branch of j: root {root} has {value} at H = {point:?}")]
    BranchDomain {
        root: usize,
        value: f64,
        point: Vec<f64>,
    },

    #[error("branch obstruction: j has a negative radicand with odd multiplicity at lattice index {lattice_index} (x = {x})")]
    BranchObstruction { lattice_index: i64, x: f64 },

    #[error("potential diverges: root {root} reaches a pole at alpha(H) = {alpha_h}")]
    Pole { root: usize, alpha_h: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("reliability error: {0}")]
    Reliability(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
