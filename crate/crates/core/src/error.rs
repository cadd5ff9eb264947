use thiserror::Error;

/// Errors produced across the crate.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// The communication graph has no spanning connected component
    /// (detected combinatorially or via a vanishing spectral gap).
    #[error("graph is disconnected: {0}")]
    DisconnectedGraph(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("out of domain: {0}")]
    OutOfDomain(String),

    #[error("platoon is not delay-stable: {0}")]
    UnstablePlatoon(String),

    /// A kernel evaluation was requested at a point not strictly inside
    /// the stability region.
    #[error("point ({s1}, {s2}) lies outside the stability region (margin {margin:e})")]
    OutsideStabilityRegion { s1: f64, s2: f64, margin: f64 },

    /// Adaptive quadrature could not meet its error contract.
    #[error("quadrature failure at ({s1}, {s2}): error {achieved:e} exceeds budget {budget:e}")]
    QuadratureFailure {
        s1: f64,
        s2: f64,
        achieved: f64,
        budget: f64,
    },

    /// Gram-Schmidt lost rank while orthonormalizing the rational basis.
    #[error("ill-conditioned basis at s2={s2}: function {index} collapsed (norm ratio {ratio:e})")]
    IllConditionedBasis { s2: f64, index: usize, ratio: f64 },

    /// A surrogate evaluation was requested outside the fit window.
    #[error("outside approximation window: {0}")]
    OutsideWindow(String),

    #[error("invalid event specification: {0}")]
    InvalidSpec(String),

    #[error("invalid confidence split: {0}")]
    InvalidSplit(String),

    /// Trade-off series terms stopped decreasing before the truncation cap.
    #[error("trade-off series diverges (terms non-decreasing at m={0})")]
    SeriesDivergence(usize),

    #[error("invalid timestep: {0}")]
    InvalidTimestep(String),

    /// Integration produced a non-finite state, which signals instability.
    #[error("non-finite state at t={t}")]
    NonfiniteState { t: f64 },

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
}

pub type Result<T> = std::result::Result<T, Error>;
