//! Value-at-risk analysis of inter-vehicle collision and detachment for
//! noisy, time-delayed vehicle platoons under second-order consensus
//! control.
//!
//! The crate computes, in closed form, the steady-state statistics of the
//! distances between consecutive vehicles from the Laplacian spectrum of
//! the communication graph, turns them into tri-state value-at-risk
//! measures, and exposes the delay-induced hard limits and the
//! risk-connectivity trade-off. A stochastic-delay simulator provides an
//! independent Monte-Carlo cross-check of every closed form.
//!
//! Modules:
//! - [`graph`]: weighted graphs, Laplacian spectra, effective resistance,
//!   topology generators.
//! - [`stability`]: delay-stability region membership and limits.
//! - [`variance`]: the oscillatory variance kernel, marginal deviations,
//!   the kernel minimum, and the deviation floor.
//! - [`risk`]: closed-form risk values, joint-risk boxes, fundamental
//!   limits, trade-off bound.
//! - [`approx`]: rational surrogate of the kernel over a compact window.
//! - [`sim`]: Euler-Maruyama delay simulation and empirical risk.
//!
//! ```
//! use platoon_risk::{risk, variance, EventSpec, Spectrum, WeightedGraph};
//!
//! // Ten vehicles, all-to-all gains at the low-variance operating point.
//! let graph = WeightedGraph::complete(10, 1.111)?;
//! let spectrum = Spectrum::of_graph(&graph)?;
//! let deviations = variance::sigma_vector(&spectrum, 1.5, 0.1, 2.2)?;
//! let spec = EventSpec::collision(0.5, 1.5, 0.05)?;
//! for value in risk::risk_vector(&deviations, &spec) {
//!     assert!(value.is_finite());
//! }
//! # Ok::<(), platoon_risk::Error>(())
//! ```

// Negated guards like `!(x > 0.0)` are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod approx;
pub mod error;
pub mod graph;
pub mod risk;
pub mod sim;
pub mod stability;
pub mod variance;

mod linalg;
mod optim;
mod quad;
mod roots;
pub mod special;

pub use error::{Error, Result};
pub use graph::{Spectrum, WeightedGraph};
pub use risk::{EventSpec, RiskValue};
pub use sim::PlatoonModel;
pub use variance::MarginalDeviations;
