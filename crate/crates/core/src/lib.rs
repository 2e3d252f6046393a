//! Mean-field variational inference for probabilistic integer submodular models.
//!
//! A probabilistic integer submodular model is a Gibbs distribution
//! `p(x) ∝ exp(f(x))` over the integer lattice `{0, …, k-1}^n`, where the
//! energy `f` is submodular on the lattice. Approximating `p` by a product of
//! independent categorical distributions turns inference into maximizing
//!
//! ```text
//! ELBO(ρ) = F(ρ) + Σ_i H(ρ_i)
//! ```
//!
//! where `F(ρ) = E[f(R(ρ))]` is the generalized multilinear extension of `f`.
//! `F` is DR-submodular whenever `f` is lattice submodular, so the ELBO can be
//! maximized with guaranteed algorithms.
//!
//! Crate layout:
//!
//! - [`lattice`]: lattice points, join/meet/difference, enumeration and
//!   brute-force submodularity checkers.
//! - [`objective`]: the [`Objective`] trait and the revenue and facility
//!   location energies.
//! - [`marginals`]: the product-of-categoricals family.
//! - [`gme`]: exact and Monte Carlo evaluation of the extension and its gradient.
//! - [`inference`]: the ELBO, the log-partition oracle, Block Coordinate Ascent
//!   and the two Frank–Wolfe variants.
//! - [`harness`]: edge-list loading, experiment configs and result bundles.

pub mod error;
pub mod gme;
pub mod harness;
pub mod inference;
pub mod lattice;
pub mod marginals;
pub mod objective;
pub mod rng;

mod par;

pub use error::{Error, Result};
pub use gme::{EstimateWithError, GradientMatrix};
pub use lattice::{CheckReport, IntegerPoint, LatticeDomain, Witness};
pub use marginals::ProductCategorical;
pub use objective::{Objective, ObjectiveHandle, ValueRange};
pub use rng::SeedStream;
