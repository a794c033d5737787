//! Simulation and certification laboratory for score-based generative models
//! on Gaussian data with unknown mean.
//!
//! The crate covers the whole pipeline of the motivating Gaussian example:
//! forward Ornstein-Uhlenbeck noising ([`ou`]), score matching with
//! stochastic gradient Langevin dynamics ([`score_matching`]), and
//! Euler-Maruyama backward sampling ([`sampler`]). On top of that it evaluates
//! the explicit Wasserstein-2 convergence bounds and their parameter budgets
//! ([`bounds`]) and checks every supporting moment inequality by Monte Carlo
//! ([`verify`]).

pub mod bounds;
pub mod cli;
pub mod config;
pub mod error;
pub mod ext;
pub mod gaussian;
pub mod metrics;
pub mod ou;
pub mod rng;
pub mod sampler;
pub mod score;
pub mod score_matching;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use ext::ExtFloat;
pub use gaussian::{AffineScoreConstants, GaussianProblem};
pub use ou::{OuSchedule, Quadrature, TimeGrid};
pub use score::{AffineFamily, ScoreFamily};
pub use stats::McEstimate;
