//! Long-run control of nonhomogeneous Markov decision processes on finite
//! state spaces.
//!
//! The crate solves the average-reward Bellman equation
//!
//! ```text
//! w_n(x) = max_a [ c_n(x,a) - lambda_n + sum_y P_n^a(x,y) w_{n+1}(y) ]
//! ```
//!
//! and its risk-sensitive counterpart, in which the expectation is replaced
//! by `(1/gamma) ln E[e^{gamma w_{n+1}}]`, for models whose stage data is a
//! finite prefix followed by a repeating block. Solutions are built by
//! backward iteration of the one-stage operators, which contract in the span
//! seminorm at the rate given by per-stage Dobrushin coefficients.
//!
//! Module map:
//!
//! * [`model`]: model representation, JSON documents, validation;
//! * [`coefficients`]: ergodicity, ratio and remainder coefficients;
//! * [`operators`]: one-stage Bellman operators, selectors, span utilities;
//! * [`solver`]: Bellman and Poisson solvers, a priori error bounds;
//! * [`analysis`]: exact finite-horizon oracles, Hoeffding gaps, gain
//!   curves in `gamma`, stability traces, Monte Carlo;
//! * [`cli`]: the `nhmdp` command line.

pub mod analysis;
pub mod cli;
pub mod coefficients;
pub mod error;
pub mod fixtures;
pub mod model;
pub mod operators;
pub mod solver;

pub use error::{Error, Result};
pub use model::{load_model, ActionData, ActionSpace, Control, Model, Stage};
pub use operators::{PolicySchedule, Selector, SpanVector};
pub use solver::{RiskSolution, SolveOptions, Solution};
