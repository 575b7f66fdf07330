//! Distributed optimal consensus over fixed and switching digraphs.
//!
//! Every node `i` holds a state `x_i ∈ R^m` and a private convex objective
//! `f_i`; it moves along `ẋ_i = J(n_i, ∇f_i(x_i))`, where
//! `n_i = Σ_j a_ij (x_j - x_i)` aggregates its in-neighbors. The crate
//! simulates these flows and checks the consensus/optimality claims made
//! about them: exact optimal consensus when the component argmin sets
//! intersect, ε-optimal consensus under a large coupling gain, Lyapunov
//! monotonicity under switching graphs.
//!
//! The numerical core is generic over [`Scalar`] (`f32` / `f64`); the
//! aliases below fix it to `f64`, which is what the harness and CLI use.

// `!(x > 0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod graph;
pub mod harness;
pub mod linalg;
pub mod objectives;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Digraph = graph::WeightedDigraph<f64>;
pub type Signal = graph::SwitchingSignal<f64>;
pub type Set = objectives::ConvexSet<f64>;
pub type Component = objectives::ConvexComponent<f64>;
pub type Objectives = objectives::ObjectiveSet<f64>;
pub type Law = dynamics::ControlLaw<f64>;
pub type Scenario = dynamics::Scenario<f64>;
pub type Trajectory = dynamics::Trajectory<f64>;
pub type Matrix = linalg::Matrix<f64>;
pub type StationaryPoint = analysis::StationaryPoint<f64>;
