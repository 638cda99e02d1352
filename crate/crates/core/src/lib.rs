//! Contact processes on open clusters of oriented bond percolation in Z^d.
//!
//! The crate provides a lazily realized percolation environment, exact
//! event-driven simulators for the contact process, its dual and the binary
//! contact path process, the static infection-trial field used for
//! second-moment bounds, collision statistics of paired oriented random
//! walks, the mean-field ODE, and a survival-threshold estimator for the
//! critical infection rate.

mod clock;
mod keyed;

pub mod contact;
pub mod environment;
pub mod error;
pub mod estimator;
pub mod lattice;
pub mod mean_field;
pub mod path_process;
pub mod seeds;
pub mod sir;
pub mod stats;
pub mod walk_pair;

pub use error::{Error, Result};
pub use lattice::{DirectedEdge, ModelParams, Vertex};
