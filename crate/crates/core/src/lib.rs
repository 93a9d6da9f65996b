//! Linear quadratic tracking for discrete-time plants: finite-horizon
//! Riccati sweeps, infinite-horizon discounted policy iteration, and
//! model-free Q-learning from input/state data.

pub mod error;
pub mod finite_lqt;
pub mod infinite_lqt;
pub mod linalg;
pub mod metrics;
pub mod qlearning;
pub mod state_space;

pub use error::{LqtError, Result};
pub use linalg::{Matrix, Vector};
