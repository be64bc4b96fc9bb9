//! Doubly fed induction generator wind turbine: plant model, nonlinear
//! controller, closed-loop simulation and stability checks.

pub mod controller;
pub mod error;
pub mod linalg;
pub mod plant;
pub mod scenario;
pub mod sim;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex;
