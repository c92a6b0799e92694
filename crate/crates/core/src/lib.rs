//! Momentum-accelerated adaptive cubic regularization (ARCm) and the
//! second-order baselines it is usually compared with.

pub mod cli;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod objective;
pub mod optimizers;
pub mod subproblem;

pub use error::{Error, Result};
