//! Optimal placement and cancellation of a small buy order on a
//! queue-reactive model of the best bid and ask queues.

pub mod calibrate;
pub mod config;
pub mod dp;
pub mod ergodicity;
pub mod error;
pub mod figures;
pub mod linalg;
pub mod impact;
pub mod model;
pub mod simulate;

pub use error::{Error, Result};
