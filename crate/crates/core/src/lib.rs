//! Gridless direction-of-arrival estimation for sparse arrays observed at
//! several temporal frequencies and snapshots.

pub mod eig;
pub mod experiments;
pub mod formulations;
pub mod error;
pub mod extraction;
pub mod linalg;
pub mod lifting;
pub mod model;
pub mod solver;

pub use error::{DoaError, Result};
pub use linalg::{CMatrix, C64};
