//! Internal diffusion-limited aggregation on `Z^d`.

pub mod aggregation;
pub mod error;
pub mod experiments;
pub mod flashing;
pub mod greens;
pub mod grid;
pub mod lattice;
pub mod stats;
pub mod tails;
pub mod walk;
pub mod waves;

pub use error::{IdlaError, Result};
