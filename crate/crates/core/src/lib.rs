pub mod cli;
pub mod cover;
pub mod diagnostics;
pub mod error;
pub mod geometry;
pub mod kernel;
pub mod markov;
pub mod rng;
pub mod series;
pub mod systems;
pub mod transitions;

pub use error::{Result, ZnlError};
