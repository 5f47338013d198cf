pub mod acceptance;
pub mod cli;
pub mod config;
pub mod error;
pub mod geometry;
pub mod horocycle;
pub mod io;
pub mod julienne;
pub mod leaf_measures;
pub mod potentials;
pub mod pressure;
pub mod product_states;
pub mod torusdyn;
pub mod trig;

pub use error::{Error, Result};
