//! Simulation and rigorous certification toolkit for frog models with drift
//! on d-ary trees.

pub mod address;
pub mod certify;
pub mod error;
pub mod estimate;
pub mod expsum;
pub mod interval;
pub mod io;
pub mod nbbrw;
pub mod params;
pub mod sample;
pub mod seed;
pub mod sfm;
pub mod star;
pub mod stats;
pub mod tree_sim;

pub use error::{FrogError, Result};
pub use params::{derive_params, p_star_limit, Constants, DriftParams, Prob};
pub use seed::SeedSpec;
