pub mod acquisition;
pub mod baseline;
pub mod config;
pub mod error;
pub mod gp;
pub mod harness;
pub mod kernels;
pub mod lhs;
pub mod likelihood;
pub mod linalg;
pub mod local_model;
pub mod optimizer;
pub mod problems;
pub mod seed;
pub mod solver;
pub mod trace;

pub use error::{GeboError, Result};
