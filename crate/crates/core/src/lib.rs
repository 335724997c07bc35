pub mod dag;
pub mod design;
pub mod error;
pub mod gp;
pub mod linalg;
pub mod math;
pub mod prior;
pub mod rng;
pub mod scm;
pub mod session;

pub use error::{Error, Result};
pub mod agent;
pub mod belief;
pub mod config;
