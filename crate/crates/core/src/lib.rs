pub mod error;
pub mod estimators;
pub mod exec;
pub mod experiment;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod samplers;
pub mod specfun;
pub mod verify;

pub use error::{Error, Result};
