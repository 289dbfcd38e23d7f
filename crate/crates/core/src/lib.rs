pub mod cli;
pub mod copulas;
pub mod error;
pub mod estimators;
pub mod oracle;
pub mod parallel;
pub mod randkit;
pub mod tilting;

pub use error::{Error, Result};
