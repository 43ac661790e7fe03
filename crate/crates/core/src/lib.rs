pub mod corpus;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod mine;
pub mod model;
pub mod tokenize;

pub use error::{Error, Result};
