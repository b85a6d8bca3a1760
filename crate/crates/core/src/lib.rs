pub mod dynamics;
pub mod error;
pub mod exec;
pub mod linalg;
pub mod scenario;
pub mod stability;
pub mod structure;
pub mod verdict;

pub use error::{Error, Result};
