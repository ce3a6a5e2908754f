pub mod adversary;
pub mod bloom;
pub mod error;
pub mod harness;
pub mod lsm;
pub mod prp;
pub mod storage;

pub use error::{Error, Result};
