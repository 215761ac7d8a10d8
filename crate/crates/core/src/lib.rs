pub mod cli;
pub mod dynamics;
pub mod error;
pub mod memory;
pub mod numerics;
pub mod readout;
pub mod selection;
pub mod tasks;
pub mod topology;

pub use error::{Error, Result};
