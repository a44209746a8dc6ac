//! File formats, builtin datasets, JSON reports and the command line for
//! [`deconfound_core`].

pub mod cli;
pub mod csv_io;
pub mod datasets;
pub mod error;
pub mod report;

pub use deconfound_core;
pub use error::{Error, Result};
