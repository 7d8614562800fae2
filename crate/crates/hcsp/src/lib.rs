//! Command-line tools and I/O around `hcsp-core`.

pub mod cli;
pub mod json;
pub mod workers;
