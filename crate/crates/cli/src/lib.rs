//! Batch front end for `medflow`: configuration files, the run pipeline,
//! verification suites and image output.

pub mod config;
pub mod demo;
pub mod error;
pub mod output;
pub mod pipeline;
pub mod raster;
pub mod suites;

pub use config::RunConfig;
pub use error::CliError;
