pub mod config;
pub mod harte;
pub mod kern;
pub mod tokenize;
pub mod metrics;
pub mod mxl_convert;
pub mod dataset;
pub mod cli;
