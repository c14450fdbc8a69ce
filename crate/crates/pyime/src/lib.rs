pub mod build;
pub mod config;
pub mod error;
pub mod eval;
pub mod io;
pub mod service;
pub mod train;

pub use error::{Error, Result};
