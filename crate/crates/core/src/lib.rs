pub mod config;
pub mod constants;
pub mod detector;
pub mod eit;
pub mod error;
pub mod heterodyne;
pub mod limits;
pub mod output;
pub mod pointer;
pub mod quadrature;
pub mod runner;
pub mod special;
pub mod stabilization;

pub use error::{Error, Result};
