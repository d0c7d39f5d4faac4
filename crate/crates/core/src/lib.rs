//! Magnetic field-gradient tensor estimation from differential Ramsey
//! interferometry of two spin-1 atom clouds.

pub mod cli;
pub mod constants;
pub mod ellipse;
pub mod error;
pub mod fieldmodel;
pub mod io;
pub mod linalg;
pub mod pipeline;
pub mod quadrature;
pub mod reproduce;
pub mod rng;
pub mod scenario;
pub mod sensitivity;
pub mod spinsim;

pub use error::{Error, Result};
