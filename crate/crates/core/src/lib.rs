//! Anisotropic Gelfand-Shilov wave front sets, estimated numerically from the
//! decay of short-time Fourier transforms along anisotropic curves.

pub mod chirp;
pub mod config;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod geometry;
pub mod poly;
pub mod propagator;
pub mod relation;
pub mod report;
pub mod signal;
pub mod stft;

pub use error::{Error, Result};
